"""Geographic zone lookup for state codes.

The assignment lives in a plain CSV asset (``assets/state_zones.csv``) so
deployments can edit the grouping without touching code.
"""

from __future__ import annotations

import csv
import enum
import functools
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping

from .errors import SchemaError, UnmappedStateError


class Zone(str, enum.Enum):
    """The six reporting zones, in their conventional order."""

    NORTH = "North"
    NORTH_EAST = "NorthEast"
    CENTRAL = "Central"
    EAST = "East"
    WEST = "West"
    SOUTH = "South"

    def __str__(self) -> str:  # pragma: no cover - cosmetic
        return self.value


#: Fixed rendering order for zone-grouped tables.
ZONE_ORDER: tuple[Zone, ...] = (
    Zone.NORTH,
    Zone.NORTH_EAST,
    Zone.CENTRAL,
    Zone.EAST,
    Zone.WEST,
    Zone.SOUTH,
)


@dataclass(frozen=True)
class ZoneMap:
    """Immutable state-code to zone assignment.

    Every state appears in exactly one zone; codes absent from the table
    (for example union territories) raise :class:`UnmappedStateError`.
    """

    by_code: Mapping[int, Zone]
    names: Mapping[int, str]

    @classmethod
    def from_rows(cls, rows: Iterable[tuple[int, str, str]]) -> "ZoneMap":
        by_code: dict[int, Zone] = {}
        names: dict[int, str] = {}
        for code, name, zone_label in rows:
            code = int(code)
            if code in by_code:
                raise SchemaError(f"state code {code} listed twice in zone table")
            try:
                zone = Zone(zone_label)
            except ValueError:
                raise SchemaError(
                    f"unknown zone {zone_label!r} for state code {code}; "
                    f"expected one of {[z.value for z in ZONE_ORDER]}"
                ) from None
            by_code[code] = zone
            names[code] = name
        if not by_code:
            raise SchemaError("zone table is empty")
        return cls(by_code=by_code, names=names)

    @classmethod
    def from_csv(cls, path: str | Path) -> "ZoneMap":
        """Load an assignment from a CSV with columns
        ``state_code,state_name,zone``. Lines starting with ``#`` are
        comments."""
        with open(path, newline="", encoding="utf-8") as fh:
            return cls._parse(fh)

    @classmethod
    def _parse(cls, fh) -> "ZoneMap":
        reader = csv.DictReader(line for line in fh if not line.startswith("#"))
        required = {"state_code", "state_name", "zone"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise SchemaError(
                f"zone table must have columns {sorted(required)}, "
                f"got {reader.fieldnames}"
            )
        return cls.from_rows(
            (int(row["state_code"]), row["state_name"].strip(), row["zone"].strip())
            for row in reader
        )

    def zone_of(self, state_code: int) -> Zone:
        try:
            return self.by_code[int(state_code)]
        except KeyError:
            raise UnmappedStateError(
                f"state code {state_code} has no zone assignment; "
                "union territories and unknown codes are not mapped"
            ) from None

    def states(self) -> tuple[int, ...]:
        return tuple(sorted(self.by_code))

    def states_in(self, zone: Zone) -> tuple[int, ...]:
        return tuple(sorted(c for c, z in self.by_code.items() if z is zone))


@functools.lru_cache(maxsize=1)
def default_zone_map() -> ZoneMap:
    """The packaged assignment (29 states, 6 zones)."""
    ref = resources.files("matchdid.assets").joinpath("state_zones.csv")
    with ref.open("r", encoding="utf-8") as fh:
        return ZoneMap._parse(fh)


def zone_of(state_code: int, zone_map: ZoneMap | None = None) -> Zone:
    """Zone for a state code, using the packaged table by default."""
    return (zone_map or default_zone_map()).zone_of(state_code)
