"""Validated survey tables.

A frame is one wave of household records loaded from delimited text.
Validation is listwise: a row either passes every rule or is rejected with
a row number, the offending field, and a reason. The documented schema:

======================  =======================================================
column                  constraint
======================  =======================================================
hhid                    non-empty string, unique within the file
state                   integer code present in the active zone table
age                     integer in [10, 98]
religion                integer in {1..9, 96}
caste                   integer in {1, 2, 3, 4, 8}
bpl_card                integer in {0, 1}; 1 marks the treated group
wealth_index            integer in [1, 5]
education               non-negative integer
urban_rural             integer in {1, 2}
gender                  integer in {1, 2}
hh_size                 integer in [1, 41]
cooking_fuel            integer in {1,2,3,5,6,7,8,9,10,11,95,96}
======================  =======================================================

Two outcome booleans are derived at load time from ``cooking_fuel``:
``lpg_access`` (code 2) and ``firewood_use`` (code 8). The raw code is kept
so a loaded frame re-serializes to the same table.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
import pandas as pd

from .errors import EmptyGroupError, SchemaError, SchemaMismatchError
from .zones import Zone, ZONE_ORDER, ZoneMap, default_zone_map


class Wave(str, enum.Enum):
    """Survey round. Cross-sections are repeated, not panel."""

    PRE = "pre"
    POST = "post"

    def __str__(self) -> str:  # pragma: no cover - cosmetic
        return self.value


#: Canonical column order for input and serialized files. Also the priority
#: order when several fields in one row are invalid: the first listed wins.
COLUMNS: tuple[str, ...] = (
    "hhid",
    "state",
    "age",
    "religion",
    "caste",
    "bpl_card",
    "wealth_index",
    "education",
    "urban_rural",
    "gender",
    "hh_size",
    "cooking_fuel",
)

#: Columns derived at load time; valid targets for filters and tables.
DERIVED_COLUMNS: tuple[str, ...] = ("treated", "lpg_access", "firewood_use", "zone")

_RANGES: dict[str, tuple[int, int | None]] = {
    "age": (10, 98),
    "wealth_index": (1, 5),
    "education": (0, None),
    "hh_size": (1, 41),
}

_MEMBERSHIP: dict[str, frozenset[int]] = {
    "religion": frozenset({1, 2, 3, 4, 5, 6, 7, 8, 9, 96}),
    "caste": frozenset({1, 2, 3, 4, 8}),
    "bpl_card": frozenset({0, 1}),
    "urban_rural": frozenset({1, 2}),
    "gender": frozenset({1, 2}),
    "cooking_fuel": frozenset({1, 2, 3, 5, 6, 7, 8, 9, 10, 11, 95, 96}),
}

_LPG_CODE = 2
_FIREWOOD_CODE = 8

#: Share of rejected rows above which the file is treated as not matching
#: the schema at all.
REJECTION_ABORT_SHARE = 0.5


@dataclass(frozen=True)
class ObservationRecord:
    """One household row in the documented schema."""

    hhid: str
    state: int
    age: int
    religion: int
    caste: int
    bpl_card: int
    wealth_index: int
    education: int
    urban_rural: int
    gender: int
    hh_size: int
    cooking_fuel: int

    @property
    def treated(self) -> bool:
        return self.bpl_card == 1

    @property
    def lpg_access(self) -> bool:
        return self.cooking_fuel == _LPG_CODE

    @property
    def firewood_use(self) -> bool:
        return self.cooking_fuel == _FIREWOOD_CODE

    def violations(self, zone_map: ZoneMap | None = None) -> list[tuple[str, str]]:
        """(field, reason) pairs for every rule this record breaks."""
        zone_map = zone_map or default_zone_map()
        out: list[tuple[str, str]] = []
        if not str(self.hhid).strip():
            out.append(("hhid", "missing value"))
        if int(self.state) not in zone_map.by_code:
            out.append(("state", f"state code {self.state} not in zone table"))
        for name, (lo, hi) in _RANGES.items():
            value = int(getattr(self, name))
            if value < lo or (hi is not None and value > hi):
                bound = f"[{lo}, {hi}]" if hi is not None else f">= {lo}"
                out.append((name, f"{name} {value} outside {bound}"))
        for name, allowed in _MEMBERSHIP.items():
            value = int(getattr(self, name))
            if value not in allowed:
                out.append((name, f"{name} code {value} not in {sorted(allowed)}"))
        return out


@dataclass(frozen=True)
class Rejection:
    """One rejected row: 1-based data row number, field, reason."""

    row: int
    field: str
    reason: str


@dataclass(frozen=True)
class Provenance:
    source: str
    n_read: int
    n_accepted: int
    n_rejected: int
    rejections: tuple[Rejection, ...] = ()
    missing_counts: Mapping[str, int] = field(default_factory=dict)
    note: str = ""


_DTYPES = {
    "state": np.int16,
    "age": np.int16,
    "religion": np.int16,
    "caste": np.int16,
    "bpl_card": np.int16,
    "wealth_index": np.int16,
    "education": np.int16,
    "urban_rural": np.int16,
    "gender": np.int16,
    "hh_size": np.int16,
    "cooking_fuel": np.int16,
}


class AnalysisFrame:
    """A validated, single-wave table. Treat instances as immutable; all
    operations that change the row set return a new frame."""

    def __init__(
        self,
        data: pd.DataFrame,
        wave: Wave | str,
        provenance: Provenance | None = None,
    ):
        self._df = data
        self.wave = Wave(wave)
        self.provenance = provenance or Provenance(
            source="<memory>",
            n_read=len(data),
            n_accepted=len(data),
            n_rejected=0,
        )
        self._id_index: pd.Index | None = None

    def __len__(self) -> int:
        return len(self._df)

    def __repr__(self) -> str:
        return (
            f"AnalysisFrame(wave={self.wave.value!r}, rows={len(self)}, "
            f"treated={int(self.treated().sum())})"
        )

    @property
    def columns(self) -> tuple[str, ...]:
        return COLUMNS + DERIVED_COLUMNS

    def column(self, name: str) -> np.ndarray:
        """Column values as a numpy array (do not mutate)."""
        if name not in self._df.columns:
            raise SchemaError(
                f"unknown column {name!r}; expected one of {list(self.columns)}"
            )
        if name == "zone":
            return self._df["zone"].to_numpy(dtype=object)
        return self._df[name].to_numpy()

    def ids(self) -> np.ndarray:
        return self._df["hhid"].to_numpy()

    def treated(self) -> np.ndarray:
        return self._df["treated"].to_numpy()

    def positions_of(self, ids: np.ndarray) -> np.ndarray:
        """Row positions of the given hhids (every id must be present)."""
        if self._id_index is None:
            self._id_index = pd.Index(self._df["hhid"])
        pos = self._id_index.get_indexer(ids)
        if (pos < 0).any():
            missing = np.asarray(ids)[pos < 0][:5]
            raise SchemaError(f"hhids not present in frame: {list(missing)} ...")
        return pos

    def to_dataframe(self) -> pd.DataFrame:
        """A defensive copy including derived columns."""
        return self._df.copy()

    @classmethod
    def from_dataframe(
        cls,
        data: pd.DataFrame,
        wave: Wave | str,
        zone_map: ZoneMap | None = None,
        source: str = "<memory>",
        validate: bool = True,
    ) -> "AnalysisFrame":
        """Build a frame from an in-memory table with the schema columns.

        With ``validate=True`` the same listwise rules as :func:`load_frame`
        apply (rejected rows are dropped and recorded in the provenance).
        """
        zone_map = zone_map or default_zone_map()
        missing_cols = [c for c in COLUMNS if c not in data.columns]
        if missing_cols:
            raise SchemaError(f"missing required columns: {missing_cols}")
        raw = {c: data[c] for c in COLUMNS}
        if validate:
            return _assemble(raw, wave, zone_map, source=source)
        df = pd.DataFrame({c: raw[c].to_numpy() for c in COLUMNS})
        return cls(_finalize(df, zone_map), wave)


def _numericize(col: pd.Series) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(values, missing_mask, bad_mask) for one raw column.

    ``bad`` marks present values that are not integers.
    """
    if col.dtype == object or pd.api.types.is_string_dtype(col):
        stripped = col.str.strip() if hasattr(col, "str") else col
        missing = stripped.isna() | (stripped == "") | (stripped == ".")
        numeric = pd.to_numeric(stripped.mask(missing), errors="coerce")
    else:
        numeric = pd.to_numeric(col, errors="coerce")
        missing = col.isna()
    values = numeric.to_numpy(dtype=float, na_value=np.nan)
    present = ~missing.to_numpy()
    bad = present & (np.isnan(values) | (values != np.floor(values)))
    return values, ~present, bad


def load_frame(
    path: str | Path,
    wave: Wave | str,
    delimiter: str = ",",
    zone_map: ZoneMap | None = None,
) -> AnalysisFrame:
    """Load and validate one wave from a delimited UTF-8 file.

    Parameters
    ----------
    path : file with a header row using the documented column names
        (case-insensitive). Extra columns are ignored.
    wave : which survey round the file holds ("pre" or "post").
    delimiter : field separator, comma by default (use "\\t" for TSV).
    zone_map : alternative state-to-zone table; packaged table by default.

    Raises
    ------
    SchemaError
        If required columns are absent.
    SchemaMismatchError
        If more than half of the data rows fail validation.
    """
    zone_map = zone_map or default_zone_map()
    try:
        df = pd.read_csv(
            path,
            sep=delimiter,
            dtype={"hhid": str},
            encoding="utf-8",
            skipinitialspace=True,
            na_values=["."],
        )
    except pd.errors.EmptyDataError:
        raise SchemaError(f"{path}: file is empty (no header row)") from None
    df.columns = [str(c).strip().lower() for c in df.columns]
    missing_cols = [c for c in COLUMNS if c not in df.columns]
    if missing_cols:
        raise SchemaError(
            f"{path}: missing required columns {missing_cols}; "
            f"found {list(df.columns)}"
        )
    if len(df) == 0:
        warnings.warn(f"{path}: no data rows", stacklevel=2)
    return _assemble(
        {c: df[c] for c in COLUMNS}, wave, zone_map, source=str(path)
    )


def _assemble(
    raw: Mapping[str, pd.Series],
    wave: Wave | str,
    zone_map: ZoneMap,
    source: str,
) -> AnalysisFrame:
    """Shared validation core for the CSV and in-memory paths."""
    n = len(raw["hhid"])
    reason_idx = np.full(n, -1, dtype=np.int32)  # index into rule list
    reason_value = np.zeros(n, dtype=float)
    missing_counts: dict[str, int] = {}

    # Rule list: (field, kind). Assignment order is priority order.
    rules: list[tuple[str, str]] = []

    def _claim(mask: np.ndarray, fld: str, kind: str) -> None:
        take = mask & (reason_idx < 0)
        if take.any():
            rules.append((fld, kind))
            reason_idx[take] = len(rules) - 1

    hhid = raw["hhid"]
    if hhid.dtype != object and not pd.api.types.is_string_dtype(hhid):
        hhid = hhid.astype(str)
    hhid = hhid.fillna("").str.strip()
    hh_missing = (hhid == "").to_numpy()
    missing_counts["hhid"] = int(hh_missing.sum())
    _claim(hh_missing, "hhid", "missing")
    dup = hhid.duplicated(keep="first").to_numpy() & ~hh_missing
    _claim(dup, "hhid", "duplicate")

    values: dict[str, np.ndarray] = {}
    for name in COLUMNS[1:]:
        vals, miss, bad = _numericize(raw[name])
        missing_counts[name] = int(miss.sum())
        _claim(miss, name, "missing")
        _claim(bad, name, "not_integer")
        values[name] = vals
        with np.errstate(invalid="ignore"):
            if name == "state":
                lut = np.zeros(max(zone_map.by_code) + 2, dtype=bool)
                lut[list(zone_map.by_code)] = True
                codes = np.nan_to_num(vals, nan=-1).astype(np.int64)
                ok = (codes >= 0) & (codes < len(lut)) & lut[np.clip(codes, 0, len(lut) - 1)]
                fail = ~ok & ~miss & ~bad
                reason_value[fail & (reason_idx < 0)] = vals[fail & (reason_idx < 0)]
                _claim(fail, name, "state_unmapped")
            elif name in _RANGES:
                lo, hi = _RANGES[name]
                fail = (vals < lo) if hi is None else ((vals < lo) | (vals > hi))
                fail = fail & ~miss & ~bad
                reason_value[fail & (reason_idx < 0)] = vals[fail & (reason_idx < 0)]
                _claim(fail, name, "range")
            else:
                allowed = np.array(sorted(_MEMBERSHIP[name]))
                fail = ~np.isin(np.nan_to_num(vals, nan=-1), allowed) & ~miss & ~bad
                reason_value[fail & (reason_idx < 0)] = vals[fail & (reason_idx < 0)]
                _claim(fail, name, "membership")

    rejected = reason_idx >= 0
    n_rejected = int(rejected.sum())
    if n > 0 and n_rejected / n > REJECTION_ABORT_SHARE:
        tally: dict[str, int] = {}
        for k, (fld, kind) in enumerate(rules):
            cnt = int((reason_idx == k).sum())
            if cnt:
                tally[f"{fld}/{kind}"] = cnt
        raise SchemaMismatchError(
            f"{source}: {n_rejected} of {n} rows ({n_rejected / n:.0%}) failed "
            f"validation; the file likely does not follow the schema. "
            f"Failures by field: {tally}"
        )

    rejections = _build_rejections(
        np.flatnonzero(rejected), reason_idx, reason_value, rules, hhid
    )

    keep = ~rejected
    df = pd.DataFrame({"hhid": hhid.to_numpy()[keep]})
    for name in COLUMNS[1:]:
        df[name] = values[name][keep].astype(_DTYPES[name])
    prov = Provenance(
        source=source,
        n_read=n,
        n_accepted=int(keep.sum()),
        n_rejected=n_rejected,
        rejections=rejections,
        missing_counts=missing_counts,
    )
    return AnalysisFrame(_finalize(df, zone_map), wave, prov)


def _build_rejections(
    rows: np.ndarray,
    reason_idx: np.ndarray,
    reason_value: np.ndarray,
    rules: Sequence[tuple[str, str]],
    hhid: pd.Series,
) -> tuple[Rejection, ...]:
    out = []
    hh = hhid.to_numpy()
    for i in rows:
        fld, kind = rules[reason_idx[i]]
        if kind == "missing":
            reason = "missing value"
        elif kind == "duplicate":
            reason = f"duplicate hhid {hh[i]!r}"
        elif kind == "not_integer":
            reason = f"{fld} is not an integer"
        elif kind == "state_unmapped":
            reason = f"state code {int(reason_value[i])} not in zone table"
        elif kind == "range":
            lo, hi = _RANGES[fld]
            bound = f"[{lo}, {hi}]" if hi is not None else f">= {lo}"
            reason = f"{fld} {int(reason_value[i])} outside {bound}"
        else:
            allowed = sorted(_MEMBERSHIP[fld])
            reason = f"{fld} code {int(reason_value[i])} not in {allowed}"
        out.append(Rejection(row=int(i) + 1, field=fld, reason=reason))
    return tuple(out)


def _finalize(df: pd.DataFrame, zone_map: ZoneMap) -> pd.DataFrame:
    """Attach derived columns to a validated table."""
    df = df.reset_index(drop=True)
    df["treated"] = df["bpl_card"].to_numpy() == 1
    fuel = df["cooking_fuel"].to_numpy()
    df["lpg_access"] = fuel == _LPG_CODE
    df["firewood_use"] = fuel == _FIREWOOD_CODE
    labels = [z.value for z in ZONE_ORDER]
    lut = np.full(max(zone_map.by_code) + 1, -1, dtype=np.int8)
    for code, zone in zone_map.by_code.items():
        lut[code] = labels.index(zone.value)
    codes = lut[df["state"].to_numpy(dtype=np.int64)]
    df["zone"] = pd.Categorical.from_codes(codes, categories=labels)
    return df


def save_frame(frame: AnalysisFrame, path: str | Path, delimiter: str = ",") -> None:
    """Serialize a frame back to the documented delimited schema.

    Loading the result reproduces the frame (round-trip stability); derived
    columns are not written.
    """
    out = frame.to_dataframe()[list(COLUMNS)]
    out.to_csv(path, sep=delimiter, index=False, lineterminator="\n")


_OPS = {
    "==": lambda col, v: col == v,
    "!=": lambda col, v: col != v,
    "<": lambda col, v: col < v,
    "<=": lambda col, v: col <= v,
    ">": lambda col, v: col > v,
    ">=": lambda col, v: col >= v,
}


def filter_subgroup(
    frame: AnalysisFrame,
    predicates: Iterable[Sequence],
) -> AnalysisFrame:
    """Rows satisfying every (field, op, value) triple.

    ``field`` is any schema or derived column, ``op`` one of
    ``== != < <= > >=``. Conjunctions are order-insensitive. The result may
    be empty; it is still a valid frame.
    """
    mask = np.ones(len(frame), dtype=bool)
    applied = []
    for triple in predicates:
        if len(triple) != 3:
            raise SchemaError(f"predicate must be (field, op, value), got {triple!r}")
        fld, op, value = triple
        if op not in _OPS:
            raise SchemaError(f"unknown operator {op!r}; expected one of {list(_OPS)}")
        if fld == "zone":
            value = Zone(value).value if not isinstance(value, Zone) else value.value
            if op not in ("==", "!="):
                raise SchemaError("zone only supports == and !=")
        col = frame.column(fld)
        mask &= np.asarray(_OPS[op](col, value), dtype=bool)
        applied.append(f"{fld}{op}{value}")
    df = frame.to_dataframe()[mask].reset_index(drop=True)
    prov = Provenance(
        source=frame.provenance.source,
        n_read=len(frame),
        n_accepted=int(mask.sum()),
        n_rejected=0,
        note="filter: " + " and ".join(applied) if applied else "filter: (none)",
    )
    return AnalysisFrame(df, frame.wave, prov)


@dataclass(frozen=True)
class ProportionRow:
    group: object
    proportion: float | None  # percent; None when the group is empty
    count: int


@dataclass(frozen=True)
class ProportionTable:
    group_field: str
    indicator_field: str
    rows: tuple[ProportionRow, ...]
    overall_proportion: float
    total_count: int


def proportion_table(
    frame: AnalysisFrame,
    group_field: str,
    indicator_field: str,
    groups: Sequence | None = None,
) -> ProportionTable:
    """Percent share of ``indicator_field`` within each ``group_field`` level.

    Proportions are on the 0-100 scale. Zone grouping always lists all six
    zones; a level with no members gets ``proportion=None`` (rendered as an
    em-dash downstream) rather than NaN.
    """
    indicator = np.asarray(frame.column(indicator_field))
    if indicator.dtype != bool:
        uniq = np.unique(indicator)
        if not np.isin(uniq, (0, 1)).all():
            raise SchemaError(
                f"indicator {indicator_field!r} must be binary, saw values {uniq[:6]}"
            )
        indicator = indicator.astype(bool)
    if len(indicator) == 0:
        raise EmptyGroupError("cannot tabulate an empty frame")
    col = frame.column(group_field)
    if groups is None:
        if group_field == "zone":
            groups = [z.value for z in ZONE_ORDER]
        else:
            groups = sorted(pd.unique(col).tolist())
    rows = []
    for g in groups:
        label = g.value if isinstance(g, Zone) else g
        sel = col == label
        cnt = int(np.sum(sel))
        prop = float(100.0 * indicator[sel].mean()) if cnt else None
        rows.append(ProportionRow(group=label, proportion=prop, count=cnt))
    return ProportionTable(
        group_field=group_field,
        indicator_field=indicator_field,
        rows=tuple(rows),
        overall_proportion=float(100.0 * indicator.mean()),
        total_count=len(indicator),
    )
