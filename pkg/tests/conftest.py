"""Shared fixtures: small CSV builders and cached synthetic frames."""

from __future__ import annotations

import csv
from pathlib import Path

import pytest

from matchdid.frames import COLUMNS, load_frame
from matchdid.synthetic import benchmark_confounded, generate

VALID_ROW = {
    "hhid": "h001",
    "state": 32,  # Kerala
    "age": 40,
    "religion": 1,
    "caste": 3,
    "bpl_card": 0,
    "wealth_index": 3,
    "education": 8,
    "urban_rural": 2,
    "gender": 1,
    "hh_size": 5,
    "cooking_fuel": 8,
}


def make_row(**overrides) -> dict:
    row = dict(VALID_ROW)
    row.update(overrides)
    return row


def write_csv(path: Path, rows, header=COLUMNS) -> Path:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(header))
        writer.writeheader()
        for row in rows:
            writer.writerow(row)
    return path


@pytest.fixture
def csv_factory(tmp_path):
    """Write a list of row dicts to a throwaway CSV and return its path."""

    counter = {"n": 0}

    def build(rows, header=COLUMNS, name=None):
        counter["n"] += 1
        return write_csv(tmp_path / (name or f"input{counter['n']}.csv"), rows, header)

    return build


@pytest.fixture(scope="session")
def bench_spec():
    return benchmark_confounded(n_per_wave=4000, seed=909)


@pytest.fixture(scope="session")
def bench_frames(bench_spec):
    return {wave: generate(bench_spec, wave) for wave in ("pre", "post")}


@pytest.fixture(scope="session")
def bench_csvs(tmp_path_factory, bench_frames):
    """The benchmark frames serialized to the documented CSV schema."""
    from matchdid.frames import save_frame

    root = tmp_path_factory.mktemp("bench_csvs")
    paths = {}
    for wave, frame in bench_frames.items():
        paths[wave] = root / f"bench_{wave}.csv"
        save_frame(frame, paths[wave])
    return paths


@pytest.fixture
def loaded_bench(bench_csvs):
    return {wave: load_frame(path, wave) for wave, path in bench_csvs.items()}
