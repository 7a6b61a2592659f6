#!/usr/bin/env python3
"""Download the benchmark datasets and write them as plain numeric CSVs.

Each dataset lands in data/<name>.csv with purely numeric feature columns
and the regression target in a final column named `target`, matching the
configs under configs/. Non-numeric columns are dropped (the pipeline is
numeric-only); leaky columns are removed where noted.

Requires: pandas, scikit-learn (for the OpenML fetches), network access.

Usage: python3 scripts/fetch_datasets.py [names...]
       (default: all of wn ae bs sc el ca dm)
"""

import io
import sys
import urllib.request
import zipfile
from pathlib import Path

import pandas as pd

DATA_DIR = Path(__file__).resolve().parent.parent / "data"

EXPECTED_ROWS = {
    "wn": 6497,
    "ae": 13750,
    "bs": 17379,
    "sc": 21263,
    "el": 16599,
    "ca": 8192,
    "dm": 53940,
}


def fetch_zip(url: str) -> zipfile.ZipFile:
    print(f"  downloading {url}")
    with urllib.request.urlopen(url, timeout=120) as r:
        return zipfile.ZipFile(io.BytesIO(r.read()))


def from_openml(name: str, version: int = 1) -> pd.DataFrame:
    from sklearn.datasets import fetch_openml

    print(f"  fetching OpenML dataset {name!r}")
    bunch = fetch_openml(name=name, version=version, as_frame=True, parser="auto")
    frame = bunch.frame.copy()
    frame["__target__"] = pd.to_numeric(bunch.target, errors="coerce")
    return frame


def finalize(df: pd.DataFrame, target: str, out_name: str) -> None:
    df = df.rename(columns={target: "target"})
    numeric = df.select_dtypes(include="number").copy()
    if "target" not in numeric.columns:
        raise SystemExit(f"{out_name}: target column {target!r} is not numeric")
    cols = [c for c in numeric.columns if c != "target"] + ["target"]
    numeric = numeric[cols].dropna()
    expected = EXPECTED_ROWS[out_name]
    if len(numeric) != expected:
        print(f"  warning: {out_name} has {len(numeric)} rows, expected {expected}")
    DATA_DIR.mkdir(exist_ok=True)
    path = DATA_DIR / f"{out_name}.csv"
    numeric.to_csv(path, index=False)
    print(f"  wrote {path} ({len(numeric)} rows, {len(cols) - 1} features)")


def fetch_wn() -> None:
    z = fetch_zip("https://archive.ics.uci.edu/static/public/186/wine+quality.zip")
    red = pd.read_csv(z.open("winequality-red.csv"), sep=";")
    white = pd.read_csv(z.open("winequality-white.csv"), sep=";")
    finalize(pd.concat([red, white], ignore_index=True), "quality", "wn")


def fetch_bs() -> None:
    z = fetch_zip("https://archive.ics.uci.edu/static/public/275/bike+sharing+dataset.zip")
    df = pd.read_csv(z.open("hour.csv"))
    # casual + registered sum to the target; dteday/instant are identifiers
    df = df.drop(columns=["instant", "dteday", "casual", "registered"])
    finalize(df, "cnt", "bs")


def fetch_sc() -> None:
    z = fetch_zip("https://archive.ics.uci.edu/static/public/464/superconductivty+data.zip")
    df = pd.read_csv(z.open("train.csv"))
    finalize(df, "critical_temp", "sc")


def fetch_ae() -> None:
    df = from_openml("ailerons")
    finalize(df.drop(columns=["goal"], errors="ignore"), "__target__", "ae")


def fetch_el() -> None:
    df = from_openml("elevators")
    finalize(df.drop(columns=["Goal"], errors="ignore"), "__target__", "el")


def fetch_ca() -> None:
    df = from_openml("cpu_act")
    finalize(df.drop(columns=["usr"], errors="ignore"), "__target__", "ca")


def fetch_dm() -> None:
    df = from_openml("diamonds")
    finalize(df.drop(columns=["price"], errors="ignore"), "__target__", "dm")


FETCHERS = {
    "wn": fetch_wn,
    "ae": fetch_ae,
    "bs": fetch_bs,
    "sc": fetch_sc,
    "el": fetch_el,
    "ca": fetch_ca,
    "dm": fetch_dm,
}


def main() -> None:
    names = sys.argv[1:] or list(FETCHERS)
    for name in names:
        if name not in FETCHERS:
            raise SystemExit(f"unknown dataset {name!r}; choose from {sorted(FETCHERS)}")
        print(f"{name}:")
        FETCHERS[name]()


if __name__ == "__main__":
    main()
