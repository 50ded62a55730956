"""CSV writers for analytic curves."""

from __future__ import annotations

import csv
import io
import math
from contextlib import contextmanager
from pathlib import Path

from .spatial import SpatialProfile


@contextmanager
def _sink(target):
    if isinstance(target, (str, Path)):
        with open(target, "w", newline="", encoding="utf-8") as fh:
            yield fh
    else:
        yield target


def _fmt(x: float) -> str:
    if not math.isfinite(x):
        raise ValueError(f"refusing to write non-finite value {x!r}")
    return repr(float(x))


def write_rows(target, header, rows) -> None:
    with _sink(target) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def profile_to_csv(profile: SpatialProfile, target) -> None:
    write_rows(target, ("y", "rho0", "v", "tau"),
               zip(profile.y, profile.rho0, profile.v, profile.tau))


def transient_to_csv(dT, mu0, target) -> None:
    write_rows(target, ("dT", "mu0"), zip(dT, mu0))


def to_csv_string(writer, *args) -> str:
    buf = io.StringIO()
    writer(*args, buf)
    return buf.getvalue()
