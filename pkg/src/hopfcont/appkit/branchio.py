"""Branch tables as CSV.

Column order is fixed: ``step, ptype, ind, lam``, one column per problem
parameter (by name), then ``T, min_u1, max_u1, norm``.  ``ind`` is the
number of unstable eigenvalues on steady branches and the orbit index on
periodic branches; ``T`` is ``nan`` for steady points.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from ..hopf import HopfPoint
from ..steady import BranchPoint

TRAILING = ("T", "min_u1", "max_u1", "norm")


def columns(param_names) -> list:
    return ["step", "ptype", "ind", "lam", *param_names, *TRAILING]


def _fmt(v) -> str:
    return repr(float(v))


def point_row(point) -> list:
    if isinstance(point, HopfPoint):
        ind, T = point.ind, point.T
    elif isinstance(point, BranchPoint):
        ind, T = point.ineg if point.counts else -1, np.nan
    else:
        raise TypeError(f"cannot tabulate {type(point).__name__}")
    return [str(point.step), point.ptype, str(ind), _fmt(point.lam), *(_fmt(v) for v in point.par),
            _fmt(T), _fmt(point.umin), _fmt(point.umax), _fmt(point.norm)]


class BranchWriter:
    """Appends rows to ``<dir>/branch.csv``; creates the file with its header on first use."""

    def __init__(self, directory, param_names):
        self.path = Path(directory) / "branch.csv"
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.cols = columns(param_names)
        if not self.path.exists():
            with self.path.open("w", newline="") as fh:
                csv.writer(fh).writerow(self.cols)
        else:
            with self.path.open(newline="") as fh:
                existing = next(csv.reader(fh), None)
            if existing != self.cols:
                raise ValueError(f"{self.path} has columns {existing}, expected {self.cols}")

    def write(self, points):
        with self.path.open("a", newline="") as fh:
            w = csv.writer(fh)
            for pt in points:
                w.writerow(point_row(pt))


def read_branch(path) -> dict:
    """Columns of a branch table as arrays (``ptype`` as a list of strings)."""
    path = Path(path)
    if path.is_dir():
        path = path / "branch.csv"
    if not path.exists():
        raise FileNotFoundError(f"no branch table at {path}")
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    head, body = rows[0], rows[1:]
    out = {}
    for j, name in enumerate(head):
        vals = [r[j] for r in body]
        if name == "ptype":
            out[name] = vals
        elif name in ("step", "ind"):
            out[name] = np.array([int(v) for v in vals], dtype=int)
        else:
            out[name] = np.array([float(v) for v in vals], dtype=float)
    return out
