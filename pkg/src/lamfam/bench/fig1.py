"""One-dimensional lambda-family densities and their escorts on a grid.

The family is ``q(x) ~ exp(c_lam(theta, x^2))`` with ``theta = -2`` for
``lam in {-1, 0, 1}``: heavy tails for ``lam = -1``, a Gaussian for
``lam = 0`` and compact support ``|x| < 1/sqrt(2)`` for ``lam = 1``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..duality import DEFAULT_QUAD_TOL, Density1D, Scalar1DFamily, escort_density_1d

LAMBDAS = (-1.0, 0.0, 1.0)
ALPHAS = (0.5, 1.0, 2.0)
THETA = -2.0


def _square(x):
    return np.square(x)


def family(lam: float, theta: float = THETA) -> Scalar1DFamily:
    edges = ()
    if lam * theta < 0:
        edges = (-1.0 / math.sqrt(-lam * theta), 1.0 / math.sqrt(-lam * theta))
    scale = 1.0 / math.sqrt(abs(theta)) if theta else 1.0
    return Scalar1DFamily(lam, _square, theta, 0.0, scale, edges)


@dataclass(frozen=True)
class Curve:
    lam: float
    alpha: float
    density: Density1D | None
    diagnostic: str = ""

    @property
    def ok(self) -> bool:
        return self.density is not None


def curves(theta: float = THETA, quad_tol: float = DEFAULT_QUAD_TOL) -> list[Curve]:
    """All nine ``(lam, alpha)`` escorts; non-normalizable ones carry a diagnostic instead."""
    out = []
    for lam in LAMBDAS:
        fam = family(lam, theta)
        for alpha in ALPHAS:
            try:
                out.append(Curve(lam, alpha, escort_density_1d(fam, alpha, quad_tol)))
            except ValueError as exc:
                out.append(Curve(lam, alpha, None, str(exc)))
    return out


def write_fig1(out_dir: str | Path, theta: float = THETA, x_max: float = 4.0, n_points: int = 801) -> list[Curve]:
    """Write ``fig1_lam{lam}.csv`` files with columns ``x`` and one density per alpha."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    xs = np.linspace(-x_max, x_max, n_points)
    cs = curves(theta)
    for lam in LAMBDAS:
        row_curves = [c for c in cs if c.lam == lam]
        path = out_dir / f"fig1_lam{lam:g}.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["x"] + [f"alpha_{c.alpha:g}" for c in row_curves])
            cols = [c.density(xs) if c.ok else np.full(xs.shape, np.nan) for c in row_curves]
            for i, x in enumerate(xs):
                w.writerow([repr(float(x))] + [repr(float(col[i])) for col in cols])
    return cs
