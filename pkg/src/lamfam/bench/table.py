"""Aggregate summary files into a table of final medians."""

from __future__ import annotations

import glob as globmod
import json
import math
from dataclasses import dataclass
from pathlib import Path

from ..student import is_compatible
from .config import format_nu, parse_nu

INCOMPATIBLE = "×"


@dataclass(frozen=True)
class Cell:
    scenario: str
    d: int
    kappa: float
    nu_target: float
    nu_family: float
    median: float | None
    compatible: bool

    def text(self) -> str:
        if not self.compatible:
            return INCOMPATIBLE
        if self.median is None:
            return "-"
        return f"{self.median:.2e}"


def _load(path: Path) -> Cell:
    with open(path) as fh:
        s = json.load(fh)
    c = s["config"]
    nu_t, nu_f, d = parse_nu(c["nu_target"]), parse_nu(c["nu_family"]), int(c["d"])
    median = None
    if s.get("status") == "ok":
        m = s.get("final", {}).get("median")
        median = None if m is None else float(m)
    return Cell(c["scenario"], d, float(c["kappa"]), nu_t, nu_f, median, is_compatible(nu_t, nu_f, d))


def collect(pattern: str) -> list[Cell]:
    paths = sorted(Path(p) for p in globmod.glob(pattern, recursive=True))
    if not paths:
        raise FileNotFoundError(f"no summary files match {pattern!r}")
    return [_load(p) for p in paths]


def build_table(cells: list[Cell]) -> dict:
    """Rows are ``(nu, scenario)``, columns ``(nu_pi, d, kappa)``.

    Any grid position whose configuration violates the compatibility
    inequality is marked incompatible, whether or not it was run.
    """
    nus = sorted({c.nu_family for c in cells})
    scenarios = sorted({c.scenario for c in cells})
    cols = sorted({(c.nu_target, c.d, c.kappa) for c in cells}, key=lambda t: (t[0], -t[1], t[2]))
    lookup = {(c.nu_family, c.scenario, c.nu_target, c.d, c.kappa): c for c in cells}
    rows = []
    for nu in nus:
        for sc in scenarios:
            row = []
            for nu_t, d, k in cols:
                cell = lookup.get((nu, sc, nu_t, d, k))
                if cell is None:
                    cell = Cell(sc, d, k, nu_t, nu, None, is_compatible(nu_t, nu, d))
                row.append(cell)
            rows.append(((nu, sc), row))
    return {"columns": cols, "rows": rows}


def render(table: dict) -> str:
    cols = table["columns"]
    header = ["nu", "scenario"] + [f"nu_pi={format_nu(t)} d={d} k={k:g}" for t, d, k in cols]
    lines = [header]
    for (nu, sc), row in table["rows"]:
        lines.append([str(format_nu(nu)), sc] + [c.text() for c in row])
    widths = [max(len(r[i]) for r in lines) for i in range(len(header))]
    out = []
    for i, r in enumerate(lines):
        out.append(" | ".join(v.ljust(w) for v, w in zip(r, widths)))
        if i == 0:
            out.append("-+-".join("-" * w for w in widths))
    return "\n".join(out)


def table(pattern: str) -> str:
    return render(build_table(collect(pattern)))


def final_medians(cells: list[Cell]) -> dict:
    """``(scenario, d, kappa, nu_target, nu_family) -> median`` for completed, compatible cells."""
    return {(c.scenario, c.d, c.kappa, c.nu_target, c.nu_family): c.median
            for c in cells if c.compatible and c.median is not None and not math.isnan(c.median)}
