"""Median and relative-excess pivot tables from a results file."""
from __future__ import annotations

import csv
import logging
import math
from collections import defaultdict
from pathlib import Path

import numpy as np

from ..zoo import MODEL_LABELS
from .runner import RESULTS_FILE, read_results

log = logging.getLogger(__name__)


def relative_excess(medians: dict[str, float]) -> dict[str, float]:
    """``(median - best) / best`` per model, ``best`` being the smallest median.

    With a best median of exactly 0 the best models get 0 and the rest ``inf``.
    """
    if not medians:
        return {}
    best = min(medians.values())
    if best == 0.0:
        return {m: 0.0 if v == 0.0 else math.inf for m, v in medians.items()}
    return {m: (v - best) / best for m, v in medians.items()}


def _model_order(models) -> list[str]:
    known = [m for m in MODEL_LABELS if m in models]
    return known + sorted(m for m in models if m not in MODEL_LABELS)


def collect(rows, metric: str):
    """Per (scenario, p, n): model -> (median, successes) over finite ``ok`` values."""
    values = defaultdict(lambda: defaultdict(list))
    seen = defaultdict(set)
    for r in rows:
        if r.metric != metric:
            continue
        key = (r.scenario, r.p, r.n)
        seen[key].add(r.model)
        if r.status == "ok" and math.isfinite(r.value):
            values[key][r.model].append(r.value)
    table = {}
    for key in sorted(seen):
        cell = {}
        for model in seen[key]:
            vals = values[key].get(model, [])
            if not vals:
                log.warning("no successful %s values for %s at %s", metric, model, key)
                continue
            cell[model] = (float(np.median(vals)), len(vals))
        if cell:
            table[key] = cell
    return table


def _fmt(v) -> str:
    if v is None:
        return ""
    return "inf" if math.isinf(v) else repr(float(v))


def _write(path, table, models, value_of) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["scenario", "p", "n", *models])
        for (scenario, p, n), cell in table.items():
            w.writerow([scenario, p, n, *(value_of(cell, m) for m in models)])


def companion(out: Path, kind: str) -> Path:
    return out.with_name(f"{out.stem}.{kind}{out.suffix or '.csv'}")


def aggregate(in_dir, metric: str, out) -> dict:
    """Write the excess table to ``out`` plus ``.median`` and ``.counts`` companions.

    Returns ``{(scenario, p, n): {model: (median, excess, count)}}``.
    """
    in_path = Path(in_dir)
    if in_path.is_dir():
        in_path = in_path / RESULTS_FILE
    rows = read_results(in_path)
    if not rows:
        raise FileNotFoundError(f"no results found at {in_path}")
    table = collect(rows, metric)
    models = _model_order({m for cell in table.values() for m in cell})
    result = {}
    for key, cell in table.items():
        excess = relative_excess({m: v[0] for m, v in cell.items()})
        result[key] = {m: (cell[m][0], excess[m], cell[m][1]) for m in cell}
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    _write(out, result, models, lambda c, m: _fmt(c[m][1]) if m in c else "")
    _write(companion(out, "median"), result, models, lambda c, m: _fmt(c[m][0]) if m in c else "")
    _write(companion(out, "counts"), result, models, lambda c, m: str(c[m][2]) if m in c else "0")
    return result
