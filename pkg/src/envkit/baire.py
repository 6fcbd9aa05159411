"""Monotone envelope sequences, continuous insertion and truncation.

For ``n = 1..N`` and radius ``rho / n``::

    lower_n    = ball_inf_first(f, rho / n)     (inf over X-balls)
    upper_n    = ball_sup_second(f, rho / n)    (sup over Y-balls)
    inserted_n = hahn_insert(lower_n, upper_n)  (nodal midpoint)

Balls shrink with ``n``, so ``lower_n`` rises and ``upper_n`` falls nodewise,
and ``lower_n <= f <= upper_n`` always. When ``f`` is lsc in x and usc in y the
two columns close onto ``f`` pointwise and the continuous ``inserted_n``
converge to ``f``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional

import numpy as np

from .envelopes import ball_inf_first, ball_sup_second, check_radius
from .errors import EnvkitError, SandwichError, SchemaError
from .model import SampledFunction, atomic_write_text, load, save

MANIFEST = "manifest.json"
FORMAT_TAG = "envkit-sequence"


@dataclass(frozen=True)
class Step:
    n: int
    radius: float
    lower: SampledFunction
    upper: SampledFunction
    inserted: SampledFunction


@dataclass(frozen=True)
class EnvelopeSequence:
    base: SampledFunction
    rho: float
    steps: List[Step] = field(default_factory=list)

    @property
    def radii(self) -> list:
        return [s.radius for s in self.steps]

    def __len__(self) -> int:
        return len(self.steps)


def _check_count(n, what: str = "N") -> int:
    if isinstance(n, bool) or int(n) != n or n < 1:
        raise EnvkitError(f"{what} must be a positive integer, got {n!r}")
    return int(n)


def radius_schedule(rho: float, n_steps: int) -> list:
    return [rho / n for n in range(1, n_steps + 1)]


def hahn_insert(lower: SampledFunction, upper: SampledFunction) -> SampledFunction:
    """Continuous function squeezed between ``lower`` and ``upper``.

    Nodal values are the midpoint; eval_at's multilinear continuation makes
    the result continuous, and since interpolation is monotone in the nodal
    values the ordering carries over between nodes.
    """
    if lower.grid != upper.grid or lower.metric != upper.metric:
        raise SandwichError("lower and upper live on different grids or metrics")
    lo, hi = lower.values, upper.values
    bad = np.argwhere(lo > hi)
    if bad.size:
        node = tuple(int(i) for i in bad[0])
        raise SandwichError(f"lower > upper at node {node}: {lo[node]!r} > {hi[node]!r}")
    with np.errstate(over="ignore"):
        mid = 0.5 * (lo + hi)
    overflow = ~np.isfinite(mid)
    if overflow.any():
        mid[overflow] = 0.5 * lo[overflow] + 0.5 * hi[overflow]
    mid = np.clip(mid, lo, hi)
    return lower.with_values(mid, "hahn_insert")


def envelope_sequence(f: SampledFunction, n_steps: int, rho: Optional[float] = None,
                      kernel="auto") -> EnvelopeSequence:
    n_steps = _check_count(n_steps)
    rho = f.grid.default_rho() if rho is None else check_radius(rho, "rho")
    steps = []
    for n, r in enumerate(radius_schedule(rho, n_steps), start=1):
        lower = ball_inf_first(f, r, kernel).output
        upper = ball_sup_second(f, r, kernel).output
        steps.append(Step(n, r, lower, upper, hahn_insert(lower, upper)))
    return EnvelopeSequence(f, rho, steps)


def truncate(f: SampledFunction, level: float) -> SampledFunction:
    """Clamp to ``[-level, level]``."""
    level = check_radius(level, "level")
    src = f.source
    clipped_src = None if src is None else (lambda g, _s=src: np.clip(_s(g), -level, level))
    name = None if f.name is None else f"truncate[level={level!r}]({f.name})"
    return f.with_values(np.clip(f.values, -level, level), name, clipped_src)


def truncated_sequence(f: SampledFunction, n_steps: int, rho: Optional[float] = None,
                       kernel="auto") -> List[EnvelopeSequence]:
    """``envelope_sequence(truncate(f, k))`` for clamp levels ``k = 1..N``.

    The level grows with ``k``, so at each node the clamped input equals
    ``f`` once ``k >= |f(node)|``.
    """
    n_steps = _check_count(n_steps)
    return [envelope_sequence(truncate(f, k), n_steps, rho, kernel) for k in range(1, n_steps + 1)]


# --------------------------------------------------------------------------
# diagnostics
# --------------------------------------------------------------------------


def nodal_lipschitz(f: SampledFunction) -> float:
    """Largest |difference quotient| between nodes adjacent along one axis."""
    best = 0.0
    for ax, axis in enumerate(f.grid.axes):
        dv = np.abs(np.diff(f.values, axis=ax))
        shape = [1] * f.values.ndim
        shape[ax] = -1
        h = np.diff(axis.coords).reshape(shape)
        best = max(best, float(np.max(dv / h)))
    return best


@dataclass(frozen=True)
class StepStats:
    n: int
    radius: float
    max_gap: float
    mean_gap: float
    insertion_lipschitz: float


@dataclass(frozen=True)
class ConvergenceReport:
    per_n: List[StepStats]
    per_node_gap: np.ndarray
    converged: np.ndarray
    tol: float

    @property
    def all_converged(self) -> bool:
        return bool(self.converged.all())

    @property
    def open_nodes(self) -> np.ndarray:
        return np.argwhere(~self.converged)


def convergence_report(seq: EnvelopeSequence, tol: float = 1e-9) -> ConvergenceReport:
    if not seq.steps:
        raise EnvkitError("empty envelope sequence")
    if not (math.isfinite(tol) and tol > 0):
        raise EnvkitError(f"tol must be a positive finite real, got {tol!r}")
    stats = []
    for s in seq.steps:
        gap = s.upper.values - s.lower.values
        stats.append(StepStats(s.n, s.radius, float(gap.max()), float(gap.mean()),
                               nodal_lipschitz(s.inserted)))
    last = seq.steps[-1]
    final_gap = last.upper.values - last.lower.values
    return ConvergenceReport(stats, final_gap, final_gap <= tol, float(tol))


# --------------------------------------------------------------------------
# directory serialisation
# --------------------------------------------------------------------------


def _step_file(n: int, column: str) -> str:
    return f"step_{n:04d}_{column}.json"


def save_sequence(seq: EnvelopeSequence, outdir) -> Path:
    """One function file per (n, column) plus ``manifest.json`` (written last)."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    save(seq.base, outdir / "base.json")
    entries = []
    for s in seq.steps:
        files = {}
        for column in ("lower", "upper", "inserted"):
            files[column] = _step_file(s.n, column)
            save(getattr(s, column), outdir / files[column])
        entries.append({"n": s.n, "radius": s.radius, **files})
    manifest = {
        "format": FORMAT_TAG,
        "version": 1,
        "rho": seq.rho,
        "n_steps": len(seq.steps),
        "base": "base.json",
        "steps": entries,
    }
    atomic_write_text(outdir / MANIFEST, json.dumps(manifest, indent=2, allow_nan=False) + "\n")
    return outdir / MANIFEST


def load_sequence(path) -> EnvelopeSequence:
    """Load from a sequence directory (or its manifest file)."""
    path = Path(path)
    manifest_path = path / MANIFEST if path.is_dir() else path
    root = manifest_path.parent
    try:
        doc = json.loads(manifest_path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise SchemaError(f"no manifest at {manifest_path}") from None
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{manifest_path}: malformed JSON ({exc.msg})") from None
    if not isinstance(doc, dict) or doc.get("format") != FORMAT_TAG:
        raise SchemaError(f"{manifest_path} is not an envelope-sequence manifest")
    try:
        base = load(root / doc["base"])
        steps = []
        for e in doc["steps"]:
            cols = {c: load(root / e[c]) for c in ("lower", "upper", "inserted")}
            steps.append(Step(int(e["n"]), float(e["radius"]), **cols))
        rho = float(doc["rho"])
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"{manifest_path}: bad manifest entry ({exc})") from None
    if not steps:
        raise SchemaError(f"{manifest_path}: manifest lists no steps")
    return EnvelopeSequence(base, rho, steps)

