"""Empirical lsc/usc certificates from shrinking-radius deficiencies.

The lsc deficiency of ``f`` at a node for radius ``r`` is
``f(node) - inf f`` over the ball ``B(node; r)``; the usc deficiency is
``sup f - f(node)``. Both are >= 0 because the ball holds its centre.
A function is lsc (usc) at the node exactly when the deficiency tends to 0
as ``r -> 0``.

One grid cannot settle this: once ``r`` drops below the spacing every ball
is just its centre. When the input carries an analytic source (catalog
members, their negations and truncations) the deficiencies are measured on
a refined resampling whose spacing is below the smallest radius, with probe
nodes fixed to the input grid. Without a source the input grid is used as
is and the profile says so (``resampled=False``).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .envelopes import Variable, ball_envelope, ball_sup_second, check_radius, factor_extremum
from .errors import EnvkitError
from .model import MetricSpec, ProductGrid, SampledFunction, refine

DEFAULT_LEVELS = 8
DEFAULT_MAX_NODES = 1 << 21


class Mode(str, enum.Enum):
    SEPARATE_FIRST = "separate_first"
    SEPARATE_SECOND = "separate_second"
    JOINT = "joint"


@dataclass(frozen=True)
class Witness:
    node: tuple
    point: tuple
    radius: float
    deficiency: float


@dataclass(frozen=True)
class DeficiencyProfile:
    mode: Mode
    radii: np.ndarray
    lsc_deficiency: np.ndarray
    usc_deficiency: np.ndarray
    refine_factor: int
    resampled: bool
    lsc_witness: Optional[Witness] = None
    usc_witness: Optional[Witness] = None


@dataclass(frozen=True)
class CertificationVerdict:
    passed: bool
    kind: str
    trend: float
    tol: float
    witness: Optional[Witness] = None

    def to_json(self) -> dict:
        w = self.witness
        return {
            "passed": self.passed,
            "kind": self.kind,
            "witness_node": None if w is None else list(w.node),
            "witness_point": None if w is None else list(w.point),
            "witness_radius": None if w is None else w.radius,
            "deficiency": self.trend,
            "tol": self.tol,
        }


def default_radii(grid: ProductGrid, rho: Optional[float] = None, levels: int = DEFAULT_LEVELS) -> np.ndarray:
    """``rho * 2**-k`` for ``k = 1..levels``; ``rho`` defaults to half the largest extent."""
    rho = grid.default_rho() if rho is None else check_radius(rho, "rho")
    return rho * np.exp2(-np.arange(1, int(levels) + 1, dtype=np.float64))


def _check_radii(radii) -> np.ndarray:
    r = np.asarray(radii, dtype=np.float64).reshape(-1)
    if r.size == 0:
        raise EnvkitError("empty radius schedule")
    if not np.all(np.isfinite(r)) or np.any(r <= 0):
        raise EnvkitError("radii must be positive and finite")
    if np.any(np.diff(r) >= 0):
        raise EnvkitError("radii must be strictly decreasing")
    return r


def _check_tol(tol) -> float:
    t = float(tol)
    if not (math.isfinite(t) and t >= 0):
        raise EnvkitError(f"tol must be a finite non-negative real, got {tol!r}")
    return t


def deficiency_field(f: SampledFunction, variable, radius: float, kind: str = "lsc") -> np.ndarray:
    """Per-node deficiency of ``f`` on its own grid, along one factor."""
    if kind == "lsc":
        env, _ = factor_extremum(f, Variable(variable), False, check_radius(radius, "radius"))
        return f.values - env
    env, _ = factor_extremum(f, Variable(variable), True, check_radius(radius, "radius"))
    return env - f.values


def _fine_version(f: SampledFunction, variables: Sequence[str], finest: float, max_nodes: int,
                  resample: bool):
    """Resampled ``f`` on a refinement fine enough for ``finest``, plus probe slices."""
    if not resample or f.source is None:
        return f, 1, tuple(slice(None) for _ in f.grid.axes), False
    axes = [a for v in variables for a in f.grid.factor_axes(v)]
    spacing = max(a.max_spacing for a in axes)
    m = 1
    while spacing / m >= finest:
        grown = refine(f.grid, 2 * m, variables)
        if grown.size > max_nodes:
            break
        m *= 2
    fine = f.resample(refine(f.grid, m, variables)) if m > 1 else f
    probe = tuple(
        slice(None, None, m) if var in variables else slice(None)
        for var, ax_list in (("first", f.grid.x_axes), ("second", f.grid.y_axes))
        for _ in ax_list
    )
    return fine, m, probe, m > 1


def _worst(deficit: np.ndarray, grid: ProductGrid, radius: float) -> Witness:
    idx = np.unravel_index(int(np.argmax(deficit)), deficit.shape)
    node = tuple(int(i) for i in idx)
    return Witness(node, tuple(float(v) for v in grid.node_point(node)), float(radius), float(deficit[idx]))


def _profile(mode: Mode, coarse: SampledFunction, radii, fields, m: int, resampled: bool) -> DeficiencyProfile:
    """``fields(r) -> (lsc_field, usc_field)`` restricted to the probe nodes."""
    lsc, usc = np.empty(radii.size), np.empty(radii.size)
    lsc_w = usc_w = None
    for k, r in enumerate(radii):
        lf, uf = fields(float(r))
        lsc[k], usc[k] = float(lf.max()), float(uf.max())
        if k == radii.size - 1:
            lsc_w = _worst(lf, coarse.grid, r)
            usc_w = _worst(uf, coarse.grid, r)
    return DeficiencyProfile(mode, radii, lsc, usc, m, resampled, lsc_w, usc_w)


def separate_profile(f: SampledFunction, variable, radii=None, max_nodes: int = DEFAULT_MAX_NODES,
                     resample: bool = True) -> DeficiencyProfile:
    """lsc and usc deficiencies of ``f`` along one variable, the other held fixed."""
    variable = Variable(variable)
    radii = default_radii(f.grid) if radii is None else _check_radii(radii)
    fine, m, probe, resampled = _fine_version(f, (variable.value,), float(radii[-1]), max_nodes, resample)

    def fields(r):
        return (deficiency_field(fine, variable, r, "lsc")[probe],
                deficiency_field(fine, variable, r, "usc")[probe])

    mode = Mode.SEPARATE_FIRST if variable is Variable.FIRST else Mode.SEPARATE_SECOND
    return _profile(mode, f, radii, fields, m, resampled)


def _verdict(profile: DeficiencyProfile, kind: str, tol: float) -> CertificationVerdict:
    series = profile.lsc_deficiency if kind == "lsc" else profile.usc_deficiency
    witness = profile.lsc_witness if kind == "lsc" else profile.usc_witness
    final = float(series[-1])
    passed = final <= tol
    return CertificationVerdict(passed, kind, final, tol, None if passed else witness)


def check_separate(f: SampledFunction, variable, kind: str, radii=None, tol: float = 1e-9,
                   **kwargs):
    if kind not in ("lsc", "usc"):
        raise EnvkitError(f"kind must be 'lsc' or 'usc', got {kind!r}")
    profile = separate_profile(f, variable, radii, **kwargs)
    return profile, _verdict(profile, kind, _check_tol(tol))


def check_separate_lsc_first(f: SampledFunction, radii=None, tol: float = 1e-9, **kwargs):
    """Is ``f(., y)`` lsc for every ``y``? Returns ``(profile, verdict)``."""
    return check_separate(f, "first", "lsc", radii, tol, **kwargs)


def check_separate_usc_second(f: SampledFunction, radii=None, tol: float = 1e-9, **kwargs):
    """Is ``f(x, .)`` usc for every ``x``? Returns ``(profile, verdict)``."""
    return check_separate(f, "second", "usc", radii, tol, **kwargs)


def check_separate_usc_first(f: SampledFunction, radii=None, tol: float = 1e-9, **kwargs):
    return check_separate(f, "first", "usc", radii, tol, **kwargs)


def check_separate_lsc_second(f: SampledFunction, radii=None, tol: float = 1e-9, **kwargs):
    return check_separate(f, "second", "lsc", radii, tol, **kwargs)


def joint_envelope_profile(f: SampledFunction, alpha: float, radii=None,
                           max_nodes: int = DEFAULT_MAX_NODES, resample: bool = True) -> DeficiencyProfile:
    """Joint deficiencies of the Y-ball sup-envelope of ``f`` at radius ``alpha``.

    Joint balls are products of factor balls, so the joint inf/sup is an
    X-envelope of a Y-envelope.
    """
    alpha = check_radius(alpha)
    radii = default_radii(f.grid) if radii is None else _check_radii(radii)
    fine, m, probe, resampled = _fine_version(f, ("first", "second"), float(radii[-1]), max_nodes, resample)
    env = ball_sup_second(fine, alpha).output

    def fields(r):
        lo = ball_envelope(ball_envelope(env, r, "first", "inf").output, r, "second", "inf").output
        hi = ball_envelope(ball_envelope(env, r, "first", "sup").output, r, "second", "sup").output
        return (env.values - lo.values)[probe], (hi.values - env.values)[probe]

    return _profile(Mode.JOINT, f, radii, fields, m, resampled)


def verify_envelope_joint_lsc(f: SampledFunction, alpha: float, radii=None, tol: float = 1e-9, **kwargs):
    """Certify that the Y-ball sup-envelope of ``f`` is jointly lsc.

    Expected to pass whenever ``f`` is lsc in its first variable.
    """
    profile = joint_envelope_profile(f, alpha, radii, **kwargs)
    return profile, _verdict(profile, "lsc", _check_tol(tol))


def verify_envelope_joint_usc(f: SampledFunction, alpha: float, radii=None, tol: float = 1e-9, **kwargs):
    """Certify that the Y-ball inf-envelope of ``f`` is jointly usc.

    Computed through negation: inf-envelope(f) = -sup-envelope(-f), and usc
    of a function is lsc of its negative. Expected to pass whenever ``f`` is
    usc in its first variable.
    """
    neg = joint_envelope_profile(-f, alpha, radii, **kwargs)
    profile = DeficiencyProfile(Mode.JOINT, neg.radii, neg.usc_deficiency, neg.lsc_deficiency,
                                neg.refine_factor, neg.resampled, neg.usc_witness, neg.lsc_witness)
    return profile, _verdict(profile, "usc", _check_tol(tol))


# --------------------------------------------------------------------------
# refinement study
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class RefinementRow:
    level: int
    factor: int
    n_nodes: int
    envelope_max: float
    envelope_mean: float
    lsc_deficiency_first: float
    usc_deficiency_second: float


@dataclass(frozen=True)
class RefinementTable:
    name: str
    alpha: float
    radius: float
    rows: list
    envelopes: list  # sup-envelope values at the coarse nodes, one array per level

    @property
    def envelope_monotone(self) -> bool:
        return all(np.all(b >= a) for a, b in zip(self.envelopes, self.envelopes[1:]))


def refinement_study(name: str, base_grid: ProductGrid, levels: int, alpha: float,
                     metric: MetricSpec = MetricSpec(), radius: Optional[float] = None) -> RefinementTable:
    """Resample catalog member ``name`` on ``refine(base_grid, 2**k)``, ``k = 0..levels``.

    Each row holds the Y-ball sup-envelope (radius ``alpha``) and the
    deficiencies (radius ``radius``, default ``alpha``) at the coarse nodes.
    """
    from .catalog import from_catalog

    if isinstance(levels, bool) or int(levels) != levels or levels < 1:
        raise EnvkitError(f"levels must be a positive integer, got {levels!r}")
    alpha = check_radius(alpha)
    radius = alpha if radius is None else check_radius(radius, "radius")
    rows, envs = [], []
    for k in range(int(levels) + 1):
        m = 2 ** k
        grid = refine(base_grid, m)
        f = from_catalog(name, grid, metric)
        probe = tuple(slice(None, None, m) for _ in grid.axes)
        env = ball_sup_second(f, alpha).output.values[probe]
        lsc = deficiency_field(f, "first", radius, "lsc")[probe]
        usc = deficiency_field(f, "second", radius, "usc")[probe]
        envs.append(env)
        rows.append(RefinementRow(k, m, grid.size, float(env.max()), float(env.mean()),
                                  float(lsc.max()), float(usc.max())))
    return RefinementTable(name, alpha, radius, rows, envs)
