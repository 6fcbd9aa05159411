"""Ball and structuring-set envelopes (grayscale dilation / erosion in one factor).

``ball_sup_second(f, a)`` is ``(x, y) -> max f(x, z)`` over Y-nodes ``z`` with
``d(z, y) < a``; the ball is open and clipped to the grid, so the centre node
is always a candidate. The other three ball operators move the ball to X
and/or take the minimum.

Two kernels compute the same arrays:

* ``naive``: per-node scan over a precomputed neighbour list (any metric, any
  grid, any structuring set);
* ``separable``: 1-D monotone-wedge sweeps along each axis of the factor.
  Only legal for product-shaped neighbourhoods (l-inf balls, boxes) on
  uniformly spaced axes.

``kernel="auto"`` picks ``separable`` whenever it is legal.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _kernels
from .errors import EnvkitError, NonUniformAxisError
from .model import AxisGrid, Metric, SampledFunction, StructuringKind, StructuringSet, save

# Offsets match a node when every coordinate is within this fraction of the
# axis' smallest spacing.
OFFSET_MATCH_RTOL = 1e-9

_BLOCK_ELEMS = 1 << 22


class Variable(str, enum.Enum):
    FIRST = "first"
    SECOND = "second"


class Bound(str, enum.Enum):
    SUP = "sup"
    INF = "inf"


class Kernel(str, enum.Enum):
    NAIVE = "naive"
    SEPARABLE = "separable"


def check_radius(alpha, what: str = "alpha") -> float:
    if isinstance(alpha, bool):
        raise EnvkitError(f"{what} must be a positive real")
    try:
        a = float(alpha)
    except (TypeError, ValueError):
        raise EnvkitError(f"{what} must be a positive real, got {alpha!r}") from None
    if not (math.isfinite(a) and a > 0):
        raise EnvkitError(f"{what} must be a positive finite real, got {alpha!r}")
    return a


@dataclass(frozen=True)
class EnvelopeParams:
    variable: Variable
    bound: Bound
    radius: Optional[float] = None
    structuring: Optional[StructuringSet] = None

    def __post_init__(self):
        object.__setattr__(self, "variable", Variable(self.variable))
        object.__setattr__(self, "bound", Bound(self.bound))
        if self.structuring is None:
            object.__setattr__(self, "radius", check_radius(self.radius, "radius"))

    def header(self) -> dict:
        doc = {"variable": self.variable.value, "bound": self.bound.value}
        if self.structuring is None:
            doc["radius"] = self.radius
        else:
            doc["structuring"] = {
                "kind": self.structuring.kind.value,
                "params": self.structuring.params.tolist(),
            }
        return doc


@dataclass(frozen=True)
class EnvelopeResult:
    output: SampledFunction
    params: EnvelopeParams
    kernel: Kernel


def save_envelope(result: EnvelopeResult, path) -> None:
    """Function file with an extra ``"envelope"`` header object."""
    header = dict(result.params.header(), kernel=result.kernel.value)
    save(result.output, path, extra={"envelope": header})


# --------------------------------------------------------------------------
# neighbour lists (naive path)
# --------------------------------------------------------------------------


def factor_points(axes) -> np.ndarray:
    """(n_nodes, n_axes) coordinates of a factor in row-major node order."""
    grids = np.meshgrid(*(a.coords for a in axes), indexing="ij")
    return np.stack([g.reshape(-1) for g in grids], axis=1)


def _membership(rows: np.ndarray, pts: np.ndarray, axes, metric: Metric, radius,
                wset: Optional[StructuringSet]) -> np.ndarray:
    """mask[b, j]: is factor node ``pts[j]`` in the neighbourhood of ``rows[b]``."""
    delta = pts[None, :, :] - rows[:, None, :]
    if wset is None:
        if delta.shape[2] == 1:
            dist = np.abs(delta[:, :, 0])
        elif metric is Metric.LINF:
            dist = np.max(np.abs(delta), axis=2)
        else:
            acc = delta[:, :, 0] * delta[:, :, 0]
            for k in range(1, delta.shape[2]):
                acc = acc + delta[:, :, k] * delta[:, :, k]
            dist = np.sqrt(acc)
        return dist < radius
    p = wset.params
    if wset.kind is StructuringKind.BOX:
        inside = np.abs(delta[:, :, 0]) < p[0]
        for k in range(1, delta.shape[2]):
            inside &= np.abs(delta[:, :, k]) < p[k]
        return inside
    if wset.kind is StructuringKind.ELLIPSOID:
        t = delta[:, :, 0] / p[0]
        acc = t * t
        for k in range(1, delta.shape[2]):
            t = delta[:, :, k] / p[k]
            acc = acc + t * t
        return acc < 1.0
    tol = np.array([OFFSET_MATCH_RTOL * a.min_spacing for a in axes])
    inside = np.zeros(delta.shape[:2], dtype=bool)
    for v in p:
        hit = np.ones(delta.shape[:2], dtype=bool)
        for k in range(delta.shape[2]):
            target = rows[:, k] + v[k]
            hit &= np.abs(target[:, None] - pts[None, :, k]) <= tol[k]
        inside |= hit
    return inside


def neighbour_lists(axes, metric: Metric, radius: Optional[float] = None,
                    wset: Optional[StructuringSet] = None):
    """CSR ``(indptr, indices)``: for each factor node, the nodes in its neighbourhood."""
    pts = factor_points(axes)
    n = pts.shape[0]
    block = max(1, _BLOCK_ELEMS // max(1, n * pts.shape[1]))
    counts = np.empty(n, dtype=np.int64)
    chunks = []
    for b0 in range(0, n, block):
        rows = pts[b0 : b0 + block]
        mask = _membership(rows, pts, axes, metric, radius, wset)
        counts[b0 : b0 + block] = mask.sum(axis=1)
        chunks.append(np.nonzero(mask)[1].astype(np.int64))
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(counts, out=indptr[1:])
    return indptr, np.concatenate(chunks)


# --------------------------------------------------------------------------
# separable path
# --------------------------------------------------------------------------


def _slide_along(values: np.ndarray, ax: int, axis: AxisGrid, radius: float, is_max: bool) -> np.ndarray:
    lo, hi = _kernels.window_bounds(axis.coords, radius)
    moved = np.moveaxis(values, ax, -1)
    shape = moved.shape
    lines = np.ascontiguousarray(moved).reshape(-1, shape[-1])
    out = _kernels.sliding_extremum(lines, lo, hi, is_max)
    return np.moveaxis(out.reshape(shape), -1, ax)


def sliding_extremum_axis(values, coords: AxisGrid, radius: float, bound="sup") -> np.ndarray:
    """Running max/min over the open window ``(c - radius, c + radius)``.

    O(n) amortised per sequence. Raises :class:`NonUniformAxisError` on an
    axis whose spacing is not constant; use :func:`sliding_extremum_naive`
    there.
    """
    if not coords.uniform:
        raise NonUniformAxisError("sliding_extremum_axis needs a uniformly spaced axis")
    radius = check_radius(radius, "radius")
    v = np.asarray(values, dtype=np.float64)
    if v.shape != (len(coords),):
        raise EnvkitError(f"values shape {v.shape} does not match axis length {len(coords)}")
    out = _slide_along(v[None, :], 1, coords, radius, Bound(bound) is Bound.SUP)
    return out[0]


def sliding_extremum_naive(values, coords: AxisGrid, radius: float, bound="sup") -> np.ndarray:
    """Window max/min by direct scan of every node; works on any axis."""
    radius = check_radius(radius, "radius")
    v = np.asarray(values, dtype=np.float64)
    if v.shape != (len(coords),):
        raise EnvkitError(f"values shape {v.shape} does not match axis length {len(coords)}")
    indptr, indices = neighbour_lists((coords,), Metric.LINF, radius)
    return _kernels.gather_extremum(v[None, :], indptr, indices, Bound(bound) is Bound.SUP)[0]


# --------------------------------------------------------------------------
# generic factor envelope
# --------------------------------------------------------------------------


def _separable_radii(axes, metric: Metric, radius, wset) -> Optional[list]:
    """Per-axis half-widths if the neighbourhood is a box on uniform axes."""
    if wset is None:
        if metric is not Metric.LINF and len(axes) > 1:
            return None
        radii = [radius] * len(axes)
    elif wset.kind is StructuringKind.BOX:
        radii = list(wset.params)
    else:
        return None
    if not all(a.uniform for a in axes):
        return None
    return radii


def factor_extremum(f: SampledFunction, variable: Variable, is_max: bool, radius=None,
                    wset: Optional[StructuringSet] = None, kernel="auto"):
    """Return ``(values, Kernel)`` for the envelope of ``f`` over one factor."""
    variable = Variable(variable)
    grid = f.grid
    axes = grid.factor_axes(variable.value)
    metric = f.metric.for_variable(variable.value)
    if wset is not None and wset.dim != len(axes):
        raise EnvkitError(f"structuring set has dimension {wset.dim}, factor has {len(axes)} axes")
    radii = _separable_radii(axes, metric, radius, wset)
    kernel = str(getattr(kernel, "value", kernel))
    if kernel not in ("auto", "naive", "separable"):
        raise EnvkitError(f"unknown kernel {kernel!r}")
    if kernel == "separable" and radii is None:
        raise NonUniformAxisError(
            "separable kernel needs an l-inf ball or box neighbourhood on uniformly spaced axes"
        )
    use_sep = radii is not None and kernel != "naive"
    v = f.values
    if use_sep:
        offset = 0 if variable is Variable.FIRST else grid.dx
        for k, (axis, r) in enumerate(zip(axes, radii)):
            v = _slide_along(v, offset + k, axis, float(r), is_max)
        return np.ascontiguousarray(v), Kernel.SEPARABLE
    indptr, indices = neighbour_lists(axes, metric, radius, wset)
    nx, ny = grid.nx, grid.ny
    if variable is Variable.SECOND:
        out = _kernels.gather_extremum(v.reshape(nx, ny), indptr, indices, is_max)
    else:
        vt = np.ascontiguousarray(v.reshape(nx, ny).T)
        out = _kernels.gather_extremum(vt, indptr, indices, is_max).T
    return np.ascontiguousarray(out).reshape(grid.shape), Kernel.NAIVE


def _label(op: str, f: SampledFunction, detail: str) -> str:
    return f"{op}[{detail}]({f.name or 'f'})"


def ball_envelope(f: SampledFunction, alpha: float, variable="second", bound="sup", kernel="auto") -> EnvelopeResult:
    params = EnvelopeParams(Variable(variable), Bound(bound), alpha)
    values, used = factor_extremum(f, params.variable, params.bound is Bound.SUP, params.radius, kernel=kernel)
    op = f"ball_{params.bound.value}_{params.variable.value}"
    out = f.with_values(values, _label(op, f, f"alpha={params.radius!r}"))
    return EnvelopeResult(out, params, used)


def ball_sup_second(f: SampledFunction, alpha: float, kernel="auto") -> EnvelopeResult:
    """Upper envelope over Y-balls: max of ``f(x, z)`` for ``d(z, y) < alpha``.

    Nodewise ``>= f`` and nondecreasing in ``alpha``.
    """
    return ball_envelope(f, alpha, "second", "sup", kernel)


def ball_inf_second(f: SampledFunction, alpha: float, kernel="auto") -> EnvelopeResult:
    return ball_envelope(f, alpha, "second", "inf", kernel)


def ball_inf_first(f: SampledFunction, alpha: float, kernel="auto") -> EnvelopeResult:
    """Lower envelope over X-balls: min of ``f(w, y)`` for ``d(w, x) < alpha``."""
    return ball_envelope(f, alpha, "first", "inf", kernel)


def ball_sup_first(f: SampledFunction, alpha: float, kernel="auto") -> EnvelopeResult:
    return ball_envelope(f, alpha, "first", "sup", kernel)


def structuring_sup_second(f: SampledFunction, w0: StructuringSet, kernel="auto") -> EnvelopeResult:
    """Max of ``f(x, z)`` over Y-nodes ``z`` in the translate ``y + w0``.

    For ``w0 = StructuringSet.box([a] * dy)`` this coincides with
    ``ball_sup_second(f, a)`` under the l-inf metric.
    """
    params = EnvelopeParams(Variable.SECOND, Bound.SUP, structuring=w0)
    values, used = factor_extremum(f, Variable.SECOND, True, wset=w0, kernel=kernel)
    out = f.with_values(values, _label("structuring_sup_second", f, w0.kind.value))
    return EnvelopeResult(out, params, used)


def structuring_inf_second(f: SampledFunction, w0: StructuringSet, kernel="auto") -> EnvelopeResult:
    """``-structuring_sup_second(-f, w0)``."""
    dual = structuring_sup_second(-f, w0, kernel)
    params = EnvelopeParams(Variable.SECOND, Bound.INF, structuring=w0)
    out = f.with_values(-dual.output.values, _label("structuring_inf_second", f, w0.kind.value))
    return EnvelopeResult(out, params, dual.kernel)
