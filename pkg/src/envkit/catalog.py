"""Analytic test functions sampled onto product grids.

Each member is identified by a descriptor string such as ``mixed_step``,
``constant(c=3.0)`` or ``lipschitz_sine(omega=2.0)``; the canonical
descriptor becomes the ``name`` of the sampled function so that a saved file
can be resampled after loading. ``neg(<descriptor>)`` names the negation.

Step members depend only on the first coordinate of each factor:

==================== ===========================================
constant(c)          c
affine(a, b, c)      c + a * sum(x) + b * sum(y)
lipschitz_sine(omega) sin(omega * x1) + sin(omega * y1)
step_lsc_x           1 if x1 > 0 else 0
step_usc_y           1 if y1 >= 0 else 0
mixed_step           [x1 > 0] - [y1 > 0]
unbounded_hyperbola  scale / (|x1| + |y1| + h)
==================== ===========================================
"""

from __future__ import annotations

import math
import re
from typing import Callable, Optional

import numpy as np

from .errors import CatalogError
from .model import Metric, MetricSpec, ProductGrid, SampledFunction

# name -> ordered (param, default) pairs
PARAMS = {
    "constant": (("c", 0.0),),
    "affine": (("a", 1.0), ("b", -0.5), ("c", 0.25)),
    "lipschitz_sine": (("omega", 2.0),),
    "step_lsc_x": (),
    "step_usc_y": (),
    "mixed_step": (),
    "unbounded_hyperbola": (("scale", 1.0), ("h", 0.1)),
}

NAMES = tuple(PARAMS)


def _factor_meshes(grid: ProductGrid):
    mesh = grid.mesh()
    return mesh[: grid.dx], mesh[grid.dx :]


def _build(name: str, p: dict) -> Callable[[ProductGrid], np.ndarray]:
    def sample(grid: ProductGrid) -> np.ndarray:
        xs, ys = _factor_meshes(grid)
        x1, y1 = xs[0], ys[0]
        if name == "constant":
            out = np.full(grid.shape, p["c"])
        elif name == "affine":
            out = p["c"] + p["a"] * sum(xs) + p["b"] * sum(ys)
        elif name == "lipschitz_sine":
            out = np.sin(p["omega"] * x1) + np.sin(p["omega"] * y1)
        elif name == "step_lsc_x":
            out = (x1 > 0).astype(np.float64)
        elif name == "step_usc_y":
            out = (y1 >= 0).astype(np.float64)
        elif name == "mixed_step":
            out = (x1 > 0).astype(np.float64) - (y1 > 0).astype(np.float64)
        else:  # unbounded_hyperbola
            out = p["scale"] / (np.abs(x1) + np.abs(y1) + p["h"])
        return np.broadcast_to(out, grid.shape).astype(np.float64)

    return sample


_CALL_RE = re.compile(r"^\s*([a-z_]+)\s*(?:\((.*)\))?\s*$")


def parse_descriptor(text: str) -> tuple:
    """``'constant(c=3)'`` -> ``('constant', {'c': 3.0})``; defaults filled in."""
    m = _CALL_RE.match(text)
    if not m or m.group(1) not in PARAMS:
        raise CatalogError(f"unknown catalog function {text!r}; known: {', '.join(NAMES)}")
    name, body = m.group(1), m.group(2)
    spec = PARAMS[name]
    params = dict(spec)
    if body is not None and body.strip():
        args = [a.strip() for a in body.split(",")]
        if len(args) > len(spec):
            raise CatalogError(f"{name} takes at most {len(spec)} parameters")
        for pos, arg in enumerate(args):
            key, _, val = arg.rpartition("=")
            key = key.strip() or spec[pos][0]
            if key not in params:
                raise CatalogError(f"{name} has no parameter {key!r}")
            try:
                params[key] = float(val)
            except ValueError:
                raise CatalogError(f"bad value for {name}.{key}: {val!r}") from None
            if not math.isfinite(params[key]):
                raise CatalogError(f"{name}.{key} must be finite")
    if name == "unbounded_hyperbola" and params["h"] <= 0:
        raise CatalogError("unbounded_hyperbola needs h > 0")
    return name, params


def canonical(name: str, params: dict) -> str:
    spec = PARAMS[name]
    if not spec:
        return name
    return f"{name}({','.join(f'{k}={float(params[k])!r}' for k, _ in spec)})"


def _strip_negations(text: str) -> tuple:
    sign = 1.0
    s = text.strip()
    while s.startswith("neg(") and s.endswith(")"):
        sign = -sign
        s = s[4:-1].strip()
    return sign, s


def source_from_name(name: str) -> Optional[Callable]:
    """Analytic source for a (possibly negated) catalog descriptor, else None."""
    sign, s = _strip_negations(name)
    try:
        cname, params = parse_descriptor(s)
    except CatalogError:
        return None
    base = _build(cname, params)
    if sign > 0:
        return base
    return lambda g: -base(g)


def from_catalog(name: str, grid: ProductGrid, metric: MetricSpec = MetricSpec(), **params) -> SampledFunction:
    """Sample catalog member ``name`` on ``grid``.

    Parameters may be given inline (``"constant(c=3)"``) or as keywords;
    ``"neg(mixed_step)"`` samples the negated member.

    >>> from envkit.model import AxisGrid, ProductGrid
    >>> g = ProductGrid((AxisGrid([-1.0, 1.0]),), (AxisGrid([-1.0, 1.0]),))
    >>> from_catalog("mixed_step", g).values.tolist()
    [[0.0, -1.0], [1.0, 0.0]]
    """
    sign, body = _strip_negations(name)
    cname, p = parse_descriptor(body)
    for k, v in params.items():
        if k not in p:
            raise CatalogError(f"{cname} has no parameter {k!r}")
        p[k] = float(v)
    if cname == "unbounded_hyperbola" and p["h"] <= 0:
        raise CatalogError("unbounded_hyperbola needs h > 0")
    src = _build(cname, p)
    f = SampledFunction(grid, metric, src(grid), canonical(cname, p), src)
    return f if sign > 0 else -f


def lipschitz_constants(name: str, grid: ProductGrid, metric: MetricSpec) -> tuple:
    """Per-factor Lipschitz constants ``(in x, in y)`` under the factor metrics.

    ``inf`` for the discontinuous members.
    """
    cname, p = parse_descriptor(_strip_negations(name)[1])

    def dim_factor(d: int, m: Metric) -> float:
        return float(d) if m is Metric.LINF else math.sqrt(d)

    if cname == "constant":
        return 0.0, 0.0
    if cname == "affine":
        return (abs(p["a"]) * dim_factor(grid.dx, metric.x), abs(p["b"]) * dim_factor(grid.dy, metric.y))
    if cname == "lipschitz_sine":
        return abs(p["omega"]), abs(p["omega"])
    if cname == "unbounded_hyperbola":
        lam = abs(p["scale"]) / p["h"] ** 2
        return lam, lam
    return math.inf, math.inf
