"""Grids, sampled functions, metrics, structuring sets and JSON I/O.

A :class:`SampledFunction` tabulates ``f : X x Y -> R`` on a rectilinear
product grid. Values are stored as an n-d array whose leading axes belong to
the X factor and trailing axes to the Y factor, so flattening in C order gives
the documented row-major node order (x-axes outermost, y-axes innermost).
"""

from __future__ import annotations

import enum
import json
import math
import os
import re
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .errors import (
    DomainError,
    GridError,
    GridOverflowError,
    NonFiniteValueError,
    SchemaError,
)

UNIFORM_RTOL = 1e-12
_INDEX_MAX = int(np.iinfo(np.intp).max)


class Metric(str, enum.Enum):
    LINF = "linf"
    L2 = "l2"


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


class AxisGrid:
    """Strictly increasing finite coordinates along one axis (length >= 2)."""

    __slots__ = ("coords", "uniform")

    def __init__(self, coords: Sequence[float]):
        c = np.array(coords, dtype=np.float64).reshape(-1)
        if c.size < 2:
            raise GridError(f"axis needs at least 2 coordinates, got {c.size}")
        bad = np.flatnonzero(~np.isfinite(c))
        if bad.size:
            raise GridError(f"non-finite coordinate at position {int(bad[0])}")
        d = np.diff(c)
        bad = np.flatnonzero(d <= 0)
        if bad.size:
            raise GridError(f"coordinates not strictly increasing at position {int(bad[0]) + 1}")
        self.coords = _frozen(c)
        mean = float(d.mean())
        self.uniform = bool(np.max(np.abs(d - mean)) <= UNIFORM_RTOL * abs(mean))

    @classmethod
    def lin(cls, a: float, b: float, n: int) -> "AxisGrid":
        return cls(np.linspace(a, b, int(n)))

    def __len__(self) -> int:
        return self.coords.size

    def __eq__(self, other) -> bool:
        return isinstance(other, AxisGrid) and np.array_equal(self.coords, other.coords)

    def __hash__(self) -> int:
        return hash(self.coords.tobytes())

    def __repr__(self) -> str:
        c = self.coords
        kind = "uniform" if self.uniform else "non-uniform"
        return f"AxisGrid([{c[0]!r} .. {c[-1]!r}], n={c.size}, {kind})"

    @property
    def extent(self) -> float:
        return float(self.coords[-1] - self.coords[0])

    @property
    def min_spacing(self) -> float:
        return float(np.min(np.diff(self.coords)))

    @property
    def max_spacing(self) -> float:
        return float(np.max(np.diff(self.coords)))


def _checked_count(lengths: Sequence[int]) -> int:
    total = 1
    for n in lengths:
        total *= int(n)
    if total > _INDEX_MAX:
        raise GridOverflowError(f"node count {total} overflows the platform index type")
    return total


@dataclass(frozen=True, eq=False)
class ProductGrid:
    x_axes: tuple
    y_axes: tuple

    def __post_init__(self):
        xs = tuple(a if isinstance(a, AxisGrid) else AxisGrid(a) for a in self.x_axes)
        ys = tuple(a if isinstance(a, AxisGrid) else AxisGrid(a) for a in self.y_axes)
        if not xs or not ys:
            raise GridError("both factors need at least one axis")
        object.__setattr__(self, "x_axes", xs)
        object.__setattr__(self, "y_axes", ys)
        _checked_count(self.shape)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, ProductGrid)
            and self.x_axes == other.x_axes
            and self.y_axes == other.y_axes
        )

    def __hash__(self) -> int:
        return hash((self.x_axes, self.y_axes))

    @property
    def axes(self) -> tuple:
        return self.x_axes + self.y_axes

    @property
    def dx(self) -> int:
        return len(self.x_axes)

    @property
    def dy(self) -> int:
        return len(self.y_axes)

    @property
    def shape(self) -> tuple:
        return tuple(len(a) for a in self.axes)

    @property
    def x_shape(self) -> tuple:
        return tuple(len(a) for a in self.x_axes)

    @property
    def y_shape(self) -> tuple:
        return tuple(len(a) for a in self.y_axes)

    @property
    def size(self) -> int:
        return _checked_count(self.shape)

    @property
    def nx(self) -> int:
        return _checked_count(self.x_shape)

    @property
    def ny(self) -> int:
        return _checked_count(self.y_shape)

    def factor_axes(self, variable: str) -> tuple:
        return self.x_axes if variable == "first" else self.y_axes

    def mesh(self) -> list:
        """Broadcastable coordinate arrays, one per axis (``np.ix_`` style)."""
        return list(np.ix_(*(a.coords for a in self.axes)))

    def node_point(self, index: Sequence[int]) -> np.ndarray:
        return np.array([a.coords[i] for a, i in zip(self.axes, index)])

    def bounds(self) -> list:
        return [(float(a.coords[0]), float(a.coords[-1])) for a in self.axes]

    def default_rho(self) -> float:
        """Half of the largest axis extent."""
        return 0.5 * max(a.extent for a in self.axes)


@dataclass(frozen=True)
class MetricSpec:
    x: Metric = Metric.LINF
    y: Metric = Metric.LINF

    def __post_init__(self):
        object.__setattr__(self, "x", Metric(self.x))
        object.__setattr__(self, "y", Metric(self.y))

    def for_variable(self, variable: str) -> Metric:
        return self.x if variable == "first" else self.y

    @classmethod
    def parse(cls, text: str) -> "MetricSpec":
        parts = [p.strip().lower() for p in text.split(",")]
        if len(parts) == 1:
            parts = parts * 2
        if len(parts) != 2:
            raise SchemaError(f"metric must look like 'linf,l2', got {text!r}")
        try:
            return cls(Metric(parts[0]), Metric(parts[1]))
        except ValueError as exc:
            raise SchemaError(f"unknown metric in {text!r}") from exc


def _first_nonfinite(values: np.ndarray) -> Optional[tuple]:
    bad = np.argwhere(~np.isfinite(values))
    if bad.size == 0:
        return None
    return tuple(int(i) for i in bad[0])


@dataclass(frozen=True, eq=False)
class SampledFunction:
    """Finite real values on every node of a :class:`ProductGrid`.

    ``source`` optionally holds the analytic function the values were sampled
    from (a callable ``ProductGrid -> ndarray``). It is what lets the verifier
    resample on refined grids; it is not serialised, but catalog members keep
    a parseable ``name`` from which it is rebuilt on load.
    """

    grid: ProductGrid
    metric: MetricSpec
    values: np.ndarray
    name: Optional[str] = None
    source: Optional[Callable] = field(default=None, repr=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64)
        shape = self.grid.shape
        if v.size != self.grid.size:
            raise SchemaError(f"expected {self.grid.size} values, got {v.size}")
        v = v.reshape(shape)
        bad = _first_nonfinite(v)
        if bad is not None:
            raise NonFiniteValueError(f"non-finite value at node {bad}")
        object.__setattr__(self, "values", _frozen(v))

    @property
    def flat(self) -> np.ndarray:
        return self.values.reshape(-1)

    def with_values(self, values: np.ndarray, name: Optional[str] = None,
                    source: Optional[Callable] = None) -> "SampledFunction":
        return SampledFunction(self.grid, self.metric, values, name, source)

    def __neg__(self) -> "SampledFunction":
        src = self.source
        neg_src = None if src is None else (lambda g, _s=src: -_s(g))
        name = None if self.name is None else f"neg({self.name})"
        return SampledFunction(self.grid, self.metric, -self.values, name, neg_src)

    def resample(self, grid: ProductGrid) -> "SampledFunction":
        if self.source is None:
            raise DomainError(f"{self.name or 'function'} has no analytic source to resample")
        return SampledFunction(grid, self.metric, self.source(grid), self.name, self.source)

    def same_data(self, other: "SampledFunction") -> bool:
        return (
            self.grid == other.grid
            and self.metric == other.metric
            and np.array_equal(self.values, other.values)
        )


class StructuringKind(str, enum.Enum):
    BOX = "box"
    ELLIPSOID = "ellipsoid"
    OFFSETS = "offsets"


class StructuringSet:
    """Balanced neighbourhood of 0 in the Y factor, in coordinate units.

    ``Box`` and ``Ellipsoid`` are open sets (strict inequalities). ``Offsets``
    is a finite list of displacement vectors that must contain 0 and be
    closed under negation.
    """

    __slots__ = ("kind", "params")

    def __init__(self, kind, params):
        self.kind = StructuringKind(kind)
        p = np.array(params, dtype=np.float64)
        if not np.all(np.isfinite(p)):
            raise GridError("structuring set parameters must be finite")
        if self.kind is StructuringKind.OFFSETS:
            if p.ndim == 1:
                p = p[:, None]
            if p.ndim != 2 or p.shape[0] == 0:
                raise GridError("offsets must be a non-empty (k, dy) array")
            rows = {tuple(r) for r in p.tolist()}
            if tuple([0.0] * p.shape[1]) not in rows:
                raise GridError("offsets must contain the zero vector")
            for r in p.tolist():
                if tuple(-v for v in r) not in rows:
                    raise GridError(f"offsets not balanced: {r} present but its negation is missing")
        else:
            p = p.reshape(-1)
            if p.size == 0 or np.any(p <= 0):
                raise GridError("half-widths / semi-axes must be positive")
        self.params = _frozen(p)

    @classmethod
    def box(cls, half_widths) -> "StructuringSet":
        return cls(StructuringKind.BOX, np.atleast_1d(half_widths))

    @classmethod
    def ellipsoid(cls, semi_axes) -> "StructuringSet":
        return cls(StructuringKind.ELLIPSOID, np.atleast_1d(semi_axes))

    @classmethod
    def offsets(cls, vectors) -> "StructuringSet":
        return cls(StructuringKind.OFFSETS, vectors)

    @property
    def dim(self) -> int:
        return self.params.shape[1] if self.kind is StructuringKind.OFFSETS else self.params.size

    def __repr__(self) -> str:
        return f"StructuringSet({self.kind.value}, {self.params.tolist()!r})"


# --------------------------------------------------------------------------
# serialisation
# --------------------------------------------------------------------------

_REQUIRED_KEYS = ("x_axes", "y_axes", "metric", "values")
_OPTIONAL_KEYS = ("name", "envelope")


def _number_list(obj, what: str) -> list:
    if not isinstance(obj, list):
        raise SchemaError(f"{what} must be a list")
    for i, v in enumerate(obj):
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise SchemaError(f"{what}[{i}] is not a number")
    return obj


def _axes_from_json(obj, key: str) -> tuple:
    if not isinstance(obj, list) or not obj:
        raise SchemaError(f"{key} must be a non-empty list of coordinate lists")
    axes = []
    for k, coords in enumerate(obj):
        coords = _number_list(coords, f"{key}[{k}]")
        try:
            axes.append(AxisGrid(coords))
        except GridError as exc:
            raise GridError(f"{key}[{k}]: {exc}") from None
    return tuple(axes)


def function_from_dict(doc: dict) -> SampledFunction:
    if not isinstance(doc, dict):
        raise SchemaError("function file must hold a JSON object")
    missing = [k for k in _REQUIRED_KEYS if k not in doc]
    if missing:
        raise SchemaError(f"missing keys: {', '.join(missing)}")
    extra = sorted(set(doc) - set(_REQUIRED_KEYS) - set(_OPTIONAL_KEYS))
    if extra:
        raise SchemaError(f"unexpected keys: {', '.join(extra)}")
    grid = ProductGrid(_axes_from_json(doc["x_axes"], "x_axes"), _axes_from_json(doc["y_axes"], "y_axes"))
    m = doc["metric"]
    if not isinstance(m, dict) or set(m) != {"x", "y"}:
        raise SchemaError('metric must be {"x": ..., "y": ...}')
    try:
        metric = MetricSpec(Metric(m["x"]), Metric(m["y"]))
    except ValueError:
        raise SchemaError(f"unknown metric {m!r}") from None
    values = _number_list(doc["values"], "values")
    if len(values) != grid.size:
        raise SchemaError(f"values has {len(values)} entries, grid has {grid.size} nodes")
    name = doc.get("name")
    if name is not None and not isinstance(name, str):
        raise SchemaError("name must be a string")
    arr = np.array(values, dtype=np.float64).reshape(grid.shape)
    bad = _first_nonfinite(arr)
    if bad is not None:
        raise NonFiniteValueError(f"non-finite value at node {bad}")
    source = None
    if name is not None:
        from .catalog import source_from_name

        source = source_from_name(name)
    return SampledFunction(grid, metric, arr, name, source)


def function_to_dict(f: SampledFunction) -> dict:
    doc = {
        "x_axes": [a.coords.tolist() for a in f.grid.x_axes],
        "y_axes": [a.coords.tolist() for a in f.grid.y_axes],
        "metric": {"x": f.metric.x.value, "y": f.metric.y.value},
        "values": f.flat.tolist(),
    }
    if f.name is not None:
        doc["name"] = f.name
    return doc


def load(path) -> SampledFunction:
    """Read and validate a JSON function file."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}: malformed JSON ({exc.msg} at line {exc.lineno})") from None
    return function_from_dict(doc)


def atomic_write_text(path, text: str) -> None:
    """Write via a temp file in the target directory, then rename over."""
    path = Path(path)
    directory = path.parent if str(path.parent) else Path(".")
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=directory)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dump_json(doc) -> str:
    return json.dumps(doc, allow_nan=False) + "\n"


def save(f: SampledFunction, path, extra: Optional[dict] = None) -> None:
    doc = function_to_dict(f)
    if extra:
        doc.update(extra)
    atomic_write_text(path, dump_json(doc))


# --------------------------------------------------------------------------
# continuum view and refinement
# --------------------------------------------------------------------------


def eval_at(f: SampledFunction, point: Sequence[float]) -> float:
    """Multilinear interpolation of the nodal values at ``point``.

    ``point`` lists the X coordinates followed by the Y coordinates. Grid
    nodes return their stored value exactly.
    """
    p = np.asarray(point, dtype=np.float64).reshape(-1)
    axes = f.grid.axes
    if p.size != len(axes):
        raise DomainError(f"point has {p.size} coordinates, grid has {len(axes)} axes")
    for k, (a, v) in enumerate(zip(axes, p)):
        if not (a.coords[0] <= v <= a.coords[-1]):
            raise DomainError(f"coordinate {k} = {v!r} outside [{a.coords[0]!r}, {a.coords[-1]!r}]")
    interp = RegularGridInterpolator(tuple(a.coords for a in axes), f.values, method="linear")
    return float(interp(p[None, :])[0])


def refine_axis(axis: AxisGrid, factor: int) -> AxisGrid:
    if factor == 1:
        return axis
    c = axis.coords
    t = np.arange(factor, dtype=np.float64) / factor
    inner = (c[:-1, None] + (c[1:] - c[:-1])[:, None] * t[None, :]).reshape(-1)
    return AxisGrid(np.append(inner, c[-1]))


def refine(grid: ProductGrid, factor: int, variables: Sequence[str] = ("first", "second")) -> ProductGrid:
    """Split every cell of the selected factors into ``factor`` subcells.

    Original coordinates are kept bit-for-bit (they are the ``t = 0`` point
    of each cell).
    """
    if isinstance(factor, bool) or int(factor) != factor or factor < 1:
        raise GridError(f"refinement factor must be a positive integer, got {factor!r}")
    factor = int(factor)
    lengths = [
        (len(a) - 1) * factor + 1 if var in variables else len(a)
        for var, axes in (("first", grid.x_axes), ("second", grid.y_axes))
        for a in axes
    ]
    _checked_count(lengths)
    xs = tuple(refine_axis(a, factor) if "first" in variables else a for a in grid.x_axes)
    ys = tuple(refine_axis(a, factor) if "second" in variables else a for a in grid.y_axes)
    return ProductGrid(xs, ys)


# --------------------------------------------------------------------------
# inline grid syntax:  x=lin(a,b,n);y=lin(a,b,n);y=pts(c0,c1,...)
# --------------------------------------------------------------------------

_AXIS_RE = re.compile(r"^\s*([xy])\s*=\s*(lin|pts)\s*\((.*)\)\s*$")


def parse_grid_spec(text: str) -> ProductGrid:
    xs, ys = [], []
    for part in filter(None, (p.strip() for p in text.split(";"))):
        m = _AXIS_RE.match(part)
        if not m:
            raise SchemaError(f"bad axis spec {part!r}; expected x=lin(a,b,n) or y=pts(c0,c1,...)")
        which, kind, body = m.groups()
        try:
            args = [float(s) for s in body.split(",")]
        except ValueError:
            raise SchemaError(f"bad number in axis spec {part!r}") from None
        if kind == "lin":
            if len(args) != 3 or args[2] != int(args[2]) or not math.isfinite(args[0] + args[1]):
                raise SchemaError(f"lin needs (a, b, n) with integer n: {part!r}")
            axis = AxisGrid.lin(args[0], args[1], int(args[2]))
        else:
            axis = AxisGrid(args)
        (xs if which == "x" else ys).append(axis)
    if not xs or not ys:
        raise SchemaError("grid spec needs at least one x axis and one y axis")
    return ProductGrid(tuple(xs), tuple(ys))
