import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from envkit import _kernels
from envkit.baire import truncate
from envkit.catalog import from_catalog, lipschitz_constants
from envkit.envelopes import (
    Kernel,
    ball_envelope,
    ball_inf_first,
    ball_inf_second,
    ball_sup_first,
    ball_sup_second,
    save_envelope,
    structuring_inf_second,
    structuring_sup_second,
)
from envkit.errors import EnvkitError, NonUniformAxisError
from envkit.model import AxisGrid, MetricSpec, ProductGrid, SampledFunction, StructuringSet, load
import oracles
from oracles import brute_envelope, random_axis

OPS = {
    ("first", "sup"): ball_sup_first,
    ("first", "inf"): ball_inf_first,
    ("second", "sup"): ball_sup_second,
    ("second", "inf"): ball_inf_second,
}


def random_function(seed, max_factor=24):
    rng = np.random.default_rng(seed)
    dx, dy = rng.integers(1, 3, size=2)

    def factor(d):
        n = max(2, int(max_factor ** (1.0 / d)))
        return tuple(random_axis(rng, int(rng.integers(2, n + 1)), bool(rng.integers(2))) for _ in range(d))

    grid = ProductGrid(factor(dx), factor(dy))
    metric = MetricSpec(*rng.choice(["linf", "l2"], size=2))
    vals = rng.integers(-4, 5, size=grid.size).astype(float) if seed % 4 == 0 else rng.normal(size=grid.size)
    return SampledFunction(grid, metric, vals), rng


@pytest.fixture
def numpy_kernels(monkeypatch):
    monkeypatch.setattr(_kernels, "window_bounds", _kernels.window_bounds_np)
    monkeypatch.setattr(_kernels, "sliding_extremum", _kernels.sliding_extremum_np)
    monkeypatch.setattr(_kernels, "gather_extremum", _kernels.gather_extremum_np)


class TestExamples:
    @pytest.mark.parametrize("op", list(OPS.values()))
    def test_constant_fixed(self, op, square65):
        f = from_catalog("constant(3)", square65)
        assert np.all(op(f, 0.37).output.values == 3.0)

    def test_enumeration(self):
        g = ProductGrid((AxisGrid([0.0, 1.0]),), (AxisGrid([0.0, 1.0, 2.0]),))
        f = SampledFunction(g, MetricSpec(), [0, 5, 1, 0, 5, 1])
        assert ball_sup_second(f, 1.5).output.values[0, 0] == 5.0

    def test_degenerate_ball_is_identity(self, square65):
        f = from_catalog("step_lsc_x", square65)
        h = square65.x_axes[0].min_spacing
        assert f.same_data(ball_inf_first(f, 0.5 * h).output)

    def test_singleton_structuring_set(self, rng):
        g = ProductGrid((random_axis(rng, 5, False),), (random_axis(rng, 6, False), random_axis(rng, 4, True)))
        f = SampledFunction(g, MetricSpec(), rng.normal(size=g.size))
        w0 = StructuringSet.offsets([[0.0, 0.0]])
        assert f.same_data(structuring_sup_second(f, w0).output)
        assert f.same_data(structuring_inf_second(f, w0).output)

    def test_kernel_reported(self, square65):
        f = from_catalog("mixed_step", square65)
        assert ball_sup_second(f, 0.3).kernel is Kernel.SEPARABLE
        assert ball_sup_second(f, 0.3, kernel="naive").kernel is Kernel.NAIVE

    def test_separable_refused_when_illegal(self, rng):
        g = ProductGrid((random_axis(rng, 5, False),), (AxisGrid.lin(0, 1, 5),))
        f = SampledFunction(g, MetricSpec(), rng.normal(size=g.size))
        with pytest.raises(NonUniformAxisError):
            ball_inf_first(f, 0.3, kernel="separable")
        g2 = ProductGrid((AxisGrid.lin(0, 1, 5),), (AxisGrid.lin(0, 1, 4), AxisGrid.lin(0, 1, 3)))
        f2 = SampledFunction(g2, MetricSpec("linf", "l2"), rng.normal(size=g2.size))
        with pytest.raises(NonUniformAxisError):
            ball_sup_second(f2, 0.3, kernel="separable")
        assert ball_sup_second(f2, 0.3).kernel is Kernel.NAIVE

    @pytest.mark.parametrize("alpha", [0.0, -1.0, float("nan"), float("inf"), True])
    def test_bad_radius(self, alpha, square65):
        with pytest.raises(EnvkitError):
            ball_sup_second(from_catalog("mixed_step", square65), alpha)

    def test_structuring_dimension_checked(self, square65):
        with pytest.raises(EnvkitError):
            structuring_sup_second(from_catalog("mixed_step", square65), StructuringSet.box([0.1, 0.1]))

    def test_envelope_file_loads_back(self, tmp_path, square65):
        res = ball_sup_second(from_catalog("mixed_step", square65), 0.25)
        save_envelope(res, tmp_path / "e.json")
        assert load(tmp_path / "e.json").same_data(res.output)


@given(st.integers(0, 2 ** 32 - 1))
@settings(max_examples=40, deadline=None)
def test_ball_ops_match_brute_force(seed):
    f, rng = random_function(seed)
    alpha = float(rng.uniform(0.02, 2.5))
    for (var, bound), op in OPS.items():
        metric = f.metric.for_variable(var).value
        expect = brute_envelope(f.values, f.grid, var, bound == "sup", oracles.ball_member(metric, alpha))
        assert np.array_equal(op(f, alpha).output.values, expect)


@given(st.integers(0, 2 ** 32 - 1))
@settings(max_examples=40, deadline=None)
def test_structuring_ops_match_brute_force(seed):
    f, rng = random_function(seed)
    axes = f.grid.y_axes
    dy = len(axes)
    box = StructuringSet.box(rng.uniform(0.05, 1.5, size=dy))
    ell = StructuringSet.ellipsoid(rng.uniform(0.05, 1.5, size=dy))
    pts = oracles.factor_nodes(axes)
    picks = rng.integers(0, len(pts), size=(3, 2))
    vecs = [np.zeros(dy)] + [pts[a] - pts[b] for a, b in picks]
    vecs += [-v for v in vecs[1:]]
    off = StructuringSet.offsets(vecs)
    cases = [
        (box, oracles.box_member(box.params)),
        (ell, oracles.ellipsoid_member(ell.params)),
        (off, oracles.offsets_member(off.params, axes)),
    ]
    for w0, member in cases:
        sup = structuring_sup_second(f, w0).output.values
        inf = structuring_inf_second(f, w0).output.values
        assert np.array_equal(sup, brute_envelope(f.values, f.grid, "second", True, member))
        assert np.array_equal(inf, brute_envelope(f.values, f.grid, "second", False, member))
        assert np.array_equal(inf, -structuring_sup_second(-f, w0).output.values)


@given(st.integers(0, 2 ** 32 - 1))
@settings(max_examples=60, deadline=None)
def test_properties(seed):
    f, rng = random_function(seed)
    a1, a2 = np.sort(rng.uniform(0.01, 2.0, size=2))
    level = float(rng.uniform(0.1, 2.0))
    for (var, bound), op in OPS.items():
        small, big = op(f, a1).output.values, op(f, a2).output.values
        if bound == "sup":
            assert np.all(small >= f.values) and np.all(big >= small)
        else:
            assert np.all(small <= f.values) and np.all(big <= small)
        # duality
        other = OPS[(var, "inf" if bound == "sup" else "sup")]
        assert np.array_equal(small, -other(-f, a1).output.values)
        # clamp commutation
        lhs = op(truncate(f, level), a1).output.values
        assert np.array_equal(lhs, np.clip(small, -level, level))


@given(st.integers(0, 2 ** 32 - 1))
@settings(max_examples=40, deadline=None)
def test_box_equals_linf_ball(seed):
    f, rng = random_function(seed)
    f = SampledFunction(f.grid, MetricSpec("linf", "linf"), f.values)
    alpha = float(rng.uniform(0.02, 2.0))
    box = StructuringSet.box([alpha] * f.grid.dy)
    assert np.array_equal(structuring_sup_second(f, box).output.values, ball_sup_second(f, alpha).output.values)
    assert np.array_equal(structuring_inf_second(f, box).output.values, ball_inf_second(f, alpha).output.values)


@given(st.integers(0, 2 ** 32 - 1))
@settings(max_examples=40, deadline=None)
def test_kernel_equivalence_uniform_linf(seed):
    rng = np.random.default_rng(seed)
    axes = lambda d: tuple(AxisGrid.lin(rng.uniform(-2, 0), rng.uniform(0.1, 2), int(rng.integers(2, 12))) for _ in range(d))
    g = ProductGrid(axes(int(rng.integers(1, 3))), axes(int(rng.integers(1, 3))))
    f = SampledFunction(g, MetricSpec(), rng.normal(size=g.size))
    alpha = float(rng.uniform(0.01, 2.0))
    for var in ("first", "second"):
        for bound in ("sup", "inf"):
            a = ball_envelope(f, alpha, var, bound, "naive")
            b = ball_envelope(f, alpha, var, bound, "separable")
            assert b.kernel is Kernel.SEPARABLE
            assert np.array_equal(a.output.values, b.output.values)


@pytest.mark.parametrize("name", ["lipschitz_sine", "affine", "unbounded_hyperbola"])
def test_lipschitz_bound(name, square64):
    for metric in (MetricSpec(), MetricSpec("l2", "l2")):
        f = from_catalog(name, square64, metric)
        lx, ly = lipschitz_constants(f.name, square64, metric)
        for alpha in (0.5, 0.1, 0.03):
            assert np.all(ball_sup_second(f, alpha).output.values - f.values <= ly * alpha + 1e-12)
            assert np.all(f.values - ball_inf_first(f, alpha).output.values <= lx * alpha + 1e-12)


def test_numpy_path_matches(numpy_kernels):
    for seed in range(25):
        f, rng = random_function(seed)
        alpha = float(rng.uniform(0.02, 2.0))
        for op in OPS.values():
            res = op(f, alpha)
            metric = f.metric.for_variable(res.params.variable.value).value
            expect = brute_envelope(f.values, f.grid, res.params.variable.value,
                                    res.params.bound.value == "sup", oracles.ball_member(metric, alpha))
            assert np.array_equal(res.output.values, expect)
