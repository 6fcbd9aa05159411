import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from envkit.catalog import from_catalog
from envkit.errors import EnvkitError
from envkit.model import AxisGrid, ProductGrid
from envkit.verify import (
    check_separate,
    check_separate_lsc_first,
    check_separate_lsc_second,
    check_separate_usc_first,
    check_separate_usc_second,
    deficiency_field,
    default_radii,
    refinement_study,
    separate_profile,
    verify_envelope_joint_lsc,
    verify_envelope_joint_usc,
)
from test_envelopes import random_function


def _refuted(verdict, node=None):
    assert not verdict.passed
    assert verdict.witness is not None
    assert verdict.witness.deficiency == 1.0
    if node is not None:
        assert verdict.witness.node == node


class TestSeparate:
    def test_step_lsc_x(self, square65):
        f = from_catalog("step_lsc_x", square65)
        assert check_separate_lsc_first(f)[1].passed
        assert check_separate_usc_second(f)[1].passed  # constant in y
        _refuted(check_separate_usc_first(f)[1])

    def test_step_usc_y(self, square65):
        f = from_catalog("step_usc_y", square65)
        assert check_separate_usc_second(f)[1].passed
        assert check_separate_lsc_first(f)[1].passed  # constant in x
        _refuted(check_separate_lsc_second(f)[1], None)
        w = check_separate_lsc_second(f)[1].witness
        assert w.point[1] == 0.0

    def test_constant(self, square65):
        f = from_catalog("constant(4)", square65)
        for check in (check_separate_lsc_first, check_separate_usc_second,
                      check_separate_usc_first, check_separate_lsc_second):
            profile, verdict = check(f)
            assert verdict.passed and verdict.witness is None
            assert np.all(profile.lsc_deficiency == 0) and np.all(profile.usc_deficiency == 0)

    def test_mixed_step_both_ways(self, square65):
        f = from_catalog("mixed_step", square65)
        profile, verdict = check_separate_lsc_first(f)
        assert verdict.passed and verdict.trend == 0.0
        assert profile.resampled and profile.refine_factor > 1
        assert check_separate_usc_second(f)[1].passed
        _refuted(check_separate_usc_first(f)[1], (32, 0))
        _refuted(check_separate_lsc_second(f)[1], (0, 32))

    def test_negation_swaps_kinds(self, square65):
        f = from_catalog("mixed_step", square65)
        assert check_separate_usc_first(-f)[1].passed
        _refuted(check_separate_lsc_first(-f)[1])

    def test_profile_shape_and_default_radii(self, square65):
        f = from_catalog("mixed_step", square65)
        profile = separate_profile(f, "first")
        assert np.array_equal(profile.radii, default_radii(square65))
        assert profile.radii[0] == 0.5 and profile.radii.size == 8

    def test_without_source_uses_own_grid(self, square65):
        f = from_catalog("mixed_step", square65)
        bare = f.with_values(f.values)
        profile = separate_profile(bare, "first")
        assert not profile.resampled and profile.refine_factor == 1

    def test_node_cap_respected(self, square65):
        f = from_catalog("mixed_step", square65)
        profile = separate_profile(f, "first", max_nodes=5000)
        assert profile.refine_factor == 1  # 129 * 65 > 5000 already
        profile = separate_profile(f, "first", max_nodes=65 * 129)
        assert profile.refine_factor == 2

    @pytest.mark.parametrize("radii", [[], [0.1, 0.2], [0.1, 0.1], [0.1, -0.05], [float("nan")]])
    def test_bad_radii(self, radii, square65):
        with pytest.raises(EnvkitError):
            separate_profile(from_catalog("mixed_step", square65), "first", radii)

    def test_bad_kind_and_tol(self, square65):
        f = from_catalog("mixed_step", square65)
        with pytest.raises(EnvkitError):
            check_separate(f, "first", "both")
        with pytest.raises(EnvkitError):
            check_separate_lsc_first(f, tol=-1.0)


class TestJoint:
    @pytest.mark.parametrize("alpha", [0.5, 0.25, 0.1])
    def test_envelope_lsc(self, alpha, square65):
        profile, verdict = verify_envelope_joint_lsc(from_catalog("mixed_step", square65), alpha)
        assert verdict.passed and verdict.trend <= 1e-9

    def test_envelope_usc_of_negated(self, square65):
        f = from_catalog("neg(mixed_step)", square65)
        assert verify_envelope_joint_usc(f, 0.5)[1].passed

    def test_envelope_usc_fails_on_mixed_step(self, square65):
        f = from_catalog("mixed_step", square65)
        profile, verdict = verify_envelope_joint_usc(f, 0.5)
        assert not verdict.passed and verdict.witness is not None

    def test_sine(self, square65):
        f = from_catalog("lipschitz_sine", square65)
        prof, verdict = verify_envelope_joint_lsc(f, 0.3, radii=default_radii(square65, levels=6), tol=0.05)
        assert verdict.passed
        assert np.all(np.diff(prof.lsc_deficiency) <= 0)

    def test_to_json(self, square65):
        _, verdict = check_separate_usc_first(from_catalog("mixed_step", square65))
        doc = verdict.to_json()
        assert doc["passed"] is False and doc["kind"] == "usc"
        assert doc["witness_node"] == [32, 0] and doc["deficiency"] == 1.0


@given(st.integers(0, 2 ** 32 - 1))
@settings(max_examples=40, deadline=None)
def test_deficiency_properties(seed):
    f, rng = random_function(seed)
    radii = np.sort(rng.uniform(0.01, 2.0, size=4))[::-1]
    for var in ("first", "second"):
        lsc = [deficiency_field(f, var, r, "lsc") for r in radii]
        usc = [deficiency_field(f, var, r, "usc") for r in radii]
        for a, b in zip(lsc, lsc[1:]):
            assert np.all(a >= 0) and np.all(b <= a)
        for a, b in zip(usc, usc[1:]):
            assert np.all(a >= 0) and np.all(b <= a)
        for r, a in zip(radii, lsc):
            assert np.array_equal(a, deficiency_field(-f, var, r, "usc"))


class TestRefinementStudy:
    def test_constant_rows_identical(self, square65):
        coarse = ProductGrid((AxisGrid.lin(-1, 1, 9),), (AxisGrid.lin(-1, 1, 9),))
        table = refinement_study("constant(2)", coarse, 3, 0.25)
        assert len(table.rows) == 4
        for row in table.rows:
            assert row.envelope_max == 2.0 and row.envelope_mean == 2.0
            assert row.lsc_deficiency_first == 0.0 and row.usc_deficiency_second == 0.0

    def test_sine_monotone_below_analytic(self):
        coarse = ProductGrid((AxisGrid.lin(-1, 1, 9),), (AxisGrid.lin(-1, 1, 9),))
        alpha = 0.3
        table = refinement_study("lipschitz_sine", coarse, 4, alpha)
        assert table.envelope_monotone
        xs, ys = coarse.x_axes[0].coords, coarse.y_axes[0].coords
        # sup of sin(2t) over the open interval clipped to [-1, 1]
        t = np.linspace(-1, 1, 200001)
        sup_y = np.array([np.max(np.sin(2 * t[np.abs(t - y) < alpha])) for y in ys])
        analytic = np.sin(2 * xs)[:, None] + sup_y[None, :]
        assert np.all(table.envelopes[-1] <= analytic + 1e-12)
        assert np.max(analytic - table.envelopes[-1]) < 1e-2

    def test_mixed_step_stable(self):
        coarse = ProductGrid((AxisGrid.lin(-1, 1, 9),), (AxisGrid.lin(-1, 1, 9),))
        table = refinement_study("mixed_step", coarse, 3, 0.2, radius=0.01)
        assert all(r.lsc_deficiency_first == 0.0 for r in table.rows)
        assert all(r.usc_deficiency_second == 0.0 for r in table.rows)
        assert [r.n_nodes for r in table.rows] == [81, 289, 1089, 4225]

    def test_bad_levels(self, square65):
        with pytest.raises(EnvkitError):
            refinement_study("constant", square65, 0, 0.1)
