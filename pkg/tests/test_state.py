import numpy as np
import pytest

from ddesplit.errors import DimensionError, GridError
from ddesplit.generator import LinearGenerator
from ddesplit.state import (DelayState, HistorySegment, d_norm, e_norm, interpolate_history,
                            make_state, regrid, shift_append, trapezoid_weights)


def hist(rows):
    return HistorySegment(np.array(rows, dtype=float))


class TestMakeState:
    def test_constant_history_is_head_consistent(self):
        s = make_state([1.0], lambda s: [1.0], 4)
        assert s.history.samples.tolist() == [[1.0]] * 5
        assert s.head_consistent

    def test_linear_sampling(self):
        s = make_state([0.0], lambda s: [s], 2)
        assert s.history.samples[:, 0].tolist() == [-1.0, -0.5, 0.0]

    def test_mismatched_boundary_value_is_allowed(self):
        s = make_state([2.0], lambda s: [1.0], 4)
        assert not s.head_consistent

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            make_state([1.0, 2.0], lambda s: [1.0], 4)

    def test_arrays_are_read_only(self):
        s = make_state([1.0], lambda s: [1.0], 2)
        with pytest.raises(ValueError):
            s.head[0] = 3.0
        with pytest.raises(ValueError):
            s.history.samples[0, 0] = 3.0

    def test_invalid_inputs(self):
        with pytest.raises(GridError):
            make_state([1.0], lambda s: [1.0], 0)
        with pytest.raises(ValueError):
            DelayState([np.nan], hist([[1.0], [1.0]]))
        with pytest.raises(ValueError):
            DelayState([1.0], hist([[1.0], [1.0]]), grid_weight=0.0)
        with pytest.raises(ValueError):
            HistorySegment(np.ones((3, 1)), p=0.5)


class TestShiftAppend:
    def test_single_shift(self):
        s = DelayState([3.0], hist([[1], [2], [3]]))
        out = shift_append(s, [[4.0]])
        assert out.history.samples[:, 0].tolist() == [2, 3, 4]
        assert out.head.tolist() == [4.0]

    def test_empty_tail_is_identity(self):
        s = DelayState([3.0], hist([[1], [2], [3]]))
        assert shift_append(s, []) is s

    def test_double_shift(self):
        s = DelayState([3.0], hist([[1], [2], [3]]))
        out = shift_append(s, [[4.0], [5.0]])
        assert out.history.samples[:, 0].tolist() == [3, 4, 5]
        assert out.head.tolist() == [5.0]

    def test_too_long(self):
        s = DelayState([3.0], hist([[1], [2], [3]]))
        with pytest.raises(GridError):
            shift_append(s, [[4.0], [5.0], [6.0]])

    def test_composition(self, rng):
        s = make_state(rng.standard_normal(3), lambda _: rng.standard_normal(3), 6)
        a, b = rng.standard_normal((2, 3)), rng.standard_normal((3, 3))
        two = shift_append(shift_append(s, a), b)
        one = shift_append(s, np.vstack([a, b]))
        assert np.array_equal(two.history.samples, one.history.samples)
        assert np.array_equal(two.head, one.head)


class TestInterpolation:
    def test_midpoint(self):
        assert interpolate_history(hist([[0], [1]]), -0.5).tolist() == [0.5]

    def test_node_exact(self, rng):
        h = HistorySegment(rng.standard_normal((11, 2)))
        for j, s in enumerate(h.nodes):
            assert np.array_equal(interpolate_history(h, s), h.samples[j])

    def test_quadratic_accuracy(self):
        h = HistorySegment(np.linspace(-1, 0, 101)[:, None] ** 2)
        assert abs(interpolate_history(h, -0.345)[0] - 0.119025) <= 1e-4

    @pytest.mark.parametrize("sigma", [-1.0, -0.731, -0.2, 0.0])
    def test_affine_reproduced(self, sigma):
        h = HistorySegment(np.stack([2 * np.linspace(-1, 0, 8) + 1, -np.linspace(-1, 0, 8)], axis=1))
        np.testing.assert_allclose(interpolate_history(h, sigma), [2 * sigma + 1, -sigma], atol=1e-15)

    def test_out_of_range(self):
        with pytest.raises(GridError):
            interpolate_history(hist([[0], [1]]), 0.1)
        with pytest.raises(GridError):
            interpolate_history(hist([[0], [1]]), -1.01)

    def test_regrid_linear_history_exact(self):
        s = make_state([0.0], lambda s: [3 * s], 4)
        r = regrid(s, 12)
        np.testing.assert_allclose(r.history.samples[:, 0], 3 * np.linspace(-1, 0, 13), atol=1e-15)


class TestNorms:
    def test_head_only(self):
        s = make_state([1.0], lambda s: [0.0], 8)
        assert e_norm(s, weight=lambda x: x + 1) == 1.0

    def test_unit_history(self):
        assert e_norm(make_state([0.0], lambda s: [1.0], 8)) == pytest.approx(1.0, abs=1e-14)

    def test_weighted(self):
        s = make_state([1.0], lambda s: [1.0], 16)
        # trapezoid rule is exact for the affine weight
        assert e_norm(s, weight=lambda x: x + 1) == pytest.approx(np.sqrt(1.5), abs=1e-14)

    def test_weight_array_and_callable_agree(self, rng):
        s = make_state(rng.standard_normal(2), lambda _: rng.standard_normal(2), 10)
        w = np.linspace(0, 1, 11)
        assert e_norm(s, weight=w) == e_norm(s, weight=lambda x: x + 1)

    def test_bad_p(self):
        with pytest.raises(ValueError):
            e_norm(make_state([1.0], lambda s: [1.0], 2), p=0.5)

    def test_p1(self):
        s = make_state([2.0], lambda s: [-1.0], 4)
        assert e_norm(s, p=1) == pytest.approx(3.0)

    def test_homogeneous(self, rng):
        s = make_state(rng.standard_normal(3), lambda _: rng.standard_normal(3), 7)
        assert e_norm(-2.5 * s) == pytest.approx(2.5 * e_norm(s), rel=1e-15)

    def test_matches_flattened_euclidean(self, rng):
        s = make_state(rng.standard_normal(3), lambda _: rng.standard_normal(3), 9)
        w = trapezoid_weights(9)
        flat = np.concatenate([s.head, (np.sqrt(w)[:, None] * s.history.samples).ravel()])
        assert e_norm(s) == pytest.approx(np.linalg.norm(flat), rel=1e-14)

    def test_trapezoid_weights_sum(self):
        assert trapezoid_weights(7).sum() == pytest.approx(1.0)


class TestDNorm:
    def test_zero(self):
        gen = LinearGenerator.laplacian1d(5)
        assert d_norm(make_state(np.zeros(5), lambda s: np.zeros(5), 4), gen) == 0.0

    def test_constant_data_with_zero_generator(self):
        gen = LinearGenerator.diagonal([0.0])
        assert d_norm(make_state([1.0], lambda s: [1.0], 8), gen) == pytest.approx(2.0)

    def test_heat_initial_data_finite(self, heat):
        v = d_norm(heat.initial_state(40), heat.generator)
        assert np.isfinite(v) and v > 0


class TestArithmetic:
    def test_grid_mismatch(self):
        a = make_state([1.0], lambda s: [1.0], 2)
        b = make_state([1.0], lambda s: [1.0], 3)
        with pytest.raises(GridError):
            a - b

    def test_add_sub(self, rng):
        a = make_state(rng.standard_normal(2), lambda _: rng.standard_normal(2), 3)
        b = make_state(rng.standard_normal(2), lambda _: rng.standard_normal(2), 3)
        c = (a + b) - b
        np.testing.assert_allclose(c.history.samples, a.history.samples, atol=1e-15)
