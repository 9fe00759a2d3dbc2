import math

import numpy as np
import pytest

from ddesplit.analysis import variation_weighted_norm
from ddesplit.errors import GridError, NumericalError
from ddesplit.generator import LinearGenerator
from ddesplit.kernel import DelayKernel, Density, evaluate_phi, gamma_bound
from ddesplit.reference import ReferenceConfig, reference_solve
from ddesplit.scenarios import builtin
from ddesplit.splitting import (SplitScheme, aligned_m, crandall_liggett_apply, iterate_sequential,
                                lie_split, resolvent_A1, resolvent_A2, resolvent_G, run_scheme,
                                sequential_split, step_T1, step_T2)
from ddesplit.state import DelayState, HistorySegment, e_norm, make_state

DELAY = DelayKernel(atoms=[(-1.0, 1.0)])
ZERO = DelayKernel.zero()
FLAT = LinearGenerator.diagonal([0.0])


def scalar_state(x, fn, m):
    return make_state([x], lambda s: [fn(s)], m)


# -- sub-flows -------------------------------------------------------------------

class TestStepT2:
    def test_constant_history(self):
        out = step_T2(scalar_state(1.0, lambda s: 1.0, 10), DELAY, 0.1, substeps=4)
        assert out.head[0] == pytest.approx(1.1, abs=1e-14)

    def test_linear_history(self):
        out = step_T2(scalar_state(1.0, lambda s: s + 1.0, 10), DELAY, 0.1)
        assert out.head[0] == pytest.approx(1.005, abs=1e-6)

    def test_zero_kernel_shifts(self, rng):
        s = DelayState(rng.standard_normal(3), HistorySegment(rng.standard_normal((11, 3))))
        out = step_T2(s, ZERO, 0.1)
        np.testing.assert_array_equal(out.head, s.head)
        np.testing.assert_array_equal(out.history.samples[:-1], s.history.samples[1:])
        np.testing.assert_array_equal(out.history.samples[-1], s.head)

    def test_head_consistent(self, intro):
        assert step_T2(intro.initial_state(20), intro.kernel, 0.05).head_consistent

    def test_misaligned_step(self):
        with pytest.raises(GridError):
            step_T2(scalar_state(1.0, lambda s: 1.0, 10), DELAY, 0.033)
        with pytest.raises(GridError):
            step_T2(scalar_state(1.0, lambda s: 1.0, 10), DELAY, 1.1)

    def test_default_step_is_one_cell(self):
        s = scalar_state(1.0, lambda s: 1.0, 8)
        assert step_T2(s, DELAY).head[0] == pytest.approx(1.125, abs=1e-14)

    def test_multi_cell_step_matches_single_cells(self, intro):
        s = intro.initial_state(20)
        one = step_T2(s, intro.kernel, 0.15)
        three = step_T2(step_T2(step_T2(s, intro.kernel, 0.05), intro.kernel, 0.05), intro.kernel, 0.05)
        np.testing.assert_allclose(one.history.samples, three.history.samples, atol=1e-12)


class TestStepT1:
    def test_scalar(self):
        s = scalar_state(1.0, lambda x: 7.0 + x, 4)
        out = step_T1(s, LinearGenerator.diagonal([-1.0]), 1.0)
        assert out.head[0] == pytest.approx(math.exp(-1), abs=1e-14)
        np.testing.assert_array_equal(out.history.samples, s.history.samples)
        assert not out.head_consistent

    def test_identity_cases(self, rng):
        s = scalar_state(2.0, lambda x: x, 4)
        assert step_T1(s, FLAT, 0.3).head[0] == 2.0
        assert step_T1(s, LinearGenerator.diagonal([-5.0]), 0.0) is s
        with pytest.raises(ValueError):
            step_T1(s, FLAT, -1.0)


# -- composite sequential scheme ----------------------------------------------------

class TestSequential:
    def test_k_zero(self, heat):
        x0 = heat.initial_state(10)
        assert sequential_split(x0, heat.generator, heat.kernel, 0.1, 0) is x0

    @pytest.mark.parametrize("k", [1, 5, 20, 40])
    def test_exact_head_without_delay(self, heat, k):
        x0 = heat.initial_state(20)
        out = sequential_split(x0, heat.generator, ZERO, 0.05, k)
        exact = heat.generator.semigroup_apply(0.05 * k, x0.head)
        assert np.linalg.norm(out.head - exact) <= 1e-10

    def test_pure_delay_matches_reference(self):
        x0 = scalar_state(1.0, lambda s: 1.0, 40)
        out = sequential_split(x0, FLAT, DELAY, 1 / 40, 80)
        ref = reference_solve(x0, FLAT, DELAY, 2.0, ReferenceConfig(16))
        assert out.head[0] == pytest.approx(3.5, abs=1e-10)
        np.testing.assert_allclose(out.history.samples, ref.history.samples, atol=1e-10)

    def test_pure_delay_nonpolynomial_history(self):
        # integrator error is O(h^2) per step; the sum stays small
        x0 = scalar_state(1.0, lambda s: math.cos(3 * s), 20)
        out = sequential_split(x0, FLAT, DELAY, 0.05, 20)
        ref = reference_solve(x0, FLAT, DELAY, 1.0, ReferenceConfig(16))
        assert abs(out.head[0] - ref.head[0]) <= 20 * 0.05 ** 2

    def test_multi_cell_steps(self):
        x0 = scalar_state(1.0, lambda s: 1.0, 10)
        assert sequential_split(x0, FLAT, DELAY, 0.5, 3).head[0] == pytest.approx(2.625, abs=1e-12)
        assert sequential_split(x0, FLAT, DELAY, 0.5, 4).head[0] == pytest.approx(3.5, abs=1e-12)
        assert run_scheme("sequential", x0, FLAT, DELAY, 1.5, 5).head[0] == pytest.approx(2.625, abs=1e-12)

    def test_step_must_fit_grid(self):
        x0 = scalar_state(1.0, lambda s: 1.0, 10)
        with pytest.raises(GridError):
            sequential_split(x0, FLAT, DELAY, 0.33, 3)

    def test_stability_successive_ratio(self, heat):
        h = 1 / 20
        x0 = heat.initial_state(20)
        gamma = gamma_bound(heat.kernel, heat.generator.alpha, heat.p)
        norms = [variation_weighted_norm(x0, heat.kernel)]
        for s in iterate_sequential(x0, heat.generator, heat.kernel, h, 20):
            norms.append(variation_weighted_norm(s, heat.kernel))
        ratios = np.array(norms[1:]) / np.array(norms[:-1])
        assert np.all(ratios <= math.exp((gamma + 0.1) * h))

    def test_phi_of_split_history_close_to_true(self, intro):
        # |Phi(v_t) - Phi(u_t)| / t stays bounded as t shrinks
        vals = []
        for m in (10, 20, 40, 80):
            x0 = intro.initial_state(m)
            v = step_T2(x0, intro.kernel, 1 / m)
            u = reference_solve(x0, intro.generator, intro.kernel, 1 / m, ReferenceConfig(8))
            diff = evaluate_phi(intro.kernel, v.history) - evaluate_phi(intro.kernel, u.history)
            vals.append(np.linalg.norm(diff) * m)
        assert all(b <= 2 * a for a, b in zip(vals, vals[1:]))


# -- resolvents ------------------------------------------------------------------

def dense_resolvent_oracle(state, gen, kernel, h):
    """Solve ``(I - h G) z = w`` as one dense linear system.

    Per history cell the data is linear, so ``f - h f' = g`` has the exact
    solution ``g + h g' + C exp(s/h)``; eliminating ``C`` gives a two-term
    relation between neighbouring nodes. The last node is the head, which
    satisfies ``x - h B x - h Phi(f) = y``.
    """
    g = state.history.samples
    m, n = g.shape[0] - 1, g.shape[1]
    ds = 1.0 / m
    q = math.exp(-ds / h)
    size = (m + 1) * n
    A = np.zeros((size, size))
    rhs = np.zeros(size)
    eye = np.eye(n)

    def blk(i, j, val):
        A[i * n:(i + 1) * n, j * n:(j + 1) * n] += val

    for j in range(m):
        slope = (g[j + 1] - g[j]) / ds
        blk(j, j, eye)
        blk(j, j + 1, -q * eye)
        rhs[j * n:(j + 1) * n] = g[j] + h * slope - q * (g[j + 1] + h * slope)
    blk(m, m, eye - h * gen.matrix())
    c = kernel.g.scale
    for sigma, coeff in kernel.atoms:
        pos = (sigma + 1.0) * m
        lo = min(int(math.floor(pos + 1e-12)), m - 1)
        th = pos - lo
        cm = coeff * eye if np.ndim(coeff) == 0 else np.asarray(coeff)
        blk(m, lo, -h * c * (1 - th) * cm)
        if th > 0:
            blk(m, lo + 1, -h * c * th * cm)
    w = kernel.density_weights(m)
    if w is not None:
        for j in range(m + 1):
            wj = w[j] * eye if w.ndim == 1 else w[j]
            blk(m, j, -h * c * wj)
    rhs[m * n:] = state.head
    z = np.linalg.solve(A, rhs).reshape(m + 1, n)
    return z[m], z


class TestResolvents:
    def test_A2_closed_form(self):
        s = scalar_state(1.0, lambda x: 0.0, 10)
        out = resolvent_A2(s, DELAY, 0.5)
        assert out.head[0] == pytest.approx(1 / (1 - 0.5 * math.exp(-2)), abs=1e-12)
        assert out.head[0] == pytest.approx(1.0725789, abs=1e-7)
        assert out.head_consistent

    def test_A2_zero_kernel(self, rng):
        y = rng.standard_normal(2)
        s = make_state(y, lambda x: [0.0, 0.0], 16)
        out = resolvent_A2(s, ZERO, 0.3)
        np.testing.assert_allclose(out.head, y, atol=1e-15)
        prof = np.exp(np.linspace(-1, 0, 17) / 0.3)
        np.testing.assert_allclose(out.history.samples, prof[:, None] * y[None, :], atol=1e-14)

    def test_A2_small_step_is_near_identity(self, intro, rng):
        s = intro.initial_state(20)
        out = resolvent_A2(s, intro.kernel, 1e-3)
        assert np.linalg.norm(out.head - s.head) <= 1e-2 * e_norm(s)

    def test_A2_nonlinear_satisfies_head_equation(self, intro):
        s = intro.initial_state(20)
        out = resolvent_A2(s, intro.kernel, 0.05)
        resid = out.head - s.head - 0.05 * evaluate_phi(intro.kernel, out.history)
        assert np.linalg.norm(resid) <= 1e-10

    def test_A2_nonlinear_precondition(self):
        k = DelayKernel(atoms=[(-1.0, 1.0)], g="sin")
        with pytest.raises(ValueError):
            resolvent_A2(scalar_state(1.0, lambda x: 1.0, 4), k, 1.0)

    def test_A1_leaves_history(self, heat):
        s = heat.initial_state(10)
        out = resolvent_A1(s, heat.generator, 0.1)
        np.testing.assert_array_equal(out.history.samples, s.history.samples)
        np.testing.assert_allclose(out.head, heat.generator.resolvent_B(0.1, s.head))

    def test_G_zero_kernel(self, heat):
        s = heat.initial_state(10)
        s = s.replace(samples=np.zeros_like(s.history.samples))
        out = resolvent_G(s, heat.generator, ZERO, 0.1)
        x = heat.generator.resolvent_B(0.1, s.head)
        np.testing.assert_allclose(out.head, x, atol=1e-13)
        prof = np.exp(np.linspace(-1, 0, 11) / 0.1)
        np.testing.assert_allclose(out.history.samples, prof[:, None] * x[None, :], atol=1e-13)

    def test_G_with_flat_generator_is_A2(self, rng):
        s = DelayState(rng.standard_normal(1), HistorySegment(rng.standard_normal((21, 1))))
        k = DelayKernel(atoms=[(-0.8, 0.7)], density="linear-ramp -0.5 0")
        a = resolvent_G(s, FLAT, k, 0.2)
        b = resolvent_A2(s, k, 0.2)
        np.testing.assert_allclose(a.head, b.head, atol=1e-14)
        np.testing.assert_allclose(a.history.samples, b.history.samples, atol=1e-14)

    def test_G_against_block_oracle_heat(self, heat):
        s = heat.initial_state(10)
        out = resolvent_G(s, heat.generator, heat.kernel, 0.1)
        x, f = dense_resolvent_oracle(s, heat.generator, heat.kernel, 0.1)
        np.testing.assert_allclose(out.head, x, atol=1e-8)
        np.testing.assert_allclose(out.history.samples, f, atol=1e-8)

    @pytest.mark.parametrize("h", [0.01, 0.25, 3.0])
    def test_G_against_block_oracle_density(self, rng, h):
        gen = LinearGenerator.dense(-np.eye(3) + 0.2 * rng.standard_normal((3, 3)))
        k = DelayKernel(atoms=[(-0.75, 0.3 * rng.standard_normal((3, 3)))],
                        density=Density.linear_ramp(-0.5, 0.0, 0.4))
        s = DelayState(rng.standard_normal(3), HistorySegment(rng.standard_normal((13, 3))))
        out = resolvent_G(s, gen, k, h)
        x, f = dense_resolvent_oracle(s, gen, k, h)
        np.testing.assert_allclose(out.head, x, atol=1e-10)
        np.testing.assert_allclose(out.history.samples, f, atol=1e-10)

    def test_G_rejects_large_step(self):
        gen = LinearGenerator.diagonal([-1.0], alpha=2.0)
        with pytest.raises(NumericalError):
            resolvent_G(scalar_state(1.0, lambda x: 1.0, 4), gen, DELAY, 0.5)


# -- Lie and Crandall-Liggett ----------------------------------------------------------

class TestImplicitSchemes:
    @pytest.mark.parametrize("n", [1, 4, 32])
    def test_lie_scalar(self, n):
        s = scalar_state(1.0, lambda x: 1.0, 8)
        out = lie_split(s, LinearGenerator.diagonal([-1.0]), ZERO, 1.0, n)
        assert out.head[0] == pytest.approx((1 + 1 / n) ** -n, rel=1e-13)

    def test_lie_trivial(self, rng):
        s = DelayState(rng.standard_normal(2), HistorySegment(rng.standard_normal((5, 2))))
        out = lie_split(s, LinearGenerator.diagonal([0.0, 0.0]), ZERO, 0.7, 1)
        np.testing.assert_allclose(out.head, s.head, atol=1e-15)

    @pytest.mark.parametrize("n", [3, 10])
    def test_crandall_liggett_scalar(self, n):
        s = scalar_state(1.0, lambda x: 1.0, 8)
        out = crandall_liggett_apply(s, LinearGenerator.diagonal([-2.0]), ZERO, 1.5, n)
        assert out.head[0] == pytest.approx((1 + 1.5 / n * 2) ** -n, rel=1e-13)

    def test_time_zero(self, heat):
        s = heat.initial_state(10)
        assert crandall_liggett_apply(s, heat.generator, heat.kernel, 0.0, 7) is s
        assert lie_split(s, heat.generator, heat.kernel, 0.0, 7) is s
        with pytest.raises(ValueError):
            lie_split(s, heat.generator, heat.kernel, 1.0, 0)

    def test_crandall_liggett_converges_and_meets_sequential(self, heat):
        x80 = heat.initial_state(80)
        ref = reference_solve(x80, heat.generator, heat.kernel, 1.0, ReferenceConfig(8))
        cl_err, gap = [], []
        for n in (10, 20, 40, 80):
            x0 = heat.initial_state(n)
            step = 80 // n
            cl = crandall_liggett_apply(x0, heat.generator, heat.kernel, 1.0, n)
            lie = lie_split(x0, heat.generator, heat.kernel, 1.0, n)
            seq = sequential_split(x0, heat.generator, heat.kernel, 1.0 / n, n)
            cl_err.append(e_norm(cl - ref.replace(samples=ref.history.samples[::step])))
            gap.append(e_norm(lie - seq))
        assert all(b < a for a, b in zip(cl_err, cl_err[1:]))
        assert all(b < a for a, b in zip(gap, gap[1:]))


class TestSchemeConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            SplitScheme(kind="strang")
        with pytest.raises(ValueError):
            SplitScheme(h=0.0)
        with pytest.raises(ValueError):
            SplitScheme(substeps=0)
        assert SplitScheme(h=0.125).m == 8
        with pytest.raises(GridError):
            aligned_m(0.3)

    def test_run_matches_functions(self, heat):
        x0 = heat.initial_state(10)
        a = SplitScheme("lie_resolvent", 0.1).run(x0, heat.generator, heat.kernel, 5)
        b = lie_split(x0, heat.generator, heat.kernel, 0.5, 5)
        np.testing.assert_allclose(a.head, b.head, atol=1e-15)
