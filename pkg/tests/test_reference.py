import math

import numpy as np
import pytest

from ddesplit.errors import GridError, UnsupportedParameterError
from ddesplit.generator import LinearGenerator
from ddesplit.kernel import DelayKernel
from ddesplit.reference import (ReferenceConfig, exact_scalar_oracle, reference_solve,
                                self_error_estimate)
from ddesplit.state import e_norm, make_state


def scalar_problem(a, b, m=10):
    x0 = make_state([1.0], lambda s: [1.0], m)
    return x0, LinearGenerator.diagonal([a]), DelayKernel(atoms=[(-1.0, b)])


class TestOracle:
    def test_examples(self):
        assert exact_scalar_oracle(0.0, 1.0, 1.0, 1.0) == pytest.approx(2.0, abs=1e-14)
        assert exact_scalar_oracle(0.0, 1.0, 1.0, 2.0) == pytest.approx(3.5, abs=1e-14)
        assert exact_scalar_oracle(-1.0, 0.0, 1.0, 1.0) == pytest.approx(math.exp(-1), abs=1e-15)

    def test_third_segment_by_hand(self):
        assert exact_scalar_oracle(0.0, 1.0, 1.0, 3.0) == pytest.approx(37 / 6, abs=1e-13)

    def test_first_segment_closed_form(self):
        a, b, x = -0.7, 0.4, 2.0
        for t in (0.3, 1.0):
            expect = (x + b * x / a) * math.exp(a * t) - b * x / a
            assert exact_scalar_oracle(a, b, x, t) == pytest.approx(expect, abs=1e-13)

    def test_range(self):
        assert exact_scalar_oracle(0.3, -1.0, 2.0, 0.0) == 2.0
        with pytest.raises(UnsupportedParameterError):
            exact_scalar_oracle(0.0, 1.0, 1.0, 3.5)
        with pytest.raises(UnsupportedParameterError):
            exact_scalar_oracle(0.0, 1.0, 1.0, -0.1)


class TestReferenceSolve:
    @pytest.mark.parametrize("a,b", [(0.0, 1.0), (-1.0, 0.5), (0.3, -1.0)])
    @pytest.mark.parametrize("t", [1.0, 2.0, 3.0])
    def test_matches_oracle(self, a, b, t):
        x0, gen, k = scalar_problem(a, b)
        out = reference_solve(x0, gen, k, t, ReferenceConfig(refine=16))
        assert out.head[0] == pytest.approx(exact_scalar_oracle(a, b, 1.0, t), abs=1e-8)

    def test_history_samples_match_oracle(self):
        x0, gen, k = scalar_problem(-1.0, 0.5)
        out = reference_solve(x0, gen, k, 3.0)
        nodes = np.linspace(2.0, 3.0, 11)
        expect = [exact_scalar_oracle(-1.0, 0.5, 1.0, s) for s in nodes]
        np.testing.assert_allclose(out.history.samples[:, 0], expect, atol=1e-8)
        assert out.head_consistent

    def test_no_delay(self):
        x0 = make_state([1.0], lambda s: [1.0], 10)
        out = reference_solve(x0, LinearGenerator.diagonal([-1.0]), DelayKernel.zero(), 1.0)
        assert out.head[0] == pytest.approx(math.exp(-1), abs=1e-8)

    def test_pure_delay(self):
        x0, gen, k = scalar_problem(0.0, 1.0, m=20)
        assert reference_solve(x0, gen, k, 1.0).head[0] == pytest.approx(2.0, abs=1e-8)
        assert reference_solve(x0, gen, k, 2.0).head[0] == pytest.approx(3.5, abs=1e-8)

    def test_time_zero(self, heat):
        x0 = heat.initial_state(10)
        assert reference_solve(x0, heat.generator, heat.kernel, 0.0) is x0

    def test_misaligned_time(self):
        x0, gen, k = scalar_problem(0.0, 1.0)
        with pytest.raises(GridError):
            reference_solve(x0, gen, k, 0.25)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            ReferenceConfig(refine=3)

    def test_semigroup_property_exact_case(self):
        # the solution is piecewise linear with kinks on grid nodes up to t = 1
        x0, gen, k = scalar_problem(0.0, 1.0, m=10)
        mid = reference_solve(reference_solve(x0, gen, k, 0.5), gen, k, 0.5)
        assert mid.head[0] == pytest.approx(2.0, abs=1e-12)
        two = reference_solve(reference_solve(x0, gen, k, 1.0), gen, k, 1.0)
        one = reference_solve(x0, gen, k, 2.0)
        assert e_norm(one - two) <= 1e-10

    def test_semigroup_property_smooth_case(self, intro):
        # restarting only sees grid samples, so the gap is the O(m^-2) interpolation error
        gaps = []
        for m in (20, 40):
            x0 = intro.initial_state(m)
            cfg = ReferenceConfig(8)
            two = reference_solve(reference_solve(x0, intro.generator, intro.kernel, 0.5, cfg),
                                  intro.generator, intro.kernel, 0.5, cfg)
            one = reference_solve(x0, intro.generator, intro.kernel, 1.0, cfg)
            gaps.append(e_norm(one - two))
        assert gaps[0] < 1e-5
        assert 3.0 <= gaps[0] / gaps[1] <= 5.0

    def test_self_convergence_rate(self, heat):
        x0 = heat.initial_state(10)
        outs = [reference_solve(x0, heat.generator, heat.kernel, 1.0, ReferenceConfig(r))
                for r in (4, 8, 16)]
        ratio = e_norm(outs[0] - outs[1]) / e_norm(outs[1] - outs[2])
        assert 10.0 <= ratio <= 24.0

    def test_self_error_estimate(self, heat):
        x0 = heat.initial_state(10)
        fine, head_err, e_err = self_error_estimate(x0, heat.generator, heat.kernel, 1.0,
                                                    ReferenceConfig(8))
        assert 0 < head_err <= e_err < 1e-6
        coarse = reference_solve(x0, heat.generator, heat.kernel, 1.0, ReferenceConfig(4))
        assert e_norm(fine - coarse) == pytest.approx(15 * e_err, rel=1e-9)

    def test_vector_system_against_dense_dde(self, rng):
        # uncoupled diagonal system: each component is a scalar oracle problem
        gen = LinearGenerator.diagonal([0.0, -1.0, 0.3])
        k = DelayKernel(atoms=[(-1.0, np.diag([1.0, 0.5, -1.0]))])
        x0 = make_state([1.0, 1.0, 1.0], lambda s: [1.0, 1.0, 1.0], 10)
        out = reference_solve(x0, gen, k, 2.0)
        expect = [exact_scalar_oracle(a, b, 1.0, 2.0) for a, b in ((0, 1), (-1, 0.5), (0.3, -1))]
        np.testing.assert_allclose(out.head, expect, atol=1e-8)
