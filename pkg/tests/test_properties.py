import math

import numpy as np
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from ddesplit import _backend
from ddesplit.analysis import order_fit
from ddesplit.generator import LinearGenerator
from ddesplit.kernel import DelayKernel, evaluate_phi
from ddesplit.splitting import resolvent_A2, resolvent_G, step_T2
from ddesplit.state import DelayState, HistorySegment, e_norm, interpolate_history

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)
grid = st.sampled_from([2, 4, 5, 8, 10])


@st.composite
def states(draw, n=2, m=None):
    m = draw(grid) if m is None else m
    head = draw(arrays(float, n, elements=finite))
    hist = draw(arrays(float, (m + 1, n), elements=finite))
    return DelayState(head, HistorySegment(hist))


@st.composite
def linear_kernels(draw):
    atoms = [(draw(st.sampled_from([-1.0, -0.75, -0.5])), draw(st.floats(-2, 2)))]
    dens = draw(st.sampled_from([None, "linear-ramp -0.5 0", "constant 0.5"]))
    return DelayKernel(atoms=atoms, density=dens)


@given(states(m=10), states(m=10), st.floats(-3, 3), linear_kernels())
def test_delay_flow_is_linear_for_linear_kernels(a, b, c, k):
    lhs = step_T2(c * a + b, k, 0.1)
    rhs = c * step_T2(a, k, 0.1) + step_T2(b, k, 0.1)
    scale = 1.0 + e_norm(a) + e_norm(b)
    assert e_norm(lhs - rhs) <= 1e-9 * scale


@given(states(m=8), linear_kernels(), st.sampled_from([0.05, 0.2, 1.0, 4.0]))
def test_resolvent_solves_head_equation(s, k, h):
    out = resolvent_A2(s, k, h)
    resid = out.head - s.head - h * evaluate_phi(k, out.history)
    assert np.linalg.norm(resid) <= 1e-9 * (1.0 + e_norm(s) + e_norm(out))
    assert out.head_consistent


@given(states(m=8), st.sampled_from([0.05, 0.2, 1.0]))
def test_history_resolvent_solves_transport_per_cell(s, h):
    # (I - h d/dsigma) f = g holds cell by cell for linear data
    out = resolvent_A2(s, DelayKernel.zero(), h)
    f, g = out.history.samples, s.history.samples
    q = math.exp(-1.0 / (8 * h))
    slope = np.diff(g, axis=0) * 8
    lhs = f[:-1] - q * f[1:]
    rhs = g[:-1] + h * slope - q * (g[1:] + h * slope)
    np.testing.assert_allclose(lhs, rhs, atol=1e-9 * (1 + np.abs(g).max()))


@given(states(n=3, m=5), states(n=3, m=5), st.sampled_from([0.01, 0.1, 0.5]))
def test_decoupled_resolvent_is_nonexpansive(a, b, h):
    gen = LinearGenerator.laplacian1d(3)
    k = DelayKernel.zero()
    d0 = e_norm(a - b)
    d1 = e_norm(resolvent_G(a, gen, k, h) - resolvent_G(b, gen, k, h))
    assert d1 <= d0 * (1 + 1e-12) + 1e-12


@given(states(), states(), st.floats(-5, 5))
def test_norm_axioms(a, b, c):
    if a.m != b.m:
        b = b.replace(samples=np.resize(b.history.samples, a.history.samples.shape))
    assert e_norm(a + b) <= e_norm(a) + e_norm(b) + 1e-12
    assert math.isclose(e_norm(c * a), abs(c) * e_norm(a), rel_tol=1e-12, abs_tol=1e-12)


@given(states(n=1), st.floats(-1, 0))
def test_interpolation_stays_between_neighbours(s, sigma):
    v = interpolate_history(s.history, sigma)[0]
    f = s.history.samples[:, 0]
    pos = (sigma + 1) * s.m
    j = min(int(math.floor(pos)), s.m - 1)
    lo, hi = sorted((f[j], f[j + 1]))
    assert lo - 1e-12 <= v <= hi + 1e-12


@given(st.floats(0.3, 3.0), st.floats(1e-3, 1e3))
def test_order_fit_recovers_power_law(p, c):
    hs = [0.1, 0.05, 0.025, 0.0125, 0.00625]
    order, const, r2 = order_fit([(h, c * h ** p) for h in hs])
    assert math.isclose(order, p, abs_tol=1e-10)
    assert math.isclose(const, c, rel_tol=1e-9)


@given(st.integers(2, 40), st.integers(1, 3), st.integers(0, 2 ** 31))
def test_thomas_solves_dominant_systems(n, k, seed):
    rng = np.random.default_rng(seed)
    sub, sup = rng.uniform(-1, 1, n), rng.uniform(-1, 1, n)
    diag = 2.5 + rng.random(n)
    rhs = np.ascontiguousarray(rng.standard_normal((n, k)))
    x = _backend.core.thomas(sub, diag, sup, rhs)
    a = np.diag(diag) + np.diag(sub[1:], -1) + np.diag(sup[:-1], 1)
    np.testing.assert_allclose(a @ x, rhs, atol=1e-10)
