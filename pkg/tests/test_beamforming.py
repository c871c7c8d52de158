import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings, strategies as st

from fdmimo import beamforming as bf
from fdmimo.exceptions import ParameterError

from conftest import crandn


def logdet2(a):
    return np.log2(np.linalg.det(a).real)


def sin_angle(a, b):
    """Sine of the principal angle between two complex vectors."""
    a = a / np.linalg.norm(a)
    b = b / np.linalg.norm(b)
    return np.linalg.norm(a - b * np.vdot(b, a))


def random_instance(rng, m_k=4, n_k=4, n_m=2, si_scale=1.0, n_streams=2):
    c = crandn(rng, m_k, n_k, scale=si_scale)
    v = crandn(rng, n_k, n_streams)
    h = crandn(rng, m_k, n_m)
    return c, v, h


# ---------------------------------------------------------------- rates


def test_dl_rate_zero_precoder():
    assert bf.dl_rate(np.zeros((4, 1)), np.ones((1, 4)), 1.0) == 0.0


def test_dl_rate_scalar():
    v = np.full((1, 1), np.sqrt(2.0))
    assert bf.dl_rate(v, np.ones((1, 1)), 1.0) == pytest.approx(np.log2(3.0))


def test_dl_rate_matches_singular_values(rng):
    for _ in range(200):
        h = crandn(rng, 2, 3)
        v = crandn(rng, 3, 2)
        s = np.linalg.svd(h @ v, compute_uv=False)
        assert bf.dl_rate(v, h, 0.5) == pytest.approx(np.sum(np.log2(1 + s**2 / 0.5)), abs=1e-10)


def test_ul_rate_without_si_is_mimo_capacity(rng):
    h = crandn(rng, 3, 2)
    u = bf.optimal_combiner(np.zeros((3, 4)), np.zeros((4, 1)), h, 1.0, 2).u
    rate = bf.ul_rate(u, np.zeros((3, 4)), np.zeros((4, 1)), h, 2.0, 1.0)
    s = np.linalg.svd(h, compute_uv=False)
    assert rate == pytest.approx(np.sum(np.log2(1 + s**2)), abs=1e-10)


def test_ul_rate_equals_det_ratio(rng):
    # Oracle: log2 det(S + Q) - log2 det(Q), built from the raw covariances.
    for _ in range(1000):
        c, v, h = random_instance(rng, si_scale=rng.uniform(0.1, 10))
        d_m = int(rng.integers(1, 3))
        u = crandn(rng, d_m, 4)
        p_m, s2 = rng.uniform(0.1, 10), rng.uniform(0.1, 2)
        vm = np.sqrt(p_m / d_m) * np.eye(2, d_m)
        rx_sig = h @ vm @ vm.conj().T @ h.conj().T
        rx_int = c @ v @ v.conj().T @ c.conj().T + s2 * np.eye(4)
        expected = logdet2(u @ (rx_sig + rx_int) @ u.conj().T) - logdet2(u @ rx_int @ u.conj().T)
        assert bf.ul_rate(u, c, v, h, p_m, s2) == pytest.approx(expected, abs=1e-9)


def test_uplink_precoder_power():
    vm = bf.uplink_precoder(4, 2, 3.0)
    assert np.linalg.norm(vm) ** 2 == pytest.approx(3.0)


# ---------------------------------------------------------- waterfilling


def test_waterfilling_equal_gains():
    np.testing.assert_allclose(bf.waterfilling([1.0, 1.0], 2.0), [1.0, 1.0])


def test_waterfilling_dead_channel_gets_nothing():
    np.testing.assert_allclose(bf.waterfilling([1.0, 0.0], 1.0), [1.0, 0.0])


def test_waterfilling_rejects_all_zero():
    with pytest.raises(ParameterError):
        bf.waterfilling([0.0, 0.0], 1.0)


@pytest.mark.parametrize(
    "gains,power,noise", [((1.0, 0.5), 1.0, 1.0), ((2.0, 1.0), 0.3, 1.0), ((1.0, 0.9), 5.0, 0.5)]
)
def test_waterfilling_matches_grid_search(gains, power, noise):
    g2 = np.square(gains)
    t = np.linspace(0.0, power, 1_000_001)
    rate = np.log2(1 + g2[0] * t / noise) + np.log2(1 + g2[1] * (power - t) / noise)
    best = t[np.argmax(rate)]
    p = bf.waterfilling(gains, power, noise)
    assert p[0] == pytest.approx(best, abs=1e-4 * power + power / 1e6)
    wf_rate = np.sum(np.log2(1 + g2 * p / noise))
    assert wf_rate >= rate.max() - 1e-9


@settings(max_examples=200, deadline=None)
@given(
    st.lists(st.floats(1e-3, 1e3), min_size=1, max_size=6),
    st.floats(1e-3, 1e3),
)
def test_waterfilling_budget_and_level(gains, power):
    p = bf.waterfilling(gains, power)
    assert np.all(p >= 0)
    assert p.sum() == pytest.approx(power, rel=1e-9)
    # Active channels share one water level.
    levels = p + 1.0 / np.square(gains)
    active = p > 1e-9 * power
    assert np.ptp(levels[active]) <= 1e-6 * max(1.0, levels[active].max())


# --------------------------------------------------------- sub-precoders


def test_scalar_precoder():
    g = bf.sub_precoder(np.ones((3, 1)), 2.0, "scalar")
    assert g.shape == (1, 1) and g[0, 0] == pytest.approx(np.sqrt(2.0))


def test_mrt_precoder():
    h = np.array([[1.0, 1.0j]])
    g = bf.sub_precoder(h, 1.0, "mrt")
    np.testing.assert_allclose(g[:, 0], np.array([1.0, -1.0j]) / np.sqrt(2))
    assert abs((h @ g)[0, 0]) ** 2 == pytest.approx(2.0)


def test_open_loop_precoder():
    g = bf.sub_precoder(np.ones((4, 4)), 4.0, "open_loop")
    np.testing.assert_allclose(g, np.eye(4))


def test_closed_loop_precoder_budget_and_optimality(rng):
    for _ in range(100):
        h = crandn(rng, 3, 3)
        g = bf.sub_precoder(h, 2.0, "closed_loop")
        assert np.linalg.norm(g) ** 2 == pytest.approx(2.0, rel=1e-9)
        ol = bf.sub_precoder(h, 2.0, "open_loop")
        assert bf.dl_rate(g, h, 1.0) >= bf.dl_rate(ol, h, 1.0) - 1e-9


@settings(max_examples=300, deadline=None)
@given(
    st.integers(1, 4), st.integers(1, 4), st.sampled_from(["open_loop", "closed_loop"]),
    st.floats(1e-3, 1e2), st.integers(0, 2**32),
)
def test_precoder_power_budget(m_q, alpha, mode, power, seed):
    h = crandn(np.random.default_rng(seed), m_q, alpha)
    stage = bf.stage_mode(m_q, alpha, mode)
    g = bf.sub_precoder(h, power, stage)
    assert np.linalg.norm(g) ** 2 <= power * (1 + 1e-9)
    assert g.shape[0] == alpha and g.shape[1] <= min(m_q, alpha)


# ----------------------------------------------------------- Algorithm 1


def test_squeeze_basis_least_modes(rng):
    c = crandn(rng, 4, 4)
    f = bf.squeeze_basis(c)
    s = np.linalg.svd(c, compute_uv=False)
    for alpha in range(1, 5):
        tail = f[:, 4 - alpha:]
        assert np.linalg.norm(c @ tail) ** 2 == pytest.approx(np.sum(s[4 - alpha:] ** 2), rel=1e-9)
        np.testing.assert_allclose(tail.conj().T @ tail, np.eye(alpha), atol=1e-12)


def test_no_si_keeps_every_alpha(rng):
    h = crandn(rng, 1, 4)
    cands = bf.algorithm1_precoders(np.zeros((4, 4)), h, 1.0, 1e-9, 4)
    assert [c.alpha for c in cands] == [4, 3, 2, 1]
    assert cands[0].candidate_index == 1


def test_zero_threshold_full_rank_has_no_candidate(rng):
    c = crandn(rng, 4, 4)
    assert bf.algorithm1_precoders(c, crandn(rng, 1, 4), 1.0, 0.0, 4) == []


def test_rank_deficient_si_keeps_null_space_candidates(rng):
    c = crandn(rng, 4, 2) @ crandn(rng, 2, 4)  # rank 2
    cands = bf.algorithm1_precoders(c, crandn(rng, 2, 4), 1.0, 1e-20, 4)
    assert [x.alpha for x in cands] == [2, 1]


def test_candidates_meet_threshold(rng):
    for _ in range(200):
        c = crandn(rng, 4, 4, scale=1e-2)
        lam = 10 ** rng.uniform(-8, -3)
        for cand in bf.algorithm1_precoders(c, crandn(rng, 2, 4), 1.0, lam, 4):
            assert np.all(bf.residual_row_powers(c, cand.v) <= lam)
            assert np.linalg.norm(cand.v) ** 2 <= 1.0 + 1e-9


def test_partial_row_constraint_picks_weakest_rows():
    c = np.array([[1.0, 1.0], [2.0, -2.0]])
    v = np.array([[1.0], [1.0]]) / np.sqrt(2)
    assert bf.constrained_rows(c, v, 1e-12) is None
    assert bf.constrained_rows(c, v, 1e-12, n_rows=1) == (1,)


@pytest.mark.parametrize("m_q,mode", [(1, "open_loop"), (2, "closed_loop"), (4, "closed_loop")])
def test_candidate_dl_rate_nonincreasing_in_index(rng, m_q, mode):
    for _ in range(1000):
        c = crandn(rng, 4, 4)
        h = crandn(rng, m_q, 4)
        cands = bf.algorithm1_precoders(c, h, 10.0, np.inf, 4, mode=mode)
        rates = [x.dl_rate for x in cands]
        assert all(b <= a + 1e-9 for a, b in zip(rates, rates[1:]))


# --------------------------------------------------------------- combiner


def test_combiner_without_si_is_matched_filter(rng):
    h = crandn(rng, 4, 1)
    u = bf.optimal_combiner(np.zeros((4, 4)), np.zeros((4, 1)), h, 1.0, 1).u
    assert sin_angle(u[0].conj(), h[:, 0]) < 1e-12


def test_combiner_is_leading_eigenvector_for_one_stream(rng):
    # Oracle: for d_m = 1 the optimal combiner spans the dominant eigenvector
    # of p_m B^-1 h h^H, computed with a general (non-Hermitian) eigensolver.
    for _ in range(1000):
        c, v, h = random_instance(rng, si_scale=rng.uniform(0.1, 10))
        s2, p_m = rng.uniform(0.1, 2), rng.uniform(0.1, 10)
        b = c @ v @ v.conj().T @ c.conj().T + s2 * np.eye(4)
        hv = h[:, :1]
        a = p_m * np.linalg.solve(b, hv @ hv.conj().T)
        w, vecs = scipy.linalg.eig(a)
        lead = vecs[:, np.argmax(np.abs(w))]
        u = bf.optimal_combiner(c, v, h, s2, 1).u
        assert sin_angle(u[0].conj(), lead) < 1e-8


def test_combiner_is_locally_optimal(rng):
    for _ in range(100):
        c, v, h = random_instance(rng, si_scale=rng.uniform(0.1, 10))
        d_m = int(rng.integers(1, 3))
        u = bf.optimal_combiner(c, v, h, 1.0, d_m).u
        best = bf.ul_rate(u, c, v, h, 1.0, 1.0)
        for _ in range(10):
            eps = 10 ** rng.uniform(-6, -1)
            up = u + eps * crandn(rng, *u.shape)
            up /= np.linalg.norm(up, axis=1, keepdims=True)
            assert bf.ul_rate(up, c, v, h, 1.0, 1.0) <= best + 1e-9


@settings(max_examples=300, deadline=None)
@given(st.integers(1, 5), st.integers(1, 5), st.integers(1, 5), st.integers(0, 2**32))
def test_combiner_rows_unit_norm(m_k, n_k, n_m, seed):
    rng = np.random.default_rng(seed)
    d_m = int(rng.integers(1, min(m_k, n_m) + 1))
    c = crandn(rng, m_k, n_k, scale=10 ** rng.uniform(-3, 2))
    v = crandn(rng, n_k, 1)
    h = crandn(rng, m_k, n_m)
    u = bf.optimal_combiner(c, v, h, 10 ** rng.uniform(-3, 0), d_m).u
    assert u.shape == (d_m, m_k)
    np.testing.assert_allclose(np.linalg.norm(u, axis=1), 1.0, atol=1e-10)


def test_combiner_rejects_rank_deficient_uplink():
    h = np.zeros((3, 2))
    h[0, 0] = 1.0
    with pytest.raises(ParameterError):
        bf.optimal_combiner(np.zeros((3, 3)), np.zeros((3, 1)), h, 1.0, 2)


def test_uplink_rate_nonincreasing_when_rows_removed(rng):
    # Fixed precoder: dropping RX chains can only shrink the optimal rate.
    for _ in range(200):
        c, v, h = random_instance(rng, n_m=1, si_scale=3.0)
        rates = []
        for rows in ([0, 1, 2, 3], [0, 1, 2], [0, 1], [0]):
            u = bf.optimal_combiner(c[rows], v, h[rows], 1.0, 1).u
            rates.append(bf.ul_rate(u, c[rows], v, h[rows], 1.0, 1.0))
        assert all(b <= a + 1e-9 for a, b in zip(rates, rates[1:]))
