import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gmcf import geometry, oracles


def random_jet(rng, m, n, scale=0.8):
    J = rng.normal(scale=scale, size=(m, n))
    H2 = rng.normal(size=(m, m, n))
    return J, 0.5 * (H2 + np.swapaxes(H2, 0, 1))


dims = st.tuples(st.integers(1, 3), st.integers(1, 3))
seeds = st.integers(0, 2**32 - 1)


def test_metric_examples():
    g, ginv, det = geometry.metric(np.zeros((2, 2)))
    np.testing.assert_array_equal(g, np.eye(2))
    assert det == 1.0
    g, _, _ = geometry.metric(np.diag([0.5, 2.0]))
    np.testing.assert_allclose(g, np.diag([1.25, 5.0]))


def test_singular_values_examples():
    np.testing.assert_allclose(geometry.singular_values(np.diag([2.0, 0.3])), [2.0, 0.3])
    assert np.all(geometry.singular_values(np.zeros((3, 2))) == 0)
    assert geometry.singular_values(np.zeros((3, 2))).shape == (3,)


@pytest.mark.parametrize("lam, mu, p", [
    (0.0, 0.0, 1.0),
    (1.0, 1.0, 0.0),
    (2.0, 0.25, 0.75 / 5.3125),
])
def test_area_p_examples(lam, mu, p):
    J = np.diag([lam, mu])
    got, q, sigma = geometry.area_p(J)
    assert got == pytest.approx(p, abs=1e-12)
    assert geometry.p_from_singular_values(lam, mu) == pytest.approx(p, abs=1e-12)
    if p > 0:
        assert q == pytest.approx(np.sqrt(p))
    else:
        assert np.isnan(q)
    np.testing.assert_allclose(sigma, [(1 - lam**2) / (1 + lam**2), (1 - mu**2) / (1 + mu**2)])


def test_p_approximate_value():
    assert geometry.p_from_singular_values(2.0, 0.25) == pytest.approx(0.141176, abs=1e-6)


def test_linear_jet_has_no_curvature():
    J = np.array([[0.3, -0.2], [0.1, 0.7]])
    s = geometry.sample(J, np.zeros((2, 2, 2)))
    for v in (s.normA2, s.normH2, s.normRperp2, s.normAdotA2, s.lili_gap):
        assert v == 0.0


def test_parabola_curvature():
    # u = x^2/2 at the origin: unit curvature
    P, A, H = geometry.second_fundamental(np.zeros((1, 1)), np.ones((1, 1, 1)))
    assert np.linalg.norm(H) == pytest.approx(1.0, abs=1e-14)


def test_codimension_one_embedded_has_flat_normal_bundle():
    rng = np.random.default_rng(7)
    J, H2 = random_jet(rng, 3, 2)
    J[:, 1] = 0.0
    H2[..., 1] = 0.0
    assert abs(geometry.sample(J, H2).normRperp2) < 1e-12


@settings(max_examples=60, deadline=None)
@given(dims=dims, seed=seeds)
def test_kernel_matches_frame_oracle(dims, seed):
    m, n = dims
    J, H2 = random_jet(np.random.default_rng(seed), m, n)
    s = geometry.sample(J, H2)
    o = oracles.frame_geometry(J, H2)
    for name, got in [("g", s.g), ("ginv", s.ginv), ("lam", s.lam), ("A", s.A), ("H", s.Hvec),
                      ("normA2", s.normA2), ("normH2", s.normH2), ("normAdotA2", s.normAdotA2),
                      ("normRperp2", s.normRperp2)]:
        want = o[name]
        assert np.max(np.abs(got - want)) <= 1e-10 * max(1.0, np.max(np.abs(want))), name
    assert s.lili_gap >= -1e-10 * max(1.0, s.normA2**2)


@settings(max_examples=60, deadline=None)
@given(dims=dims, seed=seeds)
def test_pointwise_identities(dims, seed):
    m, n = dims
    J, H2 = random_jet(np.random.default_rng(seed), m, n)
    s = geometry.sample(J, H2)
    P = s.Pperp
    T = geometry.tangent_matrix(J)
    np.testing.assert_allclose(P @ P, P, atol=1e-10)
    np.testing.assert_allclose(P @ T, 0.0, atol=1e-10)
    assert np.trace(P) == pytest.approx(n, abs=1e-10)
    np.testing.assert_allclose(np.einsum("pq,ijq->ijp", P, s.A), s.A, atol=1e-10)
    np.testing.assert_allclose(np.einsum("pk,ijp->ijk", T, s.A), 0.0, atol=1e-10)
    assert np.all(np.linalg.eigvalsh(s.g) >= 1 - 1e-12)
    np.testing.assert_allclose(s.ginv @ s.g, np.eye(m), atol=1e-12)
    assert s.detg >= 1 - 1e-12
    assert s.grad_f2 + s.p == pytest.approx(1.0, abs=1e-10)
    assert s.p <= 1 + 1e-12
    assert np.all(s.sigma > -1) and np.all(s.sigma <= 1)
    assert s.normH2 <= m * s.normA2 + 1e-10 * max(1.0, s.normA2)
    if n == 2 and m >= 2:
        assert s.p == pytest.approx(geometry.p_from_singular_values(s.lam[0], s.lam[1]), abs=1e-10)
        # two-positivity of S and positivity of p agree
        assert (s.sigma[0] + s.sigma[1] > 0) == (s.p > 0)


@settings(max_examples=60, deadline=None)
@given(dims=dims, seed=seeds)
def test_graph_rate_identity(dims, seed):
    # tr_g D^2 f = H_last - J^T H_first and H_first = -J H_last
    m, n = dims
    J, H2 = random_jet(np.random.default_rng(seed), m, n)
    _, _, H = geometry.second_fundamental(J, H2)
    rate = geometry.graph_rate(J, H2)
    np.testing.assert_allclose(H[:m], -J @ H[m:], atol=1e-10)
    np.testing.assert_allclose(rate, H[m:] - J.T @ H[:m], atol=1e-10)


@settings(max_examples=60, deadline=None)
@given(m=st.integers(1, 3), seed=seeds)
def test_svd_frame_components(m, seed):
    rng = np.random.default_rng(seed)
    J = rng.normal(scale=rng.uniform(0.1, 3.0), size=(m, 2))
    fr = geometry.svd_frames(J)
    assert fr.S11**2 + fr.T11**2 == pytest.approx(1.0, abs=1e-12)
    assert fr.S22**2 + fr.T22**2 == pytest.approx(1.0, abs=1e-12)
    assert fr.S11 == pytest.approx((1 - fr.lam**2) / (1 + fr.lam**2), abs=1e-12)
    assert fr.T11 == pytest.approx(-2 * fr.lam / (1 + fr.lam**2), abs=1e-12)
    T = geometry.tangent_matrix(J)
    for v in (fr.xi, fr.eta):
        assert np.linalg.norm(v) == pytest.approx(1.0, abs=1e-12)
        np.testing.assert_allclose(T.T @ v, 0.0, atol=1e-12)
    assert abs(fr.xi @ fr.eta) < 1e-12


@pytest.mark.parametrize("lam, S11, T11", [(0.0, 1.0, 0.0), (1.0, 0.0, -1.0)])
def test_svd_frame_examples(lam, S11, T11):
    fr = geometry.svd_frames(np.diag([lam, 0.5 * lam]))
    assert fr.S11 == pytest.approx(S11, abs=1e-14)
    assert fr.T11 == pytest.approx(T11, abs=1e-14)


def test_svd_frames_degenerate_is_deterministic():
    J = 0.7 * np.eye(2)
    a, b = geometry.svd_frames(J), geometry.svd_frames(J.copy())
    np.testing.assert_array_equal(a.xi, b.xi)
    np.testing.assert_array_equal(a.eta[2:], [0.0, 1.0 / np.sqrt(1.49)])


def _rotation(rng, k):
    q, r = np.linalg.qr(rng.normal(size=(k, k)))
    return q * np.sign(np.diag(r))


@settings(max_examples=40, deadline=None)
@given(dims=dims, seed=seeds)
def test_orthogonal_invariance(dims, seed):
    m, n = dims
    rng = np.random.default_rng(seed)
    J, H2 = random_jet(rng, m, n)
    Q1, Q2 = _rotation(rng, m), _rotation(rng, n)
    J2 = Q1.T @ J @ Q2
    H22 = np.einsum("ai,bj,abk,kc->ijc", Q1, Q1, H2, Q2)
    s, t = geometry.sample(J, H2), geometry.sample(J2, H22)
    for a, b in [(s.lam, t.lam), (s.p, t.p), (s.normA2, t.normA2), (s.normH2, t.normH2),
                 (s.normRperp2, t.normRperp2), (s.lili_gap, t.lili_gap)]:
        np.testing.assert_allclose(a, b, atol=1e-10 * max(1.0, float(np.max(np.abs(a)))))


def test_vectorised_over_nodes():
    rng = np.random.default_rng(0)
    J = rng.normal(size=(4, 5, 2, 2))
    H2 = rng.normal(size=(4, 5, 2, 2, 2))
    H2 = 0.5 * (H2 + np.swapaxes(H2, -2, -3))
    s = geometry.sample(J, H2)
    one = geometry.sample(J[2, 3], H2[2, 3])
    assert s.p.shape == (4, 5)
    assert s.normRperp2[2, 3] == pytest.approx(one.normRperp2, rel=1e-12, abs=1e-14)
