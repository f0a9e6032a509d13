import numpy as np
import pytest

from spellersec import riemann
from spellersec.errors import DegenerateInputError, ParameterError


def random_spd(rng, d, cond=10.0):
    q, _ = np.linalg.qr(rng.standard_normal((d, d)))
    eig = np.exp(rng.uniform(0.0, np.log(cond), d))
    return (q * eig) @ q.T


class TestMatrixFunctions:
    def test_sqrt_squares_back(self):
        rng = np.random.default_rng(0)
        c = random_spd(rng, 6)
        s = riemann.sqrtm_spd(c)
        np.testing.assert_allclose(s @ s, c, atol=1e-10)

    def test_invsqrt_inverts(self):
        rng = np.random.default_rng(1)
        c = random_spd(rng, 5)
        w = riemann.invsqrtm_spd(c)
        np.testing.assert_allclose(w @ c @ w, np.eye(5), atol=1e-10)

    def test_log_exp_round_trip(self):
        rng = np.random.default_rng(2)
        c = random_spd(rng, 4)
        np.testing.assert_allclose(riemann.expm_sym(riemann.logm_spd(c)), c, atol=1e-10)

    def test_non_spd_rejected(self):
        with pytest.raises(ParameterError):
            riemann.sqrtm_spd(np.diag([1.0, -1.0]))


class TestDistance:
    def test_identity_of_indiscernibles(self):
        c = random_spd(np.random.default_rng(3), 4)
        assert riemann.airm_distance(c, c) <= 1e-8

    def test_symmetry(self):
        rng = np.random.default_rng(4)
        a, b = random_spd(rng, 4), random_spd(rng, 4)
        assert abs(riemann.airm_distance(a, b) - riemann.airm_distance(b, a)) <= 1e-10

    def test_congruence_invariance(self):
        # d(W A W', W B W') = d(A, B) for any invertible W
        rng = np.random.default_rng(5)
        a, b = random_spd(rng, 5), random_spd(rng, 5)
        w = rng.standard_normal((5, 5)) + 0.5 * np.eye(5)
        d0 = riemann.airm_distance(a, b)
        d1 = riemann.airm_distance(w @ a @ w.T, w @ b @ w.T)
        assert abs(d0 - d1) <= 1e-8 * max(1.0, d0)

    def test_inversion_invariance(self):
        rng = np.random.default_rng(6)
        a, b = random_spd(rng, 4), random_spd(rng, 4)
        d0 = riemann.airm_distance(a, b)
        d1 = riemann.airm_distance(np.linalg.inv(a), np.linalg.inv(b))
        assert abs(d0 - d1) <= 1e-8 * max(1.0, d0)


class TestGeometricMean:
    def test_single_matrix_is_its_own_mean(self):
        c = random_spd(np.random.default_rng(7), 4)
        np.testing.assert_allclose(riemann.spd_geometric_mean([c]), c, atol=1e-8)

    def test_commuting_pair_closed_form(self):
        # commuting matrices average eigenvalue-wise geometrically
        m = riemann.spd_geometric_mean([np.diag([4.0, 9.0]), np.eye(2)])
        np.testing.assert_allclose(m, np.diag([2.0, 3.0]), atol=1e-10)

    def test_fixed_point_residual(self):
        rng = np.random.default_rng(8)
        mats = [random_spd(rng, 5) for _ in range(7)]
        mean = riemann.spd_geometric_mean(mats, tol=1e-10)
        w = riemann.invsqrtm_spd(mean)
        resid = sum(riemann.logm_spd(w @ c @ w) for c in mats) / len(mats)
        assert np.linalg.norm(resid) <= 1e-8

    def test_permutation_invariant(self):
        rng = np.random.default_rng(9)
        mats = [random_spd(rng, 4) for _ in range(5)]
        m1 = riemann.spd_geometric_mean(mats)
        m2 = riemann.spd_geometric_mean(mats[::-1])
        np.testing.assert_allclose(m1, m2, atol=1e-8)


def test_logm_adjoint_matches_finite_differences():
    """<logm_adjoint(C, U), dC> must equal d/dt tr(U' logm(C + t dC))."""
    rng = np.random.default_rng(10)
    c = random_spd(rng, 4)
    upstream = rng.standard_normal((4, 4))
    upstream = 0.5 * (upstream + upstream.T)
    adj = riemann.logm_adjoint(c, upstream)
    h = 1e-6
    for _ in range(5):
        d = rng.standard_normal((4, 4))
        d = 0.5 * (d + d.T)
        fp = np.sum(upstream * riemann.logm_spd(c + h * d))
        fm = np.sum(upstream * riemann.logm_spd(c - h * d))
        fd = (fp - fm) / (2 * h)
        an = np.sum(adj * d)
        assert abs(fd - an) <= 1e-5 * max(1.0, abs(fd))


def test_logm_adjoint_repeated_spectrum():
    # scalar matrices exercise the degenerate-eigenvalue limit
    c = 3.0 * np.eye(4)
    upstream = np.eye(4)
    adj = riemann.logm_adjoint(c, upstream)
    np.testing.assert_allclose(adj, np.eye(4) / 3.0, atol=1e-8)


class TestTangentSpace:
    def test_reference_maps_to_zero(self):
        c = random_spd(np.random.default_rng(11), 5)
        vec = riemann.tangent_project(c, c)
        assert np.abs(vec).max() <= 1e-10

    def test_round_trip(self):
        rng = np.random.default_rng(12)
        c_ref = random_spd(rng, 4)
        c = random_spd(rng, 4)
        vec = riemann.tangent_project(c, c_ref)
        back = riemann.tangent_to_spd(vec, c_ref)
        np.testing.assert_allclose(back, c, atol=1e-8)

    def test_norm_equals_distance(self):
        # the sqrt(2) off-diagonal weighting makes the tangent norm match AIRM
        rng = np.random.default_rng(13)
        c_ref = random_spd(rng, 5)
        c = random_spd(rng, 5)
        vec = riemann.tangent_project(c, c_ref)
        assert abs(np.linalg.norm(vec) - riemann.airm_distance(c, c_ref)) <= 1e-8

    def test_batch_matches_loop(self):
        rng = np.random.default_rng(14)
        c_ref = random_spd(rng, 4)
        cs = np.stack([random_spd(rng, 4) for _ in range(6)])
        batch = riemann.tangent_project_batch(cs, c_ref)
        for i in range(6):
            np.testing.assert_allclose(batch[i], riemann.tangent_project(cs[i], c_ref),
                                       atol=1e-10)


def _toy_erp_epochs(rng, n_epochs=60, n_channels=8, n_samples=72):
    pattern = rng.standard_normal(n_channels)
    pattern /= np.linalg.norm(pattern)
    bump = np.exp(-0.5 * ((np.arange(n_samples) - 36) / 6.0) ** 2)
    labels = (rng.uniform(size=n_epochs) < 0.4).astype(np.int64)
    epochs = 0.5 * rng.standard_normal((n_epochs, n_channels, n_samples))
    epochs[labels == 1] += pattern[None, :, None] * bump[None, None, :]
    return epochs, labels


class TestXdawn:
    def test_shapes_and_order(self):
        rng = np.random.default_rng(15)
        epochs, labels = _toy_erp_epochs(rng)
        f = riemann.xdawn_fit(epochs, labels, n_filters=3)
        # class blocks stacked: [2*n_filters x channels]
        assert f.u.shape == (6, 8)
        assert f.z.shape == (6, 72)
        assert f.augmented_dim == 12
        for cls in range(2):
            ev = f.eigenvalues[cls]
            assert np.all(np.diff(ev) <= 1e-12)

    def test_filters_prefer_evoked_subspace(self):
        rng = np.random.default_rng(16)
        epochs, labels = _toy_erp_epochs(rng)
        epochs -= epochs.mean(axis=-1, keepdims=True)
        f = riemann.xdawn_fit(epochs, labels, n_filters=2)
        u1 = f.u[f.n_filters :]  # class-1 block
        target_mean = epochs[labels == 1].mean(axis=0)
        noise = epochs[labels == 0].mean(axis=0)
        # filtered target mean should carry far more energy than filtered noise
        et = np.sum((u1 @ target_mean) ** 2)
        en = np.sum((u1 @ noise) ** 2)
        assert et > 5.0 * en

    def test_single_class_rejected(self):
        rng = np.random.default_rng(17)
        epochs, _ = _toy_erp_epochs(rng)
        with pytest.raises(DegenerateInputError):
            riemann.xdawn_fit(epochs, np.zeros(len(epochs), dtype=np.int64), 2)


class TestAugmentedCovariance:
    def test_spd_and_dimension(self):
        rng = np.random.default_rng(18)
        epochs, labels = _toy_erp_epochs(rng)
        f = riemann.xdawn_fit(epochs, labels, n_filters=4)
        c = riemann.augmented_covariance(epochs[0], f)
        assert c.shape == (16, 16)
        assert riemann.check_spd(c)

    def test_batch_matches_single(self):
        rng = np.random.default_rng(19)
        epochs, labels = _toy_erp_epochs(rng)
        f = riemann.xdawn_fit(epochs, labels, n_filters=2)
        batch = riemann.augmented_covariances(epochs[:5], f)
        for i in range(5):
            np.testing.assert_allclose(batch[i], riemann.augmented_covariance(epochs[i], f),
                                       atol=1e-12)


class TestLogreg:
    def test_separable_data(self):
        rng = np.random.default_rng(20)
        x = np.vstack([rng.standard_normal((40, 3)) + 2.5,
                       rng.standard_normal((40, 3)) - 2.5])
        y = np.r_[np.ones(40, dtype=np.int64), np.zeros(40, dtype=np.int64)]
        model = riemann.logreg_fit(x, y, l2=1.0)
        p = riemann.logreg_probs(model, x)
        assert np.mean((p > 0.5) == (y == 1)) >= 0.95

    def test_class_weights_shift_boundary(self):
        # same features, heavier weight on the rare class raises its probs
        rng = np.random.default_rng(21)
        x = np.vstack([rng.standard_normal((10, 2)) + 0.35,
                       rng.standard_normal((90, 2)) - 0.35])
        y = np.r_[np.ones(10, dtype=np.int64), np.zeros(90, dtype=np.int64)]
        weighted = riemann.logreg_fit(x, y)          # inverse-frequency default
        flat = riemann.logreg_fit(x, y, class_weights=(1.0, 1.0))
        pw = riemann.logreg_probs(weighted, x[:10])
        pf = riemann.logreg_probs(flat, x[:10])
        assert pw.mean() > pf.mean()

    def test_bias_not_penalized(self):
        # pure offset data: strong l2 must not pull the intercept to zero
        x = np.zeros((50, 2))
        y = np.ones(50, dtype=np.int64)
        y[:10] = 0
        model = riemann.logreg_fit(x, y, l2=1e6, class_weights=(1.0, 1.0))
        assert abs(model.bias) > 0.5
        assert np.abs(model.weights).max() < 1e-3
