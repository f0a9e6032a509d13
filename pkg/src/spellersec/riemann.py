"""Spatial filtering, SPD geometry, and the tangent-space classifier.

All matrix functions go through eigendecompositions of symmetric matrices,
so results are exactly symmetric up to roundoff and gradients have a clean
closed form (see ``logm_adjoint``).
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.special import expit

from .errors import ConvergenceError, DegenerateInputError, ParameterError

# relative diagonal loading applied to empirical covariances
DEFAULT_LOADING = 1e-10


def _sym(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.swapaxes(-1, -2))


def check_spd(m: np.ndarray, tol: float = 1e-10) -> bool:
    """True when ``m`` is symmetric within ``tol`` and has positive spectrum."""
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        return False
    scale = max(1.0, float(np.abs(m).max()))
    if np.abs(m - m.T).max() > tol * scale:
        return False
    w = np.linalg.eigvalsh(_sym(m))
    return bool(w.min() > 0.0)


def _eigh(m: np.ndarray):
    return np.linalg.eigh(_sym(np.asarray(m, dtype=np.float64)))


def _eigh_positive(m: np.ndarray, what: str):
    w, v = _eigh(m)
    if w.min() <= 0.0:
        raise ParameterError(f"{what} needs a positive definite matrix (min eigenvalue {w.min():.3e})")
    return w, v


def sqrtm_spd(m: np.ndarray) -> np.ndarray:
    w, v = _eigh_positive(m, "matrix square root")
    return _sym((v * np.sqrt(w)) @ v.T)


def invsqrtm_spd(m: np.ndarray) -> np.ndarray:
    w, v = _eigh_positive(m, "inverse square root")
    return _sym((v * (1.0 / np.sqrt(w))) @ v.T)


def logm_spd(m: np.ndarray) -> np.ndarray:
    w, v = _eigh_positive(m, "matrix logarithm")
    return _sym((v * np.log(w)) @ v.T)


def expm_sym(m: np.ndarray) -> np.ndarray:
    w, v = _eigh(m)
    return _sym((v * np.exp(w)) @ v.T)


def _batch_logm(mats: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(_sym(mats))
    return _sym(np.einsum("...ij,...j,...kj->...ik", v, np.log(w), v))


def airm_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Affine-invariant distance between two SPD matrices."""
    w = scipy.linalg.eigh(np.asarray(b, dtype=np.float64), np.asarray(a, dtype=np.float64), eigvals_only=True)
    return float(np.sqrt(np.sum(np.log(w) ** 2)))


def spd_geometric_mean(mats, tol: float = 1e-8, max_iter: int = 200) -> np.ndarray:
    """Geometric (Karcher) mean of SPD matrices by fixed-point iteration.

    Starts from the arithmetic mean and iterates
    C <- C^1/2 exp(mean_i log(C^-1/2 C_i C^-1/2)) C^1/2
    until the Frobenius norm of the mean log drops to ``tol``. The returned
    matrix satisfies that residual bound.

    Raises
    ------
    ConvergenceError
        If the residual does not reach ``tol`` within ``max_iter`` steps.
    """
    mats = np.asarray(mats, dtype=np.float64)
    if mats.ndim != 3 or mats.shape[1] != mats.shape[2]:
        raise ParameterError(f"expected a stack of square matrices, got {mats.shape}")
    if mats.shape[0] == 0:
        raise ParameterError("cannot average an empty set of matrices")
    c = _sym(mats.mean(axis=0))
    for _ in range(max_iter + 1):
        w, v = _eigh(c)
        if w.min() <= 0:
            raise DegenerateInputError("iterate lost positive definiteness")
        s = (v * np.sqrt(w)) @ v.T
        sinv = (v * (1.0 / np.sqrt(w))) @ v.T
        inner = _sym(np.einsum("ij,njk,kl->nil", sinv, mats, sinv))
        j = _batch_logm(inner).mean(axis=0)
        crit = float(np.linalg.norm(j, "fro"))
        if crit <= tol:
            return c
        c = _sym(s @ expm_sym(j) @ s)
    raise ConvergenceError(f"geometric mean residual {crit:.3e} above tol {tol:.1e} after {max_iter} iterations")


def logm_adjoint(m: np.ndarray, upstream: np.ndarray, gap_rtol: float = 1e-12, jitter: float = 1e-10) -> np.ndarray:
    """Adjoint of the matrix logarithm at SPD ``m`` applied to ``upstream``.

    For M = Q diag(l) Q^T the differential of log is
    dL = Q (K o (Q^T dM Q)) Q^T with K_ij the divided difference of log
    between l_i and l_j; the map is self-adjoint, so the pullback of a
    symmetric ``upstream`` uses the same expression.

    Near-equal eigenvalue pairs use the analytic limit 2/(l_i+l_j). A truly
    repeated spectrum is retried once after adding a graded diagonal jitter
    of ``jitter``*trace, keeping the computation deterministic.
    """
    m = _sym(np.asarray(m, dtype=np.float64))
    d = m.shape[0]
    w, q = np.linalg.eigh(m)
    scale = max(float(w[-1]), np.finfo(np.float64).tiny)
    if d > 1 and np.min(np.diff(w)) < gap_rtol * scale:
        m = m + (jitter * np.trace(m)) * np.diag(np.linspace(0.0, 1.0, d))
        w, q = np.linalg.eigh(m)
    if w.min() <= 0:
        raise ParameterError("matrix logarithm adjoint needs a positive definite matrix")
    li = w[:, None]
    lj = w[None, :]
    diff = li - lj
    near = np.abs(diff) < gap_rtol * scale
    k = np.where(near, 2.0 / (li + lj), np.log(np.where(near, 1.0, li / lj)) / np.where(near, 1.0, diff))
    inner = q.T @ _sym(upstream) @ q
    return _sym(q @ (k * inner) @ q.T)


# ---------------------------------------------------------------------------
# spatial filters


@dataclass(frozen=True)
class XdawnFilters:
    """Fitted enhancement filters and filtered class prototypes.

    ``u`` stacks the per-class filter rows (class 0 block first), so applying
    it to an epoch yields 2*n_filters virtual channels. ``z`` holds each
    class's filters applied to that class's mean epoch and is the fixed top
    block of every augmented covariance.
    """

    u: np.ndarray  # [2*n_filters x n_channels]
    z: np.ndarray  # [2*n_filters x n_samples]
    n_filters: int
    eigenvalues: tuple  # per-class generalized eigenvalues, descending

    @property
    def augmented_dim(self) -> int:
        return 2 * self.u.shape[0]


def xdawn_fit(epochs: np.ndarray, labels: np.ndarray, n_filters: int = 4,
              loading: float = 1e-12) -> XdawnFilters:
    """Fit per-class signal-to-noise maximizing spatial filters.

    ``epochs`` must be mean-centered per channel, shape
    [n_epochs x n_channels x n_samples], with binary ``labels``. For each
    class the generalized eigenproblem
    (Xbar_c Xbar_c^T) v = lambda (sum_i X_i X_i^T) v
    is solved and the top ``n_filters`` eigenvectors kept, ordered by
    non-increasing eigenvalue, each scaled so its largest-magnitude entry is
    positive.
    """
    epochs = np.asarray(epochs, dtype=np.float64)
    labels = np.asarray(labels)
    if epochs.ndim != 3:
        raise ParameterError(f"epochs must be [n x channels x samples], got {epochs.shape}")
    n_ch = epochs.shape[1]
    if not (1 <= n_filters <= n_ch):
        raise ParameterError(f"n_filters must be in [1, {n_ch}], got {n_filters}")
    b = np.einsum("nct,nkt->ck", epochs, epochs)
    b = _sym(b) + (loading * np.trace(b) / n_ch) * np.eye(n_ch)
    u_blocks, z_blocks, eig_blocks = [], [], []
    for cls in (0, 1):
        members = epochs[labels == cls]
        if members.shape[0] == 0:
            raise DegenerateInputError(f"no epochs with label {cls}")
        xbar = members.mean(axis=0)
        a = _sym(xbar @ xbar.T)
        try:
            w, v = scipy.linalg.eigh(a, b)
        except scipy.linalg.LinAlgError as exc:
            raise DegenerateInputError(f"filter eigenproblem failed for class {cls}: {exc}") from exc
        order = np.argsort(w)[::-1][:n_filters]
        vecs = v[:, order].T
        signs = np.sign(vecs[np.arange(n_filters), np.argmax(np.abs(vecs), axis=1)])
        vecs = vecs * signs[:, None]
        u_blocks.append(vecs)
        z_blocks.append(vecs @ xbar)
        eig_blocks.append(w[order].copy())
    return XdawnFilters(
        u=np.vstack(u_blocks),
        z=np.vstack(z_blocks),
        n_filters=int(n_filters),
        eigenvalues=(eig_blocks[0], eig_blocks[1]),
    )


def augmented_covariance(epoch: np.ndarray, filters: XdawnFilters,
                         loading: float = DEFAULT_LOADING) -> np.ndarray:
    """Covariance of the class prototypes stacked over the filtered epoch."""
    return augmented_covariances(epoch[None], filters, loading)[0]


def augmented_covariances(epochs: np.ndarray, filters: XdawnFilters,
                          loading: float = DEFAULT_LOADING) -> np.ndarray:
    """Batched ``augmented_covariance`` over [n x channels x samples]."""
    epochs = np.asarray(epochs, dtype=np.float64)
    filt = np.einsum("fc,nct->nft", filters.u, epochs)
    n = epochs.shape[0]
    z = np.broadcast_to(filters.z, (n,) + filters.z.shape)
    a = np.concatenate([z, filt], axis=1)
    c = a @ a.transpose(0, 2, 1)
    d = c.shape[1]
    tr = np.trace(c, axis1=1, axis2=2)
    return _sym(c + (loading * tr / d)[:, None, None] * np.eye(d)[None])


# ---------------------------------------------------------------------------
# tangent space


def _triu_weights(d: int):
    iu = np.triu_indices(d)
    w = np.where(iu[0] == iu[1], 1.0, np.sqrt(2.0))
    return iu, w


def tangent_project(c: np.ndarray, c_ref: np.ndarray) -> np.ndarray:
    """Project an SPD matrix to the tangent space at ``c_ref``.

    Returns the weighted upper triangle of log(C_ref^-1/2 C C_ref^-1/2),
    off-diagonal entries scaled by sqrt(2) so the Euclidean norm of the
    vector equals the Frobenius norm of the log. Length d(d+1)/2.
    """
    c = np.asarray(c, dtype=np.float64)
    if not check_spd(c):
        raise ParameterError("tangent projection input must be symmetric positive definite")
    if not check_spd(c_ref):
        raise ParameterError("tangent reference must be symmetric positive definite")
    return tangent_project_batch(c[None], c_ref)[0]


def tangent_project_batch(cs: np.ndarray, c_ref: np.ndarray) -> np.ndarray:
    """Batched tangent projection, no per-matrix validation."""
    wref = invsqrtm_spd(c_ref)
    inner = _sym(np.einsum("ij,njk,kl->nil", wref, np.asarray(cs, dtype=np.float64), wref))
    logs = _batch_logm(inner)
    d = logs.shape[-1]
    iu, w = _triu_weights(d)
    return logs[:, iu[0], iu[1]] * w


def tangent_to_spd(vec: np.ndarray, c_ref: np.ndarray) -> np.ndarray:
    """Inverse of ``tangent_project``: rebuild the SPD matrix from features."""
    vec = np.asarray(vec, dtype=np.float64)
    d = int((np.sqrt(8 * vec.size + 1) - 1) / 2)
    if d * (d + 1) != 2 * vec.size:
        raise ParameterError(f"feature length {vec.size} is not triangular")
    iu, w = _triu_weights(d)
    log_m = np.zeros((d, d))
    log_m[iu[0], iu[1]] = vec / w
    log_m = log_m + log_m.T - np.diag(np.diag(log_m))
    s = sqrtm_spd(np.asarray(c_ref, dtype=np.float64))
    return _sym(s @ expm_sym(log_m) @ s)


# ---------------------------------------------------------------------------
# classifier


@dataclass(frozen=True)
class LogisticModel:
    """Weighted l2-regularized logistic regression parameters."""

    weights: np.ndarray
    bias: float
    class_weights: tuple
    l2: float


def logreg_fit(features: np.ndarray, labels: np.ndarray, l2: float = 1.0,
               class_weights=None, tol: float = 1e-6, max_iter: int = 100) -> LogisticModel:
    """Fit by Newton iterations on the weighted cross-entropy.

    ``class_weights`` defaults to inverse class frequency (n/(2*n_c)). The
    intercept is not penalized. Converges when the full gradient norm drops
    to ``tol``; raises ConvergenceError past ``max_iter``.
    """
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    if x.ndim != 2 or y.shape != (x.shape[0],):
        raise ParameterError(f"bad shapes: features {x.shape}, labels {y.shape}")
    if not np.all((y == 0) | (y == 1)):
        raise ParameterError("labels must be binary")
    n, d = x.shape
    n1 = y.sum()
    if n1 == 0 or n1 == n:
        raise DegenerateInputError("both classes must be present")
    if class_weights is None:
        class_weights = (n / (2.0 * (n - n1)), n / (2.0 * n1))
    omega = np.where(y == 1, class_weights[1], class_weights[0])

    def nll(w, b):
        z = x @ w + b
        return float(np.sum(omega * (np.logaddexp(0.0, z) - y * z)) + 0.5 * l2 * w @ w)

    w = np.zeros(d)
    b = 0.0
    loss = nll(w, b)
    for _ in range(max_iter):
        z = x @ w + b
        p = expit(z)
        r = omega * (p - y)
        grad_w = x.T @ r + l2 * w
        grad_b = float(r.sum())
        gnorm = float(np.sqrt(grad_w @ grad_w + grad_b * grad_b))
        if gnorm <= tol:
            return LogisticModel(w, float(b), tuple(float(c) for c in class_weights), float(l2))
        s = omega * p * (1.0 - p)
        xs = x * s[:, None]
        h = np.empty((d + 1, d + 1))
        h[:d, :d] = x.T @ xs + l2 * np.eye(d)
        h[:d, d] = xs.sum(axis=0)
        h[d, :d] = h[:d, d]
        h[d, d] = s.sum()
        g = np.concatenate([grad_w, [grad_b]])
        try:
            step = np.linalg.solve(h, g)
        except np.linalg.LinAlgError:
            step = np.linalg.solve(h + 1e-10 * np.eye(d + 1), g)
        t = 1.0
        for _ in range(40):
            w_new = w - t * step[:d]
            b_new = b - t * step[d]
            loss_new = nll(w_new, b_new)
            if loss_new <= loss + 1e-12 * abs(loss):
                break
            t *= 0.5
        w, b, loss = w_new, b_new, loss_new
    raise ConvergenceError(f"logistic solver gradient norm {gnorm:.3e} above {tol:.1e} after {max_iter} iterations")


def logreg_probs(model: LogisticModel, features: np.ndarray) -> np.ndarray:
    """Positive-class probabilities for one feature vector or a batch."""
    features = np.asarray(features, dtype=np.float64)
    return expit(features @ model.weights + model.bias)
