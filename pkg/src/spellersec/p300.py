"""Row/column matrix speller: trials, the two victim variants, gradients.

The main victim filters epochs spatially, builds prototype-augmented
covariances, maps them to the tangent space at their geometric mean and
classifies with weighted logistic regression. The lighter variant feeds the
flattened filtered epoch straight to the classifier. ``input_grad`` pulls
the training loss back through the whole chain onto the raw epoch samples,
which is what perturbation crafting consumes.
"""

from dataclasses import dataclass, field

import numpy as np

from . import dsp, riemann
from .errors import DegenerateInputError, ParameterError

# 6 x 6 on-screen matrix; codes 1..6 flash rows top to bottom,
# codes 7..12 flash columns left to right
P300_GRID = ("ABCDEF", "GHIJKL", "MNOPQR", "STUVWX", "YZ1234", "56789_")

N_CODES = 12
ROW_CODES = range(1, 7)
COL_CODES = range(7, 13)


def char_from_codes(row_code: int, col_code: int, grid=P300_GRID) -> str:
    if row_code not in ROW_CODES or col_code not in COL_CODES:
        raise ParameterError(f"need row code 1..6 and column code 7..12, got {row_code}, {col_code}")
    return grid[row_code - 1][col_code - 7]


def codes_for_char(character: str, grid=P300_GRID):
    """Row and column flash codes lighting up ``character``."""
    for r, row in enumerate(grid):
        c = row.find(character)
        if c >= 0:
            return r + 1, c + 7
    raise ParameterError(f"character {character!r} not in grid")


def grid_characters(grid=P300_GRID):
    return tuple(ch for row in grid for ch in row)


def epoch_samples(fs: float, epoch_ms: float = 600.0) -> int:
    return int(round(epoch_ms / 1000.0 * fs))


@dataclass(frozen=True)
class P300Trial:
    """One spelled character: recording plus the intensification schedule.

    ``labels`` holds 1 for intensifications containing the attended
    character, 0 otherwise, -1 when unknown. A schedule of R repeats has
    exactly 12 R entries with every code appearing R times.
    """

    sig: dsp.Signal
    onsets: np.ndarray
    codes: np.ndarray
    labels: np.ndarray
    user_char: str | None = None
    grid: tuple = P300_GRID

    def __post_init__(self):
        onsets = np.asarray(self.onsets, dtype=np.int64)
        codes = np.asarray(self.codes, dtype=np.int64)
        labels = np.asarray(self.labels, dtype=np.int64)
        n = onsets.size
        if codes.shape != (n,) or labels.shape != (n,):
            raise ParameterError("onsets, codes and labels must have equal length")
        if n == 0 or n % N_CODES != 0:
            raise ParameterError(f"schedule length {n} is not a positive multiple of {N_CODES}")
        if np.any(np.diff(onsets) <= 0):
            raise ParameterError("onsets must be strictly increasing")
        if onsets[0] < 0 or onsets[-1] >= self.sig.n_samples:
            raise ParameterError("onsets outside the recording")
        if codes.min() < 1 or codes.max() > N_CODES:
            raise ParameterError("codes must lie in 1..12")
        counts = np.bincount(codes, minlength=N_CODES + 1)[1:]
        if np.any(counts != n // N_CODES):
            raise ParameterError("every code must appear once per repeat block")
        if not np.all(np.isin(labels, (-1, 0, 1))):
            raise ParameterError("labels must be -1, 0 or 1")
        object.__setattr__(self, "onsets", onsets)
        object.__setattr__(self, "codes", codes)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "grid", tuple(self.grid))

    @property
    def repeats(self) -> int:
        return self.onsets.size // N_CODES


def collect_epochs(trials, epoch_ms: float = 600.0):
    """Stack labeled epochs from trials into [n x channels x samples].

    Raises when any schedule entry lacks a label; training needs ground
    truth for every intensification.
    """
    epochs, labels = [], []
    length = None
    for trial in trials:
        if np.any(trial.labels < 0):
            raise ParameterError("cannot train on a trial with unlabeled intensifications")
        n = epoch_samples(trial.sig.fs, epoch_ms)
        if length is None:
            length = n
        elif n != length:
            raise ParameterError("trials disagree on epoch length")
        for onset, lab in zip(trial.onsets, trial.labels):
            epochs.append(dsp.extract_epoch(trial.sig, int(onset), n))
            labels.append(int(lab))
    return np.asarray(epochs), np.asarray(labels, dtype=np.int64)


@dataclass(frozen=True)
class P300TrainConfig:
    n_filters: int = 4
    epoch_ms: float = 600.0
    variant: str = "riemann"  # or "xdawn_lr"
    l2: float = 1.0
    class_weights: tuple | None = None
    cov_loading: float = riemann.DEFAULT_LOADING
    geomean_tol: float = 1e-8
    geomean_max_iter: int = 200
    logreg_tol: float = 1e-6
    logreg_max_iter: int = 100

    def __post_init__(self):
        if self.variant not in ("riemann", "xdawn_lr"):
            raise ParameterError(f"unknown variant {self.variant!r}")


@dataclass(frozen=True)
class P300Victim:
    """Fitted decoding pipeline for the matrix speller."""

    filters: riemann.XdawnFilters
    clf: riemann.LogisticModel
    fs: float
    variant: str
    epoch_ms: float = 600.0
    cov_loading: float = riemann.DEFAULT_LOADING
    c_ref: np.ndarray | None = None
    w_ref: np.ndarray | None = field(default=None, repr=False)  # invsqrt of c_ref

    @property
    def epoch_len(self) -> int:
        return epoch_samples(self.fs, self.epoch_ms)


def _center(epochs: np.ndarray) -> np.ndarray:
    return epochs - epochs.mean(axis=-1, keepdims=True)


def train_victim(trials, config: P300TrainConfig = P300TrainConfig()) -> P300Victim:
    """Fit a victim on labeled trials. Deterministic for fixed inputs."""
    trials = list(trials)
    if not trials:
        raise ParameterError("no training trials")
    fs = trials[0].sig.fs
    epochs, labels = collect_epochs(trials, config.epoch_ms)
    centered = _center(epochs)
    filters = riemann.xdawn_fit(centered, labels, config.n_filters)
    if config.variant == "riemann":
        covs = riemann.augmented_covariances(centered, filters, config.cov_loading)
        c_ref = riemann.spd_geometric_mean(covs, config.geomean_tol, config.geomean_max_iter)
        feats = riemann.tangent_project_batch(covs, c_ref)
        clf = riemann.logreg_fit(feats, labels, config.l2, config.class_weights,
                                 config.logreg_tol, config.logreg_max_iter)
        w_ref = riemann.invsqrtm_spd(c_ref)
        return P300Victim(filters, clf, fs, config.variant, config.epoch_ms,
                          config.cov_loading, c_ref, w_ref)
    feats = np.einsum("fc,nct->nft", filters.u, centered).reshape(len(labels), -1)
    clf = riemann.logreg_fit(feats, labels, config.l2, config.class_weights,
                             config.logreg_tol, config.logreg_max_iter)
    return P300Victim(filters, clf, fs, config.variant, config.epoch_ms, config.cov_loading)


def epoch_probs(victim: P300Victim, epochs: np.ndarray) -> np.ndarray:
    """Attended-class probability for each raw epoch, [n] in [0, 1]."""
    epochs = np.asarray(epochs, dtype=np.float64)
    if epochs.ndim == 2:
        epochs = epochs[None]
    centered = _center(epochs)
    if victim.variant == "riemann":
        covs = riemann.augmented_covariances(centered, victim.filters, victim.cov_loading)
        feats = riemann.tangent_project_batch(covs, victim.c_ref)
    else:
        filt = np.einsum("fc,nct->nft", victim.filters.u, centered)
        feats = filt.reshape(epochs.shape[0], -1)
    return np.asarray(riemann.logreg_probs(victim.clf, feats))


def epoch_prob(victim: P300Victim, epoch: np.ndarray) -> float:
    return float(epoch_probs(victim, np.asarray(epoch)[None])[0])


@dataclass(frozen=True)
class P300Decode:
    character: str
    row_code: int
    col_code: int
    code_scores: np.ndarray  # [12], summed probabilities per code


def decode_character(victim: P300Victim, trial: P300Trial, repeats_used: int | None = None) -> P300Decode:
    """Decode one trial from its first ``repeats_used`` repeat blocks.

    Sums epoch probabilities per code; the attended row and column are the
    top-scoring codes (ties break toward the lower code).
    """
    if repeats_used is None:
        repeats_used = trial.repeats
    if not (1 <= repeats_used <= trial.repeats):
        raise ParameterError(f"repeats_used {repeats_used} outside 1..{trial.repeats}")
    n_use = repeats_used * N_CODES
    length = victim.epoch_len
    epochs = np.stack([dsp.extract_epoch(trial.sig, int(on), length) for on in trial.onsets[:n_use]])
    probs = epoch_probs(victim, epochs)
    scores = np.zeros(N_CODES)
    np.add.at(scores, trial.codes[:n_use] - 1, probs)
    row_code = int(np.argmax(scores[:6])) + 1
    col_code = int(np.argmax(scores[6:])) + 7
    return P300Decode(char_from_codes(row_code, col_code, trial.grid), row_code, col_code, scores)


# ---------------------------------------------------------------------------
# gradients


def _triu_unvec(grad_s: np.ndarray, d: int) -> np.ndarray:
    iu = np.triu_indices(d)
    g = np.zeros((d, d))
    vals = np.where(iu[0] == iu[1], grad_s, grad_s / np.sqrt(2.0))
    g[iu[0], iu[1]] = vals
    g[iu[1], iu[0]] = vals
    return g


def input_grad(victim: P300Victim, epoch: np.ndarray, label: int) -> np.ndarray:
    """Gradient of the per-epoch training loss with respect to the raw epoch.

    The loss is the class-weighted cross-entropy of the victim's classifier
    at ``label``; the l2 penalty does not depend on the input. Matches
    central finite differences through the full pipeline.
    """
    if label not in (0, 1):
        raise ParameterError(f"label must be 0 or 1, got {label}")
    return input_grads(victim, np.asarray(epoch, dtype=np.float64)[None],
                       np.asarray([label]))[0]


def input_grads(victim: P300Victim, epochs: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Batched ``input_grad`` over [n x channels x samples]."""
    epochs = np.asarray(epochs, dtype=np.float64)
    labels = np.asarray(labels)
    n, _, n_s = epochs.shape
    centered = _center(epochs)
    u = victim.filters.u
    omega = np.where(labels == 1, victim.clf.class_weights[1], victim.clf.class_weights[0])
    if victim.variant == "xdawn_lr":
        filt = np.einsum("fc,nct->nft", u, centered)
        feats = filt.reshape(n, -1)
        p = riemann.logreg_probs(victim.clf, feats)
        dz = omega * (p - labels)
        g_feat = dz[:, None] * victim.clf.weights[None, :]
        g_filt = g_feat.reshape(filt.shape)
        g_centered = np.einsum("fc,nft->nct", u, g_filt)
        return g_centered - g_centered.mean(axis=-1, keepdims=True)

    z_block = victim.filters.z
    filt = np.einsum("fc,nct->nft", u, centered)
    a = np.concatenate([np.broadcast_to(z_block, (n,) + z_block.shape), filt], axis=1)
    c = a @ a.transpose(0, 2, 1)
    d = c.shape[1]
    tr = np.trace(c, axis1=1, axis2=2)
    c = c + (victim.cov_loading * tr / d)[:, None, None] * np.eye(d)[None]
    w_ref = victim.w_ref
    m = np.einsum("ij,njk,kl->nil", w_ref, c, w_ref)
    m = 0.5 * (m + m.transpose(0, 2, 1))
    w_eig, q = np.linalg.eigh(m)
    if w_eig.min() <= 0.0:
        raise DegenerateInputError("whitened covariance lost positive definiteness")
    log_w = np.log(w_eig)
    lmat = np.einsum("nij,nj,nkj->nik", q, log_w, q)
    iu = np.triu_indices(d)
    weights = np.where(iu[0] == iu[1], 1.0, np.sqrt(2.0))
    feats = lmat[:, iu[0], iu[1]] * weights
    p = riemann.logreg_probs(victim.clf, feats)
    dz = omega * (p - labels)
    g_s = dz[:, None] * victim.clf.weights[None, :]
    g_l = np.zeros((n, d, d))
    vals = np.where(iu[0] == iu[1], g_s, g_s / np.sqrt(2.0))
    g_l[:, iu[0], iu[1]] = vals
    g_l[:, iu[1], iu[0]] = vals
    # divided differences of log between eigenvalue pairs, midpoint limit
    # when the gap underflows
    li = w_eig[:, :, None]
    lj = w_eig[:, None, :]
    diff = li - lj
    scale = np.maximum(w_eig[:, -1], np.finfo(np.float64).tiny)[:, None, None]
    near = np.abs(diff) < 1e-12 * scale
    safe_diff = np.where(near, 1.0, diff)
    k = np.where(near, 2.0 / (li + lj), np.log(np.where(near, 1.0, li / lj)) / safe_diff)
    inner = q.transpose(0, 2, 1) @ g_l @ q
    g_m = q @ (k * inner) @ q.transpose(0, 2, 1)
    g_m = 0.5 * (g_m + g_m.transpose(0, 2, 1))
    g_c = np.einsum("ij,njk,kl->nil", w_ref, g_m, w_ref)
    g_a = 2.0 * (g_c @ a)
    g_filt = g_a[:, d // 2 :, :]
    g_centered = np.einsum("fc,nft->nct", u, g_filt)
    return g_centered - g_centered.mean(axis=-1, keepdims=True)
