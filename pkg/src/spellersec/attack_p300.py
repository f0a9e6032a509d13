"""Perturbation templates for the matrix speller and their injection.

A template is crafted once per victim from non-attended training epochs:
normalized loss gradients are averaged, lowpassed to the evoked-response
band, cut to two stimulation periods, and scaled to a fixed per-channel
energy. At attack time the same template is added at every intensification
of the attacker's row and column, so decoding drifts toward the attacker's
character while the stimulus stream stays untouched.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from . import dsp, kernels, p300
from .errors import DegenerateInputError, ParameterError

log = logging.getLogger(__name__)

TEMPLATE_BAND = (0.1, 15.0)
TEMPLATE_MS = 350.0
TEMPLATE_FILTER_ORDER = 4


def template_samples(fs: float, template_ms: float = TEMPLATE_MS) -> int:
    return int(round(template_ms / 1000.0 * fs))


@dataclass(frozen=True)
class P300Template:
    """Additive perturbation, one row per channel, two flash periods long.

    Every channel row carries Euclidean norm ``epsilon``; the spectral
    content stays inside the crafting band.
    """

    data: np.ndarray
    epsilon: float
    fs: float
    sign_flipped: bool | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 2:
            raise ParameterError(f"template must be [channels x samples], got {data.shape}")
        norms = np.linalg.norm(data, axis=1)
        if not np.allclose(norms, self.epsilon, atol=1e-9):
            raise ParameterError(
                f"per-channel norms deviate from epsilon {self.epsilon}: {norms}"
            )
        object.__setattr__(self, "data", data)


def _craft_chain(raw: np.ndarray, fs: float, epsilon: float) -> np.ndarray:
    """Shared post-processing: lowpass, truncate, per-channel normalize."""
    coeffs = dsp.design_bandpass(TEMPLATE_BAND[0], TEMPLATE_BAND[1], TEMPLATE_FILTER_ORDER, fs)
    filtered = kernels.iir_filter(coeffs.b, coeffs.a, raw)
    cut = filtered[:, : template_samples(fs)]
    norms = np.linalg.norm(cut, axis=1, keepdims=True)
    if np.any(norms < 1e-30):
        raise DegenerateInputError("a channel of the template has no energy to normalize")
    return epsilon * cut / norms


def craft_template(victim: p300.P300Victim, nontarget_epochs: np.ndarray,
                   epsilon: float = 0.5) -> P300Template:
    """Craft the victim-specific template from non-attended epochs.

    Averages per-epoch normalized gradients of the loss toward the attended
    class, then runs the post-processing chain. The direction convention is
    settled empirically: if adding the template does not raise the mean
    attended-class probability on the crafting epochs, the global sign is
    flipped; the decision is recorded on the template.
    """
    epochs = np.asarray(nontarget_epochs, dtype=np.float64)
    if epochs.ndim != 3 or epochs.shape[0] == 0:
        raise ParameterError(f"epochs must be non-empty [n x channels x samples], got {epochs.shape}")
    if epsilon <= 0:
        raise ParameterError(f"epsilon must be positive, got {epsilon}")
    grads = p300.input_grads(victim, epochs, np.ones(epochs.shape[0], dtype=np.int64))
    norms = np.linalg.norm(grads.reshape(grads.shape[0], -1), axis=1)
    usable = norms > 1e-30
    skipped = int((~usable).sum())
    if skipped:
        log.warning("skipping %d epochs with vanishing gradient", skipped)
    if not usable.any():
        raise DegenerateInputError("all crafting epochs have vanishing gradients")
    summed = (grads[usable] / norms[usable, None, None]).sum(axis=0)
    template = _craft_chain(summed, victim.fs, epsilon)

    length = template.shape[1]
    clean_mean = float(p300.epoch_probs(victim, epochs).mean())
    perturbed = epochs.copy()
    perturbed[:, :, :length] += template
    pert_mean = float(p300.epoch_probs(victim, perturbed).mean())
    flipped = pert_mean <= clean_mean
    if flipped:
        template = -template
        perturbed = epochs.copy()
        perturbed[:, :, :length] += template
        pert_mean = float(p300.epoch_probs(victim, perturbed).mean())
    meta = {
        "mean_prob_clean": clean_mean,
        "mean_prob_perturbed": pert_mean,
        "n_epochs_used": int(usable.sum()),
        "n_epochs_skipped": skipped,
    }
    return P300Template(template, float(epsilon), victim.fs, bool(flipped), meta)


def gaussian_template(n_channels: int, fs: float, epsilon: float, seed: int,
                      epoch_ms: float = 600.0) -> P300Template:
    """Energy-matched control: white noise through the same crafting chain."""
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    raw = rng.standard_normal((n_channels, p300.epoch_samples(fs, epoch_ms)))
    data = _craft_chain(raw, fs, epsilon)
    return P300Template(data, float(epsilon), fs, None, {"seed": int(seed)})


@dataclass(frozen=True)
class InjectionPlan:
    """Where a template lands inside one trial for one attacker character."""

    character: str
    row_code: int
    col_code: int
    delay: int
    onsets: np.ndarray  # injection start samples, delay already applied

    def __post_init__(self):
        object.__setattr__(self, "onsets", np.asarray(self.onsets, dtype=np.int64))


def plan_injection(trial: p300.P300Trial, attacker_char: str, delay: int = 0) -> InjectionPlan:
    """Select the intensifications of the attacker's row and column."""
    row_code, col_code = p300.codes_for_char(attacker_char, trial.grid)
    mask = (trial.codes == row_code) | (trial.codes == col_code)
    return InjectionPlan(attacker_char, row_code, col_code, int(delay),
                         trial.onsets[mask] + int(delay))


def inject(trial: p300.P300Trial, plan: InjectionPlan, template: P300Template) -> p300.P300Trial:
    """Additively apply the template at each planned onset; new trial out.

    Windows running past either end of the recording are clipped; overlap
    between adjacent injections sums.
    """
    data = trial.sig.data.copy()
    n_samples = data.shape[1]
    length = template.data.shape[1]
    for onset in plan.onsets:
        lo = int(onset)
        t0 = 0
        if lo < 0:
            t0 = -lo
            lo = 0
        hi = min(lo + (length - t0), n_samples)
        if hi <= lo:
            continue
        data[:, lo:hi] += template.data[:, t0 : t0 + (hi - lo)]
    return p300.P300Trial(trial.sig.with_data(data), trial.onsets, trial.codes,
                          trial.labels, trial.user_char, trial.grid)
