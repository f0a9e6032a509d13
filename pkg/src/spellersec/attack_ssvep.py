"""Perturbation crafting for the frequency-coded speller, plus noise controls.

One template is optimized per attacker frequency: gradient descent pushes a
band-limited additive window toward maximizing the summed canonical
correlation between perturbed crafting trials and the attacker frequency's
reference, with an energy penalty, stopping as soon as the signal-to-
perturbation ratio falls below a threshold. Periodic and Gaussian noise
generators provide energy-matched baselines.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from . import dsp, kernels, ssvep
from .errors import ConvergenceError, DegenerateInputError, ParameterError

log = logging.getLogger(__name__)

CRAFT_BAND = (7.0, 90.0)


@dataclass(frozen=True)
class SsvepTemplate:
    """Additive analysis-window perturbation tuned to one frequency."""

    delta: np.ndarray
    frequency: float
    fs: float
    alpha: float
    final_spr_db: float
    spr_threshold_db: float
    iterations: int
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        delta = np.asarray(self.delta, dtype=np.float64)
        if delta.ndim != 2:
            raise ParameterError(f"template must be [channels x samples], got {delta.shape}")
        back = dsp.band_project(delta, CRAFT_BAND[0], CRAFT_BAND[1], self.fs)
        norm = np.linalg.norm(delta)
        if norm == 0 or np.linalg.norm(delta - back) > 1e-9 * norm:
            raise ParameterError("template must be band-limited to the crafting band")
        if not (self.final_spr_db < self.spr_threshold_db):
            raise ParameterError(
                f"final ratio {self.final_spr_db} dB does not satisfy the "
                f"stop threshold {self.spr_threshold_db} dB"
            )
        object.__setattr__(self, "delta", delta)


def craft_delta(windows: np.ndarray, frequency: float, fs: float,
                n_harmonics: int = ssvep.DEFAULT_HARMONICS,
                alpha: float = 0.05, step_size: float = 1e-3,
                spr_threshold_db: float = 25.0, max_iter: int = 10000,
                loading: float = ssvep.DEFAULT_LOADING) -> SsvepTemplate:
    """Optimize one perturbation template against a crafting set.

    ``windows`` are the victim-preprocessed analysis windows of the crafting
    trials, [n x channels x samples]. Descent starts from zero with a fixed
    step; each iterate is re-projected onto the crafting band. The stopping
    ratio compares the mean per-trial energy of ``windows`` against the
    template energy. Raises ConvergenceError when the budget runs out first.
    """
    windows = np.asarray(windows, dtype=np.float64)
    if windows.ndim != 3:
        raise ParameterError(f"windows must be [n x channels x samples], got {windows.shape}")
    if windows.shape[0] == 0:
        raise ParameterError("crafting set is empty")
    n_samples = windows.shape[2]
    ref = ssvep.reference_signal(frequency, n_samples, fs, n_harmonics)
    yn, gy_inv = ssvep.normalized_reference(ref, loading)
    e_ref = float(np.mean(np.sum(windows ** 2, axis=(1, 2))))
    if e_ref <= 0:
        raise DegenerateInputError("crafting windows carry no energy")

    r = np.zeros(windows.shape[1:])
    prev_obj = None
    increases = 0
    steps = 0
    spr = np.inf
    for it in range(1, max_iter + 1):
        delta = dsp.band_project(r, CRAFT_BAND[0], CRAFT_BAND[1], fs)
        total_tr, grad_tr = kernels.ssvep_trace_grad(windows, delta, yn, gy_inv, loading)
        dnorm = float(np.linalg.norm(delta))
        obj = -total_tr + alpha * dnorm
        if prev_obj is not None:
            steps += 1
            if obj > prev_obj:
                increases += 1
        prev_obj = obj
        pen_grad = (alpha / dnorm) * delta if dnorm > 0 else 0.0
        grad_r = dsp.band_project(-grad_tr, CRAFT_BAND[0], CRAFT_BAND[1], fs) + pen_grad
        r = r - step_size * grad_r
        delta = dsp.band_project(r, CRAFT_BAND[0], CRAFT_BAND[1], fs)
        e_delta = float(np.sum(delta ** 2))
        if e_delta > 0:
            spr = 10.0 * np.log10(e_ref / e_delta)
            if spr < spr_threshold_db:
                frac = increases / steps if steps else 0.0
                if frac > 0.05:
                    log.warning("objective rose on %.1f%% of steps at %.2f Hz",
                                100 * frac, frequency)
                meta = {
                    "objective": obj,
                    "trace_sum": total_tr,
                    "nonmonotone_fraction": frac,
                    "reference_energy": e_ref,
                    "step_size": step_size,
                }
                return SsvepTemplate(delta, float(frequency), float(fs), float(alpha),
                                     float(spr), float(spr_threshold_db), it, meta)
    raise ConvergenceError(
        f"ratio stayed at {spr:.2f} dB (threshold {spr_threshold_db} dB) "
        f"after {max_iter} iterations at {frequency} Hz"
    )


def _scaled_to_spr(wave: np.ndarray, spr_db: float, reference_energy: float) -> np.ndarray:
    if reference_energy <= 0:
        raise DegenerateInputError("reference energy must be positive")
    energy = float(np.sum(wave ** 2))
    if energy == 0:
        raise DegenerateInputError("zero waveform cannot be scaled to a target ratio")
    target = reference_energy * 10.0 ** (-spr_db / 10.0)
    return wave * np.sqrt(target / energy)


def single_periodic_noise(grid: ssvep.FrequencyGrid, n_channels: int, n_samples: int,
                          fs: float, spr_db: float, reference_energy: float,
                          seed: int) -> np.ndarray:
    """One grid frequency, random phase, identical on every channel."""
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    freq = float(rng.choice(np.asarray(grid.frequencies)))
    phase = rng.uniform(-np.pi / 2, np.pi / 2)
    n = np.arange(n_samples, dtype=np.float64)
    wave = np.sin(2.0 * np.pi * freq * n / fs + phase)
    out = np.tile(wave, (n_channels, 1))
    return _scaled_to_spr(out, spr_db, reference_energy)


def compound_periodic_noise(grid: ssvep.FrequencyGrid, n_channels: int, n_samples: int,
                            fs: float, spr_db: float, reference_energy: float,
                            seed: int) -> np.ndarray:
    """All grid frequencies with random amplitudes in (0, 1] and phases."""
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    k = len(grid)
    amps = 1.0 - rng.random(k)  # uniform over (0, 1]
    phases = rng.uniform(-np.pi / 2, np.pi / 2, size=k)
    n = np.arange(n_samples, dtype=np.float64)
    wave = np.zeros(n_samples)
    for a, f, ph in zip(amps, grid.frequencies, phases):
        wave += a * np.sin(2.0 * np.pi * f * n / fs + ph)
    out = np.tile(wave, (n_channels, 1))
    return _scaled_to_spr(out, spr_db, reference_energy)


def gaussian_noise(n_channels: int, n_samples: int, spr_db: float,
                   reference_energy: float, seed: int) -> np.ndarray:
    """White Gaussian control at the requested energy ratio."""
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    wave = rng.standard_normal((n_channels, n_samples))
    return _scaled_to_spr(wave, spr_db, reference_energy)


def inject_window(trial: ssvep.SsvepTrial, victim: ssvep.SsvepVictim,
                  perturbation: np.ndarray, delay: int = 0) -> ssvep.SsvepTrial:
    """Add a window-shaped perturbation into the raw recording.

    The perturbation is aligned to the victim's analysis-window start plus
    ``delay`` samples; parts running past the recording are clipped.
    """
    perturbation = np.asarray(perturbation, dtype=np.float64)
    if perturbation.ndim != 2 or perturbation.shape[0] != trial.sig.n_channels:
        raise ParameterError(
            f"perturbation shape {perturbation.shape} does not cover "
            f"{trial.sig.n_channels} channels"
        )
    data = trial.sig.data.copy()
    n_samples = data.shape[1]
    lo = trial.onset_sample + victim.window_start + int(delay)
    t0 = 0
    if lo < 0:
        t0 = -lo
        lo = 0
    hi = min(lo + (perturbation.shape[1] - t0), n_samples)
    if hi > lo:
        data[:, lo:hi] += perturbation[:, t0 : t0 + (hi - lo)]
    return ssvep.SsvepTrial(trial.sig.with_data(data), trial.onset_sample,
                            trial.freq_index, trial.character, trial.block)
