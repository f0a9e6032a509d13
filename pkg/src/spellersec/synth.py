"""Synthetic recordings for both spellers.

Background activity is built from a few spatially mixed 1/f sources plus a
weak independent white floor; the low-rank spatial structure gives the
multichannel decoders a cancelable subspace, which is what makes small
perturbations effective on real recordings. Evoked components go through
per-subject spatial patterns with trial-to-trial amplitude and latency
jitter. Channels are z-normalized over the whole recording at the end,
mirroring the preprocessing convention of the converted datasets.

All randomness derives from the config seed through named child streams, so
a config value determines every sample.
"""

from dataclasses import dataclass

import numpy as np

from . import dsp, p300, ssvep
from .errors import ParameterError

SSVEP_CHANNELS = ("PZ", "PO5", "PO3", "POZ", "PO4", "PO6", "O1", "OZ", "O2")


def _rng(seed, *tag):
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence((seed,) + tag)))


def _pink_sources(rng, n_sources: int, n_samples: int, fs: float) -> np.ndarray:
    """Unit-variance noise sources with 1/f power shaping, DC removed."""
    white = rng.standard_normal((n_sources, n_samples))
    spec = np.fft.rfft(white, axis=1)
    freqs = np.fft.rfftfreq(n_samples, d=1.0 / fs)
    shape = 1.0 / np.sqrt(np.maximum(freqs, 1.0))
    shape[0] = 0.0
    spec *= shape
    out = np.fft.irfft(spec, n=n_samples, axis=1)
    sd = out.std(axis=1, keepdims=True)
    return out / sd


def _background(rng, n_channels: int, n_samples: int, fs: float,
                n_sources: int, white_sd: float, noise_sd: float,
                mixing: np.ndarray | None = None):
    """Mixed 1/f sources plus white floor; returns noise and the mixing.

    The mixing stays fixed per subject (pass it in) so the noise occupies a
    stable spatial subspace across trials; only the source waveforms and the
    white floor are redrawn.
    """
    sources = _pink_sources(rng, n_sources, n_samples, fs)
    if mixing is None:
        mixing = rng.standard_normal((n_channels, n_sources)) / np.sqrt(n_sources)
    noise = mixing @ sources + white_sd * rng.standard_normal((n_channels, n_samples))
    return noise_sd * noise, mixing


def _overlap_pattern(rng, noise_mixing: np.ndarray, overlap: float) -> np.ndarray:
    """Unit spatial pattern with a controlled share inside the noise span."""
    n_channels = noise_mixing.shape[0]
    v = rng.standard_normal(n_channels)
    q, _ = np.linalg.qr(noise_mixing)
    inside = q @ (q.T @ v)
    outside = v - inside

    def unit(x):
        n = np.linalg.norm(x)
        return x / n if n > 0 else x

    pattern = overlap * unit(inside) + (1.0 - overlap) * unit(outside)
    return unit(pattern)


# ---------------------------------------------------------------------------
# matrix speller


@dataclass(frozen=True)
class SynthP300Config:
    """Generator settings for one synthetic matrix-speller subject."""

    fs: float = 240.0
    n_channels: int = 16
    repeats: int = 15
    soa_ms: float = 175.0
    lead_ms: float = 500.0
    tail_ms: float = 700.0
    p300_amplitude: float = 1.0
    p300_latency_ms: float = 300.0
    p300_width_ms: float = 80.0  # twice the Gaussian sigma
    amp_jitter: float = 0.25
    latency_jitter_ms: float = 20.0
    spatial_pattern: tuple | None = None  # unit vector, seeded when omitted
    noise_sd: float = 1.0
    white_sd: float = 0.3
    n_noise_sources: int = 6
    seed: int = 0

    def __post_init__(self):
        if self.p300_amplitude < 0 or self.noise_sd < 0 or self.white_sd < 0:
            raise ParameterError("amplitudes and noise scales must be nonnegative")
        if self.repeats < 1:
            raise ParameterError("need at least one repeat")


def _p300_subject_model(cfg: SynthP300Config):
    """Per-subject spatial pattern and noise mixing, shared across trials."""
    rng = _rng(cfg.seed, 2)
    pat = rng.standard_normal(cfg.n_channels)
    mixing = rng.standard_normal((cfg.n_channels, cfg.n_noise_sources)) / np.sqrt(cfg.n_noise_sources)
    if cfg.spatial_pattern is not None:
        pat = np.asarray(cfg.spatial_pattern, dtype=np.float64)
        if pat.shape != (cfg.n_channels,):
            raise ParameterError(f"spatial pattern must have {cfg.n_channels} entries")
    return pat / np.linalg.norm(pat), mixing


def _p300_trial(cfg: SynthP300Config, pattern: np.ndarray, mixing: np.ndarray,
                split_tag: int, index: int) -> p300.P300Trial:
    rng = _rng(cfg.seed, split_tag, index)
    soa = int(round(cfg.soa_ms / 1000.0 * cfg.fs))
    lead = int(round(cfg.lead_ms / 1000.0 * cfg.fs))
    tail = int(round(cfg.tail_ms / 1000.0 * cfg.fs))
    n_events = p300.N_CODES * cfg.repeats
    onsets = lead + soa * np.arange(n_events, dtype=np.int64)
    n_samples = lead + soa * n_events + tail

    chars = p300.grid_characters()
    user_char = chars[int(rng.integers(len(chars)))]
    row_code, col_code = p300.codes_for_char(user_char)
    codes = np.concatenate([rng.permutation(p300.N_CODES) + 1 for _ in range(cfg.repeats)])
    labels = ((codes == row_code) | (codes == col_code)).astype(np.int64)

    data, _ = _background(rng, cfg.n_channels, n_samples, cfg.fs,
                          cfg.n_noise_sources, cfg.white_sd, cfg.noise_sd, mixing)
    sigma = cfg.p300_width_ms / 2.0 / 1000.0 * cfg.fs
    half = int(round(3 * sigma))
    for onset, lab in zip(onsets, labels):
        if not lab:
            continue
        amp = cfg.p300_amplitude * max(0.0, 1.0 + cfg.amp_jitter * rng.standard_normal())
        latency = (cfg.p300_latency_ms + cfg.latency_jitter_ms * rng.standard_normal()) / 1000.0 * cfg.fs
        center = onset + latency
        t0 = max(0, int(center) - half)
        t1 = min(n_samples, int(center) + half + 1)
        t = np.arange(t0, t1, dtype=np.float64)
        bump = amp * np.exp(-0.5 * ((t - center) / sigma) ** 2)
        data[:, t0:t1] += pattern[:, None] * bump[None, :]
    data = dsp.znorm_channels(data)
    return p300.P300Trial(dsp.Signal(data, cfg.fs), onsets, codes, labels, user_char)


def synth_p300_subject(cfg: SynthP300Config, n_train: int, n_test: int):
    """Generate labeled train and test trials for one subject."""
    pattern, mixing = _p300_subject_model(cfg)
    train = [_p300_trial(cfg, pattern, mixing, 0, i) for i in range(n_train)]
    test = [_p300_trial(cfg, pattern, mixing, 1, i) for i in range(n_test)]
    return train, test


# ---------------------------------------------------------------------------
# frequency-coded speller


@dataclass(frozen=True)
class SynthSsvepConfig:
    """Generator settings for one synthetic frequency-speller subject."""

    fs: float = 250.0
    n_channels: int = 9
    pre_s: float = 0.5
    stim_s: float = 5.0
    post_s: float = 0.5
    harmonic_amps: tuple = (0.21, 0.17, 0.1)
    onset_delay_ms: float = 135.0
    amp_jitter: float = 0.2
    pattern_overlap: float = 0.65  # share of evoked patterns inside the noise span
    noise_sd: float = 1.0
    white_sd: float = 0.1
    n_noise_sources: int = 5
    seed: int = 0

    def __post_init__(self):
        if any(a < 0 for a in self.harmonic_amps):
            raise ParameterError("harmonic amplitudes must be nonnegative")
        if not (0.0 <= self.pattern_overlap <= 1.0):
            raise ParameterError("pattern overlap must lie in [0, 1]")
        if self.noise_sd < 0 or self.white_sd < 0:
            raise ParameterError("noise scales must be nonnegative")


def _ssvep_subject_model(cfg: SynthSsvepConfig):
    """Per-subject spatial patterns, shared across all trials."""
    rng = _rng(cfg.seed, 2)
    probe = rng.standard_normal((cfg.n_channels, cfg.n_noise_sources)) / np.sqrt(cfg.n_noise_sources)
    patterns = np.stack([
        _overlap_pattern(rng, probe, cfg.pattern_overlap)
        for _ in range(len(cfg.harmonic_amps))
    ])
    return probe, patterns


def _ssvep_trial(cfg: SynthSsvepConfig, grid: ssvep.FrequencyGrid, probe: np.ndarray,
                 patterns: np.ndarray, block: int, freq_index: int) -> ssvep.SsvepTrial:
    rng = _rng(cfg.seed, 3, block, freq_index)
    n_samples = int(round((cfg.pre_s + cfg.stim_s + cfg.post_s) * cfg.fs))
    onset = int(round(cfg.pre_s * cfg.fs))
    data, _ = _background(rng, cfg.n_channels, n_samples, cfg.fs,
                          cfg.n_noise_sources, cfg.white_sd, cfg.noise_sd, probe)
    freq = grid.frequencies[freq_index]
    t0 = onset + int(round(cfg.onset_delay_ms / 1000.0 * cfg.fs))
    t1 = min(n_samples, onset + int(round(cfg.stim_s * cfg.fs)))
    n = np.arange(t1 - t0, dtype=np.float64)
    for h, amp in enumerate(cfg.harmonic_amps, start=1):
        if amp == 0:
            continue
        gain = amp * max(0.0, 1.0 + cfg.amp_jitter * rng.standard_normal())
        phase = rng.uniform(0.0, 2.0 * np.pi)
        wave = gain * np.sin(2.0 * np.pi * h * freq * n / cfg.fs + phase)
        data[:, t0:t1] += patterns[h - 1][:, None] * wave[None, :]
    data = dsp.znorm_channels(data)
    sig = dsp.Signal(data, cfg.fs, SSVEP_CHANNELS[: cfg.n_channels]
                     if cfg.n_channels <= len(SSVEP_CHANNELS) else ())
    return ssvep.SsvepTrial(sig, onset, freq_index, grid.characters[freq_index], block)


def synth_ssvep_subject(cfg: SynthSsvepConfig, grid: ssvep.FrequencyGrid | None = None,
                        n_blocks: int = 6):
    """Generate trials block by block, one per grid character per block."""
    if grid is None:
        grid = ssvep.default_grid()
    probe, patterns = _ssvep_subject_model(cfg)
    return [
        _ssvep_trial(cfg, grid, probe, patterns, block, k)
        for block in range(n_blocks)
        for k in range(len(grid))
    ]
