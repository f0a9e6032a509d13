"""Frequency-coded speller: character grid, reference signals, decoders.

The victim here is training-free: each character flickers at its own
frequency and decoding picks the grid frequency whose harmonic reference
correlates best with the analysis window, either plain canonical
correlation or the sub-band weighted variant.
"""

import json
from dataclasses import dataclass, field
from importlib import resources

import numpy as np
import scipy.linalg

from . import dsp
from .errors import ParameterError

DEFAULT_HARMONICS = 5
DEFAULT_LOADING = 1e-8


@dataclass(frozen=True)
class FrequencyGrid:
    """Characters of the on-screen matrix and their flicker frequencies.

    Stored row-major flattened; ``rows`` keeps the original display shape for
    reports. Frequencies must be pairwise distinct.
    """

    characters: tuple
    frequencies: tuple
    rows: tuple = field(default=())

    def __post_init__(self):
        chars = tuple(self.characters)
        freqs = tuple(float(f) for f in self.frequencies)
        if len(chars) != len(freqs):
            raise ParameterError(f"{len(chars)} characters for {len(freqs)} frequencies")
        if len(chars) < 2:
            raise ParameterError("a grid needs at least two characters")
        if len(set(chars)) != len(chars):
            raise ParameterError("duplicate characters in grid")
        if len(set(freqs)) != len(freqs):
            raise ParameterError("duplicate frequencies in grid")
        if min(freqs) <= 0:
            raise ParameterError("frequencies must be positive")
        object.__setattr__(self, "characters", chars)
        object.__setattr__(self, "frequencies", freqs)
        object.__setattr__(self, "rows", tuple(self.rows))

    def __len__(self) -> int:
        return len(self.characters)

    def index_of(self, character: str) -> int:
        try:
            return self.characters.index(character)
        except ValueError:
            raise ParameterError(f"character {character!r} not in grid") from None

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "rows": list(self.rows),
            "characters": list(self.characters),
            "frequencies_hz": list(self.frequencies),
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "FrequencyGrid":
        if "rows" in obj and "frequencies_hz" in obj and isinstance(obj["frequencies_hz"][0], list):
            rows = [str(r) for r in obj["rows"]]
            chars = tuple(ch for row in rows for ch in row)
            freqs = tuple(f for row in obj["frequencies_hz"] for f in row)
            return cls(chars, freqs, tuple(rows))
        return cls(tuple(obj["characters"]), tuple(obj["frequencies_hz"]), tuple(obj.get("rows", ())))

    @classmethod
    def from_json(cls, path) -> "FrequencyGrid":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def default_grid() -> FrequencyGrid:
    """The 40-character 8 to 15.8 Hz layout shipped with the package."""
    text = resources.files("spellersec").joinpath("layouts/benchmark_40.json").read_text()
    return FrequencyGrid.from_dict(json.loads(text))


@dataclass(frozen=True)
class ReferenceSignal:
    """Harmonic sine/cosine reference rows for one stimulation frequency."""

    y: np.ndarray  # [2*n_harmonics x n_samples]
    frequency: float
    n_harmonics: int
    fs: float


def reference_signal(frequency: float, n_samples: int, fs: float,
                     n_harmonics: int = DEFAULT_HARMONICS) -> ReferenceSignal:
    """Build the reference matrix for one frequency.

    Row c (1-indexed) over samples n = 1..n_samples:
    sin((c+1) pi f n / fs) for odd c, cos(c pi f n / fs) for even c,
    covering harmonics 1..n_harmonics as interleaved sine/cosine pairs.
    """
    if frequency <= 0:
        raise ParameterError(f"frequency must be positive, got {frequency}")
    if n_harmonics < 1:
        raise ParameterError(f"need at least one harmonic, got {n_harmonics}")
    if n_harmonics * frequency >= fs / 2:
        raise ParameterError(
            f"harmonic {n_harmonics} of {frequency} Hz is at or above Nyquist {fs / 2} Hz"
        )
    n = np.arange(1, n_samples + 1, dtype=np.float64)
    y = np.empty((2 * n_harmonics, n_samples))
    for c in range(1, 2 * n_harmonics + 1):
        if c % 2 == 1:
            y[c - 1] = np.sin((c + 1) * np.pi * frequency * n / fs)
        else:
            y[c - 1] = np.cos(c * np.pi * frequency * n / fs)
    return ReferenceSignal(y, float(frequency), int(n_harmonics), float(fs))


def _loaded_gram(rows: np.ndarray, loading: float) -> np.ndarray:
    g = rows @ rows.T
    d = g.shape[0]
    return g + (loading * np.trace(g) / d) * np.eye(d)


def normalized_reference(ref: ReferenceSignal, loading: float = DEFAULT_LOADING):
    """Z-normalized reference rows and the inverse of their loaded Gram."""
    yn = dsp.znorm_channels(ref.y)
    gy = _loaded_gram(yn, loading)
    return yn, scipy.linalg.inv(gy)


_BANK_CACHE: dict = {}


def reference_bank(frequencies, n_samples: int, fs: float,
                   n_harmonics: int = DEFAULT_HARMONICS, loading: float = DEFAULT_LOADING):
    """Cached list of (yn, gy_inv) pairs for a tuple of frequencies."""
    key = (tuple(float(f) for f in frequencies), int(n_samples), float(fs), int(n_harmonics), float(loading))
    if key not in _BANK_CACHE:
        _BANK_CACHE[key] = tuple(
            normalized_reference(reference_signal(f, n_samples, fs, n_harmonics), loading)
            for f in key[0]
        )
    return _BANK_CACHE[key]


def cca_rho(x: np.ndarray, y, loading: float = DEFAULT_LOADING) -> float:
    """Largest canonical correlation between two multichannel windows.

    Both sides are z-normalized per row; the result is
    sqrt(lambda_max(Gx^-1 X Y^T Gy^-1 Y X^T)) computed through a symmetric
    eigenproblem and clamped to [0, 1].
    """
    if isinstance(x, dsp.Signal):
        x = x.data
    if isinstance(y, ReferenceSignal):
        y = y.y
    xn = dsp.znorm_channels(np.atleast_2d(x))
    yn = dsp.znorm_channels(np.atleast_2d(y))
    if xn.shape[1] != yn.shape[1]:
        raise ParameterError(f"window lengths differ: {xn.shape[1]} vs {yn.shape[1]}")
    gx = _loaded_gram(xn, loading)
    gy = _loaded_gram(yn, loading)
    p = xn @ yn.T
    lx = np.linalg.cholesky(gx)
    w1 = scipy.linalg.solve_triangular(lx, p, lower=True)
    m = w1 @ scipy.linalg.cho_solve((np.linalg.cholesky(gy), True), w1.T)
    lam = float(np.linalg.eigvalsh(0.5 * (m + m.T))[-1])
    return float(np.sqrt(min(max(lam, 0.0), 1.0)))


@dataclass(frozen=True)
class DecodeResult:
    """Decoder output: winning grid entry plus the per-frequency scores."""

    index: int
    frequency: float
    character: str
    scores: np.ndarray


def _pick(grid: FrequencyGrid, scores: np.ndarray) -> DecodeResult:
    best = float(np.max(scores))
    tied = np.nonzero(scores == best)[0]
    # deterministic tie break: lowest stimulation frequency wins
    idx = int(tied[np.argmin(np.asarray(grid.frequencies)[tied])])
    return DecodeResult(idx, grid.frequencies[idx], grid.characters[idx], scores)


def _rhos_from_bank(xn: np.ndarray, bank, loading: float = DEFAULT_LOADING) -> np.ndarray:
    gx = _loaded_gram(xn, loading)
    lx = np.linalg.cholesky(gx)
    out = np.empty(len(bank))
    for i, (yn, gy_inv) in enumerate(bank):
        p = xn @ yn.T
        w1 = scipy.linalg.solve_triangular(lx, p, lower=True)
        m = w1 @ gy_inv @ w1.T
        lam = float(np.linalg.eigvalsh(0.5 * (m + m.T))[-1])
        out[i] = np.sqrt(min(max(lam, 0.0), 1.0))
    return out


def decode_frequency(x: np.ndarray, grid: FrequencyGrid, fs: float,
                     n_harmonics: int = DEFAULT_HARMONICS,
                     loading: float = DEFAULT_LOADING) -> DecodeResult:
    """Decode one analysis window by maximum canonical correlation."""
    x = np.asarray(x, dtype=np.float64)
    bank = reference_bank(grid.frequencies, x.shape[1], fs, n_harmonics, loading)
    xn = dsp.znorm_channels(x)
    return _pick(grid, _rhos_from_bank(xn, bank, loading))


@dataclass(frozen=True)
class FilterBankConfig:
    """Sub-band decomposition and weighting for the filter-bank decoder.

    Band m covers [band_base*m, high_hz] Hz and is weighted by
    m^-weight_a + weight_b.
    """

    n_bands: int = 5
    band_base: float = 8.0
    high_hz: float = 90.0
    weight_a: float = 1.25
    weight_b: float = 0.25

    def __post_init__(self):
        if self.n_bands < 1:
            raise ParameterError(f"need at least one band, got {self.n_bands}")
        if self.band_base * self.n_bands >= self.high_hz:
            raise ParameterError(
                f"lowest edge of band {self.n_bands} ({self.band_base * self.n_bands} Hz) "
                f"must stay below {self.high_hz} Hz"
            )

    def weights(self) -> np.ndarray:
        m = np.arange(1, self.n_bands + 1, dtype=np.float64)
        return m ** (-self.weight_a) + self.weight_b


def fbcca_decode(x: np.ndarray, grid: FrequencyGrid, fs: float,
                 bank_cfg: FilterBankConfig | None = None,
                 n_harmonics: int = DEFAULT_HARMONICS,
                 loading: float = DEFAULT_LOADING) -> DecodeResult:
    """Sub-band decoder: weighted sum of squared correlations per band."""
    x = np.asarray(x, dtype=np.float64)
    cfg = bank_cfg if bank_cfg is not None else FilterBankConfig()
    if cfg.high_hz >= fs / 2:
        raise ParameterError(f"band top {cfg.high_hz} Hz at or above Nyquist {fs / 2} Hz")
    bank = reference_bank(grid.frequencies, x.shape[1], fs, n_harmonics, loading)
    weights = cfg.weights()
    scores = np.zeros(len(grid))
    for m in range(1, cfg.n_bands + 1):
        sub = dsp.band_project(x, cfg.band_base * m, cfg.high_hz, fs)
        rhos = _rhos_from_bank(dsp.znorm_channels(sub), bank, loading)
        scores += weights[m - 1] * rhos ** 2
    return _pick(grid, scores)


# ---------------------------------------------------------------------------
# victim


@dataclass(frozen=True)
class SsvepTrial:
    """One stimulation trial: the recording plus its ground truth."""

    sig: dsp.Signal
    onset_sample: int
    freq_index: int
    character: str
    block: int = 0


@dataclass(frozen=True)
class SsvepVictim:
    """Decoding pipeline: causal bandpass, fixed analysis window, decoder."""

    grid: FrequencyGrid
    fs: float
    n_harmonics: int = DEFAULT_HARMONICS
    band: tuple = (7.0, 90.0)
    filter_order: int = 4
    window_start_s: float = 0.13
    window_len_s: float = 1.25
    decoder: str = "cca"
    bank_cfg: FilterBankConfig | None = None
    loading: float = DEFAULT_LOADING

    def __post_init__(self):
        if self.decoder not in ("cca", "fbcca"):
            raise ParameterError(f"unknown decoder {self.decoder!r}")

    @property
    def window_start(self) -> int:
        return int(np.floor(self.window_start_s * self.fs))

    @property
    def window_len(self) -> int:
        return int(np.floor(self.window_len_s * self.fs))

    @property
    def selection_time_s(self) -> float:
        return self.window_start_s + self.window_len_s

    def coefficients(self) -> dsp.FilterCoefficients:
        return dsp.design_bandpass(self.band[0], self.band[1], self.filter_order, self.fs)


def preprocess_window(victim: SsvepVictim, trial: SsvepTrial) -> np.ndarray:
    """Bandpass the recording and cut the analysis window after onset."""
    filtered = dsp.apply_filter(trial.sig, victim.coefficients())
    start = trial.onset_sample + victim.window_start
    return dsp.extract_epoch(filtered, start, victim.window_len)


def decode_window(victim: SsvepVictim, window: np.ndarray) -> DecodeResult:
    """Decode an already preprocessed analysis window."""
    if victim.decoder == "fbcca":
        return fbcca_decode(window, victim.grid, victim.fs, victim.bank_cfg,
                            victim.n_harmonics, victim.loading)
    return decode_frequency(window, victim.grid, victim.fs, victim.n_harmonics, victim.loading)


def decode_trial(victim: SsvepVictim, trial: SsvepTrial) -> DecodeResult:
    return decode_window(victim, preprocess_window(victim, trial))
