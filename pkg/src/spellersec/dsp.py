"""Multichannel signal container and the shared preprocessing operations.

Conventions used everywhere in the package: signals are float64 arrays of
shape [n_channels x n_samples], z-normalization uses the population standard
deviation, and spectral band projection works on the real FFT grid of the
given window.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import signal as sig

from .errors import BoundsError, DegenerateInputError, ParameterError
from . import kernels


@dataclass(frozen=True)
class Signal:
    """A multichannel recording sampled at a fixed rate.

    Parameters
    ----------
    data : ndarray
        Samples, shape [n_channels x n_samples], float64.
    fs : float
        Sampling rate in Hz, positive.
    channel_names : tuple of str, optional
        One name per channel; generated as ch0, ch1, ... when omitted.
    """

    data: np.ndarray
    fs: float
    channel_names: tuple = field(default=())

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 2:
            raise ParameterError(f"signal data must be 2-d, got shape {data.shape}")
        if not np.isfinite(data).all():
            raise ParameterError("signal data contains non-finite values")
        if not (self.fs > 0):
            raise ParameterError(f"sampling rate must be positive, got {self.fs}")
        names = self.channel_names
        if not names:
            names = tuple(f"ch{i}" for i in range(data.shape[0]))
        if len(names) != data.shape[0]:
            raise ParameterError(
                f"{len(names)} channel names for {data.shape[0]} channels"
            )
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "fs", float(self.fs))
        object.__setattr__(self, "channel_names", tuple(names))

    @property
    def n_channels(self) -> int:
        return self.data.shape[0]

    @property
    def n_samples(self) -> int:
        return self.data.shape[1]

    def with_data(self, data: np.ndarray) -> "Signal":
        """Copy of this signal with the samples replaced."""
        return Signal(data, self.fs, self.channel_names)


@dataclass(frozen=True)
class FilterCoefficients:
    """IIR transfer-function coefficients (numerator b, denominator a)."""

    b: np.ndarray
    a: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "b", np.asarray(self.b, dtype=np.float64))
        object.__setattr__(self, "a", np.asarray(self.a, dtype=np.float64))


def design_bandpass(low_hz: float, high_hz: float, order: int, fs: float) -> FilterCoefficients:
    """Design a Butterworth bandpass filter.

    ``order`` is the analog prototype order; the resulting bandpass has
    2*order poles, the usual convention for this design.

    Raises
    ------
    ParameterError
        If the band is empty, exceeds Nyquist, or the order is not positive.
    """
    if not (0 < low_hz < high_hz):
        raise ParameterError(f"need 0 < low < high, got [{low_hz}, {high_hz}]")
    if high_hz >= fs / 2:
        raise ParameterError(f"high edge {high_hz} Hz at or above Nyquist {fs / 2} Hz")
    if order < 1:
        raise ParameterError(f"filter order must be >= 1, got {order}")
    b, a = sig.butter(order, [low_hz, high_hz], btype="bandpass", fs=fs)
    poles = np.roots(a)
    if np.any(np.abs(poles) >= 1.0):
        raise ParameterError(
            f"unstable design for band [{low_hz}, {high_hz}] Hz at fs {fs} Hz"
        )
    return FilterCoefficients(b, a)


def apply_filter(signal: Signal, coeffs: FilterCoefficients) -> Signal:
    """Run the IIR difference equation causally along time, zero initial state."""
    out = kernels.iir_filter(coeffs.b, coeffs.a, signal.data)
    return signal.with_data(out)


def znorm_channels(data: np.ndarray) -> np.ndarray:
    """Z-normalize each row to zero mean, unit population standard deviation.

    Raises
    ------
    DegenerateInputError
        If any row is constant.
    """
    data = np.asarray(data, dtype=np.float64)
    mean = data.mean(axis=-1, keepdims=True)
    std = data.std(axis=-1, keepdims=True)
    if np.any(std == 0.0):
        rows = np.nonzero(std.ravel() == 0.0)[0]
        raise DegenerateInputError(f"constant channel(s) {rows.tolist()} cannot be z-normalized")
    return (data - mean) / std


def extract_epoch(signal: Signal, start: int, length: int) -> np.ndarray:
    """Slice ``length`` samples from ``start``; a view-free copy.

    Raises
    ------
    BoundsError
        If the window does not lie fully inside the recording.
    """
    if length < 1:
        raise ParameterError(f"epoch length must be >= 1, got {length}")
    if start < 0 or start + length > signal.n_samples:
        raise BoundsError(
            f"epoch [{start}, {start + length}) outside recording of {signal.n_samples} samples"
        )
    return signal.data[:, start : start + length].copy()


def band_project(data: np.ndarray, low_hz: float, high_hz: float, fs: float) -> np.ndarray:
    """Project rows onto the band [low_hz, high_hz] via a hard DFT mask.

    Bins strictly outside the band are zeroed; the projection is idempotent
    and self-adjoint, which the perturbation optimizer relies on.
    """
    if not (0 <= low_hz <= high_hz):
        raise ParameterError(f"need 0 <= low <= high, got [{low_hz}, {high_hz}]")
    data = np.asarray(data, dtype=np.float64)
    n = data.shape[-1]
    freqs = np.fft.rfftfreq(n, d=1.0 / fs)
    mask = (freqs >= low_hz) & (freqs <= high_hz)
    spec = np.fft.rfft(data, axis=-1)
    spec[..., ~mask] = 0.0
    return np.fft.irfft(spec, n=n, axis=-1)


def amplitude_spectrum(data: np.ndarray, fs: float):
    """One-sided amplitude spectrum with energy-preserving scaling.

    Returns
    -------
    freqs : ndarray
        Bin frequencies in Hz, shape [n_bins].
    amps : ndarray
        Nonnegative amplitudes, same leading shape as ``data`` with the time
        axis replaced by bins. The sum of squared amplitudes equals the
        time-domain energy of each row (Parseval).
    """
    data = np.asarray(data, dtype=np.float64)
    n = data.shape[-1]
    freqs = np.fft.rfftfreq(n, d=1.0 / fs)
    spec = np.abs(np.fft.rfft(data, axis=-1))
    scale = np.full(freqs.shape, np.sqrt(2.0 / n))
    scale[0] = np.sqrt(1.0 / n)
    if n % 2 == 0:
        scale[-1] = np.sqrt(1.0 / n)
    return freqs, spec * scale
