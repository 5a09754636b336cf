"""Cross-ambiguity maps, CLEAN cancellation of the direct signal, and
micro-Doppler spectrogram assembly.

The CAF is evaluated with the FFT-over-time method: for each delay bin the
lag product sur(t) * conj(ref(t - tau)) is formed, then one FFT over time
gives every Doppler bin at once. The result is identical (to rounding) to
the direct double sum over samples and Doppler frequencies.

Range resolution at WiFi bandwidths cannot separate body parts, so the
spectrogram step collapses each map's delay axis (inside a configurable
window) and keeps Doppler only, one column per coherent processing interval.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import containers
from .wavesim import BasebandSignal


@dataclass
class CafMap:
    """Delay x Doppler complex ambiguity surface for one CPI."""

    grid: np.ndarray          # (delay_bins, doppler_bins) complex
    delay_axis: np.ndarray    # seconds, strictly increasing
    doppler_axis: np.ndarray  # hertz, strictly increasing
    cpi_s: float

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=np.complex128)
        self.delay_axis = np.asarray(self.delay_axis, dtype=np.float64)
        self.doppler_axis = np.asarray(self.doppler_axis, dtype=np.float64)
        if self.grid.shape != (self.delay_axis.size, self.doppler_axis.size):
            raise ValueError(
                f"grid shape {self.grid.shape} does not match axes "
                f"({self.delay_axis.size}, {self.doppler_axis.size})")
        for name, ax in (("delay_axis", self.delay_axis), ("doppler_axis", self.doppler_axis)):
            if ax.size > 1 and not (np.diff(ax) > 0).all():
                raise ValueError(f"{name} must be strictly increasing")

    def peak_location(self) -> tuple[int, int]:
        """Indices (delay_bin, doppler_bin) of the largest magnitude cell."""
        return np.unravel_index(np.argmax(np.abs(self.grid)), self.grid.shape)


@dataclass
class Spectrogram:
    """Doppler x time magnitude map, max-normalized to [0, 1]."""

    values: np.ndarray        # (doppler_bins, T) non-negative
    doppler_axis: np.ndarray  # hertz
    dt: float                 # seconds per column

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        self.doppler_axis = np.asarray(self.doppler_axis, dtype=np.float64)
        if self.values.ndim != 2 or self.values.shape[0] != self.doppler_axis.size:
            raise ValueError(
                f"values shape {self.values.shape} does not match "
                f"{self.doppler_axis.size} Doppler bins")
        if (self.values < 0).any():
            raise ValueError("spectrogram values must be non-negative")
        if not np.allclose(self.doppler_axis, -self.doppler_axis[::-1], atol=1e-6):
            raise ValueError("doppler_axis must be symmetric around 0")
        if not self.dt > 0:
            raise ValueError("dt must be positive")

    @property
    def n_frames(self) -> int:
        return self.values.shape[1]

    def save(self, path: str | Path) -> None:
        containers.write_spectrogram(path, self.values, self.doppler_axis, self.dt)

    @classmethod
    def load(cls, path: str | Path) -> "Spectrogram":
        values, axis, dt = containers.read_spectrogram(path)
        return cls(values, axis, dt)


def _check_pair(sur: BasebandSignal, ref: BasebandSignal) -> None:
    if sur.sample_rate_hz != ref.sample_rate_hz:
        raise ValueError(
            f"sample rates differ: {sur.sample_rate_hz:g} vs {ref.sample_rate_hz:g}")
    if len(sur) != len(ref):
        raise ValueError(f"signal lengths differ: {len(sur)} vs {len(ref)}")


def compute_caf(sur: BasebandSignal, ref: BasebandSignal, delay_bins: int,
                doppler_span_hz: float | tuple[float, float],
                *, doppler_oversample: int = 1) -> CafMap:
    """CAF(tau, f) = sum_t sur(t) conj(ref(t - tau)) exp(-j 2 pi f t).

    Delays are the first `delay_bins` non-negative sample lags; Doppler bins
    are the FFT frequencies inside `doppler_span_hz` (a half-span scalar or a
    (min, max) pair). `doppler_oversample` zero-pads the time FFT for finer
    Doppler spacing; every returned value still equals the direct sum at its
    grid point.
    """
    _check_pair(sur, ref)
    n = len(sur)
    if not 1 <= delay_bins <= n:
        raise ValueError(f"delay_bins must be in [1, {n}], got {delay_bins}")
    if doppler_oversample < 1:
        raise ValueError("doppler_oversample must be >= 1")
    fs = sur.sample_rate_hz
    if np.isscalar(doppler_span_hz):
        f_lo, f_hi = -float(doppler_span_hz), float(doppler_span_hz)
    else:
        f_lo, f_hi = map(float, doppler_span_hz)
    if not f_lo < f_hi:
        raise ValueError("doppler span must be a non-empty range")

    lags = np.zeros((delay_bins, n), dtype=np.complex128)
    ref_conj = np.conj(ref.samples)
    for k in range(delay_bins):
        lags[k, k:] = sur.samples[k:] * ref_conj[: n - k]

    n_fft = n * doppler_oversample
    spectrum = np.fft.fft(lags, n=n_fft, axis=1)
    freqs = np.fft.fftfreq(n_fft, d=1.0 / fs)
    keep = np.where((freqs >= f_lo) & (freqs <= f_hi))[0]
    order = keep[np.argsort(freqs[keep])]

    return CafMap(
        grid=spectrum[:, order],
        delay_axis=np.arange(delay_bins) / fs,
        doppler_axis=freqs[order],
        cpi_s=n / fs,
    )


def self_caf(ref: BasebandSignal, delay_bins: int,
             doppler_span_hz: float | tuple[float, float],
             *, doppler_oversample: int = 1) -> CafMap:
    """Ambiguity of the reference channel against itself (the CLEAN template)."""
    return compute_caf(ref, ref, delay_bins, doppler_span_hz,
                       doppler_oversample=doppler_oversample)


def clean_dsi(caf: CafMap, self_map: CafMap, iterations: int = 1) -> CafMap:
    """Subtract scaled self-ambiguity templates to cancel zero-Doppler ridges.

    Each iteration locates the strongest remaining cell in the zero-Doppler
    column, scales the unit-peak self template by the complex CAF value
    there, aligns the template's peak delay to that cell and subtracts. With
    a single static path this cancels the DSI ridge exactly.
    """
    if caf.grid.shape != self_map.grid.shape \
            or not np.allclose(caf.delay_axis, self_map.delay_axis) \
            or not np.allclose(caf.doppler_axis, self_map.doppler_axis):
        raise ValueError("CAF and self-CAF must share identical axes")
    if iterations < 0:
        raise ValueError("iterations must be >= 0")

    ks, ms = self_map.peak_location()
    peak = self_map.grid[ks, ms]
    if peak == 0:
        return CafMap(caf.grid.copy(), caf.delay_axis, caf.doppler_axis, caf.cpi_s)
    template = self_map.grid / peak

    grid = caf.grid.copy()
    m0 = int(np.argmin(np.abs(caf.doppler_axis)))
    n_delay = grid.shape[0]
    for _ in range(iterations):
        k_star = int(np.argmax(np.abs(grid[:, m0])))
        alpha = grid[k_star, m0]
        shift = k_star - ks
        shifted = np.zeros_like(template)
        if shift >= 0:
            shifted[shift:] = template[: n_delay - shift]
        else:
            shifted[:shift] = template[-shift:]
        grid -= alpha * shifted
    return CafMap(grid, caf.delay_axis, caf.doppler_axis, caf.cpi_s)


def assemble_spectrogram(cafs, delay_window: tuple[float, float] | None = None) -> Spectrogram:
    """Collapse each CAF to one Doppler column and concatenate along time.

    Magnitudes are summed over the delay bins inside `delay_window` (seconds;
    default: all bins, reflecting the lack of usable range resolution), and
    the assembled map is max-normalized to [0, 1].
    """
    cafs = list(cafs)
    if not cafs:
        raise ValueError("need at least one CAF map")
    first = cafs[0]
    for c in cafs[1:]:
        if not (np.allclose(c.delay_axis, first.delay_axis)
                and np.allclose(c.doppler_axis, first.doppler_axis)):
            raise ValueError("all CAF maps must share the same axes")
    if delay_window is None:
        mask = np.ones(first.delay_axis.size, dtype=bool)
    else:
        lo, hi = delay_window
        mask = (first.delay_axis >= lo) & (first.delay_axis <= hi)
        if not mask.any():
            raise ValueError("delay window selects no bins")

    columns = [np.abs(c.grid[mask, :]).sum(axis=0) for c in cafs]
    values = np.stack(columns, axis=1)
    m = values.max()
    if m > 0:
        values = values / m
    return Spectrogram(values, first.doppler_axis, first.cpi_s)


def spectrogram_pipeline(sur: BasebandSignal, ref: BasebandSignal, *,
                         cpi_s: float, delay_bins: int,
                         doppler_span_hz: float | tuple[float, float],
                         doppler_oversample: int = 1,
                         clean_iterations: int = 0,
                         delay_window: tuple[float, float] | None = None) -> Spectrogram:
    """Slice a long capture into CPIs and build the micro-Doppler spectrogram."""
    _check_pair(sur, ref)
    fs = sur.sample_rate_hz
    n_cpi = int(round(cpi_s * fs))
    if n_cpi < 2:
        raise ValueError("CPI too short for this sample rate")
    n_frames = len(sur) // n_cpi
    if n_frames < 1:
        raise ValueError("signal shorter than one CPI")

    maps = []
    for i in range(n_frames):
        sl = slice(i * n_cpi, (i + 1) * n_cpi)
        sur_i = BasebandSignal(sur.samples[sl], fs)
        ref_i = BasebandSignal(ref.samples[sl], fs)
        m = compute_caf(sur_i, ref_i, delay_bins, doppler_span_hz,
                        doppler_oversample=doppler_oversample)
        if clean_iterations > 0:
            tmpl = self_caf(ref_i, delay_bins, doppler_span_hz,
                            doppler_oversample=doppler_oversample)
            m = clean_dsi(m, tmpl, iterations=clean_iterations)
        maps.append(m)
    return assemble_spectrogram(maps, delay_window=delay_window)
