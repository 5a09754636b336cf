"""Bistatic passive-radar baseband synthesis for a moving point-scatterer body.

The surveillance channel is modeled as the sum of four terms: per-joint
target returns with time-varying bistatic delay (whose carrier-phase rotation
produces the micro-Doppler), single-bounce multipath ghosts via mirrored
joint images, direct-signal interference, and static clutter returns, plus a
white noise floor. The reference channel is a delayed, scaled copy of the
transmitted waveform.

Amplitudes follow a two-leg free-space law weight / (R_tx * R_rx) with a
configurable path-loss exponent; delays are applied by linear fractional-
sample interpolation (error well below one Doppler bin at walking speeds).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import containers
from .motion import N_JOINTS, PoseSequence

C_LIGHT = 299792458.0

# Ranges below this are clamped in the amplitude law so scatterers brushing
# an antenna cannot blow up the synthesis.
_MIN_RANGE = 0.5

# Torso-heavy reflectivity profile over the 17 joints (pelvis..chest order
# from dopplerpose.motion.JOINT_NAMES). Limb weights are kept high enough
# that swing-phase micro-Doppler stays above the processed noise floor.
DEFAULT_JOINT_WEIGHTS = np.array([
    1.00, 0.90, 0.55, 0.60,
    0.55, 0.50, 0.45,
    0.55, 0.50, 0.45,
    0.60, 0.55, 0.50,
    0.60, 0.55, 0.50,
    0.95,
])


@dataclass
class Geometry:
    """Transmitter / receiver placement and carrier for one bistatic scene."""

    tx_pos: np.ndarray
    rx_sur_pos: np.ndarray
    rx_ref_pos: np.ndarray
    carrier_hz: float = 5.8e9

    def __post_init__(self):
        self.tx_pos = np.asarray(self.tx_pos, dtype=np.float64)
        self.rx_sur_pos = np.asarray(self.rx_sur_pos, dtype=np.float64)
        self.rx_ref_pos = np.asarray(self.rx_ref_pos, dtype=np.float64)
        for name, v in (("tx_pos", self.tx_pos), ("rx_sur_pos", self.rx_sur_pos),
                        ("rx_ref_pos", self.rx_ref_pos)):
            if v.shape != (3,) or not np.isfinite(v).all():
                raise ValueError(f"{name} must be a finite 3-vector")
        if not self.carrier_hz > 0:
            raise ValueError("carrier_hz must be positive")


@dataclass
class BasebandSignal:
    """Complex sampled baseband for one channel."""

    samples: np.ndarray
    sample_rate_hz: float
    start_time_s: float = 0.0

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.complex128)
        if not self.sample_rate_hz > 0:
            raise ValueError("sample_rate_hz must be positive")
        if not np.isfinite(self.samples.view(np.float64)).all():
            raise ValueError("signal samples must be finite")

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate_hz

    def times(self) -> np.ndarray:
        return self.start_time_s + np.arange(len(self.samples)) / self.sample_rate_hz

    def save(self, path: str | Path) -> None:
        containers.write_signal(path, self.samples, self.sample_rate_hz, self.start_time_s)

    @classmethod
    def load(cls, path: str | Path) -> "BasebandSignal":
        samples, fs, t0 = containers.read_signal(path)
        return cls(samples, fs, t0)


@dataclass
class ScattererModel:
    """Per-joint reflectivity weights and the bistatic spreading law."""

    joint_weights: np.ndarray = field(default_factory=lambda: DEFAULT_JOINT_WEIGHTS.copy())
    path_loss_exponent: float = 2.0

    def __post_init__(self):
        self.joint_weights = np.asarray(self.joint_weights, dtype=np.float64)
        if self.joint_weights.shape != (N_JOINTS,):
            raise ValueError(f"joint_weights must have shape ({N_JOINTS},)")
        if (self.joint_weights < 0).any():
            raise ValueError("joint weights must be non-negative")


@dataclass
class MirrorPlane:
    """Single-bounce multipath surface: a plane through `point` with `normal`."""

    point: np.ndarray
    normal: np.ndarray
    amplitude: float = 0.0

    def __post_init__(self):
        self.point = np.asarray(self.point, dtype=np.float64)
        self.normal = np.asarray(self.normal, dtype=np.float64)
        n = np.linalg.norm(self.normal)
        if n < 1e-12:
            raise ValueError("mirror plane normal must be nonzero")
        self.normal = self.normal / n
        if self.amplitude < 0:
            raise ValueError("multipath amplitude must be non-negative")

    def reflect(self, points: np.ndarray) -> np.ndarray:
        d = (points - self.point) @ self.normal
        return points - 2.0 * d[..., None] * self.normal


@dataclass
class Clutter:
    """One static point reflector."""

    position: np.ndarray
    amplitude: float

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=np.float64)
        if self.amplitude < 0:
            raise ValueError("clutter amplitude must be non-negative")


@dataclass
class InterferenceConfig:
    """Everything in the surveillance channel that is not a live target."""

    dsi_amplitude: float = 0.0
    clutter: list = field(default_factory=list)
    multipath: list = field(default_factory=list)
    noise_floor: float = 0.0
    noise_seed: int = 0

    def __post_init__(self):
        if self.dsi_amplitude < 0 or self.noise_floor < 0:
            raise ValueError("interference amplitudes must be non-negative")


def _path_amp(ranges: np.ndarray, exponent: float) -> np.ndarray:
    return np.maximum(ranges, _MIN_RANGE) ** (-exponent / 2.0)


def _delayed(u: BasebandSignal, query_times: np.ndarray) -> np.ndarray:
    """Sample the waveform at arbitrary times by linear interpolation (0 outside)."""
    grid = u.times()
    re = np.interp(query_times, grid, u.samples.real, left=0.0, right=0.0)
    im = np.interp(query_times, grid, u.samples.imag, left=0.0, right=0.0)
    return re + 1j * im


def generate_waveform(bandwidth_hz: float, duration_s: float, sample_rate_hz: float,
                      seed: int, *, hop_samples: int | None = None) -> BasebandSignal:
    """Pseudorandom constant-modulus waveform, flat over +-bandwidth/2.

    Built as phase-continuous random frequency hops: the instantaneous
    frequency is redrawn uniformly inside the band every `hop_samples`
    samples, which keeps |u(t)| = 1 exactly while filling the band. The
    default hop length keeps each burst much narrower than the band.

    Delay sidelobes of the self-ambiguity are noise-level (~1/sqrt(N)) only
    for near-full-band waveforms; at bandwidth << sample rate the first lags
    follow the sinc autocorrelation of any band-limited signal.
    """
    if not 0 < bandwidth_hz <= sample_rate_hz:
        raise ValueError(
            f"bandwidth ({bandwidth_hz:g} Hz) must be positive and not exceed the "
            f"sample rate ({sample_rate_hz:g} Hz)")
    if not duration_s > 0:
        raise ValueError("duration must be positive")
    if hop_samples is None:
        hop_samples = max(1, int(round(8.0 * sample_rate_hz / bandwidth_hz)))
    n = int(round(duration_s * sample_rate_hz))
    rng = np.random.default_rng(seed)
    n_hops = n // hop_samples + 1
    freqs = rng.uniform(-bandwidth_hz / 2.0, bandwidth_hz / 2.0, size=n_hops)
    f_inst = np.repeat(freqs, hop_samples)[:n]
    phase = 2.0 * np.pi * np.cumsum(f_inst) / sample_rate_hz
    phase += rng.uniform(0.0, 2.0 * np.pi)
    return BasebandSignal(np.exp(1j * phase), sample_rate_hz)


def synthesize_reference(u: BasebandSignal, g: Geometry) -> BasebandSignal:
    """Reference channel: path-loss-scaled copy of u delayed by the tx->ref leg."""
    r = np.linalg.norm(g.tx_pos - g.rx_ref_pos)
    tau = r / C_LIGHT
    amp = _path_amp(np.array([r]), 2.0)[0] if r > 0 else 1.0
    phase = np.exp(-2j * np.pi * g.carrier_hz * tau)
    samples = amp * phase * _delayed(u, u.times() - tau)
    return BasebandSignal(samples, u.sample_rate_hz, u.start_time_s)


def _target_returns(u: BasebandSignal, coarse_t: np.ndarray, positions: np.ndarray,
                    weights: np.ndarray, exponent: float, g: Geometry,
                    amp_scale: float = 1.0) -> np.ndarray:
    """Sum of delayed, phase-rotated returns for (T_coarse, J, 3) joint tracks.

    Delay and amplitude are evaluated on the coarse grid and linearly
    interpolated to sample times; body accelerations bound the resulting
    carrier-phase error far below one Doppler bin.
    """
    times = u.times()
    total = np.zeros(len(times), dtype=np.complex128)
    for j in range(positions.shape[1]):
        w = weights[j] * amp_scale
        if w == 0.0:
            continue
        xj = positions[:, j, :]
        r1 = np.linalg.norm(xj - g.tx_pos, axis=1)
        r2 = np.linalg.norm(xj - g.rx_sur_pos, axis=1)
        tau = np.interp(times, coarse_t, (r1 + r2) / C_LIGHT)
        amp = np.interp(times, coarse_t,
                        w * _path_amp(r1, exponent) * _path_amp(r2, exponent))
        total += amp * _delayed(u, times - tau) * np.exp(-2j * np.pi * g.carrier_hz * tau)
    return total


_COARSE_RATE_HZ = 500.0


def _coarse_grid(u: BasebandSignal) -> np.ndarray:
    n = min(len(u), max(2, int(np.ceil(u.duration * _COARSE_RATE_HZ)) + 1))
    return np.linspace(u.start_time_s, u.start_time_s + u.duration, n)


def _joint_tracks(p: PoseSequence, times: np.ndarray) -> np.ndarray:
    """Linear interpolation of the pose onto the given times (ends clamped)."""
    frame_times = np.arange(len(p)) * p.dt
    out = np.empty((len(times), N_JOINTS, 3))
    for j in range(N_JOINTS):
        for a in range(3):
            out[:, j, a] = np.interp(times, frame_times, p.positions[:, j, a])
    return out


def synthesize_surveillance(u: BasebandSignal, p: PoseSequence, sc: ScattererModel,
                            g: Geometry, ic: InterferenceConfig) -> BasebandSignal:
    """Surveillance channel: targets + multipath + DSI + clutter + noise."""
    if u.start_time_s + u.duration > len(p) * p.dt + 1e-9:
        raise ValueError(
            f"pose covers {len(p) * p.dt:.3f} s but the signal extends to "
            f"{u.start_time_s + u.duration:.3f} s")
    times = u.times()
    coarse_t = _coarse_grid(u)
    tracks = _joint_tracks(p, coarse_t)

    total = _target_returns(u, coarse_t, tracks, sc.joint_weights,
                            sc.path_loss_exponent, g)

    for plane in ic.multipath:
        mirrored = plane.reflect(tracks.reshape(-1, 3)).reshape(tracks.shape)
        total += _target_returns(u, coarse_t, mirrored, sc.joint_weights,
                                 sc.path_loss_exponent, g, amp_scale=plane.amplitude)

    if ic.dsi_amplitude > 0:
        tau = np.linalg.norm(g.tx_pos - g.rx_sur_pos) / C_LIGHT
        total += (ic.dsi_amplitude * np.exp(-2j * np.pi * g.carrier_hz * tau)
                  * _delayed(u, times - tau))

    for cl in ic.clutter:
        r1 = np.linalg.norm(cl.position - g.tx_pos)
        r2 = np.linalg.norm(cl.position - g.rx_sur_pos)
        tau = (r1 + r2) / C_LIGHT
        amp = cl.amplitude * float(_path_amp(np.array([r1]), sc.path_loss_exponent)[0]
                                   * _path_amp(np.array([r2]), sc.path_loss_exponent)[0])
        total += amp * np.exp(-2j * np.pi * g.carrier_hz * tau) * _delayed(u, times - tau)

    if ic.noise_floor > 0:
        rng = np.random.default_rng(ic.noise_seed)
        scale = ic.noise_floor / np.sqrt(2.0)
        total += rng.normal(scale=scale, size=len(times)) \
            + 1j * rng.normal(scale=scale, size=len(times))

    return BasebandSignal(total, u.sample_rate_hz, u.start_time_s)


def bistatic_doppler(g: Geometry, x: np.ndarray, v: np.ndarray) -> float:
    """Instantaneous Doppler of a scatterer at x moving with velocity v.

    f = -(carrier / c) * d/dt (|tx - x| + |x - rx_sur|); a shrinking bistatic
    path gives positive Doppler.
    """
    x = np.asarray(x, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    d_tx = x - g.tx_pos
    d_rx = x - g.rx_sur_pos
    r1 = np.linalg.norm(d_tx)
    r2 = np.linalg.norm(d_rx)
    if r1 < 1e-9 or r2 < 1e-9:
        raise ValueError("scatterer coincides with an antenna: Doppler is singular")
    rate = d_tx @ v / r1 + d_rx @ v / r2
    return float(-(g.carrier_hz / C_LIGHT) * rate)
