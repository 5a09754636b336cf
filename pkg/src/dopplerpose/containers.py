"""Self-describing binary containers: one UTF-8 JSON header line + raw payload.

Every on-disk artifact (poses, velocities, baseband signals, spectrograms,
model checkpoints) uses the same layout so files stay greppable and the
payload stays mmap-friendly:

    {"version": 1, "kind": "pose", ...}\n
    <raw little-endian payload bytes>

Round-trips are bit-exact: reading a file and writing it back produces the
identical byte string.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

FORMAT_VERSION = 1

_DTYPES = {
    "f32le": np.dtype("<f4"),
    "c64le": np.dtype("<c8"),
}


class ContainerError(ValueError):
    """Raised for malformed container files."""


def write_container(path: str | Path, header: dict, payload: np.ndarray) -> None:
    """Write a header dict plus a raw array payload.

    The header's "dtype" field decides the on-disk element type; the payload
    is cast (C-order) if needed.
    """
    header = dict(header)
    header.setdefault("version", FORMAT_VERSION)
    dtype_tag = header.get("dtype")
    if dtype_tag not in _DTYPES:
        raise ContainerError(f"unsupported dtype tag: {dtype_tag!r}")
    raw = np.ascontiguousarray(payload, dtype=_DTYPES[dtype_tag])
    line = json.dumps(header, ensure_ascii=False, sort_keys=True) + "\n"
    with open(path, "wb") as fh:
        fh.write(line.encode("utf-8"))
        fh.write(raw.tobytes())


def read_container(path: str | Path) -> tuple[dict, np.ndarray]:
    """Read a container, returning (header, flat payload array)."""
    with open(path, "rb") as fh:
        blob = fh.read()
    nl = blob.find(b"\n")
    if nl < 0:
        raise ContainerError(f"{path}: missing header line")
    try:
        header = json.loads(blob[:nl].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ContainerError(f"{path}: bad JSON header: {exc}") from exc
    dtype_tag = header.get("dtype")
    if dtype_tag not in _DTYPES:
        raise ContainerError(f"{path}: unsupported dtype tag {dtype_tag!r}")
    payload = np.frombuffer(blob[nl + 1 :], dtype=_DTYPES[dtype_tag])
    return header, payload


def _require(header: dict, key: str, path) -> object:
    if key not in header:
        raise ContainerError(f"{path}: header missing field {key!r}")
    return header[key]


# ---------------------------------------------------------------------------
# Pose / velocity containers (T x 17 x 3 float32)
# ---------------------------------------------------------------------------

def write_frames(path: str | Path, values: np.ndarray, dt: float, kind: str) -> None:
    """Persist a T x J x 3 array of positions ("pose") or velocities ("velocity")."""
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 3 or values.shape[2] != 3:
        raise ContainerError(f"expected T x J x 3 array, got shape {values.shape}")
    t, joints, _ = values.shape
    header = {
        "version": FORMAT_VERSION,
        "kind": kind,
        "T": int(t),
        "joints": int(joints),
        "dt": float(dt),
        "layout": "T×J×3",
        "dtype": "f32le",
    }
    write_container(path, header, values)


def read_frames(path: str | Path) -> tuple[np.ndarray, float, str]:
    """Load a pose/velocity container, returning (T x J x 3 array, dt, kind)."""
    header, payload = read_container(path)
    t = int(_require(header, "T", path))
    joints = int(_require(header, "joints", path))
    dt = float(_require(header, "dt", path))
    if payload.size != t * joints * 3:
        raise ContainerError(
            f"{path}: payload has {payload.size} values, header promises {t * joints * 3}"
        )
    values = payload.reshape(t, joints, 3).astype(np.float64)
    return values, dt, str(header.get("kind", ""))


# ---------------------------------------------------------------------------
# Baseband signal container (complex64)
# ---------------------------------------------------------------------------

def write_signal(path: str | Path, samples: np.ndarray, sample_rate_hz: float,
                 start_time_s: float = 0.0) -> None:
    samples = np.asarray(samples)
    header = {
        "version": FORMAT_VERSION,
        "kind": "signal",
        "n": int(samples.size),
        "sample_rate_hz": float(sample_rate_hz),
        "start_time_s": float(start_time_s),
        "dtype": "c64le",
    }
    write_container(path, header, samples)


def read_signal(path: str | Path) -> tuple[np.ndarray, float, float]:
    """Load a signal container, returning (complex samples, sample_rate_hz, start_time_s)."""
    header, payload = read_container(path)
    n = int(_require(header, "n", path))
    if payload.size != n:
        raise ContainerError(f"{path}: payload has {payload.size} samples, header promises {n}")
    return (
        payload.astype(np.complex128),
        float(_require(header, "sample_rate_hz", path)),
        float(_require(header, "start_time_s", path)),
    )


# ---------------------------------------------------------------------------
# Spectrogram container (doppler_bins x T float32)
# ---------------------------------------------------------------------------

def write_spectrogram(path: str | Path, values: np.ndarray, doppler_axis: np.ndarray,
                      dt: float) -> None:
    values = np.asarray(values, dtype=np.float64)
    doppler_axis = np.asarray(doppler_axis, dtype=np.float64)
    if values.ndim != 2 or values.shape[0] != doppler_axis.size:
        raise ContainerError(
            f"spectrogram shape {values.shape} does not match axis of {doppler_axis.size} bins"
        )
    header = {
        "version": FORMAT_VERSION,
        "kind": "spectrogram",
        "doppler_bins": int(values.shape[0]),
        "T": int(values.shape[1]),
        "dt": float(dt),
        "doppler_min_hz": float(doppler_axis[0]),
        "doppler_max_hz": float(doppler_axis[-1]),
        "dtype": "f32le",
    }
    write_container(path, header, values)


def read_spectrogram(path: str | Path) -> tuple[np.ndarray, np.ndarray, float]:
    """Load a spectrogram container, returning (values, doppler_axis, dt)."""
    header, payload = read_container(path)
    bins = int(_require(header, "doppler_bins", path))
    t = int(_require(header, "T", path))
    if payload.size != bins * t:
        raise ContainerError(f"{path}: payload has {payload.size} values, expected {bins * t}")
    values = payload.reshape(bins, t).astype(np.float64)
    axis = np.linspace(
        float(_require(header, "doppler_min_hz", path)),
        float(_require(header, "doppler_max_hz", path)),
        bins,
    )
    return values, axis, float(_require(header, "dt", path))
