"""End-to-end experiment harness: dataset builds, metric tables, profiling.

A dataset is a directory of containers plus a JSON manifest. For every
generated activity it holds the ground-truth pose and velocity sequences and
three spectrogram variants: "S" (clean synthesis, no interference), "M"
(full interference, CLEAN-processed) and "D" (denoised M). The manifest also
freezes the train/test split so training and evaluation always agree.

Metrics follow the root-relative convention: poses are translated so the
pelvis matches ground truth per frame (and velocities get the root velocity
subtracted), which pins joint 1 error to zero; absolute-frame variants are
emitted alongside. Velocity errors are reported in mm/frame via the
(m/s) * dt * 1000 conversion; positions in mm.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import containers
from .caf import Spectrogram, spectrogram_pipeline
from .denoise import DenoiseParams, denoise
from .motion import (
    ActivityKind,
    N_JOINTS,
    PoseSequence,
    VelocitySequence,
    differentiate,
    generate_activity,
    t_pose,
)
from .poseopt import OptConfig, OptModel, opt_train, optimize_initial_pose, reconstruct_long_term
from .velest import TrainConfig, VelModel, save_history_csv, vel_forward, vel_train
from .wavesim import (
    Clutter,
    Geometry,
    InterferenceConfig,
    MirrorPlane,
    ScattererModel,
    generate_waveform,
    synthesize_reference,
    synthesize_surveillance,
)

SCHEMA_VERSION = 1

_KIND_BY_VALUE = {k.value: k for k in ActivityKind}


class ConfigError(ValueError):
    """Malformed experiment configuration; the message names the field."""


def _get(d: dict, path: str, typ, default=None, required=False):
    node = d
    parts = path.split(".")
    for p in parts[:-1]:
        node = node.get(p, {}) if isinstance(node, dict) else {}
    if not isinstance(node, dict) or parts[-1] not in node:
        if required:
            raise ConfigError(f"missing required config field: {path}")
        return default
    val = node[parts[-1]]
    try:
        if typ is bool:
            if not isinstance(val, bool):
                raise TypeError
            return val
        return typ(val)
    except (TypeError, ValueError):
        raise ConfigError(f"config field {path}: expected {typ.__name__}, got {val!r}")


@dataclass
class ExperimentConfig:
    """Parsed experiment settings; see configs/ for the JSON shape."""

    seed: int
    geometry: Geometry
    bandwidth_hz: float
    sample_rate_hz: float
    scatterer: ScattererModel
    interference: InterferenceConfig
    cpi_s: float
    delay_bins: int
    doppler_span_hz: float
    doppler_oversample: int
    clean_iterations: int
    denoise_params: DenoiseParams
    n_activities: int
    duration_s: float
    dt: float
    kinds: list
    start_jitter_m: float
    train_fraction: float
    vel_train: TrainConfig
    opt_train_cfg: TrainConfig
    opt_pairs: int
    opt_window: int
    opt_config: OptConfig
    raw: dict = field(default_factory=dict, repr=False)


def parse_config(data: dict) -> ExperimentConfig:
    if _get(data, "schema_version", int, required=True) != SCHEMA_VERSION:
        raise ConfigError(f"config field schema_version: expected {SCHEMA_VERSION}")
    try:
        geometry = Geometry(
            tx_pos=data["geometry"]["tx_pos"],
            rx_sur_pos=data["geometry"]["rx_sur_pos"],
            rx_ref_pos=data["geometry"]["rx_ref_pos"],
            carrier_hz=_get(data, "geometry.carrier_hz", float, 5.8e9),
        )
    except KeyError as exc:
        raise ConfigError(f"missing required config field: geometry.{exc.args[0]}")
    except ValueError as exc:
        raise ConfigError(f"config field geometry: {exc}")

    clutter = [Clutter(c["position"], float(c["amplitude"]))
               for c in data.get("interference", {}).get("clutter", [])]
    multipath = [MirrorPlane(m["point"], m["normal"], float(m["amplitude"]))
                 for m in data.get("interference", {}).get("multipath", [])]
    interference = InterferenceConfig(
        dsi_amplitude=_get(data, "interference.dsi_amplitude", float, 0.0),
        clutter=clutter,
        multipath=multipath,
        noise_floor=_get(data, "interference.noise_floor", float, 0.0),
    )

    kinds_raw = data.get("dataset", {}).get("kinds", [k.value for k in ActivityKind])
    kinds = []
    for k in kinds_raw:
        if k not in _KIND_BY_VALUE:
            raise ConfigError(f"config field dataset.kinds: unknown activity {k!r}")
        kinds.append(_KIND_BY_VALUE[k])

    method = _get(data, "denoise.method", str, "threshold")
    try:
        den = DenoiseParams(
            method=method,
            quantile=_get(data, "denoise.quantile", float, 0.6),
            slope=_get(data, "denoise.slope", float, 0.0),
        )
    except ValueError as exc:
        raise ConfigError(f"config field denoise: {exc}")

    train_fraction = _get(data, "dataset.train_fraction", float, 0.23)
    if not 0.0 < train_fraction < 1.0:
        raise ConfigError("config field dataset.train_fraction: must be in (0, 1)")

    vel_cfg = TrainConfig(
        learning_rate=_get(data, "training.vel.learning_rate", float, 0.001),
        batch_size=_get(data, "training.vel.batch_size", int, 64),
        epochs=_get(data, "training.vel.epochs", int, 60),
        seed=_get(data, "seed", int, 0),
        val_fraction=_get(data, "training.vel.val_fraction", float, 0.1),
    )
    opt_cfg = TrainConfig(
        learning_rate=_get(data, "training.opt.learning_rate", float, 0.001),
        batch_size=_get(data, "training.opt.batch_size", int, 128),
        epochs=_get(data, "training.opt.epochs", int, 40),
        seed=_get(data, "seed", int, 0) + 1,
        val_fraction=_get(data, "training.opt.val_fraction", float, 0.1),
    )

    return ExperimentConfig(
        seed=_get(data, "seed", int, 0),
        geometry=geometry,
        bandwidth_hz=_get(data, "waveform.bandwidth_hz", float, 8e3),
        sample_rate_hz=_get(data, "waveform.sample_rate_hz", float, 16e3),
        scatterer=ScattererModel(
            path_loss_exponent=_get(data, "scatterer.path_loss_exponent", float, 2.0)),
        interference=interference,
        cpi_s=_get(data, "processing.cpi_s", float, 0.1),
        delay_bins=_get(data, "processing.delay_bins", int, 1),
        doppler_span_hz=_get(data, "processing.doppler_span_hz", float, 100.0),
        doppler_oversample=_get(data, "processing.doppler_oversample", int, 4),
        clean_iterations=_get(data, "processing.clean_iterations", int, 2),
        denoise_params=den,
        n_activities=_get(data, "dataset.n_activities", int, 200),
        duration_s=_get(data, "dataset.duration_s", float, 5.0),
        dt=_get(data, "dataset.dt", float, 0.1),
        kinds=kinds,
        start_jitter_m=_get(data, "dataset.start_jitter_m", float, 0.25),
        train_fraction=train_fraction,
        vel_train=vel_cfg,
        opt_train_cfg=opt_cfg,
        opt_pairs=_get(data, "training.opt.n_pairs", int, 1024),
        opt_window=_get(data, "training.opt.window", int, 30),
        opt_config=OptConfig(
            optr=_get(data, "optimization.optr", float, 0.01),
            max_epochs=_get(data, "optimization.max_epochs", int, 50),
            tol=_get(data, "optimization.tol", float, 1e-4),
            period=_get(data, "optimization.period", int, 50),
        ),
        raw=data,
    )


def apply_overrides(data: dict, overrides: list[str]) -> dict:
    """Apply `dotted.key=value` CLI overrides onto the raw config dict."""
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        key, value = item.split("=", 1)
        try:
            parsed = json.loads(value)
        except json.JSONDecodeError:
            parsed = value
        node = data
        parts = key.split(".")
        for p in parts[:-1]:
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override {key!r}: {p} is not an object")
        node[parts[-1]] = parsed
    return data


def load_config(path: str | Path, overrides: list[str] | None = None) -> ExperimentConfig:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path}: invalid JSON: {exc}")
    if overrides:
        data = apply_overrides(data, overrides)
    return parse_config(data)


# ---------------------------------------------------------------------------
# Dataset build
# ---------------------------------------------------------------------------

def simulate_activity(cfg: ExperimentConfig, kind: ActivityKind, seed: int,
                      start_xy=(0.0, 0.0), duration: float | None = None,
                      pose: PoseSequence | None = None):
    """Render one activity to its (pose, velocity, S, M, D) tuple."""
    duration = duration if duration is not None else cfg.duration_s
    if pose is None:
        pose = generate_activity(kind, duration, seed, dt=cfg.dt, start_xy=start_xy)
    vel = differentiate(pose)
    sig_duration = len(pose) * cfg.dt
    u = generate_waveform(cfg.bandwidth_hz, sig_duration, cfg.sample_rate_hz, seed=seed)
    ref = synthesize_reference(u, cfg.geometry)

    clean_ic = InterferenceConfig()
    noisy_ic = InterferenceConfig(
        dsi_amplitude=cfg.interference.dsi_amplitude,
        clutter=cfg.interference.clutter,
        multipath=cfg.interference.multipath,
        noise_floor=cfg.interference.noise_floor,
        noise_seed=seed + 1,
    )
    pipe = dict(cpi_s=cfg.cpi_s, delay_bins=cfg.delay_bins,
                doppler_span_hz=cfg.doppler_span_hz,
                doppler_oversample=cfg.doppler_oversample)
    sur_clean = synthesize_surveillance(u, pose, cfg.scatterer, cfg.geometry, clean_ic)
    s_spec = spectrogram_pipeline(sur_clean, ref, clean_iterations=0, **pipe)
    sur_noisy = synthesize_surveillance(u, pose, cfg.scatterer, cfg.geometry, noisy_ic)
    m_spec = spectrogram_pipeline(sur_noisy, ref, clean_iterations=cfg.clean_iterations,
                                  **pipe)
    d_spec = denoise(m_spec, cfg.denoise_params)
    return pose, vel, s_spec, m_spec, d_spec


def _stratified_split(kinds_per_entry: list, fraction: float, seed: int):
    rng = np.random.default_rng(seed)
    train = []
    by_kind = {}
    for i, k in enumerate(kinds_per_entry):
        by_kind.setdefault(k, []).append(i)
    for k in sorted(by_kind, key=lambda a: a.value):
        idx = np.array(by_kind[k])
        rng.shuffle(idx)
        n_train = max(1, int(round(fraction * len(idx))))
        train.extend(int(i) for i in idx[:n_train])
    train = sorted(train)
    test = sorted(set(range(len(kinds_per_entry))) - set(train))
    return train, test


def build_dataset(cfg: ExperimentConfig, out_dir: str | Path) -> dict:
    """Generate and persist the full S/M/D dataset; returns the manifest."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write_probe"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise RuntimeError(f"output directory {out} is not writable: {exc}")

    entries = []
    kinds_per_entry = []
    for i in range(cfg.n_activities):
        kind = cfg.kinds[i % len(cfg.kinds)]
        act_seed = cfg.seed * 1_000_003 + i
        rng = np.random.default_rng(act_seed)
        start_xy = rng.uniform(-cfg.start_jitter_m, cfg.start_jitter_m, size=2)
        pose, vel, s_spec, m_spec, d_spec = simulate_activity(
            cfg, kind, act_seed, start_xy=start_xy)
        stem = f"act_{i:04d}"
        files = {
            "pose": f"{stem}_pose.dpc",
            "velocity": f"{stem}_vel.dpc",
            "spec_s": f"{stem}_spec_s.dpc",
            "spec_m": f"{stem}_spec_m.dpc",
            "spec_d": f"{stem}_spec_d.dpc",
        }
        pose.save(out / files["pose"])
        vel.save(out / files["velocity"])
        s_spec.save(out / files["spec_s"])
        m_spec.save(out / files["spec_m"])
        d_spec.save(out / files["spec_d"])
        entries.append({
            "index": i, "kind": kind.value, "seed": act_seed,
            "T": len(pose), "dt": cfg.dt, "files": files,
        })
        kinds_per_entry.append(kind)

    train_idx, test_idx = _stratified_split(kinds_per_entry, cfg.train_fraction, cfg.seed)
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "seed": cfg.seed,
        "doppler_bins": int(entries and Spectrogram.load(
            out / entries[0]["files"]["spec_s"]).values.shape[0] or 0),
        "entries": entries,
        "split": {"train": train_idx, "test": test_idx},
    }
    (out / "manifest.json").write_text(
        json.dumps(manifest, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    return manifest


def load_manifest(dataset_dir: str | Path) -> dict:
    path = Path(dataset_dir) / "manifest.json"
    if not path.exists():
        raise FileNotFoundError(f"no manifest.json in {dataset_dir}")
    return json.loads(path.read_text(encoding="utf-8"))


def load_entry(dataset_dir: str | Path, entry: dict):
    """Load one manifest entry: (pose, velocity, spec_s, spec_m, spec_d)."""
    base = Path(dataset_dir)
    f = entry["files"]
    return (PoseSequence.load(base / f["pose"]),
            VelocitySequence.load(base / f["velocity"]),
            Spectrogram.load(base / f["spec_s"]),
            Spectrogram.load(base / f["spec_m"]),
            Spectrogram.load(base / f["spec_d"]))


# ---------------------------------------------------------------------------
# Training entry points
# ---------------------------------------------------------------------------

def train_velocity_model(cfg: ExperimentConfig, dataset_dir: str | Path,
                         checkpoint_path: str | Path,
                         history_path: str | Path | None = None) -> VelModel:
    """Train the velocity net on the train split's clean (S) spectrograms."""
    manifest = load_manifest(dataset_dir)
    base = Path(dataset_dir)
    data = []
    for i in manifest["split"]["train"]:
        entry = manifest["entries"][i]
        spec = Spectrogram.load(base / entry["files"]["spec_s"])
        vel = VelocitySequence.load(base / entry["files"]["velocity"])
        data.append((spec, vel))
    model = VelModel(manifest["doppler_bins"], seed=cfg.vel_train.seed)
    history = vel_train(model, data, cfg.vel_train)
    model.save(checkpoint_path, meta={"epochs": cfg.vel_train.epochs,
                                      "final_train_loss": history[-1]["train_loss"]
                                      if history else None})
    if history_path is not None:
        save_history_csv(history_path, history)
    return model


def train_opt_model(cfg: ExperimentConfig, dataset_dir: str | Path,
                    checkpoint_path: str | Path,
                    history_path: str | Path | None = None) -> OptModel:
    """Train the optimization-vector net on the train split's mocap poses."""
    manifest = load_manifest(dataset_dir)
    base = Path(dataset_dir)
    mocap = [PoseSequence.load(base / manifest["entries"][i]["files"]["pose"])
             for i in manifest["split"]["train"]]
    model = OptModel(seed=cfg.opt_train_cfg.seed)
    history = opt_train(model, mocap, cfg.opt_train_cfg, n_pairs=cfg.opt_pairs,
                        window=cfg.opt_window)
    model.save(checkpoint_path, meta={"epochs": cfg.opt_train_cfg.epochs,
                                      "final_train_loss": history[-1]["train_loss"]
                                      if history else None})
    if history_path is not None:
        save_history_csv(history_path, history)
    return model


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------

def root_relative_positions(positions: np.ndarray, truth: np.ndarray) -> np.ndarray:
    """Translate each frame so the pelvis coincides exactly with ground truth."""
    out = positions + (truth[:, :1, :] - positions[:, :1, :])
    out[:, 0, :] = truth[:, 0, :]
    return out


def velocity_mae_mm_frame(pred: VelocitySequence, truth: VelocitySequence,
                          root_relative: bool = True) -> np.ndarray:
    """Per-joint velocity MAE in mm/frame (L1 over the 3 components)."""
    p, t = pred.values, truth.values
    if root_relative:
        p = p - p[:, :1, :]
        t = t - t[:, :1, :]
    per_joint = np.abs(p - t).sum(axis=2).mean(axis=0)  # m/s
    return per_joint * truth.dt * 1000.0


def position_mae_mm(pred: PoseSequence, truth: PoseSequence,
                    root_relative: bool = True) -> np.ndarray:
    """Per-joint mean Euclidean position error in mm."""
    p = pred.positions
    if root_relative:
        p = root_relative_positions(p, truth.positions)
    err = np.linalg.norm(p - truth.positions, axis=2).mean(axis=0)
    return err * 1000.0


@dataclass
class MetricsReport:
    kinds: list
    vel_mae: dict        # variant -> kind -> list of 17 per-joint mm/frame
    pos_mae: dict        # variant -> kind -> list of 17 per-joint mm
    vel_mae_abs: dict
    pos_mae_abs: dict
    overall_vel: dict    # variant -> scalar mm/frame
    overall_pos: dict    # variant -> scalar mm
    opt_traces: list = field(default_factory=list)
    drift: dict = field(default_factory=dict)
    runtime: dict = field(default_factory=dict)


def evaluate(cfg: ExperimentConfig, dataset_dir: str | Path, vel_model: VelModel,
             opt_model: OptModel, *, include_pose: bool = True,
             variants=("M", "D")) -> MetricsReport:
    """Velocity and pose error tables over the manifest's test split."""
    manifest = load_manifest(dataset_dir)
    test_idx = manifest["split"]["test"]
    if not test_idx:
        raise ValueError("dataset has no test entries")

    kinds = sorted({manifest["entries"][i]["kind"] for i in test_idx})
    acc_vel = {v: {k: [] for k in kinds} for v in variants}
    acc_pos = {v: {k: [] for k in kinds} for v in variants}
    acc_vel_abs = {v: {k: [] for k in kinds} for v in variants}
    acc_pos_abs = {v: {k: [] for k in kinds} for v in variants}

    for i in test_idx:
        entry = manifest["entries"][i]
        pose, vel, s_spec, m_spec, d_spec = load_entry(dataset_dir, entry)
        specs = {"S": s_spec, "M": m_spec, "D": d_spec}
        for variant in variants:
            est = vel_forward(vel_model, specs[variant])
            acc_vel[variant][entry["kind"]].append(velocity_mae_mm_frame(est, vel))
            acc_vel_abs[variant][entry["kind"]].append(
                velocity_mae_mm_frame(est, vel, root_relative=False))
            if include_pose:
                p0, _ = optimize_initial_pose(opt_model, t_pose(), est, cfg.opt_config)
                rec = reconstruct_long_term(opt_model, p0, est, cfg.opt_config)
                acc_pos[variant][entry["kind"]].append(position_mae_mm(rec, pose))
                acc_pos_abs[variant][entry["kind"]].append(
                    position_mae_mm(rec, pose, root_relative=False))

    def reduce(acc):
        out = {}
        for variant, by_kind in acc.items():
            out[variant] = {}
            rows = []
            for k in kinds:
                if by_kind[k]:
                    per_joint = np.mean(by_kind[k], axis=0)
                    out[variant][k] = per_joint.tolist()
                    rows.extend(by_kind[k])
            out[variant]["overall"] = (np.mean(rows, axis=0).tolist() if rows
                                       else [0.0] * N_JOINTS)
        return out

    vel_tbl, pos_tbl = reduce(acc_vel), reduce(acc_pos)
    vel_abs_tbl, pos_abs_tbl = reduce(acc_vel_abs), reduce(acc_pos_abs)
    return MetricsReport(
        kinds=kinds,
        vel_mae=vel_tbl,
        pos_mae=pos_tbl,
        vel_mae_abs=vel_abs_tbl,
        pos_mae_abs=pos_abs_tbl,
        overall_vel={v: float(np.mean(vel_tbl[v]["overall"])) for v in variants},
        overall_pos={v: float(np.mean(pos_tbl[v]["overall"])) if pos_tbl[v] else 0.0
                     for v in variants},
    )


def write_metrics_csv(path: str | Path, report: MetricsReport, absolute: bool = False):
    """One row per (activity, joint), then per-joint overall rows, then a grand row."""
    vel = report.vel_mae_abs if absolute else report.vel_mae
    pos = report.pos_mae_abs if absolute else report.pos_mae
    variants = list(vel.keys())
    with open(path, "w", encoding="utf-8") as fh:
        cols = ["activity", "joint"]
        for v in variants:
            cols += [f"vel_mae_{v.lower()}_mm_frame", f"pos_mae_{v.lower()}_mm"]
        fh.write(",".join(cols) + "\n")

        def row(kind, j):
            cells = [kind, str(j + 1)]
            for v in variants:
                vel_val = vel[v].get(kind, [float("nan")] * N_JOINTS)[j]
                pos_val = pos[v].get(kind, [float("nan")] * N_JOINTS)[j] \
                    if pos[v] else float("nan")
                cells += [f"{vel_val:.3f}", f"{pos_val:.3f}"]
            return ",".join(cells) + "\n"

        for kind in report.kinds:
            for j in range(N_JOINTS):
                fh.write(row(kind, j))
        for j in range(N_JOINTS):
            fh.write(row("overall", j))
        cells = ["overall", "all"]
        for v in variants:
            cells += [f"{np.mean(vel[v]['overall']):.3f}",
                      f"{np.mean(pos[v]['overall']):.3f}" if pos[v] else "nan"]
        fh.write(",".join(cells) + "\n")


def write_metrics_table(path: str | Path, report: MetricsReport):
    """Plain-text table: activities x joints, one row per variant."""
    lines = []
    header = "activity variant " + " ".join(f"{j + 1:>6d}" for j in range(N_JOINTS)) \
        + "  overall"
    for name, tbl, unit in (("velocity mm/frame", report.vel_mae, "mm/frame"),
                            ("position mm", report.pos_mae, "mm")):
        lines.append(f"== {name} ==")
        lines.append(header)
        for kind in report.kinds + ["overall"]:
            for variant in tbl:
                vals = tbl[variant].get(kind)
                if vals is None:
                    continue
                cells = " ".join(f"{x:6.1f}" for x in vals)
                lines.append(f"{kind:>8s} {variant:>7s} {cells}  {np.mean(vals):7.1f}")
        lines.append("")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def mm_per_frame(meters_per_second: float, dt: float) -> float:
    """Unit bridge used in all reports: mm/frame = (m/s) * dt * 1000."""
    return meters_per_second * dt * 1000.0


# ---------------------------------------------------------------------------
# Runtime profiling
# ---------------------------------------------------------------------------

def profile_runtime(cfg: ExperimentConfig, vel_model: VelModel, opt_model: OptModel,
                    m_spec: Spectrogram, *, n_frames: int = 10) -> dict:
    """Wall-clock seconds per pipeline stage on an n-frame spectrogram window."""
    window = Spectrogram(m_spec.values[:, :n_frames].copy(), m_spec.doppler_axis,
                         m_spec.dt)
    t_total0 = time.perf_counter()

    t0 = time.perf_counter()
    den = denoise(window, cfg.denoise_params)
    t_denoise = time.perf_counter() - t0

    t0 = time.perf_counter()
    est = vel_forward(vel_model, den)
    t_velocity = time.perf_counter() - t0

    t0 = time.perf_counter()
    optimize_initial_pose(opt_model, t_pose(), est, cfg.opt_config)
    t_opt = time.perf_counter() - t0

    total = time.perf_counter() - t_total0
    return {"denoise": t_denoise, "velocity": t_velocity, "optimization": t_opt,
            "total": total}
