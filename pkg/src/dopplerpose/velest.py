"""CNN-LSTM regression from micro-Doppler spectrograms to per-joint velocities.

Per frame, three strided 1-D convolutions (each with batch norm and ReLU)
compress the Doppler profile; the per-frame features run through a two-layer
(bi)LSTM; each time step's output passes through the fully-connected head to
a 51-vector, reshaped to 17 joints x 3 velocity components in m/s.

Loss is the mean absolute difference over frames, joints and components
(the per-joint vector difference is taken as an L1 norm over x/y/z), which
matches the mm/frame mean-absolute-error reporting convention.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import nncore as nn
from .caf import Spectrogram
from .motion import N_JOINTS, VelocitySequence
from .nncore import Tensor
from .nncore import tensor as ops

OUTPUT_DIM = N_JOINTS * 3  # 51


@dataclass
class TrainConfig:
    learning_rate: float = 0.001
    batch_size: int = 64
    epochs: int = 60
    seed: int = 0
    val_fraction: float = 0.1

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not 0.0 <= self.val_fraction < 1.0:
            raise ValueError("val_fraction must be in [0, 1)")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")


class VelModel:
    """Conv(32)-Conv(64)-Conv(64) -> biLSTM(64x2) -> FC 128/51/51 stack."""

    def __init__(self, doppler_bins: int, *, seed: int = 0, bidirectional: bool = True,
                 dtype=np.float32):
        rng = np.random.default_rng(seed)
        self.doppler_bins = int(doppler_bins)
        self.bidirectional = bool(bidirectional)
        self.seed = int(seed)
        self.conv1 = nn.Conv1d(1, 32, 5, stride=2, rng=rng, dtype=dtype)
        self.bn1 = nn.BatchNorm1d(32, dtype=dtype)
        self.conv2 = nn.Conv1d(32, 64, 5, stride=2, rng=rng, dtype=dtype)
        self.bn2 = nn.BatchNorm1d(64, dtype=dtype)
        self.conv3 = nn.Conv1d(64, 64, 5, stride=2, rng=rng, dtype=dtype)
        self.bn3 = nn.BatchNorm1d(64, dtype=dtype)

        w = doppler_bins
        for conv in (self.conv1, self.conv2, self.conv3):
            w = conv.out_width(w)
            if w < 1:
                raise ValueError(
                    f"{doppler_bins} Doppler bins are too few for the conv stack; "
                    f"need at least 29")
        self.feat_width = w
        lstm_in = 64 * w
        lstm_out = 128 if bidirectional else 64
        self.lstm = nn.LSTM(lstm_in, 64, num_layers=2, bidirectional=bidirectional,
                            rng=rng, dtype=dtype)
        self.fc1 = nn.Linear(lstm_out, 128, rng=rng, dtype=dtype)
        self.bn_fc = nn.BatchNorm1d(128, dtype=dtype)
        self.fc2 = nn.Linear(128, OUTPUT_DIM, rng=rng, dtype=dtype)
        self.fc3 = nn.Linear(OUTPUT_DIM, OUTPUT_DIM, rng=rng, dtype=dtype)

    def _ordered_layers(self):
        return [self.conv1, self.bn1, self.conv2, self.bn2, self.conv3, self.bn3,
                self.lstm, self.fc1, self.bn_fc, self.fc2, self.fc3]

    def params(self):
        return [p for layer in self._ordered_layers() for p in layer.params()]

    def forward(self, x: Tensor, training: bool = False) -> Tensor:
        """(B, T, F) spectrogram columns -> (B, T, 51) velocities."""
        b, t_len, f = x.data.shape
        if f != self.doppler_bins:
            raise ValueError(f"model expects {self.doppler_bins} Doppler bins, got {f}")
        h = ops.reshape(x, (b * t_len, 1, f))
        h = ops.relu(self.bn1(self.conv1(h), training))
        h = ops.relu(self.bn2(self.conv2(h), training))
        h = ops.relu(self.bn3(self.conv3(h), training))
        h = ops.reshape(h, (b, t_len, 64 * self.feat_width))
        h = self.lstm(h)
        h = ops.reshape(h, (b * t_len, h.data.shape[2]))
        h = ops.relu(self.bn_fc(self.fc1(h), training))
        h = self.fc2(h)
        h = self.fc3(h)
        return ops.reshape(h, (b, t_len, OUTPUT_DIM))

    def save(self, path: str | Path, meta: dict | None = None) -> None:
        layers = self._ordered_layers()
        state = []
        for layer in layers:
            if isinstance(layer, nn.BatchNorm1d):
                state.extend(layer.state_arrays())
        all_meta = {"doppler_bins": self.doppler_bins, "bidirectional": self.bidirectional,
                    "seed": self.seed}
        all_meta.update(meta or {})
        nn.save_checkpoint(path, kind="velmodel", specs=[l.spec() for l in layers],
                           params=self.params(), meta=all_meta, extra_state=state)

    @classmethod
    def load(cls, path: str | Path) -> "VelModel":
        kind, _specs, arrays, state, meta = nn.load_checkpoint(path)
        if kind != "velmodel":
            raise ValueError(f"{path}: not a velocity-model checkpoint (kind={kind!r})")
        model = cls(int(meta["doppler_bins"]), seed=int(meta.get("seed", 0)),
                    bidirectional=bool(meta["bidirectional"]))
        params = model.params()
        if len(params) != len(arrays):
            raise ValueError(f"{path}: checkpoint has {len(arrays)} parameters, "
                             f"model needs {len(params)}")
        for p, a in zip(params, arrays):
            if p.data.shape != a.shape:
                raise ValueError(f"{path}: parameter shape mismatch {a.shape} vs {p.data.shape}")
            p.data = a.astype(p.data.dtype)
        bns = [l for l in model._ordered_layers() if isinstance(l, nn.BatchNorm1d)]
        for i, bn in enumerate(bns):
            bn.running_mean = state[2 * i].astype(bn.running_mean.dtype)
            bn.running_var = state[2 * i + 1].astype(bn.running_var.dtype)
        return model


def vel_forward(m: VelModel, s: Spectrogram) -> VelocitySequence:
    """Run the trained model on one spectrogram (inference mode)."""
    if s.values.shape[0] != m.doppler_bins:
        raise ValueError(
            f"spectrogram has {s.values.shape[0]} Doppler bins, model expects "
            f"{m.doppler_bins}")
    with nn.no_grad():
        x = Tensor(s.values.T[None, :, :].astype(np.float32))
        out = m.forward(x, training=False)
    values = out.data[0].reshape(-1, N_JOINTS, 3).astype(np.float64)
    return VelocitySequence(values, s.dt)


def vel_loss(pred: VelocitySequence, truth: VelocitySequence) -> float:
    """Mean over frames and joints of the per-joint L1 velocity difference."""
    if pred.values.shape != truth.values.shape:
        raise ValueError(
            f"shape mismatch: {pred.values.shape} vs {truth.values.shape}")
    return float(np.abs(pred.values - truth.values).sum(axis=2).mean())


def _loss_tensor(pred: Tensor, truth: np.ndarray) -> Tensor:
    """Differentiable Eq.-style loss on (B, T, 51) batches."""
    b, t_len, _ = pred.data.shape
    diff = ops.absolute(ops.add(pred, -truth.reshape(b, t_len, OUTPUT_DIM)))
    per_joint = ops.tsum(ops.reshape(diff, (b, t_len, N_JOINTS, 3)), axis=3)
    return ops.tmean(per_joint)


def _bucket_batches(indices, dataset, batch_size, rng):
    """Shuffle, then group same-length spectrograms into batches."""
    by_len = {}
    for i in indices:
        by_len.setdefault(dataset[i][0].n_frames, []).append(i)
    batches = []
    for t_len in sorted(by_len):
        idx = np.array(by_len[t_len])
        rng.shuffle(idx)
        for k in range(0, len(idx), batch_size):
            batches.append(idx[k: k + batch_size])
    order = rng.permutation(len(batches))
    return [batches[i] for i in order]


def vel_train(m: VelModel, dataset: list, cfg: TrainConfig):
    """Mini-batch Adam training; returns per-epoch history rows.

    dataset: list of (Spectrogram, VelocitySequence) pairs with matching T.
    Deterministic for a fixed seed in single-threaded mode.
    """
    if not dataset:
        raise ValueError("training dataset is empty")
    for spec, vel in dataset:
        if spec.values.shape[0] != m.doppler_bins:
            raise ValueError("dataset spectrogram width does not match the model")
        if spec.n_frames != len(vel):
            raise ValueError("spectrogram and velocity sequence lengths differ")

    rng = np.random.default_rng(cfg.seed)
    perm = rng.permutation(len(dataset))
    n_val = int(round(len(dataset) * cfg.val_fraction))
    val_idx, train_idx = perm[:n_val], perm[n_val:]
    if len(train_idx) == 0:
        raise ValueError("validation split leaves no training samples")

    opt = nn.Adam(m.params(), lr=cfg.learning_rate)
    history = []
    t0 = time.perf_counter()
    for epoch in range(cfg.epochs):
        epoch_losses = []
        for batch in _bucket_batches(train_idx, dataset, cfg.batch_size, rng):
            xs = np.stack([dataset[i][0].values.T for i in batch]).astype(np.float32)
            ys = np.stack([dataset[i][1].values for i in batch]).astype(np.float32)
            opt.zero_grad()
            out = m.forward(Tensor(xs), training=True)
            loss = _loss_tensor(out, ys)
            loss.backward()
            opt.step()
            epoch_losses.append(float(loss.data) * len(batch))
        train_loss = float(np.sum(epoch_losses) / len(train_idx))
        if len(val_idx):
            val_loss = float(np.mean([
                vel_loss(vel_forward(m, dataset[i][0]), dataset[i][1]) for i in val_idx]))
        else:
            val_loss = train_loss
        history.append({"epoch": epoch, "train_loss": train_loss, "val_loss": val_loss,
                        "wall_seconds": time.perf_counter() - t0})
    return history


def save_history_csv(path: str | Path, history: list) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("epoch,train_loss,val_loss,wall_seconds\n")
        for row in history:
            fh.write(f"{row['epoch']},{row['train_loss']:.8f},{row['val_loss']:.8f},"
                     f"{row['wall_seconds']:.3f}\n")
