"""Tapped-delay-line network predicting the future steering error.

The input at sample ``t`` stacks the selected feature frames at
``t, t-1, ..., t-(taps-1)``; the target is ``steer_cmd - steer_meas`` at
``t + horizon_steps``.  Two tansig hidden layers feed a linear output.
``taps == 1`` gives the memoryless BP baseline.

Randomness comes from ``numpy.random.Generator(PCG64(seed))``: one stream per
model, used for weight initialisation and then for per-epoch shuffling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import (
    ConfigurationError,
    ContractError,
    DivergenceError,
    InsufficientDataError,
    UndefinedMetricError,
)
from .features import DEFAULT_FEATURES, CANDIDATE_FEATURES
from .metrics import cc, ce
from .telemetry import TelemetryLog

MODEL_MAGIC = "steercomp-tdnn v1"
SCALE_FLOOR = 1e-8
HOLDOUT_FRACTION = 0.2
BATCH_SIZE = 32


@dataclass(frozen=True)
class TdnnConfig:
    taps: int = 5
    tap_spacing: float = 0.05
    horizon_steps: int = 4
    feature_count: int = 3
    hidden: tuple[int, ...] = (8, 6)
    learning_rate: float = 0.001
    epochs: int = 500
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        if self.taps < 1:
            raise ContractError("taps must be >= 1")
        if self.horizon_steps < 0:
            raise ContractError("horizon_steps must be >= 0")
        if self.feature_count < 1:
            raise ContractError("feature_count must be >= 1")
        if len(self.hidden) != 2 or min(self.hidden) < 1:
            raise ContractError("hidden must hold two positive layer widths")
        if not self.learning_rate > 0:
            raise ContractError("learning_rate must be positive")
        if self.epochs < 0:
            raise ContractError("epochs must be >= 0")

    @property
    def input_dim(self) -> int:
        return self.feature_count * self.taps

    @property
    def layer_sizes(self) -> tuple[int, ...]:
        return (self.input_dim, *self.hidden, 1)


@dataclass(frozen=True, eq=False)
class TdnnModel:
    config: TdnnConfig
    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]
    input_norm: np.ndarray  # (feature_count, 2): mean, scale
    target_norm: tuple[float, float]
    features: tuple[str, ...] = DEFAULT_FEATURES

    def __post_init__(self):
        sizes = self.config.layer_sizes
        if len(self.weights) != len(sizes) - 1 or len(self.biases) != len(sizes) - 1:
            raise ContractError("model must have one weight matrix and bias per layer")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (sizes[i + 1], sizes[i]) or b.shape != (sizes[i + 1],):
                raise ContractError(f"layer {i} has shape {w.shape}, expected {(sizes[i + 1], sizes[i])}")
        if len(self.features) != self.config.feature_count:
            raise ContractError("feature list length does not match feature_count")


@dataclass
class TrainingReport:
    final_loss: float
    loss_curve: list[float]
    train_cc: float
    train_ce: float
    holdout_cc: float
    holdout_ce: float
    converged: bool


@dataclass(frozen=True, eq=False)
class Ensemble:
    members: tuple[TdnnModel, ...]

    def __post_init__(self):
        if not self.members:
            raise ContractError("ensemble needs at least one member")
        first = self.members[0]
        for m in self.members[1:]:
            if replace(m.config, seed=0) != replace(first.config, seed=0) or m.features != first.features:
                raise ContractError("ensemble members must share a configuration")

    @property
    def config(self) -> TdnnConfig:
        return self.members[0].config

    @property
    def features(self) -> tuple[str, ...]:
        return self.members[0].features


@dataclass(frozen=True, eq=False)
class Dataset:
    """Raw windows/targets plus the normalisation fitted on the training split."""

    inputs: np.ndarray  # (N, taps*feature_count), unnormalised
    targets: np.ndarray  # (N,)
    input_norm: np.ndarray
    target_norm: tuple[float, float]
    train_count: int
    features: tuple[str, ...]

    def __len__(self):
        return len(self.targets)

    @property
    def x(self) -> np.ndarray:
        return normalize_inputs(self.inputs, self.input_norm)

    @property
    def y(self) -> np.ndarray:
        mean, scale = self.target_norm
        return (self.targets - mean) / scale


def tansig(x):
    """``2 / (1 + exp(-2x)) - 1``, evaluated on ``|x|`` so exp never overflows."""
    x = np.asarray(x, dtype=float)
    a = np.abs(x)
    y = 2.0 / (1.0 + np.exp(-2.0 * a)) - 1.0
    y = np.copysign(y, x)
    return float(y) if y.ndim == 0 else y


def normalize_inputs(raw: np.ndarray, input_norm: np.ndarray) -> np.ndarray:
    taps = raw.shape[-1] // len(input_norm)
    mean = np.tile(input_norm[:, 0], taps)
    scale = np.tile(input_norm[:, 1], taps)
    return (raw - mean) / scale


def _fit_norm(values: np.ndarray) -> tuple[float, float]:
    return float(values.mean()), float(max(values.std(), SCALE_FLOOR))


def split_point(n: int) -> int:
    """Chronological 80/20 split: index of the first holdout sample."""
    return n - int(math.ceil(HOLDOUT_FRACTION * n)) if n > 1 else n


def assemble_dataset(log: TelemetryLog, features: Sequence[str] = DEFAULT_FEATURES,
                     config: TdnnConfig | None = None) -> Dataset:
    config = config or TdnnConfig(feature_count=len(features))
    features = tuple(features)
    for name in features:
        if name not in CANDIDATE_FEATURES:
            raise ContractError(f"unknown feature {name!r}")
    if len(features) != config.feature_count:
        raise ContractError("feature list length does not match config.feature_count")
    m, h = config.taps, config.horizon_steps
    L = len(log)
    if L <= m + h - 1 or L - (m - 1) - h < 1:
        raise InsufficientDataError(f"log of {L} frames too short for taps={m}, horizon={h}")
    frames = np.column_stack([log.column(f) for f in features])
    if not np.all(np.isfinite(frames)):
        raise ContractError("selected features contain missing values")
    error = log.column("steer_cmd") - log.column("steer_meas")
    n = L - (m - 1) - h
    idx = np.arange(m - 1, m - 1 + n)
    inputs = np.concatenate([frames[idx - k] for k in range(m)], axis=1)
    targets = error[idx + h]
    n_train = split_point(n)
    train_frames = frames[: n_train + m - 1]
    input_norm = np.array([_fit_norm(train_frames[:, j]) for j in range(len(features))])
    target_norm = _fit_norm(targets[:n_train])
    return Dataset(inputs, targets, input_norm, target_norm, n_train, features)


# --- network core ------------------------------------------------------------
# Parameters are stacked along a leading "member" axis so an ensemble trains
# in one vectorised loop; a single model is the M == 1 case.


def _init_params(config: TdnnConfig, rng: np.random.Generator):
    sizes = config.layer_sizes
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        limit = math.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return weights, biases


def _forward(ws, bs, x):
    """``ws[i]``: (M, out, in); ``x``: (M, B, in). Returns output (M, B) and cache."""
    a1 = tansig(np.matmul(x, ws[0].transpose(0, 2, 1)) + bs[0][:, None, :])
    a2 = tansig(np.matmul(a1, ws[1].transpose(0, 2, 1)) + bs[1][:, None, :])
    y = np.matmul(a2, ws[2].transpose(0, 2, 1))[..., 0] + bs[2][:, None, 0]
    return y, (x, a1, a2)


def _backward(ws, cache, dy):
    """Gradients for upstream gradient ``dy`` (M, B) of the output."""
    x, a1, a2 = cache
    d3 = dy[..., None]  # (M, B, 1)
    gw3 = np.matmul(d3.transpose(0, 2, 1), a2)
    gb3 = d3.sum(axis=1)
    d2 = np.matmul(d3, ws[2]) * (1.0 - a2 * a2)
    gw2 = np.matmul(d2.transpose(0, 2, 1), a1)
    gb2 = d2.sum(axis=1)
    d1 = np.matmul(d2, ws[1]) * (1.0 - a1 * a1)
    gw1 = np.matmul(d1.transpose(0, 2, 1), x)
    gb1 = d1.sum(axis=1)
    return [gw1, gw2, gw3], [gb1, gb2, gb3]


def _loss(ws, bs, x, y):
    """Squared-error loss with the 1/(2n) factor, per member."""
    pred, _ = _forward(ws, bs, np.broadcast_to(x, (ws[0].shape[0], *x.shape)))
    return 0.5 * np.mean((pred - y) ** 2, axis=1)


def _stack(models: Sequence[TdnnModel]):
    ws = [np.stack([m.weights[i] for m in models]) for i in range(3)]
    bs = [np.stack([m.biases[i] for m in models]) for i in range(3)]
    return ws, bs


def forward(model: TdnnModel, x) -> float | np.ndarray:
    """De-normalised prediction for normalised input(s) ``x``."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != model.config.input_dim:
        raise ContractError(f"input dimension {x.shape[-1]} != {model.config.input_dim}")
    ws, bs = _stack([model])
    batch = x.reshape(1, -1, x.shape[-1])
    y, _ = _forward(ws, bs, batch)
    mean, scale = model.target_norm
    out = y[0] * scale + mean
    return float(out[0]) if x.ndim == 1 else out


def predict(predictor: TdnnModel | Ensemble, raw_inputs) -> float | np.ndarray:
    """Prediction in radians from unnormalised tapped-delay windows."""
    members = predictor.members if isinstance(predictor, Ensemble) else (predictor,)
    raw = np.asarray(raw_inputs, dtype=float)
    preds = [forward(m, normalize_inputs(raw, m.input_norm)) for m in members]
    if isinstance(preds[0], float):
        return float(sum(preds) / len(preds))
    return np.mean(np.stack(preds), axis=0)


def _metric(fn, measured, predicted) -> float:
    try:
        return fn(measured, predicted)
    except UndefinedMetricError:
        return math.nan


def evaluate(predictor, dataset: Dataset, part: str = "holdout") -> tuple[float, float]:
    """(CC, CE) of ``predictor`` on the training or holdout split."""
    sl = slice(None, dataset.train_count) if part == "train" else slice(dataset.train_count, None)
    pred = predict(predictor, dataset.inputs[sl])
    return _metric(cc, dataset.targets[sl], pred), _metric(ce, dataset.targets[sl], pred)


def init_model(config: TdnnConfig, dataset: Dataset | None = None) -> TdnnModel:
    rng = np.random.Generator(np.random.PCG64(config.seed))
    weights, biases = _init_params(config, rng)
    return _make_model(config, weights, biases, dataset)


def _make_model(config, weights, biases, dataset: Dataset | None):
    if dataset is None:
        input_norm = np.tile([0.0, 1.0], (config.feature_count, 1))
        target_norm = (0.0, 1.0)
        features = DEFAULT_FEATURES[: config.feature_count]
    else:
        input_norm, target_norm, features = dataset.input_norm, dataset.target_norm, dataset.features
    return TdnnModel(
        config,
        tuple(np.array(w) for w in weights),
        tuple(np.array(b) for b in biases),
        np.array(input_norm, dtype=float),
        tuple(float(v) for v in target_norm),
        tuple(features),
    )


def _train_members(dataset: Dataset, configs: Sequence[TdnnConfig]):
    """Train several configurations (differing only in seed) side by side."""
    config = configs[0]
    if len(dataset) < 2 or dataset.train_count < 1 or dataset.train_count >= len(dataset):
        raise InsufficientDataError("need at least one training and one holdout sample")
    if dataset.inputs.shape[1] != config.input_dim:
        raise ContractError("dataset input dimension does not match the config")
    rngs = [np.random.Generator(np.random.PCG64(c.seed)) for c in configs]
    inits = [_init_params(c, rng) for c, rng in zip(configs, rngs)]
    ws = [np.stack([w[i] for w, _ in inits]) for i in range(3)]
    bs = [np.stack([b[i] for _, b in inits]) for i in range(3)]

    x_all, y_all = dataset.x, dataset.y
    n = dataset.train_count
    x_train, y_train = x_all[:n], y_all[:n]
    lr = config.learning_rate
    M = len(configs)

    # divergence is detected from the loss, so overflow warnings are noise
    with np.errstate(over="ignore", invalid="ignore"):
        curves = [_loss(ws, bs, x_train, y_train)]
        for epoch in range(1, config.epochs + 1):
            order = np.stack([rng.permutation(n) for rng in rngs])
            for start in range(0, n, BATCH_SIZE):
                idx = order[:, start : start + BATCH_SIZE]
                xb = x_train[idx]
                yb = y_train[idx]
                pred, cache = _forward(ws, bs, xb)
                gws, gbs = _backward(ws, cache, (pred - yb) / idx.shape[1])
                for i in range(3):
                    ws[i] -= lr * gws[i]
                    bs[i] -= lr * gbs[i]
            loss = _loss(ws, bs, x_train, y_train)
            if not np.all(np.isfinite(loss)):
                bad = int(np.argmax(~np.isfinite(loss)))
                raise DivergenceError(epoch, member=bad if M > 1 else None)
            curves.append(loss)

    curves = np.stack(curves)  # (epochs+1, M)
    models, reports = [], []
    for k, c in enumerate(configs):
        model = _make_model(c, [w[k] for w in ws], [b[k] for b in bs], dataset)
        tcc, tce = evaluate(model, dataset, "train")
        hcc, hce = evaluate(model, dataset, "holdout")
        curve = [float(v) for v in curves[:, k]]
        reports.append(
            TrainingReport(
                final_loss=curve[-1],
                loss_curve=curve,
                train_cc=tcc,
                train_ce=tce,
                holdout_cc=hcc,
                holdout_ce=hce,
                converged=len(curve) > 1 and curve[-1] < curve[0],
            )
        )
        models.append(model)
    return models, reports


def train(dataset: Dataset, config: TdnnConfig) -> tuple[TdnnModel, TrainingReport]:
    """Mini-batch gradient descent (batch 32) on the chronological training split."""
    models, reports = _train_members(dataset, [config])
    return models[0], reports[0]


def train_ensemble(dataset: Dataset, config: TdnnConfig, members: int = 10):
    """Train ``members`` networks with seeds ``config.seed + i``."""
    if members < 1:
        raise ContractError("members must be >= 1")
    configs = [replace(config, seed=config.seed + i) for i in range(members)]
    models, reports = _train_members(dataset, configs)
    return Ensemble(tuple(models)), reports


# --- gradient verification ---------------------------------------------------


def sample_loss(model: TdnnModel, x, y) -> float:
    """Per-sample loss ``0.5 * (f(x) - y)**2`` in normalised units."""
    ws, bs = _stack([model])
    pred, _ = _forward(ws, bs, np.asarray(x, dtype=float).reshape(1, 1, -1))
    return 0.5 * float(pred[0, 0] - y) ** 2


def loss_gradient(model: TdnnModel, x, y):
    """Analytic gradient of :func:`sample_loss`, as (weight grads, bias grads)."""
    ws, bs = _stack([model])
    pred, cache = _forward(ws, bs, np.asarray(x, dtype=float).reshape(1, 1, -1))
    gws, gbs = _backward(ws, cache, pred - y)
    return [g[0] for g in gws], [g[0] for g in gbs]


def gradient_check(model: TdnnModel, sample, step: float = 1e-6) -> float:
    """Max relative error between analytic and central-difference gradients."""
    x, y = sample
    gws, gbs = loss_gradient(model, x, y)
    params = [np.array(w) for w in model.weights] + [np.array(b) for b in model.biases]
    analytic = gws + gbs
    worst = 0.0
    for p, ga in zip(params, analytic):
        flat = p.reshape(-1)
        for j in range(flat.size):
            orig = flat[j]
            flat[j] = orig + step
            lp = sample_loss(_with_params(model, params), x, y)
            flat[j] = orig - step
            lm = sample_loss(_with_params(model, params), x, y)
            flat[j] = orig
            gn = (lp - lm) / (2.0 * step)
            g = ga.reshape(-1)[j]
            worst = max(worst, abs(g - gn) / max(abs(g) + abs(gn), 1e-12))
    return worst


def _with_params(model: TdnnModel, params):
    return replace(model, weights=tuple(params[:3]), biases=tuple(params[3:]))


# --- model files ---------------------------------------------------------------


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def _model_lines(model: TdnnModel) -> list[str]:
    c = model.config
    lines = [
        MODEL_MAGIC,
        " ".join(
            [str(c.taps), _fmt(c.tap_spacing), str(c.horizon_steps), str(c.feature_count),
             str(c.hidden[0]), str(c.hidden[1]), _fmt(c.learning_rate), str(c.seed)]
        ),
    ]
    for w, b in zip(model.weights, model.biases):
        lines.append(f"{w.shape[0]} {w.shape[1]}")
        lines.extend(" ".join(_fmt(v) for v in row) for row in w)
        lines.append(" ".join(_fmt(v) for v in b))
    for mean, scale in model.input_norm:
        lines.append(f"norm {_fmt(mean)} {_fmt(scale)}")
    lines.append(f"norm {_fmt(model.target_norm[0])} {_fmt(model.target_norm[1])}")
    lines.append("features " + " ".join(model.features))
    return lines


def dumps(predictor: TdnnModel | Ensemble) -> str:
    if isinstance(predictor, Ensemble):
        lines = [MODEL_MAGIC, f"members {len(predictor.members)}"]
        for m in predictor.members:
            lines.extend(_model_lines(m))
    else:
        lines = _model_lines(predictor)
    return "\n".join(lines) + "\n"


def save(predictor: TdnnModel | Ensemble, path) -> None:
    Path(path).write_text(dumps(predictor))


def _parse_model(lines: list[str], pos: int):
    def take():
        nonlocal pos
        if pos >= len(lines):
            raise ConfigurationError("model file truncated")
        line = lines[pos]
        pos += 1
        return line

    if take() != MODEL_MAGIC:
        raise ConfigurationError(f"model file must start with {MODEL_MAGIC!r}")
    try:
        taps, spacing, horizon, fcount, h0, h1, lr, seed = take().split()
        config = TdnnConfig(int(taps), float(spacing), int(horizon), int(fcount),
                            (int(h0), int(h1)), float(lr), seed=int(seed))
        weights, biases = [], []
        for _ in range(3):
            rows, cols = (int(v) for v in take().split())
            weights.append(np.array([[float(v) for v in take().split()] for _ in range(rows)]).reshape(rows, cols))
            biases.append(np.array([float(v) for v in take().split()]))
        norms = []
        for _ in range(config.feature_count + 1):
            tag, mean, scale = take().split()
            if tag != "norm":
                raise ConfigurationError("expected a normalisation line")
            norms.append((float(mean), float(scale)))
        tag, *features = take().split()
        if tag != "features":
            raise ConfigurationError("expected a features line")
    except (ValueError, ContractError) as exc:
        raise ConfigurationError(f"malformed model file near line {pos}: {exc}") from None
    model = TdnnModel(config, tuple(weights), tuple(biases), np.array(norms[:-1]),
                      norms[-1], tuple(features))
    return model, pos


def loads(text: str) -> TdnnModel | Ensemble:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if len(lines) > 1 and lines[1].startswith("members"):
        if lines[0] != MODEL_MAGIC:
            raise ConfigurationError(f"model file must start with {MODEL_MAGIC!r}")
        k = int(lines[1].split()[1])
        pos, members = 2, []
        for _ in range(k):
            model, pos = _parse_model(lines, pos)
            members.append(model)
        return Ensemble(tuple(members))
    model, _ = _parse_model(lines, 0)
    return model


def load(path) -> TdnnModel | Ensemble:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such model file: {path}")
    return loads(path.read_text())
