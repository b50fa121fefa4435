"""Seeded training loop, evaluation and checkpoints."""

from __future__ import annotations

import dataclasses
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from .. import FORMAT_VERSION, __version__
from ..errors import ConfigError, FormatError, TrainingError, ValidationError
from ..nets import MODEL_NAMES, FULL_BATCH_SIZE, VideoClassifier, build_model, fused_scores, head_loss
from ..windowing import WindowSpec
from .data import ClipData
from .metrics import ConfusionMatrix, EvalReport

log = logging.getLogger(__name__)


@dataclass
class RunConfig:
    model: str = "baseline"
    window: WindowSpec = field(default_factory=WindowSpec)
    preset: str = "toy"
    batch_size: int = 16
    learning_rate: float = 0.01
    momentum: float = 0.9
    weight_decay: float = 1e-4
    lr_step: int = 10
    lr_gamma: float = 0.1
    epochs: int = 30
    seed: int = 0
    width_multiplier: float | None = None
    class_weights: bool = False
    # stop once validation accuracy (percent) reaches this
    target_accuracy: float | None = None
    model_overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        if isinstance(self.window, dict):
            self.window = WindowSpec.from_dict(self.window)
        if self.model not in MODEL_NAMES:
            raise ConfigError(f"unknown model {self.model!r}; choose from {', '.join(MODEL_NAMES)}")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.epochs < 0:
            raise ConfigError("epochs must be >= 0")
        if self.learning_rate < 0:
            raise ConfigError("learning_rate must be >= 0")
        if self.lr_step < 1:
            raise ConfigError("lr_step must be >= 1")

    @classmethod
    def full_scale(cls, model: str, window: WindowSpec | None = None, **kw) -> "RunConfig":
        """Full-width model with the mini-batch sizes used on the reference dataset."""
        return cls(model=model, window=window or WindowSpec(), preset="full",
                   batch_size=FULL_BATCH_SIZE[model], **kw)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["window"] = self.window.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ConfigError(f"unknown run config keys: {sorted(unknown)}")
        try:
            return cls(**d)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None


def make_model(config: RunConfig, flow_fields: int) -> VideoClassifier:
    torch.manual_seed(config.seed)
    try:
        return build_model(config.model, config.preset, flow_fields=flow_fields,
                           width_multiplier=config.width_multiplier, **config.model_overrides)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def _batch(model: VideoClassifier, data: ClipData, idx: np.ndarray) -> tuple:
    app = torch.from_numpy(data.appearance[idx])
    flow = torch.from_numpy(data.flow[idx].astype(np.float32)) if model.uses_flow else None
    return model.prepare(app, flow)


@torch.no_grad()
def predict(model: VideoClassifier, data: ClipData, batch_size: int = 32) -> tuple[np.ndarray, np.ndarray]:
    """(predicted classes, fused probabilities) in the order of ``data``."""
    was_training = model.training
    model.eval()
    preds, probs = [], []
    try:
        for lo in range(0, len(data), batch_size):
            idx = np.arange(lo, min(lo + batch_size, len(data)))
            s = fused_scores(model(*_batch(model, data, idx)))
            preds.append(s.predicted().numpy())
            probs.append(s.probabilities.numpy())
    finally:
        model.train(was_training)
    return np.concatenate(preds), np.concatenate(probs)


def evaluate(model: VideoClassifier, data: ClipData, config: RunConfig | None = None,
             batch_size: int = 32) -> EvalReport:
    if len(data) == 0:
        raise ValidationError("cannot evaluate on an empty set")
    pred, _ = predict(model, data, batch_size)
    matrix = ConfusionMatrix.from_predictions(pred, data.labels)
    return EvalReport.from_matrix(matrix, config.to_dict() if config else None)


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_accuracy: float | None
    learning_rate: float
    seconds: float


@dataclass
class TrainResult:
    model: VideoClassifier
    config: RunConfig
    history: list[EpochRecord]
    steps: int
    # per-step losses; bitwise reproducible at a fixed thread count
    losses: list[float]

    @property
    def final_val_accuracy(self) -> float | None:
        return self.history[-1].val_accuracy if self.history else None

    @property
    def best_val_accuracy(self) -> float | None:
        accs = [h.val_accuracy for h in self.history if h.val_accuracy is not None]
        return max(accs) if accs else None


def _class_weights(labels: np.ndarray) -> torch.Tensor:
    counts = np.bincount(labels, minlength=3).astype(np.float64)
    w = np.where(counts > 0, counts.sum() / (3 * np.maximum(counts, 1)), 0.0)
    return torch.tensor(w, dtype=torch.float32)


def train(config: RunConfig, train_data: ClipData, val_data: ClipData | None = None,
          model: VideoClassifier | None = None) -> TrainResult:
    """SGD with momentum and step decay on the summed per-head cross-entropy.

    Everything random (initialisation, data order, dropout) is drawn from
    generators seeded by ``config.seed``.
    """
    if len(train_data) == 0:
        raise ValidationError("training set is empty")
    torch.manual_seed(config.seed)
    if model is None:
        model = make_model(config, train_data.flow_fields)
    opt = torch.optim.SGD(model.parameters(), lr=config.learning_rate, momentum=config.momentum,
                          weight_decay=config.weight_decay)
    sched = torch.optim.lr_scheduler.StepLR(opt, step_size=config.lr_step, gamma=config.lr_gamma)
    weight = _class_weights(train_data.labels) if config.class_weights else None
    order_rng = np.random.default_rng([config.seed, 0x0DA7A])
    history, losses, steps = [], [], 0
    n = len(train_data)
    for epoch in range(1, config.epochs + 1):
        t0 = time.perf_counter()
        model.train()
        perm = order_rng.permutation(n)
        total, seen = 0.0, 0
        lr = opt.param_groups[0]["lr"]
        for lo in range(0, n, config.batch_size):
            idx = np.sort(perm[lo : lo + config.batch_size])
            if len(idx) < 2 and n >= 2:
                # batch norm needs two samples; fold a lone tail into the next epoch
                continue
            target = torch.from_numpy(train_data.labels[idx])
            loss = head_loss(model(*_batch(model, train_data, idx)), target, weight)
            value = float(loss.detach())
            if not math.isfinite(value):
                raise TrainingError(
                    f"non-finite loss {value} at epoch {epoch}, step {steps + 1} "
                    f"(lr={lr:g}, batch windows: {[train_data.windows[i].key for i in idx[:4]]})"
                )
            opt.zero_grad(set_to_none=True)
            loss.backward()
            opt.step()
            steps += 1
            losses.append(value)
            total += value * len(idx)
            seen += len(idx)
        sched.step()
        acc = evaluate(model, val_data).accuracy if val_data is not None and len(val_data) else None
        rec = EpochRecord(epoch, total / max(seen, 1), acc, lr, time.perf_counter() - t0)
        history.append(rec)
        log.info("%s epoch %d loss %.4f val %s (%.1fs)", config.model, epoch, rec.train_loss,
                 "-" if acc is None else f"{acc:.1f}%", rec.seconds)
        if config.target_accuracy is not None and acc is not None and acc >= config.target_accuracy:
            break
    model.eval()
    return TrainResult(model, config, history, steps, losses)


# --------------------------------------------------------------------------
# checkpoints


def save_checkpoint(path, result: TrainResult, flow_fields: int) -> Path:
    """torch archive holding config echo, named weights, seed and step count."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    torch.save(
        {
            "format_version": FORMAT_VERSION,
            "toolkit_version": __version__,
            "config": result.config.to_dict(),
            "flow_fields": flow_fields,
            "seed": result.config.seed,
            "steps": result.steps,
            "history": [dataclasses.asdict(h) for h in result.history],
            "state_dict": result.model.state_dict(),
        },
        path,
    )
    return path


def load_checkpoint(path) -> tuple[VideoClassifier, RunConfig, dict]:
    path = Path(path)
    if not path.is_file():
        raise FormatError(f"missing checkpoint {path}")
    try:
        blob = torch.load(path, map_location="cpu", weights_only=True)
    except Exception as exc:  # torch raises a zoo of types on corrupt files
        raise FormatError(f"{path}: unreadable checkpoint ({exc})") from None
    if blob.get("format_version") != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported checkpoint format {blob.get('format_version')}")
    config = RunConfig.from_dict(blob["config"])
    model = make_model(config, blob["flow_fields"])
    model.load_state_dict(blob["state_dict"])
    model.eval()
    return model, config, blob
