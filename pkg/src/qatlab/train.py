"""Weight-only QAT on a two-layer tanh MLP with hand-written backprop.

Both weight matrices go through per-tensor max-abs fake quantization in the
forward pass; their gradients pass back through a surrogate multiplier.
Biases and activations are never quantized.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeMismatchError, StaleCacheError
from .quantizer import QuantConfig, fake_quant_array, max_abs_config
from .surrogates import RDFS, STE, SurrogateSpec, surrogate_backward
from .tensor import Rng, Tensor

DATASETS = ("linear_synth", "sine_synth")
DEFAULT_DIMS = (8, 32, 1)
TEACHER_SEED = 20240607
NOISE_SIGMA = 0.01
SINE_PROJECTION_NORM = 0.25


@dataclass
class MlpModel:
    """y = tanh(x W1 + b1) W2 + b2, with W1 [d_in, h] and W2 [h, d_out]."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    version: int = 0

    def __post_init__(self):
        d_in, h = self.w1.shape
        if self.b1.shape != (h,) or self.w2.shape[0] != h or self.b2.shape != (self.w2.shape[1],):
            raise ShapeMismatchError(
                f"inconsistent parameter shapes {self.w1.shape} {self.b1.shape} "
                f"{self.w2.shape} {self.b2.shape}"
            )

    @classmethod
    def init(cls, dims=DEFAULT_DIMS, seed: int = 0) -> "MlpModel":
        d_in, h, d_out = dims
        gen = Rng(seed).child(1).generator()
        return cls(
            w1=gen.normal(0.0, 1.0 / math.sqrt(d_in), size=(d_in, h)),
            b1=np.zeros(h),
            w2=gen.normal(0.0, 1.0 / math.sqrt(h), size=(h, d_out)),
            b2=np.zeros(d_out),
        )

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.w1.shape[0], self.w1.shape[1], self.w2.shape[1]

    @property
    def n_params(self) -> int:
        return self.w1.size + self.b1.size + self.w2.size + self.b2.size

    def params(self) -> dict[str, np.ndarray]:
        return {"w1": self.w1, "b1": self.b1, "w2": self.w2, "b2": self.b2}

    def flat(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self.params().values()])

    def with_flat(self, v: np.ndarray) -> "MlpModel":
        out, i = {}, 0
        for name, p in self.params().items():
            out[name] = np.asarray(v[i : i + p.size], dtype=np.float64).reshape(p.shape)
            i += p.size
        return MlpModel(**out)

    def apply_update(self, grads: dict[str, np.ndarray], lr: float) -> None:
        for name in ("w1", "b1", "w2", "b2"):
            setattr(self, name, getattr(self, name) - lr * grads[name])
        self.version += 1


@dataclass
class ForwardCache:
    model: MlpModel
    version: int
    x: np.ndarray
    h: np.ndarray
    w1q: np.ndarray
    w2q: np.ndarray
    cfg1: QuantConfig | None
    cfg2: QuantConfig | None


def _quantize_weight(w: np.ndarray, bits: int | None):
    if bits is None:
        return w, None
    cfg = max_abs_config(Tensor._wrap(w), bits)
    return fake_quant_array(w, cfg), cfg


def qat_forward(model: MlpModel, x, bits: int | None, quant_on: bool = True):
    """Return (prediction [n, d_out], cache). ``bits=None`` or quant_on=False skips quantization."""
    x = np.asarray(x.array if isinstance(x, Tensor) else x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.dims[0]:
        raise ShapeMismatchError(f"input shape {x.shape} does not match d_in={model.dims[0]}")
    b = bits if quant_on else None
    w1q, cfg1 = _quantize_weight(model.w1, b)
    w2q, cfg2 = _quantize_weight(model.w2, b)
    h = np.tanh(x @ w1q + model.b1)
    pred = h @ w2q + model.b2
    return pred, ForwardCache(model, model.version, x, h, w1q, w2q, cfg1, cfg2)


def mse_loss(pred: np.ndarray, y: np.ndarray) -> tuple[float, np.ndarray]:
    diff = pred - y
    return float(np.mean(diff * diff)), 2.0 * diff / diff.size


def qat_backward(cache: ForwardCache, grad_pred, spec: SurrogateSpec = STE()) -> dict[str, np.ndarray]:
    """Gradients of all parameters; weight grads go through the surrogate."""
    if cache.model.version != cache.version:
        raise StaleCacheError("model was updated after this forward pass")
    g = np.asarray(grad_pred, dtype=np.float64)
    gw2q = cache.h.T @ g
    gb2 = g.sum(axis=0)
    gz = (g @ cache.w2q.T) * (1.0 - cache.h * cache.h)
    gw1q = cache.x.T @ gz
    gb1 = gz.sum(axis=0)
    gw1 = gw1q if cache.cfg1 is None else surrogate_backward(gw1q, cache.model.w1, cache.cfg1, spec).array
    gw2 = gw2q if cache.cfg2 is None else surrogate_backward(gw2q, cache.model.w2, cache.cfg2, spec).array
    return {"w1": np.array(gw1), "b1": gb1, "w2": np.array(gw2), "b2": gb2}


def grad_norm(grads: dict[str, np.ndarray]) -> float:
    return math.sqrt(sum(float(np.sum(v * v)) for v in grads.values()))


def teacher(kind: str, d_in: int, d_out: int) -> np.ndarray:
    """Hidden weights of the synthetic task; fixed for every dataset seed."""
    gen = Rng(TEACHER_SEED).generator()
    if kind == "linear_synth":
        return gen.normal(0.0, 1.0 / math.sqrt(d_in), size=(d_in, d_out))
    if kind == "sine_synth":
        w = gen.normal(size=d_in)
        return SINE_PROJECTION_NORM * w / np.linalg.norm(w)
    raise ValueError(f"unknown dataset {kind!r}; expected one of {DATASETS}")


def synth_dataset(kind: str, n: int, seed: int, d_in: int = DEFAULT_DIMS[0], d_out: int = DEFAULT_DIMS[2],
                  sigma: float = NOISE_SIGMA) -> tuple[Tensor, Tensor]:
    if n < 1:
        raise ValueError(f"dataset size must be >= 1, got {n}")
    w_star = teacher(kind, d_in, d_out)
    gen = Rng(seed).child(0).generator()
    x = gen.standard_normal((n, d_in))
    if kind == "linear_synth":
        clean = x @ w_star
    else:
        if d_out != 1:
            raise ValueError("sine_synth has scalar targets")
        clean = np.sin(2.0 * math.pi * (x @ w_star))[:, None]
    noise = gen.standard_normal(clean.shape)
    return Tensor._wrap(x), Tensor._wrap(clean + sigma * noise)


@dataclass(frozen=True)
class TrainConfig:
    bits: int | None = 3
    surrogate: SurrogateSpec = field(default_factory=RDFS)
    steps: int = 500
    batch_size: int = 32
    lr: float = 0.05
    seed: int = 0
    dataset: str = "linear_synth"
    log_every: int = 1
    dims: tuple[int, int, int] = DEFAULT_DIMS
    n_samples: int = 1024

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if not self.lr > 0:
            raise ValueError("learning rate must be positive")
        if self.log_every < 1 or self.batch_size < 1:
            raise ValueError("log_every and batch_size must be >= 1")
        if self.dataset not in DATASETS:
            raise ValueError(f"unknown dataset {self.dataset!r}")

    def replace(self, **kw) -> "TrainConfig":
        return dataclasses.replace(self, **kw)


@dataclass(frozen=True)
class TrainLogRow:
    step: int
    loss: float
    grad_norm: float
    lr: float

    CSV_HEADER = "step,loss,grad_norm,lr"

    @property
    def failed(self) -> bool:
        return not (math.isfinite(self.loss) and math.isfinite(self.grad_norm))

    def csv_row(self) -> str:
        return f"{self.step},{self.loss!r},{self.grad_norm!r},{self.lr!r}"


def train_model(cfg: TrainConfig) -> tuple[MlpModel, list[TrainLogRow]]:
    """SGD on MSE; the log row at each step holds the loss before that step's update."""
    d_in, _, d_out = cfg.dims
    x, y = synth_dataset(cfg.dataset, cfg.n_samples, cfg.seed, d_in, d_out)
    x, y = x.array, y.array
    model = MlpModel.init(cfg.dims, cfg.seed)
    batches = Rng(cfg.seed).child(2).generator()
    rows: list[TrainLogRow] = []
    with np.errstate(over="ignore", invalid="ignore"):
        for step in range(cfg.steps):
            idx = batches.integers(0, cfg.n_samples, size=cfg.batch_size)
            pred, cache = qat_forward(model, x[idx], cfg.bits)
            loss, gpred = mse_loss(pred, y[idx])
            grads = qat_backward(cache, gpred, cfg.surrogate)
            row = TrainLogRow(step, loss, grad_norm(grads), cfg.lr)
            if row.failed:
                rows.append(row)
                break
            if step % cfg.log_every == 0 or step == cfg.steps - 1:
                rows.append(row)
            model.apply_update(grads, cfg.lr)
    return model, rows


def train(cfg: TrainConfig) -> list[TrainLogRow]:
    return train_model(cfg)[1]


def evaluate(model: MlpModel, cfg: TrainConfig) -> float:
    """Full-dataset MSE with the same (quantized) forward pass used in training."""
    d_in, _, d_out = cfg.dims
    x, y = synth_dataset(cfg.dataset, cfg.n_samples, cfg.seed, d_in, d_out)
    pred, _ = qat_forward(model, x, cfg.bits)
    return mse_loss(pred, y.array)[0]
