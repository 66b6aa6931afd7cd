"""Multi-output tanh MLPs with analytic gradients and a batch trainer.

Parameters live in one flat vector laid out layer by layer as
``W (in x out, row-major)`` followed by ``b (out)``; the output layer is
linear.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .optim import OptimizeResult, TrainingDiverged, gradient_descent, lbfgs

__all__ = [
    "MlpArchitecture", "TrainConfig", "Mlp", "TrainingDiverged",
    "mlp_init", "mlp_forward", "mlp_loss_grad", "train", "save_mlp", "load_mlp",
]


@dataclass(frozen=True)
class MlpArchitecture:
    input_dim: int
    hidden_layers: tuple[int, ...]
    output_dim: int

    def __post_init__(self):
        object.__setattr__(self, "hidden_layers", tuple(int(h) for h in self.hidden_layers))
        if min((self.input_dim, self.output_dim) + self.hidden_layers) < 1:
            raise ValueError(f"all layer sizes must be >= 1: {self}")

    @property
    def sizes(self) -> tuple[int, ...]:
        return (self.input_dim, *self.hidden_layers, self.output_dim)

    @property
    def n_params(self) -> int:
        s = self.sizes
        return sum(s[i] * s[i + 1] + s[i + 1] for i in range(len(s) - 1))


@dataclass(frozen=True)
class TrainConfig:
    optimizer: str = "lbfgs"  # or "gradient"
    max_iterations: int = 400
    gradient_tolerance: float = 1e-6
    history_size: int = 10
    init_scale: float = 0.5
    init_seed: int = 0
    step_size: float = 0.1  # gradient optimizer only
    dtype: str = "float64"

    def __post_init__(self):
        if self.optimizer not in ("lbfgs", "gradient"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if not (self.gradient_tolerance > 0 and self.step_size > 0 and self.history_size >= 1):
            raise ValueError("tolerances, step size and history size must be positive")
        if self.init_scale < 0:
            raise ValueError("init_scale must be >= 0")
        if self.dtype not in ("float64", "float32"):
            raise ValueError(f"unsupported dtype {self.dtype!r}")


def _unpack(arch: MlpArchitecture, params: np.ndarray):
    layers = []
    off = 0
    s = arch.sizes
    for i in range(len(s) - 1):
        n_w = s[i] * s[i + 1]
        W = params[off:off + n_w].reshape(s[i], s[i + 1])
        off += n_w
        b = params[off:off + s[i + 1]]
        off += s[i + 1]
        layers.append((W, b))
    return layers


@dataclass
class Mlp:
    arch: MlpArchitecture
    params: np.ndarray
    final_loss: float = float("nan")
    info: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        self.params = np.asarray(self.params, dtype=float)
        if self.params.shape != (self.arch.n_params,):
            raise ValueError(f"expected {self.arch.n_params} parameters, got {self.params.shape}")
        self._layers = _unpack(self.arch, self.params)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return mlp_forward(self, x)


def mlp_init(arch: MlpArchitecture, cfg: TrainConfig = TrainConfig()) -> Mlp:
    rng = np.random.default_rng(cfg.init_seed)
    return Mlp(arch, rng.uniform(-cfg.init_scale, cfg.init_scale, size=arch.n_params))


def mlp_forward(net: Mlp, x: np.ndarray) -> np.ndarray:
    """Evaluate on one feature vector (returns 1-D) or a batch (rows)."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    h = np.atleast_2d(x)
    if h.shape[1] != net.arch.input_dim:
        raise ValueError(f"input dimension {h.shape[1]} does not match network input {net.arch.input_dim}")
    last = len(net._layers) - 1
    for i, (W, b) in enumerate(net._layers):
        h = h @ W + b
        if i < last:
            h = np.tanh(h)
    return h[0] if single else h


def mlp_loss_grad(arch: MlpArchitecture, params: np.ndarray, X: np.ndarray, Y: np.ndarray,
                  dtype=np.float64) -> tuple[float, np.ndarray]:
    """Mean squared error over samples and outputs, and its gradient."""
    X = np.asarray(X, dtype=dtype)
    Y = np.asarray(Y, dtype=dtype).reshape(len(X), arch.output_dim)
    if len(X) == 0:
        raise ValueError("empty batch")
    layers = _unpack(arch, np.asarray(params, dtype=dtype))
    acts = [X]
    h = X
    last = len(layers) - 1
    for i, (W, b) in enumerate(layers):
        h = h @ W + b
        if i < last:
            h = np.tanh(h)
        acts.append(h)
    err = acts[-1] - Y
    scale = 1.0 / err.size
    loss = float(scale * np.sum(err * err, dtype=np.float64))
    grads = []
    delta = (2.0 * scale) * err
    for i in range(last, -1, -1):
        W, _ = layers[i]
        grads.append(delta.sum(axis=0))
        grads.append((acts[i].T @ delta).ravel())
        if i > 0:
            delta = (delta @ W.T) * (1.0 - acts[i] * acts[i])
    grad = np.concatenate(grads[::-1]).astype(np.float64)
    return loss, grad


def train(arch: MlpArchitecture, X: np.ndarray, Y: np.ndarray, cfg: TrainConfig = TrainConfig(),
          trace: list | None = None) -> Mlp:
    """Fit a freshly initialised network to ``(X, Y)``.

    The returned network carries the final loss in ``final_loss``. Raises
    :class:`TrainingDiverged` if the loss becomes non-finite.
    """
    X = np.asarray(X, dtype=cfg.dtype)
    Y = np.asarray(Y, dtype=cfg.dtype).reshape(len(X), arch.output_dim)
    if len(X) == 0:
        raise ValueError("cannot train on an empty batch")
    dtype = np.dtype(cfg.dtype)

    def objective(p):
        # overflow surfaces as a non-finite loss, reported as TrainingDiverged
        with np.errstate(over="ignore", invalid="ignore"):
            return mlp_loss_grad(arch, p, X, Y, dtype)

    x0 = mlp_init(arch, cfg).params
    if cfg.optimizer == "lbfgs":
        res: OptimizeResult = lbfgs(objective, x0, cfg.history_size, cfg.max_iterations, cfg.gradient_tolerance)
    else:
        res = gradient_descent(objective, x0, cfg.step_size, cfg.max_iterations, cfg.gradient_tolerance,
                               trace=trace)
    return Mlp(arch, res.x, final_loss=res.f,
               info={"iterations": res.iterations, "evaluations": res.evaluations,
                     "grad_norm": res.grad_norm, "converged": res.converged})


def save_mlp(net: Mlp, path) -> None:
    """Text snapshot: architecture header line, then one parameter per line."""
    header = "mlp " + " ".join(str(s) for s in net.arch.sizes)
    body = "\n".join(repr(float(v)) for v in net.params)
    Path(path).write_text(f"{header}\n{body}\n", encoding="utf-8")


def load_mlp(path) -> Mlp:
    lines = Path(path).read_text(encoding="utf-8").split("\n")
    tag, *sizes = lines[0].split()
    if tag != "mlp" or len(sizes) < 2:
        raise ValueError(f"{path}: not an MLP snapshot")
    sizes = [int(s) for s in sizes]
    arch = MlpArchitecture(sizes[0], tuple(sizes[1:-1]), sizes[-1])
    params = np.array([float(v) for v in lines[1:] if v.strip()])
    return Mlp(arch, params)
