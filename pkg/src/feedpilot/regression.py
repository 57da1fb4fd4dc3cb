"""Fully connected regression networks predicting next-frame positions.

Two small networks cooperate: ``mu_x`` maps the normalized x coordinate to
its next-frame value, and ``mu_y`` maps (x, y) to the next-frame y, because
the vertical motion changes sign at the trajectory's turning point and the
horizontal position disambiguates which branch a nutriment is on.

Training is plain mini-batch gradient descent on mean squared error, written
out explicitly so the gradients can be checked against finite differences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    ConfigError,
    DivergenceError,
    EmptyInputError,
    ShapeError,
    ValidationError,
)

# Named layer layouts evaluated against each other; the first is the default.
MODEL_SPECS: dict[str, list[int]] = {
    "R1": [100, 80, 60, 40, 40, 20],
    "R2": [200, 160, 120, 80, 80, 40],
    "R3": [100, 90, 80, 70, 60, 50, 40, 30, 20, 10],
    "R4": [200, 180, 160, 140, 120, 100, 80, 60, 40, 20],
    "R5": [100, 40],
    "R6": [200, 80],
}

MODEL_FILE_MAGIC = "feedpilot-model"
MODEL_FILE_VERSION = 1


@dataclass(frozen=True)
class LayerSpec:
    """Network layout: hidden widths plus input/output dimensionality."""

    hidden_sizes: tuple[int, ...]
    input_dim: int = 1
    output_dim: int = 1

    def __post_init__(self):
        object.__setattr__(self, "hidden_sizes", tuple(int(s) for s in self.hidden_sizes))
        if not self.hidden_sizes:
            raise ValidationError("hidden_sizes must be non-empty")
        if any(s < 1 for s in self.hidden_sizes):
            raise ValidationError(f"hidden sizes must be >= 1, got {self.hidden_sizes}")
        if self.input_dim < 1 or self.output_dim < 1:
            raise ValidationError("input_dim and output_dim must be >= 1")

    @property
    def dims(self) -> tuple[int, ...]:
        return (self.input_dim, *self.hidden_sizes, self.output_dim)

    @classmethod
    def named(cls, name: str, input_dim: int) -> "LayerSpec":
        if name not in MODEL_SPECS:
            raise ConfigError(f"unknown model spec {name!r}; choose from {sorted(MODEL_SPECS)}")
        return cls(hidden_sizes=tuple(MODEL_SPECS[name]), input_dim=input_dim)


@dataclass
class RegressionModel:
    """Weights and biases of one network; ReLU hidden layers, identity output."""

    spec: LayerSpec
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def __post_init__(self):
        dims = self.spec.dims
        if len(self.weights) != len(dims) - 1 or len(self.biases) != len(dims) - 1:
            raise ShapeError(
                f"expected {len(dims) - 1} layers, got {len(self.weights)} weights "
                f"and {len(self.biases)} biases"
            )
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (dims[i], dims[i + 1]) or b.shape != (dims[i + 1],):
                raise ShapeError(
                    f"layer {i} shapes {w.shape}/{b.shape} do not chain "
                    f"{dims[i]} -> {dims[i + 1]}"
                )
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise ValidationError(f"non-finite parameter in layer {i}")

    def copy(self) -> "RegressionModel":
        return RegressionModel(
            spec=self.spec,
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
        )


@dataclass(frozen=True)
class TrainConfig:
    """Gradient-descent settings.

    The defaults are the reference preset (1e6 iterations at learning rate
    1e-7); desk-scale runs pass far smaller budgets with a retuned rate.
    """

    iterations: int = 1_000_000
    learning_rate: float = 1e-7
    batch_size: int = 32
    seed: int = 0

    def __post_init__(self):
        if self.iterations < 1:
            raise ConfigError(f"iterations must be >= 1, got {self.iterations}")
        if not (math.isfinite(self.learning_rate) and self.learning_rate > 0):
            raise ConfigError(f"learning_rate must be finite and > 0, got {self.learning_rate}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")


REFERENCE_PRESET = TrainConfig()


def new_model(spec: LayerSpec, seed: int) -> RegressionModel:
    """Initialize weights uniformly in +-sqrt(6 / fan_in); biases start at zero."""
    rng = np.random.default_rng(seed)
    dims = spec.dims
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        limit = math.sqrt(6.0 / fan_in)
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return RegressionModel(spec=spec, weights=weights, biases=biases)


def _forward_batch(model: RegressionModel, x: np.ndarray) -> np.ndarray:
    """(n, input_dim) -> (n,) outputs."""
    a = x
    last = len(model.weights) - 1
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        a = a @ w + b
        if i != last:
            a = np.maximum(a, 0.0)
    return a[:, 0]


def forward(model: RegressionModel, x) -> float:
    """Evaluate the network on one input vector (or scalar for 1-d input)."""
    vec = np.atleast_1d(np.asarray(x, dtype=float))
    if vec.shape != (model.spec.input_dim,):
        raise ShapeError(
            f"input shape {vec.shape} does not match input_dim {model.spec.input_dim}"
        )
    return float(_forward_batch(model, vec[None, :])[0])


def loss_gradients(model: RegressionModel, x: np.ndarray, y: np.ndarray):
    """Mean-squared-error loss and its parameter gradients on a batch.

    Returns (loss, grads_w, grads_b) with gradients shaped like the model's
    weights and biases.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float).reshape(-1)
    if x.ndim != 2 or x.shape[1] != model.spec.input_dim:
        raise ShapeError(f"batch shape {x.shape} does not match input_dim")
    if x.shape[0] != y.shape[0]:
        raise ShapeError(f"batch has {x.shape[0]} inputs but {y.shape[0]} targets")
    n = x.shape[0]
    last = len(model.weights) - 1

    activations = [x]
    pre = []
    a = x
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        z = a @ w + b
        pre.append(z)
        a = z if i == last else np.maximum(z, 0.0)
        activations.append(a)

    pred = activations[-1][:, 0]
    err = pred - y
    with np.errstate(over="ignore"):  # overflow to inf is the divergence signal
        loss = float(np.mean(err**2))

    grads_w = [np.empty(0)] * len(model.weights)
    grads_b = [np.empty(0)] * len(model.biases)
    delta = (2.0 * err / n)[:, None]
    for i in range(last, -1, -1):
        if i != last:
            delta = delta * (pre[i] > 0.0)
        grads_w[i] = activations[i].T @ delta
        grads_b[i] = delta.sum(axis=0)
        if i > 0:
            delta = delta @ model.weights[i].T
    return loss, grads_w, grads_b


def dataset_loss(model: RegressionModel, x: np.ndarray, y: np.ndarray) -> float:
    pred = _forward_batch(model, np.asarray(x, dtype=float))
    with np.errstate(over="ignore"):
        return float(np.mean((pred - np.asarray(y, dtype=float)) ** 2))


@dataclass
class TrainResult:
    model: RegressionModel
    losses: np.ndarray
    loss_iterations: np.ndarray


def train(
    model: RegressionModel,
    dataset,
    config: TrainConfig,
    log_every: int | None = None,
) -> TrainResult:
    """Mini-batch gradient descent on mean squared error.

    One iteration is one batch step; batches walk a per-epoch shuffle seeded
    from ``config.seed``.  The loss curve holds the full-dataset loss before
    training and after every ``log_every`` iterations.  The input model is
    left untouched; the trained copy is returned.
    """
    pairs = list(dataset)
    if not pairs:
        raise EmptyInputError("training dataset is empty")
    x = np.array([np.atleast_1d(np.asarray(p[0], dtype=float)) for p in pairs])
    y = np.array([float(p[1]) for p in pairs])
    if x.shape[1] != model.spec.input_dim:
        raise ShapeError(
            f"dataset input dim {x.shape[1]} does not match model input_dim "
            f"{model.spec.input_dim}"
        )

    if log_every is None:
        log_every = max(1, config.iterations // 200)
    net = model.copy()
    rng = np.random.default_rng(config.seed)
    n = x.shape[0]
    batch = min(config.batch_size, n)
    order = rng.permutation(n)
    pos = 0

    losses = [dataset_loss(net, x, y)]
    loss_iters = [0]
    for it in range(1, config.iterations + 1):
        if pos + batch > n:
            order = rng.permutation(n)
            pos = 0
        idx = order[pos : pos + batch]
        pos += batch
        batch_loss, gw, gb = loss_gradients(net, x[idx], y[idx])
        if not math.isfinite(batch_loss):
            raise DivergenceError(f"non-finite loss at iteration {it}")
        for i in range(len(net.weights)):
            net.weights[i] -= config.learning_rate * gw[i]
            net.biases[i] -= config.learning_rate * gb[i]
        if it % log_every == 0 or it == config.iterations:
            full = dataset_loss(net, x, y)
            if not math.isfinite(full):
                raise DivergenceError(f"non-finite loss at iteration {it}")
            losses.append(full)
            loss_iters.append(it)
    return TrainResult(model=net, losses=np.array(losses), loss_iterations=np.array(loss_iters))


def predict_next(mx: RegressionModel, my: RegressionModel, normalized) -> np.ndarray:
    """Predict each nutriment's next normalized position.

    x' = mu_x(x); y' = mu_y(x, y).  Accepts a NormalizedFrame or an (n, 2)
    array; output order matches input order.
    """
    if mx.spec.input_dim != 1:
        raise ShapeError(f"mu_x must take 1 input, has input_dim {mx.spec.input_dim}")
    if my.spec.input_dim != 2:
        raise ShapeError(f"mu_y must take 2 inputs, has input_dim {my.spec.input_dim}")
    kappa = getattr(normalized, "kappa", normalized)
    k = np.asarray(kappa, dtype=float).reshape(-1, 2)
    if k.shape[0] == 0:
        return np.empty((0, 2))
    nx = _forward_batch(mx, k[:, :1])
    ny = _forward_batch(my, k)
    return np.stack([nx, ny], axis=1)


@dataclass(frozen=True)
class ErrorStats:
    """Distance statistics between predicted and true positions (pixels)."""

    n: int
    mean: float
    std: float
    stderr: float
    ci_lower: float
    ci_upper: float


def pair_errors(predicted, truth, formula: str = "euclidean") -> np.ndarray:
    """Per-pair error distances.

    ``euclidean`` is the point-to-point distance.  ``literal`` keeps the
    legacy selection formula: the scalar |x' - y'| stands in for both
    predicted coordinates before the distance to the truth point is taken.
    """
    pred = np.asarray(predicted, dtype=float).reshape(-1, 2)
    true = np.asarray(truth, dtype=float).reshape(-1, 2)
    if pred.shape != true.shape:
        raise ShapeError(f"prediction/truth lengths differ: {pred.shape[0]} vs {true.shape[0]}")
    if formula == "euclidean":
        return np.linalg.norm(pred - true, axis=1)
    if formula == "literal":
        s = np.abs(pred[:, 0] - pred[:, 1])
        return np.linalg.norm(true - s[:, None], axis=1)
    raise ConfigError(f"unknown eval formula {formula!r}; use 'euclidean' or 'literal'")


def eval_error(predicted, truth, formula: str = "euclidean") -> ErrorStats:
    """Mean, sample std, standard error, and 95% CI of the pair distances."""
    d = pair_errors(predicted, truth, formula)
    n = d.shape[0]
    if n == 0:
        raise EmptyInputError("eval_error needs at least one pair")
    mean = float(np.mean(d))
    std = float(np.std(d, ddof=1)) if n > 1 else 0.0
    stderr = std / math.sqrt(n)
    return ErrorStats(
        n=n,
        mean=mean,
        std=std,
        stderr=stderr,
        ci_lower=mean - 1.96 * stderr,
        ci_upper=mean + 1.96 * stderr,
    )


def select_best(stats) -> int:
    """Index of the lowest mean error; ties go to the lowest index."""
    means = [s.mean for s in stats]
    if not means:
        raise EmptyInputError("select_best needs at least one model")
    return int(np.argmin(means))


def save_model(path, model: RegressionModel) -> None:
    """Write a model as a self-describing text file (17 significant digits)."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{MODEL_FILE_MAGIC} {MODEL_FILE_VERSION}\n")
        fh.write(f"input_dim {model.spec.input_dim}\n")
        fh.write("hidden " + " ".join(str(s) for s in model.spec.hidden_sizes) + "\n")
        fh.write("activation relu\n")
        for w, b in zip(model.weights, model.biases):
            fh.write(f"layer {w.shape[0]} {w.shape[1]}\n")
            for row in w:
                fh.write(" ".join(f"{v:.17g}" for v in row) + "\n")
            fh.write("bias " + " ".join(f"{v:.17g}" for v in b) + "\n")


def load_model(path) -> RegressionModel:
    """Read a model file written by save_model."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    try:
        magic, version = lines[0].split()
        if magic != MODEL_FILE_MAGIC or int(version) != MODEL_FILE_VERSION:
            raise ValueError(f"unsupported model header {lines[0]!r}")
        if not lines[1].startswith("input_dim "):
            raise ValueError("missing input_dim")
        input_dim = int(lines[1].split()[1])
        hidden = tuple(int(t) for t in lines[2].split()[1:])
        if lines[3] != "activation relu":
            raise ValueError(f"unsupported activation line {lines[3]!r}")
        spec = LayerSpec(hidden_sizes=hidden, input_dim=input_dim)
        weights, biases = [], []
        i = 4
        for fan_in, fan_out in zip(spec.dims[:-1], spec.dims[1:]):
            head = lines[i].split()
            if head[0] != "layer" or (int(head[1]), int(head[2])) != (fan_in, fan_out):
                raise ValueError(f"bad layer header at line {i + 1}: {lines[i]!r}")
            i += 1
            rows = []
            for _ in range(fan_in):
                rows.append([float(t) for t in lines[i].split()])
                i += 1
            bias_tokens = lines[i].split()
            if bias_tokens[0] != "bias":
                raise ValueError(f"missing bias line at line {i + 1}")
            biases.append(np.array([float(t) for t in bias_tokens[1:]]))
            weights.append(np.array(rows))
            i += 1
    except (IndexError, ValueError) as exc:
        raise ValidationError(f"corrupt model file {path}: {exc}") from exc
    return RegressionModel(spec=spec, weights=weights, biases=biases)
