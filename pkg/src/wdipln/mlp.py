"""
A 2-2-1 ReLU network for two-bit logic gates, trained in software and then
executed on a single two-branch photonic neuron by reconfiguring it between
layers (configure-recycle).
"""

from __future__ import annotations

import csv
import enum
import io
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .circuit import Imbalance, evaluate
from .devices import PROBE_WAVELENGTH_NM
from .encoding import EncodingError
from .neuron import NeuronConfig, configure, reference_config, signed_readout

INPUT_PAIRS = ((0, 0), (0, 1), (1, 0), (1, 1))
PREDICTION_THRESHOLD = 0.5
WINDOW_HALF_WIDTH_PM = 50.0
WINDOW_STEP_PM = 1.0

# Uniform per-branch amplitude / phase spreads (fraction, rad).
NOISE_PRESETS = {
    "none": (0.0, 0.0),
    "mild": (0.02, 0.02),
    "hardware": (0.05, 0.05),
    "severe": (0.2, 0.3),
}


class TrainingError(RuntimeError):
    """No restart reached a correct classifier."""


class ExperimentError(RuntimeError):
    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage {stage}: {cause}")
        self.stage = stage


class GateTask(enum.Enum):
    AND = "and"
    OR = "or"
    XOR = "xor"

    @property
    def truth_table(self) -> tuple[tuple[tuple[int, int], int], ...]:
        op = {
            GateTask.AND: lambda a, b: a & b,
            GateTask.OR: lambda a, b: a | b,
            GateTask.XOR: lambda a, b: a ^ b,
        }[self]
        return tuple((pair, op(*pair)) for pair in INPUT_PAIRS)

    def arrays(self) -> tuple[np.ndarray, np.ndarray]:
        x = np.array([pair for pair, _ in self.truth_table], dtype=float)
        y = np.array([target for _, target in self.truth_table], dtype=float)
        return x, y

    @classmethod
    def parse(cls, name: str) -> "GateTask":
        try:
            return cls(name.lower())
        except ValueError:
            raise ValueError(f"unknown gate {name!r}; choose from and, or, xor") from None


def relu(z):
    return np.maximum(z, 0.0)


@dataclass(frozen=True)
class MlpModel:
    """``w[i, j]`` connects input i to hidden unit j; ``t`` the hidden units to the output."""

    w: np.ndarray
    b: np.ndarray
    t: np.ndarray
    c: float

    def __post_init__(self) -> None:
        w = np.array(self.w, dtype=float).reshape(2, 2)
        b = np.array(self.b, dtype=float).reshape(2)
        t = np.array(self.t, dtype=float).reshape(2)
        c = float(self.c)
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b)) and np.all(np.isfinite(t)) and math.isfinite(c)):
            raise ValueError("model parameters must be finite")
        for name, value in (("w", w), ("b", b), ("t", t)):
            value.setflags(write=False)
            object.__setattr__(self, name, value)
        object.__setattr__(self, "c", c)

    @classmethod
    def zeros(cls) -> "MlpModel":
        return cls(np.zeros((2, 2)), np.zeros(2), np.zeros(2), 0.0)

    def params(self) -> np.ndarray:
        return np.concatenate([self.w.ravel(), self.b, self.t, [self.c]])

    @classmethod
    def from_params(cls, p) -> "MlpModel":
        p = np.asarray(p, dtype=float)
        return cls(p[:4].reshape(2, 2), p[4:6], p[6:8], p[8])

    def hidden_pre(self, x) -> np.ndarray:
        return np.atleast_2d(x) @ self.w + self.b

    def hidden(self, x) -> np.ndarray:
        return relu(self.hidden_pre(x))

    def output_pre(self, x) -> np.ndarray:
        return self.hidden(x) @ self.t + self.c

    def forward(self, x) -> np.ndarray:
        return relu(self.output_pre(x))

    def predict(self, x) -> np.ndarray:
        return (self.forward(x) >= PREDICTION_THRESHOLD).astype(int)

    def to_dict(self) -> dict:
        return {"w": self.w.tolist(), "b": self.b.tolist(), "t": self.t.tolist(), "c": self.c}

    @classmethod
    def from_dict(cls, data: dict) -> "MlpModel":
        return cls(data["w"], data["b"], data["t"], data["c"])


@dataclass(frozen=True)
class Hyperparams:
    learning_rate: float = 0.1
    epochs: int = 4000
    max_restarts: int = 50
    init_scale: float = 1.0
    margin: float = 0.25
    tolerance: float = 1e-3


def loss_and_grad(model: MlpModel, x, y) -> tuple[float, np.ndarray]:
    """Mean squared error over the batch and its gradient w.r.t. ``params()``."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    pre_h = x @ model.w + model.b
    h = relu(pre_h)
    pre_o = h @ model.t + model.c
    out = relu(pre_o)
    err = out - y
    loss = float(np.mean(err**2))

    d_pre_o = (2.0 / len(y)) * err * (pre_o > 0)
    d_t = h.T @ d_pre_o
    d_c = d_pre_o.sum()
    d_pre_h = np.outer(d_pre_o, model.t) * (pre_h > 0)
    d_w = x.T @ d_pre_h
    d_b = d_pre_h.sum(axis=0)
    return loss, np.concatenate([d_w.ravel(), d_b, d_t, [d_c]])


def _accepted(model: MlpModel, x, y, margin: float) -> bool:
    out = model.forward(x)
    correct = np.all((out >= PREDICTION_THRESHOLD) == (y >= PREDICTION_THRESHOLD))
    return bool(correct and np.all(np.abs(out - PREDICTION_THRESHOLD) >= margin))


def train(task: GateTask, seed: int = 0, hyperparams: Hyperparams | None = None) -> MlpModel:
    """Full-batch gradient descent with random restarts; deterministic in ``seed``."""
    hp = hyperparams or Hyperparams()
    x, y = task.arrays()
    rng = np.random.default_rng(seed)
    for _ in range(hp.max_restarts):
        p = rng.normal(0.0, hp.init_scale, 9)
        p[4:6] = rng.uniform(0.0, 0.5 * hp.init_scale, 2)  # start with live hidden units
        model = MlpModel.from_params(p)
        for _ in range(hp.epochs):
            loss, grad = loss_and_grad(model, x, y)
            if loss < hp.tolerance:
                break
            model = MlpModel.from_params(model.params() - hp.learning_rate * grad)
        if _accepted(model, x, y, hp.margin):
            return model
    raise TrainingError(f"{task.name} did not converge in {hp.max_restarts} restarts with seed {seed}; try another seed")


def _activation_pattern(model: MlpModel, x) -> tuple:
    return tuple((model.hidden_pre(x) > 0).ravel()) + tuple(np.atleast_1d(model.output_pre(x) > 0))


def gradient_check(model: MlpModel, datapoint, eps: float = 1e-5) -> float:
    """
    Largest ``|analytic - numeric| / max(1, |analytic|)`` over parameters.

    Parameters whose +-eps perturbation changes any ReLU on/off state sit at
    a kink and are skipped.
    """
    x, y = datapoint
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    _, analytic = loss_and_grad(model, x, y)
    base = model.params()
    pattern = _activation_pattern(model, x)
    worst = 0.0
    for k in range(base.size):
        step = np.zeros_like(base)
        step[k] = eps
        plus = MlpModel.from_params(base + step)
        minus = MlpModel.from_params(base - step)
        if _activation_pattern(plus, x) != pattern or _activation_pattern(minus, x) != pattern:
            continue
        numeric = (loss_and_grad(plus, x, y)[0] - loss_and_grad(minus, x, y)[0]) / (2 * eps)
        worst = max(worst, abs(analytic[k] - numeric) / max(1.0, abs(analytic[k])))
    return worst


def activation_3db(readout: float, reference: float) -> float:
    """
    Zero below half the reference power, pass the amplitude otherwise.

    ``readout`` is a signed amplitude and ``reference`` a power; negative
    readouts are clipped as by a ReLU.
    """
    if reference <= 0:
        raise ValueError("reference must be positive")
    if readout <= 0 or readout * readout < reference / 2:
        return 0.0
    return float(readout)


# ------------------------------------------------------------ experiment


@dataclass
class StageRow:
    input_pair: tuple[float, float]
    config: dict
    readout: float
    pre_activation: float
    activated: float
    software: float
    window_mean: float | None = None
    window_std: float | None = None


@dataclass
class StageLog:
    name: str
    weights: tuple[float, float]
    bias: float
    input_scale: float
    weight_scale: float
    rows: list[StageRow] = field(default_factory=list)


@dataclass
class ExperimentLog:
    task: str
    model: dict
    noise: dict | None
    activation: str
    probe_wavelength: float
    stages: list[StageLog]
    predictions: list[int]
    targets: list[int]
    accuracy: float

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["input_pair", "raw_readout", "activated", "target", "correct"])
        final = self.stages[-1]
        for pair, row, pred, target in zip(INPUT_PAIRS, final.rows, self.predictions, self.targets):
            writer.writerow(
                [f"{pair[0]}{pair[1]}", f"{row.readout:.9f}", f"{row.activated:.9f}", target, int(pred == target)]
            )
        return buf.getvalue()


@dataclass(frozen=True)
class NoiseSpec:
    amplitude_spread: float
    phase_spread: float
    seed: int = 0

    @classmethod
    def preset(cls, name: str, seed: int = 0) -> "NoiseSpec | None":
        if name not in NOISE_PRESETS:
            raise ValueError(f"unknown noise preset {name!r}; choose from {sorted(NOISE_PRESETS)}")
        amp, phase = NOISE_PRESETS[name]
        return None if amp == phase == 0 else cls(amp, phase, seed)

    def sample(self, n: int = 2) -> Imbalance:
        return Imbalance.sample(n, np.random.default_rng(self.seed), self.amplitude_spread, self.phase_spread)


def _stage(
    name: str,
    weights,
    bias: float,
    inputs: list[tuple[float, float]],
    *,
    binary_inputs: bool,
    imbalance: Imbalance | None,
    activation: str,
    probe: float,
    window: bool,
    software: np.ndarray,
) -> StageLog:
    w = np.asarray(weights, dtype=float)
    x_all = np.asarray(inputs, dtype=float)
    u = 1.0 if binary_inputs else max(1.0, float(x_all.max()))
    s = max(float(np.max(np.abs(w))), abs(bias) / u, 1e-12)
    n = len(w)
    log = StageLog(name, tuple(w.tolist()), float(bias), u, s)
    encoding = "binary" if binary_inputs else "continuous"
    lam_window = probe + np.arange(-WINDOW_HALF_WIDTH_PM, WINDOW_HALF_WIDTH_PM + 0.5, WINDOW_STEP_PM) * 1e-3
    for x, soft in zip(x_all, software):
        config = NeuronConfig(
            weights=tuple(w / s),
            inputs=tuple(x / u),
            bias=bias / (s * u),
            probe_wavelength=probe,
        )
        try:
            circuit = configure(config, "wdipln", input_encoding=encoding, imbalance=imbalance)
            reference = configure(reference_config(config), "wdipln", input_encoding=encoding, imbalance=imbalance)
        except (EncodingError, ValueError) as exc:
            raise ExperimentError(name, exc) from exc
        ref_field = evaluate(reference, probe)
        raw = signed_readout(evaluate(circuit, probe), ref_field)
        gain = n * s * u
        z = gain * raw
        activated = float(relu(z)) if activation == "relu" else gain * activation_3db(raw, 1.0)
        row = StageRow(
            input_pair=tuple(float(v) for v in x),
            config=json.loads(config.to_json()),
            readout=raw,
            pre_activation=z,
            activated=activated,
            software=float(soft),
        )
        if window:
            out = evaluate(circuit, lam_window)
            ref = evaluate(reference, lam_window)
            mags = np.abs(out) / np.abs(ref)
            signs = np.where((out * np.conj(ref)).real < 0, -1.0, 1.0)
            values = gain * signs * mags
            row.window_mean = float(values.mean())
            row.window_std = float(values.std())
        log.rows.append(row)
    return log


def run_gate_experiment(
    task: GateTask,
    model: MlpModel,
    noise: NoiseSpec | Imbalance | None = None,
    *,
    activation: str = "relu",
    probe_wavelength: float = PROBE_WAVELENGTH_NM,
    window: bool = True,
) -> ExperimentLog:
    """
    Configure-recycle on one two-branch neuron with a bias line.

    Stage outputs are rescaled to model units, so with no noise each stage
    reproduces the software layer it stands for.
    """
    if activation not in ("relu", "3db"):
        raise ValueError("activation must be 'relu' or '3db'")
    imbalance = noise.sample(2) if isinstance(noise, NoiseSpec) else noise
    x, y = task.arrays()
    pairs = [tuple(p) for p in x]
    kwargs = dict(imbalance=imbalance, activation=activation, probe=probe_wavelength, window=window)
    soft_h = model.hidden(x)
    h1 = _stage("h1", model.w[:, 0], model.b[0], pairs, binary_inputs=True, software=soft_h[:, 0], **kwargs)
    h2 = _stage("h2", model.w[:, 1], model.b[1], pairs, binary_inputs=True, software=soft_h[:, 1], **kwargs)
    hidden = [(r1.activated, r2.activated) for r1, r2 in zip(h1.rows, h2.rows)]
    out = _stage("out", model.t, model.c, hidden, binary_inputs=False, software=model.forward(x), **kwargs)

    predictions = [int(r.activated >= PREDICTION_THRESHOLD) for r in out.rows]
    targets = [int(v) for v in y]
    accuracy = sum(p == t for p, t in zip(predictions, targets)) / len(targets)
    if isinstance(noise, NoiseSpec):
        noise_info = asdict(noise)
    elif isinstance(noise, Imbalance):
        noise_info = asdict(noise)
    else:
        noise_info = None
    return ExperimentLog(
        task=task.value,
        model=model.to_dict(),
        noise=noise_info,
        activation=activation,
        probe_wavelength=probe_wavelength,
        stages=[h1, h2, out],
        predictions=predictions,
        targets=targets,
        accuracy=accuracy,
    )
