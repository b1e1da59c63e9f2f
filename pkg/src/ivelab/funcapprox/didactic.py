"""One-dimensional value-prediction problem with a latent model.

Four small networks share a 32-dim latent space:

* encoder ``z = tanh(MLP_omega(s))``
* value head ``MLP_phi(z)``
* transition ``LSTM_theta(z, 0)``: one step of a gated cell from zero memory
* reward head ``MLP_theta_r(z)``

The k-step prediction rolls the transition ``k`` times, collecting a reward
after every step, and bootstraps from the value head at the last latent:
``sum_{j=1..k} gamma^(j-1) r(z_j) + gamma^k v(z_k)``.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..ive import IveReport
from . import autodiff as ad

HIDDEN = 32
LATENT = 32
GROUPS = ("omega", "phi", "theta_r", "theta_p")


class DidacticError(ValueError):
    pass


@dataclass(frozen=True)
class DidacticConfig:
    gamma: float = 0.9
    n_points: int = 10
    k_max: int = 10
    learning_rate: float = 1e-3
    weight_decay: float = 1e-4
    steps: int = 5000
    seed: int = 0
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8

    def __post_init__(self):
        if not 0.0 <= self.gamma < 1.0:
            raise DidacticError("gamma must lie in [0, 1)")
        if self.k_max < 1:
            raise DidacticError("k_max must be at least 1")
        if self.steps < 0:
            raise DidacticError("steps must be non-negative")


@dataclass
class DidacticParams:
    omega: dict[str, np.ndarray]
    phi: dict[str, np.ndarray]
    theta_r: dict[str, np.ndarray]
    theta_p: dict[str, np.ndarray]

    def items(self):
        """``("group.name", array)`` pairs in a fixed order."""
        for group in GROUPS:
            for name, arr in getattr(self, group).items():
                yield f"{group}.{name}", arr

    def copy(self) -> DidacticParams:
        return DidacticParams(
            *({k: v.copy() for k, v in getattr(self, g).items()} for g in GROUPS)
        )

    def map(self, fn) -> DidacticParams:
        return DidacticParams(
            *({k: fn(f"{g}.{k}", v) for k, v in getattr(self, g).items()} for g in GROUPS)
        )

    def get(self, key: str) -> np.ndarray:
        group, name = key.split(".")
        return getattr(self, group)[name]


def _dense(rng, fan_in, fan_out):
    # random biases: with zero biases z = 0 is a fixed point of the cell and
    # every deep latent lands on the ELU kink
    scale = 1.0 / np.sqrt(fan_in)
    return scale * rng.standard_normal((fan_in, fan_out)), scale * rng.standard_normal(fan_out)


def _mlp_params(rng, n_in, n_out):
    w1, b1 = _dense(rng, n_in, HIDDEN)
    w2, b2 = _dense(rng, HIDDEN, n_out)
    return {"w1": w1, "b1": b1, "w2": w2, "b2": b2}


def init_params(seed: int) -> DidacticParams:
    rng = np.random.default_rng(seed)
    omega = _mlp_params(rng, 1, LATENT)
    phi = _mlp_params(rng, LATENT, 1)
    theta_r = _mlp_params(rng, LATENT, 1)
    wx, b = _dense(rng, LATENT, 4 * LATENT)
    wh, _ = _dense(rng, LATENT, 4 * LATENT)
    return DidacticParams(omega, phi, theta_r, {"wx": wx, "wh": wh, "b": b})


# -- recorded (differentiable) forward -------------------------------------


def _mlp(x, p):
    return ad.elu(x @ p["w1"] + p["b1"]) @ p["w2"] + p["b2"]


def _cell(z, p):
    batch = z.shape[0]
    h0 = ad.Tensor(np.zeros((batch, LATENT)), op="const")
    c0 = ad.Tensor(np.zeros((batch, LATENT)), op="const")
    gates = z @ p["wx"] + h0 @ p["wh"] + p["b"]
    i = ad.sigmoid(ad.columns(gates, 0, LATENT))
    f = ad.sigmoid(ad.columns(gates, LATENT, 2 * LATENT))
    g = ad.tanh(ad.columns(gates, 2 * LATENT, 3 * LATENT))
    o = ad.sigmoid(ad.columns(gates, 3 * LATENT, 4 * LATENT))
    c = f * c0 + i * g
    return o * ad.tanh(c)


def leaves(params: DidacticParams) -> DidacticParams:
    """Wrap every parameter array in a leaf tensor."""
    return params.map(lambda _, arr: ad.Tensor(arr))


def kmpv_graph(tensors: DidacticParams, s, k_max: int, gamma: float) -> list[ad.Tensor]:
    """Recorded predictions ``[N, 1]`` for ``k = 0..k_max`` sharing one unroll."""
    s = ad.Tensor(np.asarray(s, dtype=float).reshape(-1, 1), op="const")
    z = ad.tanh(_mlp(s, tensors.omega))
    preds = [_mlp(z, tensors.phi)]
    rewards = None
    for k in range(1, k_max + 1):
        z = _cell(z, tensors.theta_p)
        term = _mlp(z, tensors.theta_r) * gamma ** (k - 1)
        rewards = term if rewards is None else rewards + term
        preds.append(rewards + _mlp(z, tensors.phi) * gamma**k)
    return preds


def forward_kmpv(params: DidacticParams, s, k: int, gamma: float, k_max: int = 10):
    """Recorded k-MPV at states ``s``; returns ``(prediction, leaf tensors)``.

    ``k = 0`` touches only the encoder and value head.
    """
    if k > k_max or k < 0:
        raise DidacticError(f"k must lie in [0, {k_max}], got {k}")
    tensors = leaves(params)
    return kmpv_graph(tensors, s, k, gamma)[k], tensors


def loss_graph(tensors: DidacticParams, states, targets, k_max: int, gamma: float, ks=None):
    """Summed squared error over points and horizons ``ks`` (default all)."""
    preds = kmpv_graph(tensors, states, k_max, gamma)
    targets = np.asarray(targets, dtype=float).reshape(-1, 1)
    ks = range(k_max + 1) if ks is None else ks
    loss = None
    for k in ks:
        term = ad.total(ad.square(preds[k] - targets))
        loss = term if loss is None else loss + term
    return loss


def loss_and_grads(params: DidacticParams, states, targets, k_max: int, gamma: float, ks=None):
    tensors = leaves(params)
    loss = loss_graph(tensors, states, targets, k_max, gamma, ks)
    ad.backward(loss)
    return float(loss.value), tensors.map(lambda _, t: t.gradient)


# -- plain numpy forward (no graph) ----------------------------------------


def _np_elu(x):
    return np.where(x > 0, x, np.expm1(np.minimum(x, 0.0)))


def _np_mlp(x, p):
    return _np_elu(x @ p["w1"] + p["b1"]) @ p["w2"] + p["b2"]


def _np_sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def _np_cell(z, p):
    h0 = np.zeros((z.shape[0], LATENT))
    gates = z @ p["wx"] + h0 @ p["wh"] + p["b"]
    i = _np_sigmoid(gates[:, :LATENT])
    f = _np_sigmoid(gates[:, LATENT : 2 * LATENT])
    g = np.tanh(gates[:, 2 * LATENT : 3 * LATENT])
    o = _np_sigmoid(gates[:, 3 * LATENT :])
    return o * np.tanh(f * 0.0 + i * g)


def encode(params: DidacticParams, s) -> np.ndarray:
    return np.tanh(_np_mlp(np.asarray(s, dtype=float).reshape(-1, 1), params.omega))


def latents(params: DidacticParams, s, k_max: int) -> list[np.ndarray]:
    zs = [encode(params, s)]
    for _ in range(k_max):
        zs.append(_np_cell(zs[-1], params.theta_p))
    return zs


def kmpv_matrix(params: DidacticParams, s, k_max: int, gamma: float) -> np.ndarray:
    """Predictions ``[N, k_max + 1]`` without recording a graph."""
    zs = latents(params, s, k_max)
    out = np.empty((zs[0].shape[0], k_max + 1))
    out[:, 0] = _np_mlp(zs[0], params.phi)[:, 0]
    rewards = np.zeros(zs[0].shape[0])
    for k in range(1, k_max + 1):
        rewards = rewards + gamma ** (k - 1) * _np_mlp(zs[k], params.theta_r)[:, 0]
        out[:, k] = rewards + gamma**k * _np_mlp(zs[k], params.phi)[:, 0]
    return out


def loss_value(params: DidacticParams, states, targets, k_max: int, gamma: float) -> float:
    preds = kmpv_matrix(params, states, k_max, gamma)
    return float(np.sum((preds - np.asarray(targets, dtype=float).reshape(-1, 1)) ** 2))


def per_k_mse(params: DidacticParams, states, targets, k_max: int, gamma: float) -> np.ndarray:
    preds = kmpv_matrix(params, states, k_max, gamma)
    return np.mean((preds - np.asarray(targets, dtype=float).reshape(-1, 1)) ** 2, axis=0)


# -- training ---------------------------------------------------------------


@dataclass
class AdamWState:
    m: DidacticParams
    v: DidacticParams
    step: int = 0


def adamw_step(params: DidacticParams, grads: DidacticParams, state: AdamWState,
               config: DidacticConfig) -> DidacticParams:
    """Adam with decoupled weight decay: ``p <- p (1 - lr wd) - lr m_hat / (sqrt(v_hat) + eps)``.

    The decay acts on the parameters directly and never enters the moments.
    """
    b1, b2 = config.adam_beta1, config.adam_beta2
    lr, wd = config.learning_rate, config.weight_decay
    state.step += 1
    bc1 = 1.0 - b1**state.step
    bc2 = 1.0 - b2**state.step

    def update(key, p):
        g = grads.get(key)
        m = b1 * state.m.get(key) + (1.0 - b1) * g
        v = b2 * state.v.get(key) + (1.0 - b2) * g * g
        state.m.get(key)[...] = m
        state.v.get(key)[...] = v
        return p * (1.0 - lr * wd) - lr * (m / bc1) / (np.sqrt(v / bc2) + config.adam_eps)

    return params.map(update)


@dataclass
class Dataset:
    states: np.ndarray
    targets: np.ndarray
    source: str = "default: sin(2 s) at evenly spaced s in [-2, 2]"

    def __post_init__(self):
        self.states = np.asarray(self.states, dtype=float).reshape(-1)
        self.targets = np.asarray(self.targets, dtype=float).reshape(-1)
        if self.states.size == 0:
            raise DidacticError("dataset is empty")
        if self.states.shape != self.targets.shape:
            raise DidacticError("states and targets differ in length")
        if np.any(np.abs(self.states) > 3.0):
            raise DidacticError("states must lie in [-3, 3]")

    def to_csv(self) -> str:
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["s", "target"])
        for s, t in zip(self.states, self.targets):
            writer.writerow([repr(float(s)), repr(float(t))])
        return out.getvalue()

    @classmethod
    def from_csv(cls, text: str, source: str = "csv") -> Dataset:
        reader = csv.DictReader(io.StringIO(text))
        if reader.fieldnames != ["s", "target"]:
            raise DidacticError(f"dataset header must be s,target; got {reader.fieldnames}")
        rows = [(float(r["s"]), float(r["target"])) for r in reader]
        return cls(np.array([r[0] for r in rows]), np.array([r[1] for r in rows]), source)

    @classmethod
    def load(cls, path) -> Dataset:
        return cls.from_csv(Path(path).read_text(), source=str(path))


def default_dataset(n_points: int = 10) -> Dataset:
    states = np.linspace(-2.0, 2.0, n_points)
    return Dataset(states, np.sin(2.0 * states))


@dataclass
class TrainLog:
    losses: list[float] = field(default_factory=list)


def train_didactic(dataset: Dataset, config: DidacticConfig,
                   params: DidacticParams | None = None,
                   log: TrainLog | None = None) -> DidacticParams:
    """Full-batch AdamW on the summed squared error of every k-MPV."""
    if params is None:
        params = init_params(config.seed)
    params = params.copy()
    zeros = params.map(lambda _, p: np.zeros_like(p))
    state = AdamWState(zeros, zeros.copy())
    for _ in range(config.steps):
        loss, grads = loss_and_grads(
            params, dataset.states, dataset.targets, config.k_max, config.gamma
        )
        if log is not None:
            log.losses.append(loss)
        params = adamw_step(params, grads, state, config)
    return params


# -- ensemble curves --------------------------------------------------------


def ive_curve(params: DidacticParams, probe_states, n: int, gamma: float,
              k_max: int = 10) -> IveReport:
    """k-MPVs ``k = 0..n`` at every probe, with mean and population std."""
    if n > k_max:
        raise DidacticError(f"n must be <= k_max ({k_max})")
    return IveReport.from_members(kmpv_matrix(params, probe_states, n, gamma))


def curve_to_csv(probe_states, report: IveReport) -> tuple[str, str]:
    """``s,k,value`` members and ``s,mu,sigma`` summary tables."""
    members = io.StringIO()
    writer = csv.writer(members, lineterminator="\n")
    writer.writerow(["s", "k", "value"])
    for i, s in enumerate(probe_states):
        for k in report.ks:
            writer.writerow([repr(float(s)), k, repr(float(report.kmpv[i, k]))])
    summary = io.StringIO()
    writer = csv.writer(summary, lineterminator="\n")
    writer.writerow(["s", "mu", "sigma"])
    for i, s in enumerate(probe_states):
        writer.writerow([repr(float(s)), repr(float(report.mean[i])), repr(float(report.std[i]))])
    return members.getvalue(), summary.getvalue()


def params_to_arrays(params: DidacticParams) -> dict[str, np.ndarray]:
    return dict(params.items())
