"""Training procedures for the three networks.

Each trainer is single-threaded over steps with a sample order fixed by the
seed (one permutation of the dataset per epoch), so a seed fully determines
losses and checkpoints.  Checkpoints ``<module>_last.ckpt`` and
``<module>_best.ckpt`` (lowest per-step training loss) plus a
``<module>_run.json`` record are written to ``out_dir``.
"""

import json
import logging
import math
import os
import time
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import __version__
from . import autodiff as ad
from .ahqrg import AhqrgConfig, ahqrg_forward, init_ahqrg
from .checkpoint import save_checkpoint
from .errors import ConfigurationError, DivergenceError
from .lfrefine import LfrefineConfig, init_lfrefine, lfrefine_forward
from .losses import epi_gradient_loss, gradient_l1, l1_loss
from .optim import Adam
from .ttsr import TtsrConfig, init_ttsr, ttsr_forward

log = logging.getLogger(__name__)

MODULES = ("ahqrg", "ttsr", "lfrefine")


@dataclass
class TrainConfig:
    module: str = "ahqrg"
    learning_rate: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    batch_size: int = 1
    max_steps: int = 500
    seed: int = 0
    l1_weight: float = 1.0
    grad_weight: float = 1.0
    epi_weight: float = 1.0
    channels: int = 16
    stages: int = 4
    dtype: str = "float32"

    def __post_init__(self):
        if self.module not in MODULES:
            raise ConfigurationError(f"module must be one of {MODULES}, got {self.module!r}")
        if not self.learning_rate > 0:
            raise ConfigurationError("learning_rate must be positive")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ConfigurationError("betas must lie in [0, 1)")
        if self.batch_size < 1 or self.max_steps < 0:
            raise ConfigurationError("batch_size must be >= 1 and max_steps >= 0")

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigurationError(f"unknown TrainConfig keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_json(cls, path, **overrides):
        with open(path) as fh:
            d = json.load(fh)
        d.update({k: v for k, v in overrides.items() if v is not None})
        return cls.from_dict(d)


@dataclass
class RunRecord:
    config: dict
    steps: list = field(default_factory=list)
    metrics: dict = field(default_factory=dict)
    checkpoint_path: str = ""
    wall_clock: float = 0.0
    version: str = __version__

    def to_dict(self):
        return asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text):
        return cls(**json.loads(text))

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(self.to_json())
            fh.write("\n")


class SampleOrder:
    """Epoch-wise permutations of ``n`` items drawn from one seeded generator."""

    def __init__(self, n, rng):
        self.n, self.rng, self.queue = n, rng, []

    def next(self):
        if not self.queue:
            self.queue = list(self.rng.permutation(self.n))
        return int(self.queue.pop(0))


def network_config(module, config, angular):
    if module == "ahqrg":
        return AhqrgConfig(angular=angular, channels=config.channels, stages=config.stages, dtype=config.dtype)
    if module == "ttsr":
        return TtsrConfig(channels=config.channels, dtype=config.dtype)
    return LfrefineConfig(angular=angular, channels=config.channels, stages=config.stages, dtype=config.dtype)


def _image_loss(pred, target, config):
    loss = ad.scale(l1_loss(pred, target), config.l1_weight)
    return ad.add(loss, ad.scale(gradient_l1(pred, target), config.grad_weight))


def _run(module, params, net_config, config, out_dir, sample_loss, n_samples):
    """Generic Adam loop.  ``sample_loss(index, rng)`` builds one sample's loss graph."""
    os.makedirs(out_dir, exist_ok=True)
    rng = np.random.default_rng(config.seed)
    order = SampleOrder(n_samples, rng)
    opt = Adam(params, config.learning_rate, config.beta1, config.beta2, config.epsilon)
    record = RunRecord(config={"train": asdict(config), "network": net_config.to_dict()})
    meta = {"module": module, "config": net_config.to_dict()}
    last_path = os.path.join(out_dir, f"{module}_last.ckpt")
    best_path = os.path.join(out_dir, f"{module}_best.ckpt")
    record.checkpoint_path = last_path
    best_loss, best_step = math.inf, 0
    best = {k: p.data.copy() for k, p in params.items()}
    start = time.perf_counter()

    for step in range(1, config.max_steps + 1):
        opt.zero_grad()
        total = None
        for _ in range(config.batch_size):
            loss = sample_loss(order.next(), rng)
            total = loss if total is None else ad.add(total, loss)
        total = ad.scale(total, 1.0 / config.batch_size)
        value = total.item()
        record.steps.append({"step": step, "loss": value})
        if not math.isfinite(value):
            record.metrics.update(status="diverged", diverged_at=step)
            record.wall_clock = time.perf_counter() - start
            record.save(os.path.join(out_dir, f"{module}_run.json"))
            raise DivergenceError(f"{module}: non-finite loss at step {step}", record)
        if value < best_loss:
            best_loss, best_step = value, step
            best = {k: p.data.copy() for k, p in params.items()}
        total.backward()
        opt.step()
        if step % 50 == 0 or step == 1:
            log.info("%s step %d loss %.6f", module, step, value)

    save_checkpoint(last_path, params, dict(meta, step=config.max_steps))
    save_checkpoint(best_path, best, dict(meta, step=best_step))
    losses = [s["loss"] for s in record.steps]
    record.metrics.update(
        status="ok",
        initial_loss=losses[0] if losses else None,
        final_loss=losses[-1] if losses else None,
        best_loss=best_loss if losses else None,
        best_step=best_step,
    )
    record.wall_clock = time.perf_counter() - start
    record.save(os.path.join(out_dir, f"{module}_run.json"))
    return record


def train_ahqrg(dataset, config, out_dir, params=None):
    """Fit the reference generator to the ground-truth HR central view."""
    angular = dataset[0][1].angular_dims
    net = network_config("ahqrg", config, angular)
    params = params if params is not None else init_ahqrg(net, seed=config.seed)

    def sample_loss(i, rng):
        hr, lr = dataset[i]
        return _image_loss(ahqrg_forward(lr, params, net), hr.central_view, config)

    record = _run("ahqrg", params, net, config, out_dir, sample_loss, len(dataset))
    return params, record


def train_ttsr(dataset, config, out_dir, params=None):
    """Per-view training with the ground-truth HR central view as reference."""
    net = network_config("ttsr", config, None)
    params = params if params is not None else init_ttsr(net, seed=config.seed)

    def sample_loss(i, rng):
        hr, lr = dataset[i]
        U, V = lr.angular_dims
        u, v = int(rng.integers(0, U)), int(rng.integers(0, V))
        out, _ = ttsr_forward(lr.views[u, v], hr.central_view, params, net)
        return _image_loss(out, hr.views[u, v], config)

    record = _run("ttsr", params, net, config, out_dir, sample_loss, len(dataset))
    return params, record


def train_lfrefine(dataset, config, out_dir, ahqrg_model, ttsr_model, params=None):
    """Refine frozen upstream outputs; upstream models are only read."""
    from .pipeline import ttsr_stage

    angular = dataset[0][1].angular_dims
    net = network_config("lfrefine", config, angular)
    params = params if params is not None else init_lfrefine(net, seed=config.seed)
    inputs = [ttsr_stage(lr, ahqrg_model, ttsr_model)[1] for _, lr in dataset]

    def sample_loss(i, rng):
        hr = dataset[i][0]
        out = lfrefine_forward(inputs[i], params, net)
        loss = _image_loss(out, hr.views, config)
        return ad.add(loss, ad.scale(epi_gradient_loss(out, hr.views), config.epi_weight))

    record = _run("lfrefine", params, net, config, out_dir, sample_loss, len(dataset))
    return params, record
