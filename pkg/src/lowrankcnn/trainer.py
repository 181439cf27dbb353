"""From-scratch minibatch SGD training of an ArchSpec.

The learning rate follows gamma_t = gamma0 / (1 + gamma0 * lambda * t),
optionally with declarative manual drop factors at given iterations.  The
update is w <- w - gamma_t * (g + lambda * w) with biases excluded from
decay; momentum is available but off by default.  Everything random
(shuffles, augmentation) derives from the config seed, so a full run is
bit-reproducible.
"""

import io
import math
from dataclasses import dataclass, field

import numpy as np

from . import data as datamod
from . import initialization, network, ops, zoo
from .errors import ArchError, TrainingDiverged
from .rng import Rng


@dataclass(frozen=True)
class TrainConfig:
    gamma0: float = 0.01
    weight_decay: float = 0.0  # the schedule's lambda
    batch: int = 64
    epochs: int = 1
    seed: int = 0
    momentum: float = 0.0
    crop: bool = False
    mirror: bool = False
    pad: int = 4
    zca: bool = False
    zca_epsilon: float = 1e-2
    lr_drops: tuple = ()  # ((iteration, factor), ...)
    max_iterations: int = 0  # 0 = no cap; caps total SGD steps when set

    def __post_init__(self):
        if self.gamma0 <= 0:
            raise ValueError(f"gamma0 must be > 0, got {self.gamma0}")
        if self.weight_decay < 0:
            raise ValueError(f"weight_decay must be >= 0, got {self.weight_decay}")
        if self.batch < 1:
            raise ValueError(f"batch must be >= 1, got {self.batch}")


_CONFIG_KEYS = {
    "gamma0": float, "lambda": float, "batch": int, "epochs": int,
    "seed": int, "momentum": float, "crop": None, "mirror": None,
    "pad": int, "zca": None, "zca_epsilon": float, "lr_drops": None,
    "max_iterations": int,
}


def parse_train_config(text):
    """TrainConfig from the key = value text format (see archfile)."""
    from .archfile import parse_kv

    scalars, layers = parse_kv(text)
    if layers:
        raise ArchError("training config cannot contain layer lines")
    kwargs = {}
    for key, raw in scalars.items():
        if key not in _CONFIG_KEYS:
            raise ArchError(f"unknown training config key {key!r}")
        conv = _CONFIG_KEYS[key]
        if key == "lambda":
            kwargs["weight_decay"] = float(raw)
        elif key == "lr_drops":
            drops = []
            for piece in filter(None, (p.strip() for p in raw.split(","))):
                it, factor = piece.split(":")
                drops.append((int(it), float(factor)))
            kwargs["lr_drops"] = tuple(drops)
        elif conv is None:  # booleans
            if raw not in ("true", "false"):
                raise ArchError(f"{key} must be true or false, got {raw!r}")
            kwargs[key] = raw == "true"
        else:
            kwargs[key] = conv(raw)
    return TrainConfig(**kwargs)


def dump_train_config(cfg):
    drops = ",".join(f"{it}:{f}" for it, f in cfg.lr_drops)
    return "\n".join([
        f"gamma0 = {cfg.gamma0!r}",
        f"lambda = {cfg.weight_decay!r}",
        f"batch = {cfg.batch}",
        f"epochs = {cfg.epochs}",
        f"seed = {cfg.seed}",
        f"momentum = {cfg.momentum!r}",
        f"crop = {str(cfg.crop).lower()}",
        f"mirror = {str(cfg.mirror).lower()}",
        f"pad = {cfg.pad}",
        f"zca = {str(cfg.zca).lower()}",
        f"zca_epsilon = {cfg.zca_epsilon!r}",
        f"lr_drops = {drops}",
        f"max_iterations = {cfg.max_iterations}",
    ]) + "\n"


def lr_schedule(gamma0, weight_decay, t, drops=()):
    """gamma0 / (1 + gamma0 * lambda * t), times drop factors already due."""
    gamma = gamma0 / (1.0 + gamma0 * weight_decay * t)
    for it, factor in drops:
        if t >= it:
            gamma *= factor
    return gamma


def sgd_step(params, grads, gamma, weight_decay, momentum=0.0, velocity=None):
    """In-place SGD update; biases are exempt from weight decay."""
    for i, block in enumerate(params):
        for role, w in block.items():
            g = grads[i][role]
            if weight_decay and not role.endswith("bias"):
                g = g + weight_decay * w
            if momentum and velocity is not None:
                v = velocity[i][role]
                v *= momentum
                v += g
                g = v
            w -= gamma * g
    return params


@dataclass
class TrainHistory:
    iterations: list = field(default_factory=list)  # (t, gamma_t, loss)
    epochs: list = field(default_factory=list)      # (epoch, train_acc, val_acc)

    def loss_trace(self):
        return np.array([row[2] for row in self.iterations])

    def csv(self):
        buf = io.StringIO()
        buf.write("kind,t,gamma,loss,train_acc,val_acc\n")
        for t, gamma, loss in self.iterations:
            buf.write(f"iter,{t},{gamma!r},{loss!r},,\n")
        for epoch, tr, va in self.epochs:
            va_s = "" if va is None else repr(va)
            buf.write(f"epoch,{epoch},,,{tr!r},{va_s}\n")
        return buf.getvalue()


@dataclass
class TrainResult:
    params: list
    history: TrainHistory
    zca: datamod.ZcaTransform | None = None


def _forward_logits(arch, params, x, want_cache=False):
    return network.forward(arch, params, x, want_cache=want_cache)


def train(arch, train_data, config, val_data=None, dtype=np.float32,
          progress=None):
    """Train `arch` from scratch on (images, labels).

    Returns TrainResult(params, history, zca).  The per-epoch train
    accuracy is the running average over the minibatch predictions seen
    during that epoch; validation accuracy is a full pass over `val_data`
    transformed with the training-set statistics.  Aborts with
    TrainingDiverged if the loss goes non-finite.
    """
    problems = zoo.validate(arch)
    if problems:
        raise ArchError(f"{arch.name}: " + "; ".join(problems))
    images, labels = train_data
    images = np.ascontiguousarray(images, dtype=dtype)
    labels = np.asarray(labels, dtype=np.int64)

    transform = None
    if config.zca:
        transform = datamod.zca_fit(images, epsilon=config.zca_epsilon)
        images = transform.apply(images)
        if val_data is not None:
            val_data = (transform.apply(
                np.ascontiguousarray(val_data[0], dtype=dtype)), val_data[1])

    params = network.cast_params(
        initialization.init_network(arch, initialization.InitSpec(seed=config.seed)),
        dtype,
    )
    velocity = network.zero_like_params(params) if config.momentum else None
    history = TrainHistory()
    root = Rng(config.seed)
    n = images.shape[0]
    t = 0
    done = False
    for epoch in range(config.epochs):
        order = root.derive("shuffle", epoch).permutation(n)
        seen = correct = 0
        for start in range(0, n, config.batch):
            idx = order[start : start + config.batch]
            xb = images[idx]
            if config.crop or config.mirror:
                xb = datamod.augment_batch(
                    xb, root.derive("augment", t), pad=config.pad,
                    crop=config.crop, do_mirror=config.mirror,
                )
            yb = labels[idx]
            logits, cache = _forward_logits(arch, params, xb, want_cache=True)
            loss, grad_logits = ops.softmax_xent(
                logits.astype(np.float64), yb
            )
            if not math.isfinite(loss):
                raise TrainingDiverged(t, loss)
            correct += int((logits.argmax(axis=1) == yb).sum())
            seen += len(yb)
            grads, _ = network.backward(
                arch, params, cache, grad_logits.astype(dtype)
            )
            gamma = lr_schedule(config.gamma0, config.weight_decay, t,
                                config.lr_drops)
            sgd_step(params, grads, dtype(gamma), config.weight_decay,
                     config.momentum, velocity)
            history.iterations.append((t, gamma, loss))
            t += 1
            if config.max_iterations and t >= config.max_iterations:
                done = True
                break
        train_acc = correct / seen if seen else float("nan")
        val_acc = None
        if val_data is not None:
            val_acc = evaluate(arch, params, val_data)["top1"]
        history.epochs.append((epoch, train_acc, val_acc))
        if progress is not None:
            progress(epoch, train_acc, val_acc)
        if done:
            break
    return TrainResult(params, history, transform)


def evaluate(arch, params, eval_data, batch=256, k=5, transform=None):
    """Single center-view top-1 / top-k accuracy; no test-time augmentation."""
    images, labels = eval_data
    dtype = next(
        (v.dtype for block in params for v in block.values()), np.float64
    )
    images = np.ascontiguousarray(images, dtype=dtype)
    if transform is not None:
        images = transform.apply(images)
    labels = np.asarray(labels, dtype=np.int64)
    top1 = topk = 0
    for start in range(0, images.shape[0], batch):
        xb = images[start : start + batch]
        yb = labels[start : start + batch]
        logits = _forward_logits(arch, params, xb)
        ranked = np.argsort(-logits, axis=1, kind="stable")
        top1 += int((ranked[:, 0] == yb).sum())
        topk += int((ranked[:, :k] == yb[:, None]).any(axis=1).sum())
    n = images.shape[0]
    return {"top1": top1 / n, f"top{k}": topk / n}
