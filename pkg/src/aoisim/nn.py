"""From-scratch feedforward Q-network: forward pass, backprop, Adam, weight blobs.

The network is a small MLP with batch normalization on the raw input features
(they span many orders of magnitude: joules, steps, amperes) and inverted
dropout between the hidden layers. Training math runs in float64; serialized
weights are little-endian float32 so a full parameter set fits comfortably in
one small downlink transfer.
"""
from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass, field

import numpy as np

DEFAULT_DIMS = (3, 4, 8, 8, 4, 2)
DROPOUT_RATE = 0.10
BN_MOMENTUM = 0.9
# Small enough that the amperes-scale input feature (variance ~1e-9) is not
# flattened by the epsilon term.
BN_EPS = 1e-8

MAGIC = b"QNETBLOB"
FORMAT_VERSION = 1

TRAIN = "train"
INFER = "infer"


class BlobError(ValueError):
    """Base class for weight-blob decoding failures."""


class BlobMagicError(BlobError):
    pass


class BlobVersionError(BlobError):
    pass


class BlobChecksumError(BlobError):
    pass


@dataclass
class QNetwork:
    """MLP parameters plus batch-norm state for the input features.

    `version` increments whenever trainable parameters change, so stale
    forward caches can be rejected in `backward`.
    """

    layer_dims: tuple
    weights: list = field(default_factory=list)
    biases: list = field(default_factory=list)
    bn_gamma: np.ndarray = None
    bn_beta: np.ndarray = None
    bn_running_mean: np.ndarray = None
    bn_running_var: np.ndarray = None
    dropout_rate: float = DROPOUT_RATE
    mode: str = INFER
    version: int = 0

    @property
    def n_layers(self):
        return len(self.layer_dims) - 1

    def trainable(self):
        """Name -> live array view of every trainable parameter."""
        params = {}
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            params[f"w{i}"] = w
            params[f"b{i}"] = b
        params["bn_gamma"] = self.bn_gamma
        params["bn_beta"] = self.bn_beta
        return params

    def trainable_count(self):
        return sum(int(a.size) for a in self.trainable().values())

    def parameter_count(self):
        """Trainable parameters plus batch-norm running statistics."""
        return self.trainable_count() + self.bn_running_mean.size + self.bn_running_var.size


def init_network(seed, layer_dims=DEFAULT_DIMS):
    """Build a network whose parameters are a pure function of the seed.

    Weights use a uniform fan-in He-style init, biases are zero, batch norm
    starts at the identity transform with running stats (0, 1).
    """
    rng = np.random.default_rng(seed)
    dims = tuple(int(d) for d in layer_dims)
    net = QNetwork(layer_dims=dims)
    for n_in, n_out in zip(dims[:-1], dims[1:]):
        limit = np.sqrt(6.0 / n_in)
        net.weights.append(rng.uniform(-limit, limit, size=(n_in, n_out)))
        net.biases.append(np.zeros(n_out))
    n_feat = dims[0]
    net.bn_gamma = np.ones(n_feat)
    net.bn_beta = np.zeros(n_feat)
    net.bn_running_mean = np.zeros(n_feat)
    net.bn_running_var = np.ones(n_feat)
    return net


def clone(net):
    """Deep copy of all parameters and statistics."""
    out = QNetwork(layer_dims=net.layer_dims, dropout_rate=net.dropout_rate, mode=net.mode)
    out.weights = [w.copy() for w in net.weights]
    out.biases = [b.copy() for b in net.biases]
    out.bn_gamma = net.bn_gamma.copy()
    out.bn_beta = net.bn_beta.copy()
    out.bn_running_mean = net.bn_running_mean.copy()
    out.bn_running_var = net.bn_running_var.copy()
    return out


def forward(net, batch, mode=INFER, rng=None):
    """Run the network on a (batch, n_in) matrix of state vectors.

    Returns (q_values, cache). Infer mode is deterministic: dropout is off and
    batch norm uses running statistics; its cache is None. Train mode needs a
    generator for the dropout masks, normalizes with batch statistics, and
    updates the running stats by exponential moving average.
    """
    x = np.asarray(batch, dtype=float)
    if x.ndim != 2 or x.shape[1] != net.layer_dims[0]:
        raise ValueError(
            f"expected input of shape (batch, {net.layer_dims[0]}), got {x.shape}"
        )
    if mode not in (TRAIN, INFER):
        raise ValueError(f"unknown mode {mode!r}")
    train = mode == TRAIN
    if train:
        if x.shape[0] < 2:
            raise ValueError("train-mode forward needs a batch of at least 2 "
                             "(batch variance is undefined otherwise)")
        if rng is None:
            raise ValueError("train-mode forward needs a random generator for dropout")
        mu = x.mean(axis=0)
        var = x.var(axis=0)
        net.bn_running_mean = BN_MOMENTUM * net.bn_running_mean + (1.0 - BN_MOMENTUM) * mu
        net.bn_running_var = BN_MOMENTUM * net.bn_running_var + (1.0 - BN_MOMENTUM) * var
    else:
        mu = net.bn_running_mean
        var = net.bn_running_var
    inv_std = 1.0 / np.sqrt(var + BN_EPS)
    xhat = (x - mu) * inv_std
    h = net.bn_gamma * xhat + net.bn_beta

    n_hidden = net.n_layers - 1
    inputs = [h]          # input seen by each linear layer
    pre_acts = []         # pre-activation z per hidden layer
    masks = []            # inverted dropout masks (None where inactive)
    for i in range(net.n_layers):
        z = inputs[-1] @ net.weights[i] + net.biases[i]
        if i == net.n_layers - 1:
            q = z  # linear output layer: Q-values are unbounded
            break
        pre_acts.append(z)
        a = np.maximum(z, 0.0)
        if train and i < n_hidden - 1 and net.dropout_rate > 0.0:
            keep = 1.0 - net.dropout_rate
            mask = (rng.random(a.shape) < keep) / keep
            a = a * mask
            masks.append(mask)
        else:
            masks.append(None)
        inputs.append(a)

    if not train:
        return q, None
    cache = {
        "net": net,
        "version": net.version,
        "x": x,
        "mu": mu,
        "var": var,
        "inv_std": inv_std,
        "xhat": xhat,
        "inputs": inputs,
        "pre_acts": pre_acts,
        "masks": masks,
    }
    return q, cache


def backward(net, cache, dloss_dq):
    """Backprop a loss gradient w.r.t. the Q-values through a train-mode cache.

    Returns a dict of gradients keyed like `net.trainable()`, including the
    batch-norm backward through the batch statistics.
    """
    if cache is None or cache.get("net") is not net or cache.get("version") != net.version:
        raise ValueError("forward cache does not match the network parameters")
    g = np.asarray(dloss_dq, dtype=float)
    grads = {}
    for i in range(net.n_layers - 1, -1, -1):
        grads[f"w{i}"] = cache["inputs"][i].T @ g
        grads[f"b{i}"] = g.sum(axis=0)
        g = g @ net.weights[i].T
        if i > 0:
            mask = cache["masks"][i - 1]
            if mask is not None:
                g = g * mask
            g = g * (cache["pre_acts"][i - 1] > 0.0)

    # g is now the gradient w.r.t. the batch-norm output.
    x, mu, inv_std, xhat = cache["x"], cache["mu"], cache["inv_std"], cache["xhat"]
    n = x.shape[0]
    grads["bn_gamma"] = (g * xhat).sum(axis=0)
    grads["bn_beta"] = g.sum(axis=0)
    dxhat = g * net.bn_gamma
    dvar = (dxhat * (x - mu)).sum(axis=0) * -0.5 * inv_std**3
    dmu = (-dxhat * inv_std).sum(axis=0) + dvar * (-2.0 * (x - mu)).mean(axis=0)
    grads["_dx"] = dxhat * inv_std + dvar * 2.0 * (x - mu) / n + dmu / n
    return grads


@dataclass
class AdamState:
    """Adam moment estimates; lazily shaped on the first step."""

    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_update(params, grads, opt):
    """One bias-corrected Adam step applied in place to a dict of arrays."""
    opt.step_count += 1
    t = opt.step_count
    b1, b2 = opt.beta1, opt.beta2
    for name, p in params.items():
        g = grads[name]
        m = opt.m.get(name)
        if m is None:
            m = opt.m[name] = np.zeros_like(p)
        v = opt.v.get(name)
        if v is None:
            v = opt.v[name] = np.zeros_like(p)
        m += (1.0 - b1) * (g - m)
        v += (1.0 - b2) * (g * g - v)
        m_hat = m / (1.0 - b1**t)
        v_hat = v / (1.0 - b2**t)
        p -= opt.learning_rate * m_hat / (np.sqrt(v_hat) + opt.eps)


def adam_step(net, grads, opt):
    """Apply Adam to every trainable parameter of the network."""
    adam_update(net.trainable(), grads, opt)
    net.version += 1
    return net, opt


def sync_target(policy, target):
    """Copy all parameters and running statistics from policy into target."""
    if policy.layer_dims != target.layer_dims:
        raise ValueError("policy/target architecture mismatch")
    for dst, src in zip(target.weights, policy.weights):
        np.copyto(dst, src)
    for dst, src in zip(target.biases, policy.biases):
        np.copyto(dst, src)
    np.copyto(target.bn_gamma, policy.bn_gamma)
    np.copyto(target.bn_beta, policy.bn_beta)
    np.copyto(target.bn_running_mean, policy.bn_running_mean)
    np.copyto(target.bn_running_var, policy.bn_running_var)
    target.version += 1


def _payload_arrays(net):
    arrays = []
    for w, b in zip(net.weights, net.biases):
        arrays.append(w)
        arrays.append(b)
    arrays += [net.bn_gamma, net.bn_beta, net.bn_running_mean, net.bn_running_var]
    return arrays


def serialize(net):
    """Pack the network into a compact binary blob.

    Layout: magic, format version (u16), layer count (u8), layer dims (u16
    each), parameters as little-endian float32 in a fixed order, then a CRC32
    of everything before it.
    """
    head = bytearray()
    head += MAGIC
    head += struct.pack("<H", FORMAT_VERSION)
    head += struct.pack("<B", len(net.layer_dims))
    head += struct.pack(f"<{len(net.layer_dims)}H", *net.layer_dims)
    body = b"".join(a.astype("<f4").tobytes() for a in _payload_arrays(net))
    blob = bytes(head) + body
    return blob + struct.pack("<I", zlib.crc32(blob))


def deserialize(blob):
    """Decode a weight blob, validating magic, version and checksum."""
    if len(blob) < len(MAGIC) + 2 + 1 + 4:
        raise BlobError("blob too short")
    if blob[: len(MAGIC)] != MAGIC:
        raise BlobMagicError("bad magic string")
    off = len(MAGIC)
    (version,) = struct.unpack_from("<H", blob, off)
    off += 2
    if version != FORMAT_VERSION:
        raise BlobVersionError(f"unsupported format version {version}")
    stored_crc = struct.unpack("<I", blob[-4:])[0]
    if zlib.crc32(blob[:-4]) != stored_crc:
        raise BlobChecksumError("checksum mismatch")
    (n_dims,) = struct.unpack_from("<B", blob, off)
    off += 1
    if len(blob) < off + 2 * n_dims + 4:
        raise BlobError("blob too short for declared layer dims")
    dims = struct.unpack_from(f"<{n_dims}H", blob, off)
    off += 2 * n_dims

    net = QNetwork(layer_dims=tuple(int(d) for d in dims))
    expected = sum(a_in * a_out + a_out for a_in, a_out in zip(dims[:-1], dims[1:]))
    expected += 4 * dims[0]
    payload = blob[off:-4]
    if len(payload) != 4 * expected:
        raise BlobError(f"payload holds {len(payload) // 4} floats, expected {expected}")
    values = np.frombuffer(payload, dtype="<f4").astype(float)
    pos = 0

    def take(shape):
        nonlocal pos
        size = int(np.prod(shape))
        out = values[pos : pos + size].reshape(shape).copy()
        pos += size
        return out

    for n_in, n_out in zip(dims[:-1], dims[1:]):
        net.weights.append(take((n_in, n_out)))
        net.biases.append(take((n_out,)))
    n_feat = dims[0]
    net.bn_gamma = take((n_feat,))
    net.bn_beta = take((n_feat,))
    net.bn_running_mean = take((n_feat,))
    net.bn_running_var = take((n_feat,))
    if np.any(net.bn_running_var < 0.0):
        raise BlobError("negative running variance in blob")
    return net
