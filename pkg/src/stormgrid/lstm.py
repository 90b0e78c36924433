"""From-scratch stacked LSTM with full-sequence backpropagation through
time, inverted dropout on every layer input, a dense tanh output head,
and plain SGD with optional global-norm gradient clipping.

Everything is float64. The network is three recurrent layers (the depth
is overridable only through an explicit flag) of the standard four-gate
cell: gate pre-activations a = U x + W h_prev + b in gate order
(input, forget, output, candidate), sigmoid on the first three, tanh on
the candidate, then c = f * c_prev + i * g and h = o * tanh(c). The head
emits tanh(V h + b_y), so outputs live strictly in (-1, 1); downstream
they are read as grid displacements times ``output_scale``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

STANDARD_DEPTH = 3


class ShapeMismatchError(ValueError):
    """Array arguments whose shapes disagree with the network."""


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


@dataclass
class LstmLayerParams:
    """One layer's weights, gates stacked along the first axis in order
    (i, f, o, g): U is (4h, n_in), W is (4h, h), b is (4h,)."""

    U: np.ndarray
    W: np.ndarray
    b: np.ndarray

    @property
    def n_h(self) -> int:
        return self.W.shape[1]

    def gate(self, name: str) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(U, W, b) views for gate 'i', 'f', 'o' or 'g'."""
        k = "ifog".index(name)
        h = self.n_h
        block = slice(k * h, (k + 1) * h)
        return self.U[block], self.W[block], self.b[block]


@dataclass
class LstmNetwork:
    n_x: int
    n_h: int
    n_y: int
    layers: list[LstmLayerParams]
    V: np.ndarray
    b_y: np.ndarray
    dropout: float
    seed: int
    rng: np.random.Generator
    output_scale: np.ndarray | None = None  # (n_y,) displacement units per unit output
    feature_columns: tuple[str, ...] = ()

    def __post_init__(self):
        if self.output_scale is None:
            self.output_scale = np.ones(self.n_y)

    def param_arrays(self) -> list[np.ndarray]:
        """All trainable tensors in canonical order (layer U, W, b; head V, b_y)."""
        out = []
        for layer in self.layers:
            out.extend([layer.U, layer.W, layer.b])
        out.extend([self.V, self.b_y])
        return out


@dataclass
class Gradients:
    layers: list[LstmLayerParams]
    V: np.ndarray
    b_y: np.ndarray

    def arrays(self) -> list[np.ndarray]:
        out = []
        for layer in self.layers:
            out.extend([layer.U, layer.W, layer.b])
        out.extend([self.V, self.b_y])
        return out

    def global_norm(self) -> float:
        return float(np.sqrt(sum(float((g * g).sum()) for g in self.arrays())))


@dataclass
class ForwardTrace:
    """Per-layer activation cache from one forward pass; exactly what
    backward() needs, nothing more."""

    inputs: list[np.ndarray]  # post-dropout layer inputs, (T, n_in)
    masks: list[np.ndarray]  # scaled dropout masks (ones at inference)
    gate_i: list[np.ndarray]
    gate_f: list[np.ndarray]
    gate_o: list[np.ndarray]
    gate_g: list[np.ndarray]
    cell: list[np.ndarray]
    tanh_cell: list[np.ndarray]
    hidden: list[np.ndarray]
    outputs: np.ndarray  # (T, n_y)
    training: bool


def init_network(
    n_x: int,
    n_h: int,
    n_y: int,
    dropout: float = 0.1,
    seed: int = 0,
    n_layers: int = STANDARD_DEPTH,
    allow_depth_override: bool = False,
) -> LstmNetwork:
    """Seed-deterministic initialization: each weight matrix uniform in
    +-sqrt(6 / (fan_in + fan_out)), forget-gate biases 1, all else 0."""
    if min(n_x, n_h, n_y) <= 0:
        raise ValueError("network dimensions must be positive")
    if not 0.0 <= dropout < 1.0:
        raise ValueError(f"dropout {dropout} outside [0, 1)")
    if n_layers != STANDARD_DEPTH and not allow_depth_override:
        raise ValueError(
            f"{n_layers} layers requested; the standard depth is {STANDARD_DEPTH} "
            "(pass allow_depth_override=True to experiment)"
        )
    rng = np.random.default_rng(seed)
    layers = []
    for l in range(n_layers):
        n_in = n_x if l == 0 else n_h
        lim_u = np.sqrt(6.0 / (n_in + n_h))
        lim_w = np.sqrt(6.0 / (n_h + n_h))
        U = rng.uniform(-lim_u, lim_u, size=(4 * n_h, n_in))
        W = rng.uniform(-lim_w, lim_w, size=(4 * n_h, n_h))
        b = np.zeros(4 * n_h)
        b[n_h : 2 * n_h] = 1.0
        layers.append(LstmLayerParams(U, W, b))
    lim_v = np.sqrt(6.0 / (n_h + n_y))
    V = rng.uniform(-lim_v, lim_v, size=(n_y, n_h))
    return LstmNetwork(
        n_x=n_x,
        n_h=n_h,
        n_y=n_y,
        layers=layers,
        V=V,
        b_y=np.zeros(n_y),
        dropout=dropout,
        seed=seed,
        rng=rng,
    )


def init_state(net: LstmNetwork) -> list[tuple[np.ndarray, np.ndarray]]:
    """Zeroed (h, c) per layer."""
    return [(np.zeros(net.n_h), np.zeros(net.n_h)) for _ in net.layers]


def lstm_step(
    net: LstmNetwork,
    state: list[tuple[np.ndarray, np.ndarray]],
    x: np.ndarray,
    training: bool = False,
    rng: np.random.Generator | None = None,
    collect: bool = False,
):
    """Advance every layer one time step. Returns (y, new_state, caches);
    caches is a per-layer activation list only when ``collect``."""
    if x.shape != (net.n_x,):
        raise ShapeMismatchError(f"input row shape {x.shape}, expected ({net.n_x},)")
    rng = net.rng if rng is None else rng
    h_ = net.n_h
    new_state = []
    caches = [] if collect else None
    inp = x
    for layer, (h_prev, c_prev) in zip(net.layers, state):
        if training and net.dropout > 0.0:
            keep = 1.0 - net.dropout
            mask = (rng.random(inp.shape) < keep) / keep
            xin = inp * mask
        else:
            mask = np.ones_like(inp)
            xin = inp
        a = layer.U @ xin + layer.W @ h_prev + layer.b
        sig = _sigmoid(a[: 3 * h_])
        i, f, o = sig[:h_], sig[h_ : 2 * h_], sig[2 * h_ :]
        g = np.tanh(a[3 * h_ :])
        c = f * c_prev + i * g
        tc = np.tanh(c)
        h = o * tc
        new_state.append((h, c))
        if collect:
            caches.append((xin, mask, i, f, o, g, c, tc, h))
        inp = h
    y = np.tanh(net.V @ inp + net.b_y)
    return y, new_state, caches


def forward(
    net: LstmNetwork,
    sequence: np.ndarray,
    training: bool = False,
    rng: np.random.Generator | None = None,
) -> tuple[np.ndarray, ForwardTrace]:
    """Run a (T, n_x) sequence from zero state; returns (T, n_y) outputs
    and the activation trace for backward()."""
    sequence = np.asarray(sequence, dtype=np.float64)
    if sequence.ndim != 2 or sequence.shape[1] != net.n_x:
        raise ShapeMismatchError(
            f"sequence shape {sequence.shape}, expected (T, {net.n_x})"
        )
    T = sequence.shape[0]
    state = init_state(net)
    per_step = []
    outputs = np.empty((T, net.n_y))
    for t in range(T):
        y, state, caches = lstm_step(
            net, state, sequence[t], training=training, rng=rng, collect=True
        )
        outputs[t] = y
        per_step.append(caches)

    L = len(net.layers)
    stack = lambda k, l: np.stack([per_step[t][l][k] for t in range(T)])
    trace = ForwardTrace(
        inputs=[stack(0, l) for l in range(L)],
        masks=[stack(1, l) for l in range(L)],
        gate_i=[stack(2, l) for l in range(L)],
        gate_f=[stack(3, l) for l in range(L)],
        gate_o=[stack(4, l) for l in range(L)],
        gate_g=[stack(5, l) for l in range(L)],
        cell=[stack(6, l) for l in range(L)],
        tanh_cell=[stack(7, l) for l in range(L)],
        hidden=[stack(8, l) for l in range(L)],
        outputs=outputs,
        training=training,
    )
    return outputs, trace


def mse_loss(pred: np.ndarray, target: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean over all elements of the squared error, and its gradient
    2 (pred - target) / N with respect to pred."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ShapeMismatchError(f"pred {pred.shape} vs target {target.shape}")
    diff = pred - target
    return float(np.mean(diff * diff)), 2.0 * diff / diff.size


def backward(net: LstmNetwork, trace: ForwardTrace, output_grads: np.ndarray) -> Gradients:
    """Exact full-sequence BPTT. ``output_grads`` is dLoss/dY, (T, n_y)."""
    output_grads = np.asarray(output_grads, dtype=np.float64)
    if output_grads.shape != trace.outputs.shape:
        raise ShapeMismatchError(
            f"output grads {output_grads.shape} vs outputs {trace.outputs.shape}"
        )
    if len(trace.hidden) != len(net.layers) or trace.hidden[0].shape[1] != net.n_h:
        raise ShapeMismatchError("trace does not match this network")

    T = trace.outputs.shape[0]
    h_ = net.n_h
    grads = Gradients(
        layers=[
            LstmLayerParams(np.zeros_like(l.U), np.zeros_like(l.W), np.zeros_like(l.b))
            for l in net.layers
        ],
        V=np.zeros_like(net.V),
        b_y=np.zeros_like(net.b_y),
    )

    # dense tanh head
    dz = output_grads * (1.0 - trace.outputs**2)  # (T, n_y)
    grads.V += dz.T @ trace.hidden[-1]
    grads.b_y += dz.sum(axis=0)
    d_hidden = dz @ net.V  # (T, n_h) flowing into the top layer's h_t

    for l in reversed(range(len(net.layers))):
        I, F, O, G = trace.gate_i[l], trace.gate_f[l], trace.gate_o[l], trace.gate_g[l]
        C, TC, H = trace.cell[l], trace.tanh_cell[l], trace.hidden[l]
        W = net.layers[l].W
        DA = np.empty((T, 4 * h_))
        dh_carry = np.zeros(h_)
        dc_carry = np.zeros(h_)
        for t in range(T - 1, -1, -1):
            dh = d_hidden[t] + dh_carry
            do = dh * TC[t]
            dc = dc_carry + dh * O[t] * (1.0 - TC[t] ** 2)
            di = dc * G[t]
            dg = dc * I[t]
            c_prev = C[t - 1] if t > 0 else 0.0
            df = dc * c_prev
            DA[t, :h_] = di * I[t] * (1.0 - I[t])
            DA[t, h_ : 2 * h_] = df * F[t] * (1.0 - F[t])
            DA[t, 2 * h_ : 3 * h_] = do * O[t] * (1.0 - O[t])
            DA[t, 3 * h_ :] = dg * (1.0 - G[t] ** 2)
            dh_carry = W.T @ DA[t]
            dc_carry = dc * F[t]

        X = trace.inputs[l]
        H_prev = np.vstack([np.zeros((1, h_)), H[:-1]])
        grads.layers[l].U += DA.T @ X
        grads.layers[l].W += DA.T @ H_prev
        grads.layers[l].b += DA.sum(axis=0)
        if l > 0:
            # into the lower layer's h_t, through this layer's dropout mask
            d_hidden = (DA @ net.layers[l].U) * trace.masks[l]
    return grads


def sgd_step(
    net: LstmNetwork,
    grads: Gradients,
    lr: float,
    clip_norm: float | None = None,
) -> LstmNetwork:
    """In-place parameter update theta -= lr * grad, with all gradients
    rescaled to a global 2-norm of ``clip_norm`` when they exceed it."""
    if lr <= 0.0:
        raise ValueError(f"learning rate must be positive, got {lr}")
    scale = 1.0
    if clip_norm is not None:
        norm = grads.global_norm()
        if norm > clip_norm:
            scale = clip_norm / norm
    for p, g in zip(net.param_arrays(), grads.arrays()):
        p -= lr * scale * g
    return net


def snapshot_params(net: LstmNetwork) -> list[np.ndarray]:
    return [p.copy() for p in net.param_arrays()]


def restore_params(net: LstmNetwork, snapshot: list[np.ndarray]) -> None:
    for p, s in zip(net.param_arrays(), snapshot):
        p[...] = s


def save_checkpoint(path: str, net: LstmNetwork, extra: dict | None = None) -> None:
    """Self-describing, byte-deterministic artifact with every parameter
    tensor plus run metadata; reload is bit-exact."""
    meta = {
        "n_x": net.n_x,
        "n_h": net.n_h,
        "n_y": net.n_y,
        "n_layers": len(net.layers),
        "dropout": net.dropout,
        "seed": net.seed,
        "feature_columns": list(net.feature_columns),
        "extra": extra or {},
    }
    arrays = {"V": net.V, "b_y": net.b_y, "output_scale": net.output_scale}
    for l, layer in enumerate(net.layers):
        arrays[f"U{l}"] = layer.U
        arrays[f"W{l}"] = layer.W
        arrays[f"b{l}"] = layer.b
    with open(path, "wb") as fh:
        np.savez(fh, meta=json.dumps(meta, sort_keys=True), **arrays)


def load_checkpoint(path: str) -> tuple[LstmNetwork, dict]:
    """Rebuild the network from a checkpoint. The RNG restarts from the
    stored seed; inference does not consume it."""
    with np.load(path) as data:
        meta = json.loads(str(data["meta"]))
        layers = [
            LstmLayerParams(data[f"U{l}"], data[f"W{l}"], data[f"b{l}"])
            for l in range(meta["n_layers"])
        ]
        net = LstmNetwork(
            n_x=meta["n_x"],
            n_h=meta["n_h"],
            n_y=meta["n_y"],
            layers=layers,
            V=data["V"],
            b_y=data["b_y"],
            dropout=meta["dropout"],
            seed=meta["seed"],
            rng=np.random.default_rng(meta["seed"]),
            output_scale=data["output_scale"],
            feature_columns=tuple(meta["feature_columns"]),
        )
    return net, meta["extra"]
