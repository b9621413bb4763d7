"""Feed-forward reconstruction map with manual backprop and Adam.

Hidden layers use tanh, the output layer is affine. Training supports the
pointwise squared-error loss over matched (input, target) rows and the
distribution-matching loss, which pushes each cell's delay-space measure
through the network and penalizes its squared MMD to the paired
full-state measure.
"""

from dataclasses import dataclass, field

import numpy as np

from .metrics import KernelSpec, _mmd2_raw, _mmd_grad_raw, mse

POINTWISE = "pointwise"
MEASURE = "measure"


@dataclass(frozen=True)
class MlpParams:
    layer_dims: tuple
    weights: list = field(repr=False)
    biases: list = field(repr=False)

    def copy(self) -> "MlpParams":
        return MlpParams(self.layer_dims,
                         [w.copy() for w in self.weights],
                         [b.copy() for b in self.biases])

    @property
    def n_layers(self) -> int:
        return len(self.weights)


@dataclass
class AdamState:
    m_w: list
    v_w: list
    m_b: list
    v_b: list
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    lr: float = 1e-3


@dataclass(frozen=True)
class TrainConfig:
    n_steps: int
    lr: float = 1e-3
    seed: int = 0
    loss: str = POINTWISE
    kernel: KernelSpec = field(default_factory=KernelSpec.energy)
    minibatch_per_measure: int | None = None

    def __post_init__(self):
        if self.n_steps < 0:
            raise ValueError("n_steps must be nonnegative")
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        if self.loss not in (POINTWISE, MEASURE):
            raise ValueError(f"loss must be '{POINTWISE}' or '{MEASURE}'")


def init_mlp(layer_dims, seed: int = 0) -> MlpParams:
    """Glorot-uniform weights, zero biases, reproducible per seed."""
    layer_dims = tuple(int(d) for d in layer_dims)
    if len(layer_dims) < 2:
        raise ValueError("need at least input and output dims")
    if any(d < 1 for d in layer_dims):
        raise ValueError("layer dims must be positive")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(layer_dims[:-1], layer_dims[1:]):
        lim = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-lim, lim, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MlpParams(layer_dims, weights, biases)


def _forward_acts(params: MlpParams, batch: np.ndarray) -> list:
    acts = [batch]
    a = batch
    last = params.n_layers - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        z = a @ w
        z += b
        if i != last:
            np.tanh(z, out=z)  # in place: this layer's activation buffer
        acts.append(z)
        a = z
    return acts


def forward(params: MlpParams, batch) -> np.ndarray:
    """Map a (B, d_in) batch through the network."""
    batch = np.atleast_2d(np.asarray(batch, dtype=np.float64))
    if batch.shape[1] != params.layer_dims[0]:
        raise ValueError(
            f"input width {batch.shape[1]} does not match layer_dims[0]={params.layer_dims[0]}"
        )
    return _forward_acts(params, batch)[-1]


def _backward(params: MlpParams, acts: list, grad_out: np.ndarray):
    """Backpropagate d(loss)/d(output) to per-layer weight/bias gradients.

    Consumes the hidden activation buffers (tanh' is formed in place), so
    callers must read anything they need from ``acts`` beforehand.
    """
    g_w = [None] * params.n_layers
    g_b = [None] * params.n_layers
    g = grad_out
    for i in range(params.n_layers - 1, -1, -1):
        g_w[i] = acts[i].T @ g
        g_b[i] = g.sum(axis=0)
        if i > 0:
            g = g @ params.weights[i].T
            a = acts[i]
            np.multiply(a, a, out=a)
            np.subtract(1.0, a, out=a)
            g *= a
    return g_w, g_b


def _pointwise_loss_and_grads(params, inputs, targets):
    acts = _forward_acts(params, inputs)
    resid = acts[-1] - targets
    loss = float((resid ** 2).sum(axis=1).mean())
    grad_out = (2.0 / len(inputs)) * resid
    return loss, _backward(params, acts, grad_out)


def grad_pointwise(params: MlpParams, inputs, targets):
    """Exact gradient of the batch-mean squared reconstruction error."""
    inputs = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
    targets = np.atleast_2d(np.asarray(targets, dtype=np.float64))
    if len(inputs) != len(targets):
        raise ValueError("inputs and targets must have matching batch sizes")
    if inputs.shape[1] != params.layer_dims[0] or targets.shape[1] != params.layer_dims[-1]:
        raise ValueError("batch widths do not match the network layer dims")
    _, grads = _pointwise_loss_and_grads(params, inputs, targets)
    return grads


def _subsample_pairs(pairs, minibatch, rng):
    """Pick matching sample subsets (same time indices) on both sides."""
    fulls, delays = [], []
    for pair in pairs:
        n = pair.full.n
        if minibatch is not None and minibatch < n:
            idx = rng.choice(n, size=minibatch, replace=False)
            fulls.append(pair.full.samples[idx])
            delays.append(pair.delayed.samples[idx])
        else:
            fulls.append(pair.full.samples)
            delays.append(pair.delayed.samples)
    return fulls, delays


def grad_measure(params: MlpParams, pairs, kernel: KernelSpec,
                 minibatch: int | None = None, seed: int = 0):
    """Loss and gradients of the mean per-cell squared MMD.

    Each cell's delay samples are pushed through the network and compared
    to the paired full-state samples; ``minibatch`` (with ``seed``)
    subsamples both sides of every pair consistently.
    """
    if not pairs:
        raise ValueError("pairs must be nonempty")
    for pair in pairs:
        if pair.full.n == 0:
            raise ValueError("empty measure pair")
    rng = np.random.default_rng(seed)
    fulls, delays = _subsample_pairs(pairs, minibatch, rng)
    sizes = [len(d) for d in delays]
    batch = np.concatenate(delays, axis=0)
    acts = _forward_acts(params, batch)
    pushed = acts[-1]
    k_cells = len(pairs)
    grad_out = np.empty_like(pushed)
    loss = 0.0
    offset = 0
    for full, size in zip(fulls, sizes):
        block = pushed[offset:offset + size]
        loss += _mmd2_raw(kernel, full, block) / k_cells
        grad_out[offset:offset + size] = _mmd_grad_raw(kernel, full, block) / k_cells
        offset += size
    return loss, _backward(params, acts, grad_out)


def init_adam(params: MlpParams, lr: float = 1e-3, beta1: float = 0.9,
              beta2: float = 0.999, eps: float = 1e-8) -> AdamState:
    return AdamState(
        m_w=[np.zeros_like(w) for w in params.weights],
        v_w=[np.zeros_like(w) for w in params.weights],
        m_b=[np.zeros_like(b) for b in params.biases],
        v_b=[np.zeros_like(b) for b in params.biases],
        step=0, beta1=beta1, beta2=beta2, eps=eps, lr=lr,
    )


def adam_step(params: MlpParams, grads, state: AdamState):
    """One bias-corrected Adam update; returns (new params, state)."""
    g_w, g_b = grads
    for g in (*g_w, *g_b):
        if not np.all(np.isfinite(g)):
            raise FloatingPointError("non-finite gradient passed to adam_step")
    state.step += 1
    t = state.step
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** t
    c2 = 1.0 - b2 ** t
    new_w, new_b = [], []
    for w, g, m, v in zip(params.weights, g_w, state.m_w, state.v_w):
        m[:] = b1 * m + (1.0 - b1) * g
        v[:] = b2 * v + (1.0 - b2) * g * g
        new_w.append(w - state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps))
    for b, g, m, v in zip(params.biases, g_b, state.m_b, state.v_b):
        m[:] = b1 * m + (1.0 - b1) * g
        v[:] = b2 * v + (1.0 - b2) * g * g
        new_b.append(b - state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps))
    return MlpParams(params.layer_dims, new_w, new_b), state


def _mix_seed(seed: int, step: int) -> int:
    # cheap per-step stream split for minibatch draws
    return (seed * 1000003 + step * 7919 + 12345) % (2 ** 63)


def train(params: MlpParams, data, cfg: TrainConfig):
    """Run ``cfg.n_steps`` Adam steps; returns (params, per-step loss history).

    ``data`` is (inputs, targets) for the pointwise loss and a list of
    MeasurePair for the measure loss. Each recorded loss is evaluated at
    the parameters before that step's update.
    """
    state = init_adam(params, lr=cfg.lr)
    history = np.empty(cfg.n_steps)
    if cfg.loss == POINTWISE:
        inputs, targets = data
        inputs = np.asarray(inputs, dtype=np.float64)
        targets = np.asarray(targets, dtype=np.float64)
        for step in range(cfg.n_steps):
            loss, grads = _pointwise_loss_and_grads(params, inputs, targets)
            history[step] = loss
            params, state = adam_step(params, grads, state)
    else:
        pairs = list(data)
        for step in range(cfg.n_steps):
            loss, grads = grad_measure(params, pairs, cfg.kernel,
                                       minibatch=cfg.minibatch_per_measure,
                                       seed=_mix_seed(cfg.seed, step))
            history[step] = loss
            params, state = adam_step(params, grads, state)
    return params, history


def evaluate_mse(params: MlpParams, clean_delay, clean_full) -> float:
    """Pointwise MSE of the network on aligned clean data; never mutates params."""
    values = getattr(clean_delay, "values", clean_delay)
    values = np.asarray(values, dtype=np.float64)
    clean_full = np.asarray(clean_full, dtype=np.float64)
    if len(values) != len(clean_full):
        raise ValueError(
            f"misaligned evaluation data: {len(values)} delay rows vs {len(clean_full)} states"
        )
    return mse(forward(params, values), clean_full)
