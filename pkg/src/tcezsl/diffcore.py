"""
    tcezsl.diffcore
    ~~~~~~~~~~~~~~~

    Reverse-mode differentiation for the small fixed feed-forward networks
    used by the models: dense layers, ReLU and softmax activations,
    softmax cross-entropy, euclidean distance, variance and Adam.

    Every array is 64-bit floating point. Inputs may be a single vector or
    a batch of row vectors; batched gradients are summed over rows.
"""

from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from typing_extensions import Literal

from .errors import NumericError, PreconditionError, ShapeError

Activation = Literal['relu', 'identity', 'softmax']
Params = Dict[str, np.ndarray]
Grads = Dict[str, np.ndarray]

ACTIVATIONS = ('relu', 'identity', 'softmax')


class DenseLayer:
    """Affine map ``y = W x + b`` with ``W`` of shape ``[out_dim, in_dim]``."""

    weight: np.ndarray
    bias: np.ndarray

    def __init__(self, weight: np.ndarray, bias: np.ndarray) -> None:
        weight = np.array(weight, dtype=np.float64)
        bias = np.array(bias, dtype=np.float64)
        if weight.ndim != 2 or bias.shape != (weight.shape[0],):
            raise ShapeError(
                'weight {} and bias {} do not agree'.format(weight.shape, bias.shape)
            )
        if not (np.all(np.isfinite(weight)) and np.all(np.isfinite(bias))):
            raise NumericError('dense layer initialised with non-finite entries')
        self.weight = weight
        self.bias = bias

    @classmethod
    def init(cls, in_dim: int, out_dim: int, rng: np.random.Generator) -> 'DenseLayer':
        limit = np.sqrt(6.0 / (in_dim + out_dim))
        weight = rng.uniform(-limit, limit, size=(out_dim, in_dim))
        return cls(weight, np.zeros(out_dim))

    @property
    def in_dim(self) -> int:
        return int(self.weight.shape[1])

    @property
    def out_dim(self) -> int:
        return int(self.weight.shape[0])


class MlpTape:
    """Activation record of one :func:`mlp_forward` call."""

    def __init__(self, net: 'Mlp', squeeze: bool) -> None:
        self.net = net
        #: parameter version of ``net`` when the tape was recorded
        self.version = net.version
        self.squeeze = squeeze
        self.inputs: List[np.ndarray] = []
        self.pre_activations: List[np.ndarray] = []
        self.outputs: List[np.ndarray] = []


class Mlp:
    """A chain of dense layers, each followed by its activation::

        net = Mlp.build([556, 256, 256], rng)
        y, tape = net.forward(x)
        grads, dx = net.backward(tape, dy)
    """

    def __init__(self, layers: Sequence[DenseLayer], activations: Sequence[str]) -> None:
        if not layers:
            raise ShapeError('an mlp needs at least one layer')
        if len(layers) != len(activations):
            raise ShapeError('one activation per layer is required')
        for act in activations:
            if act not in ACTIVATIONS:
                raise ValueError('unknown activation {!r}'.format(act))
        if 'softmax' in activations[:-1]:
            raise ShapeError('softmax may only be the final activation')
        for prev, layer in zip(layers, layers[1:]):
            if prev.out_dim != layer.in_dim:
                raise ShapeError(
                    'layer dims do not chain: {} -> {}'.format(prev.out_dim, layer.in_dim)
                )
        self.layers: List[DenseLayer] = list(layers)
        self.activations: List[str] = list(activations)
        self.version = 0

    @classmethod
    def build(
        cls,
        dims: Sequence[int],
        rng: np.random.Generator,
        hidden: str = 'relu',
        output: str = 'identity',
    ) -> 'Mlp':
        layers = [DenseLayer.init(i, o, rng) for i, o in zip(dims, dims[1:])]
        activations = [hidden] * (len(layers) - 1) + [output]
        return cls(layers, activations)

    @property
    def in_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def out_dim(self) -> int:
        return self.layers[-1].out_dim

    def mark_updated(self) -> None:
        """Record that the parameters changed; older tapes become stale."""
        self.version += 1

    def parameters(self, prefix: str = '') -> Params:
        params: Params = {}
        for i, layer in enumerate(self.layers):
            params['{}{}.weight'.format(prefix, i)] = layer.weight
            params['{}{}.bias'.format(prefix, i)] = layer.bias
        return params

    def forward(self, x: np.ndarray) -> Tuple[np.ndarray, MlpTape]:
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1:] != (self.in_dim,) or x.ndim > 2:
            raise ShapeError(
                'input of shape {} does not match in_dim {}'.format(x.shape, self.in_dim)
            )
        tape = MlpTape(self, squeeze=x.ndim == 1)
        h = np.atleast_2d(x)
        for layer, act in zip(self.layers, self.activations):
            tape.inputs.append(h)
            z = h @ layer.weight.T + layer.bias
            tape.pre_activations.append(z)
            h = _activate(z, act)
            tape.outputs.append(h)
        if tape.squeeze:
            return h[0], tape
        return h, tape

    def backward(self, tape: Optional[MlpTape], upstream: np.ndarray) -> Tuple[Grads, np.ndarray]:
        if tape is None or tape.net is not self or len(tape.inputs) != len(self.layers):
            raise PreconditionError('backward needs the tape of a forward pass on this net')
        if tape.version != self.version:
            raise PreconditionError(
                'tape recorded at version {}, parameters are at {}'.format(tape.version, self.version)
            )
        g = np.atleast_2d(np.asarray(upstream, dtype=np.float64))
        if g.shape != tape.outputs[-1].shape:
            raise ShapeError(
                'upstream {} does not match output {}'.format(g.shape, tape.outputs[-1].shape)
            )
        grads: Grads = {}
        for i in reversed(range(len(self.layers))):
            layer = self.layers[i]
            act = self.activations[i]
            if act == 'relu':
                g = g * (tape.pre_activations[i] > 0)
            elif act == 'softmax':
                y = tape.outputs[i]
                g = y * (g - np.sum(g * y, axis=1, keepdims=True))
            grads['{}.weight'.format(i)] = g.T @ tape.inputs[i]
            grads['{}.bias'.format(i)] = g.sum(axis=0)
            g = g @ layer.weight
        if tape.squeeze:
            return grads, g[0]
        return grads, g


def _activate(z: np.ndarray, act: str) -> np.ndarray:
    if act == 'relu':
        return np.maximum(z, 0.0)
    if act == 'softmax':
        return softmax(z)
    return z


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - np.max(logits, axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / np.sum(e, axis=-1, keepdims=True)


def mlp_forward(net: Mlp, x: np.ndarray) -> Tuple[np.ndarray, MlpTape]:
    return net.forward(x)


def mlp_backward(net: Mlp, tape: Optional[MlpTape], upstream: np.ndarray) -> Tuple[Grads, np.ndarray]:
    return net.backward(tape, upstream)


def softmax_cross_entropy(
    logits: np.ndarray, label: Union[int, np.ndarray]
) -> Tuple[Union[float, np.ndarray], np.ndarray]:
    """Return ``-log softmax(logits)[label]`` and its gradient
    ``softmax(logits) - onehot(label)``. A batch of logits takes an
    array of labels and returns one loss per row.
    """
    logits = np.asarray(logits, dtype=np.float64)
    single = logits.ndim == 1
    z = np.atleast_2d(logits)
    labels = np.atleast_1d(np.asarray(label)).astype(np.int64)
    if labels.shape != (z.shape[0],):
        raise ShapeError('one label per row of logits is required')
    k = z.shape[1]
    if np.any(labels < 0) or np.any(labels >= k):
        raise IndexError('label out of range for {} classes'.format(k))

    shifted = z - np.max(z, axis=1, keepdims=True)
    log_norm = np.log(np.sum(np.exp(shifted), axis=1))
    rows = np.arange(z.shape[0])
    losses = log_norm - shifted[rows, labels]
    grad = np.exp(shifted - log_norm[:, None])
    grad[rows, labels] -= 1.0
    if single:
        return float(losses[0]), grad[0]
    return losses, grad


def euclidean_distance(
    u: np.ndarray, v: np.ndarray
) -> Tuple[Union[float, np.ndarray], np.ndarray, np.ndarray]:
    """Distance along the last axis with gradients wrt ``u`` and ``v``.
    The gradient at coincident points is defined as zero.
    """
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise ShapeError('distance between shapes {} and {}'.format(u.shape, v.shape))
    diff = u - v
    d = np.sqrt(np.sum(diff * diff, axis=-1))
    safe = np.where(d > 0, d, 1.0)
    gu = np.where(np.expand_dims(d > 0, -1), diff / np.expand_dims(safe, -1), 0.0)
    if u.ndim == 1:
        return float(d), gu, -gu
    return d, gu, -gu


def variance(values: Iterable[float]) -> Tuple[float, np.ndarray]:
    """Population variance (divide by N) and its gradient ``2 (v - mean) / N``."""
    arr = np.array(list(values), dtype=np.float64)
    n = arr.size
    if n < 2:
        raise PreconditionError('variance needs at least 2 values, got {}'.format(n))
    centered = arr - arr.mean()
    var = float(np.sum(centered * centered) / n)
    return var, 2.0 * centered / n


class AdamState:
    """Moments and hyper-parameters of the Adam optimizer.

    :param params: the parameter set the moments mirror
    :param lr: default learning rate
    :param lr_groups: learning rates by parameter name prefix, the longest
        matching prefix wins
    :param weight_decay: L2 coefficient added to every gradient
    """

    def __init__(
        self,
        params: Mapping[str, np.ndarray],
        lr: float = 1e-4,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
        lr_groups: Optional[Mapping[str, float]] = None,
        weight_decay: float = 0.0,
    ) -> None:
        if lr < 0 or not 0 < beta1 < 1 or not 0 < beta2 < 1 or eps <= 0:
            raise ValueError('invalid Adam hyper-parameters')
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.weight_decay = weight_decay
        self.lr_groups: Dict[str, float] = dict(lr_groups or {})
        self.step_count = 0
        self.first_moment: Params = {k: np.zeros_like(p) for k, p in params.items()}
        self.second_moment: Params = {k: np.zeros_like(p) for k, p in params.items()}

    def lr_for(self, name: str) -> float:
        best = ''
        for prefix in self.lr_groups:
            if name.startswith(prefix) and len(prefix) > len(best):
                best = prefix
        if best:
            return self.lr_groups[best]
        return self.lr


def adam_step(
    params: Mapping[str, np.ndarray], grads: Mapping[str, np.ndarray], state: AdamState
) -> Tuple[Mapping[str, np.ndarray], AdamState]:
    """Apply one bias-corrected Adam update in place and return
    ``(params, state)``.
    """
    if set(grads) != set(params) or set(params) != set(state.first_moment):
        raise ShapeError('gradients, parameters and moments name different tensors')
    for name, g in grads.items():
        if g.shape != params[name].shape:
            raise ShapeError('gradient of {} has shape {}'.format(name, g.shape))
        if not np.all(np.isfinite(g)):
            raise NumericError('non-finite gradient for {}'.format(name), term=name)

    state.step_count += 1
    t = state.step_count
    c1 = 1.0 - state.beta1 ** t
    c2 = 1.0 - state.beta2 ** t
    for name in sorted(params):
        p = params[name]
        g = grads[name]
        if state.weight_decay:
            g = g + state.weight_decay * p
        m = state.first_moment[name]
        v = state.second_moment[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        step = state.lr_for(name) * (m / c1) / (np.sqrt(v / c2) + state.eps)
        p -= step
    return params, state


def zeros_like(params: Mapping[str, np.ndarray]) -> Grads:
    return {k: np.zeros_like(p) for k, p in params.items()}


def add_into(into: Grads, grads: Mapping[str, np.ndarray], prefix: str = '') -> Grads:
    """Accumulate ``grads`` into ``into`` with names prefixed by ``prefix``."""
    for k, g in grads.items():
        into[prefix + k] += g
    return into
