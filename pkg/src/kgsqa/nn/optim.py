from dataclasses import dataclass, field

import numpy as np

from ..errors import ShapeError


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_update(params, grads, state: AdamState, clip_norm=None):
    """One Adam step with bias correction; non-trainable tensors are never touched.

    ``grads`` maps parameter name -> array. Names missing from ``grads`` get a
    zero gradient. ``clip_norm`` rescales the global gradient norm first.
    """
    for name, g in grads.items():
        if name in params and np.shape(g) != params[name].shape:
            raise ShapeError(f"gradient for {name!r} has shape {np.shape(g)}, "
                             f"parameter has {params[name].shape}")
    trainable = params.trainable_items()
    if clip_norm is not None:
        total = np.sqrt(sum(float(np.sum(np.square(grads[k]))) for k, _ in trainable if k in grads))
        scale = clip_norm / total if total > clip_norm else 1.0
    else:
        scale = 1.0
    state.step += 1
    t = state.step
    c1 = 1.0 - state.beta1 ** t
    c2 = 1.0 - state.beta2 ** t
    for name, tensor in trainable:
        g = grads.get(name)
        g = np.zeros_like(tensor.data) if g is None else np.asarray(g, dtype=np.float64) * scale
        m = state.m.get(name)
        if m is None:
            m = state.m[name] = np.zeros_like(tensor.data)
            state.v[name] = np.zeros_like(tensor.data)
        v = state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        tensor.data = tensor.data - state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    params.check_finite()
    return params, state
