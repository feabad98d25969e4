import numpy as np

from ..errors import NumericalError

MIN_COORDS = 64


def relative_error(analytic, numeric, floor=1e-6):
    """|a - n| / max(|a|, |n|, floor); the floor keeps near-zero gradients from dominating."""
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), floor)


def grad_check(loss_fn, params, eps=1e-5, coords_per_tensor=MIN_COORDS, seed=0,
               names=None, report=None):
    """Compare backprop gradients with central differences.

    ``loss_fn(params)`` must return a scalar ``Tensor`` and be deterministic.
    Tensors with more than ``coords_per_tensor`` entries are checked at that
    many sampled coordinates. The relative-error floor is 1e-6 times
    max(1, |loss|). Returns the worst relative error; when
    ``report`` is a dict it receives the worst error per tensor.
    """
    coords_per_tensor = max(coords_per_tensor, MIN_COORDS)
    rng = np.random.default_rng(seed)
    params.zero_grad()
    loss = loss_fn(params)
    if not np.isfinite(loss.data).all():
        raise NumericalError("loss is not finite")
    # gradients scale with the loss, so the "negligible gradient" floor does too;
    # this keeps the reported error invariant to multiplying the loss by a constant
    floor = 1e-6 * max(1.0, abs(loss.item()))
    loss.backward()
    analytic = {k: t.grad.copy() if t.grad is not None else np.zeros_like(t.data)
                for k, t in params.trainable_items()}
    worst = 0.0
    for name, tensor in params.trainable_items():
        if names is not None and name not in names:
            continue
        flat = tensor.data.reshape(-1)
        n = flat.size
        idx = np.arange(n) if n <= coords_per_tensor else rng.choice(n, coords_per_tensor, replace=False)
        tensor_worst = 0.0
        for i in idx:
            orig = flat[i]
            flat[i] = orig + eps
            up = loss_fn(params).item()
            flat[i] = orig - eps
            down = loss_fn(params).item()
            flat[i] = orig
            if not (np.isfinite(up) and np.isfinite(down)):
                raise NumericalError(f"loss not finite while perturbing {name}[{i}]")
            numeric = (up - down) / (2 * eps)
            err = relative_error(analytic[name].reshape(-1)[i], numeric, floor)
            tensor_worst = max(tensor_worst, err)
        if report is not None:
            report[name] = tensor_worst
        worst = max(worst, tensor_worst)
    params.zero_grad()
    return worst
