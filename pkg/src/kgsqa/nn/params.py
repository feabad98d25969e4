import numpy as np

from ..errors import NumericalError, ShapeError, ValidationError
from .autograd import Tensor


class ParamStore:
    """Named tensors with fixed shapes and a trainable flag each."""

    def __init__(self):
        self._tensors = {}

    def add(self, name, value, trainable=True):
        if name in self._tensors:
            raise ValidationError(f"duplicate parameter name {name!r}")
        t = Tensor(np.array(value, dtype=np.float64), requires_grad=trainable)
        self._tensors[name] = t
        return t

    def __getitem__(self, name):
        return self._tensors[name]

    def __contains__(self, name):
        return name in self._tensors

    def __len__(self):
        return len(self._tensors)

    def names(self):
        return list(self._tensors)

    def items(self):
        return self._tensors.items()

    def trainable(self, name):
        return self._tensors[name].requires_grad

    def trainable_items(self):
        return [(k, t) for k, t in self._tensors.items() if t.requires_grad]

    def zero_grad(self):
        for t in self._tensors.values():
            t.grad = None

    def grads(self):
        return {k: (t.grad if t.grad is not None else np.zeros_like(t.data))
                for k, t in self._tensors.items() if t.requires_grad}

    def state_dict(self):
        return {k: t.data.copy() for k, t in self._tensors.items()}

    def load_state_dict(self, arrays):
        for k, t in self._tensors.items():
            if k not in arrays:
                raise ValidationError(f"checkpoint lacks parameter {k!r}")
            a = np.asarray(arrays[k], dtype=np.float64)
            if a.shape != t.data.shape:
                raise ShapeError(f"{k}: checkpoint shape {a.shape} != {t.data.shape}")
            t.data = a.copy()

    def check_finite(self):
        for k, t in self._tensors.items():
            if not np.all(np.isfinite(t.data)):
                raise NumericalError(f"parameter {k!r} became non-finite")


def uniform_init(rng, shape, fan_in):
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)
