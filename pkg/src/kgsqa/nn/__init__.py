from .autograd import Tensor
from .checkpoint import load_checkpoint, save_checkpoint
from .gradcheck import grad_check
from .layers import Attention, LstmEncoder, attention, dropout, lstm_encode
from .optim import AdamState, adam_update
from .params import ParamStore

__all__ = [
    "AdamState", "Attention", "LstmEncoder", "ParamStore", "Tensor", "adam_update",
    "attention", "dropout", "grad_check", "load_checkpoint", "lstm_encode", "save_checkpoint",
]
