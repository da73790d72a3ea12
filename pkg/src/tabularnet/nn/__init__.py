"""Small float64 tensor engine: reverse-mode autodiff, layers, AdamW, archives."""

from .autograd import Parameter, Tape, Tensor, backward, dropout, log_softmax, nll_loss
from .layers import MLP, BiGRU, GRUCell, Linear, Module, bigru_run, gru_sequence, gru_step, mlp_forward, xavier_normal_init
from .optim import AdamW, adamw_step

__all__ = [
    "AdamW", "BiGRU", "GRUCell", "Linear", "MLP", "Module", "Parameter", "Tape", "Tensor",
    "adamw_step", "backward", "bigru_run", "dropout", "gru_sequence", "gru_step", "log_softmax",
    "mlp_forward", "nll_loss", "xavier_normal_init",
]
