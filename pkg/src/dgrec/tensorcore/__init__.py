"""Small dense-array engine: recorded-tape reverse mode, Adam, gradient checks."""

from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .gradcheck import GradCheckReport, gradient_check
from .ops import (
    add,
    attend,
    concat,
    dropout,
    elementwise_mul,
    embedding_lookup,
    linear,
    log,
    matmul,
    mean_all,
    mul,
    neg,
    relu,
    scale,
    sigmoid,
    slice_cols,
    slice_row,
    slice_rows,
    softmax_rows,
    softmax_xent,
    sum_all,
    take_rows,
    tanh,
    lstm_cell,
    weighted_sum,
)
from .optim import AdamState, adam_step
from .tensor import ShapeError, Tape, TapeError, Tensor, backward, constant, no_tape, parameter

__all__ = [name for name in dir() if not name.startswith("_")]
