from .gradcheck import finite_diff_check, numeric_grad
from .optim import AdagradState, adagrad_step
from .tensor import (
    DegenerateInputError,
    DomainError,
    ShapeError,
    Tape,
    Tensor,
    backward,
    concat,
    entropy,
    exp,
    log_,
    sigmoid,
    add,
    mul,
    sub,
    l1_normalize,
    l1_normalize_or_uniform,
    log_softmax,
    lstm,
    matmul,
    max_entry,
    min_positive,
    record,
    relu,
    reshape,
    softmax,
    square,
    sum_,
    tanh,
    take,
    unary_apply,
)

__all__ = [
    "AdagradState", "DegenerateInputError", "DomainError", "ShapeError", "Tape",
    "Tensor", "adagrad_step", "backward", "concat", "entropy", "exp", "finite_diff_check", "log_", "sigmoid", "add", "mul", "sub",
    "l1_normalize", "l1_normalize_or_uniform", "log_softmax", "lstm", "matmul",
    "max_entry", "min_positive", "numeric_grad", "record", "relu", "reshape", "softmax",
    "square", "sum_", "tanh", "take", "unary_apply",
]
