"""Minimal differentiable-computation substrate: tensors with reverse-mode
gradients, the conv/recurrent layer set, Adam, and checkpoint IO."""

from .tensor import (  # noqa: F401
    Tensor,
    absolute,
    add,
    concat,
    conv1d,
    div,
    exp,
    getitem,
    grad_enabled,
    matmul,
    mul,
    no_grad,
    power,
    relu,
    reshape,
    sigmoid,
    sqrt,
    stack_time,
    tanh,
    tmean,
    transpose,
    tsum,
)
from .layers import (  # noqa: F401
    ActivationSpec,
    BatchNorm1d,
    BatchNormSpec,
    Conv1d,
    Conv1dSpec,
    LSTM,
    LSTMSpec,
    Linear,
    LinearSpec,
    ReLU,
    Tanh,
    build_layer,
    spec_from_dict,
    spec_to_dict,
)
from .optim import Adam, AdamState, adam_step  # noqa: F401
from .checkpoint import load_checkpoint, save_checkpoint  # noqa: F401
from .gradcheck import check_gradients, finite_difference, relative_error  # noqa: F401
