from . import tensor as ops
from .tensor import Tensor, Tape, GradientMap, backward, forward, as_tensor
from .gradcheck import finite_difference_gradient, relative_error
from .optim import AdamState, adam_update

__all__ = ["ops", "Tensor", "Tape", "GradientMap", "backward", "forward", "as_tensor",
           "finite_difference_gradient", "relative_error", "AdamState", "adam_update"]
