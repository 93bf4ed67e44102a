"""A small reverse-mode autodiff engine on numpy arrays.

Define-by-run: every op returns a Tensor holding its parents and a closure
that scatters the output gradient back to them. There is no implicit
broadcasting; each op states exactly which shapes it accepts, and shape
mistakes fail loudly at graph build time rather than as silent numerics.
"""

from .tensor import Tensor, parameter
from . import ops
from .gradcheck import gradcheck, GradcheckFailure

__all__ = ["Tensor", "parameter", "ops", "gradcheck", "GradcheckFailure"]
