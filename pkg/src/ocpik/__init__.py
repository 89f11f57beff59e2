"""Structure-exploiting interior-point solver for constrained optimal control."""

from . import autodiff, errors

__all__ = ["autodiff", "errors"]
