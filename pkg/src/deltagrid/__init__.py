"""deltagrid: grid-set arithmetic and tube geometry at dyadic scales."""

from .kernels import BACKEND

__version__ = "0.1.0"
__all__ = ["BACKEND", "__version__"]
