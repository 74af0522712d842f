"""Mass renormalization lab for a one-electron atom coupled to radiation (d = 2, 3)."""

__version__ = "0.1.0"

from .kernels import KernelContext  # noqa: E402,F401
from .config import ModelConfig  # noqa: E402,F401
