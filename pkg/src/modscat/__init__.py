"""Modified wave operator, inverse and scattering map for 1D cubic NLS near the origin."""

__version__ = "0.1.0"

from .kernels import BACKEND  # noqa: E402
