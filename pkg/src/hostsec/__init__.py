"""Web-security measurement and latent security-effort analysis for shared hosting."""
from ._backend import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "__version__"]
