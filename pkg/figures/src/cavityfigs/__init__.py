"""Publication-style figure rendering for the cavitycool CSV outputs."""

__version__ = "0.1.0"

from .render import RenderError, render

__all__ = ["render", "RenderError", "__version__"]
