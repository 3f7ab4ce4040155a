"""Case-based analogical transfer of tactical task assignments."""

# kb must load before spatial: kb.case depends on the terrain grid, which in
# turn imports only kb.terms.
from . import kb as _kb  # noqa: F401

__version__ = "0.1.0"
