"""bellsim: simulator and fringe-analysis toolkit for pulsed two-crystal
collinear SPDC polarization-entanglement sources."""

__version__ = "0.1.0"

from .scenario import default_config_path, load_config  # noqa: F401
