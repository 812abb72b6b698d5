"""Symmetries and conservation laws of finite-dimensional quantum operations,
quantum dynamical semigroups, stochastic maps and classical Markov chains."""
from .linalg_core import *  # noqa: F401,F403
from .channels import *  # noqa: F401,F403
from .fixed_structure import *  # noqa: F401,F403
from .semigroups import *  # noqa: F401,F403
from .classical_markov import *  # noqa: F401,F403
from . import linalg_core, channels, fixed_structure, semigroups, classical_markov, random_maps

__all__ = (linalg_core.__all__ + channels.__all__ + fixed_structure.__all__
           + semigroups.__all__ + classical_markov.__all__)
