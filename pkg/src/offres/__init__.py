"""Off-resonant error amplification: pulse simulation, frame spectroscopy and benchmarking."""
from . import analysis, dynamics, framespec, pulse, qcore, qcvv
from .seeding import derive_seed

__version__ = "0.1.0"
