"""Monte Carlo laboratory for finite-memory loop-erased random walks."""

__version__ = "0.1.0"
