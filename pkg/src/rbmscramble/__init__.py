"""RBM neural quantum states trained by stochastic reconfiguration, with
OTOC, reduced-density-matrix and mutual-information diagnostics."""

__version__ = "0.1.0"
