"""Design, diagnosis and estimation for BISG-driven Poisson samples of rare populations."""

__version__ = "0.1.0"
