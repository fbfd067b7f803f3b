"""gradlab: numerical laboratory for gradient estimates of quasilinear
elliptic Neumann problems with supernatural gradient growth."""

__version__ = "0.1.0"
