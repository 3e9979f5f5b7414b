"""Wave Reconstruction Lab - iterative initial-data reconstruction for the 1-D wave equation"""

__version__ = "0.1.0"
