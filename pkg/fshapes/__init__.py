"""fshapes - Functional currents for signal-carrying curves and surfaces"""

__version__ = "0.1.0"
