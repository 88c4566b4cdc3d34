"""Multi-period market clearing over a DC network with hydro and battery
storage, locational price extraction, and financial rights settlement."""

__version__ = "0.1.0"
