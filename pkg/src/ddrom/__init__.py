"""Optimisation-based domain decomposition for stationary Navier-Stokes with a POD-Galerkin reduced model."""
import logging
import os

__version__ = "0.1.0"

_level = os.environ.get("DDROM_LOG")
if _level:
    logging.basicConfig(level=getattr(logging, _level.upper(), logging.INFO),
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")
logging.getLogger(__name__).addHandler(logging.NullHandler())
