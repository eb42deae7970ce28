"""Platoon simulation for the information-aware driver model (IADM) and IDM."""

from cavsim.config import load
from cavsim.sim import run_scenario

__all__ = ["load", "run_scenario"]
__version__ = "0.1.0"
