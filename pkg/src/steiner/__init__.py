"""Finite constructions for Steiner triple systems and Steiner quasigroups."""

from .core import PartialSTS, canonical_form, isomorphic, read_system, validate, write_system
from .errors import StsError

__version__ = "0.1.0"

__all__ = ["PartialSTS", "StsError", "canonical_form", "isomorphic", "read_system", "validate", "write_system", "__version__"]
