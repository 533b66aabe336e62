"""Causal orders, slice categories, causal field theories, and the
partitioned causal cellular automaton, as executable structures."""

from . import cca, errors, field_theory, order, process, slices
from .cca import (
    PartitionedCCAConfig,
    build_cca,
    build_reversal,
    dirac_config,
    dirac_scattering,
    lattice_slice_leq,
)
from .field_theory import FieldTheory
from .order import build_explicit, lattice, reverse
from .process import ProcMorphism, ProcObject, ProcState
from .report import Report
from .slices import SliceCategory, foliation_category, is_slice, slice_leads_to

__all__ = [
    "FieldTheory",
    "PartitionedCCAConfig",
    "ProcMorphism",
    "ProcObject",
    "ProcState",
    "Report",
    "SliceCategory",
    "build_cca",
    "build_explicit",
    "build_reversal",
    "cca",
    "dirac_config",
    "dirac_scattering",
    "errors",
    "field_theory",
    "foliation_category",
    "is_slice",
    "lattice",
    "lattice_slice_leq",
    "order",
    "process",
    "reverse",
    "slice_leads_to",
    "slices",
]
