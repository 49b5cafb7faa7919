"""Two-part splitting symplectic integrators for the disordered Klein-Gordon chain."""

from kgsplit.evolve import BlowUpError, SamplingPlan, WorkCounter, evolve, step
from kgsplit.lattice import (
    Lattice,
    State,
    flow_a,
    flow_b,
    flow_corrector,
    grad_b,
    make_lattice,
    site_energies,
    total_energy,
)
from kgsplit.observables import Diagnostics, diagnostics
from kgsplit.schemes import (
    CATALOG_NAMES,
    Scheme,
    SchemeError,
    Stage,
    StageKind,
    catalog_scheme,
    validate,
    yoshida_compose,
)

__version__ = "0.1.0"

__all__ = [
    "BlowUpError",
    "CATALOG_NAMES",
    "Diagnostics",
    "Lattice",
    "SamplingPlan",
    "Scheme",
    "SchemeError",
    "Stage",
    "StageKind",
    "State",
    "WorkCounter",
    "catalog_scheme",
    "diagnostics",
    "evolve",
    "flow_a",
    "flow_b",
    "flow_corrector",
    "grad_b",
    "make_lattice",
    "site_energies",
    "step",
    "total_energy",
    "validate",
    "yoshida_compose",
]
