"""Axisymmetric incompressible Euler laboratory.

A desk-scale numerical toolbox for axisymmetric Euler flows in
swirl/vorticity form: a (r u_theta, omega_theta / r) transport solver with
stream-function velocity recovery, a bicharacteristic amplitude tracer with
conservation audits, a linearized solver with short-wave initial data for
semigroup growth estimation, weighted vorticity criterion monitors, and
self-similar rescaling diagnostics.
"""

from .fields import (
    EVEN,
    ODD,
    AxiEulerError,
    AxiField,
    AxiGrid,
    AxiVectorField,
    NormSpec,
    OutOfDomainError,
    divergence3,
    grad,
    make_grid,
    vorticity,
    weighted_norm,
)

__version__ = "0.1.0"

__all__ = [
    "EVEN", "ODD", "AxiEulerError", "AxiField", "AxiGrid", "AxiVectorField",
    "NormSpec", "OutOfDomainError", "divergence3", "grad", "make_grid",
    "vorticity", "weighted_norm", "__version__",
]
