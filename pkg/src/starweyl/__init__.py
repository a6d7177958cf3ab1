"""starweyl: K-ordered star products on the two-generator Weyl algebra.

Subpackage map:

- algebra_core   configuration, ordering parameters, 2x2 helpers
- poly_star      exact polynomial star products, brackets, intertwiners
- gauss_star     star-exponentials of quadratic forms, Gaussian products
- branch_analysis  singularity lattices, sign continuation, sectors
- vacuum_lab     quadrature idempotents, matrix elements, regulated elements
- relativistic   Lorentz action, square-root mass correction, flat group
- boson_virasoro exact Fock-space central-extension checks
- lattice_groups path-connecting products on the dotted triangular lattice
- cli            command-line front end
"""

from ._backend import BACKEND
from .algebra_core import (
    Config,
    ExpressionParameter,
    QuadForm,
    SphereParam,
    SPrimeElement,
    su2_symmetric,
    sphere_from_angles,
    sprime_from_angles,
    quadform_of_g,
)
from .poly_star import WeylPoly, star_mul, bracket, abs_bracket, intertwine

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "Config",
    "ExpressionParameter",
    "QuadForm",
    "SphereParam",
    "SPrimeElement",
    "su2_symmetric",
    "sphere_from_angles",
    "sprime_from_angles",
    "quadform_of_g",
    "WeylPoly",
    "star_mul",
    "bracket",
    "abs_bracket",
    "intertwine",
    "__version__",
]
