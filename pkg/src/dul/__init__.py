"""Numerical laboratory for uniqueness of degenerate parabolic problems.

The equation ``u_t = div(a grad u) + f`` with ``a ~ d(x)**gamma`` near the
boundary is posed without boundary conditions.  The package builds the
barrier functions used to control weighted L1 norms of solutions, certifies
their differential inequalities on dense grids, evaluates the weighted growth
classes, and runs a degenerate finite-difference solver that exhibits the
uniqueness / nonuniqueness dichotomy.
"""

from dul.geometry import DomainGeometry, GeometryError
from dul.coefficients import DegenerateCoefficient, Modulation
from dul.certificate import ClassCertificate

__all__ = [
    "DomainGeometry",
    "GeometryError",
    "DegenerateCoefficient",
    "Modulation",
    "ClassCertificate",
]

__version__ = "0.1.0"
