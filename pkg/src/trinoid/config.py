"""Shared numerical tolerances.

Every threshold used by the package lives in one frozen record so a global
loosening or tightening (say, on a noisy CI box) is a one-line change.  The
environment variable TRINOID_TOL_SCALE multiplies all absolute tolerances;
purely geometric ratios such as loop radii are left alone by it.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, fields, replace

# Ratios describing path geometry rather than error thresholds.  These are
# not scaled by TRINOID_TOL_SCALE.
_GEOMETRIC = ("loop_radius_factor", "clearance_factor", "transport_tol_factor")


@dataclass(frozen=True)
class Tolerances:
    det: float = 1e-9                # |det - 1| gate for SL(2,C) membership
    unitary: float = 1e-8            # ||M M* - I|| gate for SU(2) membership
    ode: float = 1e-10               # local integration error per unit arclength
    hanbetu: float = 1e-12           # degeneracy gate on the Hopf coefficients
    integer: float = 1e-9            # B/pi integrality detection
    angle_is_pi: float = 1e-12       # excluded cone angle gate
    umbilic: float = 1e-10           # coincidence threshold for the two umbilics
    singular_eval: float = 1e-8      # guard distance for pointwise evaluation
    commutator: float = 1e-7         # abelian-image detection on generators
    form_residual: float = 1e-9      # invariant-form linear system residual
    posdef_margin: float = 1e-8      # relative eigenvalue margin for definiteness
    null_sv: float = 1e-7            # singular value cutoff for null spaces
    null_structure: float = 1e-7     # rank-one trace-free structure of F^-1 dF
    projective: float = 1e-6         # projective equivalence residual
    apparent: float = 1e-6           # monodromy deviation from +-I at apparent points
    well_defined: float = 1e-6       # doubled-path agreement in the ball model
    eigenvalue_warn: float = 1e-4    # monodromy eigenvalue sanity warning level
    loop_radius_factor: float = 0.25
    clearance_factor: float = 0.05
    transport_tol_factor: float = 1e-3  # extra tightening for mesh frame transport


def default_tolerances() -> Tolerances:
    """Default tolerances, with TRINOID_TOL_SCALE applied when it is set."""
    tol = Tolerances()
    raw = os.environ.get("TRINOID_TOL_SCALE")
    if raw is None:
        return tol
    scale = float(raw)
    if not scale > 0.0:
        raise ValueError("TRINOID_TOL_SCALE must be a positive float, got %r" % raw)
    scaled = {
        f.name: getattr(tol, f.name) * scale
        for f in fields(tol)
        if f.name not in _GEOMETRIC
    }
    return replace(tol, **scaled)
