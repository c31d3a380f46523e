"""Centralized numerical tolerances.

Every module takes its thresholds from the single ``TOLERANCES`` record so
that a change in one place propagates everywhere (unitarity checks, PSD
eigenvalue floors, exact-equality comparisons).
"""

from dataclasses import dataclass


@dataclass(frozen=True)
class Tolerances:
    unitarity: float = 1e-10      # max |U U^dag - I| entry for "unitary" inputs
    psd_floor: float = -1e-9      # smallest admissible eigenvalue of a PSD matrix
    equality: float = 1e-12       # exact-identity comparisons
    hermiticity: float = 1e-12    # max |M - M^dag| entry for Hermitian inputs
    distribution: float = 1e-9    # probability normalization slack
    branch_cut: float = 1e-8      # eigenvalue distance to the log branch cut
    sdp_gap: float = 1e-8         # interior-point duality-gap target


TOLERANCES = Tolerances()
