"""Worst-case (diamond-norm) error rates.

The general path sets up the Watrous-style semidefinite program for the
channel deviation from identity and hands it to the interior-point solver
in :mod:`noise_tailor.sdp`.  Stochastic Pauli channels and unitary channels
admit closed forms which are exposed both as fast paths and as independent
oracles for the solver.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .sdp import SdpNonConvergence, solve_diamond_sdp
from .superop import (
    PauliChannel,
    SuperOp,
    choi_from_superop,
    error_channel,
    identity_superop,
)


class DiamondError(RuntimeError):
    pass


class BoundViolation(DiamondError):
    pass


@dataclass(frozen=True)
class DiamondResult:
    value: float
    primal_dual_gap: float
    method: str  # "sdp" | "pauli_exact" | "unitary_exact"
    iterations: int = 0


@dataclass(frozen=True)
class BoundReport:
    e_f: float
    eps_diamond: float
    n: int
    ratio: float
    lower_slack: float
    upper_slack: float


def _choi_of_deviation(err: SuperOp) -> np.ndarray:
    """Unnormalized Choi matrix (trace d for channels) of err - identity."""
    d = 2**err.n
    delta = SuperOp(err.n, err.m - np.eye(err.dim))
    return d * choi_from_superop(delta).c


def diamond_distance(
    e: SuperOp,
    target: SuperOp | None = None,
    *,
    gap_tol: float = 1e-8,
    max_iter: int = 200,
) -> DiamondResult:
    """Half the diamond norm of the error channel of e relative to target."""
    err = e if target is None else error_channel(e, target)
    j = _choi_of_deviation(err)
    try:
        sol = solve_diamond_sdp(j, 2**err.n, gap_tol=gap_tol, max_iter=max_iter)
    except SdpNonConvergence as exc:
        raise DiamondError(
            f"diamond SDP did not converge: optimum in [{exc.bounds[0]:.3e}, "
            f"{exc.bounds[1]:.3e}] after {exc.iterations} iterations"
        ) from exc
    return DiamondResult(sol.value, sol.gap, "sdp", sol.iterations)


def pauli_diamond(c: PauliChannel) -> float:
    """Exact diamond distance of a stochastic Pauli channel to the identity:
    the total non-identity probability (Eq. lower bound, saturated)."""
    return float(sum(v for lbl, v in c.probs.items() if set(lbl) != {"I"}))


def unitary_diamond(u: np.ndarray) -> DiamondResult:
    """Exact diamond distance of a unitary channel to the identity.

    With eigenphases spread over an arc shorter than pi the distance is
    sin(spread / 2); a wider spread saturates at 1.
    """
    phases = np.sort(np.angle(np.linalg.eigvals(u)))
    if len(phases) == 1:
        return DiamondResult(0.0, 0.0, "unitary_exact")
    # minimal arc covering all phases on the circle
    gaps = np.diff(np.concatenate([phases, [phases[0] + 2 * np.pi]]))
    spread = 2 * np.pi - gaps.max()
    value = 1.0 if spread >= np.pi else float(np.sin(spread / 2))
    return DiamondResult(value, 0.0, "unitary_exact")


def check_bounds(e_f: float, eps_d: float, n: int, *, name: str = "") -> BoundReport:
    """Assert e_F <= eps_diamond <= sqrt(e_F) * 2^n within 1e-9 slack."""
    if not 0.0 <= e_f <= 1.0:
        raise DiamondError(f"infidelity {e_f} outside [0, 1]")
    d = 2**n
    lower_slack = eps_d - e_f
    upper_slack = np.sqrt(e_f) * d - eps_d
    tag = f" for {name}" if name else ""
    if lower_slack < -1e-9:
        raise BoundViolation(
            f"diamond bound violated{tag}: eps_d = {eps_d} < e_F = {e_f}"
        )
    if upper_slack < -1e-9:
        raise BoundViolation(
            f"diamond bound violated{tag}: eps_d = {eps_d} > sqrt(e_F) d = {np.sqrt(e_f) * d}"
        )
    ratio = eps_d / e_f if e_f > 0 else float("inf") if eps_d > 0 else 1.0
    return BoundReport(e_f, eps_d, n, ratio, float(lower_slack), float(upper_slack))


def trace_distance(rho: np.ndarray, sigma: np.ndarray) -> float:
    return 0.5 * float(np.abs(np.linalg.eigvalsh(rho - sigma)).sum())


def povm_channel(effects: list[np.ndarray]) -> SuperOp:
    """PTM of the measure-and-prepare channel rho -> sum_o Tr[E_o rho] |o><o|."""
    d = effects[0].shape[0]
    n = int(np.log2(d))
    from .superop import pauli_basis  # local to avoid cycle at import time

    basis = pauli_basis(n)
    m = np.zeros((4**n, 4**n))
    for o, eff in enumerate(effects):
        ket = np.zeros((d, d), dtype=complex)
        ket[o, o] = 1.0
        for i, pi in enumerate(basis):
            out_coeff = np.trace(pi @ ket).real
            for jj, pj in enumerate(basis):
                m[i, jj] += out_coeff * np.trace(eff @ pj).real / d
    return SuperOp(n, m)


def spam_worst_case(
    prep: np.ndarray,
    prep_ideal: np.ndarray,
    effects: list[np.ndarray],
    effects_ideal: list[np.ndarray],
    *,
    gap_tol: float = 1e-7,
) -> float:
    """Worst-case SPAM metric: prep trace distance plus the diamond distance
    of the measurement's induced classical channel (this artifact's
    definition of the combined SPAM error)."""
    t_prep = trace_distance(prep, prep_ideal)
    meas = povm_channel(effects)
    meas_ideal = povm_channel(effects_ideal)
    n = meas.n
    delta = SuperOp(n, meas.m - meas_ideal.m)
    j = 2**n * choi_from_superop(delta).c
    sol = solve_diamond_sdp(j, 2**n, gap_tol=gap_tol)
    return t_prep + sol.value
