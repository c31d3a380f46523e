"""Gate error generators: L = log(gate . ideal^-1) and its decomposition.

The generator is projected onto elementary Hamiltonian generators
``H_P: rho -> -i[P, rho]`` and stochastic generators
``S_P: rho -> P rho P - rho`` (both as PTMs).  Anything outside that span,
including non-unital components, stays in the reported residual.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Mapping

import numpy as np
import scipy.linalg

from .config import TOLERANCES
from .paulis import all_labels, all_paulis, commutation_sign, multiply, weight_of
from .superop import SuperOp, error_channel


class ErrorGenError(ValueError):
    pass


class BranchCutError(ErrorGenError):
    """An eigenvalue of the error channel sits on the log branch cut."""

    def __init__(self, eigenvalue: complex):
        self.eigenvalue = eigenvalue
        super().__init__(
            f"error-channel eigenvalue {eigenvalue} lies within "
            f"{TOLERANCES.branch_cut} of the negative real axis; "
            "the principal matrix log is ill-defined here"
        )


@dataclass(frozen=True)
class ErrorGenerator:
    n: int
    l: np.ndarray
    h_coeffs: dict[str, float]
    s_coeffs: dict[str, float]
    residual: float


@dataclass(frozen=True)
class ErrorBudget:
    eps_agg: float
    theta_agg: float
    eps_tot: float
    stochastic_fraction: float
    warnings: tuple[str, ...] = ()
    # conventions carried in output metadata so alternates can be compared
    convention: str = "eps_agg = sum(s_P); theta_agg = sqrt(sum(h_P^2))"


@lru_cache(maxsize=None)
def hamiltonian_generator(n: int, label: str) -> np.ndarray:
    """PTM of rho -> -i[P, rho] for the Pauli with the given label."""
    paulis = all_paulis(n)
    p = paulis[all_labels(n).index(label)]
    dim = 4**n
    h = np.zeros((dim, dim))
    for j, q in enumerate(paulis):
        if commutation_sign(p, q) == 0:
            continue
        prod, phase = multiply(p, q)
        # [P, Q] = 2 P Q for anticommuting pairs; phase is +-i there
        h[prod.index(), j] = (-2j * phase).real
    return h


@lru_cache(maxsize=None)
def stochastic_generator(n: int, label: str) -> np.ndarray:
    """PTM of rho -> P rho P - rho (diagonal: 0 or -2 entries)."""
    paulis = all_paulis(n)
    p = paulis[all_labels(n).index(label)]
    diag = np.array([-2.0 if commutation_sign(p, q) else 0.0 for q in paulis])
    return np.diag(diag)


@lru_cache(maxsize=None)
def _hs_basis(n: int) -> tuple[list[str], np.ndarray]:
    labels = [lbl for lbl in all_labels(n) if lbl != "I" * n]
    cols = [hamiltonian_generator(n, lbl).ravel() for lbl in labels]
    cols += [stochastic_generator(n, lbl).ravel() for lbl in labels]
    return labels, np.column_stack(cols)


def project_hs(l: np.ndarray | ErrorGenerator) -> tuple[dict[str, float], dict[str, float], float]:
    """Least-squares split of a generator into Hamiltonian and stochastic
    coefficients; returns (h_coeffs, s_coeffs, residual_frobenius_norm)."""
    mat = l.l if isinstance(l, ErrorGenerator) else l
    dim = mat.shape[0]
    n = int(np.log2(dim) / 2)
    labels, basis = _hs_basis(n)
    coef, *_ = np.linalg.lstsq(basis, mat.ravel(), rcond=None)
    k = len(labels)
    h = {lbl: float(c) for lbl, c in zip(labels, coef[:k])}
    s = {lbl: float(c) for lbl, c in zip(labels, coef[k:])}
    residual = float(np.linalg.norm(mat.ravel() - basis @ coef))
    return h, s, residual


def error_generator(gate: SuperOp, ideal: SuperOp) -> ErrorGenerator:
    """Principal log of the error channel gate . ideal^-1, with projection."""
    lam = error_channel(gate, ideal)
    eigs = np.linalg.eigvals(lam.m)
    for ev in eigs:
        if ev.real < 0 and abs(ev.imag) <= TOLERANCES.branch_cut:
            raise BranchCutError(ev)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")  # logm warns about its own imag estimate
        log = scipy.linalg.logm(lam.m)
    if np.max(np.abs(log.imag)) > 1e-9:
        raise ErrorGenError("matrix log of a real channel came out complex")
    l_mat = np.ascontiguousarray(log.real)
    h, s, res = project_hs(l_mat)
    return ErrorGenerator(gate.n, l_mat, h, s, res)


def reconstruct_channel(gen: ErrorGenerator, ideal: SuperOp) -> SuperOp:
    """exp(L) . ideal; inverse of error_generator up to log branch issues."""
    return SuperOp(gen.n, scipy.linalg.expm(gen.l) @ ideal.m)


def error_budget(h: Mapping[str, float], s: Mapping[str, float]) -> ErrorBudget:
    notes = []
    for lbl, v in s.items():
        if v < -1e-9:
            notes.append(f"negative stochastic rate s_{lbl} = {v:.3e}")
    eps_agg = float(sum(s.values()))
    theta_agg = float(np.sqrt(sum(v * v for v in h.values())))
    eps_tot = eps_agg + theta_agg
    frac = eps_agg / eps_tot if eps_tot > 0 else 0.0
    return ErrorBudget(eps_agg, theta_agg, eps_tot, frac, tuple(notes))


# ---------------------------------------------------------------------------
# Weight-resolved error maps


@dataclass(frozen=True)
class WeightMap:
    """Marginal weight-1 and pairwise weight-2 views of a Pauli-labeled map.

    marginal[j][P] sums every coefficient whose j-th factor is P (regardless
    of the other qubits); joint[(j, k)][(P, Q)] sums coefficients with factor
    P at j and Q at k, both non-identity.
    """

    n: int
    marginal: dict[int, dict[str, float]] = field(default_factory=dict)
    joint: dict[tuple[int, int], dict[tuple[str, str], float]] = field(default_factory=dict)


def weight_maps(coeffs: Mapping[str, float]) -> WeightMap:
    labels = [lbl for lbl in coeffs if weight_of(lbl) > 0]
    if not labels:
        first = next(iter(coeffs), "II")
        return WeightMap(len(first), {}, {})
    n = len(labels[0].lstrip("-+"))
    marginal: dict[int, dict[str, float]] = {
        j: {p: 0.0 for p in "XYZ"} for j in range(n)
    }
    joint: dict[tuple[int, int], dict[tuple[str, str], float]] = {
        (j, k): {(p, q): 0.0 for p in "XYZ" for q in "XYZ"}
        for j in range(n)
        for k in range(j + 1, n)
    }
    for lbl in labels:
        val = float(coeffs[lbl])
        body = lbl.lstrip("-+")
        support = [(j, c) for j, c in enumerate(body) if c != "I"]
        for j, c in support:
            marginal[j][c] += val
        for a in range(len(support)):
            for b in range(a + 1, len(support)):
                (j, p), (k, q) = support[a], support[b]
                joint[(j, k)][(p, q)] += val
    return WeightMap(n, marginal, joint)
