"""Superoperator algebra in the Pauli transfer matrix (PTM) representation.

A channel on n qubits is a real 4^n x 4^n matrix L with
``L[i, j] = Tr[P_i E(P_j)] / d`` (d = 2^n) over the canonical Pauli order.
Composition is matrix multiplication with the rightmost factor applied
first.  States and measurement effects are carried as real coefficient
vectors in the same normalized Pauli basis, so probabilities are plain dot
products.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Mapping, Sequence

import numpy as np

from .config import TOLERANCES
from .paulis import PauliString, all_labels, all_paulis, sign_kernel


class SuperOpError(ValueError):
    pass


@lru_cache(maxsize=None)
def pauli_basis(n: int) -> tuple[np.ndarray, ...]:
    return tuple(p.matrix() for p in all_paulis(n))


@dataclass(frozen=True)
class SuperOp:
    """A channel as a real PTM; immutable after construction."""

    n: int
    m: np.ndarray

    def __post_init__(self):
        dim = 4**self.n
        if self.m.shape != (dim, dim):
            raise SuperOpError(f"PTM shape {self.m.shape} != ({dim}, {dim})")
        self.m.setflags(write=False)

    @property
    def dim(self) -> int:
        return 4**self.n

    def is_tp(self, tol: float = 1e-9) -> bool:
        first = np.zeros(self.dim)
        first[0] = 1.0
        return bool(np.max(np.abs(self.m[0] - first)) <= tol)

    def is_unital(self, tol: float = 1e-9) -> bool:
        first = np.zeros(self.dim)
        first[0] = 1.0
        return bool(np.max(np.abs(self.m[:, 0] - first)) <= tol)

    def to_json_dict(self) -> dict:
        return {
            "n": self.n,
            "basis": "pauli-IXYZ-msbfirst",
            "rows": [[float(v) for v in row] for row in self.m],
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "SuperOp":
        return cls(int(d["n"]), np.array(d["rows"], dtype=float))

    def dumps(self) -> str:
        return json.dumps(self.to_json_dict())

    @classmethod
    def loads(cls, s: str) -> "SuperOp":
        return cls.from_json_dict(json.loads(s))


def identity_superop(n: int) -> SuperOp:
    return SuperOp(n, np.eye(4**n))


def ptm_from_unitary(u: np.ndarray) -> SuperOp:
    """PTM of the unitary channel rho -> u rho u^dag."""
    d = u.shape[0]
    if np.max(np.abs(u @ u.conj().T - np.eye(d))) > TOLERANCES.unitarity:
        raise SuperOpError("input is not unitary to tolerance")
    return ptm_from_kraus([u])


def ptm_from_kraus(ks: Sequence[np.ndarray], *, allow_non_tp: bool = False) -> SuperOp:
    """PTM of the channel rho -> sum_i K_i rho K_i^dag."""
    d = ks[0].shape[0]
    n = int(np.log2(d))
    if 2**n != d:
        raise SuperOpError(f"Kraus dimension {d} is not a power of two")
    total = sum(k.conj().T @ k for k in ks)
    if not allow_non_tp and np.max(np.abs(total - np.eye(d))) > TOLERANCES.unitarity:
        raise SuperOpError("Kraus operators violate completeness")
    basis = pauli_basis(n)
    mat = np.zeros((4**n, 4**n))
    for k in ks:
        evolved = [k @ p @ k.conj().T for p in basis]
        for i, pi in enumerate(basis):
            for j in range(4**n):
                mat[i, j] += np.trace(pi @ evolved[j]).real / d
    return SuperOp(n, mat)


def compose(a: SuperOp, b: SuperOp) -> SuperOp:
    """Channel 'b then a' (matrix product a.m @ b.m)."""
    if a.n != b.n:
        raise SuperOpError(f"dimension mismatch: {a.n} vs {b.n}")
    return SuperOp(a.n, a.m @ b.m)


def invert_ideal(target: SuperOp) -> SuperOp:
    """Inverse of an ideal gate PTM.

    Ideal (unitary) gates are orthogonal in PTM form, so the inverse is the
    transpose, computed exactly.  Non-orthogonal targets fall back to a
    numeric inverse and reject singular input.
    """
    m = target.m
    if np.max(np.abs(m.T @ m - np.eye(target.dim))) < 1e-9:
        return SuperOp(target.n, m.T.copy())
    det = np.linalg.det(m)
    if abs(det) < 1e-12:
        raise SuperOpError("target PTM is singular")
    return SuperOp(target.n, np.linalg.inv(m))


def error_channel(e: SuperOp, target: SuperOp) -> SuperOp:
    """Lambda with e = Lambda . target, i.e. e composed with target^-1."""
    return compose(e, invert_ideal(target))


def process_fidelity(e: SuperOp, target: SuperOp | None = None) -> float:
    """Average over the error channel's PTM diagonal (process fidelity)."""
    lam = e if target is None else error_channel(e, target)
    return float(np.trace(lam.m)) / lam.dim


def process_infidelity(e: SuperOp, target: SuperOp | None = None) -> float:
    return 1.0 - process_fidelity(e, target)


# ---------------------------------------------------------------------------
# Choi representation


@dataclass(frozen=True)
class ChoiMatrix:
    """Normalized Choi state (trace one, ancilla copy in the first factor)."""

    n: int
    c: np.ndarray

    def __post_init__(self):
        herm_defect = np.max(np.abs(self.c - self.c.conj().T))
        if herm_defect > 1e-10:
            raise SuperOpError(f"Choi matrix not Hermitian (defect {herm_defect:.2e})")
        object.__setattr__(self, "c", (self.c + self.c.conj().T) / 2)
        self.c.setflags(write=False)

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.c)

    def is_cp(self, floor: float | None = None) -> bool:
        floor = TOLERANCES.psd_floor if floor is None else floor
        return bool(self.eigenvalues().min() >= floor)


def choi_from_superop(s: SuperOp) -> ChoiMatrix:
    n, dim = s.n, s.dim
    d = 2**n
    basis = pauli_basis(n)
    c = np.zeros((d * d, d * d), dtype=complex)
    for i in range(dim):
        for j in range(dim):
            if s.m[i, j] != 0.0:
                c += s.m[i, j] * np.kron(basis[j].T, basis[i])
    return ChoiMatrix(n, c / dim)


def superop_from_choi(ch: ChoiMatrix) -> SuperOp:
    n = ch.n
    dim = 4**n
    basis = pauli_basis(n)
    m = np.empty((dim, dim))
    for i in range(dim):
        for j in range(dim):
            m[i, j] = np.trace(np.kron(basis[j].T, basis[i]) @ ch.c).real
    return SuperOp(n, m)


def is_cptp(s: SuperOp, *, psd_floor: float | None = None, tp_tol: float = 1e-9) -> bool:
    return s.is_tp(tp_tol) and choi_from_superop(s).is_cp(psd_floor)


# ---------------------------------------------------------------------------
# Pauli channels and twirling


@dataclass(frozen=True)
class PauliChannel:
    """Stochastic Pauli channel: probability c_P of applying P."""

    n: int
    probs: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        total = sum(self.probs.values())
        if abs(total - 1.0) > 1e-9:
            raise SuperOpError(f"Pauli probabilities sum to {total}, not 1")
        if min(self.probs.values()) < -1e-12:
            raise SuperOpError("negative Pauli probability")
        for lbl in self.probs:
            if len(lbl) != self.n:
                raise SuperOpError(f"label {lbl!r} does not match n={self.n}")

    @classmethod
    def from_error_rates(cls, n: int, rates: Mapping[str, float]) -> "PauliChannel":
        """Build from non-identity rates; identity gets the remainder."""
        probs = {lbl: 0.0 for lbl in all_labels(n)}
        for lbl, r in rates.items():
            probs[lbl] = float(r)
        probs["I" * n] = 1.0 - sum(rates.values())
        return cls(n, probs)

    def fidelities(self) -> np.ndarray:
        """Diagonal of the PTM: f_P = sum_Q (-1)^<P,Q> c_Q."""
        order = all_labels(self.n)
        vec = np.array([self.probs.get(lbl, 0.0) for lbl in order])
        return sign_kernel(self.n) @ vec

    def to_superop(self) -> SuperOp:
        return SuperOp(self.n, np.diag(self.fidelities()))

    def error_rate(self) -> float:
        return 1.0 - self.probs.get("I" * self.n, 0.0)


def pauli_twirl(e: SuperOp, paulis_subset: Iterable[PauliString] | None = None) -> SuperOp:
    """Average of P e P^dag over a Pauli subset (full group by default).

    The sign mask is accumulated in integer arithmetic, so the full-group
    twirl cancels off-diagonal entries exactly (not just to rounding).
    """
    subset = list(paulis_subset) if paulis_subset is not None else all_paulis(e.n)
    if not subset:
        raise SuperOpError("twirling set must be nonempty")
    kernel = sign_kernel(e.n)
    mask = np.zeros((e.dim, e.dim), dtype=np.int64)
    for p in subset:
        row = kernel[p.index()]
        mask += np.outer(row, row)
    return SuperOp(e.n, e.m * (mask / len(subset)))


# ---------------------------------------------------------------------------
# States, effects and distributions


def state_vec(rho: np.ndarray) -> np.ndarray:
    """Coefficients of rho in the normalized Pauli basis P/sqrt(d)."""
    d = rho.shape[0]
    n = int(np.log2(d))
    return np.array([np.trace(p @ rho).real for p in pauli_basis(n)]) / np.sqrt(d)


def effect_vec(e: np.ndarray) -> np.ndarray:
    """Row vector of a POVM effect; probability = effect_vec . state_vec.

    With the orthonormal basis P/sqrt(d) on both sides, Tr[E rho] is the
    plain dot product, so effects use the same expansion as states.
    """
    return state_vec(e)


def tvd(p: Mapping[str, float], q: Mapping[str, float]) -> float:
    """Total variation distance (1/2)||p - q||_1 between distributions."""
    for name, dist in (("p", p), ("q", q)):
        total = sum(dist.values())
        if abs(total - 1.0) > TOLERANCES.distribution:
            raise SuperOpError(f"{name} sums to {total}, not 1")
        if min(dist.values(), default=0.0) < -TOLERANCES.distribution:
            raise SuperOpError(f"{name} has negative mass")
    keys = set(p) | set(q)
    return 0.5 * sum(abs(p.get(k, 0.0) - q.get(k, 0.0)) for k in keys)
