"""Exact symbolic Pauli-group arithmetic.

Paulis are held in symplectic form: per-qubit X/Z bits plus a tracked sign.
Phases arising from products are integer powers of i and are never
approximated.  Labels are strings over ``{I, X, Y, Z}`` (most significant
qubit first) with an optional leading ``-``, e.g. ``"XZ"`` or ``"-IY"``.

Pauli ordering used everywhere (matrix rows, transforms, serialized maps):
lexicographic in (I, X, Y, Z) per qubit, most significant qubit first, so
index(P) is the base-4 integer with digits I=0, X=1, Y=2, Z=3.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from typing import Iterable, Mapping

import numpy as np

_LETTER_TO_XZ = {"I": (0, 0), "X": (1, 0), "Y": (1, 1), "Z": (0, 1)}
_XZ_TO_LETTER = {v: k for k, v in _LETTER_TO_XZ.items()}
_DIGIT = {"I": 0, "X": 1, "Y": 2, "Z": 3}
_LETTERS = "IXYZ"

_PAULI_MATS = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


class PauliError(ValueError):
    pass


@dataclass(frozen=True)
class PauliString:
    """A signed n-qubit Pauli operator in symplectic representation."""

    n: int
    xs: tuple[int, ...]
    zs: tuple[int, ...]
    sign: int = 1

    def __post_init__(self):
        if len(self.xs) != self.n or len(self.zs) != self.n:
            raise PauliError("bit vectors do not match qubit count")
        if self.sign not in (1, -1):
            raise PauliError(f"sign must be +/-1, got {self.sign}")

    @classmethod
    def from_label(cls, label: str) -> "PauliString":
        sign = 1
        if label.startswith("-"):
            sign = -1
            label = label[1:]
        if label.startswith("+"):
            label = label[1:]
        try:
            bits = [_LETTER_TO_XZ[c] for c in label]
        except KeyError as exc:
            raise PauliError(f"bad Pauli letter in {label!r}") from exc
        xs = tuple(b[0] for b in bits)
        zs = tuple(b[1] for b in bits)
        return cls(len(bits), xs, zs, sign)

    @property
    def label(self) -> str:
        body = "".join(_XZ_TO_LETTER[(x, z)] for x, z in zip(self.xs, self.zs))
        return ("-" if self.sign < 0 else "") + body

    @property
    def letters(self) -> str:
        return "".join(_XZ_TO_LETTER[(x, z)] for x, z in zip(self.xs, self.zs))

    def weight(self) -> int:
        return sum(1 for x, z in zip(self.xs, self.zs) if x or z)

    def index(self) -> int:
        """Position in the fixed lexicographic (I,X,Y,Z) MSB-first order."""
        idx = 0
        for x, z in zip(self.xs, self.zs):
            idx = 4 * idx + _DIGIT[_XZ_TO_LETTER[(x, z)]]
        return idx

    def matrix(self) -> np.ndarray:
        m = np.array([[self.sign]], dtype=complex)
        for x, z in zip(self.xs, self.zs):
            m = np.kron(m, _PAULI_MATS[_XZ_TO_LETTER[(x, z)]])
        return m

    def unsigned(self) -> "PauliString":
        return PauliString(self.n, self.xs, self.zs, 1)

    def __str__(self) -> str:
        return self.label


def pauli_from_index(n: int, idx: int) -> PauliString:
    letters = []
    for _ in range(n):
        letters.append(_LETTERS[idx % 4])
        idx //= 4
    return PauliString.from_label("".join(reversed(letters)))


def all_paulis(n: int) -> list[PauliString]:
    """All 4**n unsigned Paulis in the canonical order."""
    return [PauliString.from_label("".join(t)) for t in product(_LETTERS, repeat=n)]


def all_labels(n: int) -> list[str]:
    return ["".join(t) for t in product(_LETTERS, repeat=n)]


def _phase_exponent(p: PauliString) -> int:
    # p = i^q * prod_j X^x Z^z  with q counting Y factors plus 2 for a - sign
    q = sum(1 for x, z in zip(p.xs, p.zs) if x == 1 and z == 1)
    if p.sign < 0:
        q += 2
    return q % 4


def _canonicalize(n: int, xs, zs, q: int) -> tuple[PauliString, int]:
    """Reduce i^q * prod X^x Z^z to (unsigned PauliString, phase exponent)."""
    y_count = sum(1 for x, z in zip(xs, zs) if x == 1 and z == 1)
    cls = (q - y_count) % 4
    return PauliString(n, tuple(xs), tuple(zs), 1), cls


_PHASES = {0: 1 + 0j, 1: 1j, 2: -1 + 0j, 3: -1j}


def multiply(a: PauliString, b: PauliString) -> tuple[PauliString, complex]:
    """Product a*b as (unsigned Pauli, phase class in {1, i, -1, -i})."""
    if a.n != b.n:
        raise PauliError(f"dimension mismatch: {a.n} vs {b.n}")
    q = _phase_exponent(a) + _phase_exponent(b)
    # commute Z^az past X^bx qubit-wise: each swap contributes (-1)
    q += 2 * sum(az * bx for az, bx in zip(a.zs, b.xs))
    xs = tuple(ax ^ bx for ax, bx in zip(a.xs, b.xs))
    zs = tuple(az ^ bz for az, bz in zip(a.zs, b.zs))
    pauli, cls = _canonicalize(a.n, xs, zs, q % 4)
    return pauli, _PHASES[cls]


def commutation_sign(p: PauliString, q: PauliString) -> int:
    """0 if pq = qp, 1 if pq = -qp (symplectic form of the labels)."""
    if p.n != q.n:
        raise PauliError(f"dimension mismatch: {p.n} vs {q.n}")
    s = sum(px * qz + pz * qx for px, pz, qx, qz in zip(p.xs, p.zs, q.xs, q.zs))
    return s % 2


# ---------------------------------------------------------------------------
# Clifford conjugation, restricted to the native gate set

# images of the symplectic generators X and Z under g . g^dag, as signed labels
_CONJ_1Q = {
    "I": {"X": ("X", 1), "Z": ("Z", 1)},
    "X90": {"X": ("X", 1), "Z": ("Y", -1)},   # Z -> -Y, hence Y -> Z
    "Y90": {"X": ("Z", -1), "Z": ("X", 1)},   # X -> -Z, Z -> X
}

# CZ images of single-qubit generators embedded on qubits (a, b)
_CONJ_CZ = {
    ("X", 0): ("XZ", 1),
    ("Z", 0): ("ZI", 1),
    ("X", 1): ("ZX", 1),
    ("Z", 1): ("IZ", 1),
}

SUPPORTED_CLIFFORDS = ("I", "X90", "Y90", "CZ")


def conjugate_through_clifford(
    p: PauliString, gate: str, qubits: tuple[int, ...] | int = (0,), inverse: bool = False
) -> PauliString:
    """g p g^dag for g in {I, X90, Y90, CZ} acting on the given qubit(s).

    The result is always a real-signed Pauli; a non-real phase is an internal
    error for Clifford conjugation and raises.
    """
    if isinstance(qubits, int):
        qubits = (qubits,)
    if gate not in SUPPORTED_CLIFFORDS:
        raise PauliError(f"unsupported gate label {gate!r}")
    if gate == "CZ" and len(qubits) != 2:
        raise PauliError("CZ acts on exactly two qubits")
    if inverse:
        return _conjugate_inverse(p, gate, qubits)

    n = p.n
    q_acc = _phase_exponent(p)  # carry p's own phase bookkeeping
    # factor p into X_j and Z_j generators (X first per qubit, matching the
    # i^q X^x Z^z normal form) and conjugate each factor
    xs_acc = [0] * n
    zs_acc = [0] * n

    def mul_in(img: PauliString):
        nonlocal q_acc, xs_acc, zs_acc
        q_acc += _phase_exponent(img)
        q_acc += 2 * sum(za * xb for za, xb in zip(zs_acc, img.xs))
        xs_acc = [a ^ b for a, b in zip(xs_acc, img.xs)]
        zs_acc = [a ^ b for a, b in zip(zs_acc, img.zs)]

    for j in range(n):
        for kind, present in (("X", p.xs[j]), ("Z", p.zs[j])):
            if not present:
                continue
            if j not in qubits or gate == "I":
                img = _embed_plain(n, kind, j, 1)
            elif gate == "CZ":
                lbl, sgn = _CONJ_CZ[(kind, qubits.index(j))]
                img = _embed_2q(n, lbl, qubits, sgn)
            else:
                lbl, sgn = _CONJ_1Q[gate][kind]
                img = _embed_plain(n, lbl, j, sgn)
            mul_in(img)

    pauli, cls = _canonicalize(n, xs_acc, zs_acc, q_acc % 4)
    if cls == 0:
        return pauli
    if cls == 2:
        return PauliString(n, pauli.xs, pauli.zs, -1)
    raise PauliError("internal error: non-real sign from Clifford conjugation")


def _embed_plain(n: int, letter: str, qubit: int, sign: int) -> PauliString:
    letters = ["I"] * n
    letters[qubit] = letter
    return PauliString(n, *_letters_to_bits(letters), sign)


def _embed_2q(n: int, label2: str, qubits: tuple[int, ...], sign: int) -> PauliString:
    letters = ["I"] * n
    letters[qubits[0]] = label2[0]
    letters[qubits[1]] = label2[1]
    return PauliString(n, *_letters_to_bits(letters), sign)


def _letters_to_bits(letters) -> tuple[tuple[int, ...], tuple[int, ...]]:
    xs = tuple(_LETTER_TO_XZ[c][0] for c in letters)
    zs = tuple(_LETTER_TO_XZ[c][1] for c in letters)
    return xs, zs


def _conjugate_inverse(p: PauliString, gate: str, qubits: tuple[int, ...]) -> PauliString:
    # invert the bijection on signed Paulis: find q with g q g^dag = p
    n = p.n
    for cand in all_paulis(n):
        img = conjugate_through_clifford(cand, gate, qubits)
        if img.xs == p.xs and img.zs == p.zs:
            sign = p.sign * img.sign
            return PauliString(n, cand.xs, cand.zs, sign)
    raise PauliError("internal error: conjugation bijection has no preimage")


# ---------------------------------------------------------------------------
# Sign kernel and the fidelity <-> error-probability transform


def sign_kernel(n: int) -> np.ndarray:
    """K[P, Q] = (-1)^<P,Q> over the canonical ordering; K @ K = 4^n I."""
    paulis = all_paulis(n)
    dim = len(paulis)
    xs = np.array([p.xs for p in paulis])
    zs = np.array([p.zs for p in paulis])
    anti = (xs @ zs.T + zs @ xs.T) % 2
    return np.where(anti == 0, 1, -1).astype(np.int64)


def fidelities_to_error_probs(
    f: Mapping[str, float], *, tol: float = 1e-9
) -> tuple[dict[str, float], bool]:
    """Invert Pauli fidelities into Pauli error probabilities.

    c_Q = 4^-n sum_P (-1)^<P,Q> f_P.  Returns (probs, physical) where
    ``physical`` is False if any probability is below ``-tol``.
    """
    labels = sorted(f)
    n = len(labels[0])
    if len(f) != 4**n:
        raise PauliError(f"need all {4**n} Pauli fidelities, got {len(f)}")
    order = all_labels(n)
    vec = np.array([float(f[lbl]) for lbl in order])
    if abs(vec[0] - 1.0) > 1e-9:
        raise PauliError("identity fidelity must be 1")
    kernel = sign_kernel(n)
    probs = kernel @ vec / 4**n
    physical = bool(probs.min() >= -tol)
    return {lbl: float(c) for lbl, c in zip(order, probs)}, physical


def error_probs_to_fidelities(c: Mapping[str, float]) -> dict[str, float]:
    """Forward transform: f_P = sum_Q (-1)^<P,Q> c_Q (exact inverse pair)."""
    order_n = len(next(iter(c)))
    order = all_labels(order_n)
    vec = np.array([float(c.get(lbl, 0.0)) for lbl in order])
    kernel = sign_kernel(order_n)
    fid = kernel @ vec
    return {lbl: float(v) for lbl, v in zip(order, fid)}


def pauli_matrix(label: str) -> np.ndarray:
    return PauliString.from_label(label).matrix()


def weight_of(label: str) -> int:
    return sum(1 for c in label.lstrip("-+") if c != "I")


def embed_label(n: int, letters: str, qubits: Iterable[int]) -> str:
    """Place single-qubit letters onto the given qubits of an n-qubit label."""
    out = ["I"] * n
    for q, c in zip(qubits, letters):
        out[q] = c
    return "".join(out)
