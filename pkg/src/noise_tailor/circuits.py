"""Circuit model, structured suite generation, and randomized compiling.

A circuit is an ordered list of cycles over a named qubit pair.  Easy
cycles are pairs of single-qubit labels like ``("X90", "I")``; the hard
cycle is ``("CZ",)``.  Randomized compiling dresses every easy cycle with
fresh uniform Paulis and the correction for the previous frame, commutes
frames through CZ cycles symbolically, and leaves the final frame as a
classical measurement correction, so depth never changes and the
noiseless output distribution is preserved exactly.

Compiled single-qubit operations carry labels ``"post.base.pre"`` (Pauli
before and after a native gate); plain native labels are the special case
with identity Paulis.  Ideal PTMs for all native and dressed operations
are exact sign matrices built from symbolic Clifford conjugation, never
from floating-point trigonometry.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from .errorgen import hamiltonian_generator
from .paulis import PauliString, all_labels, conjugate_through_clifford
from .superop import SuperOp

NATIVE_1Q = ("I", "X90", "Y90")
QUBIT_NAMES = ("q1", "q2")

Layer = tuple  # ("X90", "I") or ("CZ",), entries possibly dressed labels


class CircuitError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Ideal operators

_U_1Q = {
    "I": np.eye(2, dtype=complex),
    "X90": np.array([[1, -1j], [-1j, 1]], dtype=complex) / np.sqrt(2),
    "Y90": np.array([[1, -1], [1, 1]], dtype=complex) / np.sqrt(2),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}
_U_CZ = np.diag([1, 1, 1, -1]).astype(complex)


@lru_cache(maxsize=None)
def clifford_ptm(gate: str, n: int, qubits: tuple[int, ...]) -> np.ndarray:
    """Exact-integer PTM of a native Clifford from symbolic conjugation."""
    dim = 4**n
    m = np.zeros((dim, dim))
    from .paulis import all_paulis

    for j, p in enumerate(all_paulis(n)):
        img = conjugate_through_clifford(p, gate, qubits)
        m[img.index(), j] = img.sign
    return m


@lru_cache(maxsize=None)
def pauli_sign_diag(letter: str) -> np.ndarray:
    """Exact diagonal PTM of a single-qubit Pauli gate."""
    signs = {"I": [1, 1, 1, 1], "X": [1, 1, -1, -1], "Y": [1, -1, 1, -1], "Z": [1, -1, -1, 1]}
    return np.diag(np.array(signs[letter], dtype=float))


def parse_dressed(label: str) -> tuple[str, str, str]:
    """Split 'post.base.pre' into components; bare labels get identity Paulis."""
    if "." in label:
        post, base, pre = label.split(".")
        return post, base, pre
    return "I", label, "I"


@lru_cache(maxsize=None)
def gate_ptm_1q(label: str) -> np.ndarray:
    """Exact ideal PTM of a (possibly dressed) single-qubit operation."""
    post, base, pre = parse_dressed(label)
    if base not in NATIVE_1Q:
        raise CircuitError(f"unknown single-qubit gate {base!r}")
    core = clifford_ptm(base, 1, (0,))
    return pauli_sign_diag(post) @ core @ pauli_sign_diag(pre)


def gate_unitary_1q(label: str) -> np.ndarray:
    post, base, pre = parse_dressed(label)
    return _U_1Q[post] @ _U_1Q[base] @ _U_1Q[pre]


def layer_ideal_ptm(layer: Layer) -> np.ndarray:
    """Exact ideal 16x16 PTM of a cycle (dressed labels allowed)."""
    if layer == ("CZ",):
        return clifford_ptm("CZ", 2, (0, 1))
    if len(layer) != 2:
        raise CircuitError(f"bad layer {layer!r}")
    return np.kron(gate_ptm_1q(layer[0]), gate_ptm_1q(layer[1]))


def layer_ideal_unitary(layer: Layer) -> np.ndarray:
    if layer == ("CZ",):
        return _U_CZ
    return np.kron(gate_unitary_1q(layer[0]), gate_unitary_1q(layer[1]))


def base_layer(layer: Layer) -> Layer:
    """Strip twirl dressing: the native cycle whose noise the layer inherits."""
    if layer == ("CZ",):
        return layer
    return tuple(parse_dressed(lbl)[1] for lbl in layer)


def layer_label(layer: Layer) -> str:
    return "CZ" if layer == ("CZ",) else ":".join(layer)


def layer_from_label(label: str) -> Layer:
    return ("CZ",) if label == "CZ" else tuple(label.split(":"))


# ---------------------------------------------------------------------------
# Gate set


@dataclass(frozen=True)
class GateSetSpec:
    """The ten native cycles: nine simultaneous 1Q pairs plus CZ."""

    qubits: tuple[str, str] = QUBIT_NAMES
    labels: tuple[str, ...] = field(default_factory=lambda: _default_labels())

    def layers(self) -> list[Layer]:
        return [layer_from_label(lbl) for lbl in self.labels]

    def ideal_ptms(self) -> dict[str, SuperOp]:
        return {lbl: SuperOp(2, layer_ideal_ptm(layer_from_label(lbl))) for lbl in self.labels}

    def ideal_unitaries(self) -> dict[str, np.ndarray]:
        return {lbl: layer_ideal_unitary(layer_from_label(lbl)) for lbl in self.labels}


def _default_labels() -> tuple[str, ...]:
    pairs = tuple(f"{a}:{b}" for a in NATIVE_1Q for b in NATIVE_1Q)
    return pairs + ("CZ",)


# ---------------------------------------------------------------------------
# Circuits


@dataclass(frozen=True)
class Circuit:
    layers: tuple[Layer, ...]
    frame: PauliString = PauliString.from_label("II")
    flips: tuple[int, int] = (0, 0)
    base_id: str = ""
    randomization: int | None = None

    @property
    def circuit_id(self) -> str:
        if self.randomization is None:
            return self.base_id
        return f"{self.base_id}#r{self.randomization}"

    @property
    def depth(self) -> int:
        return len(self.layers)

    def to_json_dict(self) -> dict:
        return {
            "qubits": list(QUBIT_NAMES),
            "layers": [list(layer) for layer in self.layers],
            "frame": {"pauli": self.frame.label, "flips": list(self.flips)},
            "provenance": {"base": self.base_id, "r": self.randomization},
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "Circuit":
        return cls(
            layers=tuple(tuple(layer) for layer in d["layers"]),
            frame=PauliString.from_label(d["frame"]["pauli"]),
            flips=tuple(d["frame"]["flips"]),
            base_id=d["provenance"]["base"],
            randomization=d["provenance"]["r"],
        )


@dataclass(frozen=True)
class CircuitSuite:
    circuits: tuple[Circuit, ...]
    fiducials: tuple[tuple[Layer, ...], ...]
    germs: tuple[tuple[str, ...], ...]
    depths: tuple[int, ...]
    seed: int

    def to_json(self) -> str:
        return json.dumps(
            {
                "seed": self.seed,
                "depths": list(self.depths),
                "germs": [list(g) for g in self.germs],
                "circuits": [c.to_json_dict() for c in self.circuits],
            }
        )

    @classmethod
    def from_json(cls, s: str) -> "CircuitSuite":
        d = json.loads(s)
        circuits = tuple(Circuit.from_json_dict(c) for c in d["circuits"])
        return cls(
            circuits=circuits,
            fiducials=(),
            germs=tuple(tuple(g) for g in d["germs"]),
            depths=tuple(d["depths"]),
            seed=d["seed"],
        )


@dataclass(frozen=True)
class ShotPlan:
    total: int
    randomizations: int

    def __post_init__(self):
        if self.randomizations < 1:
            raise CircuitError("need at least one randomization")
        if self.total % self.randomizations:
            raise CircuitError(
                f"{self.total} shots not divisible into {self.randomizations} randomizations"
            )

    @property
    def per_randomization(self) -> int:
        return self.total // self.randomizations


def plan_shots(total: int, randomizations: int) -> ShotPlan:
    """Shot budget: measure each of N randomizations K/N times and union."""
    return ShotPlan(total, randomizations)


# ---------------------------------------------------------------------------
# Fiducials and suite generation

# per-qubit fiducial sequences: prepare/measure an informationally complete
# frame from |0> and the Z-basis readout
_FIDUCIAL_1Q: tuple[tuple[str, ...], ...] = ((), ("X90",), ("Y90",), ("X90", "X90"))


def two_qubit_fiducials() -> list[tuple[Layer, ...]]:
    fids = []
    for fa in _FIDUCIAL_1Q:
        for fb in _FIDUCIAL_1Q:
            depth = max(len(fa), len(fb))
            layers = tuple(
                (fa[t] if t < len(fa) else "I", fb[t] if t < len(fb) else "I")
                for t in range(depth)
            )
            fids.append(layers)
    return fids


def _prep_frame_matrix(fids) -> np.ndarray:
    # |00> in the normalized Pauli basis: (II + IZ + ZI + ZZ) / 4
    idx = {lbl: k for k, lbl in enumerate(all_labels(2))}
    rho0 = np.zeros(16)
    for lbl in ("II", "IZ", "ZI", "ZZ"):
        rho0[idx[lbl]] = 0.5
    rows = []
    for fid in fids:
        m = np.eye(16)
        for layer in fid:
            m = layer_ideal_ptm(layer) @ m
        rows.append(m @ rho0)
    return np.array(rows)


def _meas_frame_matrix(fids) -> np.ndarray:
    idx = {lbl: k for k, lbl in enumerate(all_labels(2))}
    effects = []
    for z1 in (1, -1):
        for z2 in (1, -1):
            e = np.zeros(16)
            e[idx["II"]] = 0.5
            e[idx["IZ"]] = 0.5 * z2
            e[idx["ZI"]] = 0.5 * z1
            e[idx["ZZ"]] = 0.5 * z1 * z2
            effects.append(e)
    rows = []
    for fid in fids:
        m = np.eye(16)
        for layer in fid:
            m = layer_ideal_ptm(layer) @ m
        for e in effects:
            rows.append(e @ m)
    return np.array(rows)


def _germ_jacobian(germ_layers: Sequence[Layer], labels: Sequence[str]) -> np.ndarray:
    """d vec(germ PTM) / d (per-cycle Hamiltonian coefficients) at the ideal
    point; rows 256, columns 15 * len(labels)."""
    ptms = [layer_ideal_ptm(layer) for layer in germ_layers]
    prefixes = [np.eye(16)]
    for p in ptms:
        prefixes.append(p @ prefixes[-1])
    suffixes = [np.eye(16)]
    for p in reversed(ptms):
        suffixes.append(suffixes[-1] @ p)
    suffixes.reverse()  # suffixes[t] = product of layers t..end
    h_gens = [hamiltonian_generator(2, lbl) for lbl in all_labels(2) if lbl != "II"]
    cols = np.zeros((256, 15 * len(labels)))
    for t, layer in enumerate(germ_layers):
        g_idx = labels.index(layer_label(layer))
        left = suffixes[t + 1]
        right = prefixes[t]  # layers before t already applied
        for k, h in enumerate(h_gens):
            d_layer = h @ ptms[t]
            cols[:, 15 * g_idx + k] += (left @ d_layer @ right).ravel()
    return cols


_GERM_CANDIDATES: tuple[tuple[str, ...], ...] = (
    ("X90:I", "Y90:I"),
    ("I:X90", "I:Y90"),
    ("X90:Y90", "Y90:X90"),
    ("CZ", "X90:X90"),
    ("CZ", "X90:I"),
    ("CZ", "I:Y90"),
    ("CZ", "Y90:Y90", "CZ"),
    ("X90:I", "X90:I", "Y90:I"),
    ("I:X90", "I:X90", "I:Y90"),
    ("CZ", "X90:Y90", "Y90:X90"),
    ("Y90:I", "CZ"),
    ("X90:X90", "Y90:Y90"),
)


def select_germs(spec: GateSetSpec, *, reference_depth: int = 16) -> list[tuple[str, ...]]:
    """Every cycle label as a singleton germ plus greedy candidates that grow
    the amplified rank of the ideal-model Hamiltonian Jacobian.

    Amplification is probed by the Jacobian of germ^m scaled by 1/m: error
    directions a germ amplifies keep O(1) singular values there, the rest
    decay as 1/m, leaving a clean threshold at sv = 1.
    """
    labels = list(spec.labels)

    def power_jacobian(germ):
        reps = max(1, reference_depth // len(germ))
        layers = [layer_from_label(l) for l in germ] * reps
        return _germ_jacobian(layers, labels) / reps

    germs: list[tuple[str, ...]] = [(lbl,) for lbl in labels]
    gram = np.zeros((15 * len(labels), 15 * len(labels)))
    for g in germs:
        j = power_jacobian(g)
        gram += j.T @ j

    def rank_of(g):
        return int((np.linalg.eigvalsh(g) > 1.0).sum())

    current = rank_of(gram)
    for cand in _GERM_CANDIDATES:
        j = power_jacobian(cand)
        trial = gram + j.T @ j
        r = rank_of(trial)
        if r > current:
            germs.append(cand)
            gram = trial
            current = r
    return germs


def generate_suite(
    spec: GateSetSpec,
    max_depth: int,
    seed: int,
    *,
    pairs_per_cell: int = 24,
) -> CircuitSuite:
    """Structured GST-style suite: an LGST core over all fiducial pairs plus
    germ-power sandwiches over seeded fiducial-pair subsets."""
    if max_depth < 1 or max_depth & (max_depth - 1):
        raise CircuitError(f"max_depth {max_depth} is not a power of two")
    fids = two_qubit_fiducials()
    prep_rank = np.linalg.matrix_rank(_prep_frame_matrix(fids), tol=1e-9)
    meas_rank = np.linalg.matrix_rank(_meas_frame_matrix(fids), tol=1e-9)
    if prep_rank != 16 or meas_rank != 16:
        raise CircuitError(f"fiducial frame rank deficient: prep {prep_rank}, meas {meas_rank}")

    germs = select_germs(spec)
    depths = tuple(2**k for k in range(int(np.log2(max_depth)) + 1))
    rng = np.random.default_rng(seed)

    circuits: dict[str, Circuit] = {}

    def add(i, j, germ, reps):
        germ_layers = tuple(layer_from_label(lbl) for lbl in germ) * reps
        layers = fids[i] + germ_layers + fids[j]
        gname = ",".join(germ) if germ else "lgst"
        cid = f"f{i}.g[{gname}]x{reps}.m{j}"
        if cid not in circuits:
            circuits[cid] = Circuit(layers=layers, base_id=cid)

    for i in range(16):
        for j in range(16):
            add(i, j, (), 0)
    all_pairs = [(i, j) for i in range(16) for j in range(16)]
    for germ in germs:
        for depth in depths:
            if depth < len(germ):
                continue
            reps = depth // len(germ)
            chosen = rng.choice(len(all_pairs), size=min(pairs_per_cell, 256), replace=False)
            for k in chosen:
                i, j = all_pairs[k]
                add(i, j, germ, reps)

    return CircuitSuite(
        circuits=tuple(circuits.values()),
        fiducials=tuple(fids),
        germs=tuple(germs),
        depths=depths,
        seed=seed,
    )


# ---------------------------------------------------------------------------
# Randomized compiling


def derive_stream(master_seed: int, base_id: str, randomization: int) -> np.random.Generator:
    """Per-circuit RNG stream independent of execution order."""
    digest = hashlib.sha256(base_id.encode()).digest()
    base_hash = int.from_bytes(digest[:8], "big")
    ss = np.random.SeedSequence([master_seed, base_hash, randomization])
    return np.random.default_rng(ss)


_PAULI_LETTERS = ("I", "X", "Y", "Z")


def _dress(post: str, base: str, pre: str) -> str:
    if post == "I" and pre == "I":
        return base
    return f"{post}.{base}.{pre}"


def randomize(c: Circuit, rng: np.random.Generator | int, *, randomization: int = 0) -> Circuit:
    """One randomized compilation of a base circuit.

    Easy cycles become dressed cycles P_k L_k F^dag; CZ cycles are left
    untouched and the pending frame is conjugated through them.  The final
    frame is recorded, not applied: its X support flips measured bits.
    """
    if isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(rng)
    frame = PauliString.from_label("II")
    out_layers: list[Layer] = []
    for layer in c.layers:
        if layer == ("CZ",):
            frame = conjugate_through_clifford(frame, "CZ", (0, 1))
            out_layers.append(layer)
            continue
        draws = rng.integers(0, 4, size=2)
        new_frame = PauliString.from_label(
            _PAULI_LETTERS[draws[0]] + _PAULI_LETTERS[draws[1]]
        )
        dressed = tuple(
            _dress(_PAULI_LETTERS[draws[q]], layer[q], frame.letters[q]) for q in range(2)
        )
        out_layers.append(dressed)
        frame = new_frame
    flips = tuple(1 if frame.letters[q] in ("X", "Y") else 0 for q in range(2))
    return Circuit(
        layers=tuple(out_layers),
        frame=frame,
        flips=flips,
        base_id=c.base_id,
        randomization=randomization,
    )


def correct_outcome(outcome: str, flips: Iterable[int]) -> str:
    """Apply the classical frame correction to a measured bitstring."""
    return "".join(str(int(b) ^ f) for b, f in zip(outcome, flips))
