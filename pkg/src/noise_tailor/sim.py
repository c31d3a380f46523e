"""Synthetic noisy gate sets and circuit-level data generation.

A scenario declares per-cycle coherent rotations, stochastic Pauli rates
and amplitude damping, SPAM imperfections, an optional drift of coherent
angles across executed circuits, and an optional context-dependent
single-qubit rotation conditioned on the partner's gate.  Every composed
gate is Choi-checked CPTP at build time.

Simulation propagates the 16-component Pauli coefficient vector through
layer PTMs; dressed (randomized-compiling) labels inherit the error
channel of their base cycle, which is the gate-independent easy-layer
noise convention RC relies on.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .circuits import (
    Circuit,
    CircuitSuite,
    ShotPlan,
    base_layer,
    correct_outcome,
    derive_stream,
    layer_ideal_ptm,
    layer_label,
    randomize,
)
from .errorgen import hamiltonian_generator
from .paulis import all_labels
from .superop import PauliChannel, SuperOp, is_cptp, ptm_from_kraus

OUTCOMES = ("00", "01", "10", "11")


class SimError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Scenario configuration


@dataclass(frozen=True)
class GateErrorSpec:
    coherent: dict[str, float] = field(default_factory=dict)  # Pauli -> angle
    pauli: dict[str, float] = field(default_factory=dict)     # Pauli -> rate
    amp_damp: tuple[float, float] = (0.0, 0.0)


@dataclass(frozen=True)
class SpamSpec:
    prep_flip: tuple[float, float] = (0.0, 0.0)
    readout_eps01: tuple[float, float] = (0.0, 0.0)  # P(read 1 | true 0)
    readout_eps10: tuple[float, float] = (0.0, 0.0)  # P(read 0 | true 1)


@dataclass(frozen=True)
class DriftSpec:
    amplitude: float = 0.0
    period: float = 512.0
    axis: str = "XI"
    gates: tuple[str, ...] | str = "easy"  # labels, or "easy" / "all"

    def applies_to(self, label: str) -> bool:
        if self.amplitude == 0.0:
            return False
        if self.gates == "all":
            return True
        if self.gates == "easy":
            return label != "CZ"
        return label in self.gates

    def angle(self, executed_index: int) -> float:
        return self.amplitude * np.sin(2 * np.pi * executed_index / self.period)


@dataclass(frozen=True)
class ContextSpec:
    qubit: int = 0
    axis: str = "Z"
    angles: dict[str, float] = field(default_factory=dict)  # partner label -> angle


@dataclass(frozen=True)
class NoiseScenario:
    gates: dict[str, GateErrorSpec] = field(default_factory=dict)
    spam: SpamSpec = SpamSpec()
    drift: DriftSpec | None = None
    context: ContextSpec | None = None

    @classmethod
    def from_dict(cls, d: Mapping) -> "NoiseScenario":
        gates = {}
        for lbl, spec in d.get("gates", {}).items():
            gates[lbl] = GateErrorSpec(
                coherent={k: float(v) for k, v in spec.get("coherent", {}).items()},
                pauli={k: float(v) for k, v in spec.get("pauli", {}).items()},
                amp_damp=tuple(spec.get("amp_damp", (0.0, 0.0))),
            )
        spam_d = d.get("spam", {})
        spam = SpamSpec(
            prep_flip=tuple(spam_d.get("prep_flip", (0.0, 0.0))),
            readout_eps01=tuple(spam_d.get("readout_eps01", (0.0, 0.0))),
            readout_eps10=tuple(spam_d.get("readout_eps10", (0.0, 0.0))),
        )
        drift = None
        if "drift" in d:
            dd = d["drift"]
            gates_field = dd.get("gates", "easy")
            if isinstance(gates_field, list):
                gates_field = tuple(gates_field)
            drift = DriftSpec(
                amplitude=float(dd.get("amplitude", 0.0)),
                period=float(dd.get("period", 512.0)),
                axis=dd.get("axis", "XI"),
                gates=gates_field,
            )
        context = None
        if "context" in d:
            cd = d["context"]
            context = ContextSpec(
                qubit=int(cd.get("qubit", 0)),
                axis=cd.get("axis", "Z"),
                angles={k: float(v) for k, v in cd.get("angles", {}).items()},
            )
        return cls(gates=gates, spam=spam, drift=drift, context=context)

    def to_dict(self) -> dict:
        out: dict = {"gates": {}}
        for lbl, spec in self.gates.items():
            out["gates"][lbl] = {
                "coherent": dict(spec.coherent),
                "pauli": dict(spec.pauli),
                "amp_damp": list(spec.amp_damp),
            }
        out["spam"] = {
            "prep_flip": list(self.spam.prep_flip),
            "readout_eps01": list(self.spam.readout_eps01),
            "readout_eps10": list(self.spam.readout_eps10),
        }
        if self.drift is not None:
            gates_field = self.drift.gates
            out["drift"] = {
                "amplitude": self.drift.amplitude,
                "period": self.drift.period,
                "axis": self.drift.axis,
                "gates": list(gates_field) if isinstance(gates_field, tuple) else gates_field,
            }
        if self.context is not None:
            out["context"] = {
                "qubit": self.context.qubit,
                "axis": self.context.axis,
                "angles": dict(self.context.angles),
            }
        return out

    def digest(self) -> str:
        return hashlib.sha256(
            json.dumps(self.to_dict(), sort_keys=True).encode()
        ).hexdigest()[:16]


# ---------------------------------------------------------------------------
# Channel construction

_PAULI_IDX = {lbl: k for k, lbl in enumerate(all_labels(2))}


def rotation_ptm(axis: str, angle: float) -> np.ndarray:
    """PTM of exp(-i angle P / 2) about a two-qubit Pauli axis, closed form.

    With G = H_P / 2 one has G^3 = -G, so the exponential truncates to
    I + sin(angle) G + (1 - cos(angle)) G^2.
    """
    g = hamiltonian_generator(2, axis) / 2
    return np.eye(16) + np.sin(angle) * g + (1 - np.cos(angle)) * (g @ g)


def multi_rotation_ptm(angles: Mapping[str, float]) -> np.ndarray:
    """PTM of exp(-i/2 sum_P angle_P P); single joint exponential."""
    active = {p: a for p, a in angles.items() if a != 0.0}
    if not active:
        return np.eye(16)
    if len(active) == 1:
        ((axis, angle),) = active.items()
        return rotation_ptm(axis, angle)
    import scipy.linalg

    gen = sum(a * hamiltonian_generator(2, p) / 2 for p, a in active.items())
    return scipy.linalg.expm(gen)


def _amp_damp_ptm_1q(gamma: float) -> np.ndarray:
    if gamma == 0.0:
        return np.eye(4)
    k0 = np.array([[1, 0], [0, np.sqrt(1 - gamma)]], dtype=complex)
    k1 = np.array([[0, np.sqrt(gamma)], [0, 0]], dtype=complex)
    return ptm_from_kraus([k0, k1]).m


def gate_error_ptm(spec: GateErrorSpec) -> np.ndarray:
    """Error channel of one cycle: coherent, then stochastic, then damping."""
    err = multi_rotation_ptm(spec.coherent)
    if spec.pauli:
        err = PauliChannel.from_error_rates(2, spec.pauli).to_superop().m @ err
    if any(g != 0.0 for g in spec.amp_damp):
        damp = np.kron(_amp_damp_ptm_1q(spec.amp_damp[0]), _amp_damp_ptm_1q(spec.amp_damp[1]))
        err = damp @ err
    return err


@dataclass(frozen=True)
class Spam:
    prep_vec: np.ndarray     # 16 components
    effect_rows: np.ndarray  # 4 x 16, rows ordered like OUTCOMES

    def ideal_prep_vec(self) -> np.ndarray:
        return _computational_state_vec((0, 0))


def _computational_state_vec(bits: tuple[int, int]) -> np.ndarray:
    v = np.zeros(16)
    z1 = 1 - 2 * bits[0]
    z2 = 1 - 2 * bits[1]
    v[_PAULI_IDX["II"]] = 0.5
    v[_PAULI_IDX["ZI"]] = 0.5 * z1
    v[_PAULI_IDX["IZ"]] = 0.5 * z2
    v[_PAULI_IDX["ZZ"]] = 0.5 * z1 * z2
    return v


def build_spam(spec: SpamSpec) -> Spam:
    p1, p2 = spec.prep_flip
    prep = np.zeros(16)
    for b1 in (0, 1):
        for b2 in (0, 1):
            w = (p1 if b1 else 1 - p1) * (p2 if b2 else 1 - p2)
            if w:
                prep = prep + w * _computational_state_vec((b1, b2))
    # per-qubit confusion: rows = measured, cols = true
    conf = []
    for q in range(2):
        e01, e10 = spec.readout_eps01[q], spec.readout_eps10[q]
        conf.append(np.array([[1 - e01, e10], [e01, 1 - e10]]))
    rows = np.zeros((4, 16))
    for mi, m_str in enumerate(OUTCOMES):
        m1, m2 = int(m_str[0]), int(m_str[1])
        for t1 in (0, 1):
            for t2 in (0, 1):
                w = conf[0][m1, t1] * conf[1][m2, t2]
                if w:
                    rows[mi] += w * _computational_state_vec((t1, t2))
    return Spam(prep_vec=prep, effect_rows=rows)


def ideal_spam() -> Spam:
    return build_spam(SpamSpec())


@dataclass(frozen=True)
class NoisyGateSet:
    """Static error channels per native cycle plus SPAM and drift handles."""

    errors: dict[str, np.ndarray]  # cycle label -> 16x16 error PTM
    spam: Spam
    drift: DriftSpec | None = None

    def layer_ptm(self, layer: tuple, drift_angle: float = 0.0) -> np.ndarray:
        lbl = layer_label(base_layer(layer))
        ptm = self.errors[lbl] @ layer_ideal_ptm(layer)
        if drift_angle != 0.0 and self.drift is not None and self.drift.applies_to(lbl):
            ptm = rotation_ptm(self.drift.axis, drift_angle) @ ptm
        return ptm


def build_gateset(scenario: NoiseScenario, labels: tuple[str, ...] | None = None) -> NoisyGateSet:
    """Compose each cycle's error channel and verify it is CPTP."""
    if labels is None:
        from .circuits import GateSetSpec

        labels = GateSetSpec().labels
    errors: dict[str, np.ndarray] = {}
    for lbl in labels:
        spec = scenario.gates.get(lbl, GateErrorSpec())
        try:
            err = gate_error_ptm(spec)
            if scenario.context is not None and lbl != "CZ":
                parts = lbl.split(":")
                partner = parts[1 - scenario.context.qubit]
                angle = scenario.context.angles.get(partner, 0.0)
                if angle:
                    letters = ["I", "I"]
                    letters[scenario.context.qubit] = scenario.context.axis
                    err = rotation_ptm("".join(letters), angle) @ err
            sop = SuperOp(2, err @ layer_ideal_ptm(_layer_of(lbl)))
            if not is_cptp(sop):
                raise SimError("composed channel failed the Choi CPTP check")
        except Exception as exc:
            raise SimError(f"gate for cycle {lbl!r} is invalid: {exc}") from exc
        errors[lbl] = err
    return NoisyGateSet(errors=errors, spam=build_spam(scenario.spam), drift=scenario.drift)


def _layer_of(lbl: str):
    from .circuits import layer_from_label

    return layer_from_label(lbl)


def ideal_gateset() -> NoisyGateSet:
    return build_gateset(NoiseScenario())


# ---------------------------------------------------------------------------
# Propagation and sampling


def simulate_probs(
    c: Circuit,
    gates: NoisyGateSet,
    spam: Spam | None = None,
    *,
    drift_angle: float = 0.0,
) -> dict[str, float]:
    """Outcome distribution of one circuit, frame correction applied."""
    spam = gates.spam if spam is None else spam
    v = spam.prep_vec
    for layer in c.layers:
        v = gates.layer_ptm(layer, drift_angle) @ v
    raw = spam.effect_rows @ v
    if raw.min() < -1e-9:
        raise SimError(f"negative probability {raw.min():.3e} in circuit {c.circuit_id}")
    raw = np.clip(raw, 0.0, None)
    raw = raw / raw.sum()
    out: dict[str, float] = {}
    for z, p in zip(OUTCOMES, raw):
        out[correct_outcome(z, c.flips)] = float(p)
    return out


def sample(dist: Mapping[str, float], shots: int, rng: np.random.Generator) -> dict[str, int]:
    """Multinomial draw; deterministic for a given generator state."""
    if shots == 0:
        return {}
    keys = sorted(dist)
    pvals = np.array([dist[k] for k in keys])
    counts = rng.multinomial(shots, pvals / pvals.sum())
    return {k: int(v) for k, v in zip(keys, counts) if v}


# ---------------------------------------------------------------------------
# Experiments


@dataclass(frozen=True)
class DataSet:
    counts: dict[str, dict[str, int]]  # base circuit id -> outcome -> count
    shots_per_circuit: int
    randomizations: int
    seed: int
    scenario_digest: str = ""
    rc_on: bool = False

    def to_json(self) -> str:
        return json.dumps(
            {
                "counts": {k: dict(sorted(v.items())) for k, v in sorted(self.counts.items())},
                "metadata": {
                    "shots_per_circuit": self.shots_per_circuit,
                    "randomizations": self.randomizations,
                    "seed": self.seed,
                    "scenario": self.scenario_digest,
                    "rc_on": self.rc_on,
                },
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, s: str) -> "DataSet":
        d = json.loads(s)
        md = d["metadata"]
        return cls(
            counts=d["counts"],
            shots_per_circuit=md["shots_per_circuit"],
            randomizations=md["randomizations"],
            seed=md["seed"],
            scenario_digest=md["scenario"],
            rc_on=md["rc_on"],
        )


def run_experiment(
    suite: CircuitSuite,
    scenario: NoiseScenario,
    plan: ShotPlan,
    *,
    rc_on: bool,
    seed: int,
) -> DataSet:
    """Simulate the whole suite, unioning frame-corrected counts over
    randomizations.  The drift index advances per executed circuit in
    canonical (base, randomization) order, making the result independent
    of any parallel schedule."""
    gates = build_gateset(scenario)
    n_rand = plan.randomizations if rc_on else 1
    counts: dict[str, dict[str, int]] = {}
    for b, circ in enumerate(suite.circuits):
        acc: dict[str, int] = {}
        for r in range(n_rand):
            stream = derive_stream(seed, circ.base_id, r)
            executed = b * n_rand + r
            drift_angle = scenario.drift.angle(executed) if scenario.drift else 0.0
            if rc_on:
                run_circ = randomize(circ, stream, randomization=r)
                shots = plan.per_randomization
            else:
                run_circ = circ
                shots = plan.total
            probs = simulate_probs(run_circ, gates, drift_angle=drift_angle)
            for z, k in sample(probs, shots, stream).items():
                acc[z] = acc.get(z, 0) + k
        counts[circ.base_id] = acc
    return DataSet(
        counts=counts,
        shots_per_circuit=plan.total,
        randomizations=n_rand if rc_on else 0,
        seed=seed,
        scenario_digest=scenario.digest(),
        rc_on=rc_on,
    )
