"""Parameterized error models for the six nested gate-set families.

Gate errors are CPTP by construction:

* full channels use an error-generator parameterization, ``exp(sum h_P H_P
  + Lindblad(C))`` with ``C = T T^dag`` from a complex Cholesky factor, so
  the exponential of a proper Lindbladian is automatically CPTP and TP;
* stochastic (diagonal) channels use squared variables for the Pauli
  rates.

Structural parameter counts at two qubits: full 2Q gate 240 (15
Hamiltonian + 225 Lindblad), diagonal 2Q gate 15, full 1Q factor 12,
diagonal 1Q factor 3.  Context-dependent families give each single-qubit
factor its own (gate, partner) key; context-free families share factors
across partners.  SPAM is always fit jointly: a Cholesky-parameterized
density matrix and a four-outcome POVM with the completeness element
eliminated.

Everything here exposes forward construction plus reverse-mode gradients
(adjoint of the matrix exponential through its eigendecomposition), which
is what keeps maximum-likelihood fits fast.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.linalg

from .circuits import GateSetSpec, layer_from_label, layer_ideal_ptm
from .errorgen import hamiltonian_generator, project_hs
from .paulis import all_labels, sign_kernel
from .superop import pauli_basis

FAMILIES = ("CPTP", "S", "CD", "SCD", "CF", "SCF")

# nesting edges (small, large) of the model hierarchy
NESTING: tuple[tuple[str, str], ...] = (
    ("S", "CPTP"),
    ("CD", "CPTP"),
    ("SCD", "S"),
    ("SCD", "CD"),
    ("CF", "CD"),
    ("SCF", "SCD"),
    ("SCF", "CF"),
)


class ModelError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Lindblad dissipator basis


@lru_cache(maxsize=None)
def _lindblad_basis(n: int) -> np.ndarray:
    """Stack of PTMs of rho -> P rho Q - (QP rho + rho QP)/2 for non-identity
    P, Q; shape (m^2, 4^n, 4^n) complex with m = 4^n - 1."""
    labels = [lbl for lbl in all_labels(n) if lbl != "I" * n]
    basis = pauli_basis(n)
    mats = {lbl: basis[all_labels(n).index(lbl)] for lbl in labels}
    dim = 4**n
    d = 2**n
    out = np.zeros((len(labels) ** 2, dim, dim), dtype=complex)
    for a, p_lbl in enumerate(labels):
        p = mats[p_lbl]
        for b, q_lbl in enumerate(labels):
            q = mats[q_lbl]
            qp = q @ p
            g = np.zeros((dim, dim), dtype=complex)
            for j, rj in enumerate(basis):
                img = p @ rj @ q - 0.5 * (qp @ rj + rj @ qp)
                for i, ri in enumerate(basis):
                    g[i, j] = np.trace(ri @ img) / d
            out[a * len(labels) + b] = g
    return out


@lru_cache(maxsize=None)
def _hamiltonian_stack(n: int) -> np.ndarray:
    labels = [lbl for lbl in all_labels(n) if lbl != "I" * n]
    return np.stack([hamiltonian_generator(n, lbl) for lbl in labels])


def _expm_with_cache(l_mat: np.ndarray):
    """exp(L) via eigendecomposition, keeping what the adjoint needs."""
    w, v = np.linalg.eig(l_mat)
    try:
        v_inv = np.linalg.inv(v)
    except np.linalg.LinAlgError:
        v_inv = None
    if v_inv is None or np.linalg.cond(v) > 1e10:
        return scipy.linalg.expm(l_mat), ("dense", l_mat)
    ew = np.exp(w)
    expl = (v * ew) @ v_inv
    # Loewner matrix (e^a - e^b)/(a - b), stable for near-degenerate pairs
    dw = w[:, None] - w[None, :]
    small = np.abs(dw) < 1e-8
    num = ew[:, None] - ew[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        phi = np.where(small, np.exp((w[:, None] + w[None, :]) / 2), num / np.where(small, 1, dw))
    return expl.real, ("eig", v, v_inv, phi)


def _expm_adjoint(cache, bar: np.ndarray) -> np.ndarray:
    """dNLL/dL from dNLL/dexp(L) for the cache built above."""
    if cache[0] == "dense":
        l_mat = cache[1]
        dim = l_mat.shape[0]
        out = np.empty_like(l_mat)
        # Frechet-derivative fallback for defective L; rarely taken
        for k in range(dim * dim):
            e = np.zeros(dim * dim)
            e[k] = 1.0
            _, frechet = scipy.linalg.expm_frechet(l_mat, e.reshape(dim, dim))
            out.flat[k] = float(np.sum(frechet * bar))
        return out
    _, v, v_inv, phi = cache
    inner = (v.conj().T @ bar @ v_inv.conj().T) * phi.conj()
    return (v_inv.conj().T @ inner @ v.conj().T).real


def _cholesky_grad(u: np.ndarray, t: np.ndarray, tril_rows, tril_cols):
    """Gradient through C = T T^dag given dNLL/dC contracted as
    sum_PQ dC[P,Q] * u[P,Q]; returns per-entry (re, im) gradients."""
    m1 = u @ t.conj()
    m2 = u.T @ t
    g_re = (m1 + m2).real
    g_im = -(m1 - m2).imag
    return g_re[tril_rows, tril_cols], g_im[tril_rows, tril_cols]


# ---------------------------------------------------------------------------
# Gate parameterizations


class FullGate:
    """CPTP error channel via exp(Hamiltonian + Lindblad) on n qubits."""

    def __init__(self, n: int):
        self.n = n
        self.m = 4**n - 1
        self.h_stack = _hamiltonian_stack(n)
        self.g_basis = _lindblad_basis(n).reshape(self.m * self.m, -1)  # (m^2, dim^2)
        rows, cols = np.tril_indices(self.m)
        self.tril = (rows, cols)
        self.off = rows != cols
        self.n_params = self.m + len(rows) + int(self.off.sum())

    def init_ideal(self, eps: float = 0.02) -> np.ndarray:
        theta = np.zeros(self.n_params)
        # T = eps * I: tiny strictly-positive rates keep gradients alive
        diag_pos = np.flatnonzero(self.tril[0] == self.tril[1])
        theta[self.m + diag_pos] = eps
        return theta

    def init_from_error(self, err: np.ndarray, floor: float = 1e-8) -> np.ndarray:
        with np.errstate(all="ignore"):
            log = scipy.linalg.logm(err)
        l_mat = log.real
        h, _, _ = project_hs(l_mat)
        labels = [lbl for lbl in all_labels(self.n) if lbl != "I" * self.n]
        h_vec = np.array([h[lbl] for lbl in labels])
        resid = l_mat.ravel() - np.tensordot(h_vec, self.h_stack, axes=1).ravel()
        c_vec, *_ = np.linalg.lstsq(self.g_basis.T, resid.astype(complex), rcond=None)
        c = c_vec.reshape(self.m, self.m)
        c = (c + c.conj().T) / 2
        w, v = np.linalg.eigh(c)
        c = v @ np.diag(np.clip(w, floor, None)) @ v.conj().T
        t = np.linalg.cholesky(c)
        theta = np.zeros(self.n_params)
        theta[: self.m] = h_vec
        re = t[self.tril].real
        im = t[self.tril].imag[self.off]
        theta[self.m : self.m + len(re)] = re
        theta[self.m + len(re) :] = im
        return theta

    def _t_matrix(self, theta):
        ln = len(self.tril[0])
        re = theta[self.m : self.m + ln]
        im_part = np.zeros(ln)
        im_part[self.off] = theta[self.m + ln :]
        t = np.zeros((self.m, self.m), dtype=complex)
        t[self.tril] = re + 1j * im_part
        return t

    def forward(self, theta):
        h_vec = theta[: self.m]
        t = self._t_matrix(theta)
        c = t @ t.conj().T
        l_mat = np.tensordot(h_vec, self.h_stack, axes=1)
        l_mat = l_mat + (c.ravel() @ self.g_basis).reshape(l_mat.shape).real
        expl, cache = _expm_with_cache(l_mat)
        return expl, (cache, t)

    def backward(self, cache, bar):
        exp_cache, t = cache
        l_bar = _expm_adjoint(exp_cache, bar)
        g_h = np.tensordot(self.h_stack, l_bar, axes=([1, 2], [0, 1])).real
        u = (self.g_basis @ l_bar.ravel()).reshape(self.m, self.m)
        g_re, g_im = _cholesky_grad(u, t, *self.tril)
        return np.concatenate([g_h, g_re, g_im[self.off]])


class DiagonalGate:
    """Stochastic Pauli error channel; rates are squared variables."""

    def __init__(self, n: int):
        self.n = n
        self.m = 4**n - 1
        self.n_params = self.m
        kernel = sign_kernel(n).astype(float)
        # f = k0 + (K[:,P] - K[:,I]) x_P^2 summed over non-identity P
        self.k0 = kernel[:, 0]
        self.k_delta = kernel[:, 1:] - kernel[:, :1]

    def init_ideal(self, eps: float = 0.02) -> np.ndarray:
        return np.full(self.n_params, eps)

    def init_from_error(self, err: np.ndarray) -> np.ndarray:
        fid = np.diag(err)
        probs = sign_kernel(self.n) @ fid / 4**self.n
        return np.sqrt(np.clip(probs[1:], 1e-10, None))

    def forward(self, theta):
        rates = theta**2
        fid = self.k0 + self.k_delta @ rates
        return np.diag(fid), theta

    def backward(self, theta, bar):
        diag_bar = np.diag(bar)
        return 2 * theta * (self.k_delta.T @ diag_bar)


# ---------------------------------------------------------------------------
# SPAM parameterization


def _svec_mats(n: int) -> np.ndarray:
    d = 2**n
    return np.stack(pauli_basis(n)) / np.sqrt(d)


class SpamParam:
    """Cholesky density matrix plus a 3-effect POVM (last = completeness)."""

    def __init__(self, n: int = 2):
        self.n = n
        self.d = 2**n
        rows, cols = np.tril_indices(self.d)
        self.tril = (rows, cols)
        self.off = rows != cols
        per = len(rows) + int(self.off.sum())  # 16 for d = 4
        self.per = per
        self.n_params = per * 4  # prep + three effects
        self.basis = _svec_mats(n)  # (dim, d, d), Hermitian

    def _t_of(self, theta_block):
        ln = len(self.tril[0])
        re = theta_block[:ln]
        im = np.zeros(ln)
        im[self.off] = theta_block[ln:]
        t = np.zeros((self.d, self.d), dtype=complex)
        t[self.tril] = re + 1j * im
        return t

    def _theta_of(self, t):
        re = t[self.tril].real
        im = t[self.tril].imag[self.off]
        return np.concatenate([re, im])

    def init_ideal(self, mix: float = 0.005) -> np.ndarray:
        rho0 = np.zeros((self.d, self.d), dtype=complex)
        rho0[0, 0] = 1.0
        rho = (1 - mix) * rho0 + mix * np.eye(self.d) / self.d
        blocks = [self._theta_of(np.linalg.cholesky(rho))]
        for o in (1, 2, 3):
            proj = np.zeros((self.d, self.d), dtype=complex)
            proj[o, o] = 1.0
            eff = (1 - mix) * proj + mix * np.eye(self.d) / self.d
            blocks.append(self._theta_of(np.linalg.cholesky(eff)))
        return np.concatenate(blocks)

    def forward(self, theta):
        tp = self._t_of(theta[: self.per])
        r = tp @ tp.conj().T
        tau = np.trace(r).real
        rho = r / tau
        prep = np.einsum("kij,ji->k", self.basis, rho).real
        effs = []
        ts = []
        total = np.zeros((self.d, self.d), dtype=complex)
        for o in range(3):
            t = self._t_of(theta[self.per * (o + 1) : self.per * (o + 2)])
            e = t @ t.conj().T
            ts.append(t)
            effs.append(e)
            total += e
        e00 = np.eye(self.d) - total
        rows = np.empty((4, 16))
        rows[0] = np.einsum("kij,ji->k", self.basis, e00).real
        for o in range(3):
            rows[o + 1] = np.einsum("kij,ji->k", self.basis, effs[o]).real
        return prep, rows, (tp, r, tau, ts)

    def backward(self, cache, prep_bar, rows_bar):
        tp, r, tau, ts = cache
        # prep: s_k = Tr[B_k R] / tau
        a = np.tensordot(prep_bar, self.basis, axes=1)  # sum_k sbar_k B_k
        s_dot = float(prep_bar @ np.einsum("kij,ji->k", self.basis, r / tau).real)
        r_bar = (a - s_dot * np.eye(self.d)) / tau
        g_prep = self._chol_block(r_bar.T, tp)
        # effects: row_o = svec(E_o); E_00 = I - sum E_o
        a0 = np.tensordot(rows_bar[0], self.basis, axes=1)
        grads = [g_prep]
        for o in range(3):
            ao = np.tensordot(rows_bar[o + 1], self.basis, axes=1)
            e_bar = ao - a0
            grads.append(self._chol_block(e_bar.T, ts[o]))
        return np.concatenate(grads)

    def _chol_block(self, u, t):
        g_re, g_im = _cholesky_grad(u, t, *self.tril)
        return np.concatenate([g_re, g_im[self.off]])


# ---------------------------------------------------------------------------
# Families


@dataclass(frozen=True)
class GateBlock:
    label: str
    kind: str            # "full" | "factored"
    factors: tuple = ()  # factor keys for "factored"


@dataclass
class FamilyModel:
    """Binds per-cycle parameterized errors plus SPAM into one flat vector."""

    kind: str
    labels: tuple[str, ...]
    blocks: dict[str, GateBlock]
    gate_params: dict          # block label -> FullGate | DiagonalGate (2Q)
    factor_params: dict        # factor key -> FullGate | DiagonalGate (1Q)
    spam: SpamParam
    slices: dict = field(default_factory=dict)
    n_params: int = 0

    def __post_init__(self):
        off = 0
        for lbl in sorted(self.gate_params):
            p = self.gate_params[lbl]
            self.slices[("gate", lbl)] = slice(off, off + p.n_params)
            off += p.n_params
        for key in sorted(self.factor_params):
            p = self.factor_params[key]
            self.slices[("factor", key)] = slice(off, off + p.n_params)
            off += p.n_params
        self.slices[("spam",)] = slice(off, off + self.spam.n_params)
        self.n_params = off + self.spam.n_params

    # -- parameter vectors ---------------------------------------------------

    def init_ideal(self) -> np.ndarray:
        theta = np.zeros(self.n_params)
        for lbl, p in self.gate_params.items():
            theta[self.slices[("gate", lbl)]] = p.init_ideal()
        for key, p in self.factor_params.items():
            theta[self.slices[("factor", key)]] = p.init_ideal()
        theta[self.slices[("spam",)]] = self.spam.init_ideal()
        return theta

    def init_from_errors(self, errors: dict[str, np.ndarray]) -> np.ndarray:
        """Warm start from per-cycle error PTMs (e.g. a previous family fit)."""
        theta = self.init_ideal()
        for lbl, block in self.blocks.items():
            err = errors.get(lbl)
            if err is None:
                continue
            if block.kind == "full":
                theta[self.slices[("gate", lbl)]] = self.gate_params[lbl].init_from_error(err)
            else:
                f1, f2 = _nearest_kron_factors(err)
                for key, factor in zip(block.factors, (f1, f2)):
                    sl = self.slices[("factor", key)]
                    theta[sl] = self.factor_params[key].init_from_error(factor)
        return theta

    # -- forward / backward ---------------------------------------------------

    def gate_errors(self, theta):
        """Error PTM per cycle label, with caches for the adjoint pass."""
        gate_caches = {}
        factor_ptms = {}
        factor_caches = {}
        for key, p in self.factor_params.items():
            ptm, cache = p.forward(theta[self.slices[("factor", key)]])
            factor_ptms[key] = ptm
            factor_caches[key] = cache
        errors = {}
        for lbl, block in self.blocks.items():
            if block.kind == "full":
                ptm, cache = self.gate_params[lbl].forward(theta[self.slices[("gate", lbl)]])
                errors[lbl] = ptm
                gate_caches[lbl] = cache
            else:
                errors[lbl] = np.kron(factor_ptms[block.factors[0]], factor_ptms[block.factors[1]])
        return errors, (gate_caches, factor_ptms, factor_caches)

    def spam_forward(self, theta):
        return self.spam.forward(theta[self.slices[("spam",)]])

    def backward(self, theta, caches, error_bars, spam_cache, prep_bar, rows_bar):
        gate_caches, factor_ptms, factor_caches = caches
        grad = np.zeros(self.n_params)
        factor_bars = {key: np.zeros((4, 4)) for key in self.factor_params}
        for lbl, block in self.blocks.items():
            bar = error_bars.get(lbl)
            if bar is None:
                continue
            if block.kind == "full":
                grad[self.slices[("gate", lbl)]] = self.gate_params[lbl].backward(
                    gate_caches[lbl], bar
                )
            else:
                k1, k2 = block.factors
                f1, f2 = factor_ptms[k1], factor_ptms[k2]
                bar4 = bar.reshape(4, 4, 4, 4)
                factor_bars[k1] += np.einsum("ikjl,kl->ij", bar4, f2)
                factor_bars[k2] += np.einsum("ikjl,ij->kl", bar4, f1)
        for key, p in self.factor_params.items():
            grad[self.slices[("factor", key)]] = p.backward(factor_caches[key], factor_bars[key])
        grad[self.slices[("spam",)]] = self.spam.backward(spam_cache, prep_bar, rows_bar)
        return grad

    # -- bookkeeping -----------------------------------------------------------

    def structural_param_counts(self) -> dict[str, int]:
        out = {}
        for lbl, block in self.blocks.items():
            if block.kind == "full":
                out[lbl] = self.gate_params[lbl].n_params
            else:
                out[lbl] = sum(self.factor_params[k].n_params for k in block.factors)
        out["SPAM"] = self.spam.n_params - 1  # trace normalization quotient
        return out


def _nearest_kron_factors(err: np.ndarray):
    """Nearest Kronecker decomposition of a 16x16 PTM (SVD rank-one of the
    rearranged matrix), normalized so both factors have unit (0,0) entry."""
    r = err.reshape(4, 4, 4, 4).transpose(0, 2, 1, 3).reshape(16, 16)
    u, s, vt = np.linalg.svd(r)
    a = (u[:, 0] * np.sqrt(s[0])).reshape(4, 4)
    b = (vt[0] * np.sqrt(s[0])).reshape(4, 4)
    if a[0, 0] != 0:
        b = b * a[0, 0]
        a = a / a[0, 0]
    return a, b


def build_family(kind: str) -> FamilyModel:
    if kind not in FAMILIES:
        raise ModelError(f"unknown family {kind!r}; expected one of {FAMILIES}")
    labels = GateSetSpec().labels
    gate_params: dict = {}
    factor_params: dict = {}
    blocks: dict[str, GateBlock] = {}
    stochastic = kind in ("S", "SCD", "SCF")
    for lbl in labels:
        if kind in ("CPTP", "S") or lbl == "CZ":
            gate_params[lbl] = DiagonalGate(2) if stochastic else FullGate(2)
            blocks[lbl] = GateBlock(lbl, "full")
            continue
        a, b = lbl.split(":")
        if kind in ("CD", "SCD"):
            keys = ((0, a, b), (1, b, a))
        else:  # CF, SCF
            keys = ((0, a), (1, b))
        for key in keys:
            if key not in factor_params:
                factor_params[key] = DiagonalGate(1) if stochastic else FullGate(1)
        blocks[lbl] = GateBlock(lbl, "factored", keys)
    return FamilyModel(
        kind=kind,
        labels=labels,
        blocks=blocks,
        gate_params=gate_params,
        factor_params=factor_params,
        spam=SpamParam(2),
    )


@lru_cache(maxsize=None)
def ideal_layer_ptms() -> dict[str, np.ndarray]:
    return {lbl: layer_ideal_ptm(layer_from_label(lbl)) for lbl in GateSetSpec().labels}
