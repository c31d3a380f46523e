"""Self-contained interior-point solver for the diamond-norm program.

The program solved here, for a Hermitian matrix J on a d*d-dimensional
(ancilla x output) space, is

    maximize    <J, W>
    subject to  0 <= W <= rho (x) I_d,   rho >= 0,   Tr rho = 1,

whose optimum equals half the diamond norm of the Hermiticity-preserving
map with (unnormalized) Choi matrix J.  Variables live in the real vector
space of Hermitian matrices; the PSD cones are handled with log-det
barriers along a central path, and the returned duality gap is a
certificate evaluated on an exactly feasible dual point, not an estimate.

The dual used for the certificate is

    minimize    lambda_max(Tr_out Z)
    subject to  Z >= J,  Z >= 0.

From the W-block optimality condition of the barrier problem, Z = J +
W^-1/t satisfies Z >= J by construction at any interior iterate; a small
identity shift repairs Z >= 0 if centering left it slightly indefinite,
which can only loosen (never fake) the certificate.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.linalg

from .config import TOLERANCES


class SdpError(RuntimeError):
    pass


class SdpNonConvergence(SdpError):
    def __init__(self, lower: float, upper: float, iterations: int):
        self.bounds = (lower, upper)
        self.iterations = iterations
        super().__init__(
            f"no convergence after {iterations} Newton steps; "
            f"optimum bracketed in [{lower:.6e}, {upper:.6e}]"
        )


@dataclass(frozen=True)
class SdpSolution:
    value: float
    gap: float
    iterations: int
    w: np.ndarray
    rho: np.ndarray
    dual_value: float


@lru_cache(maxsize=None)
def _herm_basis_mat(k: int) -> np.ndarray:
    """Columns are row-major vecs of an orthonormal Hermitian basis of C^(k,k).

    Order: k diagonal units, then sqrt(2)-normalized real pairs, then
    imaginary pairs, so <A, B>_F = rvec(A) . rvec(B) exactly.
    """
    cols = []
    for i in range(k):
        e = np.zeros((k, k), dtype=complex)
        e[i, i] = 1.0
        cols.append(e.ravel())
    inv = 1 / np.sqrt(2)
    for i in range(k):
        for j in range(i + 1, k):
            e = np.zeros((k, k), dtype=complex)
            e[i, j] = inv
            e[j, i] = inv
            cols.append(e.ravel())
    for i in range(k):
        for j in range(i + 1, k):
            e = np.zeros((k, k), dtype=complex)
            e[i, j] = -1j * inv
            e[j, i] = 1j * inv
            cols.append(e.ravel())
    return np.column_stack(cols)


def herm_to_rvec(m: np.ndarray) -> np.ndarray:
    b = _herm_basis_mat(m.shape[0])
    return (b.conj().T @ m.ravel()).real


def rvec_to_herm(v: np.ndarray) -> np.ndarray:
    k = int(np.sqrt(v.size))
    b = _herm_basis_mat(k)
    return (b @ v.astype(complex)).reshape(k, k)


@lru_cache(maxsize=None)
def _kron_rho_map(d: int) -> np.ndarray:
    """Complex matrix taking rvec(rho) (d x d) to vec(rho (x) I_d)."""
    big = d * d
    b_rho = _herm_basis_mat(d)
    out = np.zeros((big * big, d * d), dtype=complex)
    eye = np.eye(d)
    for col in range(d * d):
        rho = b_rho[:, col].reshape(d, d)
        out[:, col] = np.kron(rho, eye).ravel()
    return out


def _logdet_pd(s: np.ndarray) -> float | None:
    """2 sum log diag(chol(s)), or None if s is not positive definite."""
    try:
        c = np.linalg.cholesky(s)
    except np.linalg.LinAlgError:
        return None
    return 2.0 * float(np.sum(np.log(np.diag(c).real)))


def _pd_inverse(s: np.ndarray) -> np.ndarray:
    inv = np.linalg.inv(s)
    return (inv + inv.conj().T) / 2


def _partial_trace_out(z: np.ndarray, d: int) -> np.ndarray:
    """Trace over the second (output) tensor factor of a d^2 x d^2 matrix."""
    return np.einsum("aibi->ab", z.reshape(d, d, d, d))


def solve_diamond_sdp(
    j: np.ndarray,
    d: int,
    *,
    gap_tol: float | None = None,
    max_iter: int = 200,
) -> SdpSolution:
    """Run the barrier path-following method on the diamond-norm SDP."""
    gap_tol = TOLERANCES.sdp_gap if gap_tol is None else gap_tol
    big = d * d
    if j.shape != (big, big):
        raise SdpError(f"J has shape {j.shape}, expected {(big, big)}")
    if np.max(np.abs(j - j.conj().T)) > 1e-10:
        raise SdpError("J must be Hermitian")
    j = (j + j.conj().T) / 2

    scale = float(np.linalg.norm(j, 2))
    if scale == 0.0:
        return SdpSolution(0.0, 0.0, 0, np.zeros((big, big), dtype=complex), np.eye(d) / d, 0.0)
    jn = j / scale
    gap_scaled = gap_tol / scale  # certificate target in normalized units

    b_w = _herm_basis_mat(big)
    b_r = _herm_basis_mat(d)
    k_rho = _kron_rho_map(d)
    nw, nr = big * big, d * d
    nu = 2 * big + d  # total barrier parameter

    j_rvec = herm_to_rvec(jn)
    c_eq = np.zeros(nw + nr)
    c_eq[nw : nw + d] = 1.0  # Tr rho in rvec coordinates

    x = np.concatenate([herm_to_rvec(np.eye(big) / (2 * d)), herm_to_rvec(np.eye(d) / d)])

    def slacks(xv):
        w_m = rvec_to_herm(xv[:nw])
        rho_m = rvec_to_herm(xv[nw:])
        s2 = np.kron(rho_m, np.eye(d)) - w_m
        return w_m, rho_m, s2

    def phi(xv, t):
        w_m, rho_m, s2 = slacks(xv)
        parts = [_logdet_pd(s) for s in (w_m, s2, rho_m)]
        if any(p is None for p in parts):
            return None
        return -t * float(np.real(np.vdot(jn, w_m))) - sum(parts)

    t = nu / 0.5  # initial certified gap target ~0.5 in normalized units
    mu_factor = 25.0
    total_newton = 0
    best = (0.0, np.inf)  # (primal, certified upper bound)
    stalls = 0

    while True:
        for _ in range(25):  # Newton recentering at this t
            val = phi(x, t)
            if val is None:
                raise SdpError("iterate left the cone")
            w_m, rho_m, s2 = slacks(x)
            inv1, inv2, inv3 = _pd_inverse(w_m), _pd_inverse(s2), _pd_inverse(rho_m)

            g_w = -t * j_rvec - (b_w.conj().T @ inv1.ravel()).real
            g_w += (b_w.conj().T @ inv2.ravel()).real
            g_r = -(k_rho.conj().T @ inv2.ravel()).real - (b_r.conj().T @ inv3.ravel()).real
            grad = np.concatenate([g_w, g_r])

            h = np.zeros((nw + nr, nw + nr))
            k1 = np.kron(inv1, inv1.conj())
            h[:nw, :nw] += np.real(b_w.conj().T @ k1 @ b_w)
            a2 = np.concatenate([-b_w, k_rho], axis=1)
            k2 = np.kron(inv2, inv2.conj())
            h += np.real(a2.conj().T @ k2 @ a2)
            k3 = np.kron(inv3, inv3.conj())
            h[nw:, nw:] += np.real(b_r.conj().T @ k3 @ b_r)

            kkt = np.zeros((nw + nr + 1, nw + nr + 1))
            kkt[:-1, :-1] = h
            kkt[:-1, -1] = c_eq
            kkt[-1, :-1] = c_eq
            rhs = np.concatenate([-grad, [0.0]])
            with np.errstate(all="ignore"):
                lu = scipy.linalg.lu_factor(kkt, check_finite=False)
                sol = scipy.linalg.lu_solve(lu, rhs, check_finite=False)
            if not np.all(np.isfinite(sol)):
                break  # Hessian numerically singular: t is past the fp floor
            sol += scipy.linalg.lu_solve(lu, rhs - kkt @ sol, check_finite=False)
            dx = sol[:-1]

            decrement = float(-grad @ dx)
            total_newton += 1
            if total_newton > max_iter:
                raise SdpNonConvergence(best[0] * scale, best[1] * scale, total_newton)
            if not np.isfinite(decrement) or decrement <= 0:
                break

            alpha = 1.0
            for _ in range(60):
                tv = phi(x + alpha * dx, t)
                if tv is not None and tv <= val - 0.25 * alpha * decrement:
                    break
                alpha *= 0.5
            else:
                break
            x = x + alpha * dx
            if decrement / 2 < 1e-12:
                break

        w_m, rho_m, s2 = slacks(x)
        primal = float(np.real(np.vdot(jn, w_m)))
        upper = _certified_dual(jn, w_m, s2, t, d)
        if upper - primal < best[1] - best[0]:
            best = (max(primal, best[0]), upper)
            stalls = 0
        else:
            stalls += 1  # certificate no longer improving: fp floor reached
        if best[1] - best[0] <= gap_scaled or stalls >= 2:
            break
        t *= mu_factor

    gap = max(best[1] - best[0], 0.0) * scale
    if gap > max(gap_tol * 10, 1e-7):
        raise SdpNonConvergence(best[0] * scale, best[1] * scale, total_newton)
    return SdpSolution(best[0] * scale, gap, total_newton, w_m, rho_m, best[1] * scale)


def _certified_dual(jn, w_m, s2, t: float, d: int) -> float:
    """Feasible dual objective from the current interior point.

    Two candidates: Z = J + W^-1/t (Z >= J exact, may need a PSD shift) and
    Z = S2^-1/t (PSD exact, may need a Z >= J shift).  Either shift only
    loosens the bound; the smaller certified value wins.
    """
    candidates = []
    z1 = jn + _pd_inverse(w_m) / t
    shift1 = max(0.0, -float(np.linalg.eigvalsh(z1).min()))
    candidates.append((z1, shift1))
    z2 = _pd_inverse(s2) / t
    shift2 = max(0.0, -float(np.linalg.eigvalsh(z2 - jn).min()))
    candidates.append((z2, shift2))
    bounds = []
    for z, shift in candidates:
        m = _partial_trace_out(z, d) + shift * d * np.eye(d)
        bounds.append(float(np.linalg.eigvalsh(m).max()))
    return min(bounds)
