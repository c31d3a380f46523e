"""Maximum-likelihood gate-set fitting, model selection, and wildcard error.

The fit minimizes the negative multinomial log-likelihood over one of the
six nested families with CPTP enforced by construction.  Goodness of fit
is the log-likelihood ratio against the maximal model (one probability
per independent outcome), standardized to N_sigma via Wilks' theorem.

The degrees of freedom use the *identifiable* parameter count: the
numerical rank of the probability Jacobian on the actual suite at a
generic interior point.  This removes gauge directions (which no data can
determine) from the Wilks budget; the structural per-gate counts remain
available separately.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
import scipy.linalg
import scipy.optimize

from .circuits import CircuitSuite, layer_label
from .errorgen import hamiltonian_generator
from .models import (
    FAMILIES,
    NESTING,
    FamilyModel,
    build_family,
    ideal_layer_ptms,
)
from .paulis import all_labels
from .sim import OUTCOMES, DataSet
from .superop import SuperOp, choi_from_superop

_PROB_FLOOR = 1e-10


class InferenceError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# Suite compilation


@dataclass
class CompiledSuite:
    ids: list[str]
    label_order: list[str]
    step_groups: list[list[tuple[int, np.ndarray]]]  # per step: (label idx, columns)
    counts: np.ndarray       # (n_circuits, 4)
    shots: np.ndarray        # (n_circuits,)
    label_counts: np.ndarray  # (n_circuits, n_labels) occurrences per cycle
    nll_max: float
    n_max: int

    @property
    def n_circuits(self) -> int:
        return len(self.ids)


def compile_suite(suite: CircuitSuite, ds: DataSet | Mapping[str, Mapping[str, float]]) -> CompiledSuite:
    counts_map = ds.counts if isinstance(ds, DataSet) else ds
    label_order = sorted({layer_label(l) for c in suite.circuits for l in c.layers}
                         | set(_default_label_order()))
    label_idx = {lbl: k for k, lbl in enumerate(label_order)}
    ids, rows, seqs = [], [], []
    for c in suite.circuits:
        if c.base_id not in counts_map:
            raise InferenceError(f"dataset does not cover circuit {c.base_id}")
        ids.append(c.base_id)
        cm = counts_map[c.base_id]
        rows.append([float(cm.get(o, 0)) for o in OUTCOMES])
        seqs.append([label_idx[layer_label(l)] for l in c.layers])
    counts = np.array(rows)
    shots = counts.sum(axis=1)
    t_max = max((len(s) for s in seqs), default=0)
    steps = -np.ones((len(seqs), t_max), dtype=np.int16)
    for i, s in enumerate(seqs):
        steps[i, : len(s)] = s
    step_groups = []
    for t in range(t_max):
        col = steps[:, t]
        groups = []
        for li in np.unique(col):
            if li < 0:
                continue
            groups.append((int(li), np.flatnonzero(col == li)))
        step_groups.append(groups)
    label_counts = np.zeros((len(seqs), len(label_order)))
    for i, s in enumerate(seqs):
        for li in s:
            label_counts[i, li] += 1
    with np.errstate(divide="ignore", invalid="ignore"):
        freq = counts / shots[:, None]
        terms = np.where(counts > 0, counts * np.log(np.where(freq > 0, freq, 1.0)), 0.0)
    nll_max = -float(terms.sum())
    n_max = 3 * len(seqs)
    return CompiledSuite(ids, label_order, step_groups, counts, shots, label_counts, nll_max, n_max)


def _default_label_order():
    from .circuits import GateSetSpec

    return GateSetSpec().labels


# ---------------------------------------------------------------------------
# Likelihood


def _model_probs(model: FamilyModel, theta, compiled: CompiledSuite, want_caches=False):
    errors, caches = model.gate_errors(theta)
    prep, rows, spam_cache = model.spam_forward(theta)
    ideals = ideal_layer_ptms()
    gates = [errors[lbl] @ ideals[lbl] for lbl in compiled.label_order]
    n_c = compiled.n_circuits
    s = np.repeat(prep[:, None], n_c, axis=1)
    snapshots = [s.copy()]
    for groups in compiled.step_groups:
        for li, cols in groups:
            s[:, cols] = gates[li] @ s[:, cols]
        snapshots.append(s.copy())
    probs = (rows @ s).T  # (n_c, 4)
    if want_caches:
        return probs, (errors, caches, prep, rows, spam_cache, gates, snapshots)
    return probs, None


def nll_and_grad(model: FamilyModel, theta: np.ndarray, compiled: CompiledSuite):
    probs, ctx = _model_probs(model, theta, compiled, want_caches=True)
    errors, caches, prep, rows, spam_cache, gates, snapshots = ctx
    small = probs < _PROB_FLOOR
    logp = np.where(
        small,
        np.log(_PROB_FLOOR) + (probs - _PROB_FLOOR) / _PROB_FLOOR,
        np.log(np.where(small, 1.0, probs)),
    )
    nll = -float((compiled.counts * logp).sum())
    slope = np.where(small, 1.0 / _PROB_FLOOR, 1.0 / np.where(small, 1.0, probs))
    w = -(compiled.counts * slope).T  # (4, n_c) = dNLL/dP

    s_final = snapshots[-1]
    rows_bar = w @ s_final.T
    a = rows.T @ w  # adjoint states (16, n_c)
    gate_bars = [np.zeros((16, 16)) for _ in compiled.label_order]
    for t in range(len(compiled.step_groups) - 1, -1, -1):
        s_in = snapshots[t]
        for li, cols in compiled.step_groups[t]:
            gate_bars[li] += a[:, cols] @ s_in[:, cols].T
            a[:, cols] = gates[li].T @ a[:, cols]
    prep_bar = a.sum(axis=1)
    ideals = ideal_layer_ptms()
    error_bars = {
        lbl: gate_bars[k] @ ideals[lbl].T for k, lbl in enumerate(compiled.label_order)
    }
    grad = model.backward(theta, caches, error_bars, spam_cache, prep_bar, rows_bar)
    return nll, grad, probs


# ---------------------------------------------------------------------------
# Effective (identifiable) parameter count

_EFFECTIVE_NP_CACHE: dict[tuple, int] = {}


def probability_jacobian(model: FamilyModel, theta: np.ndarray, compiled: CompiledSuite):
    """Full Jacobian d p(outcome | circuit) / d theta, shape (n_c, 4, n_p)."""
    label_jacs, spam_cols, prep_jac, rows_jac = _object_jacobians(model, theta, compiled)
    probs, ctx = _model_probs(model, theta, compiled, want_caches=True)
    _, _, _, rows, _, gates, snapshots = ctx
    a_steps = _per_step_adjoints(compiled, gates, rows)
    n_c, n_p = compiled.n_circuits, model.n_params
    jac = np.zeros((n_c, 4, n_p))
    for li, lbl in enumerate(compiled.label_order):
        entries = label_jacs.get(lbl)
        if not entries:
            continue
        b = None
        for t, groups in enumerate(compiled.step_groups):
            for gli, cols in groups:
                if gli != li:
                    continue
                if b is None:
                    b = np.zeros((n_c, 4, 256))
                b[cols] += np.einsum(
                    "oic,jc->coij", a_steps[t + 1][:, :, cols], snapshots[t][:, cols]
                ).reshape(len(cols), 4, 256)
        if b is None:
            continue
        for cols_idx, jb in entries:
            jac[:, :, cols_idx] += b @ jb
    jac[:, :, spam_cols] += np.einsum("oic,ik->cok", a_steps[0], prep_jac)
    jac[:, :, spam_cols] += np.einsum("ic,oik->cok", snapshots[-1], rows_jac)
    return probs, jac


def effective_param_count(model: FamilyModel, compiled: CompiledSuite, *, seed: int = 7) -> int:
    """Rank of the probability Jacobian at a generic interior point.

    This is the number of parameters the suite actually determines; gauge
    directions and parameterization redundancies fall out automatically.
    Cached per (family, suite shape) because it is data-independent.
    """
    key = (model.kind, tuple(compiled.ids))
    if key in _EFFECTIVE_NP_CACHE:
        return _EFFECTIVE_NP_CACHE[key]
    rng = np.random.default_rng(seed)
    theta = model.init_ideal() + 0.03 * rng.standard_normal(model.n_params)
    _, jac = probability_jacobian(model, theta, compiled)
    flat = jac.reshape(-1, model.n_params)
    gram = flat.T @ flat
    w = np.linalg.eigvalsh(gram)
    rank = int((w > max(w.max(), 1e-30) * 1e-10).sum())
    _EFFECTIVE_NP_CACHE[key] = rank
    return rank


def _per_step_adjoints(compiled, gates, rows):
    """a_steps[t] (4, 16, n_c): effect rows propagated back to step t."""
    n_c = compiled.n_circuits
    t_max = len(compiled.step_groups)
    a = np.repeat(rows[:, :, None], n_c, axis=2)
    out = [None] * (t_max + 1)
    out[t_max] = a.copy()
    for t in range(t_max - 1, -1, -1):
        for li, cols in compiled.step_groups[t]:
            a[:, :, cols] = np.einsum("oic,ij->ojc", a[:, :, cols], gates[li])
        out[t] = a.copy()
    return out


def _fd_block(forward, theta_block, shape, eps=1e-6):
    """Central-difference Jacobian of a small parameterized object."""
    cols = np.zeros((int(np.prod(shape)), len(theta_block)))
    for k in range(len(theta_block)):
        tp = theta_block.copy()
        tp[k] += eps
        tm = theta_block.copy()
        tm[k] -= eps
        cols[:, k] = ((forward(tp)[0] - forward(tm)[0]) / (2 * eps)).ravel()
    return cols


def _object_jacobians(model: FamilyModel, theta, compiled):
    """Per-cycle Jacobians d vec(G_label)/d (own parameter slice).

    Returns label_jacs mapping label -> list of (param indices, jac) pairs,
    plus the spam slice index array and spam Jacobians.  Finite differences
    stay cheap because each block only rebuilds its own small object.
    """
    ideals = ideal_layer_ptms()
    label_jacs: dict[str, list] = {}
    factor_jac = {}
    factor_ptm = {}
    for key, p in model.factor_params.items():
        sl = model.slices[("factor", key)]
        factor_jac[key] = _fd_block(p.forward, theta[sl].copy(), (4, 4))
        factor_ptm[key] = p.forward(theta[sl])[0]
    for lbl, block in model.blocks.items():
        entries = []
        if block.kind == "full":
            p = model.gate_params[lbl]
            sl = model.slices[("gate", lbl)]
            jac_err = _fd_block(p.forward, theta[sl].copy(), (16, 16))
            jac = _right_compose(jac_err, ideals[lbl])
            entries.append((np.arange(sl.start, sl.stop), jac))
        else:
            k1, k2 = block.factors
            f1, f2 = factor_ptm[k1], factor_ptm[k2]
            j1 = np.stack(
                [np.kron(col.reshape(4, 4), f2) for col in factor_jac[k1].T]
            ).reshape(len(factor_jac[k1].T), 256).T
            j2 = np.stack(
                [np.kron(f1, col.reshape(4, 4)) for col in factor_jac[k2].T]
            ).reshape(len(factor_jac[k2].T), 256).T
            s1, s2 = model.slices[("factor", k1)], model.slices[("factor", k2)]
            entries.append((np.arange(s1.start, s1.stop), _right_compose(j1, ideals[lbl])))
            entries.append((np.arange(s2.start, s2.stop), _right_compose(j2, ideals[lbl])))
        label_jacs[lbl] = entries

    sl = model.slices[("spam",)]
    spam_theta = theta[sl].copy()
    eps = 1e-6
    n_spam = len(spam_theta)
    prep_jac = np.zeros((16, n_spam))
    rows_jac = np.zeros((4, 16, n_spam))
    for k in range(n_spam):
        tp = spam_theta.copy()
        tp[k] += eps
        tm = spam_theta.copy()
        tm[k] -= eps
        pp, rp, _ = model.spam.forward(tp)
        pm, rm, _ = model.spam.forward(tm)
        prep_jac[:, k] = (pp - pm) / (2 * eps)
        rows_jac[:, :, k] = (rp - rm) / (2 * eps)
    spam_cols = np.arange(sl.start, sl.stop)
    return label_jacs, spam_cols, prep_jac, rows_jac


def _right_compose(jac_err: np.ndarray, ideal: np.ndarray) -> np.ndarray:
    """Turn d vec(err)/d theta into d vec(err @ ideal)/d theta."""
    k = jac_err.shape[1]
    out = np.empty_like(jac_err)
    for c in range(k):
        out[:, c] = (jac_err[:, c].reshape(16, 16) @ ideal).ravel()
    return out


def _gauss_newton_polish(
    model: FamilyModel,
    theta: np.ndarray,
    compiled: CompiledSuite,
    *,
    max_steps: int = 6,
    min_gain: float = 0.25,
):
    """Levenberg-Marquardt refinement of the likelihood optimum.

    Quasi-Newton descent alone crawls along the flat directions of the
    CPTP-cone parameterization; a few damped Fisher-metric steps recover
    the remaining log-likelihood, which keeps lambda comparable across
    families of very different size.
    """
    counts_flat = compiled.counts.ravel()
    nll, _, _ = nll_and_grad(model, theta, compiled)
    damping = 1e-3
    for _ in range(max_steps):
        probs, jac = probability_jacobian(model, theta, compiled)
        flat = jac.reshape(-1, model.n_params)
        p = np.clip(probs.ravel(), 1e-8, None)
        grad = flat.T @ (-(counts_flat / p))
        fisher = (flat * (counts_flat / p**2)[:, None]).T @ flat
        scale = np.trace(fisher) / model.n_params
        improved = False
        for _ in range(4):
            try:
                step = np.linalg.solve(
                    fisher + damping * scale * np.eye(model.n_params), -grad
                )
            except np.linalg.LinAlgError:
                damping *= 10
                continue
            for alpha in (1.0, 0.5, 0.25, 0.1):
                trial = theta + alpha * step
                trial_nll, _, _ = nll_and_grad(model, trial, compiled)
                if trial_nll < nll - 1e-9:
                    gain = nll - trial_nll
                    theta, nll = trial, trial_nll
                    improved = True
                    damping = max(damping / 3, 1e-6)
                    break
            if improved:
                break
            damping *= 10
        if not improved or gain < min_gain:
            break
    return theta, nll


# ---------------------------------------------------------------------------
# Fit result and driver


@dataclass
class FitResult:
    family: str
    params: np.ndarray
    nll: float
    loglike_ratio: float
    n_max: int
    n_p: int               # identifiable parameters (Jacobian rank)
    n_p_structural: int
    dof: int
    n_sigma: float
    converged: bool
    cptp_ok: bool
    gate_errors: dict[str, np.ndarray]
    gates: dict[str, SuperOp]
    prep_vec: np.ndarray
    effect_rows: np.ndarray
    aligned_gates: dict[str, SuperOp] = field(default_factory=dict)
    aligned_prep: np.ndarray | None = None
    aligned_effects: np.ndarray | None = None
    ids: list[str] = field(default_factory=list)
    probs: np.ndarray | None = None
    counts: np.ndarray | None = None
    shots: np.ndarray | None = None
    label_counts: np.ndarray | None = None
    label_order: list[str] = field(default_factory=list)
    wildcard: dict | None = None


def fit(
    ds: DataSet,
    suite: CircuitSuite,
    family: str | FamilyModel,
    init: FitResult | None = None,
    *,
    restarts: int = 3,
    maxiter: int = 5000,
    gtol: float = 1e-6,
    ftol: float = 1e-9,
    seed: int = 0,
    align: bool = True,
    polish: bool = False,
) -> FitResult:
    """Maximum-likelihood fit of one model family to a dataset.

    Quasi-second-order descent from the initial point; the optional
    ``polish`` adds damped Fisher-metric (Levenberg-Marquardt) steps,
    which in practice recover well under one lambda unit and serve as a
    convergence check.  The ftol default resolves the log-likelihood
    ratio to a few units, far inside its sqrt(2k) Wilks scale.
    """
    model = build_family(family) if isinstance(family, str) else family
    compiled = compile_suite(suite, ds)

    def objective(theta):
        nll, grad, _ = nll_and_grad(model, theta, compiled)
        return nll, grad

    starts = []
    if init is not None:
        starts.append(model.init_from_errors(init.gate_errors))
    else:
        starts.append(model.init_ideal())
    rng = np.random.default_rng(seed)
    while len(starts) < restarts:
        starts.append(starts[0] + 0.01 * rng.standard_normal(model.n_params))

    best = None
    converged = False
    for x0 in starts:
        res = scipy.optimize.minimize(
            objective,
            x0,
            jac=True,
            method="L-BFGS-B",
            options={
                "maxiter": maxiter,
                "gtol": gtol,
                "ftol": ftol,
                "maxfun": 3 * maxiter,
                "maxcor": 30,
            },
        )
        if best is None or res.fun < best.fun:
            best = res
            converged = bool(res.success) or np.linalg.norm(res.jac, np.inf) < 1e-3
    theta = best.x
    if polish:
        theta, _ = _gauss_newton_polish(model, theta, compiled)
    nll, _, probs = nll_and_grad(model, theta, compiled)

    lam = max(2.0 * (nll - compiled.nll_max), 0.0)
    n_p = effective_param_count(model, compiled)
    n_p_structural = sum(model.structural_param_counts().values())
    k = compiled.n_max - n_p
    errors, _ = model.gate_errors(theta)
    prep, rows, _ = model.spam_forward(theta)
    ideals = ideal_layer_ptms()
    gates = {lbl: SuperOp(2, errors[lbl] @ ideals[lbl]) for lbl in model.labels}
    cptp_ok = all(
        choi_from_superop(g).eigenvalues().min() >= -1e-9 for g in gates.values()
    )
    result = FitResult(
        family=model.kind,
        params=theta,
        nll=nll,
        loglike_ratio=lam,
        n_max=compiled.n_max,
        n_p=n_p,
        n_p_structural=n_p_structural,
        dof=k,
        n_sigma=n_sigma_value(lam, k),
        converged=converged,
        cptp_ok=cptp_ok,
        gate_errors=errors,
        gates=gates,
        prep_vec=prep,
        effect_rows=rows,
        ids=compiled.ids,
        probs=probs,
        counts=compiled.counts,
        shots=compiled.shots,
        label_counts=compiled.label_counts,
        label_order=compiled.label_order,
    )
    if align:
        ag, ap, ae = gauge_align(result)
        result.aligned_gates = ag
        result.aligned_prep = ap
        result.aligned_effects = ae
    return result


def n_sigma_value(lam: float, k: int) -> float:
    """Wilks standardization (lambda - k) / sqrt(2k)."""
    if k <= 0:
        raise InferenceError(f"no surplus degrees of freedom (k = {k})")
    return float((lam - k) / np.sqrt(2 * k))


def n_sigma(fr: FitResult) -> float:
    return n_sigma_value(fr.loglike_ratio, fr.dof)


def evidence_ratio(small: FitResult, large: FitResult) -> float:
    """Per-parameter likelihood gain gamma between nested fits on one dataset."""
    if not is_nested(small.family, large.family):
        raise InferenceError(f"{small.family} is not nested in {large.family}")
    dn = large.n_p - small.n_p
    if dn <= 0:
        raise InferenceError("larger model must have more parameters")
    gamma = (small.loglike_ratio - large.loglike_ratio) / dn
    if gamma < 0:
        if gamma < -0.5:
            warnings.warn(
                f"evidence ratio {gamma:.3f} < 0: nested fit beat its parent; "
                "optimizer noise clamped to 0"
            )
        gamma = 0.0
    return float(gamma)


def is_nested(small: str, large: str) -> bool:
    if small == large:
        return False
    edges = set(NESTING)
    reach = {small}
    grew = True
    while grew:
        grew = False
        for s, l in edges:
            if s in reach and l not in reach:
                reach.add(l)
                grew = True
    return large in reach


# ---------------------------------------------------------------------------
# Gauge alignment

_GAUGE_LABELS = [lbl for lbl in all_labels(2) if lbl != "II"]


def _gauge_matrix(params: np.ndarray) -> np.ndarray:
    gen = np.zeros((16, 16))
    for k, lbl in enumerate(_GAUGE_LABELS):
        if params[k]:
            gen += params[k] * hamiltonian_generator(2, lbl)
    gen[np.arange(1, 16), np.arange(1, 16)] += params[15:]
    return scipy.linalg.expm(gen)


def gauge_align(fr: FitResult):
    """Pick the gauge (unitary plus diagonal group) minimizing summed
    Frobenius distance to the ideal targets, then transform the estimate."""
    ideals = ideal_layer_ptms()
    est = {lbl: fr.gates[lbl].m for lbl in fr.gates}

    def loss(params):
        m = _gauge_matrix(params)
        m_inv = np.linalg.inv(m)
        total = 0.0
        for lbl, g in est.items():
            diff = m @ g @ m_inv - ideals[lbl]
            total += float(np.sum(diff * diff))
        prep_t = m @ fr.prep_vec
        rows_t = fr.effect_rows @ m_inv
        total += float(np.sum((prep_t - _ideal_prep()) ** 2))
        total += float(np.sum((rows_t - _ideal_rows()) ** 2))
        return total

    res = scipy.optimize.minimize(loss, np.zeros(30), method="L-BFGS-B",
                                  options={"maxiter": 300})
    m = _gauge_matrix(res.x)
    m_inv = np.linalg.inv(m)
    gates = {lbl: SuperOp(2, m @ g @ m_inv) for lbl, g in est.items()}
    return gates, m @ fr.prep_vec, fr.effect_rows @ m_inv


def _ideal_prep() -> np.ndarray:
    from .sim import ideal_spam

    return ideal_spam().prep_vec


def _ideal_rows() -> np.ndarray:
    from .sim import ideal_spam

    return ideal_spam().effect_rows


# ---------------------------------------------------------------------------
# Model selection


@dataclass
class SelectionReport:
    chosen: str
    gammas: dict[tuple[str, str], float]
    trace: list[str]
    fits: dict[str, FitResult]


# the two branches of the nested hierarchy walked during selection:
# restrict-to-stochastic first, or restrict-to-local/context-free first
_BRANCHES = (
    ("CPTP", "S", "SCD", "SCF"),
    ("CPTP", "CD", "CF"),
)


def select_model(
    ds: DataSet,
    suite: CircuitSuite,
    *,
    fit_kwargs: dict | None = None,
    fits: dict[str, FitResult] | None = None,
) -> SelectionReport:
    """Walk both branches of the nesting hierarchy from CPTP, descending
    while gamma <= 1 and stopping at the first gamma > 1; among the branch
    survivors pick the fewest structural parameters."""
    fit_kwargs = dict(fit_kwargs or {})
    cache: dict[str, FitResult] = dict(fits or {})
    trace: list[str] = []
    gammas: dict[tuple[str, str], float] = {}

    def get_fit(kind: str, parent: FitResult | None = None) -> FitResult:
        if kind not in cache:
            trace.append(f"fit {kind}")
            cache[kind] = fit(ds, suite, kind, init=parent, **fit_kwargs)
        return cache[kind]

    candidates: set[str] = set()
    for branch in _BRANCHES:
        current = get_fit(branch[0])
        for child in branch[1:]:
            child_fit = get_fit(child, current)
            gamma = gammas.get((child, current.family))
            if gamma is None:
                gamma = evidence_ratio(child_fit, current)
                gammas[(child, current.family)] = gamma
            if gamma <= 1.0:
                trace.append(f"{child} <= {current.family}: gamma = {gamma:.3g} <= 1, descend")
                current = child_fit
            else:
                trace.append(f"{child} <= {current.family}: gamma = {gamma:.3g} > 1, stop")
                break
        candidates.add(current.family)

    chosen = min(candidates, key=lambda kind: sum(
        build_family(kind).structural_param_counts().values()
    ))
    trace.append(f"chosen: {chosen} (fewest parameters among {sorted(candidates)})")
    return SelectionReport(chosen=chosen, gammas=gammas, trace=trace, fits=cache)


# ---------------------------------------------------------------------------
# Wildcard error


def statistical_tvd_bound(
    shots: float, outcomes: int = 4, confidence: float = 0.95, n_circuits: int = 1
) -> float:
    """TVD fluctuation envelope sqrt(log(2^outcomes / alpha) / 2K).

    With n_circuits > 1 the miss probability is split across circuits
    (Bonferroni), giving a simultaneous envelope: pure shot noise then
    stays inside it for the whole suite at the stated confidence.
    """
    alpha = (1.0 - confidence) / n_circuits
    return float(np.sqrt(np.log(2.0**outcomes / alpha) / (2.0 * shots)))


def fit_wildcard(
    ds: DataSet, fr: FitResult, confidence: float = 0.95, *, familywise: bool = True
) -> dict:
    """Minimal per-gate TVD budgets reconciling the model with the data.

    Linear program: minimize sum w subject to, for every circuit C,
    sum_{G in C} n_G(C) w_G + w_SPAM >= TVD_C - eps_stat(C), w >= 0.
    Always feasible (w = 1 works).  The default statistical slack is the
    suite-wide simultaneous envelope, so a correct model on Markovian data
    yields zero wildcard rather than absorbing isolated shot-noise tails;
    pass familywise=False for the raw per-circuit envelope.
    """
    del ds  # the fit result carries the counts it was produced from
    if fr.probs is None or fr.counts is None:
        raise InferenceError("fit result lacks stored predictions")
    freq = fr.counts / fr.shots[:, None]
    tvds = 0.5 * np.abs(freq - fr.probs).sum(axis=1)
    n_env = len(tvds) if familywise else 1
    eps = np.array(
        [statistical_tvd_bound(s, confidence=confidence, n_circuits=n_env) for s in fr.shots]
    )
    n_gates = len(fr.label_order)
    a_ub = -np.concatenate([fr.label_counts, np.ones((len(tvds), 1))], axis=1)
    b_ub = -(tvds - eps)
    c = np.ones(n_gates + 1)
    res = scipy.optimize.linprog(c, A_ub=a_ub, b_ub=b_ub, bounds=(0, None), method="highs")
    if not res.success:
        raise InferenceError(f"wildcard LP failed: {res.message}")
    w = {lbl: float(v) for lbl, v in zip(fr.label_order, res.x[:n_gates])}
    w["SPAM"] = float(res.x[-1])
    fr.wildcard = w
    return w


def model_family_info(kind: str) -> dict:
    """Structural description of a family (parameter counts per cycle)."""
    model = build_family(kind)
    counts = model.structural_param_counts()
    return {"kind": kind, "per_gate": counts, "total": sum(counts.values())}


def clear_effective_np_cache():
    _EFFECTIVE_NP_CACHE.clear()


def families() -> tuple[str, ...]:
    return FAMILIES
