"""Closed-form dual certificates for two-receiver, two-state problems and their verification.

A certificate ``(V, phi)`` is feasible when ``v_w(x_1, ..., x_n) <= V[w] +
sum_i phi[i][w](x_i)`` for every profile and state; its bound
``sum_w p(w) V[w]`` then caps the value of the problem. With two states,
orthogonality pins ``phi`` down through one function per receiver:
``phi[i][low](x) = (1 - x) alpha_i(x)`` and ``phi[i][high](x) = -x alpha_i(x)``.

Verification maximizes the constraint violation by dense sampling followed
by local refinement. Without a Lipschitz bound the verdict only covers the
sampled points and is labelled "sampled".
"""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .belief_core import PersuasionProblem, ValidationError
from .grid_persuasion import DualCertificate, make_grid
from .reductions import ScalarFunctionTable, cav_1d

log = logging.getLogger(__name__)


@dataclass
class AlphaCertificate:
    alpha: Sequence[Callable[[np.ndarray], np.ndarray]]
    V_low: float
    V_high: float
    name: str = "alpha"
    params: dict = field(default_factory=dict)

    @property
    def V(self) -> np.ndarray:
        return np.array([self.V_low, self.V_high])

    def bound(self, p_low: float) -> float:
        return p_low * self.V_low + (1 - p_low) * self.V_high


@dataclass
class VerificationOptions:
    samples: int = 2001
    refine_rounds: int = 3
    refine_top: int = 100
    refine_points: int = 21
    lipschitz_bound: float | None = None
    tol: float = 1e-9
    max_profiles: int = 4_200_000
    chunk: int = 400_000

    def __post_init__(self):
        if self.samples < 101:
            raise ValidationError("need at least 101 samples per axis")


@dataclass
class VerificationResult:
    feasible: bool
    max_violation: float
    bound: float
    argmax: tuple | None = None
    qualifier: str = "sampled"
    samples: int = 0
    margin: float = 0.0

    def __iter__(self):
        # allows ``feasible, max_violation, bound = verify_certificate(...)``
        return iter((self.feasible, self.max_violation, self.bound))


# --------------------------------------------------------------------------
# alpha certificates

def alpha_to_phi(cert: AlphaCertificate) -> DualCertificate:
    alphas = list(cert.alpha)

    def fn(i, X):
        x = np.asarray(X, dtype=float)[..., 0]
        a = np.asarray(alphas[i](x), dtype=float)
        return np.stack([(1 - x) * a, -x * a], axis=-1)

    return DualCertificate(cert.V, len(alphas), fn, "alpha",
                           meta={"name": cert.name, "params": dict(cert.params)})


def _safe_div(num, den):
    den = np.where(den == 0, 1.0, den)
    return num / den


def polarization_alpha(beta: float) -> AlphaCertificate:
    """Certificate for ``|x1 - x2|^beta`` at prior 1/2 with ``V = 2^-beta`` in both states."""
    beta = float(beta)
    if beta <= 0:
        raise ValidationError("beta must be positive")
    half = 2.0 ** -beta

    def alpha(x):
        x = np.asarray(x, dtype=float)
        lo = _safe_div((1 - x) ** beta - half, 1 - x)
        hi = _safe_div(half - np.abs(x) ** beta, x)
        return np.where(x <= 0.5, lo, hi)

    return AlphaCertificate([alpha, alpha], half, half, "polarization", {"beta": beta})


def retailer_alpha(p: float) -> AlphaCertificate:
    """Certificate for ``|x1 - x2|`` at prior ``p`` with ``V = (2(1-p)^2, 2p^2)``."""
    p = float(p)
    if not 0 < p < 1:
        raise ValidationError("p must lie in (0, 1)")

    def alpha(x):
        x = np.asarray(x, dtype=float)
        lo = 1 - _safe_div(2 * (1 - p) ** 2, 1 - x)
        hi = _safe_div(2 * p ** 2, x) - 1
        return np.where(x <= p, lo, hi)

    return AlphaCertificate([alpha, alpha], 2 * (1 - p) ** 2, 2 * p ** 2, "retailer", {"p": p})


def zero_alpha() -> AlphaCertificate:
    z = lambda x: np.zeros_like(np.asarray(x, dtype=float))
    return AlphaCertificate([z, z], 0.0, 0.0, "zero")


# --------------------------------------------------------------------------
# verification

def _axis_beliefs(S: int, n: int, opts: VerificationOptions):
    if S == 2:
        N = opts.samples
        while N ** n > opts.max_profiles and N > 101:
            N = int(np.floor(opts.max_profiles ** (1.0 / n)))
        N = max(N, 101)
        xs = np.linspace(0.0, 1.0, N)
        return np.stack([xs, 1 - xs], axis=-1), 1.0 / (N - 1)
    m = 1
    while True:
        K = make_grid(S, m + 1).size
        if K ** n > opts.max_profiles:
            break
        m += 1
        if m > 1000:
            break
    g = make_grid(S, m)
    return g.points, 1.0 / m


def _violation(problem: PersuasionProblem, cert: DualCertificate, w: int, X: np.ndarray) -> np.ndarray:
    n = problem.n_receivers
    total = problem.evaluate(w, X) - cert.V[w]
    for i in range(n):
        total = total - cert.phi(i, X[..., i, :])[..., w]
    return total


def _local_profiles(center: np.ndarray, h: float, k: int, S: int, rng) -> np.ndarray:
    """Profiles near ``center`` (n, S): a product grid for two states, random otherwise."""
    n = center.shape[0]
    if S == 2:
        axes = [np.clip(center[i, 0] + np.linspace(-h, h, k), 0.0, 1.0) for i in range(n)]
        pts = np.array(list(itertools.product(*axes)))
        return np.stack([pts, 1 - pts], axis=-1)
    count = k * k
    noise = rng.uniform(-h, h, size=(count, n, S))
    noise -= noise.mean(axis=-1, keepdims=True)
    X = np.clip(center[None] + noise, 0.0, None)
    X /= X.sum(axis=-1, keepdims=True)
    return np.concatenate([center[None], X])


def verify_certificate(problem: PersuasionProblem, cert: DualCertificate | AlphaCertificate,
                       opts: VerificationOptions | None = None) -> VerificationResult:
    """Sampled maximum of ``v_w - V[w] - sum_i phi[i][w]`` over profiles and states."""
    opts = opts or VerificationOptions()
    if isinstance(cert, AlphaCertificate):
        cert = alpha_to_phi(cert)
    S, n = problem.n_states, problem.n_receivers
    if cert.n_states != S or cert.n_receivers != n:
        raise ValidationError(f"certificate is for {cert.n_receivers} receivers and {cert.n_states} states, "
                              f"problem has {n} and {S}")
    B, h = _axis_beliefs(S, n, opts)
    N = len(B)
    Phi = np.stack([cert.phi(i, B) for i in range(n)])          # (n, N, S)
    total = N ** n
    top_val = np.empty(0)
    top_prof = np.empty((0, n, S))
    top_state = np.empty(0, dtype=int)
    K = max(opts.refine_top, 1)
    for start in range(0, total, opts.chunk):
        flat = np.arange(start, min(start + opts.chunk, total))
        idx = np.stack(np.unravel_index(flat, (N,) * n), axis=-1)      # (C, n)
        X = B[idx]
        for w in range(S):
            viol = problem.evaluate(w, X) - cert.V[w] - Phi[np.arange(n)[None, :], idx, w].sum(axis=1)
            if viol.size > K:
                sel = np.argpartition(-viol, K)[:K]
            else:
                sel = np.arange(viol.size)
            top_val = np.concatenate([top_val, viol[sel]])
            top_prof = np.concatenate([top_prof, X[sel]])
            top_state = np.concatenate([top_state, np.full(sel.size, w)])
            if top_val.size > 4 * K:
                keep = np.argsort(-top_val, kind="stable")[:K]
                top_val, top_prof, top_state = top_val[keep], top_prof[keep], top_state[keep]
    keep = np.argsort(-top_val, kind="stable")[:K]
    top_val, top_prof, top_state = top_val[keep], top_prof[keep], top_state[keep]
    best = int(np.argmax(top_val))
    best_val, best_prof, best_state = float(top_val[best]), top_prof[best], int(top_state[best])
    count = total * S

    rng = np.random.default_rng(0)
    step = h
    for _ in range(opts.refine_rounds):
        vals, profs, states = [], [], []
        for v0, P0, w in zip(top_val, top_prof, top_state):
            X = _local_profiles(P0, step, opts.refine_points, S, rng)
            viol = _violation(problem, cert, int(w), X)
            count += viol.size
            j = int(np.argmax(viol))
            vals.append(viol[j])
            profs.append(X[j])
            states.append(w)
            if viol[j] > best_val:
                best_val, best_prof, best_state = float(viol[j]), X[j], int(w)
        top_val, top_prof, top_state = np.array(vals), np.array(profs), np.array(states)
        step = step * 2.0 / (opts.refine_points - 1)

    margin = 0.0
    qualifier = "sampled"
    if opts.lipschitz_bound is not None:
        margin = float(opts.lipschitz_bound) * h / 2.0
        qualifier = "lipschitz"
    feasible = best_val + margin <= opts.tol
    arg = (best_state, tuple(tuple(float(v) for v in row) for row in best_prof))
    return VerificationResult(feasible, best_val, cert.bound(problem.prior), arg, qualifier, count, margin)


# --------------------------------------------------------------------------
# full information / no information at prior 1/2

def _box_max(f: Callable, box, opts: VerificationOptions):
    """Sampled maximum of ``f(x, y)`` over a rectangle with local refinement."""
    (x0, x1), (y0, y1) = box
    N = opts.samples
    xs = np.linspace(x0, x1, N)
    ys = np.linspace(y0, y1, N)
    K = opts.refine_top
    cand_v, cand_x, cand_y = [], [], []
    rows = max(1, opts.chunk // N)
    for r in range(0, N, rows):
        X, Y = np.meshgrid(xs[r:r + rows], ys, indexing="ij")
        V = f(X, Y).ravel()
        sel = np.argpartition(-V, min(K, V.size - 1))[:K]
        cand_v.append(V[sel])
        cand_x.append(X.ravel()[sel])
        cand_y.append(Y.ravel()[sel])
    v = np.concatenate(cand_v)
    cx = np.concatenate(cand_x)
    cy = np.concatenate(cand_y)
    keep = np.argsort(-v, kind="stable")[:K]
    v, cx, cy = v[keep], cx[keep], cy[keep]
    best = int(np.argmax(v))
    bv, bx, by = float(v[best]), float(cx[best]), float(cy[best])
    hx, hy = (x1 - x0) / (N - 1), (y1 - y0) / (N - 1)
    k = opts.refine_points
    for _ in range(opts.refine_rounds):
        nv, nx, ny = [], [], []
        for px, py in zip(cx, cy):
            gx = np.clip(px + np.linspace(-hx, hx, k), x0, x1)
            gy = np.clip(py + np.linspace(-hy, hy, k), y0, y1)
            X, Y = np.meshgrid(gx, gy, indexing="ij")
            V = f(X, Y)
            j = np.unravel_index(int(np.argmax(V)), V.shape)
            nv.append(V[j]); nx.append(X[j]); ny.append(Y[j])
            if V[j] > bv:
                bv, bx, by = float(V[j]), float(X[j]), float(Y[j])
        cx, cy = np.array(nx), np.array(ny)
        hx *= 2.0 / (k - 1)
        hy *= 2.0 / (k - 1)
    return bv, (bx, by)


def noinfo_inequalities(h: Callable[[np.ndarray], np.ndarray]):
    """Left minus right side of the two sufficient inequalities, as functions of (x1, x2)."""
    h_half = float(h(np.array(0.5)))

    def ineq1(x1, x2):        # x1 in [0, 1/2], x2 in [1/2, 1]
        return h(np.abs(x1 - x2)) - (h(1 - x1) + (1 - x2) / x2 * (h_half - h(x2)))

    def ineq2(x1, x2):        # x1, x2 in [0, 1/2]
        return h(np.abs(x1 - x2)) - (h_half - x1 / (1 - x1) * (h(1 - x1) - h_half)
                                     - x2 / (1 - x2) * (h(1 - x2) - h_half))

    return ineq1, ineq2


@dataclass
class NoInfoResult:
    optimal: bool
    value: float
    max_violation: float
    violations: tuple
    argmax: tuple


def check_fullinfo_noinfo(h: Callable[[np.ndarray], np.ndarray],
                          opts: VerificationOptions | None = None) -> NoInfoResult:
    """Sufficient condition for revealing the state to one receiver and nothing to the other.

    Applies to utility ``h(|x1 - x2|)`` in both states at prior 1/2 with ``h``
    nondecreasing. When it holds the value is ``h(1/2)``.
    """
    opts = opts or VerificationOptions()
    ineq1, ineq2 = noinfo_inequalities(h)
    m1, a1 = _box_max(ineq1, ((0.0, 0.5), (0.5, 1.0)), opts)
    m2, a2 = _box_max(ineq2, ((0.0, 0.5), (0.0, 0.5)), opts)
    worst = max(m1, m2)
    return NoInfoResult(worst <= opts.tol, float(h(np.array(0.5))), worst, (m1, m2),
                        a1 if m1 >= m2 else a2)


def power_h(beta: float) -> Callable[[np.ndarray], np.ndarray]:
    return lambda t: np.power(np.abs(t), beta)


def beta_bracket(precision: float = 1e-4, opts: VerificationOptions | None = None,
                 lo: float = 0.0, hi: float = 100.0):
    """Bisection on ``beta`` for ``h(t) = t^beta``; returns (lo, hi, history).

    ``lo`` always passes the sufficient condition and ``hi`` always fails.
    """
    if precision < 1e-8:
        raise ValidationError("precision must be at least 1e-8")
    opts = opts or VerificationOptions()
    history = []
    while hi - lo > precision:
        mid = 0.5 * (lo + hi)
        ok = check_fullinfo_noinfo(power_h(mid), opts).optimal
        history.append((mid, ok))
        if ok:
            lo = mid
        else:
            hi = mid
    return lo, hi, history


def beta_max_search(precision: float = 1e-4, opts: VerificationOptions | None = None) -> float:
    lo, hi, _ = beta_bracket(precision, opts)
    return 0.5 * (lo + hi)


# --------------------------------------------------------------------------
# full information / partial information

@dataclass
class PartialInfoResult:
    optimal: bool
    b: float
    c: float
    value: float
    certificate: AlphaCertificate
    verification: VerificationResult | None
    diagnostics: dict = field(default_factory=dict)


def _boundary_functions(problem: PersuasionProblem):
    def vl1(x):
        x = np.asarray(x, dtype=float)
        X = np.stack([np.stack([x, 1 - x], -1), np.stack([np.ones_like(x), np.zeros_like(x)], -1)], -2)
        return problem.evaluate(0, X)

    def vh0(x):
        x = np.asarray(x, dtype=float)
        X = np.stack([np.stack([x, 1 - x], -1), np.stack([np.zeros_like(x), np.ones_like(x)], -1)], -2)
        return problem.evaluate(1, X)

    return vl1, vh0


def _argmax_near(g: Callable, x0: float, radius: float) -> float:
    lo, hi = max(0.0, x0 - radius), min(1.0, x0 + radius)
    if hi - lo <= 0:
        return x0
    res = minimize_scalar(lambda t: -float(g(t)), bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-13, "maxiter": 500})
    cand = [lo, hi, x0, float(res.x)]
    return max(cand, key=lambda t: float(g(t)))


def alpha_p(vl1: Callable, vh0: Callable, V_low: float, V_high: float, b: float, c: float):
    """Lower bound left of ``b``, upper bound right of ``c``, their mix in between."""
    def alpha(x):
        x = np.asarray(x, dtype=float)
        left = _safe_div(vl1(x) - V_low, 1 - x)
        mid = vl1(x) - V_low + V_high - vh0(x)
        right = _safe_div(V_high - vh0(x), x)
        return np.where(x <= b, left, np.where(x >= c, right, mid))

    return alpha


def check_fullinfo_partialinfo(problem: PersuasionProblem, p: float | None = None,
                               opts: VerificationOptions | None = None,
                               samples: int = 1000, touch_tol: float = 1e-10) -> PartialInfoResult:
    """Sufficient condition for revealing the state to one receiver and partial information to the other.

    Requires two states, two receivers and ``v_w(x1, x2) = v_w(x2, x1)``.
    """
    opts = opts or VerificationOptions()
    if problem.n_states != 2 or problem.n_receivers != 2:
        raise ValidationError("needs two states and two receivers")
    p = problem.prior[0] if p is None else float(p)
    vl1, vh0 = _boundary_functions(problem)
    vbar = lambda x: np.asarray(x) * vl1(x) + (1 - np.asarray(x)) * vh0(x)
    xs = np.linspace(0.0, 1.0, samples + 1)
    table = ScalarFunctionTable(xs, vbar(xs), func=lambda t: float(vbar(np.array(t))))
    value, split = cav_1d(table, p)
    atoms = sorted(float(a[0]) for a in split.atoms)
    spacing = 1.0 / samples

    if len(atoms) == 1:
        # envelope touches at p: the tangent is the derivative of vbar there
        d = 1e-6
        lo, hi = max(0.0, p - d), min(1.0, p + d)
        slope = (float(vbar(np.array(hi))) - float(vbar(np.array(lo)))) / (hi - lo)
        anchor = p
        value = float(vbar(np.array(p)))
    else:
        a, b2 = atoms
        slope = 0.0
        for _ in range(100):
            slope_new = (float(vbar(np.array(b2))) - float(vbar(np.array(a)))) / (b2 - a)
            a_new = _argmax_near(lambda t: vbar(np.array(t)) - slope_new * t, a, 2 * spacing)
            b_new = _argmax_near(lambda t: vbar(np.array(t)) - slope_new * t, b2, 2 * spacing)
            done = abs(a_new - a) < 1e-15 and abs(b_new - b2) < 1e-15 and abs(slope_new - slope) < 1e-16
            a, b2, slope = a_new, b_new, slope_new
            if done:
                break
        slope = (float(vbar(np.array(b2))) - float(vbar(np.array(a)))) / (b2 - a)
        anchor = a
        value = float(vbar(np.array(a))) + slope * (p - a)
    base = float(vbar(np.array(anchor)))
    line = lambda x: base + slope * (np.asarray(x) - anchor)
    V_low, V_high = float(line(1.0)), float(line(0.0))

    # leftmost and rightmost touch points of the tangent line
    gap = line(xs) - vbar(xs)
    touching = xs[gap <= touch_tol]
    if len(atoms) == 1:
        b = c = p
        # extend over the contiguous run of touching samples around p
        ok = gap <= touch_tol
        k = int(np.argmin(np.abs(xs - p)))
        if ok[k]:
            lo_k = k
            while lo_k > 0 and ok[lo_k - 1]:
                lo_k -= 1
            hi_k = k
            while hi_k < len(xs) - 1 and ok[hi_k + 1]:
                hi_k += 1
            b, c = min(p, float(xs[lo_k])), max(p, float(xs[hi_k]))
    else:
        b, c = a, b2
        if touching.size:
            b = min(b, float(touching.min()))
            c = max(c, float(touching.max()))
    alpha = alpha_p(vl1, vh0, V_low, V_high, b, c)
    cert = AlphaCertificate([alpha, alpha], V_low, V_high, "partial_information",
                            {"p": p, "b": b, "c": c})
    seam = []
    for s in (b, c):
        left = float(_safe_div(vl1(np.array(s)) - V_low, 1 - s)) if s < 1 else float("nan")
        right = float(_safe_div(V_high - vh0(np.array(s)), s)) if s > 0 else float("nan")
        mid = float(vl1(np.array(s)) - V_low + V_high - vh0(np.array(s)))
        seam.append(max(abs(left - mid) if np.isfinite(left) else 0.0,
                        abs(right - mid) if np.isfinite(right) else 0.0))
    ver = verify_certificate(problem, cert, opts)
    diag = {"V_low": V_low, "V_high": V_high, "slope": slope, "seam_gap": max(seam),
            "envelope_value": value}
    return PartialInfoResult(ver.feasible, b, c, float(p * V_low + (1 - p) * V_high), cert, ver, diag)
