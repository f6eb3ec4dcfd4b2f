"""Nonlinear Perron eigenproblem ``T v = e^lambda v`` for sup/inf Bellman operators.

``T f(x) = max_a (or min_a) e^{c(x,a)} sum_y P(x,y|a) f(y)`` on a finite
model (a :class:`ControlledModel` or a :class:`TruncatedModel`). The solver
works on ``w = ln v`` throughout and certifies its answer with the
Collatz-Wielandt bracket ``[min ln(Tv/v), max ln(Tv/v)]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.csgraph import connected_components

from .model import ControlledModel, forall_layers
from .truncation import TruncatedModel

MODES = ("max", "min")


class SolverError(RuntimeError):
    pass


class NotConvergedError(SolverError):
    def __init__(self, iterations: int, lower: float, upper: float):
        super().__init__(
            f"no convergence after {iterations} iterations; "
            f"bracket [{lower:.12g}, {upper:.12g}] width {upper - lower:.3e}")
        self.iterations = iterations
        self.lower = lower
        self.upper = upper


class CollapseError(SolverError):
    """The iterate lost positivity: the accessibility assumption fails."""


@dataclass(frozen=True)
class SolverOptions:
    mode: str = "max"
    delta: float = 1.0
    tol_span: float = 1e-10
    max_iters: int = 100_000
    warm_start: bool = True
    record_history: bool = False
    tie_break: str = field(default="lowest-action-index", init=False)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not self.delta > 0:
            raise ValueError("damping delta must be positive")
        if not self.tol_span > 0:
            raise ValueError("tol_span must be positive")
        if self.max_iters < 0:
            raise ValueError("max_iters must be nonnegative")


@dataclass(frozen=True, eq=False)
class EigenSolution:
    mode: str
    w: np.ndarray
    lam: float
    residual_sup: float
    cw_lower: float
    cw_upper: float
    iterations: int
    positivity_certified: bool
    warm_start_rounds: int = 0
    history: tuple = ()

    @property
    def v(self) -> np.ndarray:
        return np.exp(self.w)

    @property
    def bracket_width(self) -> float:
        return self.cw_upper - self.cw_lower

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "lambda": self.lam,
            "cw_lower": self.cw_lower,
            "cw_upper": self.cw_upper,
            "residual_sup": self.residual_sup,
            "iterations": self.iterations,
            "w": self.w.tolist(),
            "positivity_certified": self.positivity_certified,
        }


# -- operator evaluation ---------------------------------------------------------

def _arrays(model_like):
    return (np.asarray(model_like.kernel, dtype=float),
            np.asarray(model_like.cost, dtype=float),
            np.asarray(model_like.norm_mask, dtype=bool))


def q_values(kernel: np.ndarray, cost: np.ndarray, w: np.ndarray) -> np.ndarray:
    """``Q[x, a] = c(x,a) + ln sum_y P(x,y|a) e^{w(y)}`` evaluated stably."""
    top = w.max()
    ev = np.exp(w - top)
    with np.errstate(divide="ignore"):
        inner = np.log(np.einsum("axy,y->xa", kernel, ev))
    return cost + inner + top


def log_bellman(kernel, cost, w, mode: str) -> np.ndarray:
    """``ln (T e^w)``."""
    q = q_values(kernel, cost, w)
    return q.max(axis=1) if mode == "max" else q.min(axis=1)


def greedy_selector(kernel, cost, w, mode: str) -> np.ndarray:
    """Per-state maximizing (minimizing) action; ``argmax`` keeps the lowest index on ties."""
    q = q_values(kernel, cost, np.asarray(w, dtype=float))
    return q.argmax(axis=1) if mode == "max" else q.argmin(axis=1)


def apply_bellman(model_like, f, mode: str = "max") -> np.ndarray:
    """One application of the Bellman operator to a positive vector ``f``."""
    kernel, cost, _ = _arrays(model_like)
    f = np.asarray(f, dtype=float)
    if f.shape != (kernel.shape[1],):
        raise ValueError(f"f must have {kernel.shape[1]} entries")
    if not np.all(np.isfinite(f)) or np.any(f <= 0):
        raise ValueError("f must be strictly positive and finite")
    vals = np.exp(cost) * np.einsum("axy,y->xa", kernel, f)
    return vals.max(axis=1) if mode == "max" else vals.min(axis=1)


def collatz_wielandt(model_like, v, mode: str = "max") -> tuple[float, float]:
    """Log-scale bracket ``(min_x ln(Tv/v), max_x ln(Tv/v))`` on the growth rate."""
    kernel, cost, _ = _arrays(model_like)
    v = np.asarray(v, dtype=float)
    if not np.all(np.isfinite(v)) or np.any(v <= 0):
        raise ValueError("v must be strictly positive and finite")
    w = np.log(v)
    r = log_bellman(kernel, cost, w, mode) - w
    return float(r.min()), float(r.max())


def bellman_residual(model_like, w, lam: float, mode: str = "max") -> float:
    """``sup_x |w(x) - (ln T e^w (x) - lambda)|``."""
    kernel, cost, _ = _arrays(model_like)
    w = np.asarray(w, dtype=float)
    return float(np.abs(w - (log_bellman(kernel, cost, w, mode) - lam)).max())


# -- accessibility precheck -------------------------------------------------------

def _precheck_edges(model_like, policy=None) -> np.ndarray:
    """Edges of the untruncated kernel restricted to the ball (or the whole model)."""
    if isinstance(model_like, TruncatedModel):
        ball_pos = np.flatnonzero(model_like.ball)
        idx = model_like.interior[ball_pos]
        kernel = model_like.parent.kernel
    else:
        ball_pos = idx = np.arange(model_like.kernel.shape[1])
        kernel = model_like.kernel
    edges = kernel[:, idx][:, :, idx] > 0
    if policy is not None:
        policy = np.asarray(policy)[ball_pos]
        edges = edges[policy, np.arange(len(idx))][None]
    return edges


def accessibility_precheck(model_like, mode: str = "max", policy=None) -> bool:
    """Every ball state reaches every singleton of the ball, for the given mode."""
    edges = _precheck_edges(model_like, policy)
    n = edges.shape[1]
    if mode == "max" or edges.shape[0] == 1:
        adj = edges.any(axis=0)
        if n == 1:
            return bool(adj[0, 0])
        ncomp, _ = connected_components(adj, directed=True, connection="strong")
        return ncomp == 1
    ball = np.ones(n, dtype=bool)
    hit = np.zeros((n, n), dtype=bool)
    for layer in forall_layers(edges, ball, np.eye(n, dtype=bool)):
        hit |= layer
        if hit.all():
            return True
    return False


# -- solver -------------------------------------------------------------------------

def _perron_vector(M: np.ndarray, v: np.ndarray, steps: int = 60):
    """Shifted inverse iteration from above for the Perron vector of ``M >= 0``.

    The shift is the current upper Collatz-Wielandt bound, so
    ``(sigma I - M)^{-1}`` stays nonnegative. Returns ``None`` when the
    iterate loses strict positivity.
    """
    eye = np.eye(len(M))
    for _ in range(steps):
        if np.any(v <= 0) or not np.all(np.isfinite(v)):
            return None
        ratio = (M @ v) / v
        hi, lo = ratio.max(), ratio.min()
        if hi - lo <= 1e-15 * hi:
            break
        sigma = hi * (1.0 + 1e-12)
        try:
            y = np.linalg.solve(sigma * eye - M, v)
        except np.linalg.LinAlgError:
            break
        if not np.all(np.isfinite(y)) or np.any(y <= 0):
            break
        v = y / y.max()
    return v


def _howard(kernel, cost, mode: str, max_rounds: int = 100):
    """Policy-evaluation warm start: returns ``(w, rounds)`` or ``(None, rounds)``."""
    S = kernel.shape[1]
    states = np.arange(S)
    shift = cost.max()
    w = np.zeros(S)
    policy = greedy_selector(kernel, cost, w, mode)
    sign = 1.0 if mode == "max" else -1.0
    for rounds in range(1, max_rounds + 1):
        M = np.exp(cost[states, policy] - shift)[:, None] * kernel[policy, states, :]
        v = _perron_vector(M, np.exp(w - w.max()))
        if v is None:
            return None, rounds
        w = np.log(v)
        q = sign * q_values(kernel, cost, w)
        best = q.argmax(axis=1)
        gain = q[states, best] - q[states, policy]
        better = gain > 1e-13 * (1.0 + np.abs(q[states, policy]))
        if not better.any():
            break
        policy = np.where(better, best, policy)
    return w, rounds


def _solve_arrays(kernel, cost, norm_mask, opts: SolverOptions):
    mode = opts.mode
    rounds = 0
    w = None
    if opts.warm_start:
        w, rounds = _howard(kernel, cost, mode)
    if w is None or not np.all(np.isfinite(w)):
        w = np.zeros(kernel.shape[1])
    log_delta = math.log(opts.delta)
    history = []
    it = 0
    while True:
        lt = log_bellman(kernel, cost, w, mode)
        if not np.all(np.isfinite(lt)):
            raise CollapseError(
                f"iterate lost positivity after {it} iterations (accessibility fails)")
        r = lt - w
        lo, hi = float(r.min()), float(r.max())
        if opts.record_history:
            history.append((lo, hi))
        if hi - lo <= opts.tol_span:
            break
        if it >= opts.max_iters:
            raise NotConvergedError(it, lo, hi)
        u = np.logaddexp(lt, log_delta + w)
        w = u - u.max()
        it += 1
    lam = 0.5 * (lo + hi)
    w_norm = w - w[norm_mask].max()
    residual = float(np.abs(r - lam).max())
    return w_norm, lam, lo, hi, residual, it, rounds, tuple(history)


def solve_eigen(model_like, opts: SolverOptions | None = None) -> EigenSolution:
    """Solve the sup (or inf) Bellman eigenproblem by damped power iteration.

    The iteration is ``v <- normalize(T v + delta v)`` in log space, stopped
    when the span of ``ln(Tv/v)`` falls below ``tol_span``. With
    ``warm_start`` the starting vector comes from policy evaluation
    (Perron vectors of the linear operators of successive greedy
    selectors) instead of ``v = 1``; certification is unchanged.
    """
    opts = opts or SolverOptions()
    kernel, cost, norm_mask = _arrays(model_like)
    w, lam, lo, hi, residual, it, rounds, history = _solve_arrays(kernel, cost, norm_mask, opts)
    certified = bool(np.all(np.isfinite(w))) and accessibility_precheck(model_like, opts.mode)
    return EigenSolution(opts.mode, w, lam, residual, lo, hi, it, certified, rounds, history)


def policy_eigen(model_like, policy, opts: SolverOptions | None = None) -> float:
    """Growth rate ``ln rho`` of the linear operator of a fixed stationary selector."""
    opts = opts or SolverOptions()
    kernel, cost, norm_mask = _arrays(model_like)
    policy = np.asarray(policy, dtype=int)
    S, A = cost.shape
    if policy.shape != (S,) or np.any(policy < 0) or np.any(policy >= A):
        raise ValueError("policy must assign a valid action index to every state")
    states = np.arange(S)
    k1 = kernel[policy, states, :][None]
    c1 = cost[states, policy][:, None]
    return _solve_arrays(k1, c1, norm_mask, opts)[1]


def finite_horizon_oracle(model_like, m: int, mode: str = "max") -> float:
    """``(1/m) ln max_x (T^m 1)(x)``, iterated on the log scale."""
    if m < 1:
        raise ValueError("horizon m must be >= 1")
    kernel, cost, _ = _arrays(model_like)
    w = np.zeros(kernel.shape[1])
    total = 0.0
    for _ in range(m):
        lt = log_bellman(kernel, cost, w, mode)
        top = lt.max()
        total += top
        w = lt - top
    return total / m
