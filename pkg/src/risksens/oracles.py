"""Ground-truth generators: the deterministic harmonic cycle, a Perron-root
oracle independent of the nonlinear solver, and seeded random models."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import ControlledModel


@dataclass(frozen=True)
class HarmonicSpec:
    n: int
    c_bar: float = 1.0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")


def _shift_kernel(size: int, wrap: bool) -> np.ndarray:
    K = np.zeros((1, size, size))
    idx = np.arange(size)
    K[0, idx[:-1], idx[1:]] = 1.0
    K[0, size - 1, 0 if wrap else size - 1] = 1.0
    return K


def harmonic_model(spec: HarmonicSpec) -> ControlledModel:
    """The cycle ``1 -> 2 -> ... -> n+1 -> 1`` with cost ``c(j) = c_bar - 1/j``.

    This is the shift chain on the positive integers after truncation to
    ``{1, ..., n+1}`` with restart at 1.
    """
    size = spec.n + 1
    j = np.arange(1, size + 1)
    mu = np.zeros(size)
    mu[0] = 1.0
    return ControlledModel(tuple(str(i) for i in j), j - 1.0, ("shift",),
                           _shift_kernel(size, wrap=True),
                           (spec.c_bar - 1.0 / j)[:, None], mu)


def harmonic_chain(size: int, c_bar: float = 1.0) -> ControlledModel:
    """The untruncated shift ``j -> j+1`` on ``{1, ..., size}`` (last state absorbing).

    Truncating at ball ``n`` (``n + 2 < size``) reproduces the harmonic cycle
    on ``{1, ..., n+1}`` plus transient shell and exterior states.
    """
    j = np.arange(1, size + 1)
    mu = np.zeros(size)
    mu[0] = 1.0
    return ControlledModel(tuple(str(i) for i in j), j - 1.0, ("shift",),
                           _shift_kernel(size, wrap=False),
                           (c_bar - 1.0 / j)[:, None], mu)


def harmonic_number(n: int) -> float:
    return math.fsum(1.0 / j for j in range(1, n + 1))


def harmonic_closed_form(spec: HarmonicSpec) -> tuple[float, int, float]:
    """``(lambda_n, k, w_n(1))`` for the harmonic cycle, normalized so ``w_n(k) = 0``.

    ``w_n(1)`` follows from the cyclic recursion ``w(i) = c(i) - lambda + w(i+1)``:
    ``w_n(1) = sum_{j=k}^{n+1} 1/j - (n+2-k) H_{n+1}/(n+1)``.
    """
    N = spec.n + 1
    H = harmonic_number(N)
    lam = spec.c_bar - H / N
    k = int(math.floor(N / H)) + 1
    w1 = math.fsum(1.0 / j for j in range(k, N + 1)) - (N + 1 - k) * H / N
    return lam, k, w1


class ReducibleMatrixError(ValueError):
    pass


def perron_root_oracle(model: ControlledModel, policy=None, tol: float = 1e-13,
                       max_doublings: int = 64) -> float:
    """``ln rho(M)`` for ``M(x,y) = e^{c(x)} P(x,y)`` by normalized repeated squaring.

    ``(1/K) ln`` of the min and max row sums of ``M^K`` (``K = 2^k``) bracket
    ``ln rho`` from below and above; squaring stops once the bracket is
    narrower than ``tol``.
    """
    if policy is None:
        if model.n_actions != 1:
            raise ValueError("model has several actions; pass a policy")
        policy = np.zeros(model.n_states, dtype=int)
    s = np.arange(model.n_states)
    policy = np.asarray(policy, dtype=int)
    c = model.cost[s, policy]
    shift = c.max()
    M = np.exp(c - shift)[:, None] * model.kernel[policy, s, :]
    log_scale = 0.0   # M_k = M^(2^k) / exp(log_scale)
    power = 1.0
    for _ in range(max_doublings + 1):
        rows = M.sum(axis=1)
        if np.any(rows <= 0):
            raise ReducibleMatrixError("a row of M^K vanished")
        lo = (log_scale + math.log(rows.min())) / power
        hi = (log_scale + math.log(rows.max())) / power
        if hi - lo <= tol:
            return shift + 0.5 * (lo + hi)
        M = M @ M
        top = M.max()
        M = M / top
        log_scale = 2.0 * log_scale + math.log(top)
        power *= 2.0
    raise ReducibleMatrixError(
        f"row-sum bracket did not close (width {hi - lo:.3e}); matrix likely reducible")


def single_state_model(kappa: float) -> ControlledModel:
    return ControlledModel(("b",), [0.0], ("stay",), [[[1.0]]], [[kappa]])


def two_state_model() -> ControlledModel:
    """Uniform two-state chain with costs ``(0, ln 2)``; growth rate ``ln 1.5``."""
    return ControlledModel(("1", "2"), [0.0, 1.0], ("a",),
                           [[[0.5, 0.5], [0.5, 0.5]]], [[0.0], [math.log(2.0)]])


def random_model(seed: int, n_states: int, n_actions: int, *, density: float = 1.0,
                 cost_scale: float = 1.0) -> ControlledModel:
    """Seeded random model whose every action's graph contains the cycle
    ``0 -> 1 -> ... -> S-1 -> 0``, so all accessibility checks hold."""
    rng = np.random.default_rng(seed)
    S, A = n_states, n_actions
    kernel = rng.random((A, S, S)) * (rng.random((A, S, S)) < density)
    idx = np.arange(S)
    kernel[:, idx, (idx + 1) % S] += 0.1 + rng.random((A, S))
    kernel /= kernel.sum(axis=2, keepdims=True)
    cost = cost_scale * rng.standard_normal((S, A))
    radii = np.arange(S, dtype=float)
    return ControlledModel(tuple(f"s{i}" for i in range(S)), radii,
                           tuple(f"a{i}" for i in range(A)), kernel, cost)


def dominance_chain(size: int = 12, seed: int = 0, spread: float = 2.0) -> ControlledModel:
    """Two-action chain with strictly positive, mutually comparable rows.

    Rows are a common base measure reweighted by factors in ``[1, spread]``,
    so the dominance bound is finite; costs peak at the center and fall off
    with the radius.
    """
    rng = np.random.default_rng(seed)
    radii = np.arange(size, dtype=float)
    kernel = np.empty((2, size, size))
    for a in range(2):
        base = np.exp(-radii / (2.0 + a))
        weights = 1.0 + (spread - 1.0) * rng.random((size, size))
        rows = base[None, :] * weights
        kernel[a] = rows / rows.sum(axis=1, keepdims=True)
    cost = np.stack([1.0 / (1.0 + radii), 0.8 / (1.0 + 0.5 * radii)], axis=1)
    return ControlledModel(tuple(f"x{i}" for i in range(size)), radii, ("a", "b"),
                           kernel, cost)


def peaked_model() -> ControlledModel:
    """Five states on a line, costs peaked at the center, reflecting random walk."""
    S = 5
    P = np.zeros((S, S))
    for x in range(S):
        P[x, max(x - 1, 0)] += 0.5
        P[x, min(x + 1, S - 1)] += 0.5
    stay = 0.6 * np.eye(S) + 0.4 * P
    cost = np.array([[1.0, 0.9], [0.6, 0.7], [0.3, 0.2], [0.1, 0.0], [0.0, 0.05]])
    return ControlledModel(tuple(f"p{i}" for i in range(S)), np.arange(S, dtype=float),
                           ("walk", "lazy"), np.stack([P, stay]), cost)
