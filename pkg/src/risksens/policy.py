"""Greedy selectors from a Bellman solution and Monte Carlo estimates of the
long-run multiplicative functional under a stationary policy."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .eigen import EigenSolution, bellman_residual, greedy_selector
from .model import ControlledModel
from .truncation import TruncatedModel

RNG_NAME = "PCG64"
BLOCK_PATHS = 1024
HEURISTIC_NOTE = ("heuristic: finite-horizon tail-domination estimate, "
                  "not a verification of the limit condition")


class PolicyError(ValueError):
    pass


def rng_info() -> dict:
    return {"bit_generator": RNG_NAME, "numpy": np.__version__,
            "seed_derivation": "SeedSequence(seed, spawn_key=(path_index,))"}


@dataclass(frozen=True, eq=False)
class PolicySolution:
    selector: np.ndarray
    mode: str
    lambda_claimed: float
    source: EigenSolution | None = field(default=None, repr=False)

    def to_dict(self, actions=None) -> dict:
        out = {"mode": self.mode, "lambda_claimed": self.lambda_claimed,
               "selector": self.selector.tolist()}
        if actions is not None:
            out["selector_labels"] = [actions[a] for a in self.selector]
        return out


def extract_policy(model_like, w, lam: float, mode: str = "max", *,
                   residual_threshold: float = 1e-6,
                   source: EigenSolution | None = None) -> PolicySolution:
    """Per-state argmax (argmin in min mode) of the Bellman right-hand side at ``w``.

    Refuses when ``(w, lam)`` is not an approximate fixed point, since the
    selector of an unsolved equation carries no optimality meaning.
    """
    w = np.asarray(w, dtype=float)
    res = bellman_residual(model_like, w, lam, mode)
    if not res <= residual_threshold:
        raise PolicyError(f"Bellman residual {res:.3e} exceeds {residual_threshold:.3e}")
    sel = greedy_selector(np.asarray(model_like.kernel), np.asarray(model_like.cost), w, mode)
    sel = sel.astype(int)
    sel.flags.writeable = False
    return PolicySolution(sel, mode, float(lam), source)


def policy_from_solution(model_like, sol: EigenSolution, *,
                         residual_threshold: float = 1e-6) -> PolicySolution:
    return extract_policy(model_like, sol.w, sol.lam, sol.mode,
                          residual_threshold=residual_threshold, source=sol)


def lift_selector(tm: TruncatedModel, selector) -> np.ndarray:
    """Selector on the parent states; merged exterior states use the exterior's action."""
    selector = np.asarray(selector, dtype=int)
    out = np.full(tm.parent.n_states, selector[-1])
    out[tm.interior] = selector[:-1]
    return out


def _as_selector(model: ControlledModel, policy) -> np.ndarray:
    if isinstance(policy, PolicySolution):
        policy = policy.selector
    items = list(policy)
    if len(items) != model.n_states:
        raise PolicyError(f"policy has {len(items)} entries, model has {model.n_states} states")
    sel = np.array([model.actions.index(a) if isinstance(a, str) else int(a) for a in items])
    if np.any(sel < 0) or np.any(sel >= model.n_actions):
        raise PolicyError("policy refers to an unknown action")
    return sel


def _path_streams(seed: int, start: int, stop: int, m: int) -> np.ndarray:
    """Uniforms for paths ``start..stop-1``, one independent substream per path index."""
    u = np.empty((stop - start, m))
    for row, i in enumerate(range(start, stop)):
        ss = np.random.SeedSequence(seed, spawn_key=(i,))
        u[row] = np.random.Generator(np.random.PCG64(ss)).random(m)
    return u


def _simulate_paths(model: ControlledModel, selector: np.ndarray, x0: int,
                    checkpoints, N: int, seed: int):
    """Cost sums and states at each checkpoint time, shape ``(len(checkpoints), N)``."""
    checkpoints = list(checkpoints)
    m = checkpoints[-1]
    S = model.n_states
    states = np.arange(S)
    cdf = np.cumsum(model.kernel[selector, states, :], axis=1)
    step_cost = model.cost[states, selector]
    sums = np.empty((len(checkpoints), N))
    ends = np.empty((len(checkpoints), N), dtype=int)
    for start in range(0, N, BLOCK_PATHS):
        stop = min(N, start + BLOCK_PATHS)
        u = _path_streams(seed, start, stop, m)
        x = np.full(stop - start, x0)
        total = np.zeros(stop - start)
        k = 0
        for t in range(m):
            total += step_cost[x]
            x = np.minimum((u[:, t, None] > cdf[x]).sum(axis=1), S - 1)
            if t + 1 == checkpoints[k]:
                sums[k, start:stop] = total
                ends[k, start:stop] = x
                k += 1
    return sums, ends


def _log_mean_exp(sums: np.ndarray) -> tuple[float, float]:
    """``ln mean(e^s)`` and its delta-method standard error."""
    N = len(sums)
    est = float(logsumexp(sums) - math.log(N))
    if N < 2:
        return est, float("nan")
    y = np.exp(sums - sums.max())
    mean = y.mean()
    sd = y.std(ddof=1)
    return est, float(sd / (mean * math.sqrt(N)))


@dataclass(frozen=True)
class SimulationEstimate:
    m: int
    N: int
    seed: int
    x0: int
    estimate: float
    std_error_log: float
    exit_fraction: float
    reference_radius: float
    rng: dict = field(default_factory=rng_info)

    def to_dict(self) -> dict:
        return {"m": self.m, "N": self.N, "seed": self.seed, "x0": self.x0,
                "estimate": self.estimate, "std_error_log": self.std_error_log,
                "exit_fraction": self.exit_fraction,
                "reference_radius": self.reference_radius, "rng": dict(self.rng)}


def simulate(model: ControlledModel, policy, x0, m: int, N: int, seed: int, *,
             reference_radius: float | None = None) -> SimulationEstimate:
    """Estimate ``(1/m) ln E_x0 exp(sum_{t<m} c(X_t, a(X_t)))`` from ``N`` paths.

    Paths follow the untruncated kernel. Path ``i`` draws from its own
    substream of ``seed``, so results do not depend on blocking or order.
    ``exit_fraction`` counts paths whose state at time ``m`` lies beyond
    ``reference_radius`` (default: the model's largest radius).
    """
    if m < 1 or N < 1:
        raise ValueError("need m >= 1 and N >= 1")
    try:
        x = model.index(x0)
    except (KeyError, IndexError, ValueError) as exc:
        raise PolicyError(f"invalid start state {x0!r}") from exc
    sel = _as_selector(model, policy)
    ref = float(model.radii.max()) if reference_radius is None else float(reference_radius)
    sums, ends = _simulate_paths(model, sel, x, [m], N, seed)
    est, se = _log_mean_exp(sums[0])
    if np.ptp(sums[0]) == 0.0:
        se = 0.0
    exit_frac = float(np.mean(model.radii[ends[0]] > ref))
    return SimulationEstimate(m, N, int(seed), x, est / m, se / m, exit_frac, ref)


@dataclass(frozen=True)
class ExassRow:
    m: int
    log_ratio: float | None
    inside_fraction: float
    status: str


@dataclass(frozen=True)
class ExassReport:
    rows: tuple[ExassRow, ...]
    trend: str
    reference_radius: float
    N: int
    seed: int
    note: str = HEURISTIC_NOTE

    def to_dict(self) -> dict:
        return {"note": self.note, "trend": self.trend, "N": self.N, "seed": self.seed,
                "reference_radius": self.reference_radius, "rng": rng_info(),
                "rows": [r.__dict__ for r in self.rows]}

    def to_csv(self) -> str:
        lines = ["m,log_ratio,inside_fraction,status"]
        for r in self.rows:
            ratio = "" if r.log_ratio is None else repr(r.log_ratio)
            lines.append(f"{r.m},{ratio},{r.inside_fraction!r},{r.status}")
        return "\n".join(lines) + "\n"


def exass_diagnostic(model: ControlledModel, policy, x0, reference_ball_radius: float,
                     horizons, N: int, seed: int, *, tol: float = 1e-3) -> ExassReport:
    """Per-horizon ``(1/m) ln`` of the full multiplicative mean over the mean
    restricted to paths ending inside the reference ball.

    All horizons share one set of paths, observed at each horizon. The
    trend compares the last ratio with the first: ``vanishing`` when it
    ends below ``tol``, ``decreasing`` or ``persistent`` otherwise.
    """
    horizons = [int(h) for h in horizons]
    if not horizons or horizons[0] < 1 or any(b <= a for a, b in zip(horizons, horizons[1:])):
        raise ValueError("horizons must be positive and strictly increasing")
    x = model.index(x0)
    sel = _as_selector(model, policy)
    sums, ends = _simulate_paths(model, sel, x, horizons, N, seed)
    rows = []
    for k, m in enumerate(horizons):
        inside = model.radii[ends[k]] <= reference_ball_radius
        frac = float(inside.mean())
        if not inside.any():
            rows.append(ExassRow(m, None, frac, "all paths exit"))
            continue
        ratio = (logsumexp(sums[k]) - logsumexp(sums[k][inside])) / m
        rows.append(ExassRow(m, float(ratio), frac, "ok"))
    vals = [r.log_ratio for r in rows if r.log_ratio is not None]
    if len(vals) < 2:
        trend = "undetermined"
    elif vals[-1] < tol:
        trend = "vanishing"
    elif vals[-1] < vals[0]:
        trend = "decreasing"
    else:
        trend = "persistent"
    return ExassReport(tuple(rows), trend, float(reference_ball_radius), N, int(seed))
