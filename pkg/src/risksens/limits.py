"""Sweeps over growing truncations and the structural checks that decide
whether the truncated solutions have a usable limit."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .eigen import EigenSolution, SolverError, SolverOptions, log_bellman, solve_eigen
from .model import ControlledModel
from .truncation import TruncatedModel, TruncationScheme, build_truncated

CSV_COLUMNS = ("n", "lambda", "cw_width", "residual", "sup_diff", "a4_floor")


class SweepError(RuntimeError):
    def __init__(self, n: int, cause: Exception):
        super().__init__(f"solve failed at n={n}: {cause}")
        self.n = n
        self.cause = cause


def tail_window(count: int) -> int:
    """Size of the tail used for limsup estimates: ``max(3, 20%)``, capped at ``count``."""
    return min(count, max(3, math.ceil(0.2 * count)))


def full_residual(model: ControlledModel, w, lam: float, mode: str = "max",
                  states=None) -> float:
    """Residual of the untruncated Bellman equation for the pair ``(w, lam)``.

    ``w`` must be defined on every model state; ``states`` (a mask or index
    array) restricts the supremum, e.g. to the interior of a truncation.
    """
    w = np.asarray(w, dtype=float)
    r = np.abs(w - (log_bellman(model.kernel, model.cost, w, mode) - lam))
    if states is not None:
        r = r[states]
    return float(r.max())


@dataclass(frozen=True)
class A3Result:
    level_set: tuple[int, ...]
    max_radius: float
    certified: bool
    epsilon: float


def check_A3(model: ControlledModel, lam: float, epsilon: float,
             mode: str = "max") -> A3Result:
    """Level set ``{x : c_hat(x) >= lam - eps}`` and whether it stays inside the modeled horizon.

    ``c_hat`` is ``max_a c`` in max mode and ``min_a c`` in min mode.
    Certified when the set's largest radius is strictly below the model's.
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    c_hat = model.cost.max(axis=1) if mode == "max" else model.cost.min(axis=1)
    level = np.flatnonzero(c_hat >= lam - epsilon)
    max_r = float(model.radii[level].max()) if len(level) else 0.0
    return A3Result(tuple(int(i) for i in level), max_r,
                    bool(max_r < model.radii.max()), float(epsilon))


@dataclass(frozen=True)
class A4Result:
    certified: bool
    witness: tuple[int, int, int] | None    # (start state, steps m, first ball index N)
    epsilon: float


def _bits(mask) -> int:
    return sum(1 << int(i) for i in np.flatnonzero(mask))


def check_A4(model: ControlledModel, scheme: TruncationScheme, ns, ws, epsilon: float,
             mode: str = "max", N: int | None = None, max_m: int | None = None) -> A4Result:
    """Search a start state and horizon reaching ``O_n(eps) = {e^{w_n} > eps}`` uniformly in n.

    ``ws`` are log-eigenfunctions on the parent states (one per entry of
    ``ns``). Uniformity is tested over every swept ``n >= N`` (default: the
    whole sweep). Max mode needs one action sequence that works for all
    such n; min mode needs positive hitting probability under every strategy.
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    epsilon = float(epsilon)
    ns = list(ns)
    N = ns[0] if N is None else N
    sel = [i for i, n in enumerate(ns) if n >= N]
    if not sel:
        raise ValueError(f"no swept ball index >= {N}")
    S = model.n_states
    max_m = S if max_m is None else max_m
    log_eps = math.log(epsilon)
    balls = [model.radii <= scheme.radius(ns[i]) for i in sel]
    targets = [(np.asarray(ws[i]) > log_eps) & b for i, b in zip(sel, balls)]
    edges = model.kernel > 0
    order = np.argsort(model.radii, kind="stable")

    if mode == "min":
        e = edges.astype(np.float64)
        hits = []
        for ball, tgt in zip(balls, targets):
            layers = np.zeros((max_m + 1, S), dtype=bool)
            current = tgt
            for m in range(1, max_m + 1):
                hit = np.ones(S, dtype=bool)
                for ea in e:
                    hit &= (ea @ current) > 0
                layers[m] = hit
                current = hit & ball
            hits.append(layers)
        for m in range(1, max_m + 1):
            for x in order:
                if all(h[m, x] for h in hits):
                    return A4Result(True, (int(x), m, N), epsilon)
        return A4Result(False, None, epsilon)

    # max mode: breadth-first over macro-states (one reachable set per swept n)
    succ = [[_bits(edges[a, y]) for y in range(S)] for a in range(model.n_actions)]
    ball_bits = [_bits(b) for b in balls]
    tgt_bits = [_bits(t) for t in targets]

    def step(sets, a):
        out = []
        for s, bb in zip(sets, ball_bits):
            nxt = 0
            while s:
                low = s & -s
                nxt |= succ[a][low.bit_length() - 1]
                s ^= low
            out.append(nxt & bb)
        return tuple(out)

    for x in order:
        layer = {tuple(1 << int(x) for _ in sel)}
        for m in range(1, max_m + 1):
            layer = {step(sets, a) for sets in layer for a in range(model.n_actions)}
            layer = {s for s in layer if all(s)}
            if not layer:
                break
            if any(all(s & t for s, t in zip(sets, tgt_bits)) for sets in layer):
                return A4Result(True, (int(x), m, N), epsilon)
    return A4Result(False, None, epsilon)


@dataclass(frozen=True, eq=False)
class LimitReport:
    mode: str
    ns: tuple[int, ...]
    lambdas: tuple[float, ...]
    cw_widths: tuple[float, ...]
    residuals: tuple[float, ...]
    lambda_limsup: float
    sup_diffs: tuple[float, ...]
    full_residuals: tuple[float, ...]
    a3: A3Result
    a4_floor: tuple[float, ...]
    degeneracy_flag: bool
    epsilon: float
    solutions: tuple[EigenSolution, ...] = field(repr=False, default=())
    w_full: tuple[np.ndarray, ...] = field(repr=False, default=())

    @property
    def a3_level_set(self):
        return self.a3.level_set

    def rows(self):
        for i, n in enumerate(self.ns):
            yield {
                "n": n,
                "lambda": self.lambdas[i],
                "cw_width": self.cw_widths[i],
                "residual": self.residuals[i],
                "sup_diff": self.sup_diffs[i - 1] if i else float("nan"),
                "a4_floor": self.a4_floor[i],
            }

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for row in self.rows():
            writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "ns": list(self.ns),
            "lambdas": list(self.lambdas),
            "cw_widths": list(self.cw_widths),
            "residuals": list(self.residuals),
            "lambda_limsup": self.lambda_limsup,
            "sup_diffs": list(self.sup_diffs),
            "full_residuals": list(self.full_residuals),
            "a3_level_set": list(self.a3.level_set),
            "a3_max_radius": self.a3.max_radius,
            "a3_certified": self.a3.certified,
            "a4_floor": list(self.a4_floor),
            "degeneracy_flag": self.degeneracy_flag,
            "epsilon": self.epsilon,
        }


def default_epsilon(model: ControlledModel, lam: float, tail_radius: float,
                    mode: str = "max") -> float:
    """Half the gap between ``lam`` and the tail maximum of ``c_hat``, else ``1e-3``.

    The tail is the set of states beyond ``tail_radius``; when that is
    empty, the outermost radius layer.
    """
    c_hat = model.cost.max(axis=1) if mode == "max" else model.cost.min(axis=1)
    tail = model.radii > tail_radius
    if not tail.any():
        tail = model.radii == model.radii.max()
    gap = lam - float(c_hat[tail].max())
    return 0.5 * gap if gap > 0 else 1e-3


def solve_sequence(model: ControlledModel, scheme: TruncationScheme, n_from: int,
                   n_to: int, opts: SolverOptions | None = None, *,
                   epsilon: float | None = None,
                   degeneracy_threshold: float = 0.2) -> LimitReport:
    """Solve every truncation ``n_from..n_to`` and assemble the limit diagnostics.

    The degeneracy flag is raised when the floor ``min_{B_n} e^{w_n}`` ends
    the sweep below ``degeneracy_threshold`` and is still strictly
    decreasing over the tail window. A floor that is small but has settled
    is not flagged.
    """
    if n_from < 1 or n_to < n_from:
        raise ValueError("need 1 <= n_from <= n_to")
    opts = opts or SolverOptions()
    ns = tuple(range(n_from, n_to + 1))
    sols, truncs, w_full = [], [], []
    for n in ns:
        tm = build_truncated(model, scheme, n)
        try:
            sol = solve_eigen(tm, opts)
        except SolverError as exc:
            raise SweepError(n, exc) from exc
        sols.append(sol)
        truncs.append(tm)
        w_full.append(tm.extend(sol.w))

    lambdas = tuple(s.lam for s in sols)
    win = tail_window(len(ns))
    lam_sup = max(lambdas[-win:])

    sup_diffs = []
    for prev, cur, tm_prev in zip(w_full, w_full[1:], truncs):
        common = tm_prev.interior
        sup_diffs.append(float(np.abs(np.exp(cur[common]) - np.exp(prev[common])).max()))

    full_res = tuple(full_residual(model, wf, s.lam, opts.mode, tm.interior)
                     for wf, s, tm in zip(w_full, sols, truncs))
    floors = tuple(float(np.exp(wf[model.radii <= tm.radius]).min())
                   for wf, tm in zip(w_full, truncs))

    if epsilon is None:
        epsilon = default_epsilon(model, lam_sup, scheme.radius(n_to), opts.mode)
    a3 = check_A3(model, lam_sup, epsilon, opts.mode)
    tail = np.array(floors[-win:])
    decaying = len(tail) > 1 and bool(np.all(np.diff(tail) < -1e-12 * tail[:-1]))
    degenerate = floors[-1] < degeneracy_threshold and decaying
    return LimitReport(
        mode=opts.mode, ns=ns, lambdas=lambdas,
        cw_widths=tuple(s.bracket_width for s in sols),
        residuals=tuple(s.residual_sup for s in sols),
        lambda_limsup=lam_sup, sup_diffs=tuple(sup_diffs), full_residuals=full_res,
        a3=a3, a4_floor=floors, degeneracy_flag=bool(degenerate), epsilon=float(epsilon),
        solutions=tuple(sols), w_full=tuple(w_full))
