"""Finite controlled Markov models: loading, validation and structural checks.

A model is a finite state list with a radial coordinate ``r(x) = rho(b, x)``
measured from a single center state ``b``, a finite action set, a kernel
tensor ``kernel[a, x, y] = P^a(x, {y})`` and a cost table ``cost[x, a]``.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Iterable, NamedTuple, Sequence

import numpy as np

ROW_TOL = 1e-12


class ModelError(ValueError):
    """Base class for model input problems."""


class ModelParseError(ModelError):
    """The model document is malformed."""


class ModelValidationError(ModelError):
    """The model violates a structural invariant."""


class ConstantCostWarning(UserWarning):
    pass


def row_sum_errors(kernel: np.ndarray, tol: float = ROW_TOL) -> list[tuple[int, int, float]]:
    """Return ``(action, state, deviation)`` for every row not summing to 1."""
    dev = kernel.sum(axis=2) - 1.0
    bad = np.argwhere(np.abs(dev) > tol)
    return [(int(a), int(x), float(dev[a, x])) for a, x in bad]


@dataclass(frozen=True, eq=False)
class ControlledModel:
    labels: tuple[str, ...]
    radii: np.ndarray
    actions: tuple[str, ...]
    kernel: np.ndarray
    cost: np.ndarray
    mu: np.ndarray | None = None

    def __post_init__(self):
        labels = tuple(str(s) for s in self.labels)
        actions = tuple(str(a) for a in self.actions)
        radii = np.array(self.radii, dtype=float)
        kernel = np.array(self.kernel, dtype=float)
        cost = np.array(self.cost, dtype=float)
        S, A = len(labels), len(actions)
        if S == 0 or A == 0:
            raise ModelValidationError("model needs at least one state and one action")
        if len(set(labels)) != S:
            raise ModelValidationError("state labels must be unique")
        if len(set(actions)) != A:
            raise ModelValidationError("action labels must be unique")
        if radii.shape != (S,):
            raise ModelValidationError(f"expected {S} radii, got shape {radii.shape}")
        if kernel.shape != (A, S, S):
            raise ModelValidationError(f"kernel shape {kernel.shape} != {(A, S, S)}")
        if cost.shape != (S, A):
            raise ModelValidationError(f"cost shape {cost.shape} != {(S, A)}")
        if not np.all(np.isfinite(radii)) or np.any(radii < 0):
            raise ModelValidationError("radial coordinates must be finite and nonnegative")
        centers = np.flatnonzero(radii == 0)
        if len(centers) != 1:
            raise ModelValidationError(
                f"exactly one state must have r = 0, found {len(centers)}")
        if not np.all(np.isfinite(cost)):
            raise ModelValidationError("cost must be finite everywhere")
        if not np.all(np.isfinite(kernel)):
            raise ModelValidationError("kernel entries must be finite")
        neg = np.argwhere(kernel < 0)
        if len(neg):
            a, x, y = neg[0]
            raise ModelValidationError(
                f"negative probability in kernel row (action {actions[a]!r}, "
                f"state {labels[x]!r}) at column {labels[y]!r}")
        errs = row_sum_errors(kernel)
        if errs:
            a, x, d = errs[0]
            raise ModelValidationError(
                f"kernel row (action {actions[a]!r}, state {labels[x]!r}) "
                f"sums to {1.0 + d!r}, deviation {d:.3e}")
        mu = self.mu
        if mu is not None:
            mu = np.array(mu, dtype=float)
            if mu.shape != (S,) or np.any(mu < 0) or abs(mu.sum() - 1.0) > ROW_TOL:
                raise ModelValidationError("mu must be a probability vector over states")
            mu.flags.writeable = False
        for arr in (radii, kernel, cost):
            arr.flags.writeable = False
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "actions", actions)
        object.__setattr__(self, "radii", radii)
        object.__setattr__(self, "kernel", kernel)
        object.__setattr__(self, "cost", cost)
        object.__setattr__(self, "mu", mu)

    def __eq__(self, other):
        if not isinstance(other, ControlledModel):
            return NotImplemented
        same_mu = (self.mu is None and other.mu is None) or (
            self.mu is not None and other.mu is not None
            and np.array_equal(self.mu, other.mu))
        return (self.labels == other.labels and self.actions == other.actions
                and np.array_equal(self.radii, other.radii)
                and np.array_equal(self.kernel, other.kernel)
                and np.array_equal(self.cost, other.cost) and same_mu)

    __hash__ = object.__hash__

    @property
    def n_states(self) -> int:
        return len(self.labels)

    @property
    def n_actions(self) -> int:
        return len(self.actions)

    @property
    def center(self) -> int:
        return int(np.flatnonzero(self.radii == 0)[0])

    @property
    def c_bar(self) -> float:
        return float(self.cost.max())

    @property
    def c_lower(self) -> float:
        return float(self.cost.min())

    @property
    def norm_mask(self) -> np.ndarray:
        return np.ones(self.n_states, dtype=bool)

    def index(self, state) -> int:
        """Position of ``state`` given either as a label or an integer index."""
        if isinstance(state, (int, np.integer)) and not isinstance(state, bool):
            if not 0 <= state < self.n_states:
                raise IndexError(f"state index {state} out of range")
            return int(state)
        try:
            return self.labels.index(str(state))
        except ValueError:
            raise KeyError(f"unknown state {state!r}") from None

    def state_mask(self, states: Iterable) -> np.ndarray:
        mask = np.zeros(self.n_states, dtype=bool)
        for s in states:
            mask[self.index(s)] = True
        return mask

    def restart_measure(self) -> np.ndarray:
        """The model's ``mu`` or, when absent, the point mass at the center."""
        if self.mu is not None:
            return self.mu
        mu = np.zeros(self.n_states)
        mu[self.center] = 1.0
        return mu

    def shifted(self, kappa: float) -> "ControlledModel":
        return ControlledModel(self.labels, self.radii, self.actions, self.kernel,
                               self.cost + kappa, self.mu)

    def with_policy(self, policy: Sequence[int]) -> "ControlledModel":
        """Single-action model obtained by fixing a stationary selector."""
        policy = np.asarray(policy, dtype=int)
        s = np.arange(self.n_states)
        return ControlledModel(self.labels, self.radii, ("policy",),
                               self.kernel[policy, s, :][None],
                               self.cost[s, policy][:, None], self.mu)


# -- serialization ----------------------------------------------------------

def model_to_dict(model: ControlledModel) -> dict:
    d = {
        "states": [{"label": l, "r": float(r)} for l, r in zip(model.labels, model.radii)],
        "actions": list(model.actions),
        "kernel": {a: model.kernel[i].tolist() for i, a in enumerate(model.actions)},
        "cost": model.cost.tolist(),
    }
    if model.mu is not None:
        d["mu"] = model.mu.tolist()
    return d


def model_from_dict(doc: dict) -> ControlledModel:
    try:
        states = doc["states"]
        actions = [str(a) for a in doc["actions"]]
        labels = [str(s["label"]) for s in states]
        radii = [float(s["r"]) for s in states]
        kmap = doc["kernel"]
        if set(kmap) != set(actions):
            raise ModelParseError("kernel must have exactly one entry per action")
        kernel = np.array([kmap[a] for a in actions], dtype=float)
        cost = np.array(doc["cost"], dtype=float)
        mu = doc.get("mu")
    except ModelParseError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelParseError(f"malformed model document: {exc}") from exc
    S, A = len(labels), len(actions)
    if kernel.shape != (A, S, S) or cost.shape != (S, A):
        raise ModelParseError(
            f"array shapes do not match {S} states and {A} actions")
    return ControlledModel(tuple(labels), radii, tuple(actions), kernel, cost, mu)


def load_model(source) -> ControlledModel:
    """Parse a model from JSON bytes, text, or a readable stream."""
    if hasattr(source, "read"):
        source = source.read()
    if isinstance(source, bytes):
        source = source.decode("utf-8")
    try:
        doc = json.loads(source)
    except json.JSONDecodeError as exc:
        raise ModelParseError(f"invalid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ModelParseError("model document must be a JSON object")
    model = model_from_dict(doc)
    if model.c_bar == model.c_lower:
        warnings.warn("constant cost: every strategy is optimal", ConstantCostWarning,
                      stacklevel=2)
    return model


def read_model(path) -> ControlledModel:
    with open(path, "rb") as fh:
        return load_model(fh)


def dump_model(model: ControlledModel) -> str:
    return json.dumps(model_to_dict(model), indent=1)


# -- validation --------------------------------------------------------------

@dataclass(frozen=True)
class ValidationReport:
    c_bar: float
    c_lower: float
    is_constant_cost: bool
    row_sum_errors: list = field(default_factory=list)
    strong_feller_note: str = ""

    def to_dict(self) -> dict:
        return {
            "c_bar": self.c_bar,
            "c_lower": self.c_lower,
            "is_constant_cost": self.is_constant_cost,
            "row_sum_errors": [list(e) for e in self.row_sum_errors],
            "strong_feller_note": self.strong_feller_note,
        }


def validate(model: ControlledModel) -> ValidationReport:
    c_bar, c_lower = model.c_bar, model.c_lower
    return ValidationReport(
        c_bar=c_bar,
        c_lower=c_lower,
        is_constant_cost=(c_bar - c_lower == 0),
        row_sum_errors=row_sum_errors(model.kernel),
        strong_feller_note=(
            "finite state and action sets: the kernel is trivially continuous "
            "in total variation; no further check is performed"),
    )


# -- accessibility -------------------------------------------------------------

class Reachability(NamedTuple):
    reachable: bool
    steps: int | None


def _radius(n: int, radius: Callable[[int], float] | None) -> float:
    return float(n) if radius is None else float(radius(n))


def ball_mask(model: ControlledModel, n: int,
              radius: Callable[[int], float] | None = None) -> np.ndarray:
    """Boolean mask of ``B_n = {x : r(x) <= radius(n)}``."""
    return model.radii <= _radius(n, radius)


def _prepare(model, n, source, target_set, radius):
    ball = ball_mask(model, n, radius)
    src = model.index(source)
    if not ball[src]:
        raise ValueError(f"source {model.labels[src]!r} lies outside B_{n}")
    target = model.state_mask(target_set) & ball
    return ball, src, target


def check_accessibility_max(model: ControlledModel, n: int, source, target_set,
                            radius: Callable[[int], float] | None = None) -> Reachability:
    """Existential reachability of ``target_set`` from ``source`` inside ``B_n``.

    True when some action sequence gives the subtransition kernel positive
    mass on the target after ``m >= 1`` steps; ``steps`` is the least such m.
    """
    ball, src, target = _prepare(model, n, source, target_set, radius)
    adj = (model.kernel > 0).any(axis=0) & ball[None, :]
    frontier = np.zeros(model.n_states, dtype=bool)
    frontier[src] = True
    seen = []
    for m in range(1, int(ball.sum()) + 1):
        frontier = adj[frontier].any(axis=0)
        if (frontier & target).any():
            return Reachability(True, m)
        key = frontier.tobytes()
        if not frontier.any() or key in seen:
            break
        seen.append(key)
    return Reachability(False, None)


def forall_layers(edges: np.ndarray, ball: np.ndarray, target: np.ndarray):
    """Yield the alternating sets ``X_1, X_2, ...`` until they cycle.

    ``X_0`` is ``target``; ``X_t`` collects the states of the ball from which
    every action has positive probability of moving into ``X_{t-1}``.
    ``target`` may be 2-D (states x target columns) to process several
    targets at once.
    """
    current = np.asarray(target, dtype=bool)
    squeeze = current.ndim == 1
    if squeeze:
        current = current[:, None]
    current = current & ball[:, None]
    e = edges.astype(np.float64)
    seen = {current.tobytes()}
    while True:
        hit = np.ones_like(current)
        for ea in e:
            hit &= (ea @ current) > 0
        current = hit & ball[:, None]
        yield current[:, 0] if squeeze else current
        key = current.tobytes()
        if key in seen or not current.any():
            return
        seen.add(key)


def check_accessibility_min(model: ControlledModel, n: int, source, target_set,
                            radius: Callable[[int], float] | None = None) -> Reachability:
    """Reachability of ``target_set`` from ``source`` under every strategy.

    Computed by alternating reachability; the layer sequence is followed
    until it repeats, so the answer is exact for any period.
    """
    ball, src, target = _prepare(model, n, source, target_set, radius)
    for m, layer in enumerate(forall_layers(model.kernel > 0, ball, target), start=1):
        if layer[src]:
            return Reachability(True, m)
    return Reachability(False, None)


# -- dominance bound -----------------------------------------------------------

def _ratio_max(num: np.ndarray, den: np.ndarray) -> float:
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(num == 0, 0.0, num / den)
    return float(r.max()) if r.size else 0.0


def check_dominance_bound(model: ControlledModel, mu: np.ndarray | None = None) -> float:
    """Smallest ``L`` with ``P^a(x,B) <= L P^a(x',B)`` and ``mu(B) <= L min_a P^a(b,B)``.

    Singleton events suffice on a finite space. ``0/0`` counts as 0; an
    unbounded ratio gives ``math.inf``.
    """
    mu = model.restart_measure() if mu is None else np.asarray(mu, dtype=float)
    L = 0.0
    for P in model.kernel:
        L = max(L, _ratio_max(P[:, None, :], P[None, :, :]))
    base = model.kernel[:, model.center, :].min(axis=0)
    L = max(L, _ratio_max(mu, base))
    return math.inf if math.isinf(L) else L
