"""Ball truncations with restart from the measure ``mu``.

For ball index ``n`` the modified kernel keeps the mass a transition puts
inside ``B_n``, reroutes the mass leaving ``B_n`` through ``mu``, and blends
towards a pure restart on the shell ``B_{n+1} minus B_n``. Everything beyond
``radius(n) + 1`` behaves identically (row ``mu``, cost ``c_lower``) and is
collapsed into a single exterior state.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .model import ROW_TOL, ControlledModel, ModelValidationError

EXTERIOR_LABEL = "__exterior__"


def unit_radius(n: int) -> float:
    return float(n)


@dataclass(frozen=True)
class TruncationScheme:
    mu: np.ndarray
    mu_support_radius: float
    radius_rule: Callable[[int], float] = unit_radius

    def radius(self, n: int) -> float:
        if n < 1:
            raise ValueError(f"ball index must be >= 1, got {n}")
        rad = float(self.radius_rule(n))
        if not rad > 0:
            raise ValueError(f"radius({n}) = {rad} is not positive")
        if n > 1 and rad < float(self.radius_rule(n - 1)):
            raise ValueError("radius rule must be nondecreasing")
        return rad

    @classmethod
    def for_model(cls, model: ControlledModel, mu=None,
                  radius_rule: Callable[[int], float] | None = None) -> "TruncationScheme":
        mu = model.restart_measure() if mu is None else np.array(mu, dtype=float)
        if mu.shape != (model.n_states,) or np.any(mu < 0):
            raise ModelValidationError("mu must be a nonnegative vector over states")
        if abs(mu.sum() - 1.0) > ROW_TOL:
            raise ModelValidationError(f"mu sums to {mu.sum()!r}, not 1")
        mu.flags.writeable = False
        support = model.radii[mu > 0]
        scheme = cls(mu, float(support.max()), radius_rule or unit_radius)
        if scheme.mu_support_radius > scheme.radius(1):
            raise ModelValidationError(
                f"mu has mass at radius {scheme.mu_support_radius} outside B_1 "
                f"(radius {scheme.radius(1)})")
        return scheme


@dataclass(frozen=True, eq=False)
class TruncatedModel:
    parent: ControlledModel
    n: int
    radius: float
    interior: np.ndarray       # parent indices kept, in parent order
    labels: tuple[str, ...]    # interior labels followed by the exterior label
    kernel: np.ndarray         # (A, S', S')
    cost: np.ndarray           # (S', A)
    mu: np.ndarray             # restart measure over the S' states
    ball: np.ndarray           # mask of B_n over the S' states

    @property
    def n_states(self) -> int:
        return len(self.labels)

    @property
    def n_actions(self) -> int:
        return self.parent.n_actions

    @property
    def actions(self) -> tuple[str, ...]:
        return self.parent.actions

    @property
    def exterior_index(self) -> int:
        return self.n_states - 1

    @property
    def norm_mask(self) -> np.ndarray:
        mask = np.ones(self.n_states, dtype=bool)
        mask[-1] = False
        return mask

    @property
    def c_bar(self) -> float:
        return float(self.cost.max())

    @property
    def c_lower(self) -> float:
        return float(self.cost.min())

    def extend(self, w: np.ndarray) -> np.ndarray:
        """Lift a function on the truncated states to all parent states.

        Parent states merged into the exterior receive the exterior value.
        """
        w = np.asarray(w, dtype=float)
        out = np.full(self.parent.n_states, w[-1])
        out[self.interior] = w[:-1]
        return out

    def to_dict(self) -> dict:
        radii = list(self.parent.radii[self.interior])
        outside = np.setdiff1d(np.arange(self.parent.n_states), self.interior)
        r_ext = float(self.parent.radii[outside].max()) if len(outside) else self.radius + 1
        radii.append(max(r_ext, self.radius + 1))
        return {
            "states": [{"label": l, "r": float(r)} for l, r in zip(self.labels, radii)],
            "actions": list(self.actions),
            "kernel": {a: self.kernel[i].tolist() for i, a in enumerate(self.actions)},
            "cost": self.cost.tolist(),
            "mu": self.mu.tolist(),
            "truncation": {"n": self.n, "radius": self.radius,
                           "exterior_label": EXTERIOR_LABEL},
        }


def distance_to_ball(model: ControlledModel, scheme: TruncationScheme, x, n: int) -> float:
    """Radial proxy for the set distance from ``x`` to ``B_n``."""
    return max(0.0, float(model.radii[model.index(x)]) - scheme.radius(n))


def build_truncated(model: ControlledModel, scheme: TruncationScheme, n: int) -> TruncatedModel:
    rad = scheme.radius(n)
    if scheme.mu_support_radius > scheme.radius(1):
        raise ModelValidationError("mu has mass outside B_1")
    r = model.radii
    in_ball = r <= rad
    if not in_ball.any():
        raise ModelValidationError(f"ball B_{n} (radius {rad}) is empty")
    interior = np.flatnonzero(r <= rad + 1.0)
    S = len(interior) + 1
    dist = np.maximum(0.0, r[interior] - rad)
    keep = np.clip(1.0 - dist, 0.0, None)          # (1 - rho)^+
    blend = np.minimum(dist, 1.0)                   # rho ^ 1
    restart = dist >= 1.0

    mu = np.zeros(S)
    mu[:-1] = scheme.mu[interior]
    ball_cols = in_ball[interior]

    c_low = model.c_lower
    kernel = np.zeros((model.n_actions, S, S))
    for a in range(model.n_actions):
        rows = model.kernel[a][interior]
        inside = np.where(ball_cols[None, :], rows[:, interior], 0.0)
        leak = rows[:, ~in_ball].sum(axis=1)        # P^a(x, B_n^c)
        to_mu = leak + blend * (1.0 - leak)
        kernel[a, :-1, :-1] = keep[:, None] * inside + to_mu[:, None] * mu[None, :-1]
        kernel[a, np.flatnonzero(restart), :] = mu
        kernel[a, -1, :] = mu

    c = model.cost[interior]
    cost = np.empty((S, model.n_actions))
    cost[:-1] = c - blend[:, None] * (c - c_low)
    cost[:-1][restart] = c_low
    cost[-1] = c_low

    ball = np.zeros(S, dtype=bool)
    ball[:-1] = ball_cols
    for arr in (kernel, cost, mu, ball):
        arr.flags.writeable = False
    labels = tuple(model.labels[i] for i in interior) + (EXTERIOR_LABEL,)
    return TruncatedModel(model, n, rad, interior, labels, kernel, cost, mu, ball)


def kernel_tv_distance(tm: TruncatedModel) -> np.ndarray:
    """Total variation between truncated and original rows, per (action, interior state).

    Truncated rows are pulled back to parent states; the exterior column
    never carries mass, since ``mu`` lives in ``B_1``.
    """
    parent = tm.parent
    out = np.empty((parent.n_actions, len(tm.interior)))
    for a in range(parent.n_actions):
        lifted = np.zeros((len(tm.interior), parent.n_states))
        lifted[:, tm.interior] = tm.kernel[a, :-1, :-1]
        out[a] = 0.5 * np.abs(lifted - parent.kernel[a][tm.interior]).sum(axis=1)
    return out
