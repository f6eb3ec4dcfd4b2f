"""Exhaustive enumeration oracles used only by the tests.

They deliberately avoid the package's graph algorithms: action sequences,
adversary strategies and events are enumerated explicitly.
"""

import itertools

import numpy as np


def exists_reach(model, ball, src, target, max_m=None):
    """Least m such that some action sequence of length m gives the
    ball-restricted kernel product positive mass on ``target``."""
    ball = np.asarray(ball, dtype=bool)
    target = np.asarray(target, dtype=bool) & ball
    sub = [np.where(ball[None, :], P, 0.0) for P in model.kernel]
    max_m = int(ball.sum()) if max_m is None else max_m
    for m in range(1, max_m + 1):
        for seq in itertools.product(range(model.n_actions), repeat=m):
            row = np.zeros(model.n_states)
            row[src] = 1.0
            for a in seq:
                row = row @ sub[a]
            if row[target].sum() > 0:
                return m
    return None


def forall_reach(model, ball, src, target):
    """Least m such that every adversary keeps positive mass on ``target``
    at time m, or ``None``.

    Enumerates, step by step, every per-state action assignment the
    adversary can make, and tracks the family of possible reachable sets.
    The family evolves deterministically, so the search stops when a
    family repeats.
    """
    ball = np.asarray(ball, dtype=bool)
    target_set = frozenset(np.flatnonzero(np.asarray(target, dtype=bool) & ball).tolist())
    S = model.n_states
    succ = [[frozenset(y for y in range(S) if model.kernel[a, x, y] > 0 and ball[y])
             for x in range(S)] for a in range(model.n_actions)]
    family = frozenset([frozenset([src])])
    seen = set()
    m = 0
    while family not in seen:
        seen.add(family)
        m += 1
        nxt = set()
        for sets in family:
            members = sorted(sets)
            for choice in itertools.product(range(model.n_actions), repeat=len(members)):
                reach = frozenset().union(*(succ[a][x] for a, x in zip(choice, members)))
                nxt.add(reach)
        family = frozenset(nxt)
        if all(s & target_set for s in family):
            return m
        if frozenset() in family:
            return None
    return None


def dominance_by_events(model, mu, center):
    """Max of ``P^a(x,B)/P^a(x',B)`` and ``mu(B)/min_a P^a(center,B)`` over all events ``B``."""
    S = model.n_states
    events = np.array(list(itertools.product([0.0, 1.0], repeat=S)))[1:]
    best = 0.0
    for P in model.kernel:
        mass = P @ events.T                          # (S, events)
        num, den = mass[:, None, :], mass[None, :, :]
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.where(num == 0, 0.0, num / den)
        best = max(best, float(r.max()))
    base = model.kernel[:, center, :].min(axis=0) @ events.T
    mu_mass = np.asarray(mu) @ events.T
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(mu_mass == 0, 0.0, mu_mass / base)
    return max(best, float(r.max()))


def all_policies(n_states, n_actions):
    return (np.array(p) for p in itertools.product(range(n_actions), repeat=n_states))
