"""End-to-end acceptance checks, one test per criterion.

Each test records a verdict line (printed in the terminal summary) and
then asserts it, so a failing criterion shows up both ways.
"""

import math
import time

import numpy as np
import pytest

from bruteforce import all_policies, dominance_by_events, exists_reach, forall_reach
from risksens.eigen import SolverOptions, policy_eigen, solve_eigen
from risksens.limits import solve_sequence
from risksens.model import (
    ControlledModel,
    ball_mask,
    check_accessibility_max,
    check_accessibility_min,
    check_dominance_bound,
)
from risksens.oracles import (
    HarmonicSpec,
    dominance_chain,
    harmonic_chain,
    harmonic_closed_form,
    harmonic_model,
    peaked_model,
    perron_root_oracle,
    random_model,
    single_state_model,
    two_state_model,
)
from risksens.policy import extract_policy, simulate
from risksens.truncation import TruncationScheme, build_truncated

TOL_SPAN = 1e-10
MODES = ("max", "min")


def sparse_model(seed, n_states, n_actions, density=0.4):
    """Random model with many zero transitions; every row keeps one positive entry."""
    rng = np.random.default_rng(seed)
    S, A = n_states, n_actions
    mask = rng.random((A, S, S)) < density
    forced = rng.integers(0, S, size=(A, S))
    mask[np.arange(A)[:, None], np.arange(S)[None, :], forced] = True
    kernel = np.where(mask, rng.random((A, S, S)) + 0.05, 0.0)
    kernel /= kernel.sum(axis=2, keepdims=True)
    radii = np.sort(rng.integers(1, 4, size=S)).astype(float)
    radii[0] = 0.0
    return ControlledModel(tuple(f"s{i}" for i in range(S)), radii,
                           tuple(f"a{i}" for i in range(A)), kernel,
                           rng.standard_normal((S, A)))


def truncation_case(seed):
    """Random (model, scheme, n) triple with fractional radii so shells blend."""
    rng = np.random.default_rng(seed)
    S = int(rng.integers(3, 10))
    A = int(rng.integers(1, 4))
    base = random_model(seed, S, A, density=float(rng.uniform(0.3, 1.0)))
    steps = rng.choice([0.25, 0.5, 0.75, 1.0, 1.5], size=S - 1)
    radii = np.concatenate([[0.0], np.cumsum(steps)])
    model = ControlledModel(base.labels, radii, base.actions, base.kernel, base.cost)
    scale = float(rng.choice([0.5, 1.0, 2.0]))
    offset = float(rng.choice([0.0, 0.5]))
    rule = lambda n, s=scale, o=offset: s * n + o  # noqa: E731
    in_b1 = np.flatnonzero(radii <= rule(1))
    mu = np.zeros(S)
    mu[in_b1] = rng.random(len(in_b1)) + 0.1
    mu /= mu.sum()
    scheme = TruncationScheme.for_model(model, mu, rule)
    return model, scheme, int(rng.integers(1, 7))


def lifted_cost(tm):
    out = np.full((tm.parent.n_states, tm.n_actions), tm.cost[-1, 0])
    out[tm.interior] = tm.cost[:-1]
    return out


def test_01_harmonic_exactness(record):
    worst_lam = worst_w1 = 0.0
    k_ok = True
    start = time.perf_counter()
    for n in (1, 4, 10, 50, 100, 200):
        spec = HarmonicSpec(n, 1.0)
        sol = solve_eigen(harmonic_model(spec))
        lam, k, w1 = harmonic_closed_form(spec)
        worst_lam = max(worst_lam, abs(sol.lam - lam))
        worst_w1 = max(worst_w1, abs(sol.w[0] - w1))
        k_ok &= int(np.argmax(sol.w)) + 1 == k
    elapsed = time.perf_counter() - start
    ref = harmonic_closed_form(HarmonicSpec(4))
    ref_ok = (abs(ref[0] - 0.5433333) < 1e-7 and ref[1] == 3 and abs(ref[2] + 0.5866667) < 1e-7)
    ok = worst_lam <= 1e-8 and worst_w1 <= 1e-6 and k_ok and ref_ok and elapsed < 1.0
    record(1, ok, f"max |dlambda|={worst_lam:.1e}, max |dw(1)|={worst_w1:.1e}, "
                  f"argmax exact={k_ok}, n=4 reference={ref_ok}, {elapsed:.2f}s")
    assert ok


@pytest.fixture(scope="module")
def harmonic_sweep():
    model = harmonic_chain(204)
    scheme = TruncationScheme.for_model(model)
    start = time.perf_counter()
    rep = solve_sequence(model, scheme, 4, 200, SolverOptions(tol_span=TOL_SPAN))
    return rep, time.perf_counter() - start


def test_02_degeneracy(record, harmonic_sweep):
    rep, elapsed = harmonic_sweep
    w1 = np.array([w[0] for w in rep.w_full])
    closed = np.array([harmonic_closed_form(HarmonicSpec(n))[2] for n in rep.ns])
    decreasing = bool(np.all(np.diff(w1) < 0))
    ok = decreasing and w1[-1] < -3 and rep.degeneracy_flag
    record(2, ok, f"w_n(1) strictly decreasing={decreasing}, w_200(1)={w1[-1]:.4f}, "
                  f"flag={rep.degeneracy_flag}, closed-form gap={np.abs(w1 - closed).max():.1e}, "
                  f"{elapsed:.1f}s")
    assert ok


def test_03_perron_oracle(record):
    worst = 0.0
    for seed in range(50):
        rng = np.random.default_rng(1000 + seed)
        model = random_model(1000 + seed, int(rng.integers(1, 13)), 1,
                             density=float(rng.uniform(0.2, 1.0)))
        ref = perron_root_oracle(model)
        for mode in MODES:
            worst = max(worst, abs(solve_eigen(model, SolverOptions(mode=mode)).lam - ref))
    ok = worst <= 1e-8
    record(3, ok, f"50 models x 2 modes, max |lambda - oracle| = {worst:.1e}")
    assert ok


def test_04_policy_brute_force(record):
    start = time.perf_counter()
    worst_gap = 0.0
    checked = 0
    for seed in range(20):
        rng = np.random.default_rng(2000 + seed)
        S, A = int(rng.integers(2, 7)), int(rng.integers(1, 4))
        model = random_model(2000 + seed, S, A, density=float(rng.uniform(0.3, 1.0)))
        values = np.array([policy_eigen(model, p) for p in all_policies(S, A)])
        for mode in MODES:
            sol = solve_eigen(model, SolverOptions(mode=mode))
            pol = extract_policy(model, sol.w, sol.lam, mode)
            got = policy_eigen(model, pol.selector)
            best = values.max() if mode == "max" else values.min()
            worst_gap = max(worst_gap, abs(got - best))
            checked += 1
    elapsed = time.perf_counter() - start
    ok = worst_gap <= 1e-9 and elapsed < 60
    record(4, ok, f"{checked} (model, mode) pairs, max |value - best| = {worst_gap:.1e}, "
                  f"{elapsed:.1f}s")
    assert ok


def _bound_catalog():
    for seed in range(30):
        rng = np.random.default_rng(3000 + seed)
        yield random_model(3000 + seed, int(rng.integers(1, 10)), int(rng.integers(1, 4)),
                           density=float(rng.uniform(0.2, 1.0)))
    for n in (1, 4, 10, 50):
        yield harmonic_model(HarmonicSpec(n))
    yield peaked_model()
    yield two_state_model()
    yield single_state_model(-0.7)
    dom = dominance_chain()
    scheme = TruncationScheme.for_model(dom, mu=np.eye(dom.n_states)[0])
    for n in range(1, 12):
        yield build_truncated(dom, scheme, n)
    chain = harmonic_chain(40)
    chain_scheme = TruncationScheme.for_model(chain)
    for n in (2, 10, 30):
        yield build_truncated(chain, chain_scheme, n)
    for seed in range(20):
        model, scheme, n = truncation_case(4000 + seed)
        yield build_truncated(model, scheme, n)


def test_05_bounds(record):
    count = 0
    bad = []
    for model in _bound_catalog():
        for mode in MODES:
            sol = solve_eigen(model, SolverOptions(mode=mode, tol_span=TOL_SPAN))
            c = np.asarray(model.cost)
            inside = c.min() <= sol.lam <= c.max()
            bracketed = sol.cw_lower <= sol.lam <= sol.cw_upper
            narrow = sol.bracket_width <= 2 * TOL_SPAN
            if not (inside and bracketed and narrow):
                bad.append((count, mode, sol.lam, c.min(), c.max(), sol.bracket_width))
            count += 1
    ok = not bad
    record(5, ok, f"{count} solves, violations: {len(bad)}")
    assert ok, bad[:5]


def test_06_truncation_invariants(record):
    failures = []
    for seed in range(200):
        model, scheme, n = truncation_case(5000 + seed)
        tm = build_truncated(model, scheme, n)
        nxt = build_truncated(model, scheme, n + 1)
        stochastic = np.abs(tm.kernel.sum(axis=2) - 1.0).max() <= 1e-12 and tm.kernel.min() >= 0
        c_n, c_next = lifted_cost(tm), lifted_cost(nxt)
        monotone = bool(np.all(c_n <= c_next) and np.all(c_next <= model.cost))
        exterior = all(np.array_equal(tm.kernel[a, -1], tm.mu) for a in range(tm.n_actions))
        # idempotence once the ball covers the whole model
        n0 = next(k for k in range(1, 100) if scheme.radius(k) >= model.radii.max())
        full = solve_eigen(model, SolverOptions(tol_span=TOL_SPAN))
        s0 = solve_eigen(build_truncated(model, scheme, n0), SolverOptions(tol_span=TOL_SPAN))
        s1 = solve_eigen(build_truncated(model, scheme, n0 + 1), SolverOptions(tol_span=TOL_SPAN))
        stable = (abs(s0.lam - full.lam) <= 1e-10 and abs(s1.lam - s0.lam) <= 1e-10
                  and max(s0.residual_sup, s1.residual_sup) <= 2 * TOL_SPAN)
        checks = dict(stochastic=stochastic, monotone=monotone, exterior=exterior, stable=stable)
        if not all(checks.values()):
            failures.append((seed, {k: v for k, v in checks.items() if not v}))
    ok = not failures
    record(6, ok, f"200 (model, scheme, n) triples, failures: {len(failures)}")
    assert ok, failures[:5]


def test_07_shift_equivariance(record):
    worst_lam = worst_w = 0.0
    for seed in range(20):
        rng = np.random.default_rng(6000 + seed)
        model = random_model(6000 + seed, int(rng.integers(2, 10)), int(rng.integers(1, 4)),
                             density=float(rng.uniform(0.3, 1.0)))
        for mode in MODES:
            opts = SolverOptions(mode=mode, tol_span=1e-12)
            a = solve_eigen(model, opts)
            b = solve_eigen(model.shifted(0.37), opts)
            worst_lam = max(worst_lam, abs(b.lam - a.lam - 0.37))
            worst_w = max(worst_w, float(np.abs(b.w - a.w).max()))
    ok = worst_lam <= 1e-10 and worst_w <= 1e-10
    record(7, ok, f"max |dlambda - 0.37| = {worst_lam:.1e}, max |dw| = {worst_w:.1e}")
    assert ok


def test_08_simulation_consistency(record):
    model = two_state_model()
    target = math.log(1.5)
    start = time.perf_counter()
    first = simulate(model, [0, 0], 0, m=2000, N=10_000, seed=12345)
    elapsed = time.perf_counter() - start
    again = simulate(model, [0, 0], 0, m=2000, N=10_000, seed=12345)
    z = (first.estimate - target) / first.std_error_log
    identical = first.estimate == again.estimate and first.std_error_log == again.std_error_log
    within = abs(z) <= 3
    ok = within and identical and elapsed < 10
    record(8, ok, f"estimate={first.estimate:.6f} vs ln 1.5={target:.6f}, "
                  f"se={first.std_error_log:.1e}, z={z:.1f}, bit-identical={identical}, "
                  f"{elapsed:.1f}s")
    assert ok


def test_09_assumption_checkers(record):
    cases = mismatches = 0
    for seed in range(60):
        rng = np.random.default_rng(7000 + seed)
        model = sparse_model(7000 + seed, int(rng.integers(1, 6)), int(rng.integers(1, 3)),
                             density=float(rng.uniform(0.15, 0.6)))
        S = model.n_states
        targets = [[y] for y in range(S)] + [list(np.flatnonzero(rng.random(S) < 0.5))]
        for n in range(1, 4):
            ball = ball_mask(model, n)
            for src in np.flatnonzero(ball):
                for tgt in targets:
                    tmask = np.zeros(S, dtype=bool)
                    tmask[tgt] = True
                    ex = check_accessibility_max(model, n, int(src), tgt)
                    fa = check_accessibility_min(model, n, int(src), tgt)
                    ex_ref = exists_reach(model, ball, int(src), tmask)
                    fa_ref = forall_reach(model, ball, int(src), tmask)
                    cases += 1
                    if ex.steps != ex_ref or fa.steps != fa_ref:
                        mismatches += 1
    dom_cases = dom_bad = 0
    for seed in range(40):
        rng = np.random.default_rng(8000 + seed)
        S = int(rng.integers(1, 11))
        if seed % 2:
            model = random_model(8000 + seed, S, int(rng.integers(1, 3)))
        else:
            model = sparse_model(8000 + seed, S, int(rng.integers(1, 3)), density=0.7)
        mu = rng.random(S) * (rng.random(S) < 0.6)
        mu[0] += 0.1
        mu /= mu.sum()
        got = check_dominance_bound(model, mu)
        ref = dominance_by_events(model, mu, model.center)
        dom_cases += 1
        if not (got == ref or (math.isfinite(ref) and abs(got - ref) <= 1e-12 * ref)):
            dom_bad += 1
    ok = mismatches == 0 and dom_bad == 0
    record(9, ok, f"{cases} reachability queries ({mismatches} mismatches), "
                  f"{dom_cases} dominance bounds ({dom_bad} mismatches)")
    assert ok
