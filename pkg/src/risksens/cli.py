"""Command-line front end. Every command reads a model file (or builds the
harmonic example), runs one computation, and writes JSON/CSV outputs."""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile
import warnings
from dataclasses import asdict, dataclass, fields
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .eigen import MODES, NotConvergedError, SolverError, SolverOptions, solve_eigen
from .limits import SweepError, check_A4, solve_sequence
from .model import ModelError, ModelParseError, dump_model, read_model, validate
from .oracles import HarmonicSpec, harmonic_closed_form, harmonic_model
from .policy import PolicyError, exass_diagnostic, lift_selector, policy_from_solution, simulate
from .truncation import TruncationScheme, build_truncated

SCHEMA_VERSION = "1"

EXIT_OK, EXIT_IO, EXIT_VALIDATION, EXIT_SOLVER, EXIT_CONFIG = 0, 1, 2, 3, 4
COMMANDS = ("validate", "solve", "sweep", "simulate", "example-harmonic", "diagnose-exass")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    """Resolved run settings; flags override values from ``--config``."""
    command: str
    model: str | None = None
    mode: str = "max"
    n: int | None = None
    n_from: int = 1
    n_to: int = 10
    mu: list | None = None
    delta: float = 1.0
    tol: float = 1e-10
    max_iters: int = 100_000
    m: int = 1000
    paths: int = 1000
    seed: int = 0
    x0: str | None = None
    c_bar: float = 1.0
    radius: float | None = None
    horizons: str = "10,100,1000"
    epsilon: float | None = None
    out: str = "risksens-out"

    def validate(self) -> "RunConfig":
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}")
        if self.n is not None and self.n < 1:
            raise ConfigError("--n must be >= 1")
        if not 1 <= self.n_from <= self.n_to:
            raise ConfigError("need 1 <= --n-from <= --n-to")
        if not (self.delta > 0 and self.tol > 0):
            raise ConfigError("--delta and --tol must be positive")
        if self.m < 1 or self.paths < 1 or self.max_iters < 0:
            raise ConfigError("--m and --paths must be >= 1")
        if self.epsilon is not None and not self.epsilon > 0:
            raise ConfigError("--epsilon must be positive")
        if self.command not in ("example-harmonic",) and not self.model:
            raise ConfigError(f"{self.command} needs --model")
        return self

    def solver_options(self) -> SolverOptions:
        return SolverOptions(mode=self.mode, delta=self.delta, tol_span=self.tol,
                             max_iters=self.max_iters)

    def horizon_list(self) -> list[int]:
        try:
            hs = [int(h) for h in str(self.horizons).split(",") if h.strip()]
        except ValueError as exc:
            raise ConfigError(f"bad --horizons: {exc}") from None
        if not hs or hs[0] < 1 or any(b <= a for a, b in zip(hs, hs[1:])):
            raise ConfigError("--horizons must be positive and strictly increasing")
        return hs


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="risksens", description=__doc__,
                                formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="JSON file with any of the options below (flags win)")
    p.add_argument("--model", help="model file (JSON)")
    p.add_argument("--mode", choices=MODES, help="sup (max) or inf (min) operator [max]")
    p.add_argument("--n", type=int, help="ball index; omit to solve the model directly")
    p.add_argument("--n-from", type=int, help="first ball index of a sweep [1]")
    p.add_argument("--n-to", type=int, help="last ball index of a sweep [10]")
    p.add_argument("--delta", type=float, help="damping added to each iterate [1.0]")
    p.add_argument("--tol", type=float, help="span tolerance of ln(Tv/v) [1e-10]")
    p.add_argument("--max-iters", type=int, help="power iteration cap [100000]")
    p.add_argument("--m", type=int, help="simulation horizon [1000]")
    p.add_argument("--paths", type=int, help="number of simulated paths [1000]")
    p.add_argument("--seed", type=int, help="master seed [0]")
    p.add_argument("--x0", help="start state label or index [center]")
    p.add_argument("--c-bar", type=float, help="cost ceiling of the harmonic example [1.0]")
    p.add_argument("--radius", type=float, help="reference ball radius for diagnose-exass")
    p.add_argument("--horizons", help="comma-separated horizons for diagnose-exass")
    p.add_argument("--epsilon", type=float, help="level for the sweep's A.3/A.4 checks")
    p.add_argument("--out", help="output directory [risksens-out]")
    return p


def resolve_config(args: argparse.Namespace) -> RunConfig:
    values = {}
    if args.config:
        try:
            with open(args.config) as fh:
                values = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None
        if not isinstance(values, dict):
            raise ConfigError("config must be a JSON object")
        values = {k.replace("-", "_"): v for k, v in values.items()}
    known = {f.name for f in fields(RunConfig)}
    unknown = set(values) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    for name in known:
        flag = getattr(args, name, None)
        if flag is not None:
            values[name] = flag
    values["command"] = args.command
    try:
        return RunConfig(**values).validate()
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


# -- output ----------------------------------------------------------------------

def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.generic):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None if math.isnan(obj) else ("inf" if obj > 0 else "-inf")
    return obj


def write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path: Path, kind: str, payload: dict, cfg: RunConfig) -> None:
    doc = {"schema_version": SCHEMA_VERSION, "kind": kind,
           "generated_at": datetime.now(timezone.utc).isoformat(timespec="seconds"),
           "config": {k: v for k, v in asdict(cfg).items() if k != "out"}}
    doc.update(_jsonable(payload))
    write_atomic(path, json.dumps(doc, indent=1, allow_nan=False) + "\n")


# -- commands --------------------------------------------------------------------

def _load(cfg: RunConfig):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return read_model(cfg.model)


def _solve(model, cfg: RunConfig):
    """Solve the truncation at ``cfg.n``, or the model itself when it fits in the ball."""
    opts = cfg.solver_options()
    target, tm = model, None
    if cfg.n is not None:
        scheme = TruncationScheme.for_model(model, cfg.mu)
        if model.radii.max() > scheme.radius(cfg.n):
            tm = build_truncated(model, scheme, cfg.n)
            target = tm
    sol = solve_eigen(target, opts)
    pol = policy_from_solution(target, sol, residual_threshold=max(1e-6, 10 * cfg.tol))
    selector = lift_selector(tm, pol.selector) if tm is not None else pol.selector
    return target, tm, sol, pol, selector


def cmd_validate(cfg: RunConfig) -> int:
    report = validate(_load(cfg))
    write_json(Path(cfg.out) / "validation.json", "validation", report.to_dict(), cfg)
    print(f"valid c_bar={report.c_bar:.10g} c_lower={report.c_lower:.10g} "
          f"constant_cost={report.is_constant_cost}")
    return EXIT_OK


def cmd_solve(cfg: RunConfig) -> int:
    model = _load(cfg)
    target, tm, sol, pol, selector = _solve(model, cfg)
    out = Path(cfg.out)
    payload = sol.to_dict()
    payload["labels"] = list(target.labels)
    payload["truncated"] = tm is not None
    write_json(out / "solution.json", "eigen_solution", payload, cfg)
    write_json(out / "policy.json", "policy",
               {"mode": pol.mode, "lambda_claimed": pol.lambda_claimed,
                "labels": list(model.labels), "selector": selector,
                "selector_labels": [model.actions[a] for a in selector]}, cfg)
    print(f"lambda={sol.lam:.10f} width={sol.bracket_width:.3e} "
          f"residual={sol.residual_sup:.3e}")
    return EXIT_OK


def cmd_sweep(cfg: RunConfig) -> int:
    model = _load(cfg)
    scheme = TruncationScheme.for_model(model, cfg.mu)
    rep = solve_sequence(model, scheme, cfg.n_from, cfg.n_to, cfg.solver_options(),
                         epsilon=cfg.epsilon)
    a4 = check_A4(model, scheme, rep.ns, rep.w_full, rep.epsilon, cfg.mode)
    payload = rep.to_dict()
    payload["a4_certified"] = a4.certified
    payload["a4_witness"] = list(a4.witness) if a4.witness else None
    out = Path(cfg.out)
    write_json(out / "sweep.json", "limit_report", payload, cfg)
    write_atomic(out / "sweep.csv", rep.to_csv())
    print(f"lambda_limsup={rep.lambda_limsup:.10f} degeneracy={rep.degeneracy_flag} "
          f"a3={rep.a3.certified} a4={a4.certified}")
    return EXIT_OK


def cmd_simulate(cfg: RunConfig) -> int:
    model = _load(cfg)
    _, _, sol, pol, selector = _solve(model, cfg)
    x0 = model.center if cfg.x0 is None else cfg.x0
    est = simulate(model, selector, x0, cfg.m, cfg.paths, cfg.seed)
    payload = est.to_dict()
    payload["lambda_claimed"] = pol.lambda_claimed
    payload["selector"] = selector
    write_json(Path(cfg.out) / "simulation.json", "simulation", payload, cfg)
    print(f"estimate={est.estimate:.10f} se={est.std_error_log:.3e} "
          f"lambda={sol.lam:.10f}")
    return EXIT_OK


def cmd_example_harmonic(cfg: RunConfig) -> int:
    spec = HarmonicSpec(cfg.n or 4, cfg.c_bar)
    lam, k, w1 = harmonic_closed_form(spec)
    out = Path(cfg.out)
    write_atomic(out / f"harmonic_n{spec.n}.json", dump_model(harmonic_model(spec)) + "\n")
    write_json(out / "closed_form.json", "harmonic_closed_form",
               {"n": spec.n, "c_bar": spec.c_bar, "lambda": lam, "argmax_state": k,
                "w1": w1}, cfg)
    print(f"lambda={lam:.10f} k={k} w1={w1:.10f}")
    return EXIT_OK


def cmd_diagnose_exass(cfg: RunConfig) -> int:
    model = _load(cfg)
    _, _, _, _, selector = _solve(model, cfg)
    x0 = model.center if cfg.x0 is None else cfg.x0
    radius = model.radii[model.index(x0)] if cfg.radius is None else cfg.radius
    rep = exass_diagnostic(model, selector, x0, radius, cfg.horizon_list(),
                           cfg.paths, cfg.seed)
    out = Path(cfg.out)
    write_json(out / "exass.json", "exass_diagnostic", rep.to_dict(), cfg)
    write_atomic(out / "exass.csv", rep.to_csv())
    last = rep.rows[-1].log_ratio
    print(f"trend={rep.trend} last_log_ratio={last if last is None else f'{last:.6g}'} "
          f"({rep.note})")
    return EXIT_OK


HANDLERS = {
    "validate": cmd_validate,
    "solve": cmd_solve,
    "sweep": cmd_sweep,
    "simulate": cmd_simulate,
    "example-harmonic": cmd_example_harmonic,
    "diagnose-exass": cmd_diagnose_exass,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        return HANDLERS[cfg.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ModelParseError, ModelError) as exc:
        print(f"invalid model: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NotConvergedError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (SolverError, SweepError, PolicyError) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
