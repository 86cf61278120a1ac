"""Batch front-end: read a problem config, run hypothesis checks, solve,
classify, verify bounds, and emit human-readable plus machine-readable
reports.

Config files are TOML with three sections (see docs/formats.md): [problem]
holds the instance (dimension, central values, the eight expressions in
the small DSL, constants, optional [problem.params] for late-bound names),
[numerics] the grid/solver/tail knobs, [output] the destination.

Exit codes: 0 ok, 1 config error, 2 hypothesis fail, 3 indeterminate,
4 no convergence, 5 numerical blow-up, 6 bounds violated.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass, field

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - 3.10 fallback
    import tomli as tomllib

from . import expr_dsl
from .classify import (
    Numerics,
    bounds_thm2,
    check_necessity_v,
    classify_thm1,
    existence_gate,
)
from .functionals import HEvaluator, evaluate_radial_functionals
from .problem import ProblemSpec, ScalarFn, run_hypothesis_checks
from .quadrature import Grid, make_grid
from .solver import BlowUpError, MonotonicityError, SolutionPair, picard_solve, residual

__all__ = ["main", "load_config", "RunConfig", "ConfigError", "EXIT"]

EXIT = {
    "ok": 0,
    "config": 1,
    "hypothesis": 2,
    "indeterminate": 3,
    "no_convergence": 4,
    "blow_up": 5,
    "bounds": 6,
}

_EXPR_KEYS = ("p1", "p2", "f1", "f2", "h1", "h2", "w1", "w2")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class NumericsSection:
    r_max: float
    n_panels: int = 32
    grading: float = 2.0
    nodes_per_panel: int = 9
    tol: float = 1e-8
    max_iter: int = 200
    ivp_h: float = 1e-3
    tail_r0: float = 8.0
    tail_doublings: int = 7
    tail_tol: float = 1e-6
    tail_cap: float = 1e12
    hyp_r: float = 0.0  # 0 -> use r_max
    hyp_n: int = 200
    c2_t_max: float = 0.0  # 0 -> auto
    c2_w_max: float = 100.0
    c2_n: int = 40
    weight_probe: float = 1024.0
    weight_n: int = 400
    h_max_upper: float = 1e250
    bounds_slack: float = 1e-6
    largeness_factor: float = 1e3

    def classify_numerics(self) -> Numerics:
        return Numerics(
            n_panels=self.n_panels,
            grading=self.grading,
            nodes_per_panel=self.nodes_per_panel,
            tail_r0=self.tail_r0,
            tail_doublings=self.tail_doublings,
            tail_tol=self.tail_tol,
            tail_cap=self.tail_cap,
            weight_probe=self.weight_probe,
            weight_n=self.weight_n,
            h_max_upper=self.h_max_upper,
            bounds_slack=self.bounds_slack,
            largeness_factor=self.largeness_factor,
        )


@dataclass(frozen=True)
class OutputSection:
    directory: str = "out"
    formats: tuple[str, ...] = ("csv", "json")


@dataclass(frozen=True)
class RunConfig:
    spec: ProblemSpec
    numerics: NumericsSection
    output: OutputSection
    params: dict[str, float] = field(default_factory=dict)
    source_path: str = ""

    def grid(self) -> Grid:
        n = self.numerics
        return make_grid(n.r_max, n.n_panels, n.grading, n.nodes_per_panel)


def _require(table: dict, key: str, where: str):
    if key not in table:
        raise ConfigError(f"missing required key '{key}' in [{where}]")
    return table[key]


def _as_float(value, key: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"key '{key}' must be a number, got {value!r}")
    return float(value)


def _parse_expr(source, key: str, params: dict[str, float]) -> ScalarFn:
    if not isinstance(source, str):
        raise ConfigError(f"key '{key}' must be a quoted expression string")
    try:
        tree = expr_dsl.parse(source)
    except expr_dsl.ParseError as e:
        raise ConfigError(f"expression '{key}' = \"{source}\": {e}") from None
    flags = {}
    if key in ("f1", "f2"):
        flags = {"monotone_nondecreasing": True, "zero_at_zero": True}
    elif key in ("h1", "h2", "w1", "w2"):
        flags = {"monotone_nondecreasing": True}
    return ScalarFn.from_expression(tree, bindings=params, label=source, **flags)


def load_config(path: str, set_overrides: dict[str, float] | None = None) -> RunConfig:
    """Load, validate and bind a run configuration."""
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"{path}: TOML parse error: {e}") from None

    if "problem" not in doc:
        raise ConfigError("missing [problem] section")
    prob = dict(doc["problem"])
    params = {k: _as_float(v, f"params.{k}") for k, v in dict(prob.pop("params", {})).items()}
    if set_overrides:
        params.update(set_overrides)

    n_dim = _require(prob, "N", "problem")
    if isinstance(n_dim, bool) or not isinstance(n_dim, int):
        raise ConfigError("problem.N must be an integer")
    a = _as_float(_require(prob, "a", "problem"), "a")
    b = _as_float(_require(prob, "b", "problem"), "b")
    fns = {k: _parse_expr(_require(prob, k, "problem"), k, params) for k in _EXPR_KEYS}
    cbar1 = _as_float(prob.get("cbar1", 1.0), "cbar1")
    cbar2 = _as_float(prob.get("cbar2", 1.0), "cbar2")
    eps = _as_float(prob.get("eps", 0.5), "eps")
    try:
        spec = ProblemSpec(
            n_dim=n_dim, a=a, b=b, cbar1=cbar1, cbar2=cbar2, eps=eps, **fns
        )
    except (ValueError, expr_dsl.EvalError) as e:
        raise ConfigError(f"invalid problem instance: {e}") from None

    numt = dict(doc.get("numerics", {}))
    if "R_max" not in numt:
        raise ConfigError("missing required key 'R_max' in [numerics]")
    kwargs = {"r_max": _as_float(numt.pop("R_max"), "R_max")}
    renames = {
        "tail_R0": "tail_r0",
        "hyp_R": "hyp_r",
    }
    valid = set(NumericsSection.__dataclass_fields__)
    for key, value in numt.items():
        dest = renames.get(key, key)
        if dest not in valid:
            raise ConfigError(f"unknown key '{key}' in [numerics]")
        f = NumericsSection.__dataclass_fields__[dest]
        if f.type == "int":
            if isinstance(value, bool) or not isinstance(value, int):
                raise ConfigError(f"numerics.{key} must be an integer")
            kwargs[dest] = value
        else:
            kwargs[dest] = _as_float(value, key)
    numerics = NumericsSection(**kwargs)
    for key in ("r_max", "grading", "tol", "ivp_h", "tail_r0", "tail_tol", "tail_cap"):
        if getattr(numerics, key) <= 0:
            raise ConfigError(f"numerics.{key} must be positive")
    if numerics.n_panels < 1 or numerics.max_iter < 1 or numerics.tail_doublings < 3:
        raise ConfigError("numerics counts out of range")
    if numerics.nodes_per_panel < 3 or numerics.nodes_per_panel % 2 == 0:
        raise ConfigError("numerics.nodes_per_panel must be odd and >= 3")

    outt = dict(doc.get("output", {}))
    output = OutputSection(
        directory=str(outt.get("directory", "out")),
        formats=tuple(outt.get("formats", ["csv", "json"])),
    )
    return RunConfig(spec=spec, numerics=numerics, output=output, params=params, source_path=path)


# ---------------------------------------------------------------------------
# deterministic writers


def _fmt(x: float) -> str:
    if isinstance(x, float) and math.isnan(x):
        return "nan"
    return f"{x:.17g}"


def _write_atomic(path: str, text: str):
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _write_json(path: str, obj):
    _write_atomic(path, json.dumps(obj, indent=2) + "\n")


def _write_csv(path: str, header: list[str], columns: list[np.ndarray]):
    rows = ["".join([",".join(header)])]
    n = len(columns[0])
    for i in range(n):
        rows.append(",".join(_fmt(float(c[i])) for c in columns))
    _write_atomic(path, "\n".join(rows) + "\n")


def _verdict_json(v) -> dict:
    return {
        "kind": v.kind,
        "value": v.value,
        "error_estimate": v.error_estimate,
        "rate_hint": v.rate_hint,
        "reason": v.reason,
        "probe_radii": list(v.probe_radii),
        "probe_values": list(v.probe_values),
    }


def _weight_json(w) -> dict:
    return {"ok": w.ok, "threshold": w.threshold, "reason": w.reason, "sampling": w.sampling}


def _hyp_json(entry) -> dict:
    return {
        "name": entry.name,
        "status": entry.status,
        "witness": entry.witness,
        "sampling": entry.sampling,
        "detail": entry.detail,
    }


# ---------------------------------------------------------------------------
# commands


def _check_payload(cfg: RunConfig) -> tuple[int, dict]:
    n = cfg.numerics
    report = run_hypothesis_checks(
        cfg.spec,
        R=n.hyp_r or n.r_max,
        n=n.hyp_n,
        t_max=n.c2_t_max or None,
        w_max=n.c2_w_max,
        c2_n=n.c2_n,
    )
    if report.any_failed:
        code = EXIT["hypothesis"]
    elif report.any_indeterminate:
        code = EXIT["indeterminate"]
    else:
        code = EXIT["ok"]
    payload = {
        "fingerprint": cfg.spec.fingerprint(),
        "entries": [_hyp_json(e) for e in report.entries],
        "all_passed": report.all_passed,
    }
    return code, payload


def cmd_check(cfg: RunConfig, out_dir: str) -> int:
    code, payload = _check_payload(cfg)
    _write_json(os.path.join(out_dir, "check_report.json"), payload)
    for e in payload["entries"]:
        print(f"check {e['name']}: {e['status']}")
    return code


def _solve_payload(cfg: RunConfig) -> tuple[int, dict, SolutionPair | None]:
    grid = cfg.grid()
    manifest: dict = {
        "fingerprint": cfg.spec.fingerprint(),
        "method": "picard",
        "grid_nodes": len(grid),
        "r_max": cfg.numerics.r_max,
    }
    try:
        sol = picard_solve(cfg.spec, grid, tol=cfg.numerics.tol, max_iter=cfg.numerics.max_iter)
    except BlowUpError as e:
        manifest.update(
            converged=False, blow_up_radius=e.radius, iterations=e.iteration, error=str(e)
        )
        return EXIT["blow_up"], manifest, None
    except MonotonicityError as e:
        manifest.update(converged=False, blow_up_radius=None, error=str(e))
        return EXIT["no_convergence"], manifest, None
    r1, r2 = residual(cfg.spec, sol)
    manifest.update(
        converged=sol.converged,
        blow_up_radius=None,
        iterations=sol.iterations,
        residuals=[r1, r2],
        increment_history=list(sol.increment_history),
    )
    code = EXIT["ok"] if sol.converged else EXIT["no_convergence"]
    return code, manifest, sol


def _write_solution_csv(path: str, sol: SolutionPair):
    _write_csv(path, ["r", "u1", "u2"], [sol.u1.grid.nodes, sol.u1.values, sol.u2.values])


def cmd_solve(cfg: RunConfig, out_dir: str) -> int:
    code, manifest, sol = _solve_payload(cfg)
    if sol is not None and "csv" in cfg.output.formats:
        _write_solution_csv(os.path.join(out_dir, "solution.csv"), sol)
    _write_json(os.path.join(out_dir, "solve_manifest.json"), manifest)
    if sol is None:
        print(f"solve: failed ({manifest.get('error', 'unknown')})")
    else:
        print(
            f"solve: converged={sol.converged} iterations={sol.iterations} "
            f"residuals={manifest['residuals'][0]:.3g},{manifest['residuals'][1]:.3g}"
        )
    return code


def _classify_payload(cfg: RunConfig) -> tuple[int, dict]:
    num = cfg.numerics.classify_numerics()
    gate = existence_gate(cfg.spec, num)
    payload: dict = {
        "fingerprint": cfg.spec.fingerprint(),
        "gate": {
            "regime": gate.regime,
            "asserted_behavior": gate.asserted_behavior,
            "reason": gate.reason,
            "verdicts": {k: _verdict_json(v) for k, v in gate.verdicts.items()},
            "margins": gate.margins,
            "weight_checks": {k: _weight_json(w) for k, w in gate.weight_checks.items()},
        },
    }
    predicted = gate.asserted_behavior
    if gate.regime == "H_INF_BOTH":
        cls = classify_thm1(cfg.spec, num)
        payload["dichotomy"] = {
            "kind": cls.kind,
            "reason": cls.reason,
            "verdicts": {k: _verdict_json(v) for k, v in cls.evidence.items()},
            "weight_checks": {k: _weight_json(w) for k, w in cls.weight_checks.items()},
        }
        if cls.kind != "Indeterminate":
            predicted = cls.kind
    payload["predicted_behavior"] = predicted
    code = EXIT["ok"] if predicted in ("F", "I", "SF1", "SF2") else EXIT["indeterminate"]
    return code, payload


def cmd_classify(cfg: RunConfig, out_dir: str) -> int:
    code, payload = _classify_payload(cfg)
    _write_json(os.path.join(out_dir, "classification.json"), payload)
    print(f"classify: regime={payload['gate']['regime']} behavior={payload['predicted_behavior']}")
    return code


def _load_solution_csv(path: str, grid: Grid) -> SolutionPair:
    try:
        with open(path) as fh:
            lines = [ln.strip() for ln in fh if ln.strip()]
    except OSError as e:
        raise ConfigError(f"cannot read solution file: {e}") from None
    if not lines or lines[0] != "r,u1,u2":
        raise ConfigError("solution file must start with header 'r,u1,u2'")
    body = [ln.split(",") for ln in lines[1:]]
    if len(body) != len(grid):
        raise ConfigError(
            f"solution file has {len(body)} rows, grid has {len(grid)} nodes"
        )
    try:
        arr = np.array([[float(x) for x in row] for row in body])
    except ValueError as e:
        raise ConfigError(f"malformed solution row: {e}") from None
    if not np.allclose(arr[:, 0], grid.nodes, rtol=1e-9, atol=1e-12):
        raise ConfigError("solution radii do not match the configured grid")
    from .quadrature import Profile

    return SolutionPair(
        u1=Profile(grid=grid, values=arr[:, 1], name="u1"),
        u2=Profile(grid=grid, values=arr[:, 2], name="u2"),
        iterations=0,
        increment_history=(),
        converged=True,
        method="injected",
    )


def _bounds_payload(cfg: RunConfig, sol: SolutionPair) -> tuple[int, dict, object]:
    num = cfg.numerics.classify_numerics()
    report = bounds_thm2(cfg.spec, sol, num)
    worst = {
        k: {"margin": m, "radius": r} for k, (m, r) in report.worst.items()
    }
    payload = {
        "fingerprint": cfg.spec.fingerprint(),
        "passed": report.passed,
        "slack": report.slack,
        "worst": worst,
        "saturated_nodes": {"side1": report.saturated1, "side2": report.saturated2},
    }
    code = EXIT["ok"] if report.passed else EXIT["bounds"]
    return code, payload, report


def _write_bounds_csv(path: str, report) -> None:
    _write_csv(
        path,
        ["r", "lower1", "upper1", "lower2", "upper2"],
        [report.radii, report.lower1, report.upper1, report.lower2, report.upper2],
    )


def cmd_bounds(cfg: RunConfig, out_dir: str, solution_path: str | None = None) -> int:
    if solution_path is not None:
        sol = _load_solution_csv(solution_path, cfg.grid())
        code = EXIT["ok"]
    else:
        code, manifest, sol = _solve_payload(cfg)
        if sol is None or not sol.converged:
            _write_json(os.path.join(out_dir, "bounds.json"), {"skipped": manifest})
            print("bounds: skipped (solve failed)")
            return code
    bcode, payload, report = _bounds_payload(cfg, sol)
    _write_json(os.path.join(out_dir, "bounds.json"), payload)
    if "csv" in cfg.output.formats:
        _write_bounds_csv(os.path.join(out_dir, "bounds_margins.csv"), report)
    print(f"bounds: passed={payload['passed']}")
    return bcode


def _export_profiles(cfg: RunConfig, out_dir: str, sol: SolutionPair | None):
    pdir = os.path.join(out_dir, "profiles")
    grid = cfg.grid()
    if sol is not None:
        _write_solution_csv(os.path.join(pdir, "solution.csv"), sol)
    profs = evaluate_radial_functionals(cfg.spec, grid)
    for tag, fp in profs.items():
        _write_csv(
            os.path.join(pdir, f"functional_{tag}.csv"),
            ["r", "value"],
            [grid.nodes, fp.profile.values],
        )
    n = cfg.numerics
    for which, lower in ((1, cfg.spec.a), (2, cfg.spec.b)):
        u_top = float(sol.u1.values[-1] if which == 1 else sol.u2.values[-1]) if sol else lower
        hev = HEvaluator(cfg.spec, which, n.n_panels, n.grading, n.nodes_per_panel, n.h_max_upper)
        hev.ensure_upper(max(2.0 * lower, 1.5 * u_top))
        prof = hev.profile()
        _write_csv(
            os.path.join(pdir, f"functional_H{which}.csv"),
            ["r", "value"],
            [prof.grid.nodes, prof.values],
        )


def cmd_report(cfg: RunConfig, out_dir: str) -> int:
    codes: dict[str, int] = {}
    doc: dict = {"fingerprint": cfg.spec.fingerprint(), "config": cfg.source_path}

    want_csv = "csv" in cfg.output.formats
    codes["check"], doc["check"] = _check_payload(cfg)
    scode, manifest, sol = _solve_payload(cfg)
    codes["solve"] = scode
    doc["solve"] = manifest
    if sol is not None and want_csv:
        _write_solution_csv(os.path.join(out_dir, "solution.csv"), sol)
    codes["classify"], doc["classification"] = _classify_payload(cfg)
    if sol is not None and sol.converged:
        bcode, bpayload, breport = _bounds_payload(cfg, sol)
        codes["bounds"] = bcode
        doc["bounds"] = bpayload
        if want_csv:
            _write_bounds_csv(os.path.join(out_dir, "bounds_margins.csv"), breport)
        nreport = check_necessity_v(cfg.spec, sol, cfg.numerics.classify_numerics())
        doc["necessity"] = {
            "applicable": nreport.applicable,
            "consistent": nreport.consistent,
            "reason": nreport.reason,
            "evidence": {k: _verdict_json(v) for k, v in nreport.evidence.items()},
        }
    else:
        doc["bounds"] = {"skipped": "no converged solution"}
        doc["necessity"] = {"applicable": False, "reason": "no converged solution"}
    if want_csv:
        try:
            _export_profiles(cfg, out_dir, sol)
        except ValueError as e:
            doc["profiles_error"] = str(e)
    doc["exit_codes"] = codes
    worst = max(codes.values())
    doc["worst_exit"] = worst
    _write_json(os.path.join(out_dir, "report.json"), doc)
    print(
        "report: "
        + " ".join(f"{k}={v}" for k, v in codes.items())
        + f" worst={worst}"
    )
    return worst


# ---------------------------------------------------------------------------
# entry point


def _parse_sets(pairs: list[str]) -> dict[str, float]:
    out = {}
    for item in pairs:
        if "=" not in item:
            raise ConfigError(f"--set expects name=value, got '{item}'")
        name, _, value = item.partition("=")
        try:
            out[name.strip()] = float(value)
        except ValueError:
            raise ConfigError(f"--set {name}: '{value}' is not a number") from None
    return out


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="koradial",
        description="Entire radial solutions of coupled semilinear systems: "
        "check hypotheses, solve, classify behavior at infinity, verify bounds.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("check", "solve", "classify", "bounds", "report"):
        p = sub.add_parser(name)
        p.add_argument("config", help="path to a TOML run configuration")
        p.add_argument("--set", action="append", default=[], metavar="NAME=VALUE",
                       help="override a named expression parameter")
        p.add_argument("--out", default=None, help="output directory (overrides config)")
        if name == "bounds":
            p.add_argument("--solution", default=None,
                           help="verify bounds against this solution CSV instead of solving")
    args = parser.parse_args(argv)

    try:
        overrides = _parse_sets(args.set)
        cfg = load_config(args.config, overrides)
        out_dir = args.out or cfg.output.directory
        os.makedirs(out_dir, exist_ok=True)
        if args.command == "check":
            return cmd_check(cfg, out_dir)
        if args.command == "solve":
            return cmd_solve(cfg, out_dir)
        if args.command == "classify":
            return cmd_classify(cfg, out_dir)
        if args.command == "bounds":
            return cmd_bounds(cfg, out_dir, args.solution)
        if args.command == "report":
            return cmd_report(cfg, out_dir)
        raise AssertionError(args.command)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT["config"]
    except (expr_dsl.EvalError, ValueError) as e:
        # an expression that parses but cannot be evaluated on the requested
        # domain (or similarly unusable numerics) is a configuration problem
        print(f"config error: {e}", file=sys.stderr)
        return EXIT["config"]


if __name__ == "__main__":
    sys.exit(main())
