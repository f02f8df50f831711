"""Command-line driver.

    biharmlab {verify|spectrum|evolve|constants|form-check} --config PATH
              [--out DIR] [--seed N] [--threads N] [--plots]

Exit codes: 0 every check passed, 1 a numerical check failed, 2 usage or
configuration error.  Each run writes its JSON (and CSV mirrors) plus a
``manifest.json`` listing the artifacts with SHA-256 checksums.  Only the
manifest carries a timestamp; the data files are deterministic.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import hashlib
import json
import logging
import os
import sys
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from . import __version__
from .analysis.constants import constants_table, table_to_csv, table_to_dict
from .analysis.identities import duality_residual
from .analysis.reports import InequalityReport, _clean, skipped
from .analysis.suite import run_suite
from .analysis.threshold import lambda0_search
from .config import ConfigError, RunConfig, load_config
from .evolution import (EvolutionError, contraction_check, decay_study, default_timing,
                        evolve, smoothing_check)
from .forms import (ThresholdError, TailError, accretivity_gap, continuity_ratio, d2_norm,
                    d_norm, eval_form, form_identity_residual, form_norm_sq, sample)
from .grid import QuadratureError, build_grid
from .operator import StencilError, assemble
from .params import OperatorParams, ParameterError
from .spectral import (SpectralError, compute_spectrum, convergence_study, decay_check,
                       dense_oracle_check, growth_check, solve_sector, truncation_check)
from .testfn import PowerGaussian, profile_from_spec

log = logging.getLogger("biharmlab")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
COMMANDS = ("verify", "spectrum", "evolve", "constants", "form-check")


def dumps(obj) -> str:
    """Deterministic JSON: sorted keys, plain floats, trailing newline."""
    return json.dumps(_clean(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


class Run:
    """Output directory, artifact bookkeeping and the manifest of one invocation."""

    def __init__(self, command: str, cfg: RunConfig, out_dir: str, plots: bool):
        self.command, self.cfg, self.out_dir, self.plots = command, cfg, out_dir, plots
        self.artifacts: List[Dict[str, str]] = []
        os.makedirs(out_dir, exist_ok=True)

    def write(self, name: str, text: str) -> str:
        path = os.path.join(self.out_dir, name)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        self._record(path)
        return path

    def _record(self, path: str) -> None:
        with open(path, "rb") as fh:
            digest = hashlib.sha256(fh.read()).hexdigest()
        self.artifacts.append({"path": os.path.basename(path), "sha256": digest})

    def figures(self, make: Callable[[str], List[str]]) -> None:
        if not self.plots:
            return
        for path in make(self.out_dir):
            self._record(path)

    def manifest(self, exit_code: int) -> str:
        now = _dt.datetime.now(_dt.timezone.utc)
        stamp = now.strftime("%Y%m%dT%H%M%S%fZ")
        chash = self.cfg.hash()
        body = {"schema_version": "1.0", "run_id": f"{self.command}-{chash[:12]}-{stamp}",
                "timestamp": now.isoformat(), "command": self.command,
                "tool_version": __version__, "config_hash": chash,
                "config_source": self.cfg.source, "config": self.cfg.data,
                "exit_code": exit_code, "artifacts": list(self.artifacts)}
        path = os.path.join(self.out_dir, "manifest.json")
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(dumps(body))
        return path


def _say(report: InequalityReport) -> None:
    print(f"{report.status:7s} {report.id}  margin={report.margin:.3e}")


def _params_with_threshold(cfg: RunConfig) -> OperatorParams:
    """Operator data with lambda0 computed; a missing lambda falls back to it."""
    p = cfg.params()
    lam0 = p.lambda0 if p.lambda0 is not None else lambda0_search(p).value
    p = p.with_lambda0(lam0)
    return p if cfg.lambda_given else p.with_lambda(lam0)


# ---------------------------------------------------------------------------
# commands


def cmd_verify(cfg: RunConfig, run: Run) -> int:
    res = run_suite(cfg.params(), cfg.suite_settings())
    for r in res.reports:
        _say(r)
    run.write("verify.json", dumps(res.to_dict()))
    from .plotting import plot_margins
    run.figures(lambda d: plot_margins(res.reports, d))
    s = res.summary()
    print(f"verify: {s['PASS']} passed, {s['FAIL']} failed, {s['SKIPPED']} skipped")
    return EXIT_OK if res.passed else EXIT_FAIL


def cmd_spectrum(cfg: RunConfig, run: Run, dense_oracle: bool = False) -> int:
    p = cfg.params()
    p.require_dim(5)
    sp = cfg["spectral"]
    grid = build_grid(float(sp["r_min"]), float(sp["r_max"]), int(sp["n"]))
    res = compute_spectrum(p, grid, [int(l) for l in sp["sectors"]], int(sp["modes"]),
                           float(cfg["tolerances"]["residual"]),
                           threads=int(cfg["run"]["threads"]))
    reports = []
    if len(res.mu) >= 20:
        reports.append(growth_check(res))
    else:
        reports.append(skipped("spectrum-growth", f"needs >= 20 modes, got {len(res.mu)}"))
    reports.append(decay_check(res))
    reports.append(truncation_check(p, grid))
    if dense_oracle or sp["dense_oracle"]:
        reports.append(dense_oracle_check(p, r_min=grid.r_min, r_max=grid.r_max))
    if sp["refinement"]:
        res.refinement = convergence_study(p, grid)
    res.checks = {r.id: r.to_dict() for r in reports}
    for r in reports:
        _say(r)
    run.write("spectrum.json", dumps(res.to_dict()))
    run.write("spectrum.csv", res.to_csv())
    from .plotting import plot_spectrum
    run.figures(lambda d: plot_spectrum(res, d))
    print(f"spectrum: {len(res.mu)} modes, mu_1 = {res.mu[0]:.10g}")
    return EXIT_OK if all(r.passed for r in reports) else EXIT_FAIL


def _initial(ev: dict, op, sector_ground: np.ndarray) -> np.ndarray:
    kind = ev["initial"]
    if kind == "zero":
        return np.zeros(op.n)
    if kind == "eigenvector":
        return sector_ground.copy()
    if kind == "power-gaussian":
        return PowerGaussian(float(ev["p"]), float(ev["sigma"]))(op.r)
    raise ConfigError(f"unknown evolution.initial {kind!r}")


def cmd_evolve(cfg: RunConfig, run: Run) -> int:
    p = _params_with_threshold(cfg)
    ev, sp = cfg["evolution"], cfg["spectral"]
    grid = build_grid(float(sp["r_min"]), float(sp["r_max"]), int(sp["n"]))
    trajs, reports, entries = [], [], []
    for l in [int(x) for x in ev["sectors"]]:
        op = assemble(p, grid, l)
        ground = solve_sector(op, 2, float(cfg["tolerances"]["residual"]))
        mu1, mu2 = float(ground.mu[0]), float(ground.mu[1])
        dt0, T0 = default_timing(mu1, p.lam)
        dt = float(ev["dt"]) if ev["dt"] is not None else dt0
        T = float(ev["T"]) if ev["T"] is not None else T0
        u0 = _initial(ev, op, ground.vectors[:, 0])
        tr = evolve(u0, T, dt, op, p.lam, ev["scheme"])
        local = [contraction_check(tr)]
        if op.w_norm(u0) > 0 and tr.scheme == "implicit-euler":
            try:
                # the slope fit runs past the trajectory's own T, long enough
                # for the second mode to die out
                study = decay_study(u0, op, mu1, p.lam, dt, mu2=mu2)
            except EvolutionError as exc:
                local.append(skipped(f"decay-rate[l={l}]", str(exc)))
            else:
                tr.decay = study
                local.append(InequalityReport(f"decay-rate[l={l}]",
                                              0.02 - study["relative_error"], 0.0,
                                              details=study))
        else:
            local.append(skipped(f"decay-rate[l={l}]", "zero data or non-monotone scheme"))
        sm = smoothing_check(tr, op, mu1)
        local.append(sm)
        for r in local:
            _say(r)
        reports += local
        trajs.append(tr)
        entries.append({"sector": l, "mu1": mu1, "trajectory": tr.to_dict(),
                        "reports": [r.to_dict() for r in local]})
        run.write(f"trajectory_l{l}.csv", tr.to_csv())
    body = {"schema_version": "1.0", "kind": "evolve", "params": p.to_dict(),
            "lambda_source": "config" if cfg.lambda_given else "lambda0",
            "trajectories": entries,
            "passed": all(r.passed for r in reports)}
    run.write("evolve.json", dumps(body))
    from .plotting import plot_trajectories
    run.figures(lambda d: plot_trajectories(trajs, d))
    return EXIT_OK if body["passed"] else EXIT_FAIL


def cmd_constants(cfg: RunConfig, run: Run) -> int:
    p = cfg.params()
    rows = constants_table(p, cfg.suite_settings())
    run.write("constants.json", dumps(table_to_dict(p, rows)))
    run.write("constants.csv", table_to_csv(rows))
    for r in rows:
        print(f"{r['name']:40s} {r['value']!r}")
    emp = next(r for r in rows if r["name"].startswith("c0_empirical"))
    ok = emp["value"] >= emp["reference"] * (1 - 1e-6)
    return EXIT_OK if ok else EXIT_FAIL


def cmd_form_check(cfg: RunConfig, run: Run) -> int:
    p = _params_with_threshold(cfg)
    quad = cfg.suite_settings().quadrature(p.N)
    try:
        u = profile_from_spec(dict(cfg["form"]["u"]))
        v = profile_from_spec(dict(cfg["form"]["v"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid form.u / form.v: {exc}") from exc
    su, sv = sample(u, quad), sample(v, quad)
    fv = eval_form(su, sv, p, quad)
    resid = form_identity_residual(su, sv, p, quad)
    dual = duality_residual(su, sv, p, quad)
    gaps = {}
    for name, s in (("u", su), ("v", sv)):
        g = accretivity_gap(s, p, quad)
        gaps[name] = {"gap": g, "norm_a_sq": form_norm_sq(s, p, quad)}
    reports = [
        InequalityReport("form-identity", -resid, 1e-6, details={"residual": resid}),
        InequalityReport("duality", -dual, 1e-6, details={"residual": dual}),
    ]
    for name, g in gaps.items():
        m = g["gap"] / g["norm_a_sq"] if g["norm_a_sq"] > 0 else 0.0
        reports.append(InequalityReport(f"accretivity[{name}]", m, 1e-8, details=g))
    for r in reports:
        _say(r)
    body = {"schema_version": "1.0", "kind": "form-check", "params": p.to_dict(),
            "u": u.describe(), "v": v.describe(), "form": fv.to_dict(),
            "continuity_ratio": continuity_ratio(su, sv, p, quad),
            "d_norm": {"u": d_norm(su, p, quad).to_dict(), "v": d_norm(sv, p, quad).to_dict()},
            "d2_norm": {"u": d2_norm(su, p, quad).to_dict(),
                        "v": d2_norm(sv, p, quad).to_dict()},
            "reports": [r.to_dict() for r in reports],
            "passed": all(r.passed for r in reports)}
    run.write("form-check.json", dumps(body))
    return EXIT_OK if body["passed"] else EXIT_FAIL


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="biharmlab",
                                     description="Numerical laboratory for "
                                                 "A = (1+|x|^a)^2 Delta^2 + |x|^(2b).")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="TOML config file (defaults apply when omitted)")
        sp.add_argument("--out", help="output directory (default: run.out)")
        sp.add_argument("--seed", type=int, help="family seed (nonnegative)")
        sp.add_argument("--threads", type=int, help="worker threads for sweeps")
        sp.add_argument("--plots", action="store_true",
                        help="also write PNG figures next to the data files")
        sp.add_argument("-v", "--verbose", action="store_true")
        if name == "spectrum":
            sp.add_argument("--dense-oracle", action="store_true",
                            help="cross-check the l=0 ground state with a dense solve")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    overrides: Dict[str, dict] = {}
    if args.seed is not None:
        overrides.setdefault("family", {})["seed"] = args.seed
    if args.threads is not None:
        overrides.setdefault("run", {})["threads"] = args.threads
    if args.out is not None:
        overrides.setdefault("run", {})["out"] = args.out
    if args.plots:
        overrides.setdefault("run", {})["plots"] = True
    try:
        cfg = load_config(args.config, overrides)
    except ConfigError as exc:
        print(f"biharmlab: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    run = Run(args.command, cfg, str(cfg["run"]["out"]), bool(cfg["run"]["plots"]))
    handlers = {"verify": cmd_verify, "evolve": cmd_evolve, "constants": cmd_constants,
                "form-check": cmd_form_check}
    try:
        if args.command == "spectrum":
            code = cmd_spectrum(cfg, run, args.dense_oracle)
        else:
            code = handlers[args.command](cfg, run)
    except (ConfigError, ParameterError, ThresholdError, StencilError) as exc:
        print(f"biharmlab: {exc}", file=sys.stderr)
        code = EXIT_USAGE
    except (SpectralError, EvolutionError, QuadratureError, TailError) as exc:
        print(f"biharmlab: numerical failure: {exc}", file=sys.stderr)
        code = EXIT_FAIL
    run.manifest(code)
    return code


if __name__ == "__main__":
    sys.exit(main())
