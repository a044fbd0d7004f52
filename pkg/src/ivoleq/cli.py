"""Command-line front end.

Subcommands
-----------
validate   assumption checks on a config, human-readable or JSON
table1     incompleteness effects as the number of investors grows
table2     two-group limit economies over a grid of weights and tolerances
curves     term-structure and price-of-risk curves as plot-ready CSV
verify     Monte Carlo verification suites (oracles and identities)
terminal   terminal-wealth variant checks

Every command takes a config path plus ``--seed``, ``--format {csv,json}``
and ``--out DIR``.  Without ``--out`` results go to stdout (aligned text for
csv format, a JSON document otherwise); with ``--out`` files are written and
each run drops a manifest next to its outputs.  Exit status: 0 on success,
1 on a failed check, 2 on a missing or unparseable config.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
import time
from dataclasses import dataclass
from datetime import datetime, timezone
from decimal import ROUND_HALF_EVEN, Decimal
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, load_config
from .dynamics import SimConfig
from .equilibrium import (
    bond_price,
    discrete_mpr,
    discrete_mpr_gap,
    mpr_instantaneous,
    term_structure,
)
from .model import (
    EconomyParams,
    GroupSpec,
    TwoGroupLimit,
    derive_aggregates,
    limit_aggregates,
    replicate_investor,
    validate,
)
from .riccati import solve_pair
from .terminal import terminal_equilibrium, terminal_mpr, verify_terminal_clearing

TABLE1_COUNTS = (2, 5, 10, 100, 1000)
TABLE2_WEIGHTS = (1.00, 0.75, 0.50, 0.25, 0.00)
TABLE2_TOLERANCE_PAIRS = ((0.5, 0.5), (0.5, 1 / 3), (1 / 3, 0.5), (1 / 3, 1 / 3))


@dataclass(frozen=True)
class RunManifest:
    """Provenance record accompanying every file the CLI writes."""

    config: str
    command: str
    seed: int
    version: str
    timestamp: str
    outputs: tuple[str, ...]


def _manifest(args, outputs: tuple[str, ...]) -> RunManifest:
    return RunManifest(
        config=str(args.config),
        command=args.command,
        seed=args.seed,
        version=__version__,
        timestamp=datetime.now(timezone.utc).isoformat(timespec="seconds"),
        outputs=outputs,
    )


def _fmt4(x: float) -> str:
    """Four decimals, ties to even, matching the published table precision."""
    return str(Decimal(x).quantize(Decimal("0.0001"), rounding=ROUND_HALF_EVEN))


def _write_rows(path: Path, header: list[str], rows: list[list[str]]) -> None:
    lines = [",".join(header)] + [",".join(r) for r in rows]
    path.write_text("\n".join(lines) + "\n")


def _print_aligned(header: list[str], rows: list[list[str]]) -> None:
    table = [header] + rows
    widths = [max(len(r[j]) for r in table) for j in range(len(header))]
    for r in table:
        print("  ".join(cell.rjust(w) for cell, w in zip(r, widths)))


def _emit_table(
    args, name: str, header: list[str], rows: list[list[str]], payload
) -> int:
    """Render one tabular result per the format/out matrix."""
    if args.out is None:
        if args.format == "json":
            doc = {"manifest": dataclasses.asdict(_manifest(args, ())), name: payload}
            print(json.dumps(doc, indent=2))
        else:
            _print_aligned(header, rows)
        return 0
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.format == "json":
        target = out_dir / f"{name}.json"
        target.write_text(json.dumps({name: payload}, indent=2) + "\n")
    else:
        target = out_dir / f"{name}.csv"
        _write_rows(target, header, rows)
    manifest_path = out_dir / f"{name}_manifest.json"
    manifest = _manifest(args, (str(target),))
    manifest_path.write_text(json.dumps(dataclasses.asdict(manifest), indent=2) + "\n")
    print(f"wrote {target}")
    return 0


def _homogeneous_template(econ: EconomyParams):
    first = econ.investors[0]
    if any(inv != first for inv in econ.investors[1:]):
        raise SystemExit("table commands need a homogeneous investor template")
    return first


# ---------------------------------------------------------------------------
# subcommands


def cmd_validate(args) -> int:
    econ = load_config(args.config)
    report = validate(econ)
    if args.format == "json" or args.out is not None:
        doc = {
            "manifest": dataclasses.asdict(_manifest(args, ())),
            "passed": report.passed,
            "checks": [dataclasses.asdict(c) for c in report.checks],
            "info": [dataclasses.asdict(c) for c in report.info],
        }
        text = json.dumps(doc, indent=2)
        if args.out is not None:
            out_dir = Path(args.out)
            out_dir.mkdir(parents=True, exist_ok=True)
            (out_dir / "validate.json").write_text(text + "\n")
            print(f"wrote {out_dir / 'validate.json'}")
        else:
            print(text)
    else:
        for line in report.lines():
            print(line)
    return 0 if report.passed else 1


def cmd_table1(args) -> int:
    econ = load_config(args.config)
    template = _homogeneous_template(econ)
    vol, horizon = econ.vol, econ.horizon
    rows_raw: list[tuple[object, float, float]] = []
    for n in TABLE1_COUNTS:
        agg = derive_aggregates(
            EconomyParams(vol=vol, horizon=horizon, investors=replicate_investor(template, n))
        )
        rows_raw.append((n, _rate_gap(agg), _mpr_gap(agg)))
    group = GroupSpec(
        tau=template.tau,
        beta_Y=template.beta_Y,
        sigma_Y=template.sigma_Y,
        kappa_Y=template.kappa_Y,
        mu_Y=template.mu_Y,
    )
    agg_inf = limit_aggregates(vol, horizon, TwoGroupLimit(w=1.0, group_a=group, group_b=group))
    rows_raw.append((None, _rate_gap(agg_inf), _mpr_gap(agg_inf)))

    header = ["investors", "rate_gap", "mpr_gap"]
    console = args.out is None and args.format == "csv"
    rows = [
        [("∞" if console else "inf") if n is None else str(n), _fmt4(rg), _fmt4(mg)]
        for n, rg, mg in rows_raw
    ]
    payload = [
        {"investors": n, "rate_gap": rg, "mpr_gap": mg} for n, rg, mg in rows_raw
    ]
    return _emit_table(args, "table1", header, rows, payload)


def _rate_gap(agg) -> float:
    """Benchmark-minus-market short rate at the initial variance."""
    return (agg.rate_slope_rep - agg.rate_slope) * agg.vol.v0


def _mpr_gap(agg) -> float:
    """Market-minus-benchmark window price of risk at the initial variance."""
    return discrete_mpr_gap(agg, agg.horizon) * np.sqrt(agg.vol.v0)


def cmd_table2(args) -> int:
    econ = load_config(args.config)
    template = _homogeneous_template(econ)
    vol, horizon = econ.vol, econ.horizon

    def group(tau: float, beta: float) -> GroupSpec:
        return GroupSpec(
            tau=tau,
            beta_Y=beta,
            sigma_Y=template.sigma_Y,
            kappa_Y=template.kappa_Y,
            mu_Y=template.mu_Y,
        )

    header = ["w"] + [
        f"tauA{ta:.2f}_tauB{tb:.2f}" for ta, tb in TABLE2_TOLERANCE_PAIRS
    ]
    rows: list[list[str]] = []
    payload: list[dict] = []
    for w in TABLE2_WEIGHTS:
        cells = []
        for tau_a, tau_b in TABLE2_TOLERANCE_PAIRS:
            lim = TwoGroupLimit(
                w=w, group_a=group(tau_a, args.beta_a), group_b=group(tau_b, args.beta_b)
            )
            cells.append(_mpr_gap(limit_aggregates(vol, horizon, lim)))
        rows.append([f"{w:.2f}"] + [_fmt4(c) for c in cells])
        payload.append(
            {"w": w, "cells": dict(zip(header[1:], cells))}
        )
    return _emit_table(args, "table2", header, rows, payload)


def cmd_curves(args) -> int:
    econ = load_config(args.config)
    agg = derive_aggregates(econ)
    horizon = econ.horizon
    grid = np.linspace(0.0, horizon, args.points)
    ts = term_structure(agg, 0.0, grid)
    sol, sol_rep = solve_pair(agg)
    v0 = econ.vol.v0
    inst = mpr_instantaneous(agg, v0)
    mpr = discrete_mpr(sol, agg, grid, horizon) * np.sqrt(v0)
    mpr_rep = discrete_mpr(sol_rep, agg, grid, horizon) * np.sqrt(v0)

    ts_header = ["maturity", "bond_price", "bond_price_rep"]
    ts_rows = [
        [f"{u:.6f}", f"{b:.10f}", f"{br:.10f}"]
        for u, b, br in zip(grid, ts.incomplete, ts.complete)
    ]
    mpr_header = ["time", "instantaneous", "window", "window_rep", "gap"]
    mpr_rows = [
        [f"{t:.6f}", f"{inst:.10f}", f"{m:.10f}", f"{mr:.10f}", f"{m - mr:.10f}"]
        for t, m, mr in zip(grid, mpr, mpr_rep)
    ]

    if args.out is None:
        if args.format == "json":
            doc = {
                "manifest": dataclasses.asdict(_manifest(args, ())),
                "term_structure": {
                    "maturity": grid.tolist(),
                    "bond_price": ts.incomplete.tolist(),
                    "bond_price_rep": ts.complete.tolist(),
                },
                "mpr_curve": {
                    "time": grid.tolist(),
                    "instantaneous": float(inst),
                    "window": mpr.tolist(),
                    "window_rep": mpr_rep.tolist(),
                },
            }
            print(json.dumps(doc, indent=2))
        else:
            _print_aligned(ts_header, ts_rows)
            print()
            _print_aligned(mpr_header, mpr_rows)
        return 0
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    ts_path = out_dir / "term_structure.csv"
    mpr_path = out_dir / "mpr_curve.csv"
    _write_rows(ts_path, ts_header, ts_rows)
    _write_rows(mpr_path, mpr_header, mpr_rows)
    manifest = _manifest(args, (str(ts_path), str(mpr_path)))
    (out_dir / "curves_manifest.json").write_text(
        json.dumps(dataclasses.asdict(manifest), indent=2) + "\n"
    )
    print(f"wrote {ts_path}")
    print(f"wrote {mpr_path}")
    return 0


@dataclass(frozen=True)
class CheckLine:
    """One verification check: an estimate against its tolerance."""

    name: str
    value: float
    threshold: float
    passed: bool
    standard_error: float | None = None
    elapsed: float = 0.0


def _z_check(name: str, est, target: float, start: float) -> CheckLine:
    z = est.z(target)
    return CheckLine(
        name=name,
        value=float(z),
        threshold=3.0,
        passed=bool(abs(z) <= 3.0),
        standard_error=est.standard_error,
        elapsed=time.perf_counter() - start,
    )


def _verify_suite(econ: EconomyParams, suite: str, seed: int, n_paths: int) -> list[CheckLine]:
    from . import dynamics as dyn

    agg = derive_aggregates(econ)
    sol, _ = solve_pair(agg)
    horizon = econ.horizon
    checks: list[CheckLine] = []

    def sim(**over) -> SimConfig:
        base = dict(n_paths=n_paths, seed=seed, antithetic=False)
        base.update(over)
        return SimConfig(**base)

    if suite in ("bond", "all"):
        closed = bond_price(sol, 0.0, horizon, econ.vol.v0)
        for scheme in ("euler", "exact"):
            t0 = time.perf_counter()
            est = dyn.mc_bond_price(econ, horizon, sim(scheme=scheme))
            checks.append(_z_check(f"bond_{scheme}_vs_closed", est, closed, t0))
        t0 = time.perf_counter()
        est = dyn.mc_annuity(econ, sim())
        from .equilibrium import annuity_price

        checks.append(
            _z_check("annuity_vs_closed", est, annuity_price(sol, 0.0, econ.vol.v0, horizon), t0)
        )
    if suite in ("clearing", "all"):
        t0 = time.perf_counter()
        rep = dyn.verify_clearing(econ, sim(n_paths=min(n_paths, 2000)))
        checks.append(
            CheckLine(
                name="clearing_max_residual",
                value=rep.max_residual,
                threshold=1e-10,
                passed=rep.max_residual <= 1e-10,
                elapsed=time.perf_counter() - t0,
            )
        )
    if suite in ("forward", "all"):
        for security in ("bond", "annuity"):
            t0 = time.perf_counter()
            est = dyn.verify_forward_measure(econ, horizon / 2.0, sim(), security=security)
            checks.append(_z_check(f"forward_measure_{security}", est, 0.0, t0))
    if suite in ("foc", "all"):
        t0 = time.perf_counter()
        rep = dyn.verify_foc(econ, sim(n_paths=min(n_paths, 2000)))
        checks.append(
            CheckLine(
                name="foc_max_residual",
                value=rep.max_insured,
                threshold=rep.dt,
                passed=rep.max_insured <= rep.dt,
                elapsed=time.perf_counter() - t0,
            )
        )
    if suite in ("martingale", "all"):
        t0 = time.perf_counter()
        for label, est in dyn.martingale_checks(econ, sim()):
            checks.append(_z_check(label, est, 1.0, t0))
            t0 = time.perf_counter()
    if suite in ("premium", "all"):
        for security in ("bond", "annuity"):
            t0 = time.perf_counter()
            rep = dyn.mc_risk_premium(econ, horizon / 2.0, security, sim())
            checks.append(_z_check(f"premium_identity_{security}", rep.identity_gap, 0.0, t0))
    if suite in ("multipliers", "all"):
        t0 = time.perf_counter()
        ms = dyn.solve_multipliers(econ, sim())
        total = float(abs(np.sum(ms.c0)))
        checks.append(
            CheckLine(
                name="multiplier_sum_is_zero",
                value=total,
                threshold=1e-12,
                passed=total <= 1e-12,
                elapsed=time.perf_counter() - t0,
            )
        )
        t0 = time.perf_counter()
        checks.append(
            _z_check("multiplier_annuity_cross_check", ms.annuity_mc, ms.annuity_closed, t0)
        )
    if not checks:
        raise SystemExit(f"unknown verification suite: {suite}")
    return checks


def _emit_checks(args, name: str, checks: list[CheckLine]) -> int:
    ok = all(c.passed for c in checks)
    if args.format == "json" or args.out is not None:
        doc = {
            "manifest": dataclasses.asdict(_manifest(args, ())),
            "passed": ok,
            "checks": [dataclasses.asdict(c) for c in checks],
        }
        text = json.dumps(doc, indent=2)
        if args.out is not None:
            out_dir = Path(args.out)
            out_dir.mkdir(parents=True, exist_ok=True)
            (out_dir / f"{name}.json").write_text(text + "\n")
            print(f"wrote {out_dir / f'{name}.json'}")
        else:
            print(text)
    else:
        for c in checks:
            se = "" if c.standard_error is None else f"  se={c.standard_error:.3e}"
            print(
                f"[{'pass' if c.passed else 'FAIL'}] {c.name}: "
                f"value={c.value:.6g} threshold={c.threshold:.6g}{se}  [{c.elapsed:.2f}s]"
            )
        print("all checks passed" if ok else "SOME CHECKS FAILED")
    return 0 if ok else 1


def cmd_verify(args) -> int:
    econ = load_config(args.config)
    checks = _verify_suite(econ, args.suite, args.seed, args.n_paths)
    return _emit_checks(args, "verify", checks)


def cmd_terminal(args) -> int:
    econ = load_config(args.config)
    agg = derive_aggregates(econ)
    eq_term = terminal_equilibrium(agg, econ.horizon)
    sol = eq_term.riccati

    checks: list[CheckLine] = []
    t0 = time.perf_counter()
    start_gap = abs(
        terminal_mpr(sol, agg, 0.0, econ.horizon) - discrete_mpr(sol, agg, 0.0, econ.horizon)
    )
    checks.append(
        CheckLine(
            name="schedule_start_matches_window_coefficient",
            value=start_gap,
            threshold=0.0,
            passed=start_gap == 0.0,
            elapsed=time.perf_counter() - t0,
        )
    )
    t0 = time.perf_counter()
    end_gap = abs(eq_term.price_of_risk(econ.horizon) - agg.mpr_loading)
    checks.append(
        CheckLine(
            name="schedule_end_matches_instantaneous",
            value=end_gap,
            threshold=0.0,
            passed=end_gap == 0.0,
            elapsed=time.perf_counter() - t0,
        )
    )
    t0 = time.perf_counter()
    rep = verify_terminal_clearing(
        econ, SimConfig(n_paths=args.n_paths, seed=args.seed, antithetic=False)
    )
    elapsed = time.perf_counter() - t0
    checks.append(
        CheckLine(
            name="terminal_clearing_residual",
            value=rep.max_residual,
            threshold=rep.dt,
            passed=rep.max_residual <= rep.dt,
            elapsed=elapsed,
        )
    )
    checks.append(
        CheckLine(
            name="aggregate_wealth_loading",
            value=rep.loading_gap,
            threshold=1e-10,
            passed=rep.loading_gap <= 1e-10,
            elapsed=0.0,
        )
    )
    return _emit_checks(args, "terminal", checks)


# ---------------------------------------------------------------------------
# argument parsing


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ivoleq",
        description="Incomplete-market equilibrium with stochastic income variance.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("config", help="economy config file (JSON or key = value lines)")
        p.add_argument("--seed", type=int, default=0, help="simulation seed")
        p.add_argument(
            "--format", choices=("csv", "json"), default="csv", help="output format"
        )
        p.add_argument("--out", metavar="DIR", default=None, help="write outputs here")

    p = sub.add_parser("validate", help="run assumption checks")
    common(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("table1", help="incompleteness effects vs number of investors")
    common(p)
    p.set_defaults(func=cmd_table1)

    p = sub.add_parser("table2", help="two-group limit grid")
    common(p)
    p.add_argument("--beta-a", type=float, default=0.1, help="group A unspanned loading")
    p.add_argument("--beta-b", type=float, default=0.4, help="group B unspanned loading")
    p.set_defaults(func=cmd_table2)

    p = sub.add_parser("curves", help="term structure and price-of-risk curves")
    common(p)
    p.add_argument("--points", type=int, default=13, help="grid points from 0 to horizon")
    p.set_defaults(func=cmd_curves)

    p = sub.add_parser("verify", help="Monte Carlo verification suites")
    common(p)
    p.add_argument(
        "--suite",
        default="all",
        choices=(
            "bond",
            "clearing",
            "forward",
            "foc",
            "martingale",
            "premium",
            "multipliers",
            "all",
        ),
    )
    p.add_argument("--n-paths", type=int, default=20_000)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("terminal", help="terminal-wealth variant checks")
    common(p)
    p.add_argument("--n-paths", type=int, default=2_000)
    p.set_defaults(func=cmd_terminal)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
