"""Command-line entry point: evolve, sweep, resonances, validate.

Exit codes: 0 success, 1 configuration error, 2 numerical failure,
3 validation failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import datetime as _dt
import json
import math
import os
import re
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .dynamics import PropagatorContext
from .errors import ConfigError, DATransferError
from .model import SystemParams, effective_reduction
from .observables import (efficiency_coherent, efficiency_incoherent, fluctuation_variance,
                          max_acceptor_probability, population_timeseries)
from .resonances import decay_rates
from .scenario import Scenario, load_scenario, selector_vector
from .validation import run_suite

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_VALIDATION = 0, 1, 2, 3
WORKERS_ENV = "DATRANSFER_WORKERS"


def fmt(x: float) -> str:
    return f"{float(x):.16e}"


_FLOAT_TAG = "\x00f"


def _tag_floats(obj):
    if isinstance(obj, dict):
        return {k: _tag_floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_tag_floats(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return _FLOAT_TAG + fmt(x) if math.isfinite(x) else str(x)
    return obj


def dumps(obj) -> str:
    """JSON with every finite float written to 17 significant digits."""
    text = json.dumps(_tag_floats(obj), indent=2)
    return re.sub(r'"\\u0000f([^"]*)"', r"\1", text) + "\n"


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(x) if isinstance(x, (float, np.floating)) else x for x in row])


def scenario_dict(scn: Scenario) -> dict:
    p, sp = scn.params, scn.spectral
    return {
        "system": {"E_D": p.E_D, "E_A": p.E_A, "N_D": p.N_D, "N_A": p.N_A, "V": p.V, "g_D": p.g_D,
                   "g_A": p.g_A, "lambda": p.lam, "beta": p.beta},
        "spectral": {"family": sp.family, "eta": sp.eta, "omega_c": sp.omega_c, "s": sp.s,
                     "ir_cutoff": sp.ir_cutoff, "panels": sp.quad.panels, "tolerance": sp.quad.tolerance},
        "initial": {"kind": scn.initial_kind, "p": list(scn.initial_p) if scn.initial_p else None,
                    "file": str(scn.initial_file) if scn.initial_file else None},
    }


def _manifest(scn: Scenario, command: str, ctx: PropagatorContext | None, extra=None) -> dict:
    out = {"tool": "datransfer", "version": __version__, "command": command, "scenario": scenario_dict(scn),
           "regime_warning": scn.params.regime_warning()}
    if ctx is not None:
        eff = ctx.eff
        out["derived"] = {"v": eff.v, "e1": eff.e1, "e2": eff.e2, "alpha": eff.alpha,
                          "gbar": eff.gbar.tolist()}
        out["resonances"] = ctx.resonances.report()
        out["lamb_shifts"] = {"mu": ctx.resonances.mu,
                              "available": bool(ctx.resonances.shift_available.all()),
                              "regularized": bool(ctx.resonances.regularized.any())}
    if extra:
        out.update(extra)
    # the only non-deterministic field
    out["timestamp"] = _dt.datetime.now(_dt.timezone.utc).isoformat()
    return out


def run_evolve(scn: Scenario, out: Path) -> list:
    if scn.time_grid is None:
        raise ConfigError("evolve needs a [time_grid] section", "time_grid")
    ctx = PropagatorContext.build(scn.params, scn.spectral)
    rho0 = scn.initial_state()
    series = population_timeseries(ctx, rho0, scn.time_grid.values())
    p = scn.params
    header = ["t", "p_D", "p_A"]
    vecs = []
    for bra, ket in scn.elements:
        header += [f"re_rho_{bra}_{ket}", f"im_rho_{bra}_{ket}"]
        vecs.append((selector_vector(bra, p), selector_vector(ket, p)))
    header += ["var_F", "p_D_closed"]
    rows = []
    for i, t in enumerate(series.t):
        rho = series.states[i]
        row = [t, series.p_D[i], series.p_A[i]]
        for b, k in vecs:
            z = b.conj() @ rho @ k
            row += [z.real, z.imag]
        pd = min(max(series.p_D[i], 0.0), 1.0)
        row += [fluctuation_variance(pd, p.N_D), series.p_D_closed[i]]
        rows.append(row)
    written = []
    if "timeseries" in scn.artifacts:
        _write_csv(out / "timeseries.csv", header, rows)
        written.append(out / "timeseries.csv")
    written += _common_outputs(scn, out, "evolve", ctx)
    return written


def _common_outputs(scn: Scenario, out: Path, command: str, ctx, extra=None) -> list:
    written = []
    if ctx is not None and "resonances" in scn.artifacts:
        (out / "resonances.json").write_text(dumps({"mu": ctx.resonances.mu, "entries": ctx.resonances.report()}))
        written.append(out / "resonances.json")
    if "manifest" in scn.artifacts:
        (out / "manifest.json").write_text(dumps(_manifest(scn, command, ctx, extra)))
        written.append(out / "manifest.json")
    return written


def _sweep_params(scn: Scenario, axis: str, value: float):
    p = scn.params
    dist = scn.distribution()
    if axis == "eta":
        av = abs(p.v)
        return dataclasses.replace(p, E_A=p.E_D - 2 * av * value), dist
    if axis == "beta":
        return dataclasses.replace(p, beta=value), dist
    if axis == "lambda":
        return dataclasses.replace(p, lam=value), dist
    if axis == "N_D":
        n = int(value)
        return dataclasses.replace(p, N_D=n, V=p.v / math.sqrt(n * p.N_A)), np.full(n, 1.0 / n)
    # p: interpolate from a point mass on D_1 to the uniform distribution
    point = np.zeros(p.N_D)
    point[0] = 1
    return p, (1 - value) * point + value * np.full(p.N_D, 1.0 / p.N_D)


def sweep_point(args):
    scn, axis, value = args
    p, dist = _sweep_params(scn, axis, value)
    eff = effective_reduction(p)
    nd = p.N_D
    inc = efficiency_incoherent(eff, p.beta, nd)
    uni = efficiency_coherent(eff, p.beta, nd, np.full(nd, 1.0 / nd))
    coh = efficiency_coherent(eff, p.beta, nd, dist)
    rates = decay_rates(p, eff, scn.spectral)
    return [value, inc.p_D_inf, uni.p_D_inf, max_acceptor_probability(eff, p.beta), abs(eff.alpha),
            coh.p_D_inf, rates.gamma_relax, rates.gamma_coh, inc.regime]


def run_sweep(scn: Scenario, out: Path, workers: int = 1) -> list:
    if scn.sweep is None:
        raise ConfigError("sweep needs a [sweep] section", "sweep")
    axis = scn.sweep.axis
    jobs = [(scn, axis, v) for v in scn.sweep.values]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(sweep_point, jobs))
    else:
        rows = [sweep_point(j) for j in jobs]
    header = [axis, "p_D_inc", "p_D_coh_uniform", "p_A_max", "alpha", "p_D_coh", "gamma_relax", "gamma_coh",
              "regime"]
    _write_csv(out / "sweep.csv", header, rows)
    return [out / "sweep.csv"] + _common_outputs(scn, out, "sweep", None, {"sweep_axis": axis})


def run_resonances(scn: Scenario, out: Path) -> list:
    ctx = PropagatorContext.build(scn.params, scn.spectral)
    arts = set(scn.artifacts) | {"resonances"}
    return _common_outputs(dataclasses.replace(scn, artifacts=tuple(sorted(arts))), out, "resonances", ctx)


def run_validate(scn: Scenario, out: Path, seed: int = 0):
    report = run_suite(scn, seed)
    (out / "validation.json").write_text(dumps(report))
    return report


def _workers(flag) -> int:
    if flag is not None:
        return max(1, flag)
    env = os.environ.get(WORKERS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"{WORKERS_ENV} must be an integer, got {env!r}")
    return 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="datransfer", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in (("evolve", "time evolution of the DA density matrix"),
                        ("sweep", "asymptotic efficiency along one parameter axis"),
                        ("resonances", "resonance energy report"),
                        ("validate", "run oracle and property checks")):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--config", required=True, type=Path, help="scenario TOML file")
        sp.add_argument("--out", type=Path, default=Path("out"), help="output directory")
        sp.add_argument("--workers", type=int, default=None,
                        help=f"worker processes for sweeps (default: ${WORKERS_ENV} or 1)")
        sp.add_argument("--seed", type=int, default=0, help="seed for randomized checks")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if not 0 <= args.seed < 2**64:
        print("error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_CONFIG
    try:
        scn = load_scenario(args.config)
        workers = _workers(args.workers)
        args.out.mkdir(parents=True, exist_ok=True)
        if args.command == "evolve":
            files = run_evolve(scn, args.out)
        elif args.command == "sweep":
            files = run_sweep(scn, args.out, workers)
        elif args.command == "resonances":
            files = run_resonances(scn, args.out)
        else:
            report = run_validate(scn, args.out, args.seed)
            failed = [c["check_name"] for c in report["checks"] if not c["pass"]]
            for c in report["checks"]:
                print(f"{'PASS' if c['pass'] else 'FAIL'} {c['check_name']}")
            for s in report["skipped"]:
                print(f"SKIP {s['check_name']}: {s['reason']}")
            if failed:
                print(f"validation failed: {', '.join(failed)}", file=sys.stderr)
                return EXIT_VALIDATION
            return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DATransferError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    warning = scn.params.regime_warning()
    if warning:
        print(f"warning: {warning}", file=sys.stderr)
    for f in files:
        print(f)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
