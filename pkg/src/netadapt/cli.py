"""Command line driver: ``simulate``, ``stability`` and ``reproduce``.

Exit codes: 0 on success (diverged runs included), 2 for config errors
(nothing is written), 3 for numerical failures.

The default output directory is ``$NETADAPT_OUT_DIR`` or ``./results``.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from dataclasses import replace
from importlib import resources
from pathlib import Path

import numpy as np

from .analysis import (
    closed_form_eigenvalues,
    msd_theory,
    stability_report,
    theory_msd_for,
)
from .config import ConfigError, ScenarioConfig, emit_config, load_config
from .graph import spectral_split
from .montecarlo import LearningCurve, monte_carlo
from .scenarios import scenario_library, standard_configs

log = logging.getLogger("netadapt")

OUT_ENV = "NETADAPT_OUT_DIR"
CASES = ("fig2", "eta_sweep", "bench_n20", "partial_obs")
FIG2_STEPS = (1.1, 0.75, 3 / 64)
ETA_GRID = tuple([0.0] + [float(x) for x in np.logspace(-2, 2, 41)])

# case -> (library scenario, horizon, default trials)
_CASE_RUNS = {
    "fig2": ("two_node", 2000, 100),
    "bench_n20": ("bench_n20", 3000, 100),
    "partial_obs": ("partial_obs_3node", 10_000, 1000),
}


class NumericalFailure(RuntimeError):
    pass


def default_out_dir() -> Path:
    return Path(os.environ.get(OUT_ENV, "results"))


def _num(x) -> float | None:
    """JSON-safe float: non-finite values become null."""
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else None


def _db(x) -> float | None:
    if x is None or not x > 0:
        return None
    return _num(10.0 * math.log10(x))


def summary_schema() -> dict:
    text = resources.files("netadapt").joinpath("schemas/summary.schema.json").read_text()
    return json.loads(text)


def validate_summary(summary: dict) -> None:
    import jsonschema

    jsonschema.validate(summary, summary_schema())


def write_curve_csv(path: Path, curve: LearningCurve, theory_msd: float | None) -> None:
    """Columns ``iteration, msd, msd_db, theory_msd_db``; one row per iteration."""
    theory = "" if theory_msd is None else repr(10.0 * math.log10(theory_msd))
    lines = ["iteration,msd,msd_db,theory_msd_db"]
    for i, (m, d) in enumerate(zip(curve.msd, curve.msd_db), start=1):
        lines.append(f"{i},{float(m)!r},{float(d)!r},{theory}")
    path.write_text("\n".join(lines) + "\n")


def _algorithm_summary(curve: LearningCurve, report, theory: float | None, csv_name: str) -> dict:
    div = curve.diverged
    return {
        "kind": report.kind,
        "step_size": report.mu,
        "eta": report.eta,
        "diverged": bool(div),
        "diverged_trials": int(curve.diverged_trials),
        "steady_state_msd": None if div else _num(curve.steady_state_msd),
        "steady_state_msd_db": None if div else _db(curve.steady_state_msd),
        "per_agent_msd_db": None if div else [_num(x) for x in curve.per_agent_msd_db],
        "initial_msd": float(curve.initial_msd),
        "theory_msd": _num(theory),
        "theory_msd_db": _db(theory),
        "rho_b_prime": float(report.rho_b_prime),
        "verdict": report.verdict,
        "csv": csv_name,
    }


def _check_finite_theory(value, label):
    if value is not None and not math.isfinite(value):
        raise NumericalFailure(f"{label}: theory MSD is not finite")


def run_simulation(cfg: ScenarioConfig, out_dir: Path) -> dict:
    """Monte Carlo for every algorithm; writes CSVs, stability JSON and summary.json."""
    spec = cfg.run_spec()
    reports = {a.label: stability_report(a, cfg.ensemble, cfg.topology) for a in cfg.algorithms}
    # no steady state to predict when the mean recursion is unstable
    theory = {
        a.label: theory_msd_for(a, cfg.ensemble, cfg.topology) if reports[a.label].verdict == "stable" else None
        for a in cfg.algorithms
    }
    for label, value in theory.items():
        _check_finite_theory(value, label)
    log.info("simulating %s: %d algorithms, %d trials, T=%d", cfg.name, len(cfg.algorithms),
             spec.trials, spec.horizon)
    curves = monte_carlo(spec)

    out_dir.mkdir(parents=True, exist_ok=True)
    algos = {}
    for a in cfg.algorithms:
        csv_name = f"{a.label}.csv"
        write_curve_csv(out_dir / csv_name, curves[a.label], theory[a.label])
        algos[a.label] = _algorithm_summary(curves[a.label], reports[a.label], theory[a.label], csv_name)
        _write_json(out_dir / f"stability_{a.label}.json", reports[a.label].to_dict())
    summary = {
        "scenario": cfg.name,
        "seed": cfg.seed,
        "trials": spec.trials,
        "horizon": spec.horizon,
        "tail_window": spec.tail_window,
        "init": spec.init,
        "algorithms": algos,
    }
    validate_summary(summary)
    _write_json(out_dir / "summary.json", summary)
    for label, s in algos.items():
        state = "diverged" if s["diverged"] else f"{s['steady_state_msd_db']:.2f} dB"
        log.info("  %-22s %s", label, state)
    return summary


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, allow_nan=False) + "\n")


def run_stability(cfg: ScenarioConfig, out_dir: Path) -> dict:
    reports = {a.label: stability_report(a, cfg.ensemble, cfg.topology).to_dict() for a in cfg.algorithms}
    out_dir.mkdir(parents=True, exist_ok=True)
    for label, rep in reports.items():
        _write_json(out_dir / f"stability_{label}.json", {k: _num(v) if isinstance(v, float) else v
                                                        for k, v in rep.items()})
    return reports


def case_configs(case: str, seed: int, trials: int | None, horizon: int | None) -> dict[str, ScenarioConfig]:
    """Canonical scenario configs of a reproduction case, keyed by sub-directory ('' for none)."""
    library, T, n = _CASE_RUNS[case]
    scen = scenario_library(library, seed=seed)
    base = ScenarioConfig(
        name=library,
        topology=scen.topology,
        ensemble=scen.ensemble,
        algorithms=scen.configs,
        horizon=T if horizon is None else horizon,
        trials=n if trials is None else trials,
        seed=seed,
        init=scen.init,
        library=library,
        library_seed=seed,
    )
    if case != "fig2":
        return {"": base}
    out = {}
    for mu in FIG2_STEPS:
        configs = standard_configs(scen.topology, mu, etas=(0.0, 20.0))
        out[f"mu_{mu:g}"] = replace(base, name=f"{library}_mu_{mu:g}", algorithms=configs)
    return out


def eta_sweep_table(seed: int, mu: float | None = None, etas=ETA_GRID) -> tuple[list[str], list[list[float]]]:
    """Theory MSD (dB) against eta on the N=100 scenario, plus flat reference lines.

    The AL step-size margin ``rho(B')`` comes from the closed-form spectrum.
    """
    scen = scenario_library("eta_sweep_n100", seed=seed, mu=mu)
    ens, topo, mu = scen.ensemble, scen.topology, scen.mu
    split = spectral_split(topo)
    L = topo.laplacian
    flat = {m: 10 * math.log10(msd_theory(ens, L, mu, method=m)) for m in ("diffusion", "consensus", "noncoop", "ah")}
    Ru = ens.common_covariance()
    header = ["eta", "al_msd_db", "al_large_eta_msd_db", "al_rho_b_prime",
              "diffusion_msd_db", "consensus_msd_db", "noncoop_msd_db", "ah_msd_db"]
    rows = []
    for eta in etas:
        al = msd_theory(ens, L, mu, eta, method="primal_dual", split=split)
        large = msd_theory(ens, L, mu, eta, method="al_large_eta", split=split) if eta > 0 else float("nan")
        lam = closed_form_eigenvalues(Ru, split.laplacian_eigs, eta)
        rho = float(np.max(np.abs(1.0 - mu * lam)))
        rows.append([eta, 10 * math.log10(al), 10 * math.log10(large) if eta > 0 else float("nan"), rho,
                     flat["diffusion"], flat["consensus"], flat["noncoop"], flat["ah"]])
    return header, rows


def _write_table(path: Path, header, rows) -> None:
    lines = [",".join(header)] + [",".join("" if math.isnan(v) else repr(float(v)) for v in r) for r in rows]
    path.write_text("\n".join(lines) + "\n")


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    out = Path(args.out) if args.out else Path(cfg.output_dir) if cfg.output_dir else default_out_dir()
    run_simulation(cfg, out)
    return 0


def cmd_stability(args) -> int:
    cfg = load_config(args.config)
    out = Path(args.out) if args.out else Path(cfg.output_dir) if cfg.output_dir else default_out_dir()
    for label, rep in run_stability(cfg, out).items():
        log.info("%-22s rho=%.6g verdict=%s mu_bar=%s", label, rep["rho_b_prime"], rep["verdict"], rep["mu_bar"])
    return 0


def cmd_reproduce(args) -> int:
    out = Path(args.out) if args.out else default_out_dir() / args.case
    if args.case == "eta_sweep":
        header, rows = eta_sweep_table(args.seed)
        out.mkdir(parents=True, exist_ok=True)
        _write_table(out / "eta_sweep.csv", header, rows)
        if args.emit_config:
            log.warning("eta_sweep is theory only; no config emitted")
        return 0
    for sub, cfg in case_configs(args.case, args.seed, args.trials, args.horizon).items():
        target = out / sub if sub else out
        run_simulation(cfg, target)
        if args.emit_config:
            (target / "config.ini").write_text(emit_config(cfg))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="netadapt", description=__doc__.splitlines()[0])
    p.add_argument("-q", "--quiet", action="store_true", help="only print warnings and errors")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="Monte Carlo learning curves for a config file")
    s.add_argument("config")
    s.add_argument("--out", help=f"output directory (default: [output] dir, ${OUT_ENV} or ./results)")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("stability", help="stability report per algorithm of a config file")
    s.add_argument("config")
    s.add_argument("--out")
    s.set_defaults(func=cmd_stability)

    s = sub.add_parser("reproduce", help="run a canonical experiment")
    s.add_argument("case", choices=CASES)
    s.add_argument("--seed", type=int, default=2015)
    s.add_argument("--trials", type=int)
    s.add_argument("--horizon", type=int)
    s.add_argument("--out", help=f"output directory (default: ${OUT_ENV}/<case> or ./results/<case>)")
    s.add_argument("--emit-config", action="store_true", help="also write config.ini next to each run")
    s.set_defaults(func=cmd_reproduce)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(message)s",
                        stream=sys.stderr)
    try:
        return args.func(args)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return 2
    except (NumericalFailure, np.linalg.LinAlgError, FloatingPointError, RuntimeError) as exc:
        log.error("numerical failure: %s", exc)
        return 3


if __name__ == "__main__":
    sys.exit(main())
