"""Command-line front end.

Exit codes: 0 success, 1 configuration error (including coverage holes),
2 Monte Carlo estimation failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import config as cfgmod
from . import metrics, montecarlo as mc
from .detection import LocalRule
from .errors import (BoundNotApplicable, ConfigError, CoverageError, EstimationError,
                     UnsupportedModelError)
from .fusion import write_outcomes_csv

EXIT_OK, EXIT_CONFIG, EXIT_ESTIMATION = 0, 1, 2


def _say(msg: str) -> None:
    print(msg, flush=True)


def _prepare(args):
    cfg = cfgmod.load(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.workers is not None:
        if args.workers < 1:
            raise ConfigError("--workers must be at least 1")
        cfg.workers = args.workers
    if args.out is not None:
        cfg.output = args.out
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    partition = cfgmod.build(cfg.deployment)
    return cfg, partition, out


def _resolve_rows(cfg, partition) -> list:
    """Rows from the config, deriving thresholds from (gamma, alpha) targets if needed."""
    if cfg.targets is None:
        return cfg.table_rows()
    constants = metrics.bound_constants(partition, cfg.delta)
    rows = []
    for rule in cfg.rules:
        for gamma in cfg.targets["gamma"]:
            c = None
            if rule != mc.CENTRALIZED:
                try:
                    c = metrics.threshold_for_targets(gamma, cfg.targets["alpha"], constants, rule)
                except BoundNotApplicable as exc:
                    if not cfg.calibrate:
                        raise ConfigError(f"{exc}; set montecarlo.calibrate: true") from None
            if c is None:
                if not cfg.calibrate:
                    raise ConfigError(f"no analytic threshold for {rule}; set montecarlo.calibrate: true")
                cal = mc.calibrate_threshold(rule, partition, gamma, cfg.calibration_tolerance,
                                             seed=cfg.seed, workers=cfg.workers)
                c = cal.c
                _say(f"calibrated {rule} gamma={gamma:g}: c={c:.4f} (ARL2FA {cal.estimate.point:.4g})")
            rows.append(mc.TableRow(rule, c, gamma))
    # freeze the derived thresholds so the resolved config replays them exactly
    cfg.rows = [{"rule": r.procedure, "c": r.c, "target": r.target} for r in rows]
    cfg.targets = None
    return rows


def cmd_partition(cfg, partition, out: Path) -> int:
    partition.to_csv(out / "partition.csv")
    m_arl, family = metrics.minimal_set_constant(partition)
    m_pfi, m_bar = metrics.pfi_constants(partition)
    r = partition.ranges
    _say(f"regions N={partition.n_regions}  r_d={r.r_d:.4g}  r_i={r.r_i:.4g}")
    for region in partition.regions:
        _say(f"  N_{region.region_id} = {{{region.label()}}}  area={region.area:.4f}")
    _say(f"m_arl={m_arl}  minimal_family={sorted(family)}")
    if m_pfi is None:
        _say("m_pfi=n/a  m_bar_pfi=n/a  (no false isolation possible)")
    else:
        _say(f"m_pfi={m_pfi}  m_bar_pfi={m_bar}")
    _say(f"wrote {out / 'partition.csv'}")
    return EXIT_OK


def _table(cfg, partition, rows, metrics_wanted):
    return mc.run_table(partition, rows, cfg.runs, cfg.seed, cfg.horizon, cfg.delay_horizon,
                        cfg.placement, cfg.pfi_placements, metrics_wanted, cfg.workers,
                        cfg.share_paths)


def cmd_run(cfg, partition, out: Path) -> int:
    rows = _resolve_rows(cfg, partition)
    results = _table(cfg, partition, rows, ("arl2fa", "sadd", "pfi"))
    mc.write_csv(out / "table.csv", mc.TABLE_COLUMNS, mc.table_rows(results))
    mc.write_csv(out / "curve.csv", mc.CURVE_COLUMNS, mc.curve_rows(results))
    cfgmod.dump(cfg, out / "resolved_config.yaml")
    for res in results:
        flag = " [biased low]" if res.arl2fa.biased_low else ""
        _say(f"{res.row.procedure:<11} c={res.row.c:<6g} ARL2FA={res.arl2fa.point:.6g} "
             f"[{res.arl2fa.ci_low:.6g}, {res.arl2fa.ci_high:.6g}]{flag}  "
             f"SADD={res.post.sadd.point:.4f} [{res.post.sadd.ci_low:.4f}, {res.post.sadd.ci_high:.4f}]  "
             f"PFI={res.pfi.point:.4g} (upper {res.pfi.ci_high:.4g})")
    _say(f"wrote {out / 'table.csv'} and {out / 'curve.csv'}")
    return EXIT_OK


def cmd_curve(cfg, partition, out: Path) -> int:
    rows = _resolve_rows(cfg, partition)
    results = _table(cfg, partition, rows, ("arl2fa", "sadd"))
    points = mc.curve_rows(results)
    mc.write_csv(out / "curve.csv", mc.CURVE_COLUMNS, points)
    cfgmod.dump(cfg, out / "resolved_config.yaml")
    for p in points:
        _say(f"{p['rule']:<11} log10_arl2fa={p['log10_arl2fa']:.4f} sadd={p['sadd']:.4f}")
    _say(f"wrote {out / 'curve.csv'}")
    return EXIT_OK


def cmd_bounds(cfg, partition, out: Path) -> int:
    rows = _resolve_rows(cfg, partition)
    constants = metrics.bound_constants(partition, cfg.delta)
    report = []
    for row in rows:
        if row.procedure == mc.CENTRALIZED:
            continue
        report += metrics.bound_rows(constants, [LocalRule(row.procedure)], [row.c])
    metrics.write_bounds_csv(out / "bounds.csv", report)
    _say(f"kl_unit={constants.kl_unit:.4g}  m_arl={constants.m_arl}  m_pfi={constants.m_pfi}  "
         f"m_bar_pfi={constants.m_bar_pfi}  xi={constants.xi:g}  omega={constants.omega0_lower:.4g}")
    for r in report:
        _say(f"{r['rule']:<5} c={r['c']:<6g} arl2fa_bound={r['arl2fa_bound']:.4g} "
             f"pfi_bound={r['pfi_bound']:.4g} sadd_bound={r['sadd_bound']:.4g} {r['vacuous_flags']}")
    _say(f"wrote {out / 'bounds.csv'}")
    return EXIT_OK


def cmd_trace(cfg, partition, out: Path) -> int:
    rows = _resolve_rows(cfg, partition)
    tr = cfg.trace
    if tr["region"] is None:
        scen = mc.Scenario(seed=cfg.seed, horizon=tr["horizon"])
        cover = None
    else:
        if tr["region"] > partition.n_regions:
            raise ConfigError(f"trace.region {tr['region']} exceeds the {partition.n_regions} regions")
        site = mc.event_sites(partition, tr["placement"])[tr["region"] - 1]
        scen = site.scenario(cfg.seed, tr["horizon"])
        cover = site.cover
    records = []
    sets = partition.sets
    for row in rows:
        batch = mc.simulate(partition, {row.procedure: row.c}, scen, tr["runs"], cfg.workers)
        taus, labels = batch.tau(row.procedure), batch.isolated(row.procedure)
        for t, (tau, lab) in enumerate(zip(taus, labels)):
            censored = tau == 0
            false_iso = "" if censored or cover is None else int(not sets[lab - 1] <= cover)
            records.append({"trial_id": t, "rule": row.procedure, "c": row.c,
                            "tau": "" if censored else int(tau), "censored_flag": int(censored),
                            "isolated_region": "" if censored else int(lab),
                            "false_isolation_flag": false_iso})
    write_outcomes_csv(out / "trace.csv", records)
    cfgmod.dump(cfg, out / "resolved_config.yaml")
    _say(f"wrote {len(records)} trial outcomes to {out / 'trace.csv'}")
    return EXIT_OK


COMMANDS = {"partition": cmd_partition, "run": cmd_run, "bounds": cmd_bounds,
            "curve": cmd_curve, "trace": cmd_trace}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wsndetect",
                                     description="Distributed event detection/isolation experiments.")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "partition": "build the detection partition and print its constants",
        "run": "estimate ARL2FA, SADD and PFI for every configured row",
        "bounds": "evaluate the analytic ARL2FA / PFI / SADD bounds",
        "curve": "SADD versus log10 ARL2FA points",
        "trace": "dump per-trial outcomes",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", required=True, metavar="PATH", help="YAML experiment config")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--workers", type=int, default=None, help="worker processes")
        p.add_argument("--out", default=None, metavar="DIR", help="output directory")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg, partition, out = _prepare(args)
        return COMMANDS[args.command](cfg, partition, out)
    except CoverageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConfigError, UnsupportedModelError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except EstimationError as exc:
        print(f"estimation failed: {exc}", file=sys.stderr)
        return EXIT_ESTIMATION


if __name__ == "__main__":
    sys.exit(main())
