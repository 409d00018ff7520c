"""Command-line entry point: ``sglmidas {simulate,fit,nowcast,evaluate,example}``.

Exit codes: 0 success, 1 invalid input or configuration, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import shutil
import sys
from dataclasses import replace
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .design import CovariateSpec, DesignSpec, build_design, design_audit
from .dictionary import DictionarySpec
from .evaluation import BASELINES, evaluate, rolling_nowcast, selection_fractions
from .simulation import SimulationScenario, run_scenario
from .solver import PenaltySpec, SolverOptions, fit as sg_fit, lambda_max
from .timeseries import HighFrequencySeries, LowFrequencySeries, MixedFrequencyPanel, validate_panel
from .tuning import CvPlan, fit_cv

log = logging.getLogger("sglmidas")

HORIZON_FLAGS = {"2m": ("2-month", 2), "1m": ("1-month", 1), "eoq": ("end-of-quarter", 0)}
EXAMPLE_FILES = ("example_config.json", "example_target.csv", "example_covariates.csv", "baseline_scenario.json")


class InputError(Exception):
    """Bad file, flag or configuration (exit code 1)."""


class NumericalError(Exception):
    """Solver or linear-algebra failure (exit code 2)."""


# ---------------------------------------------------------------- reading


def _rows(path: Path, required: tuple[str, ...]):
    """Yield (line number, row dict) from a CSV with the given header columns."""
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from None
    with fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in required if c not in header]
        if missing:
            raise InputError(f"{path}:1: missing column(s) {', '.join(missing)}")
        for row in reader:
            if None in row or any(v is None for v in row.values()):
                raise InputError(f"{path}:{reader.line_num}: wrong number of fields")
            yield reader.line_num, row


def _int(path, line, value, what):
    try:
        return int(value)
    except ValueError:
        raise InputError(f"{path}:{line}: {what} {value!r} is not an integer") from None


def _float(path, line, value, what):
    try:
        out = float(value)
    except ValueError:
        raise InputError(f"{path}:{line}: {what} {value!r} is not a number") from None
    if not math.isfinite(out):
        raise InputError(f"{path}:{line}: {what} must be finite")
    return out


def read_target(path: Path, name: str = "y") -> LowFrequencySeries:
    """Target CSV ``period,value[,label]``; trailing empty values mark unobserved periods."""
    periods, values, labels = [], [], []
    pending_gap = None
    for line, row in _rows(path, ("period", "value")):
        per = _int(path, line, row["period"], "period")
        if periods and per != periods[-1] + 1:
            raise InputError(f"{path}:{line}: period {per} does not follow {periods[-1]}")
        if row["value"].strip() == "":
            pending_gap = pending_gap or line
            periods.append(per)
            values.append(math.nan)
        else:
            if pending_gap:
                raise InputError(f"{path}:{pending_gap}: missing value before the end of the sample")
            values.append(_float(path, line, row["value"], "value"))
            periods.append(per)
        labels.append(row.get("label") or str(per))
    n = sum(1 for v in values if not math.isnan(v))
    if n == 0:
        raise InputError(f"{path}: no observed target values")
    return LowFrequencySeries(np.array(values[:n]), first_period=periods[0], labels=tuple(labels[:n]), name=name)


def read_covariates(path: Path, meta: dict) -> dict[str, HighFrequencySeries]:
    """Long CSV ``series_id,period,subperiod,value``; each series must be gap-free."""
    data: dict[str, list] = {}
    for line, row in _rows(path, ("series_id", "period", "subperiod", "value")):
        sid = row["series_id"]
        per = _int(path, line, row["period"], "period")
        sub = _int(path, line, row["subperiod"], "subperiod")
        val = _float(path, line, row["value"], "value")
        data.setdefault(sid, []).append((per, sub, val, line))
    out = {}
    for sid, obs in data.items():
        if sid not in meta:
            continue
        m = int(meta[sid].get("m", 1))
        obs.sort()
        first_per, first_sub = obs[0][0], obs[0][1]
        for k, (per, sub, _, line) in enumerate(obs):
            if not 1 <= sub <= m:
                raise InputError(f"{path}:{line}: subperiod {sub} outside 1..{m} for {sid}")
            expect = (first_per - 1) * m + first_sub - 1 + k
            if (per - 1) * m + sub - 1 != expect:
                raise InputError(f"{path}:{line}: {sid} has a gap or duplicate before period {per}.{sub}")
        md = meta[sid]
        out[sid] = HighFrequencySeries(
            sid, np.array([o[2] for o in obs]), m=m, first_period=first_per, first_subperiod=first_sub,
            delay=int(md.get("delay", 0)), lead=int(md.get("lead", m)), q=int(md.get("q", 1)),
            category=md.get("category"),
        )
    missing = sorted(set(meta) - set(out))
    if missing:
        raise InputError(f"{path}: no observations for configured series {', '.join(missing)}")
    return out


CONFIG_KEYS = {"target", "covariates", "series", "ar_lags", "dictionary", "aggregation", "include_intercept",
               "penalize_intercept", "group_mode", "ar_grouping", "cv", "window", "horizons", "seed",
               "output", "impute_zero", "lambda", "alpha"}
SERIES_KEYS = {"m", "delay", "lead", "leads", "q", "degree", "n_basis", "family", "a_param", "b_param",
               "aggregation", "category", "n_lags"}
CV_KEYS = {"n_folds", "alpha_grid", "lambda_grid", "n_lambda", "lambda_min_ratio", "embargo", "r2_stop"}


class Project:
    """Parsed project configuration with data loaded and validated."""

    def __init__(self, path: Path):
        self.path = Path(path)
        try:
            self.raw = json.loads(self.path.read_text())
        except OSError as exc:
            raise InputError(f"{path}: {exc.strerror}") from None
        except json.JSONDecodeError as exc:
            raise InputError(f"{path}:{exc.lineno}: invalid JSON ({exc.msg})") from None
        cfg = self.raw
        self._check_keys(cfg, CONFIG_KEYS, "configuration")
        for key in ("target", "covariates", "series"):
            if key not in cfg:
                raise InputError(f"{path}: missing required key {key!r}")
        self.series_meta = cfg["series"]
        for name, md in self.series_meta.items():
            self._check_keys(md, SERIES_KEYS, f"series {name!r}")
        self._check_keys(cfg.get("cv", {}), CV_KEYS, "cv section")
        base = self.path.parent
        self.target_path = base / cfg["target"]
        self.covariates_path = base / cfg["covariates"]
        target = read_target(self.target_path)
        covs = read_covariates(self.covariates_path, self.series_meta)
        self.panel = MixedFrequencyPanel(target, tuple(covs[n] for n in self.series_meta),
                                         impute_zero=bool(cfg.get("impute_zero", False)))
        problems = [v for v in validate_panel(self.panel) if "history" not in v.message]
        if problems:
            raise InputError("; ".join(str(v) for v in problems))

    def _check_keys(self, d, allowed, where):
        if not isinstance(d, dict):
            raise InputError(f"{self.path}: {where} must be an object")
        unknown = sorted(set(d) - allowed)
        if unknown:
            raise InputError(f"{self.path}: unknown key(s) in {where}: {', '.join(unknown)}")

    def design(self, horizon: str | None = None) -> DesignSpec:
        cfg = self.raw
        dflt = cfg.get("dictionary", {})
        covs = []
        for name, md in self.series_meta.items():
            family = md.get("family", dflt.get("family", "legendre"))
            if "n_basis" in md or "n_basis" in dflt:
                n_basis = int(md.get("n_basis", dflt.get("n_basis")))
            else:
                n_basis = int(md.get("degree", dflt.get("degree", 2))) + 1
            dic = DictionarySpec(family, n_basis, float(md.get("a_param", dflt.get("a_param", 0.0))),
                                 float(md.get("b_param", dflt.get("b_param", 0.0))))
            m = int(md.get("m", 1))
            lead = int(md.get("lead", m))
            if horizon is not None:
                leads = md.get("leads", {})
                lead = int(leads[horizon]) if horizon in leads else max(lead - HORIZON_FLAGS[horizon][1], 0)
            covs.append(CovariateSpec(name, dic, md.get("aggregation", cfg.get("aggregation", "midas")),
                                      q=int(md.get("q", 1)), lead=lead, delay=int(md.get("delay", 0)),
                                      n_lags=md.get("n_lags"), category=md.get("category")))
        return DesignSpec(
            ar_lags=int(cfg.get("ar_lags", 1)), covariates=tuple(covs),
            include_intercept=bool(cfg.get("include_intercept", True)),
            penalize_intercept=bool(cfg.get("penalize_intercept", False)),
            group_mode=cfg.get("group_mode", "per-covariate"), ar_grouping=cfg.get("ar_grouping", "joint"),
        )

    def plan(self) -> CvPlan:
        cv = dict(self.raw.get("cv", {}))
        if "alpha_grid" in cv:
            cv["alpha_grid"] = tuple(cv["alpha_grid"])
        if "lambda_grid" in cv:
            cv["lambda_grid"] = tuple(cv["lambda_grid"])
        return CvPlan(**cv)

    def category_map(self, spec: DesignSpec) -> dict[str, str]:
        if spec.group_mode == "per-category":
            return {f"category:{c.category}": c.category for c in spec.covariates}
        return {c.name: (c.category or "uncategorized") for c in spec.covariates}


# ---------------------------------------------------------------- writing


def _num(v) -> str:
    v = float(v)
    return "" if math.isnan(v) else repr(v)


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _manifest(out: Path, command: str, **fields) -> None:
    _write_json(out / "manifest.json", {"command": command, "version": __version__, **fields})


def write_project(panel: MixedFrequencyPanel, directory, series: dict | None = None, unobserved: int = 0,
                  **config) -> Path:
    """Write ``panel`` as ``target.csv``, ``covariates.csv`` and ``config.json``; returns the config path.

    The last ``unobserved`` target values are written empty. ``series`` entries
    are merged into every covariate's metadata; ``config`` adds top-level keys.
    """
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    y = panel.target
    n_obs = len(y) - unobserved
    _write_csv(out / "target.csv", ["period", "value"],
               [(p, _num(v) if i < n_obs else "") for i, (p, v) in enumerate(zip(y.periods, y.values))])
    _write_csv(out / "covariates.csv", ["series_id", "period", "subperiod", "value"],
               [(s.name, s.first_period + (s.first_subperiod - 1 + i) // s.m, (s.first_subperiod - 1 + i) % s.m + 1,
                 _num(v)) for s in panel.covariates for i, v in enumerate(s.values)])
    meta = {s.name: {"m": s.m, "lead": s.lead, "delay": s.delay, "q": s.q, "category": s.category,
                     **(series or {})} for s in panel.covariates}
    cfg = {"target": "target.csv", "covariates": "covariates.csv", "series": meta, **config}
    path = out / "config.json"
    path.write_text(json.dumps(cfg, indent=2) + "\n")
    return path


def _outdir(args, project: Project | None = None) -> Path:
    out = args.out or (project.raw.get("output") if project else None)
    if out is None:
        raise InputError("no output directory: pass --out")
    if project is not None and args.out is None:
        out = project.path.parent / out
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------- commands


def cmd_simulate(args) -> int:
    try:
        raw = json.loads(Path(args.scenario).read_text())
    except OSError as exc:
        raise InputError(f"{args.scenario}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{args.scenario}:{exc.lineno}: invalid JSON ({exc.msg})") from None
    if args.replications is not None:
        if args.replications < 1:
            raise InputError("replications must be ≥ 1")
        raw["replications"] = args.replications
    if args.seed is not None:
        raw["seed"] = args.seed
    try:
        scenario = SimulationScenario.from_dict(raw)
    except (TypeError, ValueError) as exc:
        raise InputError(str(exc).replace(">= 1", "≥ 1")) from None
    out = _outdir(args)
    result = run_scenario(scenario, n_jobs=args.jobs)
    (out / "results.csv").write_text(result.to_csv())
    _manifest(out, "simulate", scenario=scenario.to_dict(), seed=scenario.seed,
              replications=scenario.replications, outputs=["results.csv"])
    print(f"wrote {out / 'results.csv'}")
    return 0


def _coef_rows(problem, beta):
    group_of = {}
    for name, idx in problem.groups:
        for j in idx:
            group_of[int(j)] = name
    return [(problem.column_names[j], group_of[j], _num(beta[j])) for j in range(problem.p)]


def cmd_fit(args) -> int:
    project = Project(args.config)
    spec = project.design()
    problem = build_design(project.panel, spec)
    out = _outdir(args, project)
    summary = {"rows": problem.T, "columns": problem.p, "first_period": int(problem.periods[0]),
               "last_period": int(problem.periods[-1])}
    if args.cv:
        plan = project.plan()
        result, fit = fit_cv(problem, plan)
        rows = [(_num(a), _num(result.lambdas[i, l]), _num(result.cv_error[i, l]), _num(result.cv_se[i, l]))
                for i, a in enumerate(result.alphas) for l in range(result.lambdas.shape[1])]
        _write_csv(out / "cv_surface.csv", ["alpha", "lambda", "cv_error", "cv_std_error"], rows)
        summary["cv"] = {"best_alpha": result.best[0], "best_lambda": result.best[1],
                         "one_se_alpha": result.one_se[0], "one_se_lambda": result.one_se[1],
                         "n_folds": plan.n_folds}
    else:
        alpha = args.alpha if args.alpha is not None else project.raw.get("alpha")
        lam = args.lam if args.lam is not None else project.raw.get("lambda")
        if alpha is None or lam is None:
            raise InputError("fit needs --lambda and --alpha, or --cv")
        try:
            penalty = PenaltySpec(float(lam), float(alpha))
        except ValueError as exc:
            raise InputError(str(exc)) from None
        fit = sg_fit(problem, penalty, SolverOptions())
    summary.update({
        "lambda": fit.lam, "alpha": fit.alpha, "objective": fit.objective, "iterations": fit.iterations,
        "converged": fit.converged, "kkt_residual": fit.kkt_residual,
        "lambda_max": lambda_max(problem, fit.alpha),
        "active_set": [problem.column_names[j] for j in fit.active_set],
        "active_groups": list(fit.active_groups),
    })
    _write_csv(out / "coefficients.csv", ["column", "group", "coefficient"], _coef_rows(problem, fit.beta))
    _write_json(out / "fit.json", summary)
    _write_json(out / "design_audit.json", design_audit(project.panel, spec, problem.periods))
    _manifest(out, "fit", config=project.raw, config_path=str(project.path), cv=bool(args.cv),
              alpha=args.alpha, lam=args.lam, seed=project.raw.get("seed"))
    if not fit.converged:
        raise NumericalError(f"solver did not converge: kkt residual {fit.kkt_residual:.3e} after "
                             f"{fit.iterations} sweeps (outputs written to {out})")
    print(f"wrote {out / 'coefficients.csv'}")
    return 0


def cmd_nowcast(args) -> int:
    project = Project(args.config)
    horizon = args.horizon
    spec = project.design(horizon)
    window = args.window if args.window is not None else project.raw.get("window")
    if window is None:
        raise InputError("nowcast needs --window (or 'window' in the config)")
    out = _outdir(args, project)
    label = HORIZON_FLAGS[horizon][0]
    records = rolling_nowcast(project.panel, spec, int(window), project.plan(), method=args.model,
                              horizon=label)
    _write_csv(out / "forecasts.csv", ["origin", "target_period", "horizon", "prediction", "realized", "error",
                                        "alpha", "lambda"],
               [(r.origin, r.target_period, r.horizon, _num(r.prediction), _num(r.realized), _num(r.error),
                 _num(r.alpha), _num(r.lam)) for r in records])
    cats = project.category_map(spec)
    fracs = selection_fractions(records, cats)
    names = sorted(set(cats.values()))
    _write_csv(out / "selection.csv", ["origin"] + names,
               [[r.origin] + [_num(f[c]) for c in names] for r, f in zip(records, fracs)])
    periods = np.array([r.target_period for r in records])
    _write_json(out / "design_audit.json", {"horizon": label, "window": int(window),
                                            "covariates": design_audit(project.panel, spec, periods)})
    _manifest(out, "nowcast", config=project.raw, config_path=str(project.path), horizon=horizon,
              window=int(window), model=args.model, seed=project.raw.get("seed"))
    print(f"wrote {len(records)} forecast record(s) to {out / 'forecasts.csv'}")
    return 0


def read_errors(path: Path) -> tuple[list, np.ndarray]:
    origins, errs = [], []
    for line, row in _rows(path, ("error",)):
        origins.append(row.get("origin"))
        v = row["error"].strip()
        errs.append(math.nan if v == "" else _float(path, line, v, "error"))
    return origins, np.array(errs)


def cmd_evaluate(args) -> int:
    path_a, path_b = map(Path, args.errors)
    org_a, ea = read_errors(path_a)
    org_b, eb = read_errors(path_b)
    if ea.size != eb.size:
        raise InputError(f"error files have different lengths ({ea.size} vs {eb.size})")
    if all(o is not None for o in org_a + org_b) and org_a != org_b:
        raise InputError("error files cover different origins")
    report = evaluate({"benchmark": ea, "model": eb}, "benchmark", args.hac_lags, args.small_sample)
    out = _outdir(args)
    dm = report.dm["model"]
    stats_rows = [
        ("n", report.n),
        ("rmse_benchmark", _num(report.rmse["benchmark"])),
        ("rmse_model", _num(report.rmse["model"])),
        ("relative_rmse", _num(report.relative_rmse["model"])),
        ("dm_statistic", _num(dm.statistic)),
        ("dm_p_value", _num(dm.p_value)),
        ("dm_degenerate", int(dm.degenerate)),
        ("hac_lags", dm.hac_lags),
    ]
    _write_csv(out / "evaluation.csv", ["measure", "value"], stats_rows)
    _write_csv(out / "cumsfe.csv", ["index", "cumsfe"],
               [(i, _num(v)) for i, v in enumerate(report.cumsfe["model"])])
    _manifest(out, "evaluate", benchmark=str(path_a), model=str(path_b), hac_lags=args.hac_lags,
              small_sample=bool(args.small_sample))
    print(f"relative RMSE {report.relative_rmse['model']:.6g}, DM {dm.statistic:.6g}")
    return 0


def cmd_example(args) -> int:
    out = _outdir(args)
    src = resources.files("sglmidas") / "data"
    for name in EXAMPLE_FILES:
        with resources.as_file(src / name) as p:
            shutil.copyfile(p, out / name)
    print(f"copied example files to {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sglmidas", description="Sparse-group LASSO MIDAS regressions.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log solver warnings")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run a Monte Carlo scenario")
    p.add_argument("--scenario", required=True, help="scenario JSON file")
    p.add_argument("--replications", type=int, help="override the number of replications")
    p.add_argument("--seed", type=int, help="override the scenario seed")
    p.add_argument("--jobs", type=int, default=1, help="worker processes (results do not depend on it)")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="fit one regression on the full sample")
    p.add_argument("--config", required=True, help="project JSON file")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--cv", action="store_true", help="choose (alpha, lambda) by blocked cross-validation")
    p.add_argument("--lambda", dest="lam", type=float, help="penalty level")
    p.add_argument("--alpha", type=float, help="l1 share of the penalty in [0, 1]")
    p.add_argument("--out", help="output directory (default: config 'output')")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("nowcast", help="rolling-window nowcasts")
    p.add_argument("--config", required=True, help="project JSON file")
    p.add_argument("--horizon", choices=sorted(HORIZON_FLAGS), default="eoq")
    p.add_argument("--window", type=int, help="rolling window length in low-frequency periods")
    p.add_argument("--model", choices=("sglasso",) + BASELINES, default="sglasso",
                   help="estimator (baselines: AR uses the intercept and AR lags only)")
    p.add_argument("--out", help="output directory (default: config 'output')")
    p.set_defaults(func=cmd_nowcast)

    p = sub.add_parser("evaluate", help="compare two forecast error files")
    p.add_argument("--errors", nargs=2, required=True, metavar=("BENCHMARK", "MODEL"),
                   help="CSV files with an 'error' column")
    p.add_argument("--hac-lags", type=int, help="Bartlett lags (default floor(n^(1/3)))")
    p.add_argument("--small-sample", action="store_true", help="Harvey-Leybourne-Newbold correction")
    p.add_argument("--out", default=".", help="output directory")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("example", help="copy the bundled example dataset and configs")
    p.add_argument("--out", required=True, help="destination directory")
    p.set_defaults(func=cmd_example)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR, format="%(levelname)s: %(message)s")
    if args.command == "fit" and args.cv and (args.lam is not None or args.alpha is not None):
        parser.error("--cv cannot be combined with --lambda/--alpha")
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    except np.linalg.LinAlgError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    except (ValueError, KeyError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"error: {msg}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
