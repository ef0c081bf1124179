"""Command-line experiment driver.

Experiments:
  single       one run (problem, strategy, mu, level)
  saturation   fixed level, sweep over mu; fits exponential decay rates
  convergence  fixed mu, sweep over levels; tabulates convergence rates

Each run writes ``<out>/<experiment>/<problem>/<strategy>/mu<mu>_l<level>.csv``
with header ``t,err_l2,err_h1semi``; suites add the two non-nudged reference
runs (projected and zero initial condition), ``rates.tsv`` / ``gamma.tsv``
summaries, and a ``meta.json`` capturing the full specification. Outputs are
deterministic: identical specs reproduce byte-identical files.
"""
from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from . import __version__, analysis
from .fem import QuadratureConfig
from .problems import PROBLEM_KINDS
from .strategies import MEAN_SCALINGS, STRATEGY_KINDS
from .timestepper import IC_MODES, SOLVER_PATHS, RunRecord, SchemeConfig, run

EXPERIMENTS = ("single", "saturation", "convergence")

SATURATION_MU = {
    "fe_projection": (4.0, 64.0, 1024.0, 16384.0),
    "boundary_projection": (1.0, 4.0, 64.0, 16384.0),
    "mean_value": (1.0, 4.0, 16.0, 16384.0),
}
SATURATION_LEVEL = 6
SATURATION_OMEGA = 0.0
CONVERGENCE_MU = 64.0
CONVERGENCE_OMEGA = float(np.pi)
CONVERGENCE_LEVELS = (4, 5, 6, 7)


@dataclass
class ExperimentSpec:
    experiment: str = "single"
    problem: str = "smooth"
    strategy: str = "fe_projection"
    mu: tuple[float, ...] = ()
    levels: tuple[int, ...] = ()
    omega: float | None = None
    ic: str = "zero"
    out: str = "results"
    window_start: float | None = None
    mean_scaling: str = "y_norm"
    solver: str = "direct"
    coarse_level: int = 2
    jobs: int = 1
    q_bulk: int = 3
    q_err: int = 5
    k_sing: int = 4

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {self.experiment!r}")
        if self.problem not in PROBLEM_KINDS:
            raise ValueError(f"unknown problem {self.problem!r}")
        if self.strategy not in STRATEGY_KINDS:
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if self.ic not in IC_MODES:
            raise ValueError(f"unknown ic mode {self.ic!r}")
        if self.solver not in SOLVER_PATHS:
            raise ValueError(f"unknown solver {self.solver!r}")
        if self.mean_scaling not in MEAN_SCALINGS:
            raise ValueError(f"unknown mean scaling {self.mean_scaling!r}")
        if self.jobs < 1:
            raise ValueError("jobs must be >= 1")
        if not self.mu:
            self.mu = (SATURATION_MU.get(self.strategy, (64.0,))
                       if self.experiment == "saturation" else (CONVERGENCE_MU,))
        if not self.levels:
            self.levels = ((SATURATION_LEVEL,) if self.experiment == "saturation"
                           else CONVERGENCE_LEVELS if self.experiment == "convergence"
                           else (SATURATION_LEVEL,))
        if self.omega is None:
            self.omega = (SATURATION_OMEGA if self.experiment == "saturation"
                          else CONVERGENCE_OMEGA)

    @property
    def quad(self) -> QuadratureConfig:
        return QuadratureConfig(q_bulk=self.q_bulk, q_err=self.q_err,
                                k_sing=self.k_sing)

    def out_dir(self) -> Path:
        return Path(self.out) / self.experiment / self.problem / self.strategy


def format_float(x: float) -> str:
    """Shortest round-trip decimal representation."""
    return repr(float(x))


def format_mu(mu: float) -> str:
    return str(int(mu)) if float(mu).is_integer() else repr(float(mu))


def write_record_csv(path: Path, record: RunRecord) -> None:
    lines = ["t,err_l2,err_h1semi"]
    for t, e2, e1 in zip(record.times, record.err_l2, record.err_h1):
        lines.append(f"{format_float(t)},{format_float(e2)},{format_float(e1)}")
    path.write_text("\n".join(lines) + "\n")


def _scheme_config(spec: ExperimentSpec, mu: float, level: int,
                   strategy: str | None = None, ic: str | None = None,
                   store_final: bool = False) -> SchemeConfig:
    return SchemeConfig(level=level, problem=spec.problem,
                        strategy=spec.strategy if strategy is None else strategy,
                        mu=mu, omega=spec.omega,
                        ic=spec.ic if ic is None else ic,
                        coarse_level=spec.coarse_level, quad=spec.quad,
                        mean_scaling=spec.mean_scaling, solver=spec.solver,
                        store_final=store_final)


def _execute(config: SchemeConfig) -> RunRecord:
    return run(config)


def _run_all(configs: dict[str, SchemeConfig], jobs: int):
    """Run named configs, returning (records, failures)."""
    records: dict[str, RunRecord] = {}
    failures: dict[str, str] = {}
    names = list(configs)
    if jobs > 1 and len(names) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = {name: pool.submit(_execute, configs[name]) for name in names}
            for name in names:
                try:
                    records[name] = futures[name].result()
                except Exception as exc:  # noqa: BLE001 - per-run isolation
                    failures[name] = str(exc)
    else:
        for name in names:
            try:
                records[name] = _execute(configs[name])
            except Exception as exc:  # noqa: BLE001 - per-run isolation
                failures[name] = str(exc)
    return records, failures


def _write_meta(out: Path, spec: ExperimentSpec, failures: dict[str, str]) -> None:
    meta = {"spec": asdict(spec), "version": __version__,
            "window_start": analysis.window_start(
                spec.strategy, spec.problem, spec.window_start),
            "failures": failures}
    out.joinpath("meta.json").write_text(json.dumps(meta, indent=2,
                                                    sort_keys=True) + "\n")


def run_single(spec: ExperimentSpec) -> dict[str, str]:
    out = spec.out_dir()
    out.mkdir(parents=True, exist_ok=True)
    configs = {f"mu{format_mu(mu)}_l{lvl}": _scheme_config(spec, mu, lvl)
               for mu in spec.mu for lvl in spec.levels}
    records, failures = _run_all(configs, spec.jobs)
    for name, rec in records.items():
        write_record_csv(out / f"{name}.csv", rec)
    _write_meta(out, spec, failures)
    return failures


def run_saturation(spec: ExperimentSpec) -> dict[str, str]:
    out = spec.out_dir()
    out.mkdir(parents=True, exist_ok=True)
    level = spec.levels[0]
    configs = {f"mu{format_mu(mu)}_l{level}": _scheme_config(spec, mu, level)
               for mu in spec.mu}
    configs[f"ref_projected_l{level}"] = _scheme_config(
        spec, 0.0, level, strategy="none", ic="projected")
    configs[f"ref_zero_l{level}"] = _scheme_config(
        spec, 0.0, level, strategy="none", ic="zero")
    records, failures = _run_all(configs, spec.jobs)
    for name, rec in records.items():
        write_record_csv(out / f"{name}.csv", rec)

    lines = ["mu\tgamma\twindow_start\twindow_end\tdecayed"]
    for mu in spec.mu:
        name = f"mu{format_mu(mu)}_l{level}"
        if name not in records:
            continue
        fit = analysis.fit_exponential_rate(records[name])
        lines.append("\t".join([
            format_mu(mu), f"{fit.gamma:.2g}" if fit.decayed else "nan",
            format_float(fit.window[0]), format_float(fit.window[1]),
            str(fit.decayed).lower()]))
    out.joinpath("gamma.tsv").write_text("\n".join(lines) + "\n")
    _write_meta(out, spec, failures)
    return failures


def run_convergence(spec: ExperimentSpec) -> dict[str, str]:
    out = spec.out_dir()
    out.mkdir(parents=True, exist_ok=True)
    mu = spec.mu[0]
    configs = {}
    for lvl in spec.levels:
        configs[f"mu{format_mu(mu)}_l{lvl}"] = _scheme_config(spec, mu, lvl)
        configs[f"ref_projected_l{lvl}"] = _scheme_config(
            spec, 0.0, lvl, strategy="none", ic="projected")
        configs[f"ref_zero_l{lvl}"] = _scheme_config(
            spec, 0.0, lvl, strategy="none", ic="zero")
    records, failures = _run_all(configs, spec.jobs)
    for name, rec in records.items():
        write_record_csv(out / f"{name}.csv", rec)

    t_start = analysis.window_start(spec.strategy, spec.problem,
                                    spec.window_start)
    acc, fin_l2, fin_h1 = {}, {}, {}
    for lvl in spec.levels:
        rec = records.get(f"mu{format_mu(mu)}_l{lvl}")
        if rec is None:
            continue
        acc[lvl] = analysis.accumulated_error(
            rec, analysis.window_index(rec, t_start))
        fin_l2[lvl] = float(rec.err_l2[-1])
        fin_h1[lvl] = float(rec.err_h1[-1])
    lines = ["level\tacc_l2\tacc_l2_rate\tfinal_l2\tfinal_l2_rate"
             "\tfinal_h1\tfinal_h1_rate"]
    if acc:
        tables = [analysis.roc_table(d) for d in (acc, fin_l2, fin_h1)]
        for i, lvl in enumerate(tables[0].levels):
            cells = [str(lvl)]
            for tab in tables:
                cells.append(format_float(tab.errors[i]))
                cells.append("-" if i == 0 else f"{tab.rates[i - 1]:.2f}")
            lines.append("\t".join(cells))
    out.joinpath("rates.tsv").write_text("\n".join(lines) + "\n")
    _write_meta(out, spec, failures)
    return failures


def parse_config_file(path: str) -> dict:
    """Flat key=value file; blank lines and #-comments ignored."""
    values = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"malformed config line: {raw!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        values[key.replace("-", "_")] = val
    return values


def _parse_mu_list(text: str) -> tuple[float, ...]:
    return tuple(float(s) for s in text.replace(",", " ").split())


def _parse_level_list(text: str) -> tuple[int, ...]:
    return tuple(int(s) for s in text.replace(",", " ").split())


def build_spec(argv: list[str]) -> ExperimentSpec:
    parser = argparse.ArgumentParser(
        prog="nudgefem",
        description="Nudged heat-equation experiments on [-1,1]^2.")
    parser.add_argument("--config", help="key=value config file; flags override")
    parser.add_argument("--experiment", choices=EXPERIMENTS)
    parser.add_argument("--problem", choices=PROBLEM_KINDS)
    parser.add_argument("--strategy", choices=STRATEGY_KINDS)
    parser.add_argument("--mu", help="nudging parameter list, e.g. '4,64,1024'")
    parser.add_argument("--levels", help="refinement level list, e.g. '4,5,6,7'")
    parser.add_argument("--omega", type=float, help="angular frequency of the data")
    parser.add_argument("--ic", choices=IC_MODES)
    parser.add_argument("--out", help="output directory root")
    parser.add_argument("--window-start", type=float,
                        help="accumulated-error window start time")
    parser.add_argument("--mean-scaling", choices=MEAN_SCALINGS)
    parser.add_argument("--solver", choices=SOLVER_PATHS)
    parser.add_argument("--coarse-level", type=int)
    parser.add_argument("--jobs", type=int, help="max concurrent runs")
    parser.add_argument("--q-bulk", type=int)
    parser.add_argument("--q-err", type=int)
    parser.add_argument("--k-sing", type=int)
    args = parser.parse_args(argv)

    values: dict = {}
    if args.config:
        values.update(parse_config_file(args.config))
    for key in ("experiment", "problem", "strategy", "mu", "levels", "omega",
                "ic", "out", "window_start", "mean_scaling", "solver",
                "coarse_level", "jobs", "q_bulk", "q_err", "k_sing"):
        flag = getattr(args, key)
        if flag is not None:
            values[key] = flag

    if "mu" in values and isinstance(values["mu"], str):
        values["mu"] = _parse_mu_list(values["mu"])
    if "levels" in values and isinstance(values["levels"], str):
        values["levels"] = _parse_level_list(values["levels"])
    for key in ("omega", "window_start"):
        if key in values and isinstance(values[key], str):
            values[key] = float(values[key])
    for key in ("coarse_level", "jobs", "q_bulk", "q_err", "k_sing"):
        if key in values and isinstance(values[key], str):
            values[key] = int(values[key])
    return ExperimentSpec(**values)


def main(argv: list[str] | None = None) -> int:
    spec = build_spec(sys.argv[1:] if argv is None else argv)
    runner = {"single": run_single, "saturation": run_saturation,
              "convergence": run_convergence}[spec.experiment]
    failures = runner(spec)
    for name, message in sorted(failures.items()):
        print(f"FAILED {name}: {message}", file=sys.stderr)
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
