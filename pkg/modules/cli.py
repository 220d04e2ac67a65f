"""
Command-line interface: run scenarios and generate new ones

Exit codes: 0 every conclusive check passed, 1 a check failed,
2 usage or validation error, 3 a solver budget was exhausted.
"""
import logging
import sys
from pathlib import Path
from typing import Dict, List, Optional

import click

from modules.approx_solver import ApproxConfig, ApproxResult, refine
from modules.config import Settings, get_settings
from modules.errors import BudgetExceededError, ContractViolation, EvaluationError, ScenarioError
from modules.exact_solver import GridSolver, SolveResult
from modules.functions import describe, max_lipschitz
from modules.report import ReportWriter, build_report
from modules.scenario import TEMPLATES, Scenario, generate as generate_scenario, load, save
from modules.utils import format_point, format_value, parse_stages, parse_sweep
from modules.verifier import (
    VerificationReport, check_approx_guarantee, check_claim1, check_obs3_sweep, verify,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_INVALID = 2
EXIT_BUDGET = 3

DEFAULT_EPSILON = 0.25


def configure_logging(settings: Settings) -> None:
    logging.basicConfig(
        level=getattr(logging, settings.log_level, logging.INFO),
        format='%(asctime)s %(levelname)s %(name)s: %(message)s',
        stream=sys.stderr,
    )


class Pipeline:
    """Runs the requested stages of one scenario"""

    def __init__(self, scenario: Scenario, settings: Settings, resolution=None,
                 epsilon: Optional[float] = None):
        self.scenario = scenario
        self.settings = settings
        self.ensemble, self.truth = scenario.build()
        self.resolution = resolution if resolution is not None else scenario.solver.resolution
        self.epsilon = epsilon if epsilon is not None else (scenario.solver.epsilon or DEFAULT_EPSILON)
        self.solver = GridSolver(resolution=self.resolution, budget=scenario.solver.grid_budget,
                                 settings=settings)
        # L is configuration: the declared honest functions, never the labels
        declared = scenario.solver.lipschitz
        self.lipschitz = declared if declared is not None else max_lipschitz(scenario.honest, scenario.domain)

    def approx_config(self, epsilon: float) -> ApproxConfig:
        return ApproxConfig(epsilon=epsilon, lipschitz=self.lipschitz,
                            max_cells=self.scenario.solver.max_cells, tau_abs=self.scenario.solver.tau_abs)

    def exact(self) -> SolveResult:
        return self.solver.minimize_hf(self.ensemble)

    def approx(self, epsilon: Optional[float] = None) -> ApproxResult:
        return refine(self.ensemble, self.approx_config(epsilon or self.epsilon), settings=self.settings)

    def verify(self, solve: Optional[SolveResult], approx: Optional[ApproxResult]) -> VerificationReport:
        report = verify(self.ensemble, self.truth, self.scenario.name, solve=solve, approx=approx,
                        solver=self.solver, seed=self.scenario.seed or 0, workers=self.settings.workers)
        block = self.scenario.indistinguishability
        if block is not None:
            report.extend(check_obs3_sweep(self.scenario.honest, self.scenario.f, block.V, self.scenario.domain,
                                           r=block.r, margin=block.margin, solver=self.solver))
        return report

    def sweep(self, key: str, values: List[float], report: Optional[VerificationReport]) -> List[Dict]:
        rows = []
        for value in values:
            if key == 'epsilon':
                approx = self.approx(value)
                records = check_approx_guarantee(self.ensemble, self.truth, approx, solver=self.solver)
                guarantee = records[0]
                rows.append({'epsilon': value, 'factor': approx.factor, 'terminated_by': approx.terminated_by,
                             'cells': approx.cell_count, 'h_f_x_bar': approx.value, 'g_f_x_bar': guarantee.lhs,
                             'bound': guarantee.rhs, 'status': guarantee.status})
            else:
                solver = GridSolver(resolution=int(value), budget=self.scenario.solver.grid_budget,
                                    settings=self.settings)
                solve = solver.minimize_hf(self.ensemble)
                records = check_claim1(self.ensemble, self.truth, solver=solver)
                rows.append({'resolution': int(value), 'v_hat': solve.v_hat,
                             'error_bound': solve.certificate.error_bound,
                             'claim1': "pass" if all(r.status == "pass" for r in records) else
                             ",".join(sorted({r.status for r in records}))})
            if report is not None:
                label = f"[{key}={value:g}]"
                for record in records:
                    report.add(type(record)(name=record.name + label, status=record.status, lhs=record.lhs,
                                            rhs=record.rhs, relation=record.relation,
                                            tolerance=record.tolerance, detail=record.detail))
        return rows


@click.group()
@click.version_option("1.0.0", prog_name="robust-minmax")
def cli():
    """Fault-tolerant min-max optimization toolkit"""
    configure_logging(get_settings())


@cli.command()
@click.argument("scenario_file", type=click.Path(path_type=Path, dir_okay=False))
@click.option("--out", "out_dir", type=click.Path(path_type=Path, file_okay=False), default=Path("reports"),
              show_default=True, help="Directory for the report files")
@click.option("--stages", default="exact,approx,verify", show_default=True,
              help="Comma-separated subset of exact, approx, verify")
@click.option("--resolution", type=int, default=None, help="Grid points per axis for exact solving and oracles")
@click.option("--epsilon", type=float, default=None, help="Approximation parameter in (0, 1)")
@click.option("--sweep", "sweep_spec", default=None, help="KEY=start:stop:step over epsilon or resolution")
@click.option("--no-timestamp", is_flag=True, help="Omit generated_at so reports are byte-identical")
@click.option("--pdf", is_flag=True, help="Also write a PDF summary")
@click.option("--curve/--no-curve", default=True, show_default=True,
              help="Write x, Q_1..Q_n, h_f, g_0, g_f samples for one-dimensional scenarios")
def run(scenario_file: Path, out_dir: Path, stages: str, resolution: Optional[int], epsilon: Optional[float],
        sweep_spec: Optional[str], no_timestamp: bool, pdf: bool, curve: bool):
    """Run the exact solver, the partition solver and the verifier on a scenario"""
    settings = get_settings()
    try:
        chosen = parse_stages(stages)
        sweep = parse_sweep(sweep_spec) if sweep_spec else None
        scenario = load(scenario_file)
        pipeline = Pipeline(scenario, settings, resolution=resolution, epsilon=epsilon)

        solve = pipeline.exact() if "exact" in chosen or "verify" in chosen else None
        approx = pipeline.approx() if "approx" in chosen else None
        verification = pipeline.verify(solve, approx) if "verify" in chosen else None
        sweep_rows = pipeline.sweep(*sweep, verification) if sweep else None
    except (ScenarioError, ContractViolation, EvaluationError) as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(EXIT_INVALID)
    except BudgetExceededError as e:
        click.echo(f"budget exhausted: {e}", err=True)
        sys.exit(EXIT_BUDGET)

    writer = ReportWriter(out_dir, scenario.name)
    report = build_report(scenario.to_dict(), chosen, solve=solve, approx=approx, verification=verification,
                          sweep=sweep_rows, timestamp=not no_timestamp,
                          functions=[describe(spec) for spec in pipeline.ensemble.specs])
    path = writer.write_report(report)
    if curve and pipeline.ensemble.domain.dimension == 1:
        writer.write_curve(pipeline.ensemble, pipeline.truth, pipeline.solver.grid_for(pipeline.ensemble.domain))
    if sweep_rows:
        writer.write_sweep(sweep_rows)
    if pdf:
        writer.write_pdf(report)

    if solve is not None:
        click.echo(f"exact:  x_hat={format_point(solve.x_hat)} v_hat={format_value(solve.v_hat)}")
    if approx is not None:
        click.echo(f"approx: x_bar={format_point(approx.x_bar)} h_f={format_value(approx.value)} "
                   f"({approx.terminated_by}, {approx.cell_count} cells)")
    if verification is not None:
        counts = verification.counts()
        click.echo("checks: " + ", ".join(f"{status} {count}" for status, count in counts.items()))
        for record in verification.failures:
            click.echo(f"FAILED {record.name}: {format_value(record.lhs)} {record.relation} "
                       f"{format_value(record.rhs)} (tolerance {format_value(record.tolerance, 3)})")
    click.echo(f"report: {path}")
    sys.exit(EXIT_CHECK_FAILED if verification is not None and not verification.passed else EXIT_OK)


@cli.command(name="generate")
@click.option("--seed", type=int, required=True, help="Random seed")
@click.option("--template", type=click.Choice(sorted(TEMPLATES)), required=True, help="Scenario template")
@click.option("--out", "out_file", type=click.Path(path_type=Path, dir_okay=False), required=True,
              help="Scenario file to write")
def generate_command(seed: int, template: str, out_file: Path):
    """Write a reproducible random scenario"""
    try:
        scenario = generate_scenario(seed, template)
        scenario.build()
    except (ScenarioError, ContractViolation) as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(EXIT_INVALID)
    save(scenario, out_file)
    click.echo(f"scenario: {out_file} (n={scenario.n}, f={scenario.f})")


def main() -> None:
    cli()
