"""Scenario runner: one subcommand per pipeline, reports and field files."""

import argparse
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np
import polars as pl
from rich.console import Console
from rich.table import Table

from divsurgeon.calibration import chi_cfg, rotation_generator, unit_domain
from divsurgeon.constructors import build_field, build_map, build_target
from divsurgeon.divsolve.chain import fit_chain
from divsurgeon.divsolve.operator import DivergenceInverse, measure_stability
from divsurgeon.divsolve.samples import random_admissible
from divsurgeon.errors import DivsurgeonError, ObstructionError, ScenarioError
from divsurgeon.grid.calculus import divergence, jacobian
from divsurgeon.grid.domain import Domain, VectorField
from divsurgeon.grid.regions import Annulus, Band, Box, Region
from divsurgeon.linearize import LinearizeRequest, linearize_field, linearize_sweep
from divsurgeon.logger import logger, set_log_level
from divsurgeon.norms import cr_norm, operator_norm
from divsurgeon.pasting.obstruction import check_obstruction
from divsurgeon.pasting.paste import paste, scaling_sweep
from divsurgeon.pasting.regions import PasteRegions, derive_regions
from divsurgeon.pasting.smoothing import extend_regular, smooth_global, smoothing_residual
from divsurgeon.storage.field_store import Stored, export_csv, read_field, write_field, write_report
from divsurgeon.commands.scenario import OPERATIONS, Scenario, load_scenario
from divsurgeon.config import get_settings
from divsurgeon.verify.estimates import check_norm_sandwich
from divsurgeon.volmaps.diffeo import DiffeoGrid
from divsurgeon.volmaps.franks import (
    derivative_at_origin,
    franks_linearize,
    franks_sweep,
    unimodular_target,
)
from divsurgeon.volmaps.moser import measure_transport, prescribed_jacobian

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_OBSTRUCTED = 2

# Relative error allowed between vol φ(R) and ∫_R θ
TRANSPORT_TOLERANCE = 0.01
LINEARITY_TOLERANCE = 1e-10

# Boxes straddling the default Moser shell
TRANSPORT_BOXES = (
    Box((0.3, -0.1), (0.6, 0.1)),
    Box((-0.6, -0.1), (-0.3, 0.1)),
    Box((-0.1, 0.3), (0.1, 0.6)),
    Box((-0.1, -0.6), (0.1, -0.3)),
    Box((0.25, 0.25), (0.5, 0.5)),
)

# Traceless default direction for A = Dv(x) + δ·D
HYPERBOLIC = np.array([[1.0, 0.0], [0.0, -1.0]])


@dataclass
class Outcome:
    """What a pipeline produced: numbers, checks, fields and tables."""

    report: dict[str, float] = field(default_factory=dict)
    checks: dict[str, bool] = field(default_factory=dict)
    obstructed: bool = False
    outputs: dict[str, Stored] = field(default_factory=dict)
    tables: dict[str, pl.DataFrame] = field(default_factory=dict)
    chain: Optional[str] = None

    @property
    def exit_code(self) -> int:
        if self.obstructed:
            return EXIT_OBSTRUCTED
        return EXIT_OK if all(self.checks.values()) else EXIT_ERROR


@dataclass
class RunContext:
    scenario: Scenario
    domain: Domain
    rng: np.random.Generator
    fields: dict[str, VectorField]
    regions: dict[str, Region]


def build_fields(
    scenario: Scenario, domain: Domain, rng: np.random.Generator
) -> dict[str, VectorField]:
    """Every scenario field in file order, bases added in."""
    built: dict[str, VectorField] = {}

    def resolve(label: str, trail: tuple[str, ...]) -> VectorField:
        if label in built:
            return built[label]
        if label in trail:
            raise ScenarioError(f"Field bases form a cycle: {' → '.join((*trail, label))}")
        spec = scenario.fields[label]
        value = build_field(domain, spec.tag, spec.params, rng, scenario.base_dir)
        if spec.base is not None:
            value = resolve(spec.base, (*trail, label)) + value
        built[label] = value
        return value

    for label in scenario.fields:
        resolve(label, ())
    return built


def _context(scenario: Scenario, resolution: Optional[int], seed: Optional[int]) -> RunContext:
    domain = scenario.domain.build(resolution)
    rng = np.random.default_rng(scenario.seed if seed is None else seed)
    return RunContext(
        scenario=scenario,
        domain=domain,
        rng=rng,
        fields=build_fields(scenario, domain, rng),
        regions={label: spec.build() for label, spec in scenario.regions.items()},
    )


def _paste_regions(ctx: RunContext) -> PasteRegions:
    regions = derive_regions(ctx.regions["K"], ctx.regions["U"], ctx.domain)
    logger.debug(f"🗺️ Regions:\n{regions.describe()}")
    return regions


def _region_entries(regions: PasteRegions) -> dict[str, float]:
    return {
        "regions.gap": regions.gap,
        "regions.components": float(regions.certificate.components),
        "regions.connected": float(regions.connected),
    }


def _spread(values: list[float]) -> float:
    top = max(values)
    return (top - min(values)) / top if top > 0 else 0.0


def run_paste(ctx: RunContext) -> Outcome:
    params = ctx.scenario.params
    X, Y = ctx.fields["X"], ctx.fields["Y"]
    regions = _paste_regions(ctx)
    outcome = Outcome(report=_region_entries(regions))
    try:
        report = paste(X, Y, regions, r=params.r)
    except ObstructionError as e:
        logger.warning(f"🚧 {e}")
        outcome.report.update(e.record.as_mapping())
        outcome.obstructed = True
        return outcome

    outcome.report.update(report.as_mapping())
    outcome.checks.update(report.checks)
    outcome.outputs["Z"] = report.Z
    if report.chain is not None:
        outcome.chain = report.chain.describe(report.transfers)
    if params.t_sweep:
        table = scaling_sweep(X, Y, regions, params.t_sweep, r=params.r)
        outcome.tables["t_sweep"] = table
        outcome.report["sweep.ratio_spread"] = _spread(table["ratio"].to_list())
    return outcome


def run_obstruct(ctx: RunContext) -> Outcome:
    regions = _paste_regions(ctx)
    record = check_obstruction(ctx.fields["X"], ctx.fields["Y"], regions)
    outcome = Outcome(report={**_region_entries(regions), **record.as_mapping()})
    outcome.obstructed = record.obstructed
    if record.obstructed:
        logger.warning(f"🚧 Flux mismatch {record.mismatch:.6e}: no divergence-free extension")
    else:
        logger.info(f"🟢 No flux obstruction (|m| = {record.mismatch:.3e})")
    return outcome


def _default_side(omega: Region) -> float:
    if isinstance(omega, Annulus):
        return 0.8 * (omega.outer - omega.inner)
    if isinstance(omega, Band):
        return 0.45 * omega.width
    raise ScenarioError(f"solve-div needs params.cube_side for Ω = {omega.describe()}")


def run_solve_div(ctx: RunContext) -> Outcome:
    params = ctx.scenario.params
    settings = get_settings()
    omega1, omega = ctx.regions["omega1"], ctx.regions["omega"]
    side = params.cube_side or _default_side(omega)
    chain = fit_chain(omega1, omega, side, ctx.domain)
    operator = DivergenceInverse(chain)
    outside = ~omega.mask(ctx.domain)

    residuals, exact = [], True
    first: Optional[tuple] = None
    for _ in range(params.samples):
        h = random_admissible(ctx.domain, omega1, ctx.rng)
        v = operator(h)
        residuals.append((divergence(v) - h).sup() / h.sup())
        exact = exact and not np.any(v.data[:, outside])
        if first is None:
            first = (h, v)
    assert first is not None
    h1, v1 = first
    h2 = random_admissible(ctx.domain, omega1, ctx.rng)
    a, b = ctx.rng.normal(size=2)
    combined = operator(h1 * a + h2 * b)
    separate = v1 * a + operator(h2) * b
    linearity = float(np.max(np.abs(combined.data - separate.data)))
    scale = max(1.0, combined.sup())

    stability = measure_stability(chain, params.samples, params.r, ctx.scenario.seed)
    outcome = Outcome(
        report={
            "divsolve.cubes": float(len(chain.cubes)),
            "divsolve.cube_side": chain.cubes[0].side(ctx.domain),
            "divsolve.residual": max(residuals),
            "divsolve.linearity": linearity,
            "divsolve.support_exact": float(exact),
            "divsolve.c_meas": stability.constant,
            "divsolve.c_spread": stability.spread,
        },
        checks={
            "residual": max(residuals) <= settings.phi_residual_tolerance,
            "support_exact": exact,
            "linear": linearity <= LINEARITY_TOLERANCE * scale,
        },
        outputs={"h": h1, "v": v1},
        chain=chain.describe(),
    )
    if params.cube_sweep:
        rows = []
        for trial in params.cube_sweep:
            swept = fit_chain(omega1, omega, trial, ctx.domain)
            measured = measure_stability(swept, params.samples, params.r, ctx.scenario.seed)
            rows.append({
                "cube_side": swept.cubes[0].side(ctx.domain),
                "cubes": len(swept.cubes),
                "c_meas": measured.constant,
            })
        outcome.tables["cube_sweep"] = pl.DataFrame(rows)
    return outcome


def _smoothing_width(ctx: RunContext) -> float:
    return ctx.scenario.params.width or 4 * ctx.domain.max_spacing


def run_smooth(ctx: RunContext) -> Outcome:
    params = ctx.scenario.params
    X = ctx.fields["X"]
    width = _smoothing_width(ctx)
    Z = smooth_global(X, width)
    residual = smoothing_residual(X, Z)
    outcome = Outcome(
        report={
            "smooth.width": width,
            "smooth.residual": residual,
            "smooth.distance": cr_norm(Z - X, params.r).value,
            "smooth.distance0": cr_norm(Z - X, 0).value,
        },
        checks={"residual": residual <= get_settings().smooth_residual_tolerance},
        outputs={"Z": Z},
    )
    return outcome


def run_extend(ctx: RunContext) -> Outcome:
    params = ctx.scenario.params
    regions = _paste_regions(ctx)
    report = extend_regular(
        ctx.fields["X"], ctx.fields["Y"], regions, r=params.r, width=params.width
    )
    checks = dict(report.checks)
    checks["bound_holds"] = bool(report.extras["extend.bound_holds"])
    return Outcome(
        report={**_region_entries(regions), **report.as_mapping()},
        checks=checks,
        outputs={"Z": report.Z},
        chain=report.chain.describe(report.transfers) if report.chain else None,
    )


def run_linearize(ctx: RunContext) -> Outcome:
    params = ctx.scenario.params
    v = ctx.fields["v"]
    n = ctx.domain.n
    x = tuple(params.x)
    direction = params.square("direction", n)
    if direction is None:
        direction = HYPERBOLIC if n == 2 else rotation_generator(n)
    A = params.square("matrix", n)
    if A is None:
        base = jacobian(v)[(slice(None), slice(None), *ctx.domain.nearest_node(x))]
        A = base + chi_cfg(n) * params.eps / 2 * direction / operator_norm(direction)
    unit = unit_domain(n)
    report = linearize_field(LinearizeRequest(v, x, A, params.eps, params.support_radius), unit)
    outcome = Outcome(
        report=report.as_mapping(), checks=dict(report.checks), outputs={"Z": report.Z}
    )
    if params.eps_sweep:
        table = linearize_sweep(v, x, direction, params.eps_sweep, params.support_radius, unit)
        outcome.tables["eps_sweep"] = table
        outcome.report["sweep.max_ratio"] = float(table["ratio"].max())
        outcome.checks["sweep_linear"] = float(table["ratio"].max()) <= 1.0
    return outcome


def run_moser(ctx: RunContext) -> Outcome:
    params = ctx.scenario.params
    target = build_target(ctx.domain, {"amplitude": params.amplitude})
    report = prescribed_jacobian(target)
    outcome = Outcome(
        report=report.as_mapping(), checks=dict(report.checks), outputs={"phi": report.phi}
    )
    if ctx.domain.n == 2 and not target.trivial:
        table = measure_transport(
            report.phi, target.theta, TRANSPORT_BOXES, params.transport_log2, ctx.scenario.seed
        )
        table = table.with_columns((pl.col("error") / pl.col("predicted")).alias("relative"))
        worst = float(table["relative"].max())
        outcome.tables["transport"] = table
        outcome.report["moser.transport_error"] = worst
        outcome.checks["transport"] = worst <= TRANSPORT_TOLERANCE
    return outcome


def _map(ctx: RunContext, label: str) -> DiffeoGrid:
    spec = ctx.scenario.maps[label]
    return build_map(ctx.domain, spec.tag, spec.params, ctx.scenario.base_dir)


def run_franks(ctx: RunContext) -> Outcome:
    params = ctx.scenario.params
    f = _map(ctx, "f")
    n = ctx.domain.n
    unit = unit_domain(n)
    direction = params.square("direction", n)
    A = params.square("matrix", n)
    if A is None:
        A = unimodular_target(derivative_at_origin(f), direction, chi_cfg(n) * params.eps0 / 2)
    report = franks_linearize(f, A, params.eps0, unit)
    outcome = Outcome(
        report=report.as_mapping(), checks=dict(report.checks), outputs={"f_A": report.f_A}
    )
    if params.eps_sweep:
        if direction is None:
            raise ScenarioError("eps_sweep for 'franks' needs params.direction")
        table = franks_sweep(f, direction, params.eps_sweep, unit)
        outcome.tables["eps_sweep"] = table
        outcome.report["sweep.max_ratio"] = float(table["ratio"].max())
        outcome.checks["sweep_linear"] = float(table["ratio"].max()) < 1.0
    return outcome


def _named(ctx: RunContext) -> tuple[str, Stored]:
    label = ctx.scenario.params.field
    assert label is not None
    if label in ctx.fields:
        return label, ctx.fields[label]
    return label, _map(ctx, label)


def run_norms(ctx: RunContext) -> Outcome:
    params = ctx.scenario.params
    label, item = _named(ctx)
    target = item.displacement() if isinstance(item, DiffeoGrid) else item
    report = cr_norm(target, params.r, alpha=params.alpha, seed=ctx.scenario.seed)
    return Outcome(
        report=report.as_mapping(prefix=f"norm.{label}"),
        checks={"sandwich": check_norm_sandwich(report, ctx.domain.n)},
    )


def run_dump(ctx: RunContext) -> Outcome:
    label, item = _named(ctx)
    return Outcome(report={"dump.nodes": float(np.prod(ctx.domain.shape))}, outputs={label: item})


PIPELINES: dict[str, Callable[[RunContext], Outcome]] = {
    "paste": run_paste,
    "obstruct": run_obstruct,
    "solve-div": run_solve_div,
    "smooth": run_smooth,
    "extend": run_extend,
    "linearize-field": run_linearize,
    "moser": run_moser,
    "franks": run_franks,
    "norms": run_norms,
    "dump": run_dump,
}


def _verdict(outcome: Outcome) -> str:
    if outcome.obstructed:
        return "OBSTRUCTED"
    return "PASS" if outcome.exit_code == EXIT_OK else "FAIL"


def render_report(
    scenario: Scenario, operation: str, domain: Domain, outcome: Outcome
) -> Console:
    """Rich tables for the console; the recorded text becomes report.txt."""
    console = Console(record=True, width=100, file=sys.stdout)
    console.print(f"[bold]{scenario.name}[/bold] · {operation} · seed {scenario.seed}")
    console.print(domain.describe(), markup=False)

    if outcome.checks:
        checks = Table(title="Checks")
        checks.add_column("check")
        checks.add_column("result")
        for name, ok in outcome.checks.items():
            checks.add_row(name, "[green]pass[/green]" if ok else "[red]fail[/red]")
        console.print(checks)

    numbers = Table(title="Report")
    numbers.add_column("key")
    numbers.add_column("value", justify="right")
    for key, value in outcome.report.items():
        numbers.add_row(key, f"{value:.6g}")
    console.print(numbers)

    for name, frame in outcome.tables.items():
        table = Table(title=name)
        for column in frame.columns:
            table.add_column(column, justify="right")
        for row in frame.iter_rows():
            table.add_row(*(f"{v:.6g}" if isinstance(v, float) else str(v) for v in row))
        console.print(table)

    console.print(f"verdict: {_verdict(outcome)}")
    return console


def write_artifacts(
    outcome: Outcome, console: Console, out_dir: Path, csv: bool, dump_chain: bool
) -> list[Path]:
    """report.txt, report.kv, one DVSF per output and the optional dumps."""
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    text = out_dir / "report.txt"
    text.write_text(console.export_text(), encoding="utf-8")
    written.append(text)
    entries = {**outcome.report, "exit_code": float(outcome.exit_code)}
    written.append(write_report(entries, out_dir / "report.kv"))
    for name, item in outcome.outputs.items():
        written.append(write_field(out_dir / f"{name}.dvsf", item))
        if csv:
            written.append(export_csv(item, out_dir / f"{name}.csv"))
    for name, frame in outcome.tables.items():
        path = out_dir / f"{name}.csv"
        frame.write_csv(path)
        written.append(path)
    if dump_chain and outcome.chain is not None:
        path = out_dir / "chain.txt"
        path.write_text(outcome.chain + "\n", encoding="utf-8")
        written.append(path)
    return written


def run_scenario(
    scenario: Scenario,
    operation: str,
    out_dir: Path,
    resolution: Optional[int] = None,
    seed: Optional[int] = None,
    dump_chain: bool = False,
) -> Outcome:
    """
    Run one pipeline on a scenario and write its artifacts.

    Args:
        scenario: Validated scenario
        operation: Subcommand name
        out_dir: Directory for report.txt, report.kv and field files
        resolution: Replace the scenario's grid resolution
        seed: Replace the scenario's seed
        dump_chain: Also write the cube chain descriptor

    Returns:
        Outcome; its exit_code is 0 when every check passes and 2 on an
        obstruction verdict

    Raises:
        DivsurgeonError: any library error, unchanged
    """
    scenario.require(operation)
    if seed is not None:
        scenario = scenario.model_copy(update={"seed": seed})
    logger.info(f"🚀 Running {operation} on scenario '{scenario.name}'")
    ctx = _context(scenario, resolution, seed)
    outcome = PIPELINES[operation](ctx)
    console = render_report(scenario, operation, ctx.domain, outcome)
    written = write_artifacts(
        outcome, console, out_dir, scenario.params.csv or operation == "dump", dump_chain
    )
    logger.info(f"💾 Wrote {len(written)} file(s) to {out_dir}")
    return outcome


def cmd_dump_file(path: Path, out_dir: Path) -> None:
    """Export a DVSF file as CSV."""
    try:
        item = read_field(path)
        target = export_csv(item, out_dir / f"{path.stem}.csv")
        logger.success(f"✅ Exported {target}")
    except DivsurgeonError as e:
        logger.error(f"❌ {e}")
        sys.exit(EXIT_ERROR)
    sys.exit(EXIT_OK)


def cmd_run(args: argparse.Namespace) -> None:
    """Load the scenario, run the subcommand and exit with its status."""
    try:
        scenario = load_scenario(args.config)
        out_dir = Path(args.out_dir) if args.out_dir else Path("runs") / scenario.name
        outcome = run_scenario(
            scenario,
            args.command,
            out_dir,
            resolution=args.resolution_override,
            seed=args.seed,
            dump_chain=args.dump_chain,
        )
    except DivsurgeonError as e:
        logger.error(f"❌ {args.command} failed: {e}")
        print(f"error: {e}", file=sys.stderr)
        sys.exit(EXIT_ERROR)

    if outcome.obstructed:
        logger.warning("🚧 Obstruction verdict")
    elif outcome.exit_code == EXIT_OK:
        logger.success("✅ All checks passed")
    else:
        failed = [name for name, ok in outcome.checks.items() if not ok]
        logger.error(f"❌ Checks failed: {', '.join(failed)}")
    sys.exit(outcome.exit_code)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="divsurgeon",
        description="Conservative pasting and linearization of divergence-free fields and maps",
    )
    parser.add_argument("command", choices=list(OPERATIONS), help="Pipeline to run")
    parser.add_argument("--config", help="Scenario file or bundled scenario name")
    parser.add_argument("--input", help="DVSF file to export (dump only, no scenario)")
    parser.add_argument("--out-dir", help="Output directory (runs/<scenario name>)")
    parser.add_argument(
        "--resolution-override", type=int, help="Replace the scenario's grid resolution"
    )
    parser.add_argument("--seed", type=int, help="Replace the scenario's seed")
    parser.add_argument(
        "--dump-chain", action="store_true", help="Write the cube chain descriptor"
    )
    parser.add_argument(
        "--log-level",
        default="INFO",
        choices=["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"],
        help="Console log level",
    )
    return parser


def main(argv: Optional[list[str]] = None) -> None:
    """Main CLI entry point."""
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.log_level != "INFO":
        set_log_level(args.log_level)

    if args.command == "dump" and args.input:
        cmd_dump_file(Path(args.input), Path(args.out_dir or "."))
    elif args.config:
        cmd_run(args)
    else:
        parser.print_help()
        sys.exit(EXIT_ERROR)
