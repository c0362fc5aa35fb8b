"""
Subcommands of the cointurn experiment runner

Each command resolves its options (plus an optional key=value config file)
into a pydantic config, runs the matching service and writes CSV or JSON
under the output directory.
"""
import functools
import logging
import sys

import click
import numpy as np
import pandas as pd
from pydantic import ValidationError

from ..errors import CoinTurnError, InvalidParameters, NonDivergentVariance
from ..models.experiment import ExactConfig, ScanConfig, SimulateConfig, VerifyConfig, ZigzagConfig
from ..services import (
    acceptance,
    exact_service,
    output_service,
    schedule_service,
    simulation_service,
    zigzag_service,
)

logger = logging.getLogger("cointurn.cli")

COOLING_REGIMES = ("lower-supercritical", "strongly-critical", "critical-cooling", "upper-supercritical")

EXIT_FAILED = 1
EXIT_USAGE = 2


def build_config(model, config_file, **options):
    """Config file pairs overlaid by the options given on the command line"""
    pairs = {}
    if config_file:
        pairs = schedule_service.parse_key_values(schedule_service.read_config_text(config_file))
    pairs.update({key: value for key, value in options.items() if value is not None})
    try:
        return model(**pairs)
    except ValidationError as e:
        raise InvalidParameters(f"invalid {model.__name__}: {e}")


def handle_errors(func):
    """Map failures to the exit-code contract: 2 for bad input, 1 for failed computations"""
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except InvalidParameters as e:
            click.echo(f"error: {e}", err=True)
            sys.exit(EXIT_USAGE)
        except CoinTurnError as e:
            click.echo(f"error: {type(e).__name__}: {e}", err=True)
            sys.exit(EXIT_FAILED)
        except Exception as e:
            logger.exception(f"Unexpected failure in {func.__name__}: {e}")
            sys.exit(EXIT_FAILED)
    return wrapper


def common_options(func):
    func = click.option("--config", "config_file", default=None, help="key=value config file")(func)
    func = click.option("--workers", type=int, default=None, help="worker processes for ensembles")(func)
    func = click.option("--out", default=None, help="output file; bare names go under COINTURN_OUTPUT_DIR")(func)
    func = click.option("--seed", "master_seed", type=int, default=None, help="master seed")(func)
    return func


def run_exact(cfg: ExactConfig) -> pd.DataFrame:
    """Table of (n, p_n, a_n, v_n, Z, var_exact, ratio) for n in the requested range"""
    if cfg.n_stop < cfg.n_start:
        raise InvalidParameters(f"n_stop {cfg.n_stop} is below n_start {cfg.n_start}")
    s = schedule_service.parse_schedule(cfg.schedule)
    ns = np.arange(cfg.n_start, cfg.n_stop + 1, cfg.step)
    table = exact_service.v_table(s, cfg.n_stop)
    variances = exact_service.variance_path(s, cfg.n_stop)

    z_values = []
    plateau = False
    for n in ns:
        if plateau:
            z_values.append(pd.NA)
            continue
        try:
            z_values.append(exact_service.time_change(s, float(n)))
        except NonDivergentVariance as e:
            logger.warning(f"Z stops at x={n}: {e}")
            plateau = True
            z_values.append(pd.NA)

    v = table.v[ns]
    var_exact = variances[ns - 1]
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(v > 0, var_exact / v, np.nan)
    return pd.DataFrame({
        "n": ns,
        "p_n": s.probs(ns),
        "a_n": table.a[ns],
        "v_n": v,
        "Z": pd.array(z_values, dtype="Int64"),
        "var_exact": var_exact,
        "ratio": ratio,
    })


def default_mode(s, n: int) -> str:
    """Rescaling matching the schedule's regime"""
    regime = schedule_service.classify(s, n).regime
    return "cooling" if regime in COOLING_REGIMES else "diffusive"


def run_simulate(cfg: SimulateConfig) -> pd.DataFrame:
    """Long-format paths on the grid, or endpoints when no grid is given"""
    s = schedule_service.parse_schedule(cfg.schedule)
    if not cfg.grid:
        sums, signs = simulation_service.sample_endpoints(
            s, cfg.n, cfg.trials, cfg.master_seed, y1=cfg.y1, workers=cfg.workers
        )
        return pd.DataFrame({"trial": np.arange(cfg.trials), "S_n": sums, "Y_n": signs})

    mode = cfg.mode or default_mode(s, cfg.n)
    values = simulation_service.sample_paths(
        s, cfg.n, cfg.trials, cfg.master_seed, cfg.grid, mode, y1=cfg.y1, workers=cfg.workers
    )
    return _long_frame(values, cfg.grid)


def run_zigzag(cfg: ZigzagConfig) -> pd.DataFrame:
    """Long-format values on the grid, or one summary row per trial when no grid is given"""
    if not cfg.grid:
        values, zeros, atoms = zigzag_service.zigzag_ensemble(
            cfg.c, cfg.T, cfg.eps, cfg.trials, cfg.master_seed, [cfg.T], workers=cfg.workers
        )
        return pd.DataFrame({
            "trial": np.arange(cfg.trials),
            "endpoint": values[:, 0],
            "zeros": zeros,
            "atoms": atoms,
        })
    values, _, _ = zigzag_service.zigzag_ensemble(
        cfg.c, cfg.T, cfg.eps, cfg.trials, cfg.master_seed, cfg.grid, workers=cfg.workers, with_zeros=False
    )
    return _long_frame(values, cfg.grid)


def _long_frame(values: np.ndarray, grid) -> pd.DataFrame:
    trials, points = values.shape
    return pd.DataFrame({
        "trial": np.repeat(np.arange(trials), points),
        "t": np.tile(np.asarray(grid, dtype=np.float64), trials),
        "value": values.reshape(-1),
    })


def run_verify(cfg: VerifyConfig):
    return acceptance.run_suite(cfg.master_seed, cfg.criteria or None, include_slow=not cfg.quick)


def run_scan(cfg: ScanConfig) -> pd.DataFrame:
    """One RegimeVerdict row per schedule line of the list file"""
    try:
        with open(cfg.schedules, "r", encoding="utf-8") as handle:
            entries = schedule_service.parse_schedule_list(handle)
    except OSError as e:
        raise InvalidParameters(f"cannot read schedule list {cfg.schedules}: {e}")
    rows = []
    for text, s in entries:
        verdict = schedule_service.classify(s, cfg.horizon)
        row = {
            "schedule": text,
            "mixing": verdict.mixing,
            "regime": verdict.regime,
            "scaling_limit": verdict.scaling_limit,
            "method": verdict.method,
        }
        row.update(verdict.diagnostics.model_dump(exclude={"horizon", "notes"}))
        row["notes"] = "; ".join(verdict.diagnostics.notes)
        rows.append(row)
    return pd.DataFrame(rows)


def _write_table(frame: pd.DataFrame, cfg, default_name: str):
    path = output_service.resolve_output_path(cfg.out, default_name)
    output_service.write_csv(path, frame, cfg.header_items(), cfg.master_seed)
    click.echo(path)


@click.command()
@click.option("--schedule", default=None, help="schedule config, inline key=value or a file")
@click.option("--n-start", "n_start", type=int, default=None)
@click.option("--n-stop", "n_stop", type=int, default=None)
@click.option("--step", type=int, default=None)
@common_options
@handle_errors
def exact(config_file, **options):
    """Exact coefficient and variance table"""
    cfg = build_config(ExactConfig, config_file, **options)
    _write_table(run_exact(cfg), cfg, "exact.csv")


@click.command()
@click.option("--schedule", default=None, help="schedule config, inline key=value or a file")
@click.option("--n", type=int, default=None)
@click.option("--trials", type=int, default=None)
@click.option("--grid", default=None, help="rescaled times, e.g. 0.25,0.5,1")
@click.option("--mode", type=click.Choice(["cooling", "diffusive"]), default=None)
@click.option("--y1", type=int, default=None)
@common_options
@handle_errors
def simulate(config_file, **options):
    """Sampled walks: rescaled paths on a grid or endpoints (S_n, Y_n)"""
    cfg = build_config(SimulateConfig, config_file, **options)
    _write_table(run_simulate(cfg), cfg, "simulate.csv")


@click.command()
@click.option("--c", type=float, default=None, help="intensity c of the c/x point process")
@click.option("--T", "T", type=float, default=None, help="horizon")
@click.option("--eps", type=float, default=None, help="truncation level")
@click.option("--trials", type=int, default=None)
@click.option("--grid", default=None, help="times in (0, T], e.g. 0.25,0.5,1")
@common_options
@handle_errors
def zigzag(config_file, **options):
    """Zigzag process samples"""
    cfg = build_config(ZigzagConfig, config_file, **options)
    _write_table(run_zigzag(cfg), cfg, "zigzag.csv")


@click.command()
@click.option("--criteria", default=None, help="criterion ids to run, e.g. 1,2,12")
@click.option("--quick", is_flag=True, default=None, help="skip the Monte Carlo heavy criteria")
@common_options
@handle_errors
def verify(config_file, **options):
    """Run the acceptance suite; exit 0 iff every selected criterion passes"""
    cfg = build_config(VerifyConfig, config_file, **options)
    report = run_verify(cfg)
    content = report.model_dump_json(indent=2) + "\n"
    path = output_service.resolve_output_path(cfg.out, "verify.json")
    output_service.write_text(path, content)
    click.echo(content, nl=False)
    failed = [result.id for result in report.criteria if not result.passed]
    if failed:
        logger.error(f"Failed criteria: {failed}")
        sys.exit(EXIT_FAILED)
    logger.info(f"All {len(report.criteria)} criteria passed")


@click.command()
@click.option("--schedules", default=None, help="file with one schedule config per line")
@click.option("--horizon", type=int, default=None)
@common_options
@handle_errors
def scan(config_file, **options):
    """Regime diagram sweep over a list of schedules"""
    cfg = build_config(ScanConfig, config_file, **options)
    _write_table(run_scan(cfg), cfg, "scan.csv")


COMMANDS = [exact, simulate, zigzag, verify, scan]
