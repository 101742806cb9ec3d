"""CLI interface for ehmm."""

import sys
import warnings
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple

import click
import numpy as np
from pydantic import ValidationError
from rich.console import Console
from rich.panel import Panel
from rich.progress import BarColumn, Progress, SpinnerColumn, TextColumn, TimeElapsedColumn
from rich.table import Table

from ehmm.core.config import settings
from ehmm.core.errors import (
    DegenerateSeriesError,
    DomainError,
    EhmmError,
    GridTooSmallWarning,
    StorageError,
    UsageError,
)
from ehmm.core.log import configure_logging
from ehmm.core.model import ObsSeq, StateSeq, log_joint
from ehmm.core.rng import Purpose, RngStream
from ehmm.models import RunConfig, SamplerKind
from ehmm.services.baselines import grid_oracle_marginals, run_metropolis
from ehmm.services.chain import ChainRecord
from ehmm.services.diagnostics import (
    autocorr,
    oracle_error,
    sign_run_lengths,
    sign_switch_count,
    trace_at_time,
    visits_both_regions,
)
from ehmm.services.ehmm import EhmmConfig, EhmmStep, run_chain
from ehmm.services.storage import csv_store
from ehmm.services.tanh_model import (
    make_pool_kernels,
    make_tanh_model,
    pool_params_from_obs,
    simulate,
)

console = Console()

ACF_REPORT_LAG = 10


class EhmmGroup(click.Group):
    """Click group that maps errors to exit codes (1 usage, 2 numeric/domain, 3 I/O)."""

    def main(self, args=None, prog_name=None, complete_var=None, standalone_mode=True, **extra):
        try:
            rv = super().main(
                args=args,
                prog_name=prog_name,
                complete_var=complete_var,
                standalone_mode=False,
                **extra,
            )
        except click.exceptions.Abort:
            console.print("[red]Aborted.[/red]")
            sys.exit(UsageError.exit_code)
        except click.ClickException as exc:
            exc.show()
            sys.exit(UsageError.exit_code)
        except EhmmError as exc:
            console.print(f"[red]Error:[/red] {exc}")
            sys.exit(exc.exit_code)
        except OSError as exc:
            console.print(f"[red]I/O error:[/red] {exc}")
            sys.exit(StorageError.exit_code)
        sys.exit(rv if isinstance(rv, int) else 0)


def run_options(fn: Callable) -> Callable:
    """Options shared by every subcommand; unset options leave config values alone."""
    options = [
        click.option("--config", "config_path", type=click.Path(dir_okay=False), help="Flat key = value config file"),
        click.option("--seed", type=int, help="Unsigned 64-bit seed"),
        click.option("--out", type=click.Path(file_okay=False), help="Output directory"),
        click.option("--n", type=int, help="Sequence length"),
        click.option("--sigma", type=float, help="Observation noise sd"),
        click.option("--eta", type=float, help="Expansion factor"),
        click.option("--tau", type=float, help="Transition noise sd"),
        click.option("--init-mean", type=float, help="Mean of P(x_0)"),
        click.option("--init-sd", type=float, help="Sd of P(x_0)"),
        click.option("--sampler", type=click.Choice(["ehmm", "metropolis"]), help="Sampler kind"),
        click.option("--K", "K", type=int, help="Pool size"),
        click.option("--alpha", type=float, help="Pool kernel autoregression"),
        click.option("--pool", type=click.Choice(["fixed", "per-obs"]), help="Pool distribution strategy"),
        click.option("--mu", type=float, help="Fixed pool mean"),
        click.option("--nu", type=float, help="Fixed pool sd"),
        click.option("--proposal", type=click.Choice(["independence", "random-walk"]), help="Metropolis proposal"),
        click.option("--proposal-mean", type=float, help="Independence proposal mean"),
        click.option("--proposal-sd", type=float, help="Proposal sd"),
        click.option("--iters", type=int, help="Iterations"),
        click.option("--burnin", type=int, help="Burn-in iterations"),
        click.option("--thin", type=int, help="Thinning interval"),
        click.option("--chains", type=int, help="Independent chains (per-chain files when > 1)"),
        click.option("--init", type=str, help="Initial sequence: data, zero or file=PATH"),
        click.option("--dump-pools", type=int, help="Write the pools of this eHMM update"),
        click.option("--grid", type=(float, float, int), default=None, help="Oracle grid LO HI M"),
        click.option("--probe", type=int, multiple=True, help="Probe time (repeatable)"),
        click.option("--max-lag", type=int, help="Largest autocorrelation lag"),
        click.option("--strict/--no-strict", default=None, help="Grid-too-small warning is an error"),
        click.option("--data", type=click.Path(dir_okay=False), help="Data CSV (default OUT/data.csv)"),
        click.option("--samples", type=click.Path(dir_okay=False), help="Samples CSV (default OUT/samples.csv)"),
        click.option("--oracle", type=click.Path(dir_okay=False), help="Oracle CSV (default OUT/oracle.csv)"),
    ]
    for option in reversed(options):
        fn = option(fn)
    return fn


def resolve_config(command: str, config_path: Optional[str], flags: Dict[str, Any]) -> RunConfig:
    """Defaults, then the config file, then command-line flags."""
    values: Dict[str, Any] = {}
    if config_path:
        values.update(csv_store.read_run_config(config_path))

    grid = flags.pop("grid", None)
    if grid is not None:
        values.update(grid_lo=grid[0], grid_hi=grid[1], grid_m=grid[2])
    probe = flags.pop("probe", ())
    if probe:
        values["probe"] = list(probe)
    values.update({k: v for k, v in flags.items() if v is not None})

    try:
        cfg = RunConfig(**values)
    except ValidationError as exc:
        raise UsageError(f"invalid configuration:\n{exc}") from exc

    csv_store.write_resolved_config(Path(cfg.out) / f"config_resolved_{command}.txt", cfg, command)
    return cfg


def _data_path(cfg: RunConfig) -> Path:
    return Path(cfg.data) if cfg.data else Path(cfg.out) / "data.csv"


def _load_observations(cfg: RunConfig) -> Tuple[StateSeq, ObsSeq]:
    x, y = csv_store.read_data(_data_path(cfg))
    if len(y) != cfg.n:
        raise UsageError(f"config n={cfg.n} but {_data_path(cfg)} has {len(y)} rows")
    return x, y


def _initial_sequence(cfg: RunConfig, y: ObsSeq) -> StateSeq:
    if cfg.init == "data":
        return StateSeq(np.asarray(y.values, dtype=float))
    if cfg.init == "zero":
        return StateSeq(np.zeros(len(y)))
    x0 = csv_store.read_states(cfg.init[len("file="):])
    if len(x0) != len(y):
        raise UsageError(f"initial sequence has {len(x0)} states, data has {len(y)}")
    return x0


def _progress() -> Progress:
    return Progress(
        SpinnerColumn(),
        TextColumn("[progress.description]{task.description}"),
        BarColumn(),
        TextColumn("{task.completed}/{task.total}"),
        TimeElapsedColumn(),
        console=console,
        transient=True,
    )


@click.group(cls=EhmmGroup)
@click.option("--log-level", default=None, help="Logging level (default from EHMM_LOG_LEVEL)")
def main(log_level: Optional[str]):
    """ehmm - embedded-HMM sampling for non-linear state space models."""
    configure_logging(log_level)


@main.command("simulate")
@run_options
def simulate_cmd(config_path: Optional[str], **flags):
    """Simulate states and observations from the tanh model into data.csv."""
    cfg = resolve_config("simulate", config_path, flags)
    x, y = simulate(cfg.tanh_params(), cfg.n, RngStream(cfg.seed, (Purpose.SIMULATE,)))
    path = csv_store.write_data(_data_path(cfg), x, y)

    runs = sign_run_lengths(x)
    console.print(
        Panel.fit(
            f"n = {cfg.n}\n"
            f"sign switches = {sign_switch_count(x)}\n"
            f"median sign-run length = {float(np.median(runs)):g}\n"
            f"written to {path}",
            title="Simulated data",
        )
    )


def _sample_one(
    cfg: RunConfig,
    chain: int,
    x0: StateSeq,
    y: ObsSeq,
    progress: Optional[Callable[[int], None]],
) -> Tuple[ChainRecord, Optional[Tuple[int, EhmmStep]]]:
    params = cfg.tanh_params()
    model = make_tanh_model(params)
    if cfg.sampler is SamplerKind.METROPOLIS:
        return run_metropolis(model, cfg.metropolis(chain), x0, y, progress=progress), None

    kernels = make_pool_kernels(pool_params_from_obs(cfg.pool, y, params, cfg.mu, cfg.nu, cfg.alpha))
    ecfg = EhmmConfig(
        K=cfg.K,
        kernels=kernels,
        iterations=cfg.iters,
        burn_in=cfg.burnin,
        thin=cfg.thin,
        seed=cfg.seed,
        chain=chain,
    )
    captured: List[Tuple[int, EhmmStep]] = []

    def observer(i: int, step: EhmmStep) -> None:
        if i == cfg.dump_pools:
            captured.append((i, step))

    rec = run_chain(model, ecfg, x0, y, progress=progress, observer=observer)
    return rec, (captured[0] if captured else None)


def _write_chain(cfg: RunConfig, rec: ChainRecord, suffix: str, dump) -> None:
    out = Path(cfg.out)
    csv_store.write_samples(out / f"samples{suffix}.csv", rec)
    csv_store.write_summary(out / f"summary{suffix}.csv", rec)
    csv_store.write_timing(out / f"timing{suffix}.csv", rec)
    if dump is not None:
        i, step = dump
        csv_store.write_pools(out / f"pools{suffix}.csv", i, step.pools, step.path, step.current)


@main.command("sample")
@run_options
def sample_cmd(config_path: Optional[str], **flags):
    """Run the eHMM or Metropolis sampler on data.csv from x0 = y."""
    cfg = resolve_config("sample", config_path, flags)
    _, y = _load_observations(cfg)
    x0 = _initial_sequence(cfg, y)
    model = make_tanh_model(cfg.tanh_params())

    with _progress() as progress:
        tasks = {
            c: progress.add_task(f"{cfg.sampler.value} chain {c}", total=cfg.iters)
            for c in range(cfg.chains)
        }

        def run(c: int):
            return _sample_one(cfg, c, x0, y, lambda i: progress.update(tasks[c], completed=i))

        if cfg.chains == 1:
            results = [run(0)]
        else:
            with ThreadPoolExecutor(max_workers=settings.max_workers) as pool:
                results = list(pool.map(run, range(cfg.chains)))

    table = Table(title=f"{cfg.sampler.value} sampling (n={cfg.n}, iters={cfg.iters})")
    table.add_column("chain", justify="right")
    table.add_column("stored", justify="right")
    table.add_column("switches (x0 -> last)", justify="right")
    table.add_column("final log joint", justify="right")
    table.add_column("mean s/update", justify="right")
    for c, (rec, dump) in enumerate(results):
        _write_chain(cfg, rec, "" if cfg.chains == 1 else f"_chain{c}", dump)
        last = rec.switches[-1] if rec.iterations else sign_switch_count(x0)
        final_lj = rec.log_joint[-1] if rec.iterations else log_joint(model, x0, y)
        secs = float(np.mean(rec.seconds)) if rec.iterations else 0.0
        table.add_row(
            str(c), str(rec.n_stored), f"{sign_switch_count(x0)} -> {last}", f"{final_lj:.3f}", f"{secs:.4f}"
        )
    console.print(table)
    if cfg.dump_pools is not None and all(dump is None for _, dump in results):
        console.print(f"[yellow]No pools written: update {cfg.dump_pools} was not an eHMM update of this run[/yellow]")


@main.command("oracle")
@run_options
def oracle_cmd(config_path: Optional[str], **flags):
    """Grid-discretised exact posterior marginals into oracle.csv."""
    cfg = resolve_config("oracle", config_path, flags)
    _, y = _load_observations(cfg)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", GridTooSmallWarning)
        result = grid_oracle_marginals(cfg.tanh_params(), y, cfg.grid())
    if result.grid_too_small and cfg.strict:
        raise DomainError(
            f"grid [{cfg.grid_lo}, {cfg.grid_hi}] holds posterior mass "
            f"{float(np.max(result.boundary_mass)):.3g} at its boundary"
        )
    path = csv_store.write_oracle(Path(cfg.out) / "oracle.csv", result.p_positive, result.mean, result.sd)
    console.print(
        Panel.fit(
            f"grid = [{cfg.grid_lo}, {cfg.grid_hi}] x {cfg.grid_m}\n"
            f"max boundary mass = {float(np.max(result.boundary_mass)):.3g}\n"
            f"mean P(x_t > 0 | y) = {float(np.mean(result.p_positive)):.4f}\n"
            f"written to {path}",
            title="Grid oracle",
        )
    )


@main.command("report")
@run_options
def report_cmd(config_path: Optional[str], **flags):
    """Oracle error, probe traces and autocorrelations into diag.csv."""
    cfg = resolve_config("report", config_path, flags)
    out = Path(cfg.out)
    rec = csv_store.read_samples(Path(cfg.samples) if cfg.samples else out / "samples.csv")
    oracle = csv_store.read_oracle(Path(cfg.oracle) if cfg.oracle else out / "oracle.csv")

    if rec.n_stored == 0:
        raise UsageError("samples file holds no stored iterations")
    if rec.n != len(oracle):
        raise UsageError(f"samples have n={rec.n} but the oracle has {len(oracle)} times")

    err = oracle_error(rec, oracle["p_positive"].to_numpy())
    columns: Dict[str, np.ndarray] = {"oracle_error": err.per_time}
    summary = []
    for t in cfg.probe:
        trace = trace_at_time(rec, t)
        lag = min(cfg.max_lag, len(trace) - 1)
        try:
            acf = autocorr(trace, lag) if lag >= 1 else np.array([1.0])
        except DegenerateSeriesError:
            console.print(f"[yellow]Trace at t={t} is constant; autocorrelation undefined[/yellow]")
            acf = np.full(lag + 1, np.nan)
        columns[f"trace_{t}"] = trace.values
        columns[f"acf_{t}"] = acf
        summary.append(
            {
                "probe": t,
                "acf_lag10": float(acf[ACF_REPORT_LAG]) if acf.size > ACF_REPORT_LAG else float("nan"),
                "visits_both_regions": int(visits_both_regions(trace)),
                "mean_abs_error": err.mean,
            }
        )

    csv_store.write_diag(out / "diag.csv", columns)
    csv_store.write_table(out / "diag_summary.csv", summary)

    table = Table(title=f"Diagnostics ({rec.n_stored} stored samples, mean |error| = {err.mean:.4f})")
    table.add_column("probe t", justify="right")
    table.add_column("acf lag 10", justify="right")
    table.add_column("visits +1 and -1", justify="center")
    for row in summary:
        table.add_row(
            str(row["probe"]), f"{row['acf_lag10']:.3f}", "yes" if row["visits_both_regions"] else "no"
        )
    console.print(table)


if __name__ == "__main__":
    main()
