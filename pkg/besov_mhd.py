#!/usr/bin/env python3
"""
Command-line entry point for the Besov-space MHD experiment harness.

    python besov_mhd.py lp-check --n 128
    python besov_mhd.py solve --config tg2d
    python besov_mhd.py picard --norm 1e-3
"""
import argparse
import signal
import sys
import time
from typing import List, Optional

from rich.console import Console
from rich.panel import Panel
from rich.progress import BarColumn, Progress, SpinnerColumn, TaskProgressColumn, TextColumn

import config
from jobs import JOBS, ExperimentResult
from report_writer import emit_reports
from run_config import RunConfig, apply_overrides, config_from_dict, load_config, resolve_config_path

console = Console()
logger = config.setup_logging()

# Global flag for graceful shutdown
shutdown_requested = False


def signal_handler(signum, frame):
    """Finish the running job, then stop; a second signal quits at once."""
    global shutdown_requested
    if not shutdown_requested:
        console.print("\n[yellow]Shutdown requested. Finishing the current job...[/yellow]")
        shutdown_requested = True
    else:
        console.print("\n[red]Force quitting...[/red]")
        sys.exit(1)


def format_time(seconds: float) -> str:
    if seconds < 60:
        return f"{seconds:.1f}s"
    minutes, seconds = divmod(seconds, 60)
    return f"{int(minutes)}m {seconds:.0f}s"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Besov-space MHD experiment harness")
    subparsers = parser.add_subparsers(dest="command", required=True, metavar="SUBCOMMAND")
    for name, description in config.SUBCOMMANDS:
        sub = subparsers.add_parser(name, help=description, description=description)
        sub.add_argument("--config", help="YAML config path, or a name under configs/")
        sub.add_argument("--out", help="output directory")
        sub.add_argument("--seed", type=int, help="random seed")
        sub.add_argument("--threads", type=int, help="worker threads for bank evaluation")
        sub.add_argument("--debug", action="store_true", help="enable debug logging")
        sub.add_argument("--n", type=int, help="grid points per axis")
        sub.add_argument("--dim", type=int, choices=(2, 3), help="spatial dimension")
        sub.add_argument("--norm", type=float, help="critical Besov norm of the initial data")
        sub.add_argument("--T", type=float, help="final time")
        sub.add_argument("--dt", type=float, help="time step")
    return parser


def resolve_run_config(command: str, args: argparse.Namespace) -> RunConfig:
    """Config from --config, else configs/<command>.yaml when present, else defaults."""
    if args.config:
        cfg = load_config(args.config)
    elif resolve_config_path(command).exists():
        cfg = load_config(command)
    else:
        cfg = config_from_dict({"experiment": {"name": command}})
    if cfg.experiment.name != command:
        data = cfg.model_dump(mode="json")
        data["experiment"]["name"] = command
        cfg = config_from_dict(data)
    return apply_overrides(cfg, n=args.n, dim=args.dim, norm=args.norm, T=args.T, dt=args.dt,
                           seed=args.seed, out=args.out)


def run_jobs(cfg: RunConfig, names: List[str]) -> List[ExperimentResult]:
    results = []
    with Progress(
        SpinnerColumn(),
        TextColumn("[progress.description]{task.description}"),
        BarColumn(complete_style="green", finished_style="green"),
        TaskProgressColumn(),
        console=console,
        expand=True
    ) as progress:
        task = progress.add_task("[cyan]Running jobs", total=len(names))
        for name in names:
            if shutdown_requested:
                break
            progress.update(task, description=f"[cyan]{name}")
            start = time.time()
            try:
                result = JOBS[name](cfg)
            except Exception as e:
                logger.exception(f"Job {name} failed")
                result = ExperimentResult(name=name, passed=False, summary={"error": str(e)})
            elapsed = time.time() - start
            results.append(result)
            progress.advance(task)
            status = "[green]PASS[/]" if result.passed else "[red]FAIL[/]"
            console.print(Panel.fit(
                "\n".join([
                    f"Status: {status}",
                    f"Grid: {cfg.grid.dim}D, N={cfg.grid.n}",
                    f"Summary keys: {', '.join(sorted(result.summary)) or '-'}",
                    f"Series columns: {len(result.series)}",
                    f"Wall time: {format_time(elapsed)}",
                ]),
                title=f"Results - {name}",
                border_style="cyan"
            ))
    return results


def run_cli(argv: Optional[List[str]] = None) -> int:
    """Parse ``argv``, run the job and write its reports; 0 iff every job passed."""
    args = build_parser().parse_args(argv)
    if args.debug:
        config.setup_logging("DEBUG")
    if args.threads:
        config.THREADS = args.threads
    try:
        cfg = resolve_run_config(args.command, args)
    except (OSError, ValueError) as e:
        console.print(f"[red]Configuration error:[/red] {e}")
        logger.error(str(e))
        return 2
    logger.info(f"{args.command}: {cfg.grid.dim}D N={cfg.grid.n}, seed {cfg.seed}, output {cfg.output_dir}")
    results = run_jobs(cfg, [args.command])
    if shutdown_requested:
        console.print("\n[yellow]Run interrupted; writing completed jobs only.[/yellow]")
    try:
        paths = emit_reports(results, cfg.output_dir, cfg)
    except OSError as e:
        logger.exception("Report emission failed")
        console.print(f"[red]{e}[/red]")
        return 1
    console.print(f"[green]Wrote {len(paths)} files to {cfg.output_dir}[/green]")
    return 0 if results and all(r.passed for r in results) else 1


def main():
    signal.signal(signal.SIGINT, signal_handler)
    signal.signal(signal.SIGTERM, signal_handler)
    try:
        sys.exit(run_cli())
    except KeyboardInterrupt:
        console.print("\n[yellow]Process interrupted by user.[/yellow]")
        sys.exit(1)


if __name__ == "__main__":
    main()
