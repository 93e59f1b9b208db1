"""
Command-line entry points.

    lrst test --input trial.csv --direction ADAS-cog11=-1 --weights equal --out report.json
    lrst simulate --config type1_error.cfg --out results/ --threads 4
"""

import argparse
import logging
import sys
from typing import List, Optional

from rich.console import Console
from rich.logging import RichHandler

from lrst import __version__
from lrst.errors import LrstError
from lrst.pipelines.lrst_pipeline import LongitudinalRankSumTest
from lrst.pipelines.simulation_pipeline import SimulationPipeline
from lrst.utils.config import AnalysisConfig, format_simulation_config
from lrst.utils.dataset import ColumnSchema, DirectionMap
from lrst.utils.report import dumps, print_frame, print_test_result, type1_table, power_table, write_json

logger = logging.getLogger("lrst")


def setup_logging(verbose: bool = False, quiet: bool = False):
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    handler = RichHandler(console=Console(stderr=True), show_path=False)
    logger.handlers[:] = [handler]
    logger.setLevel(level)
    logger.propagate = False


def cmd_test(config: AnalysisConfig, console: Optional[Console] = None) -> int:
    """Run the test end to end and emit the report. Returns 0 whenever the test completes."""
    console = console or Console()
    pipeline = LongitudinalRankSumTest(
        weights=config.weights,
        schema=config.schema,
        direction=config.direction,
        baseline=config.baseline,
        drop_incomplete=config.drop_incomplete,
    )
    result = pipeline(config.input)
    record = result.to_dict(alpha=config.alpha, two_sided=config.two_sided)
    record["input"] = config.input
    record["weights_spec"] = config.weights

    if config.out:
        if config.fmt == "json":
            write_json(record, config.out)
        else:
            with open(config.out, "w", encoding="utf-8") as f:
                print_test_result(record, Console(file=f, width=120))
            logger.info(f"Wrote {config.out}")
    elif config.fmt == "json":
        console.print_json(dumps(record))
    else:
        print_test_result(record, console)
    return 0


def cmd_simulate(
    config_path: str,
    out_dir: Optional[str] = None,
    threads: Optional[int] = None,
    seed: Optional[int] = None,
    n_reps: Optional[int] = None,
    progress: bool = True,
    console: Optional[Console] = None,
) -> int:
    console = console or Console()
    pipeline = SimulationPipeline.from_file(config_path, seed=seed, n_reps=n_reps, threads=threads, progress=progress)
    frame = pipeline(out_dir)
    config = pipeline.config
    table = type1_table(frame) if config.kind == "type1" else power_table(frame)
    print_frame(table, title=f"{config.name} ({config.n_reps} replicates, seed {config.seed})", console=console)
    if out_dir is None:
        # no output directory: the resolved config goes to the console
        console.print(f"# resolved configuration, seed {config.seed}")
        console.print(format_simulation_config(config), markup=False, highlight=False)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lrst", description="Longitudinal rank-sum test for multiple longitudinal endpoints."
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    verbosity.add_argument("-q", "--quiet", action="store_true", help="warnings only, no progress bars")
    commands = parser.add_subparsers(dest="command", required=True)

    test = commands.add_parser("test", help="test a two-arm trial stored as long-format CSV")
    test.add_argument("--input", required=True, help="CSV with columns subject,arm,visit,outcome,value")
    test.add_argument("--schema", help="column renames, e.g. subject=ID,arm=GROUP")
    test.add_argument("--direction", help="outcome signs, e.g. ADAS-cog11=-1,DAD=+1 (default +1)")
    test.add_argument("--weights", default="equal", help="equal | last-visit | w1,...,wT")
    test.add_argument("--alpha", type=float, default=0.05)
    test.add_argument("--out", help="report path (stdout when omitted)")
    test.add_argument("--format", dest="fmt", choices=("json", "text"), default="json")
    test.add_argument("--two-sided", action="store_true", help="also report 2*min(p, 1-p)")
    test.add_argument("--drop-incomplete", action="store_true", help="drop subjects with missing cells")
    test.add_argument("--baseline", help="visit label of the baseline when the file holds raw scores")
    test.add_argument("--control-label", help="arm label of the control group (default: control)")
    test.add_argument("--treatment-label", help="arm label of the treatment group (default: treatment)")

    simulate = commands.add_parser("simulate", help="run a Type I error or power experiment")
    simulate.add_argument("--config", required=True, help="experiment .cfg file or bundled name (type1_error.cfg)")
    simulate.add_argument("--out", help="output directory")
    simulate.add_argument("--threads", type=int)
    simulate.add_argument("--seed", type=int)
    simulate.add_argument("--reps", type=int, dest="n_reps")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(args.verbose, args.quiet)
    try:
        if args.command == "test":
            config = AnalysisConfig(
                input=args.input,
                schema=ColumnSchema.parse(
                    args.schema, control_label=args.control_label, treatment_label=args.treatment_label
                ),
                direction=DirectionMap.parse(args.direction),
                weights=args.weights,
                alpha=args.alpha,
                out=args.out,
                fmt=args.fmt,
                two_sided=args.two_sided,
                drop_incomplete=args.drop_incomplete,
                baseline=args.baseline,
            )
            return cmd_test(config)
        return cmd_simulate(
            args.config,
            out_dir=args.out,
            threads=args.threads,
            seed=args.seed,
            n_reps=args.n_reps,
            progress=not args.quiet,
        )
    except LrstError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return e.exit_code
    except FileNotFoundError as e:
        logger.error(str(e))
        return 1


if __name__ == "__main__":
    sys.exit(main())
