# GrateWave/main.py

import argparse
import logging
import sys
from dataclasses import replace
from typing import List, Optional

from core.exceptions import GrateWaveError, ScenarioParseError
from core.experiment_runner import ExperimentRunner
from core.scenario import Scenario
from utils.config_manager import ConfigManager
from utils.logger import configure_logging, get_logger
from utils.worker_pool import WORKERS_ENV, resolve_worker_count

# GrateWave Version - part of every artifact hash
VERSION = "1.0.0"

logger = get_logger("main")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gratewave",
        description="Green's-function MIMO capacity simulator for rooms with engineered walls.",
    )
    parser.add_argument("command", choices=ExperimentRunner.COMMANDS, help="experiment to run")
    parser.add_argument("--config", default=None,
                        help="scenario JSON file (default: bundled assets/scenarios/default.json)")
    parser.add_argument("--out", default="output", help="output directory (default: ./output)")
    parser.add_argument("--scale", default="1",
                        help="factor on room size, array centers and analysis lengths (e.g. 0.3333), "
                             "or the target longer room side (e.g. 10lambda)")
    parser.add_argument("--workers", type=int, default=None,
                        help=f"worker threads (default: ${WORKERS_ENV} or 1)")
    parser.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("--verbose", action="store_true", help="debug logging")
    verbosity.add_argument("--quiet", action="store_true", help="warnings and errors only")
    parser.add_argument("--version", action="version", version=f"%(prog)s {VERSION}")
    return parser


def resolve_scale(text: str, manager: ConfigManager, scenario: Scenario) -> float:
    """Scale factor from a plain number or from a target length for the longer room side."""
    if "lambda" in text:
        target = manager.length(text.strip(), "scale")
        return target / max(scenario.room.length_x, scenario.room.length_y)
    try:
        return float(text)
    except ValueError:
        raise ScenarioParseError(f"expected a factor or a length such as '10lambda', got {text!r}",
                                 field="scale") from None


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO)

    try:
        manager = ConfigManager(args.config)
        scenario = manager.build_scenario()
        if args.seed is not None:
            scenario = replace(scenario, seed=args.seed)
        scale = resolve_scale(args.scale, manager, scenario)
        if scale != 1.0:
            scenario = scenario.scaled(scale).validate()
            logger.info(f"📐 Scaled scenario by {scale:g}: room "
                        f"{scenario.room.length_x / scenario.wavelength:.3g} x "
                        f"{scenario.room.length_y / scenario.wavelength:.3g} lambda")

        runner = ExperimentRunner(scenario, manager.canonical_json(), args.out, VERSION,
                                  workers=resolve_worker_count(args.workers), scale=scale)
        result = runner.run(args.command)
    except GrateWaveError as exc:
        logger.error(f"❌ {args.command} failed for {args.config or 'default scenario'}: {exc}")
        return 1
    except OSError as exc:
        logger.error(f"❌ {args.command} failed: {exc}")
        return 1
    except Exception as exc:
        logger.error(f"❌ Unexpected error in {args.command}: {exc}", exc_info=True)
        return 1

    for path in result.artifacts:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
