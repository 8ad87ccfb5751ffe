import argparse

from app.commands.common import add_common_arguments, output_dir, resolve_config
from app.core.context import RunContext
from app.core.logging import get_logger
from app.repos.results_repo import ResultsRepository
from app.services.detection_service import DetectionService
from app.services.photonics_service import PhotonicsService

NAME = "fringe-sweep"


def register(subparsers: "argparse._SubParsersAction[argparse.ArgumentParser]") -> None:
    parser = subparsers.add_parser(NAME, help="noiseless D+ - D- against mirror displacement, both sensors")
    add_common_arguments(parser)
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace, context: RunContext) -> None:
    logger = get_logger(__name__, context)
    config = resolve_config(args)
    sweep = config.sweep

    for sensor in (config.sensors.classical, config.sensors.quantum):
        regime = PhotonicsService.check_pair_regime(sensor)
        if not regime.below_threshold:
            logger.warning("Pair flux of the %s sensor is above the parametric threshold", sensor.scheme.value)

    classical = DetectionService.fringe_sweep(sweep.d_min_nm, sweep.d_max_nm, sweep.steps, config.sensors.classical)
    quantum = DetectionService.fringe_sweep(sweep.d_min_nm, sweep.d_max_nm, sweep.steps, config.sensors.quantum)
    path = ResultsRepository.save_fringe_sweep(output_dir(config) / "fringe_sweep.csv", classical, quantum)

    ratio = quantum.fringe_count / classical.fringe_count
    logger.info("Fringe sweep written to %s", path)
    print(
        f"fringes over [{sweep.d_min_nm:g}, {sweep.d_max_nm:g}] nm: "
        f"classical {classical.fringe_count:.4f}, quantum {quantum.fringe_count:.4f}, ratio {ratio:.4f}"
    )
