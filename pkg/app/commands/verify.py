"""``verify``: run named verification scenarios."""
import logging

from app.commands import require
from app.errors import VerificationFailure
from app.models.schemas import RunConfig
from app.services.definitions import DefinitionRegistry
from app.services.verification import SCENARIOS, run_scenario, scenario_names

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser("verify", help="Run a verification scenario ('all' runs every one)")
    parser.add_argument("--scenario", help=f"One of: {', '.join(SCENARIOS)}, or all")
    parser.add_argument("--list", dest="list_scenarios", action="store_true", help="List scenarios and exit")


def list_scenarios() -> int:
    for name, (description, _) in SCENARIOS.items():
        print(f"{name:20s} {description}")
    return 0


def run(config: RunConfig, registry: DefinitionRegistry) -> int:
    require(config, "scenario")
    names = scenario_names() if config.scenario == "all" else [config.scenario]
    failed = []
    for name in names:
        report = run_scenario(name)
        print(report.model_dump_json(indent=2))
        if not report.passed:
            failed.append(name)
    if failed:
        raise VerificationFailure(f"Scenarios failed: {', '.join(failed)}")
    return 0
