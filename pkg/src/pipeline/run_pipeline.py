"""
Uses the Orchestrator class to run one experiment end to end.

Held-out data -> Train -> Evaluate -> Similarity maps -> Curves
"""

import sys

from src.pipeline.orchestrator import Orchestrator
from src.pipeline.utils import project_root, setup_logger

DEFAULT_CONFIG = project_root() / "src" / "config" / "experiments" / "smoke.json"


def main():
    setup_logger()
    config_path = sys.argv[1] if len(sys.argv) > 1 else DEFAULT_CONFIG
    orchestrator = Orchestrator(config_path)
    artifacts = orchestrator.run()

    return artifacts

if __name__ == "__main__":
    main()
