"""
shapecomp - sparse convex shape composition for image segmentation
"""

import logging
import sys
from pathlib import Path

# ── App identity ──────────────────────────────────────────────────────────────
APP_NAME    = "shapecomp"
APP_VERSION = "0.3.0"

from modules.config_manager import ConfigManager


# ── Logging setup (before the numeric modules load) ───────────────────────────
def _setup_logging(config: ConfigManager):
    log_file = config.get_log_file()
    log_file.parent.mkdir(parents=True, exist_ok=True)
    level = getattr(logging, str(config.get("logging.level", "INFO")).upper(), logging.INFO)
    logging.basicConfig(
        level=level,
        format="%(asctime)s [%(levelname)s] %(name)s: %(message)s",
        handlers=[
            logging.FileHandler(log_file, encoding="utf-8"),
            logging.StreamHandler(sys.stderr),
        ],
    )


def _config_from_argv(argv: list[str]) -> ConfigManager:
    """Honours --config before argparse runs so logging uses the right file."""
    for k, arg in enumerate(argv):
        if arg == "--config" and k + 1 < len(argv):
            return ConfigManager(Path(argv[k + 1]))
        if arg.startswith("--config="):
            return ConfigManager(Path(arg.split("=", 1)[1]))
    return ConfigManager()


_config = _config_from_argv(sys.argv[1:])
_setup_logging(_config)
logger = logging.getLogger(__name__)

from modules import cli


# ── Unhandled exception hook ──────────────────────────────────────────────────
def _handle_exception(exc_type, exc_value, exc_traceback):
    if issubclass(exc_type, KeyboardInterrupt):
        sys.__excepthook__(exc_type, exc_value, exc_traceback)
        return
    logger.critical(
        "Unhandled exception",
        exc_info=(exc_type, exc_value, exc_traceback)
    )

sys.excepthook = _handle_exception


# ── Entry point ───────────────────────────────────────────────────────────────
def main():
    logger.debug("%s v%s started with %s", APP_NAME, APP_VERSION, sys.argv[1:])
    sys.exit(cli.main(sys.argv[1:], _config))


if __name__ == "__main__":
    main()
