import logging
import sys

from .config import settings
from .routers.commands import cli_main

# Configure logging
logging.basicConfig(
    level=logging.DEBUG if settings.DEBUG else logging.INFO,
    format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
)
logger = logging.getLogger(__name__)


def main() -> None:
    """Console entry point."""
    logger.debug("Starting %s", settings.APP_NAME)
    sys.exit(cli_main(sys.argv[1:]))


if __name__ == "__main__":
    main()
