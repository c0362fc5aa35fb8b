"""
Main entry point for the cointurn experiment runner
"""
import logging
import sys

import click
from dotenv import load_dotenv

from . import __version__
from .cli.commands import COMMANDS

logger = logging.getLogger("cointurn")


def configure_logging(verbose: bool = False):
    """Log to stderr so CSV and JSON on stdout stay clean"""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        handlers=[logging.StreamHandler(sys.stderr)],
        force=True,
    )


@click.group()
@click.version_option(__version__, prog_name="cointurn")
@click.option("--verbose", "-v", is_flag=True, help="debug logging")
def cli(verbose):
    """Coin-turning random walks: exact analytics, simulation and the zigzag limit"""
    configure_logging(verbose)
    if load_dotenv():
        logger.debug("Loaded environment variables from .env file")


for command in COMMANDS:
    cli.add_command(command)


def main():
    cli()


if __name__ == "__main__":
    main()
