"""
Command-line entry point for the cut-selection experiments.

This package follows the same separation of concerns throughout:
- Config:    Presets and environment settings (config.py)
- Models:    Results-store tables and file-format DTOs (models/)
- Services:  Evaluation, reporting and training-metric logic (utils/services.py)
- Commands:  CLI subcommands (commands/)
- Database:  SQLAlchemy engine and helpers (utils/database.py)
"""

import logging
import sys
from pathlib import Path
from typing import Any, Mapping, Optional

import click
from pydantic import ValidationError

from HierarchicalCutSelector.config import (
    Config,
    get_config_class,
    load_settings,
    preset_name,
    read_overrides,
)
from HierarchicalCutSelector.exceptions import ConfigError, MissingArtifact
from HierarchicalCutSelector.commands.context import RunContext, pass_run
from HierarchicalCutSelector.commands.evaluate import evaluate_command, generalize_command
from HierarchicalCutSelector.commands.generate import generate_command
from HierarchicalCutSelector.commands.order_study import order_study_command
from HierarchicalCutSelector.commands.pca import pca_command
from HierarchicalCutSelector.commands.train import train_command
from HierarchicalCutSelector.utils.database import check_health, reset_database
from HierarchicalCutSelector.utils.services import ReportService

EXIT_CONFIG = 2
EXIT_MISSING_ARTIFACT = 3

logger = logging.getLogger(__name__)


def configure_logging(level: str = 'INFO') -> logging.Logger:
    """Attach a stdout handler to the package logger once and set its level."""
    package_logger = logging.getLogger('HierarchicalCutSelector')
    package_logger.setLevel(getattr(logging, str(level).upper(), logging.INFO))
    if not any(getattr(h, '_hcs', False) for h in package_logger.handlers):
        stream_handler = logging.StreamHandler(sys.stdout)
        stream_handler.setFormatter(logging.Formatter('%(asctime)s %(levelname)s: %(message)s'))
        stream_handler._hcs = True
        package_logger.addHandler(stream_handler)
    return package_logger


class ExperimentGroup(click.Group):
    """Maps configuration and missing-artifact failures to their exit codes."""

    def invoke(self, ctx: click.Context) -> Any:
        try:
            return super().invoke(ctx)
        except ValidationError as exc:
            logger.error("Pydantic fail: %s", exc.errors())
            click.echo(f'Error: invalid configuration: {exc}', err=True)
            ctx.exit(EXIT_CONFIG)
        except ConfigError as exc:
            logger.error("Configuration error: %s", exc)
            click.echo(f'Error: {exc}', err=True)
            ctx.exit(EXIT_CONFIG)
        except MissingArtifact as exc:
            logger.error("Missing artifact: %s", exc)
            click.echo(f'Error: {exc}', err=True)
            ctx.exit(EXIT_MISSING_ARTIFACT)
        finally:
            if isinstance(ctx.obj, RunContext):
                ctx.obj.close()


def create_cli(
    config_class: type[Config] | None = None,
    config_overrides: Optional[Mapping[str, Any]] = None,
) -> click.Group:
    """
    Create the ``HierarchicalCutSelector`` command group.

    The preset is taken from ``--preset``, else *config_class*, else the
    ``HCS_PRESET`` environment variable. Settings from a ``--config`` JSON
    file are applied after *config_overrides*.

    Args:
        config_class: A :class:`~HierarchicalCutSelector.config.Config`
            subclass to use when ``--preset`` is not given.
        config_overrides: Optional mapping of setting overrides, intended for
            test fixtures.

    Returns:
        Configured :class:`click.Group`.
    """

    @click.group('HierarchicalCutSelector', cls=ExperimentGroup)
    @click.option('--config', 'config_path', type=click.Path(path_type=Path), default=None,
                  help='JSON file of setting overrides.')
    @click.option('--preset', type=click.Choice(['desk', 'paper', 'testing']), default=None,
                  help='Settings preset (default: HCS_PRESET or desk).')
    @click.option('--seed', type=int, default=0, show_default=True, help='Master seed.')
    @click.option('--out', 'out_dir', type=click.Path(path_type=Path), default=Path('runs'), show_default=True,
                  help='Directory receiving every output file.')
    @click.pass_context
    def cli(ctx: click.Context, config_path: Optional[Path], preset: Optional[str], seed: int, out_dir: Path) -> None:
        """Learned cut selection for a small branch-and-cut MILP solver."""
        if preset is not None:
            active = get_config_class(preset)
        else:
            active = config_class or get_config_class()
        settings = load_settings(active, {**(config_overrides or {}), **read_overrides(config_path)})
        configure_logging(settings['LOG_LEVEL'])
        out_dir.mkdir(parents=True, exist_ok=True)
        ctx.obj = RunContext(settings=settings, preset=preset_name(active), seed=seed, out_dir=out_dir)

    for command in (
        generate_command,
        train_command,
        evaluate_command,
        generalize_command,
        order_study_command,
        pca_command,
    ):
        cli.add_command(command)
    register_cli_commands(cli)
    return cli


def register_cli_commands(cli: click.Group) -> None:
    """
    Register results-store maintenance commands.

    Args:
        cli: The command group.
    """

    @cli.command('db-info')
    @pass_run
    def db_info_command(run: RunContext):
        """Display results-store information."""
        url = str(run.engine.url)
        click.echo('Results store:')
        click.echo(f'  Type: {url.split("://")[0].split("+")[0]}')
        click.echo(f'  URL: {url}')
        for run_id, count in ReportService(run.session).list_runs():
            click.echo(f'  {run_id}: {count} rows')

    @cli.command('db-reset')
    @click.confirmation_option(prompt='Are you sure you want to reset the results store? This will delete all rows!')
    @pass_run
    def db_reset_command(run: RunContext):
        """
        Reset the results store (drop and recreate all tables).

        This will DELETE ALL STORED RESULTS!
        """
        click.echo('Resetting results store...')
        reset_database(run.engine)
        click.echo('Results store has been reset.')

    @cli.command('db-health')
    @pass_run
    def db_health_command(run: RunContext):
        """Check results-store connectivity."""
        if check_health(run.session):
            click.echo('✓ Results store is healthy and responding.')
        else:
            click.echo('✗ Results store health check failed.', err=True)
            sys.exit(1)


def main() -> None:
    """
    Entry point for the installed ``HierarchicalCutSelector`` command.

    Set ``HCS_PRESET`` to ``desk`` (default), ``paper`` or ``testing``, and
    override individual settings with ``HCS_<NAME>`` environment variables.
    """
    create_cli()(prog_name='HierarchicalCutSelector')
