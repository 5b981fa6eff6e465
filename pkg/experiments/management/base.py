"""
Shared options and error handling of the experiment commands.
"""
import logging
import sys

from django.core.management.base import BaseCommand, CommandError, CommandParser

from experiments.config import build_sweep_config
from experiments.exceptions import EXIT_USAGE, command_exception_handler

logger = logging.getLogger('experiments')

# Command-line option name -> flat override key
CLI_OVERRIDES = {
    'seed': 'seed',
    'out': 'output_dir',
    'method': 'method',
    'lambda_grid': 'lambda_grid',
    'subsystem': 'subsystems',
    'trials': 'trials',
    'shots': 'shots',
    'workers': 'workers',
    'n_outer': 'n_outer',
}


class UsageParser(CommandParser):
    """Command parser that exits with the usage code on bad arguments."""

    def error(self, message):
        if self.called_from_command_line:
            self.print_usage(sys.stderr)
            self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")
        raise CommandError(f"Error: {message}", returncode=EXIT_USAGE)


class QneeCommand(BaseCommand):
    """Base class for commands that run on a merged sweep configuration."""

    def create_parser(self, prog_name, subcommand, **kwargs):
        parser = super().create_parser(prog_name, subcommand, **kwargs)
        parser.__class__ = UsageParser
        return parser

    def add_arguments(self, parser):
        parser.add_argument('--config', help='JSON sweep configuration file')
        parser.add_argument('--seed', type=int, help='Global seed')
        parser.add_argument('--out', help='Output directory')
        parser.add_argument('--method', choices=['qnee', 'vqse', 'both', 'exact'])
        parser.add_argument('--lambda-grid', help='Comma-separated field values')
        parser.add_argument('--subsystem', help='Comma-separated subsystem sizes')
        parser.add_argument('--trials', type=int, help='Trials per cell')
        parser.add_argument('--shots', type=int, help='Shots per evaluation')
        parser.add_argument('--workers', type=int, help='Worker processes')
        parser.add_argument('--n-outer', type=int, help='Outer gradient steps')

    def cli_overrides(self, options):
        return {key: options.get(option) for option, key in CLI_OVERRIDES.items() if options.get(option) is not None}

    def load_config(self, options, **forced):
        overrides = {**self.cli_overrides(options), **forced}
        return build_sweep_config(options.get('config'), overrides)

    def handle(self, *args, **options):
        try:
            return self.run(**options)
        except CommandError:
            raise
        except Exception as exc:
            raise command_exception_handler(exc, {'command': self.__module__.rsplit('.', 1)[-1]}) from exc

    def run(self, **options):
        raise NotImplementedError('subclasses of QneeCommand must provide a run() method')
