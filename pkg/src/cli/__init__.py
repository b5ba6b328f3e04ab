# CLI package

from src.cli.runner import VERBS, Command, CommandRunner, run

__all__ = [
    'VERBS',
    'Command',
    'CommandRunner',
    'run',
]
