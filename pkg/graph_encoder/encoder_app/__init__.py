import argparse
import json
import logging
import sys

from ..config import Config
from ..errors import VALIDATION_ERRORS
from ..utils import resolve_threads

logger = logging.getLogger(__name__)


class EncoderApp:
    """
    The command-line application: a parser with one sub-command per
    registered handler, plus the dispatch that turns failures into exit codes.
    """

    def __init__(self, config_class, commands):
        self.config = config_class
        self.commands = commands
        self.parser = argparse.ArgumentParser(
            prog='graph_encoder',
            description='One-hot graph encoder embedding: embed, cluster, classify, generate, bootstrap, bench.',
        )
        self.parser.add_argument('--threads', type=int, default=None,
                                 help='worker cap (default: GEE_THREADS or 1)')
        self.parser.add_argument('--json', action='store_true', help='print the run report as JSON')
        self.parser.add_argument('-v', '--verbose', action='store_true', help='debug logging')
        subparsers = self.parser.add_subparsers(dest='command', required=True)
        for name, (help_text, arguments, _) in commands.items():
            arguments(subparsers.add_parser(name, help=help_text), config_class)

    def run(self, argv=None, stdout=None, stderr=None):
        """
        Parse argv, run the command and report.

        Returns:
            int: 0 on success, 2 on usage or validation errors, 1 otherwise.
        """
        stdout = stdout or sys.stdout
        stderr = stderr or sys.stderr
        try:
            args = self.parser.parse_args(argv)
        except SystemExit as exit_:
            return 0 if exit_.code in (0, None) else 2

        if args.verbose:
            logging.getLogger().setLevel(logging.DEBUG)
        args.threads = resolve_threads(args.threads, self.config.THREADS)
        handler = self.commands[args.command][2]

        try:
            report = handler(args, self.config)
        except VALIDATION_ERRORS as e:
            logger.debug("command=%s failed", args.command, exc_info=True)
            print(f"error: {e}", file=stderr)
            return 2
        except Exception as e:
            logger.exception("command=%s failed", args.command)
            print(f"error: {e}", file=stderr)
            return 1

        from .commands import peak_memory_mb
        report.peak_memory_mb = peak_memory_mb()
        if args.json:
            print(json.dumps(report.to_dict(), indent=2), file=stdout)
        else:
            print(format_report(report), file=stderr)
        return 0


def format_report(report):
    """Human-readable run report."""
    lines = [f"{report.command}:"]
    lines += [f"  {key} = {value}" for key, value in report.parameters.items()]
    lines += [f"  phase {name}: {ms:.1f} ms" for name, ms in report.phases_ms.items()]
    for key, value in report.results.items():
        if key == 'table':
            for row in value:
                lines.append("  " + " ".join(f"{k}={v}" for k, v in row.items()))
        elif key == 'reports':
            for entry in value:
                lines.append(
                    f"  {entry['classifier']}: mean_error={entry['mean_error']:.4f} "
                    f"std_error={entry['std_error']:.4f} chance_error={entry['chance_error']:.4f}"
                )
        else:
            lines.append(f"  {key} = {value}")
    if report.peak_memory_mb is not None:
        lines.append(f"  peak memory: {report.peak_memory_mb:.1f} MB")
    lines += [f"  wrote {path}" for path in report.outputs]
    return "\n".join(lines)


def create_app(config_class=Config):
    """
    Create the command-line app using the provided configuration class.

    Parameters:
        config_class (Config): The configuration class to use for the app.

    Returns:
        EncoderApp: The app with every command registered.
    """
    from .commands import COMMANDS

    return EncoderApp(config_class, COMMANDS)
