"""Command-line utility for classifying expansive matrices."""
import argparse
import os
import sys

from django.core.management import execute_from_command_line

from dilations.management.base import COMMANDS


def main(argv=None) -> int:
    """Run the command named by --command (classify by default) and return its exit code."""
    os.environ.setdefault("DJANGO_SETTINGS_MODULE", "besovscale.settings")
    argv = sys.argv[1:] if argv is None else list(argv)
    selector = argparse.ArgumentParser(prog="besovscale", add_help=False, allow_abbrev=False)
    selector.add_argument("--command", choices=COMMANDS, default="classify")
    try:
        known, rest = selector.parse_known_args(argv)
        execute_from_command_line(["besovscale", known.command.replace("-", "_"), *rest])
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else 1
    return 0


if __name__ == '__main__':
    sys.exit(main())
