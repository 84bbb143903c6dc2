"""
`pushforward <command> [--config PATH] [--override KEY=VALUE ...] [--key value ...]`

Exit codes: 0 on success, 1 when a certificate or a seed failed, 2 on usage and config errors.
"""
import logging
import sys
from typing import Callable, Dict, List, Optional, Tuple

import pushforward.config
from pushforward.config import ConfigError
from pushforward.main import plot, run, sweep, verify


logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2

COMMANDS: Dict[str, Tuple[Callable[..., int], Dict[str, str], str]] = {
    "run": (run.main, run.ALIASES, "one experiment over its seed list"),
    "sweep": (sweep.main, sweep.ALIASES, "every agent at every horizon of run.horizons"),
    "verify": (verify.main, {}, "the contraction certificate suites"),
    "plot": (plot.main, {}, "SVG learning curves from aggregate CSVs"),
}


def usage() -> str:
    lines = ["usage: pushforward <command> [--config PATH] [--override KEY=VALUE] [--KEY VALUE ...]", "", "commands:"]
    lines += [f"  {name:8s} {help}" for name, (_, _, help) in COMMANDS.items()]
    return "\n".join(lines)


def main(argv: Optional[List[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if not argv or argv[0] in ("-h", "--help"):
        print(usage())
        return EXIT_OK if argv else EXIT_USAGE

    command, args = argv[0], argv[1:]
    if command not in COMMANDS:
        print(f"unknown command {command!r}\n\n{usage()}", file=sys.stderr)
        return EXIT_USAGE

    fn, aliases, _ = COMMANDS[command]
    try:
        return pushforward.config.main(fn, args=args, aliases=aliases)()
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, OSError) as e:
        print(f"{command}: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
