import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from src.api.cli import CommandLine
from src.models.errors import DGError

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'


def configure_logging(out_dir: Path, verbose: bool = False):
    out_dir.mkdir(parents=True, exist_ok=True)
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format=LOG_FORMAT,
        handlers=[
            logging.StreamHandler(sys.stdout),
            logging.FileHandler(out_dir / 'dgcdr.log')
        ],
        force=True,
    )


class DGSolverApplication:
    def __init__(self):
        self.command_line = CommandLine()
        self.logger = logging.getLogger("Application")

    def run(self, argv: Optional[Sequence[str]] = None) -> int:
        args = self.command_line.parse(argv)
        configure_logging(Path(args.out), args.verbose)
        self.logger.info(f"Running '{args.command}' with output in {args.out}")
        try:
            status = self.command_line.dispatch(args)
        except DGError as exc:
            self.logger.error(f"{type(exc).__name__}: {exc}")
            return 1
        except OSError as exc:
            self.logger.error(f"I/O failure on {exc.filename or 'unknown path'}: {exc.strerror or exc}")
            return 1
        self.logger.info(f"Finished '{args.command}' with status {status}")
        return status


def main(argv: Optional[Sequence[str]] = None) -> int:
    return DGSolverApplication().run(argv)


if __name__ == "__main__":
    sys.exit(main())
