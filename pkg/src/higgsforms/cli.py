"""Command line front end: ``higgsforms {run,check,compute} JOB``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ParseError, SingularityError, ValidationError
from .jobs import load_job, run_job

EXIT_OK, EXIT_FAILED, EXIT_PARSE, EXIT_VALIDATION, EXIT_SINGULAR = 0, 1, 2, 3, 4


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="higgsforms", description="Evaluate characteristic forms and identity checks described by a job file.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    helps = {
        "run": "compute all requests and run all checks",
        "check": "run the checks only",
        "compute": "compute the requested forms only",
    }
    for name, text in helps.items():
        q = sub.add_parser(name, help=text)
        q.add_argument("job", help="job file, or the name of a shipped fixture")
        q.add_argument("--tol", type=float, help="override the identity tolerance")
        q.add_argument("--grid", type=int, help="override the integration grid resolution")
        q.add_argument("--seed", type=int, help="override the sampling seed")
        q.add_argument("--out", help="write the JSON report here instead of stdout")
        q.add_argument("--no-timestamp", action="store_true", help="omit the generation time from the report")
        q.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    mode = "all" if args.command == "run" else args.command
    try:
        with np.errstate(all="ignore"):
            spec = load_job(args.job)
            report = run_job(spec, mode, resolution=args.grid, seed=args.seed, tol=args.tol)
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_PARSE
    except ParseError as e:
        print(f"parse error: {e}", file=sys.stderr)
        return EXIT_PARSE
    except ValidationError as e:
        print(f"validation error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except (SingularityError, ZeroDivisionError, np.linalg.LinAlgError) as e:
        print(f"singularity: {e}", file=sys.stderr)
        return EXIT_SINGULAR
    except ValueError as e:
        print(f"validation error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    text = report.to_json(timestamp=not args.no_timestamp)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    for c in report.checks:
        status = "PASS" if c["passed"] else "FAIL"
        print(f"{status} {c['id']}: residual {c['residual']:.3g} (tol {c['tolerance']:.3g})", file=sys.stderr)
    return report.exit_status


if __name__ == "__main__":
    sys.exit(main())
