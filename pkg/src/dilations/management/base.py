"""
Shared plumbing of the besovscale management commands: job files, common flags and exit codes.

A command subclasses JobCommand, declares its own flags in add_arguments and returns the text to write from
handle_job. Reading the job, validating the matrices and mapping errors to exit codes lives here.
"""
import argparse
import json
import logging

from django.conf import settings
from django.core.management.base import BaseCommand, CommandError

from ..errors import DilationError, InvalidJob, InvalidMatrix
from ..models import JobConfig, ProbeSide
from ..tools.linalg_core import as_matrix

JOB_SCHEMA = 1
JOB_KEYS = {"schema", "A", "B"}
MIN_K_MAX = 50
COMMANDS = ["classify", "normal-form", "probe", "covering"]


def parse_job(text: str) -> dict:
    """Matrices of a job document {"schema": 1, "A": [[...]], "B": [[...]]}"""
    try:
        document = json.loads(text)
    except json.JSONDecodeError as e:
        raise InvalidJob(f"Malformed job JSON at line {e.lineno}, column {e.colno}: {e.msg}")
    if not isinstance(document, dict):
        raise InvalidJob("A job must be a JSON object")
    unknown = set(document) - JOB_KEYS
    if unknown:
        raise InvalidJob(f"Unknown job fields: {', '.join(sorted(unknown))}")
    if document.get("schema", JOB_SCHEMA) != JOB_SCHEMA:
        raise InvalidJob(f"Unsupported job schema {document['schema']}, expected {JOB_SCHEMA}")
    matrices = {}
    for name in ("A", "B"):
        if name in document:
            try:
                matrices[name] = as_matrix(document[name])
            except InvalidMatrix as e:
                raise InvalidMatrix(f"{name}: {e}")
    return matrices


def _positive(value: str) -> float:
    number = float(value)
    if not number > 0:
        raise argparse.ArgumentTypeError(f"{value} is not positive")
    return number


def _ladder(value: str) -> list:
    try:
        radii = [float(r) for r in value.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"{value} is not a comma separated list of numbers")
    if not radii or any(r <= 1 for r in radii):
        raise argparse.ArgumentTypeError("Every R of the ladder must exceed 1")
    return radii


class JobCommand(BaseCommand):
    # names of the matrices the job has to provide
    required_matrices = ("A", "B")
    requires_system_checks = []

    def create_parser(self, prog_name, subcommand, **kwargs):
        parser = super().create_parser(prog_name, subcommand, **kwargs)
        source = parser.add_mutually_exclusive_group(required=True)
        source.add_argument("--input", metavar="PATH", help="Path of a job JSON file")
        source.add_argument("--inline", metavar="JSON", help="Job JSON given on the command line")
        parser.add_argument("--tol-eig", type=_positive, default=settings.EIGENVALUE_CLUSTER_TOL,
                            help="Eigenvalue clustering tolerance")
        parser.add_argument("--tol-jordan", type=_positive, default=settings.JORDAN_RECONSTRUCTION_TOL,
                            help="Jordan reconstruction tolerance")
        parser.add_argument("--tol-verdict", type=_positive, default=settings.VERDICT_TOL,
                            help="Tolerance of the normal form comparisons")
        parser.add_argument("--kmax", type=int, default=settings.PROBE_K_MAX, help="Largest probe exponent")
        parser.add_argument("--seed", type=int, default=settings.SEED, help="Seed of every random sample")
        parser.add_argument("--side", choices=[side.value for side in ProbeSide],
                            default=ProbeSide.POSITIVE_ONLY.value, help="Exponents sampled by probes and counts")
        parser.add_argument("--r-ladder", type=_ladder, default=settings.R_LADDER,
                            help="Comma separated values of R for the covering counts")
        parser.add_argument("--range", type=int, default=settings.COVERING_RANGE, help="Covering index range")
        parser.add_argument("--out", metavar="PATH", help="Write the result here instead of stdout")
        return parser

    def build_config(self, options: dict) -> JobConfig:
        if options["input"] is not None:
            try:
                with open(options["input"], encoding="utf-8") as f:
                    text = f.read()
            except OSError as e:
                raise InvalidJob(f"Cannot read job file: {e}")
        else:
            text = options["inline"]
        matrices = parse_job(text)
        missing = [name for name in self.required_matrices if name not in matrices]
        if missing:
            raise InvalidJob(f"Job is missing matrix {', '.join(missing)}")
        if options["kmax"] < MIN_K_MAX:
            raise InvalidJob(f"--kmax must be at least {MIN_K_MAX}, got {options['kmax']}")
        return JobConfig(command=self.__module__.rsplit(".", 1)[-1].replace("_", "-"), matrices=matrices,
                         tol_eig=options["tol_eig"], tol_jordan=options["tol_jordan"],
                         tol_verdict=options["tol_verdict"], k_max=options["kmax"], seed=options["seed"],
                         r_ladder=options["r_ladder"], covering_range=options["range"],
                         side=ProbeSide(options["side"]), out=options["out"],
                         compare_quasi_norms=options.get("compare_quasi_norms", False))

    def handle_job(self, config: JobConfig, **options) -> str:
        raise NotImplementedError("subclasses of JobCommand must provide a handle_job() method")

    def handle(self, *args, **options):
        try:
            config = self.build_config(options)
            output = self.handle_job(config, **options)
        except DilationError as e:
            logging.debug(f"{type(e).__name__} while running {self.__module__}", exc_info=True)
            raise CommandError(f"{type(e).__name__}: {e}", returncode=e.exit_code)
        if config.out:
            with open(config.out, "w", encoding="utf-8", newline="") as f:
                f.write(output)
            return None
        return output
