from ..base import JobCommand
from ...models import JobConfig
from ...tools.equivalence import classify_pair
from ...tools.export import verdict_json


class Command(JobCommand):
    help = "Decide whether A and B induce the same homogeneous and inhomogeneous Besov scales and Hardy spaces"

    def add_arguments(self, parser):
        parser.add_argument(
            "--compare-quasi-norms",
            action="store_true",
            help="Add sampled quasi-norm ratios of the transposed matrices to the report",
        )

    def handle_job(self, config: JobConfig, **options) -> str:
        verdict = classify_pair(config.matrices["A"], config.matrices["B"], config)
        return verdict_json(verdict)
