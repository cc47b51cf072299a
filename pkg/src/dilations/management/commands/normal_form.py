from ..base import JobCommand
from ...models import JobConfig
from ...tools.equivalence import expansive_normal_form
from ...tools.export import to_json


class Command(JobCommand):
    help = "Print the expansive normal form of A (and of B if the job has one)"
    required_matrices = ("A",)

    def handle_job(self, config: JobConfig, **options) -> str:
        report = {"schema": 1}
        for name, matrix in sorted(config.matrices.items()):
            report[f"normal_form_{name}"] = expansive_normal_form(matrix, config.tol_eig, config.tol_jordan).to_dict()
        return to_json(report)
