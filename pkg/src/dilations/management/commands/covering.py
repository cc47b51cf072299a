from ..base import JobCommand
from ...models import JobConfig
from ...tools.coverings import weak_equivalence_counts, weakly_equivalent
from ...tools.export import count_table_csv


class Command(JobCommand):
    help = "Count intersecting members of the coverings induced by A and B for every R of the ladder"

    def handle_job(self, config: JobConfig, **options) -> str:
        A, B = config.matrices["A"], config.matrices["B"]
        tolerances = dict(cluster_tol=config.tol_eig, reconstruction_tol=config.tol_jordan)
        blocks = []
        for R in config.r_ladder:
            table = weak_equivalence_counts(A, B, R, config.covering_range, config.side, **tolerances)
            blocks.append(f"# R: {R:.17g}\n{count_table_csv(table)}")
        verdict = all(weakly_equivalent(A, B, R, config.covering_range, config.side, **tolerances)
                      for R in config.r_ladder)
        blocks.append(f"# weakly_equivalent: {str(verdict).lower()}\n")
        return "".join(blocks)
