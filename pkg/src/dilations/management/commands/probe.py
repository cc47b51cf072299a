from ..base import JobCommand
from ...models import JobConfig
from ...tools.equivalence import boundedness_probe
from ...tools.export import probe_csv


class Command(JobCommand):
    help = "Sample log ||A^-k B^floor(eps k)|| and classify its growth"

    def handle_job(self, config: JobConfig, **options) -> str:
        probe = boundedness_probe(config.matrices["A"], config.matrices["B"], config.k_max, config.side,
                                  cluster_tol=config.tol_eig, reconstruction_tol=config.tol_jordan)
        return probe_csv(probe)
