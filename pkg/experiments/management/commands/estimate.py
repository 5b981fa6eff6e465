"""
Entropy estimation sweep over the lambda grid.
"""
from django.core.management.base import CommandError

from experiments.exceptions import EXIT_ESTIMATION
from experiments.management.base import QneeCommand
from experiments.sweep import run_sweep


class Command(QneeCommand):
    help = 'Run QNEE and/or VQSE on every (lambda, subsystem) cell and write the result tables'

    def run(self, **options):
        cfg = self.load_config(options)
        sweep = run_sweep(cfg)
        for row in sweep.aggregates:
            line = f"{row['method']} lambda={row['lambda']:g} n={row['subsystem']} exact={row['exact_entropy']:.6f}"
            if row['n_ok']:
                line += f" min={row['min']:.6f} mean={row['mean']:.6f} std={row['std']:.6f}"
            self.stdout.write(line)
        for method, rho in sweep.correlations.items():
            self.stdout.write(f"{method}: Spearman(|error|, S) = {'n/a' if rho is None else f'{rho:.3f}'}")
        if sweep.failed:
            raise CommandError(
                f"{len(sweep.failed)} of {len(sweep.cells)} cells failed; results written to {cfg.output_dir}",
                returncode=EXIT_ESTIMATION,
            )
        self.stdout.write(self.style.SUCCESS(f"Wrote {len(sweep.cells)} cells to {cfg.output_dir}"))
