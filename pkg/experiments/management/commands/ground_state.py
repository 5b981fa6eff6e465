"""
Exact ground-state tables: energies, reduced states, entropies, spectra and
the entanglement scaling fit for every field of the grid.
"""
from experiments.management.base import QneeCommand
from experiments.storage import RecordStore
from experiments.sweep import write_exact


class Command(QneeCommand):
    help = 'Write exact ground-state, reduced-state and scaling tables for the lambda grid'

    def run(self, **options):
        cfg = self.load_config(options, method='exact')
        store = RecordStore(cfg.output_dir)
        states = write_exact(cfg, store)
        for (li, n), state in sorted(states.items()):
            self.stdout.write(f"lambda={cfg.lambda_grid[li]:g} n={n} S={state.entropy:.6f}")
        self.stdout.write(self.style.SUCCESS(f"Wrote {len(states)} reduced states to {cfg.output_dir}"))
