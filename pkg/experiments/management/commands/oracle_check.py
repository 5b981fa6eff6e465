"""
Invariant suite against exact oracles, printed as PASS/FAIL lines.
"""
from dataclasses import asdict

from django.conf import settings

from experiments.management.base import QneeCommand
from experiments.oracle import CHECKS, assert_suite, run_suite
from experiments.storage import RecordStore

CHECK_NAMES = [check.__name__[len('check_'):] for check in CHECKS]


class Command(QneeCommand):
    help = 'Run the invariant suite (bounds, majorization, limits, gradients) and report measured tolerances'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--instances', type=int, default=settings.QNEE_ORACLE_INSTANCES,
                            help='Random instances per check')
        parser.add_argument('--check', action='append', choices=CHECK_NAMES, dest='checks',
                            help='Run only this check (repeatable)')
        parser.add_argument('--mutate', action='store_true',
                            help='Run against a von Neumann cost with a sign error in its normalization term')

    def run(self, **options):
        cfg = self.load_config(options, method='exact')
        results = run_suite(options['instances'], cfg.seed, options['mutate'], options.get('checks'))
        for result in results:
            self.stdout.write(result.line())
        passed = sum(result.passed for result in results)
        self.stdout.write(f"{passed}/{len(results)} checks passed ({sum(r.count for r in results)} instances)")
        RecordStore(cfg.output_dir).write_csv('oracle', [asdict(result) for result in results])
        assert_suite(results)
        self.stdout.write(self.style.SUCCESS('All invariant checks passed'))
