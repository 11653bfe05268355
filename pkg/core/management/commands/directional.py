"""
Django command to check that BCE+KD+SP+IUSP beats plain BCE on held-out
synthetic clips and stays level with BCE+KD+SP.
"""
from core.exceptions import ConfigurationError, DirectionalCheckError
from core.management.base import TrainingCommand
from distill.training import (
    DIRECTIONAL_HIDDEN,
    DIRECTIONAL_MIN_SEEDS,
    run_directional_check,
    summarize_suite,
    write_suite_results,
)


class Command(TrainingCommand):
    help = ('Gate the teacher on its test micro AUPRC, train BCE, BCE+KD+SP '
            'and BCE+KD+SP+IUSP over several seeds and fail unless the '
            'full setup wins.')

    def add_arguments(self, parser):
        self.add_training_arguments(parser)
        parser.add_argument('--lstm-hidden', type=int,
                            default=DIRECTIONAL_HIDDEN)
        parser.add_argument('--trials', type=int,
                            default=DIRECTIONAL_MIN_SEEDS,
                            help='seeds per setup, counting up from --seed')

    def run(self, **options):
        if options['trials'] < DIRECTIONAL_MIN_SEEDS:
            raise ConfigurationError(
                f'--trials must be >= {DIRECTIONAL_MIN_SEEDS}, got '
                f'{options["trials"]}')
        cfg, paths = self.load_config(options)
        teacher = self.load_teacher(paths)
        data = self.load_data(paths, options)
        out = self.out_dir(options, 'directional')
        seeds = [cfg.seed + i for i in range(options['trials'])]

        cells, check = run_directional_check(
            cfg, seeds, data, teacher, lstm_hidden=options['lstm_hidden'],
            jobs=self.jobs(options['jobs']), out_dir=out)
        write_suite_results(cells, out)
        check.to_frame().to_csv(out / 'directional.csv', index=False,
                                lineterminator='\n', float_format='%.17g')
        self.record(lambda: self.index_cells(cfg, cells, out), 'suite')

        self.stdout.write(summarize_suite(cells).to_string(index=False))
        self.stdout.write(check.to_frame().to_string(index=False))
        if not check.passed:
            raise DirectionalCheckError(
                f'BCE+KD+SP+IUSP beats BCE: {check.beats_bce}; within '
                f'{check.margin:g} of BCE+KD+SP: {check.not_worse_than_sp}; '
                f'results in {out}', check=check)
        self.stdout.write(self.style.SUCCESS(
            f'directional check passed; results in {out}'))
