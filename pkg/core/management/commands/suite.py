"""
Django command to run the setups x LSTM sizes x seeds comparison.
"""
from core.management.base import TrainingCommand, int_list, setup_list
from distill.losses import Setup
from distill.networks import LSTM_SIZES
from distill.training import (
    run_setup_suite,
    summarize_suite,
    write_suite_results,
)


class Command(TrainingCommand):
    help = ('Train every (setup, LSTM size, seed) cell; failed cells are '
            'recorded and the rest continue.')

    def add_arguments(self, parser):
        self.add_training_arguments(parser)
        parser.add_argument(
            '--setup', type=setup_list,
            default=','.join(s.value for s in Setup),
            help='comma separated setups (default: all five)')
        parser.add_argument(
            '--lstm-hidden', type=int_list,
            default=','.join(map(str, LSTM_SIZES)),
            help='comma separated LSTM sizes')
        parser.add_argument('--trials', type=int, default=8,
                            help='seeds per cell, counting up from --seed')

    def run(self, **options):
        setups = options['setup']
        cfg, paths = self.load_config(options)
        teacher = self.load_teacher(
            paths, needed=any(s.uses_teacher for s in setups))
        data = self.load_data(paths, options)
        out = self.out_dir(options, 'suite')
        seeds = [cfg.seed + i for i in range(max(1, options['trials']))]

        cells = run_setup_suite(cfg, setups, seeds, options['lstm_hidden'],
                                data, teacher,
                                jobs=self.jobs(options['jobs']), out_dir=out)
        write_suite_results(cells, out)
        self.record(lambda: self.index_cells(cfg, cells, out), 'suite')

        failed = sum(cell.result is None for cell in cells)
        self.stdout.write(summarize_suite(cells).to_string(index=False))
        self.stdout.write(self.style.SUCCESS(
            f'{len(cells) - failed} runs completed, {failed} failed; '
            f'results in {out}'))
