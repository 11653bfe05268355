"""
Django command to grid-search the teacher/student hint layers.
"""
import math
from dataclasses import replace

import yaml

from core import models
from core.management.base import TrainingCommand, int_list
from distill.losses import Setup
from distill.networks import LSTM_SIZES, HintPair
from distill.training import tune_hint_layers


class Command(TrainingCommand):
    help = ('Try every (teacher hint, student hint) pair and keep the one '
            'with the best mean validation micro AUPRC.')

    def add_arguments(self, parser):
        self.add_training_arguments(parser)
        parser.add_argument(
            '--setup',
            choices=[s.value for s in Setup if s.terms & {'sp', 'iusp'}],
            default=Setup.BCE_KD_SP_IUSP.value)
        parser.add_argument(
            '--lstm-hidden', type=int_list,
            default=','.join(map(str, LSTM_SIZES)),
            help='comma separated LSTM sizes')
        parser.add_argument('--trials', type=int, default=1,
                            help='seeds per (pair, size) cell')

    def run(self, **options):
        setup = Setup(options['setup'])
        cfg, paths = self.load_config(options, setup=setup.value)
        teacher = self.load_teacher(paths)
        data = self.load_data(paths, options)
        out = self.out_dir(options, 'tune_hints')
        out.mkdir(parents=True, exist_ok=True)

        tuning = tune_hint_layers(setup, options['lstm_hidden'],
                                  options['trials'], data, teacher,
                                  base_cfg=cfg,
                                  jobs=self.jobs(options['jobs']),
                                  out_dir=out)
        tuning.table.to_csv(out / 'hint_tuning.csv', index=False,
                            lineterminator='\n', float_format='%.17g')
        selection = {f'hint_{name}': str(pair)
                     for name, pair in tuning.selection.items()}
        with open(out / 'selection.yaml', 'w', encoding='utf-8') as fh:
            yaml.safe_dump(selection, fh, sort_keys=False)
        self.record(lambda: self._index(cfg, tuning, out), 'tuning')

        for key, value in selection.items():
            self.stdout.write(f'{key}\t{value}')
        self.stdout.write(self.style.SUCCESS(f'tuning written to {out}'))

    def _index(self, cfg, tuning, out):
        suite = models.Suite.objects.create(kind='tuning', out_dir=str(out))
        for row in tuning.table.itertuples(index=False):
            pair = HintPair(row.teacher, row.student)
            run_cfg = replace(cfg, lstm_hidden=int(row.lstm_hidden),
                              seed=int(row.seed),
                              hint_sp=pair if 'sp' in cfg.setup.terms
                              else None,
                              hint_iusp=pair if 'iusp' in cfg.setup.terms
                              else None)
            score = float(row.val_micro_auprc)
            failed = math.isnan(score)
            models.Run.objects.create(
                suite=suite, setup=cfg.setup.value,
                lstm_hidden=run_cfg.lstm_hidden, seed=run_cfg.seed,
                config=run_cfg.to_dict(),
                status=models.Run.FAILED if failed else models.Run.COMPLETED,
                best_val_micro_auprc=None if failed else score,
            )
        return suite
