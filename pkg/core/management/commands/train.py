"""
Django command to train one student.
"""
from core import models
from core.management.base import TrainingCommand
from distill.losses import Setup
from distill.training import RunRecorder, train_once


class Command(TrainingCommand):
    help = 'Train one student with early stopping and write its run directory.'

    def add_arguments(self, parser):
        self.add_training_arguments(parser)
        parser.add_argument('--setup', choices=[s.value for s in Setup],
                            default=None)
        parser.add_argument('--lstm-hidden', type=int, default=None)

    def run(self, **options):
        cfg, paths = self.load_config(options, setup=options['setup'],
                                      lstm_hidden=options['lstm_hidden'])
        teacher = self.load_teacher(
            paths, needed=cfg.effective_weights.needs_teacher())
        data = self.load_data(paths, options)
        out = self.out_dir(options, 'train')

        result = train_once(cfg, data, teacher, RunRecorder(out))
        self.record(lambda: models.Run.objects.record(
            cfg, result, suite=models.Suite.objects.create(
                kind='single', out_dir=str(out)),
            run_dir=out), 'run')

        self.stdout.write(f'best_val_micro_auprc\t'
                          f'{result.best_val_micro_auprc:.6f}')
        self.stdout.write(f'best_epoch\t{result.best_epoch}')
        self.stdout.write(f'test_micro_auprc\t{result.test_micro_auprc:.6f}')
        self.stdout.write(self.style.SUCCESS(f'run written to {out}'))
