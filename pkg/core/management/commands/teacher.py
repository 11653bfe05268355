"""
Django command to fit the teacher stand-in used for distillation.
"""
from core.management.base import TrainingCommand
from distill.networks import save_checkpoint
from distill.training import TEACHER_GATE, RunRecorder, fit_teacher


class Command(TrainingCommand):
    help = ('Train the max-pooling CNN teacher on BCE and save '
            '<out>/teacher.ckpt.')

    def add_arguments(self, parser):
        self.add_training_arguments(parser)

    def run(self, **options):
        cfg, paths = self.load_config(options)
        data = self.load_data(paths, options)
        out = self.out_dir(options, 'teacher')

        model, result = fit_teacher(cfg, data, recorder=RunRecorder(out))
        checkpoint = save_checkpoint(model, out / 'teacher.ckpt')

        self.stdout.write(f'test_micro_auprc\t{result.test_micro_auprc:.6f}')
        if result.test_micro_auprc < TEACHER_GATE:
            self.stderr.write(f'teacher below the {TEACHER_GATE} gate')
        self.stdout.write(self.style.SUCCESS(f'teacher saved to {checkpoint}'))
