"""
Django command to draw report figures for a suite directory.
"""
from core.management.base import PipelineCommand
from distill.reporting import report


class Command(PipelineCommand):
    help = ('Bar chart per setup and size, class-wise gains, sample '
            'spectrogram/frame-gram pairs and an improvements table.')

    def add_arguments(self, parser):
        parser.add_argument('run_dir')
        parser.add_argument('--out', default=None,
                            help='output directory '
                                 '(default: IUSP_OUTPUT_DIR/report)')
        parser.add_argument('--seed', type=int, default=0,
                            help='seed of the rendered sample clips')

    def run(self, **options):
        for path in report(options['run_dir'], options['out'],
                           seed=options['seed']):
            self.stdout.write(str(path))
