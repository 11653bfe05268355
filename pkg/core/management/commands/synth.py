"""
Django command to render the synthetic urban-sound corpus.
"""
from audio.synth import generate_dataset
from core.management.base import PipelineCommand


class Command(PipelineCommand):
    help = 'Render synthetic 10 s clips plus train/val/test manifests.'

    def add_arguments(self, parser):
        parser.add_argument('--seed', type=int, default=0)
        parser.add_argument('--train', type=int, default=256)
        parser.add_argument('--val', type=int, default=64)
        parser.add_argument('--test', type=int, default=64)
        parser.add_argument('--out', default=None,
                            help='output directory (default: IUSP_DATA_DIR)')
        self.add_jobs_argument(parser)

    def run(self, **options):
        manifest = generate_dataset(
            options['train'], options['val'], options['test'],
            options['seed'], self.data_dir(options['out']),
            jobs=self.jobs(options['jobs']),
        )
        for split, path in manifest.splits.items():
            self.stdout.write(f'{split}\t{path}')
        self.stdout.write(self.style.SUCCESS(f'corpus written to '
                                             f'{manifest.root}'))
