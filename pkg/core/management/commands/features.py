"""
Django command to cache teacher and student log-mel features.
"""
from pathlib import Path

from audio.features import extract_corpus
from audio.manifest import load_manifest
from core.management.base import PipelineCommand


class Command(PipelineCommand):
    help = 'Extract 64-bin and 20-bin log-mel features for every split.'

    def add_arguments(self, parser):
        self.add_data_argument(parser)
        parser.add_argument('--out', default=None,
                            help='cache directory (default: <data>/features)')
        self.add_jobs_argument(parser)

    def run(self, **options):
        data_dir = Path(self.data_dir(options['data']))
        out = Path(options['out'] or data_dir / 'features')
        clips = []
        for split in ('train', 'val', 'test'):
            clips += load_manifest(data_dir / f'{split}.csv',
                                   data_dir / 'audio')
        paths = extract_corpus(clips, out, jobs=self.jobs(options['jobs']))
        self.stdout.write(self.style.SUCCESS(
            f'{len(paths)} feature files in {out}'))
