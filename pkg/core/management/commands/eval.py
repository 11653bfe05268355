"""
Django command to score predictions against labels.
"""
from pathlib import Path

from audio.features import FeatureSet
from audio.manifest import load_manifest
from core.exceptions import ConfigurationError
from core.management.base import PipelineCommand
from distill.evaluation import evaluate, evaluate_model, load_predictions
from distill.networks import load_checkpoint
from distill.reporting import write_eval_results


class Command(PipelineCommand):
    help = ('Print micro and class-wise AUPRC for a prediction CSV, or for '
            'a checkpoint scored on one split.')

    def add_arguments(self, parser):
        parser.add_argument('--pred', default=None,
                            help='prediction CSV (clip_id + 8 scores)')
        parser.add_argument('--labels', default=None,
                            help='label manifest paired with --pred')
        parser.add_argument('--checkpoint', default=None,
                            help='student or teacher checkpoint to score')
        self.add_data_argument(parser)
        parser.add_argument('--split', choices=['train', 'val', 'test'],
                            default='test')
        parser.add_argument('--out', default=None,
                            help='also write auprc.csv and pr_curve.png here')
        self.add_jobs_argument(parser)

    def run(self, **options):
        if options['pred']:
            if not options['labels']:
                raise ConfigurationError('--pred needs --labels')
            predictions = load_predictions(options['pred'], options['labels'])
        elif options['checkpoint']:
            model, _ = load_checkpoint(options['checkpoint'])
            data_dir = Path(self.data_dir(options['data']))
            clips = load_manifest(data_dir / f'{options["split"]}.csv',
                                  data_dir / 'audio')
            features = FeatureSet.from_clips(clips,
                                             self.jobs(options['jobs']))
            predictions = evaluate_model(model, features)
        else:
            raise ConfigurationError('give --pred/--labels or --checkpoint')

        result = evaluate(predictions)
        for scope, value in result.to_frame().itertuples(index=False):
            self.stdout.write(f'{scope}\t{value:.6f}')
        if options['out']:
            for path in write_eval_results(result, options['out']):
                self.stdout.write(str(path))
