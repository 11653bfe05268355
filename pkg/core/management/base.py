"""
Shared plumbing for the pipeline verbs
"""
import argparse
import logging
from dataclasses import replace
from pathlib import Path

from django.conf import settings
from django.core.management.base import BaseCommand, CommandError
from django.db import DatabaseError

from core import models
from core.exceptions import ConfigurationError, KDError
from distill.losses import Setup
from distill.networks import load_checkpoint
from distill.serializers import load_train_config
from distill.training import load_splits

logger = logging.getLogger(__name__)


def int_list(text):
    """``"128,64"`` -> ``[128, 64]``"""
    try:
        values = [int(item) for item in str(text).split(',') if item.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(
            f'expected comma separated integers, got {text!r}') from exc
    if not values:
        raise argparse.ArgumentTypeError('expected at least one integer')
    return values


def setup_list(text):
    """``"BCE,BCE+KD"`` -> ``[Setup.BCE, Setup.BCE_KD]``"""
    known = {setup.value: setup for setup in Setup}
    names = [item.strip() for item in str(text).split(',') if item.strip()]
    unknown = [name for name in names if name not in known]
    if unknown or not names:
        raise argparse.ArgumentTypeError(
            f'unknown setup {", ".join(unknown) or text!r}; choose from '
            + ', '.join(known))
    return [known[name] for name in names]


class PipelineCommand(BaseCommand):
    """runs ``run(**options)`` and maps toolkit errors to exit code 1

    The failure message is one line: ``<category>: <detail>``.
    """

    def add_data_argument(self, parser, flag='--data'):
        parser.add_argument(
            flag, default=None,
            help='corpus directory (default: IUSP_DATA_DIR)')

    def add_jobs_argument(self, parser):
        parser.add_argument(
            '--jobs', type=int, default=None,
            help='worker threads (default: IUSP_JOBS or 1)')

    def data_dir(self, value):
        return value or settings.IUSP_DATA_DIR

    def jobs(self, value):
        return max(1, value or settings.IUSP_DEFAULT_JOBS)

    def handle(self, *args, **options):
        try:
            return self.run(*args, **options)
        except KDError as exc:
            raise CommandError(f'{exc.category}: {exc}', returncode=1) \
                from exc

    def run(self, *args, **options):
        raise NotImplementedError

    def record(self, write, what):
        """write to the run index when one is configured; a missing schema
        only warns"""
        if not settings.IUSP_INDEX_RUNS:
            logger.debug('%s not indexed: IUSP_DB_PATH is not set', what)
            return None
        try:
            return write()
        except DatabaseError as exc:
            logger.warning('%s not indexed (run "manage.py migrate"): %s',
                           what, exc)
            return None


class TrainingCommand(PipelineCommand):
    """verbs that read a run config, a corpus and maybe a teacher"""

    def add_training_arguments(self, parser):
        parser.add_argument('--config', default=None,
                            help='YAML run config; flags override it')
        parser.add_argument('--seed', type=int, default=None)
        parser.add_argument('--max-epochs', type=int, default=None)
        parser.add_argument('--precision', choices=['float32', 'float64'],
                            default=None)
        self.add_data_argument(parser)
        parser.add_argument('--features', default=None,
                            help='feature cache written by "features"')
        parser.add_argument('--teacher', default=None,
                            help='teacher checkpoint written by "teacher"')
        parser.add_argument('--out', default=None,
                            help='output directory (default: IUSP_OUTPUT_DIR)')
        self.add_jobs_argument(parser)

    def load_config(self, options, **overrides):
        cfg, paths = load_train_config(
            options['config'], seed=options['seed'],
            max_epochs=options['max_epochs'],
            precision=options['precision'], **overrides)
        paths = replace(
            paths,
            data_dir=Path(options['data']) if options['data']
            else paths.data_dir or Path(settings.IUSP_DATA_DIR),
            features_dir=Path(options['features']) if options['features']
            else paths.features_dir,
            teacher=Path(options['teacher']) if options['teacher']
            else paths.teacher,
        )
        return cfg, paths

    def load_data(self, paths, options):
        return load_splits(paths.data_dir, paths.features_dir,
                           jobs=self.jobs(options['jobs']))

    def load_teacher(self, paths, needed=True):
        if not needed:
            return None
        if paths.teacher is None:
            raise ConfigurationError(
                'a distillation setup needs --teacher or "teacher" in the '
                'config')
        model, header = load_checkpoint(paths.teacher)
        if header.get('architecture') != 'teacher':
            raise ConfigurationError(f'{paths.teacher} is not a teacher '
                                     f'checkpoint')
        return model

    def out_dir(self, options, name):
        return Path(options['out'] or Path(settings.IUSP_OUTPUT_DIR) / name)

    def index_cells(self, cfg, cells, out, kind='suite'):
        """one suite row plus a run row per cell"""
        suite = models.Suite.objects.create(kind=kind, out_dir=str(out))
        for cell in cells:
            run_cfg = replace(cfg, setup=cell.setup,
                              lstm_hidden=cell.lstm_hidden, seed=cell.seed)
            models.Run.objects.record(run_cfg, cell.result, error=cell.error,
                                      suite=suite, run_dir=cell.run_dir)
        return suite
