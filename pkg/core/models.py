"""
Database models: an index of the training runs written to disk
"""
import math

from django.db import models


def _finite_or_none(value):
    if value is None:
        return None
    value = float(value)
    return value if math.isfinite(value) else None


class Suite(models.Model):
    """one suite or hint-tuning invocation"""
    KIND_CHOICES = [
        ('suite', 'Setup suite'),
        ('tuning', 'Hint tuning'),
        ('single', 'Single run'),
    ]
    kind = models.CharField(max_length=16, choices=KIND_CHOICES)
    out_dir = models.CharField(max_length=1024, blank=True)
    created = models.DateTimeField(auto_now_add=True)

    def __str__(self):
        return f'{self.kind} #{self.pk}'


class RunManager(models.Manager):
    """Manager for Runs"""

    def record(self, cfg, result=None, error='', suite=None, run_dir=''):
        """create and return a run row plus its per-epoch rows"""
        run = self.model(
            suite=suite,
            setup=cfg.setup.value,
            lstm_hidden=cfg.lstm_hidden,
            seed=cfg.seed,
            config=cfg.to_dict(),
            run_dir=str(run_dir or ''),
            error=error or '',
            status=Run.FAILED if result is None else Run.COMPLETED,
        )
        if result is not None:
            run.best_val_micro_auprc = result.best_val_micro_auprc
            run.best_epoch = result.best_epoch
            run.stopped_epoch = result.stopped_epoch
            run.test_micro_auprc = result.test_micro_auprc
            run.classwise = [_finite_or_none(v)
                             for v in result.classwise.tolist()]
        run.save(using=self._db)

        if result is not None:
            EpochMetric.objects.bulk_create([
                EpochMetric(
                    run=run,
                    epoch=row['epoch'],
                    val_micro_auprc=row['val_micro_auprc'],
                    **{name: _finite_or_none(row.get(name))
                       for name in ('bce', 'kd', 'sp', 'iusp', 'total')},
                )
                for row in result.loss_history
            ])
        return run


class Run(models.Model):
    """one train_once call"""
    COMPLETED = 'completed'
    FAILED = 'failed'
    STATUS_CHOICES = [(COMPLETED, 'Completed'), (FAILED, 'Failed')]

    suite = models.ForeignKey(Suite, null=True, blank=True,
                              on_delete=models.CASCADE, related_name='runs')
    setup = models.CharField(max_length=32)
    lstm_hidden = models.IntegerField()
    seed = models.IntegerField()
    status = models.CharField(max_length=16, choices=STATUS_CHOICES)
    config = models.JSONField(default=dict)
    best_val_micro_auprc = models.FloatField(null=True, blank=True)
    best_epoch = models.IntegerField(null=True, blank=True)
    stopped_epoch = models.IntegerField(null=True, blank=True)
    test_micro_auprc = models.FloatField(null=True, blank=True)
    classwise = models.JSONField(default=list, blank=True)
    error = models.TextField(blank=True)
    run_dir = models.CharField(max_length=1024, blank=True)
    created = models.DateTimeField(auto_now_add=True)

    objects = RunManager()

    def __str__(self):
        return f'{self.setup} h={self.lstm_hidden} seed={self.seed}'


class EpochMetric(models.Model):
    """validation AUPRC and mean loss components after one epoch"""
    run = models.ForeignKey(Run, on_delete=models.CASCADE,
                            related_name='epochs')
    epoch = models.IntegerField()
    val_micro_auprc = models.FloatField()
    bce = models.FloatField(null=True)
    kd = models.FloatField(null=True)
    sp = models.FloatField(null=True)
    iusp = models.FloatField(null=True)
    total = models.FloatField(null=True)

    class Meta:
        ordering = ['epoch']
        constraints = [
            models.UniqueConstraint(fields=['run', 'epoch'],
                                    name='unique_epoch_per_run'),
        ]

    def __str__(self):
        return f'{self.run} epoch {self.epoch}'
