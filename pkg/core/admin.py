"""
Django admin customization
"""

from django.contrib import admin
from django.utils.translation import gettext_lazy as _

from core import models


class EpochMetricInline(admin.TabularInline):
    model = models.EpochMetric
    extra = 0
    readonly_fields = ['epoch', 'val_micro_auprc', 'bce', 'kd', 'sp', 'iusp',
                       'total']
    can_delete = False


class RunAdmin(admin.ModelAdmin):
    """define the admin page for runs"""
    ordering = ['id']
    list_display = ['setup', 'lstm_hidden', 'seed', 'status',
                    'test_micro_auprc', 'best_epoch']
    list_filter = ['setup', 'lstm_hidden', 'status']
    fieldsets = (
        (None, {'fields': ('suite', 'setup', 'lstm_hidden', 'seed',
                           'status')}),
        (
            _('Metrics'),
            {
                'fields': (
                    'best_val_micro_auprc',
                    'best_epoch',
                    'stopped_epoch',
                    'test_micro_auprc',
                    'classwise',
                )
            }
        ),
        (_('Provenance'), {'fields': ('config', 'run_dir', 'error',
                                      'created')}),
    )
    readonly_fields = ['created']
    inlines = [EpochMetricInline]


class SuiteAdmin(admin.ModelAdmin):
    ordering = ['-id']
    list_display = ['id', 'kind', 'out_dir', 'created']


admin.site.register(models.Run, RunAdmin)
admin.site.register(models.Suite, SuiteAdmin)
