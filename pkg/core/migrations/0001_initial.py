# Generated by Django 5.2.4 on 2026-10-17 09:12

import django.db.models.deletion
from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = [
    ]

    operations = [
        migrations.CreateModel(
            name='Suite',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('kind', models.CharField(choices=[('suite', 'Setup suite'), ('tuning', 'Hint tuning'), ('single', 'Single run')], max_length=16)),
                ('out_dir', models.CharField(blank=True, max_length=1024)),
                ('created', models.DateTimeField(auto_now_add=True)),
            ],
        ),
        migrations.CreateModel(
            name='Run',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('setup', models.CharField(max_length=32)),
                ('lstm_hidden', models.IntegerField()),
                ('seed', models.IntegerField()),
                ('status', models.CharField(choices=[('completed', 'Completed'), ('failed', 'Failed')], max_length=16)),
                ('config', models.JSONField(default=dict)),
                ('best_val_micro_auprc', models.FloatField(blank=True, null=True)),
                ('best_epoch', models.IntegerField(blank=True, null=True)),
                ('stopped_epoch', models.IntegerField(blank=True, null=True)),
                ('test_micro_auprc', models.FloatField(blank=True, null=True)),
                ('classwise', models.JSONField(blank=True, default=list)),
                ('error', models.TextField(blank=True)),
                ('run_dir', models.CharField(blank=True, max_length=1024)),
                ('created', models.DateTimeField(auto_now_add=True)),
                ('suite', models.ForeignKey(blank=True, null=True, on_delete=django.db.models.deletion.CASCADE, related_name='runs', to='core.suite')),
            ],
        ),
        migrations.CreateModel(
            name='EpochMetric',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('epoch', models.IntegerField()),
                ('val_micro_auprc', models.FloatField()),
                ('bce', models.FloatField(null=True)),
                ('kd', models.FloatField(null=True)),
                ('sp', models.FloatField(null=True)),
                ('iusp', models.FloatField(null=True)),
                ('total', models.FloatField(null=True)),
                ('run', models.ForeignKey(on_delete=django.db.models.deletion.CASCADE, related_name='epochs', to='core.run')),
            ],
            options={
                'ordering': ['epoch'],
                'constraints': [models.UniqueConstraint(fields=('run', 'epoch'), name='unique_epoch_per_run')],
            },
        ),
    ]
