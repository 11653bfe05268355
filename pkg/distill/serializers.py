"""
Serializers for run configuration files and the results API
"""
from dataclasses import dataclass
from pathlib import Path

import yaml
from rest_framework import serializers

from audio.serializers import first_error
from core.exceptions import ConfigurationError
from core.models import EpochMetric, Run, Suite
from distill.kernels import SquashParams
from distill.losses import LossWeights, Setup
from distill.networks import HintPair
from distill.training import TrainConfig


@dataclass(frozen=True)
class DataPaths:
    """corpus root, optional feature cache and teacher checkpoint"""
    data_dir: Path | None = None
    features_dir: Path | None = None
    teacher: Path | None = None


DEFAULT_ALPHAS = {'bce': 1.0, 'kd': 10.0, 'sp': 10.0, 'iusp': 1.0}


class AlphaSerializer(serializers.Serializer):
    bce = serializers.FloatField(min_value=0.0, default=1.0)
    kd = serializers.FloatField(min_value=0.0, default=10.0)
    sp = serializers.FloatField(min_value=0.0, default=10.0)
    iusp = serializers.FloatField(min_value=0.0, default=1.0)


class HintPairField(serializers.CharField):
    """``teacher_layer:student_layer``"""

    def to_internal_value(self, data):
        text = super().to_internal_value(data)
        try:
            return HintPair.parse(text)
        except ConfigurationError as exc:
            raise serializers.ValidationError(str(exc)) from exc


class TrainConfigSerializer(serializers.Serializer):
    """validate a YAML run config into a TrainConfig and DataPaths"""
    setup = serializers.ChoiceField(choices=[s.value for s in Setup],
                                    default=Setup.BCE.value)
    lstm_hidden = serializers.IntegerField(min_value=1, default=32)
    seed = serializers.IntegerField(min_value=0, default=0)
    batch_size = serializers.IntegerField(min_value=1, default=16)
    lr = serializers.FloatField(min_value=0.0, default=1e-4)
    max_epochs = serializers.IntegerField(min_value=0, default=300)
    patience = serializers.IntegerField(min_value=0, default=20)
    alphas = AlphaSerializer(required=False)
    kd_temperature = serializers.FloatField(default=1.0)
    gamma = serializers.FloatField(default=10.0)
    delta = serializers.FloatField(default=0.5)
    hint_sp = HintPairField(allow_null=True, default=None)
    hint_iusp = HintPairField(allow_null=True, default=None)
    precision = serializers.ChoiceField(choices=['float32', 'float64'],
                                        default='float32')
    data_dir = serializers.CharField(allow_null=True, default=None)
    features_dir = serializers.CharField(allow_null=True, default=None)
    teacher = serializers.CharField(allow_null=True, default=None)

    def validate_kd_temperature(self, value):
        if value <= 0:
            raise serializers.ValidationError('must be > 0')
        return value

    def validate_gamma(self, value):
        if value <= 0:
            raise serializers.ValidationError('must be > 0')
        return value

    def validate(self, attrs):
        if attrs['max_epochs'] and attrs['patience'] >= attrs['max_epochs']:
            raise serializers.ValidationError(
                {'patience': 'must be below max_epochs'})
        return attrs

    def to_config(self):
        data = self.validated_data
        alphas = {**DEFAULT_ALPHAS, **data.get('alphas', {})}
        weights = LossWeights(
            alpha_bce=alphas['bce'], alpha_kd=alphas['kd'],
            alpha_sp=alphas['sp'], alpha_iusp=alphas['iusp'],
            kd_temperature=data['kd_temperature'],
            squash=SquashParams(data['gamma'], data['delta']),
        )
        cfg = TrainConfig(
            setup=Setup(data['setup']), lstm_hidden=data['lstm_hidden'],
            lr=data['lr'], max_epochs=data['max_epochs'],
            patience=data['patience'], batch_size=data['batch_size'],
            seed=data['seed'], weights=weights, hint_sp=data['hint_sp'],
            hint_iusp=data['hint_iusp'], precision=data['precision'],
        )
        paths = DataPaths(*(Path(data[key]) if data[key] else None
                            for key in ('data_dir', 'features_dir',
                                        'teacher')))
        return cfg, paths


def parse_train_config(values, **overrides):
    """validate a mapping; ``overrides`` that are None are ignored"""
    values = dict(values or {})
    values.update({k: v for k, v in overrides.items() if v is not None})
    serializer = TrainConfigSerializer(data=values)
    if not serializer.is_valid():
        raise ConfigurationError(first_error(serializer.errors))
    return serializer.to_config()


def load_train_config(path, **overrides):
    """read a YAML run config; ``path=None`` means all defaults"""
    if path is None:
        return parse_train_config({}, **overrides)
    try:
        with open(path, encoding='utf-8') as fh:
            values = yaml.safe_load(fh)
    except FileNotFoundError as exc:
        raise ConfigurationError(f'config file not found: {path}') from exc
    except yaml.YAMLError as exc:
        raise ConfigurationError(f'{path}: not valid YAML: {exc}') from exc
    if values is not None and not isinstance(values, dict):
        raise ConfigurationError(f'{path}: expected a key-value mapping')
    return parse_train_config(values, **overrides)


class EpochMetricSerializer(serializers.ModelSerializer):
    class Meta:
        model = EpochMetric
        fields = ['epoch', 'val_micro_auprc', 'bce', 'kd', 'sp', 'iusp',
                  'total']
        read_only_fields = fields


class RunSerializer(serializers.ModelSerializer):
    """serializer for runs"""

    class Meta:
        model = Run
        fields = ['id', 'suite', 'setup', 'lstm_hidden', 'seed', 'status',
                  'best_val_micro_auprc', 'best_epoch', 'stopped_epoch',
                  'test_micro_auprc', 'created']
        read_only_fields = fields


class RunDetailSerializer(RunSerializer):
    """serializer for run detail view"""
    epochs = EpochMetricSerializer(many=True, read_only=True)

    class Meta(RunSerializer.Meta):
        fields = RunSerializer.Meta.fields + [
            'config', 'classwise', 'error', 'run_dir', 'epochs']
        read_only_fields = fields


class SuiteSerializer(serializers.ModelSerializer):
    run_count = serializers.IntegerField(source='runs.count', read_only=True)

    class Meta:
        model = Suite
        fields = ['id', 'kind', 'out_dir', 'created', 'run_count']
        read_only_fields = fields
