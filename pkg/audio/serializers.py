"""
Serializers validating manifest and prediction CSV rows
"""
import math

from rest_framework import serializers

from audio.types import CLASS_NAMES


class ManifestRowSerializer(serializers.Serializer):
    """one manifest row: clip id plus a {0,1} value per class"""
    clip_id = serializers.CharField(max_length=255, trim_whitespace=True)

    def get_fields(self):
        """class columns carry hyphens, so they are added here"""
        fields = super().get_fields()
        for name in CLASS_NAMES:
            fields[name] = serializers.ChoiceField(choices=[0, 1])
        return fields


class PredictionRowSerializer(serializers.Serializer):
    """one prediction row: clip id plus a score in [0, 1] per class"""
    clip_id = serializers.CharField(max_length=255, trim_whitespace=True)

    def get_fields(self):
        fields = super().get_fields()
        for name in CLASS_NAMES:
            fields[name] = serializers.FloatField(min_value=0.0,
                                                  max_value=1.0)
        return fields

    def validate(self, attrs):
        """reject NaN and infinite scores"""
        for name in CLASS_NAMES:
            if not math.isfinite(attrs[name]):
                raise serializers.ValidationError(
                    {name: 'score must be finite'})
        return attrs


def first_error(errors):
    """flatten a serializer error dict into one line"""
    field, messages = next(iter(errors.items()))
    if isinstance(messages, dict):
        return f'{field}.{first_error(messages)}'
    message = messages[0] if isinstance(messages, list) else messages
    return f'{field}: {message}'
