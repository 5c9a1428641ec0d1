import math

import numpy as np
from rest_framework import serializers

from frontflow.models import ScenarioRun


class FiniteFloatField(serializers.FloatField):
    """Float that serializes nan and inf as null so reports stay valid JSON."""

    def to_representation(self, value):
        value = super().to_representation(value)
        return value if math.isfinite(value) else None


class ReportValueField(serializers.Field):
    """One summary entry: numpy scalars become plain JSON values, anything else its text."""

    def to_representation(self, value):
        if isinstance(value, (bool, np.bool_)):
            return bool(value)
        if isinstance(value, (int, np.integer)):
            return int(value)
        if isinstance(value, (float, np.floating)):
            return FiniteFloatField().to_representation(value)
        return str(value)


class CertificateSerializer(serializers.Serializer):
    sandwich_violation_fraction = FiniteFloatField()
    classical_gap = FiniteFloatField()
    residual_l1 = FiniteFloatField()
    converged = serializers.BooleanField()
    band = FiniteFloatField()


class RunPayloadSerializer(serializers.Serializer):
    """JSON payload of a ScenarioRun row built from a command outcome."""

    summary = serializers.DictField(child=ReportValueField(), allow_null=True)
    certificate = serializers.DictField(child=ReportValueField(), allow_null=True)


class ScenarioRunSerializer(serializers.ModelSerializer):
    class Meta:
        model = ScenarioRun
        fields = [
            'id', 'command', 'config_path', 'seed', 'exit_code',
            'summary', 'certificate', 'output_dir', 'created_at',
        ]
        read_only_fields = fields
