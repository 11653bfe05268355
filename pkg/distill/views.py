"""results API views (read only)"""

from rest_framework import viewsets

from core.models import Run, Suite
from distill import serializers

from drf_spectacular.utils import (
    extend_schema,
    extend_schema_view,
    OpenApiParameter,
    OpenApiTypes
)


@extend_schema_view(
    list=extend_schema(
        parameters=[
            OpenApiParameter(
                'setup',
                OpenApiTypes.STR,
                description="Comma separated list of setups, e.g. BCE,BCE+KD",
            ),
            OpenApiParameter(
                'lstm_hidden',
                OpenApiTypes.STR,
                description="Comma separated list of LSTM sizes to filter",
            ),
            OpenApiParameter(
                'status',
                OpenApiTypes.STR, enum=[Run.COMPLETED, Run.FAILED],
                description="Filter by run status",
            ),
            OpenApiParameter(
                'suite',
                OpenApiTypes.INT,
                description="Only runs of this suite",
            ),
        ]
    )
)
@extend_schema(tags=['Runs'])
class RunViewSet(viewsets.ReadOnlyModelViewSet):
    """View for browsing training runs"""
    serializer_class = serializers.RunDetailSerializer
    queryset = Run.objects.all()

    def _params_to_list(self, qs):
        """split a comma separated query value"""
        return [item.strip() for item in qs.split(',') if item.strip()]

    def _params_to_ints(self, qs):
        """convert a list of strings to integers, ignoring junk"""
        return [int(item) for item in self._params_to_list(qs)
                if item.lstrip('-').isdigit()]

    def get_queryset(self):
        """filter runs by setup, size, status and suite"""
        setups = self.request.query_params.get('setup')
        sizes = self.request.query_params.get('lstm_hidden')
        statuses = self.request.query_params.get('status')
        suite = self.request.query_params.get('suite')
        queryset = self.queryset
        if setups:
            queryset = queryset.filter(
                setup__in=self._params_to_list(setups))
        if sizes:
            queryset = queryset.filter(
                lstm_hidden__in=self._params_to_ints(sizes))
        if statuses:
            queryset = queryset.filter(
                status__in=self._params_to_list(statuses))
        if suite:
            queryset = queryset.filter(
                suite_id__in=self._params_to_ints(suite))

        return queryset.order_by('-id')

    def get_serializer_class(self):
        """return the serializer class for requests"""
        if self.action == 'list':
            return serializers.RunSerializer

        return self.serializer_class


@extend_schema(tags=['Suites'])
class SuiteViewSet(viewsets.ReadOnlyModelViewSet):
    """view for browsing suites and tuning sweeps"""
    serializer_class = serializers.SuiteSerializer
    queryset = Suite.objects.all().order_by('-id')
