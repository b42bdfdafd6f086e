"""Optional OpenTelemetry tracing; everything degrades to no-ops without it."""
import os
from contextlib import AbstractContextManager, nullcontext

try:
    import opentelemetry.trace

    _TRACING = True
except ImportError:
    _TRACING = False


def span(_tracer, **kwargs) -> AbstractContextManager:
    if _TRACING and _tracer is not None:
        return _tracer.start_as_current_span(**kwargs)
    return nullcontext()


def get_tracer(_name: str):
    if _TRACING:
        return opentelemetry.trace.get_tracer(_name)
    return None


def setup_tracing(service_name: str) -> bool:
    """Export spans over OTLP when DATSIM_OTLP names an endpoint.

    Returns whether an exporter was installed."""
    endpoint = os.environ.get("DATSIM_OTLP")
    if endpoint is None or not _TRACING:
        return False
    from opentelemetry.exporter.otlp.proto.grpc.trace_exporter import (
        OTLPSpanExporter,
    )
    from opentelemetry.sdk.resources import SERVICE_NAME, Resource
    from opentelemetry.sdk.trace import TracerProvider
    from opentelemetry.sdk.trace.export import SimpleSpanProcessor

    tracer_provider = TracerProvider(
        resource=Resource.create({SERVICE_NAME: service_name})
    )
    tracer_provider.add_span_processor(
        SimpleSpanProcessor(OTLPSpanExporter(endpoint=endpoint))
    )
    opentelemetry.trace.set_tracer_provider(tracer_provider)
    return True
