"""OpenTelemetry tracing setup for pipeline stages and CLI commands."""
import logging

from opentelemetry import trace
from opentelemetry.sdk.resources import Resource
from opentelemetry.sdk.trace import TracerProvider
from opentelemetry.sdk.trace.export import (
    BatchSpanProcessor,
    ConsoleSpanExporter,
    SimpleSpanProcessor,
)

from .config import get_settings

log = logging.getLogger(__name__)

_tracer_initialized = False


def init_tracing() -> None:
    """Initialize the tracer provider.

    This sets up:
    - A TracerProvider tagged with the configured service name
    - OTLP export when OTEL_EXPORTER_ENDPOINT is set
    - Console export when TRACE_CONSOLE is true

    Without either, spans are still created but go nowhere.
    """
    global _tracer_initialized

    if _tracer_initialized:
        return

    settings = get_settings()
    provider = TracerProvider(
        resource=Resource.create({"service.name": settings.otel_service_name})
    )

    if settings.otel_exporter_endpoint:
        from opentelemetry.exporter.otlp.proto.http.trace_exporter import OTLPSpanExporter

        provider.add_span_processor(
            BatchSpanProcessor(OTLPSpanExporter(endpoint=settings.otel_exporter_endpoint))
        )
        log.info(f"[Tracing] Exporting spans to {settings.otel_exporter_endpoint}")
    if settings.trace_console:
        provider.add_span_processor(SimpleSpanProcessor(ConsoleSpanExporter()))

    trace.set_tracer_provider(provider)
    _tracer_initialized = True


def get_tracer(name: str = "ces-network"):
    """Get a tracer instance for manual spans."""
    return trace.get_tracer(name)
