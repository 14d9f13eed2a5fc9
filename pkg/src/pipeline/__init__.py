"""Analysis pipeline as a LangGraph workflow."""
from .graph import create_pipeline_graph, run_pipeline
from .state import PipelineState, create_initial_state

__all__ = ["PipelineState", "create_initial_state", "create_pipeline_graph", "run_pipeline"]
