"""Shared state schema for the analysis pipeline graph."""
from typing import Any, Dict, List, Optional, TypedDict


class PipelineState(TypedDict, total=False):
    """State passed through the LangGraph workflow.

    Ingest → Networks → HOSVD → Turnover → Spectral → (Coherence) → Summary
    """

    # === Input ===
    event_paths: List[str]
    taxonomy_path: str
    window: str  # YYYY-MM-DD:YYYY-MM-DD
    warmup: Optional[str]
    stringency_path: Optional[str]
    countries: Optional[List[str]]
    pairs: List[List[str]]  # [feature class, activity class]
    out_dir: str
    seed: int
    restarts: int
    alpha: float
    log1p: bool
    draws: int
    plots: bool
    policy: str

    # === Ingest ===
    taxonomy: Any  # Taxonomy
    records: List[Any]  # EventRecord
    counts: Dict[str, Any]  # grouping -> DailyCounts

    # === Networks ===
    network_stats: Dict[str, Dict[str, Dict[str, Optional[dict]]]]  # weighting -> grouping -> period

    # === HOSVD ===
    hosvd: Dict[str, Any]
    leading_pair: List[str]

    # === Turnover ===
    turnover: Dict[str, Any]
    ratio_series: Any  # TimeSeries, global scope

    # === Spectral ===
    spectral: Dict[str, Any]

    # === Coherence ===
    coherence: Dict[str, Any]

    # === Output ===
    outputs: List[str]
    summary: Dict[str, Any]


def create_initial_state(
    event_paths: List[str],
    taxonomy_path: str,
    window: str,
    out_dir: str,
    seed: int,
    restarts: int,
    alpha: float,
    draws: int,
    stringency_path: Optional[str] = None,
    countries: Optional[List[str]] = None,
    pairs: Optional[List[List[str]]] = None,
    warmup: Optional[str] = None,
    log1p: bool = False,
    plots: bool = False,
    policy: str = "skip",
) -> PipelineState:
    return PipelineState(
        event_paths=list(event_paths),
        taxonomy_path=taxonomy_path,
        window=window,
        warmup=warmup,
        stringency_path=stringency_path,
        countries=countries,
        pairs=[list(p) for p in (pairs or [])],
        out_dir=out_dir,
        seed=seed,
        restarts=restarts,
        alpha=alpha,
        log1p=log1p,
        draws=draws,
        plots=plots,
        policy=policy,
        network_stats={},
        hosvd={},
        leading_pair=[],
        turnover={},
        ratio_series=None,
        spectral={},
        coherence={},
        outputs=[],
        summary={},
    )
