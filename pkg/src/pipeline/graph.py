"""LangGraph workflow for the full analysis sequence.

    START → Ingest → Networks → HOSVD → Turnover → Spectral →
    (Coherence, if a stringency table is given) → Summary → END
"""
from __future__ import annotations

import functools
import logging
from pathlib import Path
from typing import Any, Dict, List, Literal

import numpy as np
from langgraph.graph import END, START, StateGraph
from opentelemetry import trace

from ..data.ingest import aggregate, load_taxonomy, parse_event_files
from ..data.models import Window
from ..errors import InputValidationError, NumericalError
from ..exogenous import align, load_stringency_table, median_stringency
from ..manifest import slug, write_json
from ..network.bipartite import BipartiteNetwork, build_network
from ..network.metrics import network_stats, node_stats
from ..plotting import plot_outer_product, plot_spectrum
from ..spectral.cross import coherence
from ..spectral.wavelet import TimeSeries, WaveletParams, cwt, ridges, ridges_frame, significance, summarize
from ..tensor.hosvd import CESTensor, hosvd, leading_outer_product, max_cell, write_hosvd
from ..tracing import get_tracer
from ..turnover import Scope, daily_users, new_user_ratio, user_network
from .state import PipelineState

log = logging.getLogger(__name__)

ALL_YEARS = "all"


def traced(stage: str):
    """Run a node inside a span named after its stage."""

    def wrap(fn):
        @functools.wraps(fn)
        def node(state: PipelineState) -> Dict[str, Any]:
            with get_tracer().start_as_current_span(f"pipeline.{stage}"):
                return fn(state)

        return node

    return wrap


def _csv(frame, path: Path, index: bool = False) -> str:
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=index, encoding="utf-8", lineterminator="\n", float_format="%.10g")
    return str(path)


# === Node Functions ===


@traced("ingest")
def ingest(state: PipelineState) -> Dict[str, Any]:
    """Parse events and fold them into full and grouped daily counts."""
    window = Window.parse(state["window"])
    taxonomy = load_taxonomy(state["taxonomy_path"])
    records = parse_event_files(state["event_paths"], taxonomy, policy=state.get("policy"))
    counts = {g: aggregate(records, taxonomy, g, window) for g in ("full", "grouped")}
    if counts["full"].total() == 0:
        raise InputValidationError(f"no events fall inside the window {window}")

    span = trace.get_current_span()
    span.set_attribute("records", len(records))
    span.set_attribute("events_in_window", counts["full"].total())
    log.info(f"[Pipeline] {counts['full'].total():,} events in {window} from {len(records):,} records")
    return {"taxonomy": taxonomy, "records": records, "counts": counts}


def _stats_block(net: BipartiteNetwork, state: PipelineState, node_path: Path, outputs: List[str]):
    try:
        stats = network_stats(net, restarts=state["restarts"], seed=state["seed"])
    except (NumericalError, InputValidationError) as e:
        log.warning(f"[Networks] {node_path.stem}: {e}")
        return None
    outputs.append(_csv(node_stats(net), node_path))
    return stats.model_dump()


@traced("networks")
def networks(state: PipelineState) -> Dict[str, Any]:
    """Global and node statistics per year and for all years, tweet- and user-weighted."""
    window = Window.parse(state["window"])
    out_dir = Path(state["out_dir"])
    outputs = list(state.get("outputs", []))
    periods = {str(block.start.year): block for block in window.years()}
    periods[ALL_YEARS] = window

    results: Dict[str, Dict[str, Dict[str, Any]]] = {"tweets": {}, "users": {}}
    for grouping in ("full", "grouped"):
        counts = state["counts"][grouping]
        for weighting in ("tweets", "users"):
            blocks = {}
            for label, block in periods.items():
                if weighting == "tweets":
                    net = build_network(counts, block.start, block.end)
                else:
                    net = user_network(state["records"], state["taxonomy"], grouping, block)
                name = f"{weighting}_{grouping}_{label}"
                blocks[label] = _stats_block(net, state, out_dir / "node_stats" / f"{name}.csv", outputs)
                if label == ALL_YEARS:
                    outputs.append(str(net.write_csv(out_dir / "networks" / f"{name}.csv")))
            results[weighting][grouping] = blocks
    log.info(f"[Networks] Statistics for {len(periods)} periods x 2 groupings x 2 weightings")
    return {"network_stats": results, "outputs": outputs}


@traced("hosvd")
def decompose(state: PipelineState) -> Dict[str, Any]:
    """HOSVD of the grouped tensor; leading outer products and their peak cell."""
    out_dir = Path(state["out_dir"]) / "hosvd"
    tensor = CESTensor.from_counts(state["counts"]["grouped"])
    result = hosvd(tensor)
    outputs = list(state.get("outputs", []))
    outputs.extend(str(p) for p in write_hosvd(result, out_dir, prefix="grouped"))

    outer = leading_outer_product(result, "feature", "activity")
    feature_class, activity_class = max_cell(outer)
    if state.get("plots"):
        outputs.append(str(plot_outer_product(outer, out_dir / "grouped_outer_feature_activity.svg",
                                              title="Leading feature x activity outer product")))
    summary = {
        "degenerate": result.degenerate,
        "leading_singular_values": {m: float(s[0]) for m, s in zip(("feature", "activity", "time"), result.singular_values)},
        "max_cell": {"feature": feature_class, "activity": activity_class, "value": float(outer.loc[feature_class, activity_class])},
    }
    log.info(f"[HOSVD] Leading outer product peaks at ({feature_class}, {activity_class})")
    return {"hosvd": summary, "leading_pair": [feature_class, activity_class], "outputs": outputs}


@traced("turnover")
def turnover(state: PipelineState) -> Dict[str, Any]:
    """New-user ratio globally and for each requested class pair."""
    window = Window.parse(state["window"])
    warmup = Window.parse(state["warmup"]) if state.get("warmup") else None
    out_dir = Path(state["out_dir"]) / "turnover"
    outputs = list(state.get("outputs", []))
    pairs = state.get("pairs") or [state["leading_pair"]]

    scopes = [Scope()] + [Scope(fc, ac) for fc, ac in pairs]
    summary: Dict[str, Any] = {}
    ratio_series = None
    for scope in scopes:
        series = new_user_ratio(state["records"], state["taxonomy"], window, scope, warmup)
        outputs.append(_csv(series.to_frame(), out_dir / f"turnover_{slug(scope.label)}.csv"))
        ratio = series.ratio
        peak = ratio.idxmax() if ratio.notna().any() else None
        summary[scope.label] = {
            "mean_ratio": float(ratio.mean()) if ratio.notna().any() else None,
            "peak_date": peak.date().isoformat() if peak is not None else None,
            "peak_ratio": float(ratio.max()) if peak is not None else None,
            "new_users": int(series.frame["new_users"].sum()),
        }
        if scope.is_global:
            ratio_series = series.ratio_series()
    return {"turnover": summary, "ratio_series": ratio_series, "outputs": outputs}


def _wavelet_params(log1p: bool = False) -> WaveletParams:
    return WaveletParams.from_settings(log1p=log1p)


@traced("spectral")
def spectral(state: PipelineState) -> Dict[str, Any]:
    """Wavelet spectra of the CES volume, daily users, new-user ratio and class pairs."""
    window = Window.parse(state["window"])
    out_dir = Path(state["out_dir"]) / "spectral"
    outputs = list(state.get("outputs", []))
    grouped = state["counts"]["grouped"]

    series: List[TimeSeries] = [
        state["counts"]["full"].total_series(),
        daily_users(state["records"], state["taxonomy"], window),
    ]
    if state.get("ratio_series") is not None:
        series.append(state["ratio_series"])
    for fc, ac in state.get("pairs") or [state["leading_pair"]]:
        series.append(grouped.pair_series(fc, ac))

    summary: Dict[str, Any] = {}
    for s in series:
        log1p = state.get("log1p", False) and not s.name.startswith("new_user_ratio")
        spectrum = cwt(s, _wavelet_params(log1p))
        significance(spectrum, level=state["alpha"])
        stem = slug(s.name)
        found = ridges(spectrum)
        outputs.append(_csv(spectrum.to_frame(), out_dir / f"wavelet_{stem}.csv"))
        outputs.append(_csv(ridges_frame(spectrum, found), out_dir / f"ridges_{stem}.csv"))
        if state.get("plots"):
            outputs.append(str(plot_spectrum(spectrum, out_dir / f"wavelet_{stem}.svg", title=s.name, found=found)))
        summary[s.name] = summarize(spectrum)
    return {"spectral": summary, "outputs": outputs}


def _circular_mean(angles: np.ndarray):
    if angles.size == 0:
        return None
    return float(np.angle(np.mean(np.exp(1j * angles))))


@traced("coherence")
def coherency(state: PipelineState) -> Dict[str, Any]:
    """Coherence of median stringency with the CES volume and the new-user ratio."""
    window = Window.parse(state["window"])
    out_dir = Path(state["out_dir"]) / "coherence"
    outputs = list(state.get("outputs", []))
    table = load_stringency_table(state["stringency_path"])
    stringency = median_stringency(table, state.get("countries"))
    outputs.append(str(stringency.write_csv(out_dir / "stringency.csv")))

    targets = {"volume": state["counts"]["full"].total_series()}
    if state.get("ratio_series") is not None:
        targets["new_user_ratio"] = state["ratio_series"]

    # coherence runs over the stringency span inside the analysis window
    overlap = window.intersect(Window(stringency.start, stringency.series.end)) or window
    params = _wavelet_params()
    summary: Dict[str, Any] = {"countries": stringency.countries}
    for name, y in targets.items():
        x, y = align(stringency, y, overlap)
        spectrum = coherence(x, y, params, level=state["alpha"], draws=state["draws"], seed=state["seed"])
        outputs.append(_csv(spectrum.to_frame(), out_dir / f"coherence_{name}.csv"))
        if state.get("plots"):
            outputs.append(str(plot_spectrum(spectrum, out_dir / f"coherence_{name}.svg", title=f"stringency x {name}")))
        mask = spectrum.coherence_significant if spectrum.coherence_significant is not None else spectrum.significant
        inside = spectrum.in_coi
        summary[name] = {
            "start": x.start.isoformat(),
            "end": x.end.isoformat(),
            "significant_fraction": float(mask.sum() / inside.sum()) if inside.any() else 0.0,
            "mean_coherence_significant": float(spectrum.coherence[mask].mean()) if mask.any() else None,
            "mean_phase_significant": _circular_mean(spectrum.phase[mask]),
        }
    return {"coherence": summary, "outputs": outputs}


@traced("summary")
def summarize_run(state: PipelineState) -> Dict[str, Any]:
    summary = {
        "window": state["window"],
        "network_stats": state.get("network_stats", {}),
        "hosvd": state.get("hosvd", {}),
        "turnover": state.get("turnover", {}),
        "spectral": state.get("spectral", {}),
    }
    if state.get("coherence"):
        summary["coherence"] = state["coherence"]
    path = write_json(summary, Path(state["out_dir"]) / "summary.json")
    return {"summary": summary, "outputs": list(state.get("outputs", [])) + [str(path)]}


# === Routing ===


def has_stringency(state: PipelineState) -> Literal["run_coherence", "write_summary"]:
    return "run_coherence" if state.get("stringency_path") else "write_summary"


def create_pipeline_graph():
    """Build and compile the analysis graph.

    Node names must not collide with state keys.
    """
    graph = StateGraph(PipelineState)

    graph.add_node("ingest_events", ingest)
    graph.add_node("build_networks", networks)
    graph.add_node("decompose_tensor", decompose)
    graph.add_node("compute_turnover", turnover)
    graph.add_node("run_wavelets", spectral)
    graph.add_node("run_coherence", coherency)
    graph.add_node("write_summary", summarize_run)

    graph.add_edge(START, "ingest_events")
    graph.add_edge("ingest_events", "build_networks")
    graph.add_edge("build_networks", "decompose_tensor")
    graph.add_edge("decompose_tensor", "compute_turnover")
    graph.add_edge("compute_turnover", "run_wavelets")
    graph.add_conditional_edges(
        "run_wavelets",
        has_stringency,
        {"run_coherence": "run_coherence", "write_summary": "write_summary"},
    )
    graph.add_edge("run_coherence", "write_summary")
    graph.add_edge("write_summary", END)

    return graph.compile()


def run_pipeline(state: PipelineState) -> PipelineState:
    return create_pipeline_graph().invoke(state)
