#!/usr/bin/env python
"""Command-line entry point: ``python -m src.main <command>``.

Exit codes: 0 success, 1 usage, 2 input validation, 3 numerical failure.
"""
import logging
import sys
from contextlib import contextmanager
from pathlib import Path
from typing import List, Optional, Sequence

import rich_click as click
from pydantic import ValidationError

from . import __version__
from .config import get_settings
from .data.ingest import aggregate, load_taxonomy, parse_event_files, records_window, write_daily_counts, write_events
from .data.models import DailyCounts, Window
from .errors import InputValidationError, NumericalError
from .exogenous import load_stringency_table, median_stringency
from .log import setup_logging
from .manifest import ManifestRecorder, dumps, slug, write_json
from .network.bipartite import BipartiteNetwork, build_network
from .network.metrics import network_stats, node_stats
from .pipeline import create_initial_state, run_pipeline
from .plotting import plot_outer_product, plot_spectrum
from .spectral.cross import coherence, xwt
from .spectral.wavelet import (
    TimeSeries,
    WaveletParams,
    cwt,
    global_power,
    ridges,
    ridges_frame,
    significance,
    summarize,
)
from .synth import SynthConfig, generate
from .tensor.hosvd import CESTensor, hosvd, leading_outer_product, max_cell, write_hosvd
from .tracing import get_tracer, init_tracing
from .turnover import Scope, new_user_ratio, user_network

log = logging.getLogger(__name__)

click.rich_click.MAX_WIDTH = 100
click.rich_click.COMMAND_GROUPS = {
    "ces": [
        {"name": "Data", "commands": ["ingest", "synth", "stringency"]},
        {"name": "Networks", "commands": ["build-network", "network-stats", "node-stats"]},
        {"name": "Temporal", "commands": ["hosvd", "wavelet", "xwt", "turnover"]},
        {"name": "Workflow", "commands": ["pipeline"]},
    ],
}

EXIT_USAGE = 1
EXIT_INPUT = 2
EXIT_NUMERICAL = 3


class CESGroup(click.RichGroup):
    """Maps toolkit exceptions onto exit codes; errors are logged once, here."""

    def main(self, args=None, prog_name=None, complete_var=None, standalone_mode=True, **extra):
        try:
            rv = super().main(args, prog_name, complete_var, standalone_mode=False, **extra)
            code = rv if isinstance(rv, int) and not isinstance(rv, bool) else 0
        except click.ClickException as e:
            e.show()
            code = EXIT_USAGE
        except click.Abort:
            log.error("Aborted")
            code = EXIT_USAGE
        except (InputValidationError, ValidationError) as e:
            log.error(f"Input error: {e}")
            log.debug("Traceback", exc_info=True)
            code = EXIT_INPUT
        except NumericalError as e:
            log.error(f"Numerical failure: {e}")
            log.debug("Traceback", exc_info=True)
            code = EXIT_NUMERICAL
        if standalone_mode:
            sys.exit(code)
        return code


@contextmanager
def _run(ctx: click.Context, out_dir: Path, seed: Optional[int] = None):
    """Span + manifest around one command."""
    with get_tracer().start_as_current_span(f"cli.{ctx.info_name}"):
        recorder = ManifestRecorder(ctx.info_name, out_dir, dict(ctx.params), seed)
        yield recorder
        path = recorder.write()
        log.info(f"[CLI] {len(recorder.manifest.outputs)} outputs, manifest {path}")


def _out(out: Optional[str]) -> Path:
    path = Path(out) if out else get_settings().output_path
    path.mkdir(parents=True, exist_ok=True)
    return path


def _window(text: Optional[str]) -> Optional[Window]:
    return Window.parse(text) if text else None


def _load(events: Sequence[str], taxonomy: str, window: Optional[str], policy: Optional[str]):
    repertoire = load_taxonomy(taxonomy)
    records = parse_event_files(list(events), repertoire, policy=policy)
    return repertoire, records, _window(window) or records_window(records)


def _csv(frame, path: Path, index: bool = False) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=index, encoding="utf-8", lineterminator="\n", float_format="%.10g")
    return path


def _pair(text: str):
    feature, sep, activity = text.partition("|")
    if not sep or not feature or not activity:
        raise click.BadParameter(f"expected FEATURE|ACTIVITY, got '{text}'")
    return feature.strip(), activity.strip()


def _select_series(counts: DailyCounts, spec: str) -> TimeSeries:
    """``total``, ``feature:LABEL``, ``activity:LABEL`` or ``pair:F|A``."""
    kind, _, label = spec.partition(":")
    if kind == "total":
        return counts.total_series()
    if kind == "feature" and label:
        return counts.feature_series(label)
    if kind == "activity" and label:
        return counts.activity_series(label)
    if kind == "pair" and label:
        return counts.pair_series(*_pair(label))
    raise click.BadParameter(f"unknown series '{spec}'", param_hint="--series")


# === Shared options ===

EVENT_FILE = click.Path(exists=True, dir_okay=False)


def event_options(fn):
    for decorator in reversed([
        click.option("--events", "events", multiple=True, required=True, type=EVENT_FILE, help="Event file (CSV or JSONL); repeatable."),
        click.option("--taxonomy", required=True, type=EVENT_FILE, help="Taxonomy CSV: kind,term,class."),
        click.option("--window", help="Analysis window A:B (YYYY-MM-DD). Default: span of the events."),
        click.option("--policy", type=click.Choice(["skip", "strict"]), help="Unknown-term policy."),
    ]):
        fn = decorator(fn)
    return fn


def grouping_option(fn):
    return click.option("--grouping", type=click.Choice(["full", "grouped"]), default="full", show_default=True,
                        help="Terms or their classes.")(fn)


def out_option(fn):
    return click.option("--out", "out", help="Output directory. Default: $OUTPUT_DIR.")(fn)


def seed_option(fn):
    return click.option("--seed", type=int, help="Seed for randomized procedures. Default: $SEED.")(fn)


def wavelet_options(fn):
    for decorator in reversed([
        click.option("--alpha", type=float, help="Significance level. Default: $SIGNIFICANCE_LEVEL."),
        click.option("--omega0", type=float, help="Morlet frequency."),
        click.option("--s0", type=float, help="Smallest scale in days."),
        click.option("--dj", type=float, help="Scale spacing in octaves."),
        click.option("--plots", is_flag=True, help="Also write SVG figures."),
    ]):
        fn = decorator(fn)
    return fn


# === CLI ===


@click.group(cls=CESGroup, context_settings=dict(help_option_names=["-h", "--help"]))
@click.version_option(__version__)
@click.option("-v", "--verbose", is_flag=True, default=False, help="Debug logging with tracebacks.")
@click.option("--log-level", help="Log level. Default: $LOG_LEVEL.")
@click.pass_context
def ces(ctx, verbose, log_level):
    """Human-nature co-occurrence networks of cultural ecosystem services:
    networks, tensor decomposition, wavelets and user turnover."""
    setup_logging(log_level or get_settings().log_level, verbose)
    init_tracing()
    ctx.obj = {"verbose": verbose}


@ces.command("ingest")
@event_options
@grouping_option
@out_option
@click.pass_context
def command_ingest(ctx, events, taxonomy, window, policy, grouping, out):
    """Validate events and write daily (feature, activity) counts."""
    out_dir = _out(out)
    with _run(ctx, out_dir) as recorder:
        recorder.add_inputs([*events, taxonomy])
        repertoire, records, span = _load(events, taxonomy, window, policy)
        counts = aggregate(records, repertoire, grouping, span)
        recorder.add_outputs([
            write_events(records, out_dir / "events.csv"),
            write_daily_counts(counts, out_dir / f"daily_counts_{grouping}.csv"),
        ])
        log.info(f"[Ingest] {counts.total():,} events over {span.n_days} days")


@ces.command("build-network")
@event_options
@grouping_option
@click.option("--weighting", type=click.Choice(["tweets", "users"]), default="tweets", show_default=True,
              help="Event counts or distinct users per link.")
@out_option
@click.pass_context
def command_build_network(ctx, events, taxonomy, window, policy, grouping, weighting, out):
    """Aggregate events into a weighted feature x activity matrix."""
    out_dir = _out(out)
    with _run(ctx, out_dir) as recorder:
        recorder.add_inputs([*events, taxonomy])
        net = _network(events, taxonomy, window, policy, grouping, weighting)
        recorder.add_outputs([net.write_csv(out_dir / f"network_{weighting}_{grouping}.csv")])


def _network(events, taxonomy, window, policy, grouping, weighting) -> BipartiteNetwork:
    repertoire, records, span = _load(events, taxonomy, window, policy)
    if weighting == "users":
        return user_network(records, repertoire, grouping, span)
    return build_network(aggregate(records, repertoire, grouping, span))


def network_source_options(fn):
    for decorator in reversed([
        click.option("--matrix", type=EVENT_FILE, help="Labeled matrix CSV instead of events."),
        click.option("--events", "events", multiple=True, type=EVENT_FILE, help="Event file; repeatable."),
        click.option("--taxonomy", type=EVENT_FILE, help="Taxonomy CSV."),
        click.option("--window", help="Window A:B."),
        click.option("--policy", type=click.Choice(["skip", "strict"]), help="Unknown-term policy."),
        click.option("--grouping", type=click.Choice(["full", "grouped"]), default="full", show_default=True),
        click.option("--weighting", type=click.Choice(["tweets", "users"]), default="tweets", show_default=True),
    ]):
        fn = decorator(fn)
    return fn


def _network_from_options(recorder, matrix, events, taxonomy, window, policy, grouping, weighting) -> BipartiteNetwork:
    if matrix:
        recorder.add_inputs([matrix])
        return BipartiteNetwork.read_csv(matrix)
    if not events or not taxonomy:
        raise click.UsageError("give either --matrix or --events with --taxonomy")
    recorder.add_inputs([*events, taxonomy])
    return _network(events, taxonomy, window, policy, grouping, weighting)


@ces.command("network-stats")
@network_source_options
@click.option("--restarts", type=int, help="Modularity restarts. Default: $MODULARITY_RESTARTS.")
@seed_option
@out_option
@click.pass_context
def command_network_stats(ctx, matrix, events, taxonomy, window, policy, grouping, weighting, restarts, seed, out):
    """Web asymmetry, modularity, nestedness, interaction asymmetry and connectance."""
    out_dir = _out(out)
    seed = get_settings().seed if seed is None else seed
    with _run(ctx, out_dir, seed) as recorder:
        net = _network_from_options(recorder, matrix, events, taxonomy, window, policy, grouping, weighting)
        stats = network_stats(net, restarts=restarts, seed=seed)
        recorder.add_outputs([write_json(stats, out_dir / "network_stats.json")])
        click.echo(dumps(stats), nl=False)


@ces.command("node-stats")
@network_source_options
@out_option
@click.pass_context
def command_node_stats(ctx, matrix, events, taxonomy, window, policy, grouping, weighting, out):
    """Push-pull and nested rank of every node."""
    out_dir = _out(out)
    with _run(ctx, out_dir) as recorder:
        net = _network_from_options(recorder, matrix, events, taxonomy, window, policy, grouping, weighting)
        recorder.add_outputs([_csv(node_stats(net), out_dir / "node_stats.csv")])


@ces.command("hosvd")
@event_options
@grouping_option
@click.option("--center", is_flag=True, help="Subtract each cell's temporal mean.")
@click.option("--normalize", is_flag=True, help="Divide each day by its total.")
@click.option("--rank", "ranks", type=int, nargs=3, help="Truncation ranks for feature, activity, time.")
@click.option("--plots", is_flag=True, help="Also write the feature x activity heatmap.")
@out_option
@click.pass_context
def command_hosvd(ctx, events, taxonomy, window, policy, grouping, center, normalize, ranks, plots, out):
    """Higher-order SVD of the feature x activity x day tensor."""
    out_dir = _out(out)
    with _run(ctx, out_dir) as recorder:
        recorder.add_inputs([*events, taxonomy])
        repertoire, records, span = _load(events, taxonomy, window, policy)
        tensor = CESTensor.from_counts(aggregate(records, repertoire, grouping, span))
        if normalize:
            tensor = tensor.normalized()
        if center:
            tensor = tensor.centered()
        result = hosvd(tensor, truncation=list(ranks) if ranks else None)
        written = write_hosvd(result, out_dir, prefix=f"hosvd_{grouping}")
        outer = leading_outer_product(result, "feature", "activity")
        if plots:
            written.append(plot_outer_product(outer, out_dir / f"hosvd_{grouping}_outer_feature_activity.svg"))
        recorder.add_outputs(written)
        feature, activity = max_cell(outer)
        click.echo(f"{feature}|{activity}")


@ces.command("wavelet")
@click.option("--series-file", type=EVENT_FILE, help="date,value CSV instead of events.")
@click.option("--events", "events", multiple=True, type=EVENT_FILE, help="Event file; repeatable.")
@click.option("--taxonomy", type=EVENT_FILE, help="Taxonomy CSV.")
@click.option("--window", help="Window A:B.")
@click.option("--policy", type=click.Choice(["skip", "strict"]), help="Unknown-term policy.")
@grouping_option
@click.option("--series", "series_spec", default="total", show_default=True,
              help="total, feature:LABEL, activity:LABEL or pair:FEATURE|ACTIVITY.")
@click.option("--log1p", is_flag=True, help="Transform counts with log(1 + x).")
@wavelet_options
@out_option
@click.pass_context
def command_wavelet(ctx, series_file, events, taxonomy, window, policy, grouping, series_spec, log1p,
                    alpha, omega0, s0, dj, plots, out):
    """Morlet wavelet power with red-noise significance, ridges and summaries."""
    out_dir = _out(out)
    with _run(ctx, out_dir) as recorder:
        if series_file:
            recorder.add_inputs([series_file])
            series = TimeSeries.read_csv(series_file)
            if window:
                span = Window.parse(window)
                series = series.between(span.start, span.end)
        elif events and taxonomy:
            recorder.add_inputs([*events, taxonomy])
            repertoire, records, span = _load(events, taxonomy, window, policy)
            series = _select_series(aggregate(records, repertoire, grouping, span), series_spec)
        else:
            raise click.UsageError("give either --series-file or --events with --taxonomy")

        spectrum = cwt(series, WaveletParams.from_settings(omega0=omega0, s0=s0, dj=dj, log1p=log1p))
        significance(spectrum, level=alpha)
        found = ridges(spectrum)
        stem = slug(series.name)
        written = [
            _csv(spectrum.to_frame(), out_dir / f"wavelet_{stem}.csv"),
            _csv(ridges_frame(spectrum, found), out_dir / f"ridges_{stem}.csv"),
            _csv(global_power(spectrum), out_dir / f"global_{stem}.csv"),
            write_json(summarize(spectrum), out_dir / f"wavelet_{stem}.json"),
        ]
        if plots:
            written.append(plot_spectrum(spectrum, out_dir / f"wavelet_{stem}.svg", title=series.name, found=found))
        recorder.add_outputs(written)


@ces.command("xwt")
@click.option("--x", "x_file", required=True, type=EVENT_FILE, help="First date,value series (e.g. stringency).")
@click.option("--y", "y_file", required=True, type=EVENT_FILE, help="Second date,value series.")
@click.option("--window", help="Restrict both series to A:B.")
@click.option("--coherence/--no-coherence", "with_coherence", default=True, show_default=True,
              help="Also compute smoothed coherence.")
@click.option("--draws", type=int, help="Monte Carlo draws for coherence significance; 0 skips.")
@seed_option
@wavelet_options
@out_option
@click.pass_context
def command_xwt(ctx, x_file, y_file, window, with_coherence, draws, seed, alpha, omega0, s0, dj, plots, out):
    """Cross-wavelet power, phase and coherence of two aligned series."""
    out_dir = _out(out)
    seed = get_settings().seed if seed is None else seed
    with _run(ctx, out_dir, seed) as recorder:
        recorder.add_inputs([x_file, y_file])
        x, y = TimeSeries.read_csv(x_file), TimeSeries.read_csv(y_file)
        if window:
            span = Window.parse(window)
            x, y = x.between(span.start, span.end), y.between(span.start, span.end)
        params = WaveletParams.from_settings(omega0=omega0, s0=s0, dj=dj)
        if with_coherence:
            spectrum = coherence(x, y, params, level=alpha, draws=draws, seed=seed)
        else:
            spectrum = xwt(x, y, params, level=alpha)
        name = f"{slug(x.name)}_{slug(y.name)}"
        written = [_csv(spectrum.to_frame(), out_dir / f"xwt_{name}.csv")]
        if plots:
            written.append(plot_spectrum(spectrum, out_dir / f"xwt_{name}.svg", title=f"{x.name} x {y.name}"))
        recorder.add_outputs(written)


@ces.command("turnover")
@event_options
@click.option("--warmup", help="History-only window A:B ending before --window.")
@click.option("--pair", "pairs", multiple=True, help="Class pair FEATURE|ACTIVITY; repeatable.")
@out_option
@click.pass_context
def command_turnover(ctx, events, taxonomy, window, policy, warmup, pairs, out):
    """Daily ratio of new to active users, globally and per class pair."""
    out_dir = _out(out)
    with _run(ctx, out_dir) as recorder:
        recorder.add_inputs([*events, taxonomy])
        repertoire, records, span = _load(events, taxonomy, window, policy)
        written: List[Path] = []
        for scope in [Scope()] + [Scope(*_pair(p)) for p in pairs]:
            series = new_user_ratio(records, repertoire, span, scope, _window(warmup))
            written.append(_csv(series.to_frame(), out_dir / f"turnover_{slug(scope.label)}.csv"))
        recorder.add_outputs(written)


@ces.command("stringency")
@click.option("--table", required=True, type=EVENT_FILE, help="OxCGRT-style country,date,stringency CSV.")
@click.option("--countries", help="Comma-separated country codes. Default: $STRINGENCY_COUNTRIES.")
@out_option
@click.pass_context
def command_stringency(ctx, table, countries, out):
    """Daily median stringency over a set of countries."""
    out_dir = _out(out)
    with _run(ctx, out_dir) as recorder:
        recorder.add_inputs([table])
        wanted = [c.strip() for c in countries.split(",") if c.strip()] if countries else None
        series = median_stringency(load_stringency_table(table), wanted)
        recorder.add_outputs([series.write_csv(out_dir / "stringency.csv")])


@ces.command("synth")
@click.option("--config", "config_path", required=True, type=EVENT_FILE, help="Synthetic stream JSON config.")
@click.option("--taxonomy", type=EVENT_FILE, help="Taxonomy CSV; overrides the config's.")
@seed_option
@out_option
@click.pass_context
def command_synth(ctx, config_path, taxonomy, seed, out):
    """Generate a synthetic event stream from a seasonal Poisson model."""
    out_dir = _out(out)
    config = SynthConfig.load(config_path)
    updates = {k: v for k, v in (("seed", seed), ("taxonomy", taxonomy)) if v is not None}
    config = config.model_copy(update=updates)
    if not config.taxonomy:
        raise click.UsageError("no taxonomy: set 'taxonomy' in the config or pass --taxonomy")
    with _run(ctx, out_dir, config.seed) as recorder:
        recorder.add_inputs([config_path, config.taxonomy])
        records = generate(config, load_taxonomy(config.taxonomy))
        recorder.add_outputs([write_events(records, out_dir / "events.csv")])
        log.info(f"[Synth] {len(records):,} records over {config.window}")


@ces.command("pipeline")
@click.option("--events", "events", multiple=True, required=True, type=EVENT_FILE, help="Event file; repeatable.")
@click.option("--taxonomy", required=True, type=EVENT_FILE, help="Taxonomy CSV.")
@click.option("--window", required=True, help="Analysis window A:B.")
@click.option("--warmup", help="History-only window for turnover.")
@click.option("--policy", type=click.Choice(["skip", "strict"]), help="Unknown-term policy.")
@click.option("--stringency", "stringency_path", type=EVENT_FILE, help="Stringency table; enables coherence.")
@click.option("--countries", help="Comma-separated country codes.")
@click.option("--pair", "pairs", multiple=True, help="Class pair FEATURE|ACTIVITY; default is the HOSVD peak.")
@click.option("--restarts", type=int, help="Modularity restarts.")
@click.option("--alpha", type=float, help="Significance level.")
@click.option("--draws", type=int, help="Coherence Monte Carlo draws.")
@click.option("--log1p", is_flag=True, help="log(1 + x) before the count wavelets.")
@click.option("--plots", is_flag=True, help="Also write SVG figures.")
@seed_option
@out_option
@click.pass_context
def command_pipeline(ctx, events, taxonomy, window, warmup, policy, stringency_path, countries, pairs,
                     restarts, alpha, draws, log1p, plots, seed, out):
    """Networks per year, HOSVD, turnover, wavelets and coherence with a summary JSON."""
    settings = get_settings()
    out_dir = _out(out)
    seed = settings.seed if seed is None else seed
    with _run(ctx, out_dir, seed) as recorder:
        recorder.add_inputs([*events, taxonomy, stringency_path])
        state = create_initial_state(
            event_paths=list(events),
            taxonomy_path=taxonomy,
            window=window,
            out_dir=str(out_dir),
            seed=seed,
            restarts=restarts or settings.modularity_restarts,
            alpha=alpha or settings.significance_level,
            draws=settings.coherence_mc_draws if draws is None else draws,
            stringency_path=stringency_path,
            countries=[c.strip() for c in countries.split(",") if c.strip()] if countries else None,
            pairs=[list(_pair(p)) for p in pairs],
            warmup=warmup,
            log1p=log1p,
            plots=plots,
            policy=policy or settings.unknown_term_policy,
        )
        result = run_pipeline(state)
        recorder.add_outputs(sorted(set(result["outputs"])))


def run_ces():
    ces(prog_name="ces")


# Main script is being run - launch the CLI
if __name__ == "__main__":
    run_ces()
