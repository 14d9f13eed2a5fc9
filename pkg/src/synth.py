"""Deterministic synthetic event streams.

Daily cell counts are Poisson with rate baseline x seasonal x impulse. Each
event is then assigned a user: a newcomer with probability
``newcomer_fraction`` (raised by ``newcomer_factor`` on impulse days),
otherwise a uniform pick among the pool members active that day.

Config files are JSON; keys are documented in ``data/FIELDS.md``.
"""
from __future__ import annotations

import json
import logging
import math
from datetime import date
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .data.models import DailyCounts, EventRecord, Taxonomy, Window
from .errors import InputValidationError

log = logging.getLogger(__name__)

WILDCARD = "*"


class Seasonality(BaseModel):
    model_config = ConfigDict(extra="forbid")

    amplitude: float = Field(default=0.0, ge=0.0, le=1.0)
    period: float = Field(default=365.25, gt=0.0)
    phase: float = 0.0


class Impulse(BaseModel):
    """Multiplicative rate change on matching cells over a day range."""
    model_config = ConfigDict(extra="forbid")

    feature: str
    activity: str
    start: date
    end: date
    factor: float = Field(ge=0.0)
    newcomer_factor: float = Field(default=1.0, ge=0.0)

    @model_validator(mode="after")
    def _check_range(self):
        if self.end < self.start:
            raise ValueError(f"impulse ends ({self.end}) before it starts ({self.start})")
        return self


class SynthConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    start: date
    end: date
    taxonomy: Optional[str] = None
    baseline_rate: float = Field(default=1.0, ge=0.0)
    # "feature|activity" -> events/day; each side a term, a class or "*"
    rates: Dict[str, float] = Field(default_factory=dict)
    seasonality: Seasonality = Field(default_factory=Seasonality)
    cell_seasonality: Dict[str, Seasonality] = Field(default_factory=dict)
    impulses: List[Impulse] = Field(default_factory=list)
    user_pool: int = Field(default=1000, ge=1)
    user_activity: float = Field(default=0.1, gt=0.0, le=1.0)
    newcomer_fraction: float = Field(default=0.05, ge=0.0, le=1.0)
    seed: int = 20180101

    @field_validator("rates")
    @classmethod
    def _check_rates(cls, rates: Dict[str, float]) -> Dict[str, float]:
        for key, value in rates.items():
            _split_key(key)
            if not math.isfinite(value) or value < 0:
                raise ValueError(f"rate for '{key}' must be finite and >= 0")
        return rates

    @field_validator("cell_seasonality")
    @classmethod
    def _check_keys(cls, cells: Dict[str, Seasonality]) -> Dict[str, Seasonality]:
        for key in cells:
            _split_key(key)
        return cells

    @model_validator(mode="after")
    def _check_window(self):
        if self.end < self.start:
            raise ValueError(f"empty window: {self.start} is after {self.end}")
        for impulse in self.impulses:
            if impulse.start < self.start or impulse.end > self.end:
                raise ValueError(f"impulse {impulse.start}:{impulse.end} is outside the window")
        return self

    @property
    def window(self) -> Window:
        return Window(self.start, self.end)

    @classmethod
    def load(cls, path: str | Path) -> "SynthConfig":
        """Read a JSON config; a relative taxonomy path resolves against the file."""
        path = Path(path)
        try:
            payload = json.loads(path.read_text(encoding="utf-8"))
        except FileNotFoundError as e:
            raise InputValidationError(f"file not found: {path}") from e
        except (OSError, json.JSONDecodeError) as e:
            raise InputValidationError(f"cannot read synth config {path}: {e}") from e
        config = cls.model_validate(payload)
        if config.taxonomy and not Path(config.taxonomy).is_absolute():
            config = config.model_copy(update={"taxonomy": str(path.parent / config.taxonomy)})
        return config


def _split_key(key: str):
    parts = key.split("|")
    if len(parts) != 2 or not all(p.strip() for p in parts):
        raise ValueError(f"cell key '{key}' must look like 'feature|activity'")
    return parts[0].strip().casefold(), parts[1].strip()


def _matches(taxonomy: Taxonomy, kind: str, pattern: str, terms: List[str]) -> np.ndarray:
    if pattern == WILDCARD:
        return np.ones(len(terms), dtype=bool)
    folded = pattern.casefold()
    mapping = taxonomy.mapping(kind)
    hits = np.array([t == folded or mapping[t] == pattern for t in terms], dtype=bool)
    if not hits.any():
        raise InputValidationError(f"synth config: '{pattern}' matches no {kind} term or class")
    return hits


def _cell_mask(taxonomy: Taxonomy, features: List[str], activities: List[str], feature: str, activity: str) -> np.ndarray:
    return _matches(taxonomy, "feature", feature, features)[:, None] & _matches(taxonomy, "activity", activity, activities)[None, :]


def rate_tensor(config: SynthConfig, taxonomy: Taxonomy) -> np.ndarray:
    """Expected events per (feature term, activity term, day)."""
    features, activities = taxonomy.terms("feature"), taxonomy.terms("activity")
    window = config.window
    base = np.full((len(features), len(activities)), config.baseline_rate)
    for key, value in config.rates.items():
        f_pat, a_pat = key.split("|")
        base[_cell_mask(taxonomy, features, activities, f_pat.strip(), a_pat.strip())] = value

    t = np.arange(window.n_days, dtype=float)

    def cycle(s: Seasonality) -> np.ndarray:
        return 1.0 + s.amplitude * np.sin(2.0 * np.pi * (t - s.phase) / s.period)

    rates = base[:, :, None] * cycle(config.seasonality)[None, None, :]
    for key, season in config.cell_seasonality.items():
        f_pat, a_pat = key.split("|")
        mask = _cell_mask(taxonomy, features, activities, f_pat.strip(), a_pat.strip())
        rates[mask] = base[mask][:, None] * cycle(season)[None, :]

    for impulse in config.impulses:
        mask = _cell_mask(taxonomy, features, activities, impulse.feature, impulse.activity)
        i = (impulse.start - window.start).days
        j = (impulse.end - window.start).days + 1
        rates[mask, i:j] *= impulse.factor
    return rates


def _newcomer_probability(config: SynthConfig) -> np.ndarray:
    window = config.window
    boost = np.ones(window.n_days)
    for impulse in config.impulses:
        i = (impulse.start - window.start).days
        j = (impulse.end - window.start).days + 1
        boost[i:j] *= impulse.newcomer_factor
    return np.clip(config.newcomer_fraction * boost, 0.0, 1.0)


def generate_counts(
    config: SynthConfig, taxonomy: Taxonomy, rng: Optional[np.random.Generator] = None
) -> DailyCounts:
    """Poisson cell counts only (no users)."""
    rng = rng or np.random.default_rng(config.seed)
    rates = rate_tensor(config, taxonomy)
    counts = rng.poisson(rates).astype(np.int64)
    return DailyCounts(
        taxonomy.terms("feature"), taxonomy.terms("activity"), config.window.dates(), counts, "full"
    )


def generate(config: SynthConfig, taxonomy: Taxonomy) -> List[EventRecord]:
    """Event records sorted by (date, feature, activity, user).

    Identical (date, feature, activity, user) events are folded into one
    record with a count.
    """
    rng = np.random.default_rng(config.seed)
    counts = generate_counts(config, taxonomy, rng)
    newcomer_p = _newcomer_probability(config)

    pool: List[str] = [f"u{n:06d}" for n in range(config.user_pool)]
    records: List[EventRecord] = []
    for d, day in enumerate(counts.days):
        day_counts = counts.counts[:, :, d]
        n_events = int(day_counts.sum())
        if n_events == 0:
            continue
        active = np.flatnonzero(rng.random(len(pool)) < config.user_activity)
        fresh = rng.random(n_events) < newcomer_p[d]
        picks = rng.integers(0, max(active.size, 1), size=n_events)

        users: List[str] = []
        for k in range(n_events):
            if fresh[k] or active.size == 0:
                pool.append(f"u{len(pool):06d}")
                users.append(pool[-1])
            else:
                users.append(pool[active[picks[k]]])

        f_idx, a_idx = np.nonzero(day_counts)
        cells = np.repeat(np.arange(f_idx.size), day_counts[f_idx, a_idx])
        folded: Dict[tuple, int] = {}
        for cell, user in zip(cells, users):
            key = (counts.features[f_idx[cell]], counts.activities[a_idx[cell]], user)
            folded[key] = folded.get(key, 0) + 1
        for (feature, activity, user), count in sorted(folded.items()):
            records.append(EventRecord(day.date(), feature, activity, user, count))

    log.info(
        f"[Synth] Generated {counts.total():,} events as {len(records):,} records; "
        f"{len(pool) - config.user_pool:,} newcomers joined a pool of {config.user_pool:,}"
    )
    return records
