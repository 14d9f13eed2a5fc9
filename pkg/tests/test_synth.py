import json
from datetime import date

import numpy as np
import pytest
from pydantic import ValidationError
from scipy import stats

from src.data.ingest import aggregate, write_events
from src.errors import InputValidationError
from src.synth import Impulse, Seasonality, SynthConfig, generate, generate_counts, rate_tensor
from src.tensor import CESTensor, hosvd, leading_outer_product, max_cell

IMPULSE = dict(feature="urban greenspace", activity="self care", start=date(2020, 3, 13), end=date(2020, 5, 31))


def config(**overrides):
    values = dict(start=date(2020, 1, 1), end=date(2020, 12, 31), baseline_rate=1.0, seed=11)
    values.update(overrides)
    return SynthConfig(**values)


# === Rates ===


def test_rate_overrides_by_term_class_and_wildcard(taxonomy):
    cfg = config(baseline_rate=0.0, rates={"*|photography": 2.0, "coast|self care": 5.0, "park|walking": 1.5})
    rates = rate_tensor(cfg, taxonomy)
    features, activities = taxonomy.terms("feature"), taxonomy.terms("activity")
    assert rates.shape == (5, 5, 366)
    assert np.all(rates[:, activities.index("photography")] == 2.0)
    assert np.all(rates[features.index("cliff"), activities.index("meditation")] == 5.0)
    assert np.all(rates[features.index("park"), activities.index("walking")] == 1.5)
    assert np.all(rates[features.index("garden"), activities.index("walking")] == 0.0)


def test_seasonality_and_impulse_shape_rates(taxonomy):
    cfg = config(
        seasonality=Seasonality(amplitude=0.5, period=4.0),
        impulses=[Impulse(factor=3.0, **IMPULSE)],
    )
    rates = rate_tensor(cfg, taxonomy)
    walk = rates[0, taxonomy.terms("activity").index("walking")]
    np.testing.assert_allclose(walk[:4], [1.0, 1.5, 1.0, 0.5], atol=1e-12)
    park, yoga = taxonomy.terms("feature").index("park"), taxonomy.terms("activity").index("yoga")
    i = (date(2020, 3, 13) - date(2020, 1, 1)).days
    assert rates[park, yoga, i] == pytest.approx(3.0 * rates[park, yoga, i - 4])
    assert rates[park, yoga, i - 1] == pytest.approx(rates[park, yoga, i - 5])


def test_unknown_pattern(taxonomy):
    with pytest.raises(InputValidationError, match="volcano"):
        rate_tensor(config(rates={"volcano|*": 1.0}), taxonomy)


# === Config validation ===


def test_config_rejects_bad_values():
    with pytest.raises(ValidationError):
        config(end=date(2019, 12, 31))
    with pytest.raises(ValidationError):
        config(rates={"park": 1.0})
    with pytest.raises(ValidationError):
        config(rates={"park|walking": -1.0})
    with pytest.raises(ValidationError):
        config(impulses=[Impulse(factor=2.0, feature="*", activity="*", start=date(2021, 1, 1), end=date(2021, 1, 2))])
    with pytest.raises(ValidationError):
        Impulse(factor=2.0, feature="*", activity="*", start=date(2020, 1, 2), end=date(2020, 1, 1))
    with pytest.raises(ValidationError):
        SynthConfig.model_validate({"start": "2020-01-01", "end": "2020-01-02", "rate": 1})


def test_load_resolves_relative_taxonomy(tmp_path):
    path = tmp_path / "synth.json"
    path.write_text(json.dumps({"start": "2020-01-01", "end": "2020-01-31", "taxonomy": "tax.csv"}), encoding="utf-8")
    loaded = SynthConfig.load(path)
    assert loaded.taxonomy == str(tmp_path / "tax.csv")
    assert loaded.window.n_days == 31

    broken = tmp_path / "broken.json"
    broken.write_text("{", encoding="utf-8")
    with pytest.raises(InputValidationError):
        SynthConfig.load(broken)


# === Counts and users ===


def test_poisson_mean_and_dispersion(taxonomy):
    counts = generate_counts(config(baseline_rate=4.0), taxonomy)
    n = counts.counts.shape[2]
    means = counts.counts.mean(axis=2)
    assert abs(means.mean() - 4.0) <= 3 * 2.0 / np.sqrt(n * means.size)
    assert np.all(np.abs(means - 4.0) <= 4 * 2.0 / np.sqrt(n))
    # index of dispersion over all cells
    dispersion = ((counts.counts - 4.0) ** 2).sum() / 4.0
    dof = counts.counts.size
    assert stats.chi2.ppf(0.005, dof) <= dispersion <= stats.chi2.ppf(0.995, dof)


def test_impulse_triples_cell_mean(taxonomy):
    counts = generate_counts(config(baseline_rate=4.0, impulses=[Impulse(factor=3.0, **IMPULSE)]), taxonomy).pool(taxonomy)
    cell = counts.pair_series("urban greenspace", "self care").values
    i = (IMPULSE["start"] - date(2020, 1, 1)).days
    j = (IMPULSE["end"] - date(2020, 1, 1)).days + 1
    assert j - i == 80
    baseline = np.r_[cell[:i], cell[j:]].mean()
    assert cell[i:j].mean() / baseline == pytest.approx(3.0, rel=0.1)


def test_generate_is_deterministic(taxonomy, tmp_path):
    spike = Impulse(feature="*", activity="self care", start=date(2020, 2, 1), end=date(2020, 2, 10), factor=2.0, newcomer_factor=4.0)
    cfg = config(end=date(2020, 2, 29), baseline_rate=0.5, user_pool=50, impulses=[spike])
    first = write_events(generate(cfg, taxonomy), tmp_path / "a.csv")
    second = write_events(generate(cfg, taxonomy), tmp_path / "b.csv")
    assert first.read_bytes() == second.read_bytes()
    other = write_events(generate(cfg.model_copy(update={"seed": 12}), taxonomy), tmp_path / "c.csv")
    assert other.read_bytes() != first.read_bytes()


def test_records_match_counts(taxonomy):
    cfg = config(end=date(2020, 1, 31), baseline_rate=0.8, user_pool=30)
    records = generate(cfg, taxonomy)
    counts = generate_counts(cfg, taxonomy)
    assert sum(r.count for r in records) == counts.total()
    np.testing.assert_array_equal(aggregate(records, taxonomy, "full", cfg.window).counts, counts.counts)
    keys = [(r.date, r.feature, r.activity, r.user) for r in records]
    assert keys == sorted(keys)
    assert len(set(keys)) == len(keys)


def test_newcomers_join_the_pool(taxonomy):
    cfg = config(end=date(2020, 1, 10), user_pool=5, newcomer_fraction=1.0)
    records = generate(cfg, taxonomy)
    users = {r.user for r in records}
    assert all(int(u[1:]) >= 5 for u in users)


@pytest.mark.slow
def test_impulse_cell_leads_outer_product(taxonomy):
    hits = 0
    for seed in range(100):
        cfg = config(impulses=[Impulse(factor=3.0, **IMPULSE)], seed=seed)
        grouped = generate_counts(cfg, taxonomy).pool(taxonomy)
        outer = leading_outer_product(hosvd(CESTensor.from_counts(grouped)), "feature", "activity")
        hits += max_cell(outer) == ("urban greenspace", "self care")
    assert hits >= 95
