from datetime import date, timedelta

import numpy as np
import pytest

from src.data.models import EventRecord, Window
from src.errors import InputValidationError
from src.synth import Impulse, SynthConfig, generate
from src.turnover import Scope, daily_users, new_user_ratio, user_network


def day(n: int) -> date:
    return date(2020, 1, n)


@pytest.fixture
def two_days():
    return [
        EventRecord(day(1), "park", "walking", "u1"),
        EventRecord(day(1), "beach", "yoga", "u2"),
        EventRecord(day(2), "park", "running", "u2"),
        EventRecord(day(2), "park", "yoga", "u3"),
        EventRecord(day(2), "park", "yoga", "u3"),
    ]


def test_hand_computed_ratio(taxonomy, two_days):
    series = new_user_ratio(two_days, taxonomy, Window(day(1), day(2)))
    assert series.frame["active_users"].tolist() == [2, 2]
    assert series.frame["new_users"].tolist() == [2, 1]
    assert series.ratio.tolist() == [1.0, 0.5]
    assert series.scope == "all"


def test_history_before_window_counts(taxonomy, two_days):
    series = new_user_ratio(two_days, taxonomy, Window(day(2), day(2)))
    assert series.ratio.tolist() == [0.5]


def test_warmup_window(taxonomy, two_days):
    records = two_days + [EventRecord(date(2019, 12, 1), "river", "photography", "u3")]
    warm = Window(date(2019, 12, 1), date(2019, 12, 31))
    series = new_user_ratio(records, taxonomy, Window(day(1), day(2)), warmup=warm)
    assert series.frame["new_users"].tolist() == [2, 0]

    # records outside the warmup are not history
    late = Window(date(2019, 12, 2), date(2019, 12, 31))
    assert new_user_ratio(records, taxonomy, Window(day(1), day(2)), warmup=late).ratio.tolist() == [1.0, 0.5]

    with pytest.raises(InputValidationError, match="warmup"):
        new_user_ratio(records, taxonomy, Window(day(1), day(2)), warmup=Window(day(1), day(1)))


def test_longer_warmup_never_raises_ratio(taxonomy, rng):
    terms = [("park", "walking"), ("beach", "yoga"), ("river", "photography")]
    start = date(2019, 11, 1)
    records = [
        EventRecord(
            start + timedelta(days=int(rng.integers(0, 81))),
            *terms[int(rng.integers(0, 3))],
            f"u{int(rng.integers(0, 60))}",
        )
        for _ in range(600)
    ]
    window = Window(day(1), day(20))
    short = new_user_ratio(records, taxonomy, window, warmup=Window(date(2019, 12, 15), date(2019, 12, 31)))
    longer = new_user_ratio(records, taxonomy, window, warmup=Window(start, date(2019, 12, 31)))
    everything = new_user_ratio(records, taxonomy, window)
    assert short.frame["active_users"].tolist() == longer.frame["active_users"].tolist()
    for wide, narrow in ((longer, short), (everything, longer)):
        assert (wide.frame["new_users"] <= narrow.frame["new_users"]).all()
        np.testing.assert_array_equal(wide.ratio.isna(), narrow.ratio.isna())
        assert (wide.ratio.fillna(0.0) <= narrow.ratio.fillna(0.0)).all()
    assert longer.frame["new_users"].sum() < short.frame["new_users"].sum()


def test_pair_scope(taxonomy, two_days):
    scope = Scope("urban greenspace", "self care")
    series = new_user_ratio(two_days, taxonomy, Window(day(1), day(2)), scope)
    assert series.scope == "urban greenspace x self care"
    assert series.frame["active_users"].tolist() == [0, 1]
    assert np.isnan(series.ratio.iloc[0])
    assert series.ratio.iloc[1] == 1.0

    ratio = series.ratio_series()
    assert ratio.values.tolist() == [0.0, 1.0]
    assert ratio.name == "new_user_ratio urban greenspace x self care"


def test_scope_validation(taxonomy, two_days):
    with pytest.raises(InputValidationError):
        Scope("coast", None)
    with pytest.raises(InputValidationError, match="empty scope"):
        new_user_ratio(two_days, taxonomy, Window(day(1), day(2)), Scope("desert", "exercise"))


def test_new_never_exceeds_active(taxonomy, rng):
    terms = [("park", "walking"), ("beach", "yoga"), ("river", "photography")]
    records = [
        EventRecord(day(1 + int(rng.integers(0, 20))), *terms[int(rng.integers(0, 3))], f"u{int(rng.integers(0, 30))}")
        for _ in range(400)
    ]
    series = new_user_ratio(records, taxonomy, Window(day(1), day(20)))
    frame = series.frame
    assert (frame["new_users"] <= frame["active_users"]).all()
    assert series.ratio.dropna().between(0.0, 1.0).all()
    # everyone is new exactly once
    assert frame["new_users"].sum() == len({r.user for r in records})


def test_turnover_frame(taxonomy, two_days):
    frame = new_user_ratio(two_days, taxonomy, Window(day(1), day(2))).to_frame()
    assert list(frame.columns) == ["date", "scope", "active_users", "new_users", "ratio"]
    assert frame["date"].tolist() == ["2020-01-01", "2020-01-02"]


def test_daily_users(taxonomy, two_days):
    series = daily_users(two_days, taxonomy, Window(day(1), day(3)))
    assert series.values.tolist() == [2.0, 2.0, 0.0]
    assert series.name == "daily_users all"


def test_user_network_counts_distinct_users(taxonomy, two_days):
    full = user_network(two_days, taxonomy, "full")
    assert full.weights[full.features.index("park"), full.activities.index("yoga")] == 1
    grouped = user_network(two_days, taxonomy, "grouped")
    ugs = grouped.features.index("urban greenspace")
    assert grouped.weights[ugs, grouped.activities.index("exercise")] == 2
    assert grouped.weights.sum() == 4


def test_missing_user_rejected(taxonomy):
    with pytest.raises(InputValidationError, match="pseudonym"):
        new_user_ratio([EventRecord(day(1), "park", "walking", " ")], taxonomy, Window(day(1), day(1)))


@pytest.mark.slow
def test_newcomer_spike_is_global_maximum(taxonomy):
    config = SynthConfig(
        start=date(2019, 11, 1),
        end=date(2020, 6, 30),
        baseline_rate=2.0,
        user_pool=200,
        user_activity=0.2,
        newcomer_fraction=0.05,
        impulses=[
            Impulse(feature="urban greenspace", activity="self care",
                    start=date(2020, 3, 13), end=date(2020, 5, 31), factor=3.0, newcomer_factor=8.0),
        ],
        seed=7,
    )
    records = generate(config, taxonomy)
    series = new_user_ratio(
        records, taxonomy, Window(date(2020, 1, 1), date(2020, 6, 30)),
        warmup=Window(date(2019, 11, 1), date(2019, 12, 31)),
    )
    peak = series.ratio.idxmax().date()
    assert date(2020, 3, 13) <= peak <= date(2020, 5, 31)
