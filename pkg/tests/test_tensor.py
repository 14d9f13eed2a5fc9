import doctest
import importlib
from datetime import date, timedelta

import numpy as np
import pandas as pd
import pytest

from src.data.ingest import aggregate
from src.data.models import EventRecord
from src.errors import InputValidationError
from src.tensor import (
    CESTensor,
    hosvd,
    leading_outer_product,
    left_singular,
    max_cell,
    multilinear_product,
    refold,
    unfold,
    write_hosvd,
)


def test_module_examples():
    # the package re-exports the hosvd function under the submodule's name
    module = importlib.import_module("src.tensor.hosvd")
    failures, tried = doctest.testmod(module)
    assert tried > 0
    assert failures == 0


def test_unfold_shapes_and_refold(rng):
    x = rng.normal(size=(3, 4, 5))
    assert unfold(x, 1).shape == (3, 20)
    assert unfold(x, "activity").shape == (4, 15)
    assert unfold(x, "time").shape == (5, 12)
    for mode in (1, 2, 3):
        np.testing.assert_array_equal(refold(unfold(x, mode), mode, x.shape), x)
    with pytest.raises(InputValidationError):
        unfold(x, 4)


def test_unfold_cyclic_column_order():
    f, a, d = np.meshgrid(range(2), range(3), range(4), indexing="ij")
    x = 100 * f + 10 * a + d
    # mode 2 columns run over (day, feature), feature fastest
    assert unfold(x, 2)[1, :3].tolist() == [10, 110, 11]
    # mode 3 columns run over (feature, activity), activity fastest
    assert unfold(x, 3)[2, :4].tolist() == [2, 12, 22, 102]


def test_multilinear_product_identity(rng):
    x = rng.normal(size=(2, 3, 4))
    np.testing.assert_allclose(multilinear_product(x, [np.eye(2), np.eye(3), np.eye(4)]), x)


@pytest.mark.parametrize("seed", range(3))
def test_reconstruction_and_all_orthogonality(seed):
    x = np.random.default_rng(seed).poisson(3.0, size=(11, 16, 64)).astype(float)
    result = hosvd(x)
    error = np.linalg.norm(result.reconstruct() - x) / np.linalg.norm(x)
    assert error <= 1e-9
    for mode in (1, 2, 3):
        u = result.factor(mode)
        np.testing.assert_allclose(u.T @ u, np.eye(u.shape[1]), atol=1e-9)
        g = unfold(result.core, mode)
        gram = g @ g.T
        off = gram - np.diag(np.diag(gram))
        assert np.abs(off).max() <= 1e-9 * np.linalg.norm(x) ** 2
        values = result.singular_values[mode - 1]
        assert np.all(np.diff(values) <= 1e-9)


def test_rank_one_recovery(rng):
    vectors = []
    for n in (11, 16, 64):
        v = rng.normal(size=n)
        v /= np.linalg.norm(v)
        v *= np.sign(v[np.argmax(np.abs(v))])
        vectors.append(v)
    x = 7.5 * np.einsum("i,j,k->ijk", *vectors)
    result = hosvd(x)
    for mode, v in enumerate(vectors, start=1):
        np.testing.assert_allclose(result.factor(mode)[:, 0], v, atol=1e-9)
        assert result.singular_values[mode - 1][0] == pytest.approx(7.5, abs=1e-9)
        assert np.all(result.singular_values[mode - 1][1:] <= 1e-9)


def test_gram_path_matches_svd_path(rng):
    tall = rng.normal(size=(200, 6))
    u_gram, s_gram = left_singular(tall, gram_ratio=4.0)
    u_svd, s_svd = left_singular(tall, gram_ratio=1e9)
    np.testing.assert_allclose(s_gram, s_svd, rtol=1e-8)
    for k in range(6):
        assert abs(u_gram[:, k] @ u_svd[:, k]) == pytest.approx(1.0, abs=1e-8)
    np.testing.assert_allclose(u_gram.T @ u_gram, np.eye(200), atol=1e-9)


def test_long_time_mode_reconstruction(rng):
    x = rng.poisson(2.0, size=(3, 4, 400)).astype(float)
    result = hosvd(x)
    assert np.linalg.norm(result.reconstruct() - x) / np.linalg.norm(x) <= 1e-9


def test_sign_rule(rng):
    result = hosvd(rng.normal(size=(4, 5, 6)))
    for u in result.factors:
        pivots = u[np.argmax(np.abs(u), axis=0), np.arange(u.shape[1])]
        assert np.all(pivots > 0)


def test_truncation(rng):
    x = rng.normal(size=(5, 6, 7))
    result = hosvd(x, truncation=[2, None, 3])
    assert result.core.shape == (2, 6, 3)
    assert result.factor(1).shape == (5, 2)
    with pytest.raises(InputValidationError):
        hosvd(x, truncation=[0, None, None])
    with pytest.raises(InputValidationError):
        hosvd(x, truncation=[2, 3])


def test_core_keeps_tensor_energy(rng):
    x = rng.normal(size=(4, 6, 9))
    result = hosvd(x)
    assert np.linalg.norm(result.core) == pytest.approx(np.linalg.norm(x), rel=1e-10)


def test_truncation_error_is_discarded_core_energy(rng):
    x = rng.normal(size=(5, 6, 7))
    full = hosvd(x)
    truncated = hosvd(x, truncation=[2, None, 3])
    kept = full.core[:2, :, :3]
    np.testing.assert_allclose(truncated.core, kept, atol=1e-10)
    discarded = np.sqrt(np.linalg.norm(full.core) ** 2 - np.linalg.norm(kept) ** 2)
    assert np.linalg.norm(x - truncated.reconstruct()) == pytest.approx(discarded, rel=1e-8)


def test_zero_tensor_is_degenerate():
    result = hosvd(np.zeros((2, 3, 4)))
    assert result.degenerate
    np.testing.assert_array_equal(result.factor(2), np.eye(3))
    assert not result.core.any()


def test_non_finite_rejected():
    x = np.ones((2, 2, 2))
    x[0, 0, 0] = np.inf
    with pytest.raises(InputValidationError):
        hosvd(x)


# === CES tensors ===


@pytest.fixture
def counts(taxonomy):
    records = [
        EventRecord(date(2020, 1, 1) + timedelta(days=d), "park", "walking", f"u{d}", 1 + d % 3)
        for d in range(10)
    ]
    records += [EventRecord(date(2020, 1, 5), "beach", "yoga", "x", 20)]
    return aggregate(records, taxonomy, "grouped")


def test_ces_tensor_views(counts):
    tensor = CESTensor.from_counts(counts)
    assert tensor.shape == (3, 3, 10)
    assert tensor.labels("time")[0] == "2020-01-01"
    np.testing.assert_allclose(tensor.centered().values.mean(axis=2), 0.0, atol=1e-12)
    totals = tensor.normalized().values.sum(axis=(0, 1))
    np.testing.assert_allclose(totals, 1.0)


def test_leading_outer_product_peak(counts):
    result = hosvd(CESTensor.from_counts(counts))
    outer = leading_outer_product(result, "feature", "activity")
    assert outer.shape == (3, 3)
    assert outer.index.name == "feature"
    assert max_cell(outer) == ("coast", "self care")
    with pytest.raises(InputValidationError):
        leading_outer_product(result, 1, "feature")


def test_write_hosvd(counts, tmp_path):
    result = hosvd(CESTensor.from_counts(counts))
    written = write_hosvd(result, tmp_path, prefix="grouped")
    assert sorted(p.name for p in written) == [
        "grouped_factor_activity.csv",
        "grouped_factor_feature.csv",
        "grouped_factor_time.csv",
        "grouped_outer_activity_time.csv",
        "grouped_outer_feature_activity.csv",
        "grouped_outer_feature_time.csv",
        "grouped_scree.csv",
    ]
    scree = pd.read_csv(tmp_path / "grouped_scree.csv")
    assert list(scree.columns) == ["mode", "index", "singular_value", "energy_fraction"]
    for _, block in scree.groupby("mode"):
        assert block["energy_fraction"].sum() == pytest.approx(1.0)
