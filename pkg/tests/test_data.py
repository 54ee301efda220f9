import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from iifpnet import data
from iifpnet.errors import ConfigError, ContractError, ParseError


def write(tmp_path, text, name="d.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_load_small_file(tmp_path):
    ds = data.load_csv(write(tmp_path, "a,y\n1,2\n3,4\n5,6\n"), "y")
    assert len(ds) == 3
    np.testing.assert_array_equal(ds.features[:, 0], [1, 3, 5])
    np.testing.assert_array_equal(ds.targets, [2, 4, 6])
    assert ds.feature_names == ["a"]


def test_load_drops_missing_column(tmp_path):
    ds = data.load_csv(write(tmp_path, "a,b,c,y\n1,,2,0\n3,,4,1\n5,NA,6,0\n"), "y")
    assert ds.feature_names == ["a", "c"]
    assert ds.features.shape == (3, 2)


def test_load_drops_partly_missing_column(tmp_path):
    ds = data.load_csv(write(tmp_path, "a,b,y\n1,7,0\n3,?,1\n"), "y")
    assert ds.feature_names == ["a"]


def test_load_non_numeric_target(tmp_path):
    with pytest.raises(ParseError) as info:
        data.load_csv(write(tmp_path, "a,y\n1,2\n3,oops\n"), "y")
    assert info.value.location.startswith("row 3")


def test_load_missing_target_column(tmp_path):
    with pytest.raises(ParseError):
        data.load_csv(write(tmp_path, "a,b\n1,2\n"), "y")


def test_load_ragged_row(tmp_path):
    with pytest.raises(ParseError) as info:
        data.load_csv(write(tmp_path, "a,y\n1,2\n3\n"), "y")
    assert info.value.location == "row 3"


def test_load_bundled_fixture():
    from pathlib import Path

    ds = data.load_csv(Path(__file__).parent / "data" / "diabetes.csv", "progression")
    assert ds.features.shape == (442, 10)


def _rows(n, d=2, seed=0):
    rng = np.random.default_rng(seed)
    return data.Dataset(rng.normal(size=(n, d)), rng.uniform(size=n))


def test_split_sizes():
    tr, va, te = data.split(_rows(10), (0.6, 0.2, 0.2), seed=3)
    assert (len(tr), len(va), len(te)) == (6, 2, 2)


def test_split_disjoint_and_covering():
    ds = data.Dataset(np.arange(50.0)[:, None], np.arange(50.0))
    parts = data.split(ds, seed=1)
    seen = np.concatenate([p.targets for p in parts])
    assert sorted(seen) == list(range(50))


def test_split_seeded():
    a = data.split(_rows(30), seed=4)
    b = data.split(_rows(30), seed=4)
    for x, y in zip(a, b):
        np.testing.assert_array_equal(x.features, y.features)


@pytest.mark.parametrize("fractions", [(1.0, 0.0, 0.0), (0.5, 0.2, 0.2), (0.6, 0.5, -0.1)])
def test_split_invalid(fractions):
    with pytest.raises(ConfigError):
        data.split(_rows(10), fractions)


def test_target_scaling():
    ds = data.Dataset(np.random.default_rng(0).normal(size=(3, 2)), [2.0, 4.0, 6.0])
    with pytest.warns(RuntimeWarning):
        prep = data.fit_preprocessor(ds, k=10)
    np.testing.assert_allclose(prep.apply(ds).targets, [0.0, 0.5, 1.0])


def test_line_gives_diagonal_component():
    t = np.linspace(-1, 1, 20)
    ds = data.Dataset(np.column_stack([t, t]), t**2)
    with pytest.warns(RuntimeWarning, match="lowering k"):
        prep = data.fit_preprocessor(ds)
    np.testing.assert_allclose(prep.components[0], [2**-0.5, 2**-0.5], atol=1e-12)
    assert abs(prep.explained_variance[1]) < 1e-12


def test_identity_covariance_input():
    rng = np.random.default_rng(2)
    x = rng.normal(size=(500, 10))
    x = (x - x.mean(0)) @ np.linalg.inv(np.linalg.cholesky(np.cov(x.T)).T)  # exact identity covariance
    prep = data.fit_preprocessor(data.Dataset(x, rng.uniform(size=500)))
    c = prep.components
    np.testing.assert_allclose(c @ c.T, np.eye(10), atol=1e-8)
    z = prep.transform_features(x)
    cov = np.cov(z.T)
    assert np.max(np.abs(cov - np.diag(np.diag(cov)))) < 1e-8


@pytest.mark.parametrize("seed", range(4))
def test_projected_covariance_diagonal(seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(300, 14)) @ rng.normal(size=(14, 14))
    prep = data.fit_preprocessor(data.Dataset(x, rng.uniform(size=300)))
    cov = np.cov(prep.transform_features(x).T)
    off = cov - np.diag(np.diag(cov))
    assert np.max(np.abs(off)) <= 1e-8
    np.testing.assert_allclose(prep.components @ prep.components.T, np.eye(10), atol=1e-8)
    assert np.all(np.diff(prep.explained_variance) <= 1e-12)


def test_sign_convention():
    rng = np.random.default_rng(7)
    prep = data.fit_preprocessor(data.Dataset(rng.normal(size=(200, 12)), rng.uniform(size=200)))
    for comp in prep.components:
        assert comp[np.argmax(np.abs(comp))] > 0


def test_zero_variance_column_dropped():
    rng = np.random.default_rng(1)
    x = np.column_stack([rng.normal(size=(100, 11)), np.full(100, 3.0)])
    with pytest.warns(RuntimeWarning, match="zero-variance"):
        prep = data.fit_preprocessor(data.Dataset(x, rng.uniform(size=100)))
    assert 11 not in prep.columns
    assert prep.k == 10


def test_fit_uses_train_rows_only():
    ds = data.synthetic_regression(500, 12, seed=2)
    tr, va, te = data.split(ds, seed=2)
    prep = data.fit_preprocessor(tr)
    np.testing.assert_allclose(prep.feature_means, tr.features.mean(axis=0), rtol=1e-12, atol=1e-15)
    assert prep.target_min == tr.targets.min() and prep.target_max == tr.targets.max()
    snapshot = prep.components.copy()
    prep.apply(va)
    prep.apply(te)
    np.testing.assert_array_equal(prep.components, snapshot)


def test_guard_band_on_other_splits():
    tr = data.Dataset(np.random.default_rng(0).normal(size=(20, 2)), np.linspace(0, 1, 20))
    with pytest.warns(RuntimeWarning):
        prep = data.fit_preprocessor(tr)
    far = data.Dataset(np.zeros((2, 2)), [-10.0, 10.0])
    np.testing.assert_array_equal(prep.apply(far).targets, [-0.5, 1.5])


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_target_round_trip(seed):
    rng = np.random.default_rng(seed)
    ds = data.Dataset(rng.normal(size=(40, 11)), rng.normal(scale=50, size=40))
    prep = data.fit_preprocessor(ds)
    back = prep.inverse_targets(prep.apply(ds).targets)
    np.testing.assert_allclose(back, ds.targets, rtol=0, atol=1e-12 * max(1.0, np.abs(ds.targets).max()))


def test_constant_targets_rejected():
    with pytest.raises(ContractError):
        data.fit_preprocessor(data.Dataset(np.random.default_rng(0).normal(size=(30, 11)), np.ones(30)))


def test_synthetic_seeded():
    a = data.synthetic_regression(100, 5, seed=8)
    b = data.synthetic_regression(100, 5, seed=8)
    np.testing.assert_array_equal(a.features, b.features)
    np.testing.assert_array_equal(a.targets, b.targets)


def test_synthetic_noise_free_is_deterministic_function():
    ds = data.synthetic_regression(200, 4, seed=3, noise=0.0)
    # without noise the logit of the target is exactly affine in the features
    logits = np.log(ds.targets / (1 - ds.targets))
    x = np.column_stack([ds.features, np.ones(200)])
    coef, *_ = np.linalg.lstsq(x, logits, rcond=None)
    np.testing.assert_allclose(x @ coef, logits, atol=1e-9)


@pytest.mark.parametrize("seed", range(5))
def test_synthetic_targets_in_unit_interval(seed):
    t = data.synthetic_regression(500, 10, seed=seed, noise=0.5).targets
    assert t.min() >= 0.0 and t.max() <= 1.0


def test_synthetic_minimum_size():
    with pytest.raises(ConfigError):
        data.synthetic_regression(10)


def test_save_and_reload(tmp_path):
    ds = data.synthetic_regression(60, 3, seed=1)
    path = tmp_path / "s.csv"
    data.save_csv(ds, path)
    back = data.load_csv(path, "target")
    np.testing.assert_array_equal(back.features, ds.features)
    np.testing.assert_array_equal(back.targets, ds.targets)
