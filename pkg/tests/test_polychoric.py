import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from hostsec import _backend
from hostsec.factor import (ConstantColumn, FactorError, OrdinalDataset, empirical_thresholds, polychoric_matrix,
                            polychoric_rho, smooth_correlation)

from conftest import ordinal_sample
from oracles import bvn_owen, bvn_quadrature, grid_polychoric, phi_series

BACKENDS = _backend.available()

BVN_POINTS = [(0.0, 0.0, 0.0), (0.0, 0.0, 0.5), (1.2, -0.4, 0.3), (-2.1, 0.7, -0.8), (0.3, 0.3, 0.999),
              (-1.0, -1.5, -0.999), (2.5, 2.5, 0.95), (-3.0, 1.0, 0.6), (0.5, -0.5, -0.2), (1.9, 0.1, 0.75)]


@pytest.mark.parametrize("backend", BACKENDS)
@pytest.mark.parametrize("h,k,r", BVN_POINTS)
def test_bvn_against_quadrature(backend, h, k, r):
    kern = _backend.load(backend)
    assert abs(kern.bvn_cdf(h, k, r) - bvn_quadrature(h, k, r)) <= 1e-10


def test_owen_oracle_agrees_with_quadrature():
    # guards the oracle itself
    for h, k, r in BVN_POINTS:
        if h and k:
            assert abs(float(bvn_owen(h, k, r)) - bvn_quadrature(h, k, r)) < 1e-10


def test_bvn_closed_form_at_origin():
    kern = _backend.kernels
    for r in (-0.9, -0.3, 0.0, 0.4, 0.8):
        assert kern.bvn_cdf(0.0, 0.0, r) == pytest.approx(0.25 + np.arcsin(r) / (2 * np.pi), abs=1e-14)


def test_threshold_of_even_binary_split():
    assert empirical_thresholds(np.array([0, 1] * 50), 2) == pytest.approx([0.0], abs=1e-15)


def test_threshold_of_rare_category():
    codes = np.r_[np.zeros(8696, int), np.ones(1304, int)]
    (t,) = empirical_thresholds(codes, 2)
    assert t == pytest.approx(1.125, abs=1e-3)
    assert phi_series(t) == pytest.approx(0.8696, abs=1e-12)


def test_thresholds_of_thirds():
    t = empirical_thresholds(np.repeat([0, 1, 2], 100), 3)
    assert t == pytest.approx([-0.4307, 0.4307], abs=1e-4)
    assert phi_series(t[0]) == pytest.approx(1 / 3, abs=1e-12)


def test_threshold_errors():
    with pytest.raises(ConstantColumn):
        empirical_thresholds(np.zeros(10, int), 2)
    with pytest.raises(FactorError):
        empirical_thresholds(np.array([0, 2, 0, 2]), 3)


def table_codes(table):
    x, y = [], []
    for i, row in enumerate(table):
        for j, c in enumerate(row):
            x += [i] * c
            y += [j] * c
    return np.array(x), np.array(y)


@pytest.mark.parametrize("backend", BACKENDS)
def test_balanced_table_gives_zero(backend):
    x, y = table_codes([[25, 25], [25, 25]])
    assert polychoric_rho(x, y, backend=backend) == pytest.approx(0.0, abs=1e-8)


@pytest.mark.parametrize("backend", BACKENDS)
def test_identical_binary_clamps(backend):
    x = np.array([0, 1] * 500)
    rho, status = polychoric_rho(x, x, backend=backend, return_status=True)
    assert rho == pytest.approx(0.999, abs=1e-9)
    assert status == 2
    assert polychoric_rho(x, 1 - x, backend=backend) == pytest.approx(-0.999, abs=1e-9)


def test_large_sample_against_truth_and_grid_oracle():
    rng = np.random.default_rng(20170501)
    tx, ty = np.array([-0.6, 0.5]), np.array([-0.2, 0.9, 1.6])
    x, y = ordinal_sample(rng, 100_000, 0.5, tx, ty)
    rho = polychoric_rho(x, y)
    assert abs(rho - 0.5) <= 0.02
    ex = empirical_thresholds(x, 3)
    ey = empirical_thresholds(y, 4)
    table = np.zeros((3, 4))
    np.add.at(table, (x, y), 1)
    table[table == 0] = 0.5
    assert abs(rho - grid_polychoric(table, ex, ey)) <= 0.005


@pytest.mark.skipif(len(BACKENDS) < 2, reason="compiled backend not built")
def test_backend_parity():
    rng = np.random.default_rng(7)
    codes = []
    for rho in (-0.7, 0.0, 0.3, 0.95):
        x, y = ordinal_sample(rng, 3000, rho, [-0.5, 0.4], [0.2])
        codes += [x, y]
    data = OrdinalDataset.from_codes(np.column_stack(codes))
    a = polychoric_matrix(data, backend="python", smooth=False).values
    b = polychoric_matrix(data, backend="cython", smooth=False).values
    assert np.max(np.abs(a - b)) <= 1e-9
    kp, kc = _backend.load("python"), _backend.load("cython")
    for h, k, r in BVN_POINTS:
        assert kp.bvn_cdf(h, k, r) == pytest.approx(kc.bvn_cdf(h, k, r), abs=1e-14)


pairs = st.integers(20, 200).flatmap(lambda n: st.tuples(
    st.lists(st.integers(0, 3), min_size=n, max_size=n), st.lists(st.integers(0, 2), min_size=n, max_size=n)))


def usable(x, y):
    return len(set(x)) > 1 and len(set(y)) > 1


@settings(max_examples=60, deadline=None)
@given(pairs)
def test_symmetric_and_bounded(xy):
    x, y = xy
    if not usable(x, y):
        return
    a = polychoric_rho(x, y)
    assert a == polychoric_rho(y, x)
    assert -0.999 <= a <= 0.999


@settings(max_examples=60, deadline=None)
@given(pairs)
def test_reversing_categories_negates(xy):
    x, y = xy
    if not usable(x, y):
        return
    a = polychoric_rho(x, y)
    b = polychoric_rho(-np.asarray(x), y)
    assert abs(a + b) <= 1e-6


def test_independent_columns_near_identity():
    rng = np.random.default_rng(11)
    codes = np.column_stack([rng.integers(0, k, 20_000) for k in (2, 3, 2, 3, 2)])
    R = polychoric_matrix(OrdinalDataset.from_codes(codes))
    off = R.values[np.triu_indices(5, 1)]
    assert np.max(np.abs(off)) <= 0.03
    assert not R.smoothed


def test_single_column_identity():
    R = polychoric_matrix(OrdinalDataset.from_codes(np.array([[0], [1], [1]])))
    assert R.values.tolist() == [[1.0]]


def contaminated_codes(seed=3, n=5000):
    # x2 = x1 or x3 with rare independent x1, x3: two pairs clamp near +1
    # while the third is near 0, which no correlation matrix allows
    rng = np.random.default_rng(seed)
    x1 = (rng.random(n) < 0.05).astype(int)
    x3 = (rng.random(n) < 0.05).astype(int)
    return np.column_stack([x1, x1 | x3, x3])


def test_non_psd_is_smoothed():
    data = OrdinalDataset.from_codes(contaminated_codes())
    raw = polychoric_matrix(data, smooth=False)
    assert scipy.linalg.eigh(raw.values, eigvals_only=True)[0] < 0
    R = polychoric_matrix(data)
    assert R.smoothed and R.min_eigenvalue_before < 0
    w = scipy.linalg.eigh(R.values, eigvals_only=True)
    assert w[0] >= 1e-6
    assert np.allclose(np.diag(R.values), 1.0)
    assert np.allclose(R.values, R.values.T)


def test_smoothing_leaves_pd_untouched():
    R = np.array([[1.0, 0.3], [0.3, 1.0]])
    S, before, changed = smooth_correlation(R)
    assert S is R and not changed and before == pytest.approx(0.7)


def test_empty_category_collapsed():
    rng = np.random.default_rng(5)
    x, y = ordinal_sample(rng, 2000, 0.4, [0.0], [0.0])
    gap = np.column_stack([x * 2, y])  # codes 0 and 2, category 1 unused
    a = polychoric_matrix(OrdinalDataset(("a", "b"), gap, (3, 2))).values
    b = polychoric_matrix(OrdinalDataset.from_codes(np.column_stack([x, y]))).values
    assert np.array_equal(a, b)


@pytest.mark.parametrize("codes,counts,match", [
    ([[0, 1], [0, 0]], (2, 2), "'V1' is constant"),
    ([[0, 3], [1, 0]], (2, 2), "outside"),
    ([[0, 1]], (2, 2), "at least 2"),
    ([[0.5, 1], [1, 0]], (2, 2), "integers"),
])
def test_dataset_validation(codes, counts, match):
    with pytest.raises(FactorError, match=match):
        OrdinalDataset(("V1", "V2"), np.array(codes), counts)
