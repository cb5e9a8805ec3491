import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kohcal.kernels import (
    JITTER_MAX,
    DiscrepancyKernel,
    InvalidHyperparameterError,
    KernelFamily,
    NonPSDError,
    SurrogateKernel,
    batched_cholesky,
    covariance_matrix,
    jittered_cholesky,
    kernel_value,
    multitask_value,
    scaled_distance,
)

FAMILIES = list(KernelFamily)


def test_config_strings():
    assert [f.value for f in FAMILIES] == ["sqexp", "matern32", "matern52", "exponential", "rq1"]
    assert KernelFamily.parse("matern32") is KernelFamily.MATERN32
    with pytest.raises(ValueError):
        KernelFamily.parse("cosine")


def test_kernel_examples(frozen):
    assert kernel_value("sqexp", 0.0, 3.5, 1.0) == 3.5
    assert kernel_value("sqexp", math.sqrt(2), 1.0, 1.0) == pytest.approx(frozen["kernel_sqexp_r_sqrt2"], abs=1e-12)
    assert kernel_value("exponential", 1.0, 2.0, 1.0) == pytest.approx(frozen["kernel_exponential_r1_lam2"], abs=1e-12)
    assert kernel_value("matern32", 0.0, 5.0, 2.0) == 5.0
    assert kernel_value("matern32", 1.0, 1.0, 1.0) == pytest.approx(frozen["kernel_matern32_r1"], abs=1e-12)
    assert kernel_value("matern52", 0.7, 3.0, 2.0) == pytest.approx(frozen["kernel_matern52_r07_lam3_beta2"], abs=1e-12)
    assert kernel_value("rq1", 1.5, 2.0, 0.8) == pytest.approx(frozen["kernel_rq1_r15_lam2_beta08"], abs=1e-12)


@pytest.mark.parametrize("family", FAMILIES)
def test_value_at_zero_is_lambda_exactly(family):
    for lam in (0.1, 1.0, 3.5, 1e3):
        assert kernel_value(family, 0.0, lam, 0.37) == lam


@pytest.mark.parametrize("family", FAMILIES)
def test_monotone_decay(family):
    r = np.linspace(0, 50, 2001)
    k = kernel_value(family, r, 1.3, 0.9)
    assert np.all(np.diff(k) <= 0)
    assert kernel_value(family, 1e6, 1.0, 1.0) < 1e-5


@pytest.mark.parametrize("lam,beta", [(0.0, 1.0), (-1.0, 1.0), (1.0, 0.0), (1.0, -2.0)])
def test_invalid_hyperparameters(lam, beta):
    with pytest.raises(InvalidHyperparameterError):
        kernel_value("sqexp", 1.0, lam, beta)
    with pytest.raises(InvalidHyperparameterError):
        SurrogateKernel("sqexp", lam, beta, 1.0)


def test_scaled_distance_examples():
    assert scaled_distance([1.0], [2.0], [1.0], [2.0], 1.0, 1.0) == 0.0
    assert scaled_distance([1.0], [0.3], [0.0], [0.3], 2.0, 1.0) == pytest.approx(0.5, abs=1e-12)
    assert scaled_distance([3.0], [4.0], [0.0], [0.0], 1.0, 1.0) == pytest.approx(5.0, abs=1e-12)
    with pytest.raises(ValueError):
        scaled_distance([1.0, 2.0], [0.0], [1.0], [0.0], 1.0, 1.0)


vec3 = st.lists(st.floats(-10, 10), min_size=3, max_size=3)


@given(vec3, vec3, vec3, vec3, vec3, vec3, st.floats(0.1, 5), st.floats(0.1, 5))
@settings(max_examples=200, deadline=None)
def test_scaled_distance_triangle_inequality(x1, t1, x2, t2, x3, t3, bx, bt):
    d12 = scaled_distance(x1, t1, x2, t2, bx, bt)
    d23 = scaled_distance(x2, t2, x3, t3, bx, bt)
    d13 = scaled_distance(x1, t1, x3, t3, bx, bt)
    assert d13 <= d12 + d23 + 1e-9


def test_multitask_examples(frozen):
    k = SurrogateKernel("matern32", 1.0, 1.0, 1.0)
    assert multitask_value(([0.0], 0), ([0.0], 0), k, 3) == 1.0
    assert multitask_value(([0.0], 0), ([0.0], 1), k, 3) == 0.0
    assert multitask_value(([1.0], 2), ([0.0], 2), k, 3, t=[0.5], t2=[0.5]) == pytest.approx(
        frozen["kernel_matern32_r1"], abs=1e-12
    )
    with pytest.raises(ValueError):
        multitask_value(([0.0], 3), ([0.0], 0), k, 3)


@given(st.integers(0, 4), st.integers(0, 4), st.floats(-3, 3))
def test_multitask_exact_zero_across_tasks(i, j, x):
    k = DiscrepancyKernel("matern32", 2.0, 0.5)
    v = multitask_value(([x], i), ([0.0], j), k, 5)
    if i != j:
        assert v == 0.0 and math.copysign(1.0, v) == 1.0
    else:
        assert v > 0


def test_covariance_matrix_examples():
    k = SurrogateKernel("sqexp", 1.0, 1.0, 1.0)
    K = covariance_matrix([([0.0], [0.0])], k, 0.04, [True])
    assert K.shape == (1, 1) and K[0, 0] == pytest.approx(1.04, abs=1e-12)
    K = covariance_matrix([([0.3], [1.0]), ([0.3], [1.0])], k)
    assert K[0, 1] == K[0, 0] == K[1, 1]
    pts = [([v], [w]) for v, w in np.random.default_rng(0).normal(size=(7, 2))]
    K = covariance_matrix(pts, k, 0.1, [True] * 3 + [False] * 4)
    assert np.array_equal(K, K.T)
    with pytest.raises(ValueError):
        covariance_matrix([], k)


@pytest.mark.parametrize("family", FAMILIES)
def test_random_point_sets_factor_after_jitter(family):
    rng = np.random.default_rng(FAMILIES.index(family))
    for _ in range(100):
        n = int(rng.integers(1, 21))
        d = int(rng.integers(1, 5))
        X = rng.uniform(-1, 1, size=(n, d))
        if n > 2:
            X[1] = X[0]  # duplicate rows make the noise-free matrix singular
        k = DiscrepancyKernel(family, float(rng.uniform(0.1, 3)), float(rng.uniform(0.2, 2)))
        K = covariance_matrix([(x, ()) for x in X], k)
        assert np.array_equal(K, K.T)
        L, jitter = jittered_cholesky(K)
        Kj = K + jitter * np.eye(n)
        assert np.allclose(L @ L.T, Kj, atol=1e-10 * np.mean(np.diag(K)))
        assert np.linalg.eigvalsh(Kj).min() >= -1e-10


def test_jitter_escalation_and_failure():
    K = np.ones((3, 3))  # rank one: needs jitter
    L, jitter = jittered_cholesky(K)
    assert jitter > 0
    with pytest.raises(NonPSDError) as err:
        jittered_cholesky(np.array([[1.0, 0.0], [0.0, -1.0]]) + 0.5)
    assert err.value.jitter == pytest.approx(JITTER_MAX * 0.5, rel=1e-6)


def test_batched_cholesky_flags_failures():
    good = np.eye(3) * 2.0
    bad = np.diag([1.0, 1.0, -5.0])
    L, ok = batched_cholesky(np.stack([good, bad, good]))
    assert ok.tolist() == [True, False, True]
    assert np.allclose(L[0] @ L[0].T, good)
