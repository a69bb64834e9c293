import math

import numpy as np
import pytest
from scipy import integrate

from armskit import (
    DomainError,
    GaussianMixtureSpec,
    NonFiniteValue,
    SpecError,
    TargetDensity,
    benchmark_mixture,
    gaussian_mixture,
    mixture_mean,
)

# log of the benchmark mixture density, computed independently with mpmath
# (50 digits, direct summation of the three weighted Gaussians, then log)
BENCH_LOG = {
    7.0: -1.835229253656343,
    0.0: -2.6229051932867962,
    -5.0: -2.122911322300629,
    1.0: -2.12291130199399,
    2.5: -3.2477468046595555,
    -10.0: -14.622911337530609,
    10.0: -6.3352292650788276,
}
# d/dx log p at 2.5, same mpmath setup
BENCH_DLOG_2P5 = -1.4990128840049743


def test_benchmark_log_density_matches_high_precision_oracle():
    t = gaussian_mixture(benchmark_mixture())
    for x, expected in BENCH_LOG.items():
        assert t.log_density(x) == pytest.approx(expected, abs=1e-13)


def test_benchmark_derivative_matches_oracle():
    t = gaussian_mixture(benchmark_mixture())
    assert t.log_density_derivative(2.5) == pytest.approx(BENCH_DLOG_2P5, abs=1e-12)


def test_benchmark_mean_is_1_6():
    assert mixture_mean(benchmark_mixture()) == pytest.approx(1.6, abs=1e-15)


def test_mixture_normalization_by_quadrature():
    spec = benchmark_mixture()
    t = gaussian_mixture(spec)
    lo = min(spec.means) - 10.0
    hi = max(spec.means) + 10.0
    total, _ = integrate.quad(lambda x: math.exp(t.log_density(x)), lo, hi, limit=200)
    assert total == pytest.approx(1.0, rel=1e-6)


def test_total_mass_scales_density_and_nothing_else():
    spec = benchmark_mixture()
    base = gaussian_mixture(spec)
    scaled = gaussian_mixture(spec, total_mass=10.0)
    shift = math.log(10.0)
    for x in (-7.0, -1.3, 0.0, 4.2, 7.0):
        assert scaled.log_density(x) - base.log_density(x) == pytest.approx(shift, abs=1e-12)
        # derivative of log p is invariant under constant scaling
        assert scaled.log_density_derivative(x) == pytest.approx(
            base.log_density_derivative(x), rel=1e-12, abs=1e-15
        )
    total, _ = integrate.quad(lambda x: math.exp(scaled.log_density(x)), -15.0, 17.0, limit=200)
    assert total == pytest.approx(10.0, rel=1e-6)


@pytest.mark.parametrize("bad", [0.0, -2.0, math.inf])
def test_total_mass_must_be_positive_finite(bad):
    with pytest.raises(SpecError):
        gaussian_mixture(benchmark_mixture(), total_mass=bad)


def test_derivative_matches_finite_differences():
    t = gaussian_mixture(benchmark_mixture())
    rng = np.random.default_rng(42)
    xs = rng.uniform(-9.0, 11.0, size=100)
    h = 1e-5
    for x in xs:
        fd = (t.log_density(x + h) - t.log_density(x - h)) / (2.0 * h)
        assert t.log_density_derivative(x) == pytest.approx(fd, abs=1e-5)


def test_single_component_is_shifted_standard_normal():
    t = gaussian_mixture(GaussianMixtureSpec([1.0], [0.0], [1.0]))
    const = -0.5 * math.log(2.0 * math.pi)
    for x in np.linspace(-6, 6, 41):
        assert t.log_density(x) - (-0.5 * x * x) == pytest.approx(const, abs=1e-12)


def test_symmetric_mixture_is_even():
    t = gaussian_mixture(GaussianMixtureSpec([0.5, 0.5], [-3.0, 3.0], [1.0, 1.0]))
    for x in np.linspace(0.0, 9.0, 31):
        assert t.log_density(x) == pytest.approx(t.log_density(-x), abs=1e-12)


def test_far_tails_fall_away_monotonically():
    t = gaussian_mixture(benchmark_mixture())
    vals = [t.log_density(x) for x in (12.0, 20.0, 40.0, 80.0)]
    assert all(a > b for a, b in zip(vals, vals[1:]))
    assert vals[-1] < -2000.0


def test_vector_log_pdf_matches_scalar():
    t = gaussian_mixture(benchmark_mixture())
    xs = np.linspace(-20.0, 22.0, 501)
    vec = t.log_density_array(xs)
    scal = np.array([t.log_density(float(x)) for x in xs])
    np.testing.assert_allclose(vec, scal, rtol=0, atol=1e-12)


def test_log_density_array_falls_back_without_vector_path():
    t = TargetDensity(log_pdf=lambda x: -x * x / 2.0)
    xs = np.linspace(-3, 3, 7)
    np.testing.assert_allclose(t.log_density_array(xs), -xs * xs / 2.0, atol=0)


def test_unnormalized_standard_normal_peak_is_zero():
    t = TargetDensity(log_pdf=lambda x: -x * x / 2.0)
    assert t.log_density(0.0) == 0.0


def test_domain_is_enforced():
    t = TargetDensity(log_pdf=lambda x: 0.0, domain=(0.0, 1.0))
    assert t.log_density(0.5) == 0.0
    with pytest.raises(DomainError):
        t.log_density(1.5)
    with pytest.raises(DomainError):
        t.log_density(-0.1)


def test_nan_log_density_is_rejected():
    t = TargetDensity(log_pdf=lambda x: float("nan"))
    with pytest.raises(NonFiniteValue):
        t.log_density(0.0)


def test_missing_derivative_raises():
    t = TargetDensity(log_pdf=lambda x: -x * x)
    assert not t.has_derivative
    with pytest.raises(SpecError):
        t.log_density_derivative(0.0)


def test_invalid_domain_raises():
    with pytest.raises(SpecError):
        TargetDensity(log_pdf=lambda x: 0.0, domain=(2.0, 2.0))


@pytest.mark.parametrize(
    "weights,means,variances",
    [
        ([], [], []),
        ([0.5, 0.5], [0.0], [1.0, 1.0]),
        ([0.3, 0.3, 0.3], [-5.0, 1.0, 7.0], [1.0, 1.0, 1.0]),  # sums to 0.9
        ([1.0], [0.0], [0.0]),
        ([1.0], [0.0], [-1.0]),
        ([-0.5, 1.5], [0.0, 1.0], [1.0, 1.0]),
        ([1.0], [math.inf], [1.0]),
    ],
)
def test_bad_mixture_specs_raise(weights, means, variances):
    with pytest.raises(SpecError):
        GaussianMixtureSpec(weights, means, variances)


def test_spec_error_names_the_offending_field():
    with pytest.raises(SpecError, match="weights"):
        GaussianMixtureSpec([0.6, 0.6], [0.0, 1.0], [1.0, 1.0])
    with pytest.raises(SpecError, match="variances"):
        GaussianMixtureSpec([1.0], [0.0], [-1.0])
