import math

import numpy as np
import pytest
from scipy.special import erf

from grwflash.quadrature import (
    QuadratureError,
    gaussian_tail_mass,
    geometric_cuts,
    integrate_adaptive,
)


def test_polynomial_exact():
    res = integrate_adaptive(
        lambda x, y: x * y, [0.0, 1.0], [0.0, 1.0], rel_tol=1e-12, abs_tol=1e-14
    )
    assert res.value.real == pytest.approx(0.25, abs=1e-14)


def test_gaussian_box():
    res = integrate_adaptive(
        lambda x, y: np.exp(-(x**2) - y**2),
        [-6.0, 0.0, 6.0],
        [-6.0, 0.0, 6.0],
        rel_tol=1e-11,
        abs_tol=1e-13,
    )
    exact = math.pi * erf(6.0) ** 2
    assert res.value.real == pytest.approx(exact, rel=1e-10)
    assert abs(res.value.real - exact) <= max(res.error, 1e-13)


def test_complex_integrand():
    res = integrate_adaptive(
        lambda x, y: np.exp(1j * (x + y)),
        [0.0, math.pi],
        [0.0, math.pi],
        rel_tol=1e-10,
        abs_tol=1e-12,
    )
    # int_0^pi e^{ix} dx = 2i, so the product is -4
    assert res.value == pytest.approx(-4.0 + 0.0j, abs=1e-9)


def test_integrable_corner_singularity():
    # 1/sqrt(x*y) is integrable; singular corner sits on patch boundaries
    cuts = [c for c in geometric_cuts(0.0, 1e-12, 1.0) if c >= 0.0] + [1.0]
    res = integrate_adaptive(
        lambda x, y: 1.0 / np.sqrt(x * y),
        cuts,
        cuts,
        rel_tol=1e-6,
        abs_tol=1e-10,
        max_evals=20_000_000,
    )
    assert res.value.real == pytest.approx(4.0, rel=1e-6)
    assert abs(res.value.real - 4.0) <= res.error


def test_error_budget_exhaustion_raises():
    with pytest.raises(QuadratureError):
        integrate_adaptive(
            lambda x, y: np.sin(1.0 / np.maximum(x, 1e-300)) / np.sqrt(
                np.maximum(x, 1e-300)
            ),
            [0.0, 1.0],
            [0.0, 1.0],
            rel_tol=1e-14,
            abs_tol=1e-16,
            max_evals=5_000,
        )


def test_extra_error_included_in_bound():
    res = integrate_adaptive(
        lambda x, y: x * 0 + 1.0,
        [0.0, 1.0],
        [0.0, 1.0],
        rel_tol=1e-3,
        abs_tol=1e-6,
        extra_error=1e-4,
    )
    assert res.error >= 1e-4


def test_geometric_cuts_cover_scales():
    cuts = geometric_cuts(0.5, 1e-4, 1.0)
    arr = np.array(sorted(cuts))
    assert 0.5 in cuts
    assert np.min(np.abs(arr - 0.5)[np.abs(arr - 0.5) > 0]) == pytest.approx(1e-4)


def test_gaussian_tail_mass_matches_quadrature():
    from scipy import integrate as si

    for radius in (1.0, 2.0, 4.0):
        exact, _ = si.quad(
            lambda r: 4 * math.pi * r**2 * math.exp(-(r**2)) / math.pi**1.5,
            radius,
            radius + 30,
        )
        assert gaussian_tail_mass(radius) == pytest.approx(exact, rel=1e-10)


def test_needs_two_cuts():
    with pytest.raises(ValueError):
        integrate_adaptive(lambda x, y: x, [0.0], [0.0, 1.0])
