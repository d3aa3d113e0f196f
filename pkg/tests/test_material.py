import pytest
from hypothesis import given, strategies as st

from crifem.material import (LameField, coefficients_at, lame_from_young_poisson, poisson_from_lame,
                             young_from_lame)


def test_zero_poisson():
    lam, mu = lame_from_young_poisson(1.0, 0.0)
    assert (lam, mu) == (0.0, 0.5)


def test_compressible_example_ratio():
    lam, mu = lame_from_young_poisson(1.41667, 0.41667)
    assert lam == pytest.approx(2.5, rel=1e-3)
    assert mu == pytest.approx(0.5, rel=1e-4)
    assert lam / mu == pytest.approx(5.0, rel=1e-3)


@pytest.mark.parametrize("lam, mu, nu", [(2.5, 0.5, 5 / 12), (2500, 0.5, 0.49990), (2, 1, 1 / 3), (36, 30, 0.2727)])
def test_poisson_values(lam, mu, nu):
    assert poisson_from_lame(lam, mu) == pytest.approx(nu, abs=1e-4)


@pytest.mark.parametrize("E, nu", [(1.0, 0.5), (1.0, 0.7), (0.0, 0.3), (1.0, -0.1)])
def test_invalid_young_poisson(E, nu):
    with pytest.raises(ValueError):
        lame_from_young_poisson(E, nu)


@given(st.floats(0.1, 100), st.floats(0.0, 0.49))
def test_round_trip(E, nu):
    lam, mu = lame_from_young_poisson(E, nu)
    assert poisson_from_lame(lam, mu) == pytest.approx(nu, abs=1e-12)
    assert young_from_lame(lam, mu) == pytest.approx(E, rel=1e-12)


@pytest.mark.parametrize("field", [
    LameField(0.5, 5, 2.5, 25), LameField(5, 0.5, 25, 2.5), LameField(1, 30, 2, 36),
    LameField(0.5, 5, 2500, 25000)])
def test_benchmark_sets_valid(field):
    assert all(0 < nu < 0.5 for nu in field.poisson)


def test_coefficients_at_sides():
    f = LameField(0.5, 5, 2.5, 25)
    assert coefficients_at(f, "+") == (25, 5, 1)
    assert coefficients_at(f, +1) == coefficients_at(f, "+")
    assert coefficients_at(f, "-") == (2.5, 0.5, 1)
    u = LameField.uniform(1.0, 2.0)
    assert coefficients_at(u, "+") == coefficients_at(u, "-")


def test_density_normalisation():
    f = LameField(1.0, 1.0, 1.0, 1.0, rho_minus=2.0)
    lam, mu, rho = coefficients_at(f, "-")
    assert (lam, mu, rho) == (0.5, 0.5, 2.0)


@pytest.mark.parametrize("kw", [dict(mu_minus=0), dict(lambda_plus=-1), dict(rho_plus=0)])
def test_field_validation(kw):
    base = dict(mu_minus=1, mu_plus=1, lambda_minus=1, lambda_plus=1)
    base.update(kw)
    with pytest.raises(ValueError):
        LameField(**base)


def test_from_young_poisson_matches():
    f = LameField.from_young_poisson(1.0, 0.25, 2.0, 0.3)
    assert f.poisson == pytest.approx((0.25, 0.3))
