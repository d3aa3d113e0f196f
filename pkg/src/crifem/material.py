"""Piecewise-constant Lamé coefficients."""

from __future__ import annotations

from dataclasses import dataclass


def lame_from_young_poisson(E: float, nu: float) -> tuple[float, float]:
    """(lambda, mu) from Young's modulus and Poisson ratio."""
    if E <= 0:
        raise ValueError(f"Young's modulus must be positive, got {E}")
    if not 0.0 <= nu < 0.5:
        raise ValueError(f"Poisson ratio must lie in [0, 0.5), got {nu}")
    lam = E * nu / ((1.0 + nu) * (1.0 - 2.0 * nu))
    mu = E / (2.0 * (1.0 + nu))
    return lam, mu


def poisson_from_lame(lam: float, mu: float) -> float:
    return lam / (2.0 * (lam + mu))


def young_from_lame(lam: float, mu: float) -> float:
    return mu * (3.0 * lam + 2.0 * mu) / (lam + mu)


@dataclass(frozen=True)
class LameField:
    mu_minus: float
    mu_plus: float
    lambda_minus: float
    lambda_plus: float
    rho_minus: float = 1.0
    rho_plus: float = 1.0

    def __post_init__(self):
        for name in ("mu_minus", "mu_plus", "lambda_minus", "lambda_plus", "rho_minus", "rho_plus"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")

    @classmethod
    def uniform(cls, mu: float, lam: float) -> "LameField":
        return cls(mu, mu, lam, lam)

    @classmethod
    def from_young_poisson(cls, E_minus, nu_minus, E_plus, nu_plus, rho_minus=1.0, rho_plus=1.0):
        lm, mm = lame_from_young_poisson(E_minus, nu_minus)
        lp, mp = lame_from_young_poisson(E_plus, nu_plus)
        return cls(mm, mp, lm, lp, rho_minus, rho_plus)

    @property
    def poisson(self) -> tuple[float, float]:
        return (poisson_from_lame(self.lambda_minus, self.mu_minus),
                poisson_from_lame(self.lambda_plus, self.mu_plus))

    @property
    def has_jump(self) -> bool:
        return coefficients_at(self, "-") != coefficients_at(self, "+")

    @property
    def mu_max(self) -> float:
        return max(coefficients_at(self, "-")[1], coefficients_at(self, "+")[1])


def coefficients_at(field: LameField, side) -> tuple[float, float, float]:
    """Density-normalised (lambda, mu, rho) on one side.

    ``side`` is '+'/'-' or +1/-1.
    """
    if side in ("-", -1):
        lam, mu, rho = field.lambda_minus, field.mu_minus, field.rho_minus
    elif side in ("+", 1):
        lam, mu, rho = field.lambda_plus, field.mu_plus, field.rho_plus
    else:
        raise ValueError(f"side must be '+' or '-', got {side!r}")
    return lam / rho, mu / rho, rho
