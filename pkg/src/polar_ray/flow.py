"""Imaginary-time Hamiltonian flow e^{-itX_phi} on local models.

Two independent routes are provided:

* :func:`closed_flow` applies the closed exponential formulas for the flowed
  coordinates and differentiates them through mu(p);
* :func:`lie_series` sums the truncated Lie series sum_k t^k/k! (-iX_phi)^k f,
  reading the action of X_phi on a coordinate off the Hamiltonian vector field.

Holomorphic test functions are Laurent monomials c * prod zeta_a^{e_a} in the
coordinates zeta = (w, z).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .calculus import (
    hamiltonian_coefficients,
    hamiltonian_field,
    moment_differential,
    moment_vector,
    phi_gradient,
    phi_hessian,
)
from .errors import DomainEscape
from .model import LocalModel, ModelPoint, ScalarField

DEFAULT_TRUNCATION = 30
CONVERGENCE_RTOL = 1e-13


@dataclass(frozen=True, eq=False)
class FlowState:
    """Flowed coordinates and their differentials at a source point.

    Rows of ``jac_unit`` are d zeta_a^t / scale_a over the real basis, with
    scale_a = w_a^t for torus coordinates and exp(t * rate_a) for fiber
    coordinates; ``log_scale`` holds log(scale_a). Row scaling leaves J_t and
    P_t unchanged, so downstream code works with ``jac_unit`` and never
    overflows at large t.
    """

    t: float
    w_t: np.ndarray
    z_t: np.ndarray
    y_t: np.ndarray
    rates: np.ndarray
    jac_unit: np.ndarray
    log_scale: np.ndarray

    @property
    def coords(self) -> np.ndarray:
        return np.concatenate([self.w_t, self.z_t])

    @property
    def jac(self) -> np.ndarray:
        """d w^t, d z^t over the real basis (m x 2m, complex)."""
        with np.errstate(over="ignore"):
            return np.exp(self.log_scale)[:, None] * self.jac_unit


def exponent_rates(model: LocalModel, rho: ScalarField, phi: ScalarField, p: ModelPoint) -> np.ndarray:
    """Rates r_a with zeta_a^t = zeta_a * exp(t r_a)."""
    grad = phi_gradient(phi, moment_vector(model, rho, p))
    d = model.torus_dim
    return np.concatenate([grad[:d], model.B.T @ grad[d:]])


def closed_flow(
    model: LocalModel, rho: ScalarField, phi: ScalarField, p: ModelPoint, t: float
) -> FlowState:
    if t < 0:
        raise ValueError("flow time must be non-negative")
    mu = moment_vector(model, rho, p)
    grad = phi_gradient(phi, mu)
    hess = phi_hessian(phi, mu)
    dmu = moment_differential(model, rho, p)
    d = model.torus_dim
    B = model.B
    rates = np.concatenate([grad[:d], B.T @ grad[d:]])

    with np.errstate(over="ignore", invalid="ignore"):
        w_t = p.w * np.exp(t * rates[:d])
        z_t = np.where(p.z == 0, 0j, p.z * np.exp(t * rates[d:]))
    y_t = p.y + t * rates[:d]

    # d rate_a = sum_i (W^T H)_{ai} d mu_i
    drates = model.action_weights.T @ hess @ dmu
    jac_unit = np.zeros((model.m_complex, model.real_dim), dtype=complex)
    for j in range(d):
        jac_unit[j, model.y_index(j)] = 1.0
        jac_unit[j, model.theta_index(j)] = 1j
        jac_unit[j] += t * drates[j]
    for l in range(model.r_fiber):
        a = d + l
        jac_unit[a, model.x_index(l)] += 1.0
        jac_unit[a, model.v_index(l)] += 1j
        jac_unit[a] += p.z[l] * t * drates[a]
    log_scale = np.concatenate([y_t + 1j * p.theta, t * rates[d:]]).astype(complex)
    return FlowState(
        t=float(t), w_t=w_t, z_t=z_t, y_t=y_t, rates=rates, jac_unit=jac_unit, log_scale=log_scale
    )


# ----------------------------------------------------------------------
# Lie series
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class Monomial:
    """c * prod_a zeta_a^{e_a} over the coordinates zeta = (w, z)."""

    exponents: tuple[int, ...]
    coeff: complex = 1.0

    @classmethod
    def coordinate(cls, model: LocalModel, name: str) -> "Monomial":
        """'w1', 'z2', ... or '1' for the constant function."""
        exps = [0] * model.m_complex
        if name == "1":
            return cls(tuple(exps))
        kind, idx = name[0], int(name[1:]) - 1
        if kind == "w" and 0 <= idx < model.torus_dim:
            exps[idx] = 1
        elif kind == "z" and 0 <= idx < model.r_fiber:
            exps[model.torus_dim + idx] = 1
        else:
            raise ValueError(f"unknown coordinate {name!r}")
        return cls(tuple(exps))

    def __mul__(self, other: "Monomial") -> "Monomial":
        return Monomial(
            tuple(a + b for a, b in zip(self.exponents, other.exponents)), self.coeff * other.coeff
        )

    def __pow__(self, k: int) -> "Monomial":
        return Monomial(tuple(k * e for e in self.exponents), self.coeff**k)

    def scaled(self, c: complex) -> "Monomial":
        return Monomial(self.exponents, self.coeff * c)

    def __call__(self, coords: Sequence[complex]) -> complex:
        value = complex(self.coeff)
        for zeta, e in zip(coords, self.exponents):
            if e < 0 and zeta == 0:
                raise DomainEscape("Laurent monomial evaluated at a vanishing coordinate")
            if e:
                value *= complex(zeta) ** e
        return value


def _as_monomial(model: LocalModel, f) -> Monomial:
    return f if isinstance(f, Monomial) else Monomial.coordinate(model, f)


def coordinate_eigenvalues(
    model: LocalModel, rho: ScalarField, phi: ScalarField, p: ModelPoint
) -> np.ndarray:
    """lambda_a with (-i X_phi) zeta_a = lambda_a zeta_a.

    Read off the Hamiltonian vector field: (-i X) zeta = -i d zeta(X). At a
    vanishing fiber coordinate the field is zero there and the linear rotation
    rate is taken from the weights instead.
    """
    X = hamiltonian_field(model, rho, phi, p)
    coeffs = hamiltonian_coefficients(model, rho, phi, p)
    d = model.torus_dim
    lam = np.zeros(model.m_complex, dtype=complex)
    for j in range(d):
        # d(w_j)(X) = w_j (X_y + i X_theta)
        lam[j] = -1j * (X[model.y_index(j)] + 1j * X[model.theta_index(j)])
    for l in range(model.r_fiber):
        zl = p.z[l]
        if zl != 0:
            lam[d + l] = -1j * (X[model.x_index(l)] + 1j * X[model.v_index(l)]) / zl
        else:
            lam[d + l] = model.B[:, l] @ coeffs[d:]
    return lam


@dataclass(frozen=True, eq=False)
class SeriesDiagnostics:
    truncation: int
    partial_sums: np.ndarray
    tail_bound: float
    converged: bool


def _series_terms(base: complex, lam: complex, t: float, N: int) -> np.ndarray:
    """t^k/k! (-iX)^k f for k = 0..N when (-iX) f = lam f."""
    terms = np.empty(N + 1, dtype=complex)
    terms[0] = base
    for k in range(1, N + 1):
        terms[k] = terms[k - 1] * (t * lam) / k
    return terms


def _diagnostics(terms: np.ndarray, rate: float, t: float) -> SeriesDiagnostics:
    partial = np.cumsum(terms)
    N = len(terms) - 1
    last = abs(terms[-1])
    with np.errstate(over="ignore"):
        tail = float(last * math.exp(min(abs(t * rate), 700.0)))
    converged = bool(last <= CONVERGENCE_RTOL * abs(partial[-1]) or last == 0.0)
    return SeriesDiagnostics(truncation=N, partial_sums=partial, tail_bound=tail, converged=converged)


def monomial_eigenvalue(lam: np.ndarray, f: Monomial) -> complex:
    # X is a derivation: (-iX)(prod zeta^e) = (sum e_a lam_a) prod zeta^e
    return complex(np.dot(f.exponents, lam))


def lie_series(
    model: LocalModel,
    rho: ScalarField,
    phi: ScalarField,
    p: ModelPoint,
    t: float,
    f="w1",
    N: int = DEFAULT_TRUNCATION,
) -> tuple[complex, SeriesDiagnostics]:
    """Truncated Lie series e^{-itX_phi} f at p, summed to order N."""
    if N < 1:
        raise ValueError("truncation must be at least 1")
    f = _as_monomial(model, f)
    lam = coordinate_eigenvalues(model, rho, phi, p)
    eig = monomial_eigenvalue(lam, f)
    base = f(p.coords) if any(f.exponents) else complex(f.coeff)
    terms = _series_terms(base, eig, t, N)
    diag = _diagnostics(terms, abs(eig), t)
    return complex(diag.partial_sums[-1]), diag


def required_truncation(rate: float, t: float, rtol: float = 1e-16, floor: int = DEFAULT_TRUNCATION) -> int:
    """Smallest N >= floor with (x^N / N!) e^{-x} < rtol, x = |t * rate|."""
    x = abs(t * rate)
    if x == 0:
        return floor
    k = max(floor, math.ceil(x) + 1)
    while k * math.log(x) - math.lgamma(k + 1) - x > math.log(rtol):
        k += 1
    return k


# ----------------------------------------------------------------------
# law checkers
# ----------------------------------------------------------------------


def check_product_law(
    model: LocalModel,
    rho: ScalarField,
    phi: ScalarField,
    p: ModelPoint,
    t: float,
    f="w1",
    g="w1",
    N: int = DEFAULT_TRUNCATION,
    relative: bool = False,
) -> float:
    """|e^{-itX}(fg) - e^{-itX}f * e^{-itX}g| with the fg series built by Leibniz.

    With ``relative`` the residual is divided by 1 + |right-hand side|.
    """
    f = _as_monomial(model, f)
    g = _as_monomial(model, g)
    lam = coordinate_eigenvalues(model, rho, phi, p)
    fv = f(p.coords) if any(f.exponents) else complex(f.coeff)
    gv = g(p.coords) if any(g.exponents) else complex(g.coeff)
    lf, lg = monomial_eigenvalue(lam, f), monomial_eigenvalue(lam, g)
    # Leibniz: t^v/v! (-iX)^v (fg) = sum_a [t^a/a! (-iX)^a f] [t^(v-a)/(v-a)! (-iX)^(v-a) g],
    # summed as a Cauchy product of the scaled term sequences to avoid overflow
    tf = _series_terms(fv, lf, t, N)
    tg = _series_terms(gv, lg, t, N)
    total = np.cumsum(np.convolve(tf, tg)[: N + 1])[-1]
    sf, _ = lie_series(model, rho, phi, p, t, f, N)
    sg, _ = lie_series(model, rho, phi, p, t, g, N)
    resid = abs(total - sf * sg)
    return float(resid / (1 + abs(sf * sg)) if relative else resid)


def check_commuting_formula(
    model: LocalModel,
    rho: ScalarField,
    phi: ScalarField,
    p: ModelPoint,
    t: float,
    f: Monomial,
    N: int = DEFAULT_TRUNCATION,
    relative: bool = False,
) -> float:
    """|e^{-itX}(f o zeta) - f(e^{-itX} zeta)| for a Laurent monomial f."""
    f = _as_monomial(model, f)
    lhs, _ = lie_series(model, rho, phi, p, t, f, N)
    state = closed_flow(model, rho, phi, p, t)
    rhs = f(state.coords)
    resid = abs(lhs - rhs)
    return float(resid / (1 + abs(rhs)) if relative else resid)


def check_composition_law(
    model: LocalModel,
    rho: ScalarField,
    phi: ScalarField,
    p: ModelPoint,
    t: float,
    N: int = DEFAULT_TRUNCATION,
    relative: bool = False,
) -> float:
    """Sequential flow of X_1 after X_2 against the joint flow of X_1 + X_2.

    X_1 is the first summand (d phi/d mu_1) xi_1^# and X_2 the rest. With a
    single generator X_2 = 0 and the residual is 0 by convention.
    """
    if model.n_torus < 2:
        return 0.0
    coeffs = hamiltonian_coefficients(model, rho, phi, p)
    W = model.action_weights
    lam1 = coeffs[0] * W[0]
    lam2 = coeffs[1:] @ W[1:]
    coords = p.coords
    worst = 0.0
    for a in range(model.m_complex):
        inner = np.sum(_series_terms(coords[a], lam2[a], t, N))
        # X_1 annihilates mu, so the inner series is an eigenfunction of X_1 with the same eigenvalue
        sequential = np.sum(_series_terms(inner, lam1[a], t, N))
        joint = np.sum(_series_terms(coords[a], lam1[a] + lam2[a], t, N))
        resid = abs(sequential - joint)
        if relative:
            resid /= 1 + abs(joint)
        worst = max(worst, float(resid))
    return worst
