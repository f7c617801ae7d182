"""Symbolic derivatives, finite-difference oracle, symplectic frame and moment map.

Sign conventions: iota_{X_f} omega = -df and {f, g} = omega(X_f, X_g).
With omega(u, v) = u^T Omega v this gives X_f = Omega^{-1} grad f and
{f, g} = -grad f^T Omega^{-1} grad g.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Mapping

import numpy as np
import sympy as sp

from .errors import DegeneratePotential, NonInvariantPotential, UnknownVariable
from .model import _VARIABLE, LocalModel, ModelPoint, ScalarField, symbol

DEGENERACY_TOL = 1e-12
FD_STEP = 1e-4
FD_STEP_2 = 1e-3


# ----------------------------------------------------------------------
# differentiation
# ----------------------------------------------------------------------


@lru_cache(maxsize=8192)
def _diff(expr: sp.Expr, var: str) -> sp.Expr:
    return sp.diff(expr, symbol(var))


def differentiate(field: ScalarField, var: str, order: int = 1) -> ScalarField:
    """Exact derivative of ``field`` with respect to ``var``.

    z and zb are independent Wirtinger variables, so ``differentiate(f, "z1")``
    is d/dz_1 with conj(z_1) held fixed.
    """
    if not isinstance(var, str) or not _VARIABLE.match(var):
        raise UnknownVariable(f"unknown variable {var!r}")
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    expr = field.expr
    for _ in range(order):
        expr = _diff(expr, var)
    return ScalarField(expr)


def _env_of(p) -> dict[str, complex]:
    if isinstance(p, ModelPoint):
        return p.env()
    return {k: complex(v) for k, v in dict(p).items()}


def _central(field: ScalarField, env: dict, var: str, h: float) -> complex:
    up, dn = dict(env), dict(env)
    up[var] = env[var] + h
    dn[var] = env[var] - h
    return (field(up) - field(dn)) / (2 * h)


def _mixed(field: ScalarField, env: dict, a: str, b: str, h: float) -> complex:
    if a == b:
        up, dn = dict(env), dict(env)
        up[a] = env[a] + h
        dn[a] = env[a] - h
        return (field(up) - 2 * field(env) + field(dn)) / h**2
    total = 0j
    for sa, sb, sign in ((1, 1, 1), (1, -1, -1), (-1, 1, -1), (-1, -1, 1)):
        e = dict(env)
        e[a] = env[a] + sa * h
        e[b] = env[b] + sb * h
        total += sign * field(e)
    return total / (4 * h * h)


def fd_oracle(
    field: ScalarField,
    p: ModelPoint | Mapping[str, complex],
    var: str,
    h: float | None = None,
    var2: str | None = None,
) -> complex:
    """Central difference with one Richardson step. Test-side oracle only.

    With ``var2`` the mixed second derivative d^2/(d var d var2) is returned.
    """
    env = _env_of(p)
    for name in (var, var2):
        if name is not None and name not in env:
            env[name] = 0j
    if var2 is None:
        h = FD_STEP if h is None else h
        if h <= 0:
            raise ValueError("h must be positive")
        d1 = _central(field, env, var, h)
        d2 = _central(field, env, var, h / 2)
    else:
        h = FD_STEP_2 if h is None else h
        if h <= 0:
            raise ValueError("h must be positive")
        d1 = _mixed(field, env, var, var2, h)
        d2 = _mixed(field, env, var, var2, h / 2)
    return (4 * d2 - d1) / 3


def real_gradient(model: LocalModel, field: ScalarField, p: ModelPoint) -> np.ndarray:
    """Differential of a function of (y, z, zb) as a complex row over the real basis."""
    env = p.env()
    out = np.zeros(model.real_dim, dtype=complex)
    for j in range(model.torus_dim):
        out[model.y_index(j)] = differentiate(field, f"y{j + 1}")(env)
    for l in range(model.r_fiber):
        dz = differentiate(field, f"z{l + 1}")(env)
        dzb = differentiate(field, f"zb{l + 1}")(env)
        out[model.x_index(l)] = dz + dzb
        out[model.v_index(l)] = 1j * (dz - dzb)
    return out


# ----------------------------------------------------------------------
# moment map
# ----------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class MomentValue:
    mu: np.ndarray
    jac_y: np.ndarray

    @property
    def A(self) -> np.ndarray:
        """d mu / d w-tilde on the torus block, equal to jac_y / 2."""
        return 0.5 * self.jac_y


def moment_fields(model: LocalModel, rho: ScalarField) -> list[ScalarField]:
    """Symbolic moment map components; the real part is the moment value.

    Torus components are d rho / d s_j with s_j = 2 y_j. Fiber components are
    sum_l b_{gl} z_l d rho / d z_l, which reduces to sum_l b_{gl} t_l d rho / d t_l
    for potentials depending on |z_l|^2.
    """
    if not rho.invariant:
        raise NonInvariantPotential("potential has not been validated as torus invariant")
    return _moment_fields(model, rho.expr)


@lru_cache(maxsize=256)
def _moment_fields(model: LocalModel, expr: sp.Expr) -> list[ScalarField]:
    fields = []
    for j in range(model.torus_dim):
        fields.append(ScalarField(sp.Rational(1, 2) * _diff(expr, f"y{j + 1}")))
    B = model.B
    for g in range(model.k_stab):
        total = sp.Integer(0)
        for l in range(model.r_fiber):
            if B[g, l]:
                total += int(B[g, l]) * symbol(f"z{l + 1}") * _diff(expr, f"z{l + 1}")
        fields.append(ScalarField(sp.sympify(total)))
    return fields


def moment_vector(model: LocalModel, rho: ScalarField, p: ModelPoint) -> np.ndarray:
    env = p.env()
    return np.array([f(env).real for f in moment_fields(model, rho)])


def moment_differential(model: LocalModel, rho: ScalarField, p: ModelPoint) -> np.ndarray:
    """n x 2m real matrix of d mu_j over the real basis."""
    rows = [real_gradient(model, f, p).real for f in moment_fields(model, rho)]
    return np.array(rows).reshape(model.n_torus, model.real_dim)


def moment_map(model: LocalModel, rho: ScalarField, p: ModelPoint) -> MomentValue:
    dmu = moment_differential(model, rho, p)
    d = model.torus_dim
    jac_y = dmu[:d, :d].copy()
    return MomentValue(mu=moment_vector(model, rho, p), jac_y=jac_y)


# ----------------------------------------------------------------------
# symplectic frame
# ----------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SymplecticFrame:
    point: ModelPoint
    omega: np.ndarray
    omega_inv: np.ndarray
    h_rho: np.ndarray
    h_log: np.ndarray  # Hessian in (log w, z) coordinates

    def pair(self, u: np.ndarray, v: np.ndarray) -> complex:
        """omega(u, v), extended complex-bilinearly."""
        return u @ self.omega @ v


def holomorphic_differentials(model: LocalModel) -> np.ndarray:
    """m x 2m complex rows d(log w_j) and d z_l over the real basis."""
    E = np.zeros((model.m_complex, model.real_dim), dtype=complex)
    d = model.torus_dim
    for j in range(d):
        E[j, model.y_index(j)] = 1.0
        E[j, model.theta_index(j)] = 1j
    for l in range(model.r_fiber):
        E[d + l, model.x_index(l)] = 1.0
        E[d + l, model.v_index(l)] = 1j
    return E


def _log_hessian(model: LocalModel, rho: ScalarField, p: ModelPoint) -> np.ndarray:
    """d^2 rho / d zeta_a d conj(zeta_b) with zeta = (log w, z)."""
    env = p.env()
    d = model.torus_dim
    hol = [(f"y{j + 1}", 0.5) for j in range(d)] + [
        (f"z{l + 1}", 1.0) for l in range(model.r_fiber)
    ]
    anti = [(f"y{j + 1}", 0.5) for j in range(d)] + [
        (f"zb{l + 1}", 1.0) for l in range(model.r_fiber)
    ]
    H = np.zeros((model.m_complex, model.m_complex), dtype=complex)
    for a, (va, ca) in enumerate(hol):
        first = differentiate(rho, va)
        for b, (vb, cb) in enumerate(anti):
            H[a, b] = ca * cb * differentiate(first, vb)(env)
    return H


def omega_matrix(model: LocalModel, h_log: np.ndarray) -> np.ndarray:
    """Real 2m x 2m matrix of omega = i sum h_ab dzeta_a ^ dzeta_b-bar."""
    E = holomorphic_differentials(model)
    Om = 1j * (E.T @ h_log @ E.conj() - E.conj().T @ h_log.T @ E)
    return Om.real


def build_frame(model: LocalModel, rho: ScalarField, p: ModelPoint) -> SymplecticFrame:
    h_log = _log_hessian(model, rho, p)
    scale = np.ones(model.m_complex, dtype=complex)
    scale[: model.torus_dim] = p.w
    # d/dw = (1/w) d/d(log w)
    h_rho = h_log / np.outer(scale, scale.conj())
    h_rho = 0.5 * (h_rho + h_rho.conj().T)
    eig = np.linalg.eigvalsh(h_rho)
    if eig[0] <= DEGENERACY_TOL:
        raise DegeneratePotential(
            f"complex Hessian of rho not positive definite at {p!r} (min eigenvalue {eig[0]:.3e})"
        )
    omega = omega_matrix(model, h_log)
    return SymplecticFrame(
        point=p,
        omega=omega,
        omega_inv=np.linalg.inv(omega),
        h_rho=h_rho,
        h_log=h_log,
    )


# ----------------------------------------------------------------------
# Hamiltonian fields and brackets
# ----------------------------------------------------------------------


def _mu_env(mu: np.ndarray) -> dict[str, complex]:
    return {f"mu{j + 1}": complex(v) for j, v in enumerate(mu)}


def phi_gradient(phi: ScalarField, mu: np.ndarray) -> np.ndarray:
    env = _mu_env(mu)
    return np.array([differentiate(phi, f"mu{j + 1}")(env).real for j in range(len(mu))])


def phi_hessian(phi: ScalarField, mu: np.ndarray) -> np.ndarray:
    env = _mu_env(mu)
    n = len(mu)
    H = np.empty((n, n))
    for i in range(n):
        di = differentiate(phi, f"mu{i + 1}")
        for j in range(n):
            H[i, j] = differentiate(di, f"mu{j + 1}")(env).real
    return 0.5 * (H + H.T)


def hamiltonian_coefficients(
    model: LocalModel, rho: ScalarField, phi: ScalarField, p: ModelPoint
) -> np.ndarray:
    """(d phi / d mu_j)(mu(p)), the coefficients of X_phi in the xi_j^# basis."""
    return phi_gradient(phi, moment_vector(model, rho, p))


def hamiltonian_field(
    model: LocalModel, rho: ScalarField, phi: ScalarField, p: ModelPoint
) -> np.ndarray:
    """X_phi = sum_j (d phi / d mu_j) xi_j^# as a real 2m vector."""
    return hamiltonian_coefficients(model, rho, phi, p) @ model.fundamental_fields(p)


def poisson_bracket(frame: SymplecticFrame, f_grad: np.ndarray, g_grad: np.ndarray):
    """{f, g} = omega(X_f, X_g) from the differentials of f and g.

    Complex differentials are accepted; the bracket is extended bilinearly.
    """
    value = -(np.asarray(f_grad) @ frame.omega_inv @ np.asarray(g_grad))
    if np.iscomplexobj(value):
        return complex(value)
    return float(value)


# ----------------------------------------------------------------------
# identity checks
# ----------------------------------------------------------------------


def fd_real_jacobian(model: LocalModel, fn, p: ModelPoint, h: float = FD_STEP) -> np.ndarray:
    """Richardson central differences of a vector function over the real basis."""
    x0 = p.to_real()

    def central(step):
        cols = []
        for i in range(len(x0)):
            e = np.zeros_like(x0)
            e[i] = step
            up = np.asarray(fn(model.point_from_real(x0 + e)))
            dn = np.asarray(fn(model.point_from_real(x0 - e)))
            cols.append((up - dn) / (2 * step))
        return np.array(cols).T

    return (4 * central(h / 2) - central(h)) / 3


def check_moment_identity(model: LocalModel, rho: ScalarField, p: ModelPoint) -> float:
    """max |d mu_j - omega(-, xi_j^#)| with d mu taken by finite differences."""
    frame = build_frame(model, rho, p)
    fd = fd_real_jacobian(model, lambda q: moment_vector(model, rho, q), p)
    fd = fd.reshape(model.n_torus, model.real_dim)
    contraction = (frame.omega @ model.fundamental_fields(p).T).T
    return float(np.max(np.abs(fd - contraction), initial=0.0))


@dataclass(frozen=True)
class DerivativeCheck:
    name: str
    symbolic: complex
    oracle: complex

    @property
    def rel_error(self) -> float:
        return abs(self.symbolic - self.oracle) / max(1.0, abs(self.oracle))


def derivative_audit(
    model: LocalModel, rho: ScalarField, phi: ScalarField | None, p: ModelPoint
) -> list[DerivativeCheck]:
    """Compare every symbolic derivative the package takes against fd_oracle."""
    env = p.env()
    checks = []
    names = sorted(model.rho_variables)
    for a in names:
        checks.append(DerivativeCheck(f"rho_{a}", differentiate(rho, a)(env), fd_oracle(rho, env, a)))
        first = differentiate(rho, a)
        for b in names:
            checks.append(
                DerivativeCheck(
                    f"rho_{a}{b}", differentiate(first, b)(env), fd_oracle(rho, env, a, var2=b)
                )
            )
    for idx, F in enumerate(_moment_fields(model, rho.expr)):
        for a in names:
            checks.append(
                DerivativeCheck(f"mu{idx + 1}_{a}", differentiate(F, a)(env), fd_oracle(F, env, a))
            )
    if phi is not None:
        mu_env = _mu_env(moment_vector(model, rho.mark_invariant(), p))
        mnames = sorted(model.phi_variables)
        for a in mnames:
            checks.append(
                DerivativeCheck(f"phi_{a}", differentiate(phi, a)(mu_env), fd_oracle(phi, mu_env, a))
            )
            first = differentiate(phi, a)
            for b in mnames:
                checks.append(
                    DerivativeCheck(
                        f"phi_{a}{b}",
                        differentiate(first, b)(mu_env),
                        fd_oracle(phi, mu_env, a, var2=b),
                    )
                )
    return checks
