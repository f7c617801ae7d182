"""Complex structures J_t and metrics g_t induced by the flowed coordinates."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .calculus import build_frame, moment_map, phi_gradient, phi_hessian, poisson_bracket
from .errors import DegenerateFrame, SingularA
from .flow import closed_flow
from .model import LocalModel, ModelPoint, ScalarField, require_invariant, symbol

FRAME_TOL = 1e-12
PD_RTOL = 1e-10


@dataclass(frozen=True, eq=False)
class ComplexStructureAt:
    t: float
    J: np.ndarray
    g: np.ndarray
    block_det: float
    omega: np.ndarray

    @property
    def square_residual(self) -> float:
        """max |J^2 + I|."""
        return float(np.max(np.abs(self.J @ self.J + np.eye(len(self.J)))))

    @property
    def symmetry_residual(self) -> float:
        return float(np.max(np.abs(self.g - self.g.T)))

    @property
    def compatibility_residual(self) -> float:
        """max |omega(J., J.) - omega|, relative to max |omega|."""
        diff = self.J.T @ self.omega @ self.J - self.omega
        return float(np.max(np.abs(diff)) / np.max(np.abs(self.omega)))

    @property
    def metric_eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(0.5 * (self.g + self.g.T))

    @property
    def is_positive(self) -> bool:
        ev = self.metric_eigenvalues
        return bool(ev[0] > PD_RTOL * ev[-1] and ev[-1] > 0)


def block_matrix(
    model: LocalModel, rho: ScalarField, phi: ScalarField, p: ModelPoint, t: float
) -> tuple[np.ndarray, float]:
    """[[I + tHA, tHA], [tHA, I + tHA]] on the torus block and its determinant.

    A = d mu / d w-tilde = jac_y / 2 and H is the Hessian of phi at mu(p),
    both restricted to the C^* factors.
    """
    d = model.torus_dim
    if d == 0:
        return np.zeros((0, 0)), 1.0
    mv = moment_map(model, rho, p)
    A = mv.A
    ev = np.linalg.eigvalsh(0.5 * (A + A.T))
    if ev[0] <= FRAME_TOL * max(1.0, ev[-1]):
        raise SingularA(f"d mu / d y is not positive definite at {p!r}")
    H = phi_hessian(phi, mv.mu)[:d, :d]
    HA = t * H @ A
    I = np.eye(d)
    M = np.block([[I + HA, HA], [HA, I + HA]])
    return M, float(np.linalg.det(M))


def _unit_rows(M: np.ndarray) -> np.ndarray:
    return M / np.linalg.norm(M, axis=1, keepdims=True)


def complex_structure(
    model: LocalModel, rho: ScalarField, phi: ScalarField, p: ModelPoint, t: float
) -> ComplexStructureAt:
    """J_t from declaring w^t, z^t holomorphic: J = S^{-1} diag(i, -i) S."""
    state = closed_flow(model, rho, phi, p, t)
    rows = _unit_rows(state.jac_unit)
    S = np.vstack([rows, rows.conj()])
    if abs(np.linalg.det(S)) < FRAME_TOL:
        raise DegenerateFrame(f"flowed differentials are dependent at {p!r}, t={t}")
    m = model.m_complex
    D = np.diag(np.concatenate([np.full(m, 1j), np.full(m, -1j)]))
    J = np.linalg.solve(S, D @ S)
    if np.max(np.abs(J.imag)) > 1e-8 * max(1.0, np.max(np.abs(J.real))):
        raise DegenerateFrame("J_t is not real")
    J = J.real
    frame = build_frame(model, rho, p)
    g = frame.omega @ J
    _, det = block_matrix(model, rho, phi, p, t)
    return ComplexStructureAt(t=float(t), J=J, g=g, block_det=det, omega=frame.omega)


def check_type_11(
    model: LocalModel, rho: ScalarField, phi: ScalarField, p: ModelPoint, t: float
) -> float:
    """max_{i<j} |{zeta_i^t, zeta_j^t}| with unit-normalized differentials."""
    state = closed_flow(model, rho, phi, p, t)
    rows = _unit_rows(state.jac_unit)
    frame = build_frame(model, rho, p)
    worst = 0.0
    for i in range(model.m_complex):
        for j in range(i + 1, model.m_complex):
            worst = max(worst, abs(poisson_bracket(frame, rows[i], rows[j])))
    return worst


@dataclass(frozen=True)
class ChartTransition:
    """w_index -> coeff * w_index^power on one C^* factor (power = +1 or -1)."""

    index: int = 0
    power: int = -1
    coeff: complex = 1.0

    def __post_init__(self):
        if self.power not in (1, -1):
            raise ValueError("a chart change of C^* is w -> c w^{+-1}")
        if self.coeff == 0:
            raise ValueError("coefficient must be nonzero")

    def __call__(self, w: complex) -> complex:
        return self.coeff * w**self.power


def transformed_chart(
    model: LocalModel,
    rho: ScalarField,
    phi: ScalarField,
    p: ModelPoint,
    transition: ChartTransition,
) -> tuple[ScalarField, ScalarField, ModelPoint]:
    """Potential, Hamiltonian and point expressed in the chart w' = c w^k.

    y' = k y + log|c| and mu' = mu / k, so rho'(y') = rho((y' - log|c|) / k)
    and phi'(mu') = phi(k mu') keep rho and phi o mu unchanged as functions.
    """
    j, k, c = transition.index, transition.power, complex(transition.coeff)
    yj = f"y{j + 1}"

    rho_new = rho.subs({yj: (symbol(yj) - math.log(abs(c))) / k})
    mu_j = f"mu{j + 1}"
    phi_new = phi.subs({mu_j: k * symbol(mu_j)})
    w = p.w.copy()
    w[j] = transition(w[j])
    p_new = model.point(w, p.z)
    rho_new = require_invariant(model, rho_new, [p_new])
    return rho_new, phi_new, p_new


def check_transition_consistency(
    model: LocalModel,
    rho: ScalarField,
    phi: ScalarField,
    p: ModelPoint,
    t: float,
    transition: ChartTransition | None = None,
) -> float:
    """|T(w^t) - (T(w))^t| / max(1, |(T(w))^t|) for the chart change T."""
    if transition is None:
        transition = ChartTransition()
    j = transition.index
    lhs = transition(closed_flow(model, rho, phi, p, t).w_t[j])
    rho2, phi2, p2 = transformed_chart(model, rho, phi, p, transition)
    rhs = closed_flow(model, rho2, phi2, p2, t).w_t[j]
    return float(abs(lhs - rhs) / max(1.0, abs(rhs)))


def geodesic_linearity(
    model: LocalModel, rho: ScalarField, phi: ScalarField, p: ModelPoint, t_grid: Iterable[float]
) -> float:
    """max_t |log|w^t| - y - t grad phi(mu)|_inf over the torus block."""
    d = model.torus_dim
    if d == 0:
        return 0.0
    mv = moment_map(model, rho, p)
    slope = phi_gradient(phi, mv.mu)[:d]
    worst = 0.0
    for t in t_grid:
        y_t = np.log(np.abs(closed_flow(model, rho, phi, p, t).w_t))
        worst = max(worst, float(np.max(np.abs(y_t - p.y - t * slope))))
    return worst
