"""Pointwise polarizations in the complexified tangent space.

Subspaces of C^{2m} are stored by basis columns in the complexified real basis.
Principal angles use the standard Hermitian inner product of that basis.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .calculus import build_frame, moment_differential, moment_map, phi_hessian
from .errors import AmbiguousRank, DimensionMismatch, RankMismatch
from .flow import closed_flow
from .model import LocalModel, ModelPoint, ScalarField, regularity

RANK_RTOL = 1e-10
# singular values in (RANK_RTOL, GRAY_RTOL] make the rank ambiguous
GRAY_RTOL = 1e-7
LAGRANGIAN_TOL = 1e-9


def _rank(s: np.ndarray, scale: float, what: str) -> int:
    if s.size == 0:
        return 0
    scale = max(scale, 1.0)
    low = int(np.sum(s > GRAY_RTOL * scale))
    high = int(np.sum(s > RANK_RTOL * scale))
    if low != high:
        raise AmbiguousRank(f"near-rank-deficient {what}", sorted({low, high}))
    return high


def orth(M: np.ndarray, what: str = "basis") -> np.ndarray:
    """Orthonormal basis of the column span, with loud failure on ambiguous rank."""
    if M.shape[1] == 0:
        return np.zeros((M.shape[0], 0), dtype=complex)
    M = np.asarray(M, dtype=complex)
    norms = np.linalg.norm(M, axis=0)
    M = M[:, norms > 0] / norms[norms > 0]
    if M.shape[1] == 0:
        return np.zeros((M.shape[0], 0), dtype=complex)
    U, s, _ = np.linalg.svd(M, full_matrices=False)
    r = _rank(s, s[0], what)
    return U[:, :r]


def null_space(M: np.ndarray, what: str = "kernel") -> np.ndarray:
    """Orthonormal basis of ker M (columns)."""
    M = np.atleast_2d(np.asarray(M, dtype=complex))
    ncols = M.shape[1]
    if M.shape[0] == 0 or not np.any(M):
        return np.eye(ncols, dtype=complex)
    _, s, Vh = np.linalg.svd(M)
    r = _rank(s, s[0], what)
    return Vh[r:].conj().T


@dataclass(frozen=True, eq=False)
class ComplexSubspace:
    basis: np.ndarray

    def __post_init__(self):
        B = np.asarray(self.basis, dtype=complex)
        if B.ndim != 2:
            raise DimensionMismatch("basis must be a matrix")
        if B.shape[1]:
            s = np.linalg.svd(B / np.linalg.norm(B, axis=0), compute_uv=False)
            if s[-1] <= RANK_RTOL:
                raise RankMismatch("basis columns are not independent")
        object.__setattr__(self, "basis", B)

    @classmethod
    def span(cls, M: np.ndarray, what: str = "span") -> "ComplexSubspace":
        return cls(orth(np.asarray(M, dtype=complex), what))

    @property
    def d(self) -> int:
        return self.basis.shape[1]

    @property
    def ambient(self) -> int:
        return self.basis.shape[0]

    def conj(self) -> "ComplexSubspace":
        return ComplexSubspace(self.basis.conj())

    def intersect(self, other: "ComplexSubspace") -> "ComplexSubspace":
        """Stacked-nullspace intersection: A x = B y."""
        if self.d == 0 or other.d == 0:
            return ComplexSubspace(np.zeros((self.ambient, 0), dtype=complex))
        N = null_space(np.hstack([self.basis, -other.basis]), "intersection")
        return ComplexSubspace.span(self.basis @ N[: self.d], "intersection")

    def contains(self, other: "ComplexSubspace", tol: float = 1e-9) -> bool:
        if other.d == 0:
            return True
        Q = orth(self.basis)
        resid = other.basis - Q @ (Q.conj().T @ other.basis)
        return bool(np.max(np.abs(resid)) <= tol)

    def omega_residual(self, omega: np.ndarray) -> float:
        """max |omega(u, v)| over orthonormal basis pairs (complex-bilinear)."""
        if self.d == 0:
            return 0.0
        Q = orth(self.basis)
        return float(np.max(np.abs(Q.T @ omega @ Q)))


@dataclass(frozen=True)
class PolarizationReport:
    dim: int
    is_lagrangian: bool
    real_rank: int
    lagrangian_residual: float
    is_regular: bool


def report(model: LocalModel, P: ComplexSubspace, omega: np.ndarray, is_regular: bool) -> PolarizationReport:
    resid = P.omega_residual(omega)
    return PolarizationReport(
        dim=P.d,
        is_lagrangian=bool(P.d == model.m_complex and resid <= LAGRANGIAN_TOL),
        real_rank=P.intersect(P.conj()).d,
        lagrangian_residual=resid,
        is_regular=is_regular,
    )


def build_P_J(model: LocalModel, p: ModelPoint | None = None) -> ComplexSubspace:
    """T^{0,1}: span of d/d(conj w_j) and d/d(conj z_l)."""
    cols = np.zeros((model.real_dim, model.m_complex), dtype=complex)
    d = model.torus_dim
    for j in range(d):
        # d/d conj(log w) = (d/dy + i d/dtheta) / 2
        cols[model.y_index(j), j] = 0.5
        cols[model.theta_index(j), j] = 0.5j
    for l in range(model.r_fiber):
        cols[model.x_index(l), d + l] = 0.5
        cols[model.v_index(l), d + l] = 0.5j
    return ComplexSubspace(cols)


def build_D_and_I(
    model: LocalModel, rho: ScalarField, p: ModelPoint
) -> tuple[ComplexSubspace, ComplexSubspace]:
    """D_C = ker d mu (complexified) and I_C = span of the fundamental fields."""
    dmu = moment_differential(model, rho, p)
    D = ComplexSubspace(null_space(dmu, "ker d mu"))
    I = ComplexSubspace.span(model.fundamental_fields(p).T, "orbit directions")
    return D, I


def build_P_mix(
    model: LocalModel, rho: ScalarField, p: ModelPoint
) -> tuple[ComplexSubspace, PolarizationReport]:
    """(P_J cap D_C) + I_C, with the sum checked to be direct at regular points."""
    D, I = build_D_and_I(model, rho, p)
    core = build_P_J(model, p).intersect(D)
    total = np.hstack([core.basis, I.basis])
    P = ComplexSubspace.span(total, "P_mix") if total.shape[1] else core
    reg = regularity(model, p).is_regular
    if reg and P.d != core.d + I.d:
        raise RankMismatch(f"sum of P_J cap D_C (dim {core.d}) and I_C (dim {I.d}) is not direct")
    frame = build_frame(model, rho, p)
    return P, report(model, P, frame.omega, reg)


def build_P_t(
    model: LocalModel, rho: ScalarField, phi: ScalarField, p: ModelPoint, t: float
) -> ComplexSubspace:
    """-i eigenspace of J_t: the common kernel of the flowed holomorphic differentials."""
    state = closed_flow(model, rho, phi, p, t)
    rows = state.jac_unit / np.linalg.norm(state.jac_unit, axis=1, keepdims=True)
    P = ComplexSubspace(null_space(rows, "P_t"))
    if P.d != model.m_complex:
        raise RankMismatch(f"P_t has dimension {P.d}, expected {model.m_complex}")
    return P


def principal_angles(a: ComplexSubspace, b: ComplexSubspace) -> np.ndarray:
    """Principal angles in ascending order, in [0, pi/2]."""
    if a.d != b.d or a.ambient != b.ambient:
        raise DimensionMismatch(f"subspaces of dimension {a.d} and {b.d}")
    if a.d == 0:
        return np.zeros(0)
    return np.sort(sla.subspace_angles(a.basis, b.basis))


# ----------------------------------------------------------------------
# convergence P_t -> P_mix
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class SweepRow:
    t: float
    angle_max: float
    angle_min: float
    normalized_rate: float
    lagrangian_residual: float


@dataclass(frozen=True)
class ConvergenceTable:
    rows: tuple[SweepRow, ...]
    h_scale: float

    @property
    def t(self) -> np.ndarray:
        return np.array([r.t for r in self.rows])

    @property
    def angle_max(self) -> np.ndarray:
        return np.array([r.angle_max for r in self.rows])

    def strictly_decreasing(self) -> bool:
        a = self.angle_max
        return bool(np.all(np.diff(a) < 0))

    def fitted_rate(self) -> tuple[float, float]:
        """(a, b) with cot(angle) = a + b t through the first two grid points.

        This is the scalar form of A_t^{-1} = A_0^{-1} + t H_phi; the bound
        angle <= C / t then holds with C = 1 / b whenever a >= 0.
        """
        if len(self.rows) < 2:
            raise ValueError("need at least two grid points to fit a rate")
        (t0, a0), (t1, a1) = [(r.t, r.angle_max) for r in self.rows[:2]]
        c0, c1 = 1 / np.tan(a0), 1 / np.tan(a1)
        b = (c1 - c0) / (t1 - t0)
        return float(c0 - b * t0), float(b)

    def rate_bound_holds(self) -> bool:
        """angle_max(t) <= C / t for every grid t >= 1, C fitted from the first two points."""
        _, b = self.fitted_rate()
        if b <= 0:
            return False
        C = 1 / b
        return all(r.angle_max <= C / r.t for r in self.rows if r.t >= 1)


def convergence_sweep(
    model: LocalModel, rho: ScalarField, phi: ScalarField, p: ModelPoint, t_grid
) -> ConvergenceTable:
    t_grid = [float(t) for t in t_grid]
    if any(b <= a for a, b in zip(t_grid, t_grid[1:])):
        raise ValueError("t_grid must be strictly increasing")
    P_mix, _ = build_P_mix(model, rho, p)
    frame = build_frame(model, rho, p)
    mu = moment_map(model, rho, p).mu
    h_scale = float(np.linalg.eigvalsh(phi_hessian(phi, mu))[0])
    rows = []
    for t in t_grid:
        P_t = build_P_t(model, rho, phi, p, t)
        ang = principal_angles(P_t, P_mix)
        rows.append(
            SweepRow(
                t=t,
                angle_max=float(ang[-1]),
                angle_min=float(ang[0]),
                normalized_rate=float(ang[-1] * (1 + t * h_scale)),
                lagrangian_residual=P_t.omega_residual(frame.omega),
            )
        )
    return ConvergenceTable(rows=tuple(rows), h_scale=h_scale)
