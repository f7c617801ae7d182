"""Local models T_C^{n-k} x C^r, their torus actions, points and scalar fields.

Real tangent vectors are expressed in the fixed basis

    (y_1..y_{n-k}, theta_1..theta_{n-k}, Re z_1, Im z_1, ..., Re z_r, Im z_r)

where w_j = exp(y_j + i theta_j). Every matrix in the package uses this order.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Iterable, Mapping, Sequence

import numpy as np
import sympy as sp
from sympy.parsing.sympy_parser import parse_expr, standard_transformations

from .errors import DimensionMismatch, NonInvariantPotential, ParseError

RANK_TOL = 1e-10

_IDENT = re.compile(r"[A-Za-z_][A-Za-z_0-9]*")
_VARIABLE = re.compile(r"^(y|z|zb|mu)([1-9])$")
_ALLOWED_CHARS = re.compile(r"^[A-Za-z0-9_.+\-*/^()\s]*$")
_FUNCTIONS = {"exp": sp.exp, "log": sp.log}
_NODE_TYPES = (sp.Symbol, sp.Number, sp.Add, sp.Mul, sp.Pow, sp.exp, sp.log)


@lru_cache(maxsize=None)
def symbol(name: str) -> sp.Symbol:
    if not _VARIABLE.match(name):
        raise ParseError(f"invalid variable name {name!r}")
    return sp.Symbol(name)


# ----------------------------------------------------------------------
# scalar fields
# ----------------------------------------------------------------------


def _check_nodes(expr: sp.Expr, text: str) -> None:
    for node in sp.preorder_traversal(expr):
        if not isinstance(node, _NODE_TYPES):
            raise ParseError(f"unsupported node {type(node).__name__} in {text!r}")
        if isinstance(node, sp.Number) and not node.is_real:
            raise ParseError(f"non-real constant in {text!r}")


def parse_expression(text: str) -> sp.Expr:
    """Parse the scenario expression grammar into a sympy expression.

    Identifiers are y1..y9, z1..z9, zb1..zb9 (conjugates), mu1..mu9 and the
    functions exp, log; operators are + - * / ^.
    """
    if not isinstance(text, str) or not text.strip():
        raise ParseError("empty expression")
    if not _ALLOWED_CHARS.match(text):
        raise ParseError(f"illegal character in expression {text!r}")
    local: dict[str, object] = {}
    for ident in _IDENT.findall(text):
        if ident in _FUNCTIONS:
            local[ident] = _FUNCTIONS[ident]
        elif _VARIABLE.match(ident):
            local[ident] = symbol(ident)
        else:
            raise ParseError(f"unknown identifier {ident!r} in {text!r}")
    global_dict = {"Integer": sp.Integer, "Float": sp.Float, "Rational": sp.Rational}
    try:
        expr = parse_expr(
            text.replace("^", "**"),
            local_dict=local,
            global_dict=global_dict,
            transformations=standard_transformations,
            evaluate=True,
        )
    except (SyntaxError, TypeError, ValueError, sp.SympifyError) as exc:
        raise ParseError(f"cannot parse {text!r}: {exc}") from exc
    expr = sp.sympify(expr)
    _check_nodes(expr, text)
    return expr


def format_expression(expr: sp.Expr) -> str:
    return sp.sstr(expr, order="lex").replace("**", "^")


@lru_cache(maxsize=4096)
def _compile(expr: sp.Expr):
    names = sorted(str(s) for s in expr.free_symbols)
    fn = sp.lambdify([sp.Symbol(s) for s in names], expr, modules="numpy")
    return names, fn


@dataclass(frozen=True)
class ScalarField:
    """An expression tree in invariant variables.

    ``invariant`` is set only by :func:`require_invariant`; the moment map
    refuses potentials that were never validated.
    """

    expr: sp.Expr
    invariant: bool = False

    @classmethod
    def parse(cls, text: str) -> "ScalarField":
        return cls(parse_expression(text))

    @property
    def text(self) -> str:
        return format_expression(self.expr)

    @property
    def variables(self) -> frozenset[str]:
        return frozenset(str(s) for s in self.expr.free_symbols)

    def mark_invariant(self) -> "ScalarField":
        return replace(self, invariant=True)

    def subs(self, mapping: Mapping[str, sp.Expr]) -> "ScalarField":
        expr = self.expr.subs({symbol(k): v for k, v in mapping.items()}, simultaneous=True)
        return ScalarField(sp.sympify(expr))

    def __call__(self, env: Mapping[str, complex]) -> complex:
        names, fn = _compile(self.expr)
        try:
            args = [env[name] for name in names]
        except KeyError as exc:
            raise DimensionMismatch(f"no value for variable {exc.args[0]!r}") from None
        with np.errstate(all="ignore"):
            return complex(fn(*args))

    def real(self, env: Mapping[str, complex]) -> float:
        return self(env).real

    def __str__(self) -> str:
        return self.text


# ----------------------------------------------------------------------
# local models and points
# ----------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ModelPoint:
    """A point (w, z) of T_C^{n-k} x C^r; every w_j must be nonzero."""

    w: np.ndarray
    z: np.ndarray

    def __post_init__(self):
        w = np.atleast_1d(np.asarray(self.w, dtype=complex)).copy()
        z = np.atleast_1d(np.asarray(self.z, dtype=complex)).copy()
        if w.ndim != 1 or z.ndim != 1:
            raise DimensionMismatch("point coordinates must be vectors")
        if np.any(np.abs(w) == 0) or not np.all(np.isfinite(w)) or not np.all(np.isfinite(z)):
            raise DimensionMismatch("torus coordinates must be finite and nonzero")
        w.setflags(write=False)
        z.setflags(write=False)
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "z", z)

    @property
    def y(self) -> np.ndarray:
        return np.log(np.abs(self.w))

    @property
    def theta(self) -> np.ndarray:
        return np.angle(self.w)

    @property
    def fiber_angles(self) -> np.ndarray:
        """arg z_l, NaN where z_l = 0."""
        out = np.angle(self.z)
        out[self.z == 0] = np.nan
        return out

    @property
    def coords(self) -> np.ndarray:
        return np.concatenate([self.w, self.z])

    def env(self) -> dict[str, complex]:
        """Values of the invariant variables y_j, z_l, zb_l at this point."""
        env: dict[str, complex] = {}
        for j, yj in enumerate(self.y, start=1):
            env[f"y{j}"] = complex(yj)
        for l, zl in enumerate(self.z, start=1):
            env[f"z{l}"] = complex(zl)
            env[f"zb{l}"] = complex(np.conj(zl))
        return env

    def to_real(self) -> np.ndarray:
        parts = [self.y, self.theta]
        fib = np.empty(2 * len(self.z))
        fib[0::2] = self.z.real
        fib[1::2] = self.z.imag
        return np.concatenate(parts + [fib])

    def __repr__(self) -> str:
        return f"ModelPoint(w={self.w.tolist()}, z={self.z.tolist()})"


@dataclass(frozen=True)
class LocalModel:
    n_torus: int
    k_stab: int
    r_fiber: int
    m_complex: int
    weights: tuple[tuple[int, ...], ...] = field(default=())

    def __post_init__(self):
        n, k, r, m = self.n_torus, self.k_stab, self.r_fiber, self.m_complex
        if n < 1 or not 0 <= k <= n or r < 0:
            raise DimensionMismatch(f"invalid dimensions n={n}, k={k}, r={r}")
        if m != n - k + r:
            raise DimensionMismatch(f"m={m} but n - k + r = {n - k + r}")
        if len(self.weights) != k or any(len(row) != r for row in self.weights):
            raise DimensionMismatch(f"weight matrix must have shape {k} x {r}")
        if k >= 1 and np.linalg.matrix_rank(self.B) < k:
            raise DimensionMismatch("weight matrix must have full row rank (effective action)")

    @property
    def B(self) -> np.ndarray:
        return np.array(self.weights, dtype=float).reshape(self.k_stab, self.r_fiber)

    @property
    def torus_dim(self) -> int:
        """n - k, the number of C^* factors."""
        return self.n_torus - self.k_stab

    @property
    def real_dim(self) -> int:
        return 2 * self.m_complex

    def y_index(self, j: int) -> int:
        return j

    def theta_index(self, j: int) -> int:
        return self.torus_dim + j

    def x_index(self, l: int) -> int:
        return 2 * self.torus_dim + 2 * l

    def v_index(self, l: int) -> int:
        return 2 * self.torus_dim + 2 * l + 1

    @property
    def rho_variables(self) -> frozenset[str]:
        names = {f"y{j}" for j in range(1, self.torus_dim + 1)}
        names |= {f"z{l}" for l in range(1, self.r_fiber + 1)}
        names |= {f"zb{l}" for l in range(1, self.r_fiber + 1)}
        return frozenset(names)

    @property
    def phi_variables(self) -> frozenset[str]:
        return frozenset(f"mu{j}" for j in range(1, self.n_torus + 1))

    @property
    def action_weights(self) -> np.ndarray:
        """n x m matrix: xi_j^# acts on coordinate a by multiplication with i * W[j, a]."""
        W = np.zeros((self.n_torus, self.m_complex))
        W[: self.torus_dim, : self.torus_dim] = np.eye(self.torus_dim)
        W[self.torus_dim :, self.torus_dim :] = self.B
        return W

    def point(self, w: Sequence[complex] = (), z: Sequence[complex] = ()) -> ModelPoint:
        p = ModelPoint(np.asarray(w, dtype=complex), np.asarray(z, dtype=complex))
        if len(p.w) != self.torus_dim or len(p.z) != self.r_fiber:
            raise DimensionMismatch(
                f"point needs {self.torus_dim} torus and {self.r_fiber} fiber coordinates"
            )
        return p

    def point_from_coords(self, coords: Sequence[complex]) -> ModelPoint:
        coords = np.asarray(coords, dtype=complex)
        if coords.shape != (self.m_complex,):
            raise DimensionMismatch(f"expected {self.m_complex} complex coordinates")
        return self.point(coords[: self.torus_dim], coords[self.torus_dim :])

    def point_from_real(self, x: np.ndarray) -> ModelPoint:
        x = np.asarray(x, dtype=float)
        d = self.torus_dim
        w = np.exp(x[:d] + 1j * x[d : 2 * d])
        z = x[2 * d :: 2] + 1j * x[2 * d + 1 :: 2]
        return self.point(w, z)

    def act(self, s: np.ndarray, p: ModelPoint) -> ModelPoint:
        """Torus element exp(i s) acting on p."""
        s = np.asarray(s, dtype=float)
        phases = self.action_weights.T @ s
        return self.point_from_coords(p.coords * np.exp(1j * phases))

    def fundamental_fields(self, p: ModelPoint) -> np.ndarray:
        """n x 2m real matrix whose rows are xi_j^# at p."""
        X = np.zeros((self.n_torus, self.real_dim))
        d = self.torus_dim
        for j in range(d):
            X[j, self.theta_index(j)] = 1.0
        B = self.B
        for g in range(self.k_stab):
            for l, zl in enumerate(p.z):
                # rotation field b * d/dvartheta = b * (-Im z d/dRe z + Re z d/dIm z)
                X[d + g, self.x_index(l)] = -B[g, l] * zl.imag
                X[d + g, self.v_index(l)] = B[g, l] * zl.real
        return X

    def to_dict(self) -> dict:
        return {
            "n": self.n_torus,
            "k": self.k_stab,
            "r": self.r_fiber,
            "B": [list(row) for row in self.weights],
        }


def build_model(n: int, k: int, r: int, B=None, m: int | None = None) -> LocalModel:
    """Validated local model with m = n - k + r."""
    if B is None:
        B = []
    arr = np.asarray(B, dtype=float)
    if k == 0:
        if arr.size != 0:
            raise DimensionMismatch("weight matrix must be empty when k = 0")
        weights: tuple[tuple[int, ...], ...] = ()
    else:
        if arr.ndim != 2 or arr.shape != (k, r):
            raise DimensionMismatch(f"weight matrix has shape {arr.shape}, expected {(k, r)}")
        if not np.all(arr == np.round(arr)):
            raise DimensionMismatch("weights must be integers")
        weights = tuple(tuple(int(v) for v in row) for row in arr)
    if m is None:
        m = n - k + r
    return LocalModel(n, k, r, m, weights)


# ----------------------------------------------------------------------
# invariance and regularity
# ----------------------------------------------------------------------


def validate_invariance(
    model: LocalModel,
    rho: ScalarField,
    samples: Iterable[ModelPoint],
    group_samples: int = 16,
    tol: float = 1e-10,
    seed: int = 0,
) -> bool:
    """True iff rho(g.p) = rho(p) within tol for sampled torus elements g."""
    if group_samples < 4:
        raise ValueError("group_samples must be at least 4")
    extra = rho.variables - model.rho_variables
    if extra:
        return False
    rng = np.random.default_rng(seed)
    angles = rng.uniform(0.0, 2 * np.pi, size=(group_samples, model.n_torus))
    for p in samples:
        base = rho(p.env())
        if not np.isfinite(base) or abs(base.imag) > tol * max(1.0, abs(base)):
            return False
        for s in angles:
            if abs(rho(model.act(s, p).env()) - base) > tol:
                return False
    return True


def require_invariant(
    model: LocalModel,
    rho: ScalarField,
    samples: Iterable[ModelPoint],
    group_samples: int = 16,
    tol: float = 1e-10,
    seed: int = 0,
) -> ScalarField:
    """Return rho flagged as invariant, or raise NonInvariantPotential."""
    if not validate_invariance(model, rho, list(samples), group_samples, tol, seed):
        raise NonInvariantPotential(f"potential {rho.text!r} is not torus invariant")
    return rho.mark_invariant()


@dataclass(frozen=True)
class RegularityReport:
    point: ModelPoint
    stab_dim: int
    is_regular: bool


def numerical_rank(M: np.ndarray, tol: float = RANK_TOL) -> int:
    if M.size == 0:
        return 0
    s = np.linalg.svd(M, compute_uv=False)
    return int(np.sum(s > tol * max(1.0, s[0])))


def regularity(model: LocalModel, p: ModelPoint) -> RegularityReport:
    rank = numerical_rank(model.fundamental_fields(p))
    stab = model.n_torus - rank
    return RegularityReport(point=p, stab_dim=stab, is_regular=stab == 0)
