"""Scenario runner: executes the full check battery and writes reports."""

from __future__ import annotations

import csv
import datetime as _dt
import json
import platform
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any

import numpy as np
import scipy
import sympy

from . import __version__
from .calculus import (
    build_frame,
    check_moment_identity,
    derivative_audit,
    moment_differential,
    moment_map,
    phi_hessian,
    poisson_bracket,
)
from .errors import NonInvariantPotential
from .flow import (
    Monomial,
    check_commuting_formula,
    check_composition_law,
    check_product_law,
    closed_flow,
    coordinate_eigenvalues,
    lie_series,
    required_truncation,
)
from .model import regularity, require_invariant, validate_invariance
from .polarization import (
    build_D_and_I,
    build_P_J,
    build_P_mix,
    build_P_t,
    convergence_sweep,
    principal_angles,
)
from .scenarios import DEFAULT_GROUP_SAMPLES, Scenario
from .structure import (
    ChartTransition,
    block_matrix,
    check_transition_consistency,
    check_type_11,
    complex_structure,
    geodesic_linearity,
)

DEFAULT_SEED = 20240607
CONVERGENCE_COLUMNS = ["t", "angle_max", "angle_min", "normalized_rate", "lagrangian_residual"]


def fmt(x: float) -> str:
    return format(float(x), ".17g")


@dataclass(frozen=True)
class CheckRecord:
    check: str
    point: int | None
    t: float | None
    value: float | None
    tolerance: float | None
    status: str  # "pass", "fail" or "skipped:<reason>"

    @property
    def passed(self) -> bool | None:
        if self.status.startswith("skipped"):
            return None
        return self.status == "pass"

    def to_dict(self) -> dict:
        out = asdict(self)
        out["pass"] = self.passed
        return out

    def sort_key(self):
        return (
            self.check,
            -1 if self.point is None else self.point,
            -1.0 if self.t is None else self.t,
        )


class _Recorder:
    def __init__(self):
        self.records: list[CheckRecord] = []

    def upper(self, check, point, t, value, tol):
        """Pass when value <= tol."""
        value = float(value)
        ok = np.isfinite(value) and value <= tol
        self.records.append(CheckRecord(check, point, t, value, tol, "pass" if ok else "fail"))

    def lower(self, check, point, t, value, tol):
        """Pass when value > tol."""
        value = float(value)
        ok = np.isfinite(value) and value > tol
        self.records.append(CheckRecord(check, point, t, value, tol, "pass" if ok else "fail"))

    def equal(self, check, point, t, value, expected):
        ok = value == expected
        self.records.append(
            CheckRecord(check, point, t, float(value), float(expected), "pass" if ok else "fail")
        )

    def skip(self, check, point, t, reason, value=None):
        self.records.append(CheckRecord(check, point, t, value, None, f"skipped:{reason}"))


def _flow_vs_series(sc: Scenario, rho, p, t: float) -> tuple[float, int]:
    """max over coordinates of |series - closed| / (1 + |closed|)."""
    state = closed_flow(sc.model, rho, sc.phi, p, t)
    lam = coordinate_eigenvalues(sc.model, rho, sc.phi, p)
    worst, n_used = 0.0, sc.truncation
    names = [f"w{j + 1}" for j in range(sc.model.torus_dim)]
    names += [f"z{l + 1}" for l in range(sc.model.r_fiber)]
    for a, name in enumerate(names):
        N = required_truncation(abs(lam[a]), t, floor=sc.truncation)
        n_used = max(n_used, N)
        value, _ = lie_series(sc.model, rho, sc.phi, p, t, name, N)
        closed = state.coords[a]
        worst = max(worst, abs(value - closed) / (1 + abs(closed)))
    return float(worst), n_used


def run_battery(sc: Scenario, seed: int = DEFAULT_SEED) -> tuple[list[CheckRecord], list[dict], list[dict]]:
    """Run every check; raises NonInvariantPotential before any record is made."""
    model, phi, tol = sc.model, sc.phi, sc.tolerances
    rec = _Recorder()
    points = list(sc.points)

    if not validate_invariance(model, sc.rho, points, DEFAULT_GROUP_SAMPLES, tol["invariance"], seed):
        raise NonInvariantPotential(f"potential {sc.rho.text!r} is not torus invariant")
    rho = require_invariant(model, sc.rho, points, DEFAULT_GROUP_SAMPLES, tol["invariance"], seed)
    rec.upper("invariance", None, None, 0.0, tol["invariance"])

    rng = np.random.default_rng(seed)
    torus_coord = Monomial.coordinate(model, "w1" if model.torus_dim else "z1")
    convergence: list[dict] = []
    point_info: list[dict] = []

    for i, p in enumerate(points):
        reg = regularity(model, p)
        point_info.append({"point": i, "stab_dim": reg.stab_dim, "is_regular": reg.is_regular})
        moved = [regularity(model, model.act(s, p)).stab_dim for s in rng.uniform(0, 2 * np.pi, (4, model.n_torus))]
        rec.upper("regularity.torus_invariant", i, None, max(abs(d - reg.stab_dim) for d in moved), 0)

        frame = build_frame(model, rho, p)
        rec.lower("calculus.plurisubharmonic", i, None, np.linalg.eigvalsh(frame.h_rho)[0], 0.0)
        audit = derivative_audit(model, rho, phi, p)
        rec.upper("calculus.derivative_oracle", i, None, max(c.rel_error for c in audit), tol["derivative"])
        rec.upper("calculus.moment_identity", i, None, check_moment_identity(model, rho, p), tol["moment_identity"])
        dmu = moment_differential(model, rho, p)
        brackets = [
            abs(poisson_bracket(frame, dmu[a], dmu[b]))
            for a in range(model.n_torus)
            for b in range(a + 1, model.n_torus)
        ]
        rec.upper("calculus.moment_brackets", i, None, max(brackets, default=0.0), tol["moment_identity"])
        if model.torus_dim:
            jac_y = moment_map(model, rho, p).jac_y
            rec.upper("calculus.jac_y_symmetry", i, None, np.max(np.abs(jac_y - jac_y.T)), tol["metric_symmetry"])
            rec.lower("calculus.jac_y_positive", i, None, np.linalg.eigvalsh(jac_y)[0], 0.0)
            rec.upper("structure.geodesic_linearity", i, None, geodesic_linearity(model, rho, phi, p, sc.t_grid), tol["linearity"])
        else:
            rec.skip("structure.geodesic_linearity", i, None, "no-torus-factor", 0.0)

        D, I = build_D_and_I(model, rho, p)
        rec.equal("polarization.orbits_in_kernel", i, None, float(D.contains(I, tol["inclusion"])), 1.0)
        P_mix, prep = build_P_mix(model, rho, p)
        if reg.is_regular:
            rec.equal("polarization.P_mix_dim", i, None, prep.dim, model.m_complex)
            rec.upper("polarization.P_mix_lagrangian", i, None, prep.lagrangian_residual, tol["lagrangian"])
            rec.equal("polarization.P_mix_real_rank", i, None, prep.real_rank, model.n_torus)
        else:
            for name, value in (("dim", prep.dim), ("lagrangian", prep.lagrangian_residual), ("real_rank", prep.real_rank)):
                rec.skip(f"polarization.P_mix_{name}", i, None, "non-regular", float(value))

        for t in sc.t_grid:
            resid, _ = _flow_vs_series(sc, rho, p, t)
            rec.upper("flow.series_vs_closed", i, t, resid, tol["series"])
            lam = np.abs(coordinate_eigenvalues(model, rho, phi, p))
            N2 = required_truncation(2 * lam.max(initial=0.0), t, floor=sc.truncation)
            rec.upper(
                "flow.product_law", i, t,
                check_product_law(model, rho, phi, p, t, torus_coord, torus_coord, N2, relative=True),
                tol["product_law"],
            )
            rec.upper(
                "flow.commuting_formula", i, t,
                check_commuting_formula(model, rho, phi, p, t, torus_coord**2, N2, relative=True),
                tol["commuting_formula"],
            )
            N1 = required_truncation(lam.max(initial=0.0), t, floor=sc.truncation)
            if model.n_torus >= 2:
                rec.upper(
                    "flow.composition_law", i, t,
                    check_composition_law(model, rho, phi, p, t, N1, relative=True),
                    tol["composition_law"],
                )
            else:
                rec.skip("flow.composition_law", i, t, "single-generator", 0.0)

            M, det = block_matrix(model, rho, phi, p, t)
            rec.lower("structure.block_det_positive", i, t, det, 0.0)
            d = model.torus_dim
            if d:
                mv = moment_map(model, rho, p)
                H = phi_hessian(phi, mv.mu)[:d, :d]
                expected = np.linalg.det(np.eye(d) + 2 * t * H @ mv.A)
                rec.upper("structure.block_identity", i, t, abs(det - expected) / max(1.0, abs(expected)), tol["block_identity"])
            cs = complex_structure(model, rho, phi, p, t)
            rec.upper("structure.j_square", i, t, cs.square_residual, tol["j_square"])
            rec.upper(
                "structure.metric_symmetry", i, t,
                cs.symmetry_residual / np.max(np.abs(cs.g)), tol["metric_symmetry"],
            )
            ev = cs.metric_eigenvalues
            rec.lower("structure.metric_positive", i, t, ev[0] / ev[-1], 1e-10)
            rec.upper("structure.compatibility", i, t, cs.compatibility_residual, tol["compatibility"])
            rec.upper("structure.type_11", i, t, check_type_11(model, rho, phi, p, t), tol["type_11"])
            if d:
                rec.upper(
                    "structure.transition",
                    i, t,
                    check_transition_consistency(model, rho, phi, p, t, ChartTransition(0, -1)),
                    tol["transition"],
                )
            else:
                rec.skip("structure.transition", i, t, "no-torus-factor", 0.0)

            P_t = build_P_t(model, rho, phi, p, t)
            rec.upper("polarization.P_t_lagrangian", i, t, P_t.omega_residual(frame.omega), tol["lagrangian"])
            rec.lower("polarization.P_t_kahler", i, t, principal_angles(P_t, P_t.conj())[0], tol["kahler_angle"])
            if t == 0:
                rec.upper("polarization.P_0_equals_P_J", i, t, principal_angles(P_t, build_P_J(model, p))[-1], 1e-10)

        if reg.is_regular:
            table = convergence_sweep(model, rho, phi, p, sc.t_grid)
            convergence.append({"point": i, "h_scale": table.h_scale, "rows": [asdict(r) for r in table.rows]})
            rec.equal("polarization.convergence_monotone", i, None, float(table.strictly_decreasing()), 1.0)
            if len(table.rows) >= 2:
                rec.equal("polarization.convergence_rate", i, None, float(table.rate_bound_holds()), 1.0)
            else:
                rec.skip("polarization.convergence_rate", i, None, "grid-too-short")
        else:
            rec.skip("polarization.convergence_monotone", i, None, "non-regular")
            rec.skip("polarization.convergence_rate", i, None, "non-regular")

    records = sorted(rec.records, key=CheckRecord.sort_key)
    return records, convergence, point_info


def run_scenario(sc: Scenario, seed: int = DEFAULT_SEED) -> dict[str, Any]:
    records, convergence, point_info = run_battery(sc, seed)
    failed = sum(r.passed is False for r in records)
    skipped = sum(r.passed is None for r in records)
    return {
        "scenario": sc.to_dict(),
        "seed": seed,
        "environment": {
            "package_version": __version__,
            "precision": "float64",
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "sympy": sympy.__version__,
            "inner_product": "standard Hermitian product of the complexified (y, theta, Re z, Im z) basis",
        },
        "notes": [
            "geodesic claim verified through affine motion of log|w^t| only; no geodesic PDE is solved",
            "involutivity of polarizations is not checked; all polarization checks are pointwise",
        ],
        "points": point_info,
        "records": [r.to_dict() for r in records],
        "convergence": convergence,
        "summary": {
            "total": len(records),
            "passed": len(records) - failed - skipped,
            "failed": failed,
            "skipped": skipped,
            "overall_pass": failed == 0,
        },
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
    }


def write_report(report: dict, path: str | Path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, allow_nan=False)
        fh.write("\n")


def write_csv_tables(report: dict, directory: str | Path) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    path = directory / "checks.csv"
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["check", "point", "t", "value", "tolerance", "pass", "status"])
        for r in report["records"]:
            w.writerow(
                [
                    r["check"],
                    "" if r["point"] is None else r["point"],
                    "" if r["t"] is None else fmt(r["t"]),
                    "" if r["value"] is None else fmt(r["value"]),
                    "" if r["tolerance"] is None else fmt(r["tolerance"]),
                    "" if r["pass"] is None else str(r["pass"]).lower(),
                    r["status"],
                ]
            )
    written.append(path)
    for entry in report["convergence"]:
        path = directory / f"convergence_point{entry['point']}.csv"
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(CONVERGENCE_COLUMNS)
            for row in entry["rows"]:
                w.writerow([fmt(row[c]) for c in CONVERGENCE_COLUMNS])
        written.append(path)
    return written


def emit_plot_data(report: dict, path: str | Path, point: int | None = None) -> Path:
    """Write the (t, angle_max) column pair of one convergence sweep."""
    sweeps = report.get("convergence") or []
    if point is not None:
        sweeps = [s for s in sweeps if s["point"] == point]
    if not sweeps or not sweeps[0]["rows"]:
        raise ValueError("report contains no convergence sweep")
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "angle_max"])
        for row in sweeps[0]["rows"]:
            w.writerow([fmt(row["t"]), fmt(row["angle_max"])])
    return path
