"""Scenario files and the builtin scenarios."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .errors import DimensionMismatch, ParseError
from .model import LocalModel, ModelPoint, ScalarField, build_model

DEFAULT_TOLERANCES: dict[str, float] = {
    "invariance": 1e-10,
    "derivative": 1e-6,
    "moment_identity": 1e-8,
    "series": 1e-9,
    "linearity": 1e-12,
    "product_law": 1e-9,
    "commuting_formula": 1e-9,
    "composition_law": 1e-9,
    "block_identity": 1e-9,
    "j_square": 1e-9,
    "metric_symmetry": 1e-10,
    "compatibility": 1e-9,
    "type_11": 1e-8,
    "transition": 1e-9,
    "lagrangian": 1e-9,
    "kahler_angle": 1e-6,
    "inclusion": 1e-9,
}
DEFAULT_TRUNCATION = 30
DEFAULT_GROUP_SAMPLES = 16


@dataclass(frozen=True, eq=False)
class Scenario:
    name: str
    model: LocalModel
    rho: ScalarField
    phi: ScalarField
    points: tuple[ModelPoint, ...]
    t_grid: tuple[float, ...]
    truncation: int = DEFAULT_TRUNCATION
    tolerances: dict[str, float] = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    outputs: dict[str, str] = field(default_factory=dict)

    @classmethod
    def from_dict(cls, data: Any) -> "Scenario":
        if not isinstance(data, dict):
            raise ParseError("scenario must be a JSON object")
        try:
            mdata = data["model"]
            model = build_model(int(mdata["n"]), int(mdata["k"]), int(mdata["r"]), mdata.get("B", []))
            rho = ScalarField.parse(data["rho"])
            phi = ScalarField.parse(data["phi"])
            raw_points = data["points"]
        except KeyError as exc:
            raise ParseError(f"missing scenario field {exc.args[0]!r}") from None
        except (TypeError, ValueError) as exc:
            raise ParseError(f"bad scenario field: {exc}") from None
        if not rho.variables <= model.rho_variables:
            raise ParseError(f"rho uses variables outside {sorted(model.rho_variables)}")
        if not phi.variables <= model.phi_variables:
            raise ParseError(f"phi uses variables outside {sorted(model.phi_variables)}")
        points = tuple(_parse_point(model, raw) for raw in raw_points)
        if not points:
            raise ParseError("scenario needs at least one sample point")
        t_grid = tuple(float(t) for t in data.get("t_grid", [0.0, 1.0, 10.0, 100.0]))
        if not t_grid or any(t < 0 or not math.isfinite(t) for t in t_grid):
            raise ParseError("t_grid must be non-empty with finite t >= 0")
        if any(b <= a for a, b in zip(t_grid, t_grid[1:])):
            raise ParseError("t_grid must be strictly increasing")
        truncation = int(data.get("truncation", DEFAULT_TRUNCATION))
        if truncation < 1:
            raise ParseError("truncation must be at least 1")
        tolerances = dict(DEFAULT_TOLERANCES)
        for key, value in dict(data.get("tolerances", {})).items():
            if key not in DEFAULT_TOLERANCES:
                raise ParseError(f"unknown tolerance {key!r}")
            tolerances[key] = float(value)
        outputs = {str(k): str(v) for k, v in dict(data.get("outputs", {})).items()}
        return cls(
            name=str(data.get("name", "scenario")),
            model=model,
            rho=rho,
            phi=phi,
            points=points,
            t_grid=t_grid,
            truncation=truncation,
            tolerances=tolerances,
            outputs=outputs,
        )

    def to_dict(self) -> dict:
        out = {
            "name": self.name,
            "model": self.model.to_dict(),
            "rho": self.rho.text,
            "phi": self.phi.text,
            "points": [[[float(c.real), float(c.imag)] for c in p.coords] for p in self.points],
            "t_grid": list(self.t_grid),
            "truncation": self.truncation,
            "tolerances": dict(sorted(self.tolerances.items())),
        }
        if self.outputs:
            out["outputs"] = dict(sorted(self.outputs.items()))
        return out


def _parse_point(model: LocalModel, raw) -> ModelPoint:
    arr = np.asarray(raw, dtype=float)
    # a bare [re, im] pair is accepted for one-dimensional models
    if arr.shape == (2,) and model.m_complex == 1:
        arr = arr.reshape(1, 2)
    if arr.shape != (model.m_complex, 2):
        raise ParseError(f"point {raw!r} must be {model.m_complex} pairs [re, im]")
    try:
        return model.point_from_coords(arr[:, 0] + 1j * arr[:, 1])
    except DimensionMismatch as exc:
        raise ParseError(f"invalid point {raw!r}: {exc}") from None


def normalize(data: dict) -> dict:
    return Scenario.from_dict(data).to_dict()


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON ({exc})") from None
    return Scenario.from_dict(data)


def _pairs(*coords: complex) -> list[list[float]]:
    return [[float(np.real(c)), float(np.imag(c))] for c in coords]


# sample points keep every exponent rate >= 0 and t * rate below the float range
BUILTINS: dict[str, dict] = {
    "cylinder": {
        "name": "cylinder",
        "model": {"n": 1, "k": 0, "r": 0, "B": []},
        "rho": "y1^2",
        "phi": "mu1^2/2",
        "points": [_pairs(math.e), _pairs(1.0), _pairs(2 * np.exp(0.5j))],
        "t_grid": [0, 1, 10, 100],
        "truncation": DEFAULT_TRUNCATION,
    },
    "weighted-c2": {
        "name": "weighted-c2",
        "model": {"n": 1, "k": 1, "r": 2, "B": [[1, 2]]},
        "rho": "z1*zb1 + z2*zb2",
        "phi": "mu1^2/2",
        "points": [
            _pairs(1.0, 0.0),
            _pairs(1.0, 1.0),
            _pairs(0.3 + 0.4j, -0.5j),
            _pairs(0.0, 0.0),
        ],
        "t_grid": [0, 1, 5, 10, 100],
        "truncation": DEFAULT_TRUNCATION,
    },
    "mixed-tc-c": {
        "name": "mixed-tc-c",
        "model": {"n": 2, "k": 1, "r": 1, "B": [[3]]},
        "rho": "y1^2 + exp(y1)*z1*zb1",
        "phi": "(mu1^2 + mu1*mu2 + mu2^2)/2",
        "points": [
            _pairs(1.0, 0.2),
            _pairs(1.5, 0.3 + 0.2j),
            _pairs(1.2j, 0.5),
            _pairs(1.5, 0.0),
        ],
        "t_grid": [0, 1, 5, 10, 100],
        "truncation": DEFAULT_TRUNCATION,
    },
}


def list_builtins() -> list[str]:
    return sorted(BUILTINS)


def builtin(name: str) -> Scenario:
    try:
        return Scenario.from_dict(BUILTINS[name])
    except KeyError:
        raise ParseError(f"no builtin scenario {name!r}; choose from {list_builtins()}") from None
