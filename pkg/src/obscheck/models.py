"""Location-scale model specifications and JSON model files.

A model declares named parameters with true values and optional box bounds,
plus three expressions: the mean ``m``, the scale ``s`` and the log-prior,
defining observations ``Z_t = m + s * eps_t`` with standard normal ``eps_t``.
The package ships the study models as JSON files under ``obscheck/models``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .expressions import Expr, ParseError, collect_params, eval_expr, eval_grad, parse_expr

__all__ = ["ParamSpec", "ModelSpec", "ModelError", "load_model", "bundled_model_names"]


class ModelError(Exception):
    """A model file or specification is invalid."""


@dataclass(frozen=True)
class ParamSpec:
    name: str
    true_value: float
    lower: float | None = None
    upper: float | None = None


@dataclass(frozen=True)
class ModelSpec:
    """A validated location-scale model."""

    name: str
    params: tuple[ParamSpec, ...]
    mean_expr: Expr
    scale_expr: Expr
    log_prior_expr: Expr

    def __post_init__(self):
        names = [p.name for p in self.params]
        if len(set(names)) != len(names):
            raise ModelError(f"duplicate parameter names in {names}")
        declared = set(names)
        for label, expr in (
            ("mean", self.mean_expr),
            ("scale", self.scale_expr),
            ("log_prior", self.log_prior_expr),
        ):
            unknown = collect_params(expr) - declared
            if unknown:
                raise ModelError(f"{label} references undeclared parameters {sorted(unknown)}")
        try:
            s = eval_expr(self.scale_expr, self.true_values())
        except Exception as exc:
            raise ModelError(f"scale is not evaluable at the true values: {exc}") from exc
        if not s > 0.0:
            raise ModelError(f"scale must be strictly positive at the true values, got {s}")

    @property
    def param_names(self) -> tuple[str, ...]:
        return tuple(p.name for p in self.params)

    def true_values(self) -> dict[str, float]:
        return {p.name: p.true_value for p in self.params}

    def true_vector(self) -> np.ndarray:
        return np.array([p.true_value for p in self.params], dtype=float)

    def bounds(self) -> list[tuple[float, float]]:
        return [
            (p.lower if p.lower is not None else -np.inf,
             p.upper if p.upper is not None else np.inf)
            for p in self.params
        ]

    def as_params(self, omega: np.ndarray) -> dict[str, float]:
        return {name: float(v) for name, v in zip(self.param_names, omega)}

    def mean_scale(self, omega: np.ndarray) -> tuple[float, float]:
        values = self.as_params(omega)
        return eval_expr(self.mean_expr, values), eval_expr(self.scale_expr, values)

    def mean_scale_prior_grad(self, omega: np.ndarray):
        """(value, gradient) triples for mean, scale and log-prior at ``omega``."""
        values = self.as_params(omega)
        names = self.param_names
        return (
            eval_grad(self.mean_expr, values, names),
            eval_grad(self.scale_expr, values, names),
            eval_grad(self.log_prior_expr, values, names),
        )

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "parameters": [
                {"name": p.name, "true_value": p.true_value,
                 **({"lower": p.lower} if p.lower is not None else {}),
                 **({"upper": p.upper} if p.upper is not None else {})}
                for p in self.params
            ],
            "mean": str(self.mean_expr),
            "scale": str(self.scale_expr),
            "log_prior": str(self.log_prior_expr),
        }


def model_from_dict(data: dict, name: str = "") -> ModelSpec:
    try:
        raw_params = data["parameters"]
        mean_text = data["mean"]
        scale_text = data["scale"]
    except KeyError as exc:
        raise ModelError(f"model file missing field {exc}") from exc
    prior_text = data.get("log_prior", "0")
    params = tuple(
        ParamSpec(
            name=str(p["name"]),
            true_value=float(p["true_value"]),
            lower=float(p["lower"]) if p.get("lower") is not None else None,
            upper=float(p["upper"]) if p.get("upper") is not None else None,
        )
        for p in raw_params
    )

    def parse_field(label: str, text: str) -> Expr:
        try:
            return parse_expr(text)
        except ParseError as exc:
            raise ModelError(f"cannot parse {label} expression: {exc}") from exc

    return ModelSpec(
        name=name or data.get("name", ""),
        params=params,
        mean_expr=parse_field("mean", mean_text),
        scale_expr=parse_field("scale", scale_text),
        log_prior_expr=parse_field("log_prior", prior_text),
    )


def load_model(source: str | Path) -> ModelSpec:
    """Load a model from a JSON file path or a bundled model name.

    Bundled names resolve against the packaged ``models/`` directory, with or
    without the ``.json`` suffix.
    """
    path = Path(source)
    if path.exists():
        text = path.read_text()
        default_name = path.stem
    else:
        pkg_name = path.name if path.name.endswith(".json") else path.name + ".json"
        res = resources.files("obscheck").joinpath("models", pkg_name)
        if not res.is_file():
            raise ModelError(f"model file not found: {source}")
        text = res.read_text()
        default_name = pkg_name[: -len(".json")]
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelError(f"invalid JSON in model file {source}: {exc}") from exc
    return model_from_dict(data, name=data.get("name", default_name))


def bundled_model_names() -> list[str]:
    """Names of the model files shipped with the package."""
    folder = resources.files("obscheck").joinpath("models")
    return sorted(p.name[: -len(".json")] for p in folder.iterdir() if p.name.endswith(".json"))
