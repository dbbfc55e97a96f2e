"""JSON model files: parsing, validation and canonical re-serialization.

Schema::

    {"measure":  {"type": "ising"} | {"type": "blume_capel", "theta": r}
                 | {"type": "dilute", "q": r},
     "beta": r,
     "coupling": {"type": "chain", "n": int, "J": r, "periodic": bool}
                 | {"type": "dense", "matrix": [[r, ...], ...]}
                 | {"type": "hierarchical", "n": int, "levels": [r, ...],
                    "permutation": [int, ...]}}

``permutation`` is optional; a dense matrix may also be given flat
(row-major) together with ``"n"``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .models import (
    BLUME_CAPEL,
    DILUTE,
    ISING,
    CouplingMatrix,
    HierarchySpec,
    ModelInstance,
    blume_capel_measure,
    coupling_chain,
    coupling_dense,
    coupling_hierarchical,
    dilute_measure,
    ising_measure,
)


class SpecError(ValueError):
    pass


def canonical_json(data) -> str:
    return json.dumps(data, indent=2, sort_keys=True) + "\n"


def _number(obj, key, where, integer=False):
    if key not in obj:
        raise SpecError(f"{where}: missing key {key!r}")
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise SpecError(f"{where}.{key}: expected a number, got {v!r}")
    if integer:
        if int(v) != v:
            raise SpecError(f"{where}.{key}: expected an integer, got {v!r}")
        return int(v)
    return float(v)


def _check_keys(obj, allowed, where):
    if not isinstance(obj, dict):
        raise SpecError(f"{where}: expected an object")
    extra = set(obj) - set(allowed)
    if extra:
        raise SpecError(f"{where}: unknown keys {sorted(extra)}")


@dataclass(frozen=True)
class ModelSpec:
    measure: dict
    beta: float
    coupling: dict

    @classmethod
    def from_dict(cls, data) -> ModelSpec:
        _check_keys(data, {"measure", "beta", "coupling"}, "model")
        for key in ("measure", "beta", "coupling"):
            if key not in data:
                raise SpecError(f"model: missing key {key!r}")
        spec = cls(_parse_measure(data["measure"]), _number(data, "beta", "model"),
                   _parse_coupling(data["coupling"]))
        if spec.beta <= 0:
            raise SpecError("model.beta: must be positive")
        try:
            spec.build()
        except ValueError as exc:
            raise SpecError(f"model: {exc}") from exc
        return spec

    def to_dict(self) -> dict:
        return {"measure": dict(self.measure), "beta": self.beta, "coupling": dict(self.coupling)}

    def to_json(self) -> str:
        return canonical_json(self.to_dict())

    def hierarchy(self) -> HierarchySpec | None:
        c = self.coupling
        if c["type"] != "hierarchical":
            return None
        return HierarchySpec(tuple(c["levels"]), c.get("permutation"))

    def build_measure(self):
        m = self.measure
        if m["type"] == ISING:
            return ising_measure()
        if m["type"] == BLUME_CAPEL:
            return blume_capel_measure(m["theta"])
        return dilute_measure(m["q"])

    def build_coupling(self) -> CouplingMatrix:
        c = self.coupling
        if c["type"] == "chain":
            return coupling_chain(c["n"], c["J"], c["periodic"])
        if c["type"] == "dense":
            return coupling_dense(c["matrix"])
        return coupling_hierarchical(self.hierarchy())

    def build(self) -> ModelInstance:
        return ModelInstance(self.build_measure(), self.build_coupling(), self.beta)

    def with_param(self, name: str, value: float) -> ModelSpec:
        """Copy with ``theta``, ``q`` or ``beta`` replaced."""
        if name == "beta":
            return ModelSpec(self.measure, float(value), self.coupling)
        if name == "theta":
            return ModelSpec({"type": BLUME_CAPEL, "theta": float(value)}, self.beta, self.coupling)
        if name == "q":
            return ModelSpec({"type": DILUTE, "q": float(value)}, self.beta, self.coupling)
        raise SpecError(f"unknown scan parameter {name!r}; use theta, q or beta")


def _parse_measure(obj) -> dict:
    where = "model.measure"
    _check_keys(obj, {"type", "theta", "q"}, where)
    kind = obj.get("type")
    if kind == ISING:
        _check_keys(obj, {"type"}, where)
        return {"type": ISING}
    if kind == BLUME_CAPEL:
        _check_keys(obj, {"type", "theta"}, where)
        return {"type": BLUME_CAPEL, "theta": _number(obj, "theta", where)}
    if kind == DILUTE:
        _check_keys(obj, {"type", "q"}, where)
        return {"type": DILUTE, "q": _number(obj, "q", where)}
    raise SpecError(f"{where}.type: expected ising, blume_capel or dilute, got {kind!r}")


def _parse_coupling(obj) -> dict:
    where = "model.coupling"
    if not isinstance(obj, dict):
        raise SpecError(f"{where}: expected an object")
    kind = obj.get("type")
    if kind == "chain":
        _check_keys(obj, {"type", "n", "J", "periodic"}, where)
        periodic = obj.get("periodic", False)
        if not isinstance(periodic, bool):
            raise SpecError(f"{where}.periodic: expected true or false")
        return {"type": "chain", "n": _number(obj, "n", where, integer=True),
                "J": _number(obj, "J", where), "periodic": periodic}
    if kind == "dense":
        _check_keys(obj, {"type", "matrix", "n"}, where)
        if "matrix" not in obj:
            raise SpecError(f"{where}: missing key 'matrix'")
        try:
            mat = np.asarray(obj["matrix"], dtype=float)
        except (TypeError, ValueError) as exc:
            raise SpecError(f"{where}.matrix: not a numeric array ({exc})") from exc
        if mat.ndim == 1:
            n = _number(obj, "n", where, integer=True)
            if mat.size != n * n:
                raise SpecError(f"{where}.matrix: flat array needs n*n = {n * n} entries")
            mat = mat.reshape(n, n)
        elif "n" in obj and _number(obj, "n", where, integer=True) != len(mat):
            raise SpecError(f"{where}.n: does not match the matrix size")
        if mat.ndim != 2:
            raise SpecError(f"{where}.matrix: expected rows of numbers")
        return {"type": "dense", "matrix": mat.tolist()}
    if kind == "hierarchical":
        _check_keys(obj, {"type", "n", "levels", "permutation"}, where)
        levels = obj.get("levels")
        if not isinstance(levels, list) or not levels:
            raise SpecError(f"{where}.levels: expected a nonempty list")
        levels = [_number({"v": v}, "v", f"{where}.levels[{i}]") for i, v in enumerate(levels)]
        n = _number(obj, "n", where, integer=True) if "n" in obj else len(levels)
        if n != len(levels):
            raise SpecError(f"{where}.n: {n} levels declared, {len(levels)} given")
        out = {"type": "hierarchical", "n": n, "levels": levels}
        if obj.get("permutation") is not None:
            out["permutation"] = [int(v) for v in obj["permutation"]]
        return out
    raise SpecError(f"{where}.type: expected chain, dense or hierarchical, got {kind!r}")


def parse_model_text(text: str, source: str = "<string>") -> ModelSpec:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecError(f"{source}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    try:
        return ModelSpec.from_dict(data)
    except SpecError as exc:
        raise SpecError(f"{source}: {exc}") from exc


def load_model_spec(path) -> ModelSpec:
    path = Path(path)
    return parse_model_text(path.read_text(), str(path))
