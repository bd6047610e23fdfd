"""Shipped example manifolds and the JSON model loader/dumper."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .frame import (
    ChartModel,
    ContactModel,
    LieGroupModel,
    check_adapted_frame,
    structure_constants_from_table,
    structure_functions,
)
from .jets import Polynomial, field_from_json


class ModelError(ValueError):
    pass


# ---------------------------------------------------------------------------
# constructors


def heisenberg(n: int = 1) -> ContactModel:
    """Heisenberg group on R^(2n+1) with coordinates (x_1..x_n, y_1..y_n, z)."""
    if n < 1:
        raise ModelError("heisenberg needs n >= 1")
    D = 2 * n + 1
    zero = Polynomial.zero(D)
    one = Polynomial.const(1.0, D)
    frame = []
    for i in range(n):
        row = [zero] * D
        row[i] = one
        row[-1] = Polynomial.coordinate(n + i, D, -0.5)  # -y_i / 2
        frame.append(tuple(row))
    for i in range(n):
        row = [zero] * D
        row[n + i] = one
        row[-1] = Polynomial.coordinate(i, D, 0.5)  # x_i / 2
        frame.append(tuple(row))
    row = [zero] * D
    row[-1] = one
    frame.append(tuple(row))
    return ContactModel(f"heisenberg({n})", n, ChartModel(tuple(frame)), {"n": n})


def sheared(c: tuple = (0.3, 0.5, -0.4, 0.7)) -> ContactModel:
    """Degree-2 polynomial frame on R^3 that is adapted but neither flat nor torsion free.

    With ``H_1, H_2`` the Heisenberg fields and ``s = c0 + c1 x + c2 y + c3 z``,
    the frame is ``X_1 = H_1 + s H_2``, ``X_2 = H_2``, ``Z = d/dz``.  Then
    ``[X_1, X_2] = Z - (c2 + c3 x / 2) X_2`` and ``[X_1, Z] = -c3 X_2``.
    """
    c0, c1, c2, c3 = map(float, c)
    D = 3
    x, y, z = (Polynomial.coordinate(a, D) for a in range(D))
    s = c1 * x + c2 * y + c3 * z + c0
    zero, one = Polynomial.zero(D), Polynomial.const(1.0, D)
    X1 = (one, s, y * (-0.5) + s * x * 0.5)
    X2 = (zero, one, x * 0.5)
    Z = (zero, zero, one)
    return ContactModel(f"sheared({c0:g},{c1:g},{c2:g},{c3:g})", 1, ChartModel((X1, X2, Z)),
                        {"c": [c0, c1, c2, c3]})


def twisted_table(a: float, b: float):
    w = np.zeros((2, 2, 2))
    gamma = np.array([[0.0, 1.0], [-1.0, 0.0]])
    delta = np.array([[0.0, a], [b, 0.0]])
    return w, gamma, delta


def lie_model_from_table(name: str, n: int, w, gamma, delta, generators=None, params=None,
                         compact: bool = False) -> ContactModel:
    """Lie-group model; without explicit generators the adjoint representation is used."""
    C = structure_constants_from_table(np.asarray(w, float), np.asarray(gamma, float), np.asarray(delta, float))
    if generators is None:
        generators = np.transpose(C, (0, 2, 1)).copy()  # ad(e_i)[k, j] = C[i, j, k]
    generators = np.asarray(generators, dtype=float)
    ad = np.transpose(C, (0, 2, 1))
    killing = np.einsum("iab,jba->ij", ad, ad)
    inv = killing if np.array_equal(generators, ad) and np.abs(killing).max() > 0 else None
    be = LieGroupModel(generators, np.asarray(w, float), np.asarray(gamma, float), np.asarray(delta, float),
                       invariant_form=inv, compact=compact)
    return ContactModel(name, n, be, dict(params or {}))


def twisted(a: float, b: float) -> ContactModel:
    """Three-dimensional group with ``[X1,X2] = Z``, ``[X1,Z] = a X2``, ``[X2,Z] = b X1``."""
    a, b = float(a), float(b)
    w, gamma, delta = twisted_table(a, b)
    gens = None
    if a == 0.0 and b == 0.0:
        gens = np.zeros((3, 3, 3))
        gens[0, 0, 1] = gens[1, 1, 2] = gens[2, 0, 2] = 1.0  # strictly upper triangular
    params = {"a": a, "b": b, "sasakian": a + b == 0.0}
    return lie_model_from_table(f"twisted({a:g},{b:g})", 1, w, gamma, delta, gens, params,
                                compact=(a < 0.0 < b))


def builtin(name: str, **params) -> ContactModel:
    """Construct a shipped model by name, e.g. ``builtin("twisted", a=-1, b=1)``.

    Names of the form ``heisenberg(2)`` or ``twisted(0,1)`` are also accepted.
    """
    m = re.fullmatch(r"\s*(\w+)\s*(?:\(([^)]*)\))?\s*", name)
    if not m:
        raise ModelError(f"unknown model {name!r}")
    key, args = m.group(1), m.group(2)
    pos = [float(v) for v in args.split(",")] if args else []
    if key == "heisenberg":
        n = int(pos[0]) if pos else int(params.get("n", 1))
        return heisenberg(n)
    if key == "twisted":
        a = pos[0] if pos else params.get("a")
        b = pos[1] if len(pos) > 1 else params.get("b")
        if a is None or b is None:
            raise ModelError("twisted needs parameters a and b")
        return twisted(a, b)
    if key == "su2type":
        return twisted(-1.0, 1.0)
    if key == "sl2type":
        return twisted(1.0, -1.0)
    if key == "sheared":
        return sheared(tuple(pos) if pos else params.get("c", (0.3, 0.5, -0.4, 0.7)))
    raise ModelError(f"unknown model {name!r}; choose from {sorted(CATALOG)}")


# ---------------------------------------------------------------------------
# catalog


@dataclass(frozen=True)
class ModelCatalogEntry:
    name: str
    params: dict
    expected: dict  # expected constants (c1, c2, c3, iota, alpha) where known
    notes: str = ""

    def build(self) -> ContactModel:
        return builtin(self.name, **self.params)


CATALOG = {
    "heisenberg": ModelCatalogEntry("heisenberg", {"n": 1}, {"constants": (0.0, 0.0, 0.0, 0.0, 0.0)},
                                    "flat Sasakian, non-compact"),
    "twisted": ModelCatalogEntry("twisted", {"a": 0.0, "b": 1.0}, {"constants": (0.0, 0.0, 0.0, 0.25, 0.5)},
                                 "torsion iff a + b != 0"),
    "su2type": ModelCatalogEntry("su2type", {}, {"constants": (1.0, 0.0, 0.0, 0.0, 0.0)},
                                 "twisted(-1,1), compact Sasakian"),
    "sl2type": ModelCatalogEntry("sl2type", {}, {"constants": (-1.0, 0.0, 0.0, 0.0, 0.0)},
                                 "twisted(1,-1), negative curvature"),
    "sheared": ModelCatalogEntry("sheared", {}, {}, "degree-2 chart frame with torsion"),
}


def catalog() -> list[dict]:
    return [{"name": e.name, "params": e.params, "expected": {k: list(v) for k, v in e.expected.items()},
             "notes": e.notes} for e in CATALOG.values()]


# ---------------------------------------------------------------------------
# serialization


def _field_to_json(f):
    return f.to_terms()


def dump_model(model: ContactModel) -> dict:
    be = model.backend
    if isinstance(be, ChartModel):
        return {"n": model.n, "backend": "chart", "name": model.name,
                "frame": [[_field_to_json(c) for c in row] for row in be.frame]}
    return {"n": model.n, "backend": "lie", "name": model.name,
            "generators": be.generators.tolist(),
            "brackets": {"w": be.w.tolist(), "gamma": be.gamma.tolist(), "delta": be.delta.tolist()}}


def save_model(model: ContactModel, path) -> None:
    Path(path).write_text(json.dumps(dump_model(model), indent=1))


def _validate_table(n: int, w, gamma, delta, tol: float = 1e-12):
    n2 = 2 * n
    if w.shape != (n2, n2, n2) or gamma.shape != (n2, n2) or delta.shape != (n2, n2):
        raise ModelError(f"bracket arrays have wrong shapes for n = {n}")
    if np.abs(w + np.swapaxes(w, 0, 1)).max(initial=0) > tol or np.abs(gamma + gamma.T).max() > tol:
        raise ModelError("bracket table not antisymmetric")
    if np.abs(gamma @ gamma.T - np.eye(n2)).max() > tol:
        raise ModelError("γγᵀ ≠ Id")
    if np.abs(np.diag(delta)).max() > tol:
        raise ModelError("frame not δ-normalized")


def model_from_dict(obj: dict, name: str = "loaded") -> ContactModel:
    try:
        n = int(obj["n"])
        kind = obj.get("backend", "lie" if "generators" in obj else "chart")
        name = obj.get("name", name)
        if n < 1:
            raise ModelError("n must be >= 1")
        if kind == "chart":
            D = 2 * n + 1
            rows = obj["frame"]
            if len(rows) != D or any(len(r) != D for r in rows):
                raise ModelError(f"chart frame must be {D} fields with {D} components each")
            frame = tuple(tuple(field_from_json(c, D) for c in row) for row in rows)
            model = ContactModel(name, n, ChartModel(frame), {})
            probes = obj.get("probe_points", [[0.0] * D])
            for p in probes:
                rep = check_adapted_frame(model, np.asarray(p, float))
                for flag in rep.failures():
                    raise ModelError(_FLAG_MESSAGES[flag.name] + f" at probe point {p}")
            return model
        if kind == "lie":
            br = obj["brackets"]
            w, gamma, delta = (np.asarray(br[k], dtype=float) for k in ("w", "gamma", "delta"))
            _validate_table(n, w, gamma, delta)
            gens = np.asarray(obj["generators"], dtype=float)
            if gens.ndim != 3 or gens.shape[0] != 2 * n + 1 or gens.shape[1] != gens.shape[2]:
                raise ModelError("generators must be 2n+1 square matrices")
            model = lie_model_from_table(name, n, w, gamma, delta, gens)
            if np.abs(model.backend.commutator_table() - model.backend.structure_constants()).max() > 1e-12:
                raise ModelError("matrix commutators do not reproduce the bracket table")
            return model
        raise ModelError(f"unknown backend {kind!r}")
    except ModelError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelError(f"schema error: {exc}") from exc


_FLAG_MESSAGES = {
    "w_antisymmetric": "bracket table not antisymmetric",
    "gamma_antisymmetric": "bracket table not antisymmetric",
    "gamma_orthogonal": "γγᵀ ≠ Id",
    "reeb_bracket_horizontal": "[X_i, Z] has a Z-component",
    "delta_diagonal_zero": "frame not δ-normalized",
}


def load_model(path) -> ContactModel:
    try:
        obj = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ModelError(f"cannot read model file {path}: {exc}") from exc
    if not isinstance(obj, dict):
        raise ModelError("schema error: top level must be an object")
    return model_from_dict(obj, Path(path).stem)


def resolve(name: str, **params) -> ContactModel:
    """A builtin name or a path to a JSON model file."""
    if name.endswith(".json") or Path(name).is_file():
        return load_model(name)
    return builtin(name, **params)


def same_structure(m1: ContactModel, m2: ContactModel, points) -> bool:
    for p in points:
        s1, s2 = structure_functions(m1, p), structure_functions(m2, p)
        for k in ("w", "gamma", "delta", "dw", "dgamma", "ddelta"):
            if not np.allclose(getattr(s1, k), getattr(s2, k), atol=1e-12, rtol=0):
                return False
    return True
