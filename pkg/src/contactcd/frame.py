"""Adapted frames and their structure functions.

Index convention (0-based): horizontal fields ``X_0 .. X_{2n-1}`` and the Reeb
field ``Z`` stored last at index ``2n``.  Structure functions are

    [X_i, X_j] = sum_k w[i, j, k] X_k + gamma[i, j] Z
    [X_i, Z]   = sum_j delta[i, j] X_j          (delta[i, j] is delta_i^j)

A chart frame is given by polynomial coefficient fields; a Lie-group frame by a
bracket table plus a matrix realization.  Both reduce to a :class:`LocalFrame`:
jets of the frame coefficients in some local coordinates around the point, a
pullback for test functions, and jets of the structure functions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import expm
from scipy.special import bernoulli

from .jets import Jet, JetError, Polynomial, ScalarField, jet_einsum

COND_LIMIT = 1e12
MAX_WORD = 3


class FrameError(ValueError):
    pass


# ---------------------------------------------------------------------------
# models


@dataclass(frozen=True)
class ChartModel:
    """Polynomial frame on an open subset of R^(2n+1).

    ``frame[i][a]`` is the a-th coordinate component of field ``i`` (``Z`` last).
    """

    frame: tuple

    @property
    def dim(self) -> int:
        return len(self.frame)

    def coefficient_jets(self, x, order: int) -> Jet:
        D = self.dim
        c = np.stack([np.stack([self.frame[i][a].jet(x, order).coeffs for a in range(D)], axis=-1)
                      for i in range(D)], axis=1)
        return Jet(c, D, order)

    def field_values(self, points) -> np.ndarray:
        """Frame coefficients at many points, shape ``(N, fields, D)``."""
        pts = np.atleast_2d(points)
        D = self.dim
        return np.stack([np.stack([self.frame[i][a](pts) for a in range(D)], axis=-1) for i in range(D)], axis=1)

    def field_jacobians(self, points) -> np.ndarray:
        """``d_b X_i^a`` at many points, shape ``(N, fields, D_a, D_b)``."""
        pts = np.atleast_2d(points)
        D = self.dim
        return np.stack(
            [np.stack([self.frame[i][a].gradient(pts) for a in range(D)], axis=1) for i in range(D)], axis=1
        )


@dataclass(frozen=True)
class LieGroupModel:
    """Left-invariant frame on a matrix group.

    ``generators`` has shape ``(2n+1, m, m)`` (``A_Z`` last).  Points are
    ``m x m`` matrices, flattened row-major.  ``invariant_form`` (optional) is a
    matrix ``B`` with ``Y^T B Y = B`` on the group, used to measure drift off
    the group in simulations.
    """

    generators: np.ndarray
    w: np.ndarray
    gamma: np.ndarray
    delta: np.ndarray
    invariant_form: np.ndarray | None = None
    compact: bool = False

    @property
    def m(self) -> int:
        return self.generators.shape[1]

    @property
    def dim(self) -> int:
        return self.m * self.m

    @property
    def algebra_dim(self) -> int:
        return self.generators.shape[0]

    def structure_constants(self) -> np.ndarray:
        """Full table ``C[i, j, k]`` with ``[e_i, e_j] = sum_k C[i, j, k] e_k``."""
        return structure_constants_from_table(self.w, self.gamma, self.delta)

    def commutator_table(self) -> np.ndarray:
        """Bracket table read off the matrix commutators of the generators."""
        A = self.generators
        d = len(A)
        comm = np.einsum("iab,jbc->ijac", A, A) - np.einsum("jab,ibc->ijac", A, A)
        basis = A.reshape(d, -1).T
        coef, *_ = np.linalg.lstsq(basis, comm.reshape(d * d, -1).T, rcond=None)
        return coef.T.reshape(d, d, d)

    def group_residual(self, Y) -> np.ndarray:
        """Distance of matrices ``Y`` (shape ``(..., m, m)``) from the group."""
        Y = np.asarray(Y)
        res = np.abs(np.linalg.det(Y) - 1.0)
        if self.invariant_form is not None:
            B = self.invariant_form
            dev = np.einsum("...ba,bc,...cd->...ad", Y, B, Y) - B
            res = np.maximum(res, np.abs(dev).max(axis=(-2, -1)))
        return res


def structure_constants_from_table(w, gamma, delta) -> np.ndarray:
    n2 = w.shape[0]
    C = np.zeros((n2 + 1, n2 + 1, n2 + 1))
    C[:n2, :n2, :n2] = w
    C[:n2, :n2, n2] = gamma
    C[:n2, n2, :n2] = delta
    C[n2, :n2, :n2] = -delta
    return C


@dataclass(frozen=True)
class ContactModel:
    """A contact Riemannian manifold presented by an adapted frame."""

    name: str
    n: int
    backend: ChartModel | LieGroupModel
    params: dict = field(default_factory=dict)

    @property
    def kind(self) -> str:
        return "chart" if isinstance(self.backend, ChartModel) else "lie"

    @property
    def ambient_dim(self) -> int:
        return self.backend.dim

    @property
    def frame_dim(self) -> int:
        return 2 * self.n + 1

    def default_point(self) -> np.ndarray:
        if self.kind == "chart":
            return np.zeros(self.ambient_dim)
        return np.eye(self.backend.m).ravel()

    def random_point(self, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
        if self.kind == "chart":
            return scale * rng.uniform(-1.0, 1.0, self.ambient_dim)
        A = np.einsum("i,iab->ab", scale * rng.standard_normal(self.frame_dim), self.backend.generators)
        return expm(A).ravel()

    def describe(self) -> dict:
        return {"name": self.name, "n": self.n, "backend": self.kind, "params": dict(self.params)}


# ---------------------------------------------------------------------------
# local frames


# coefficients of z / (1 - exp(-z)) = sum_k B_k^+ z^k / k!
def _psi_coeffs(order: int) -> np.ndarray:
    B = bernoulli(order).astype(float)
    if order >= 1:
        B[1] = 0.5
    return np.array([B[k] / math.factorial(k) for k in range(order + 1)])


@dataclass
class LocalFrame:
    """Jets of an adapted frame around one point.

    ``fields`` is a tensor jet of shape ``(2n+1, D)`` in the local coordinates;
    structure jets have order one less than ``fields``.
    """

    n: int
    fields: Jet
    pullback: Callable[[ScalarField, int], Jet]
    w: Jet
    gamma: Jet
    delta: Jet
    zeta: Jet  # Z-component of [X_i, Z]

    @property
    def order(self) -> int:
        return self.fields.order

    @property
    def dim(self) -> int:
        return self.fields.dim

    def apply(self, i: int, g: Jet) -> Jet:
        """Jet of ``X_i g`` (``i == 2n`` is ``Z``)."""
        return jet_einsum("a,...a->...", self.fields[i], g.gradient())

    def apply_all(self, g: Jet) -> Jet:
        """Jet with a leading axis over all ``2n+1`` fields."""
        return jet_einsum("ia,...a->i...", self.fields, g.gradient())

    def function(self, f: ScalarField, order: int | None = None) -> Jet:
        return self.pullback(f, self.order if order is None else order)


def _matrix_inverse_jet(F: Jet) -> Jet:
    F0 = F.coeffs[0]
    cond = np.linalg.cond(F0)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise FrameError(f"singular frame matrix (condition number {cond:.3g})")
    F0inv = np.linalg.inv(F0)
    N = F - F0
    M = jet_einsum("ab,bc->ac", Jet.constant(-F0inv, F.dim, F.order), N)
    G = Jet.constant(F0inv, F.dim, F.order)
    term = Jet.constant(F0inv, F.dim, F.order)
    for _ in range(F.order):
        term = jet_einsum("ab,bc->ac", M, term)
        G = G + term
    return G


def _structure_from_fields(F: Jet, n: int):
    """Bracket coefficients of a square frame jet, order drops by one."""
    dF = F.gradient()  # (field, a, b) = d_b X_i^a
    T = jet_einsum("ib,jab->ija", F, dF)
    B = T - Jet(np.swapaxes(T.coeffs, 1, 2), T.dim, T.order)
    G = _matrix_inverse_jet(F)
    C = jet_einsum("ija,am->ijm", B, G)
    n2 = 2 * n
    return C[:n2, :n2, :n2], C[:n2, :n2, n2], C[:n2, n2, :n2], C[:n2, n2, n2]


def local_frame(model: ContactModel, x, order: int) -> LocalFrame:
    """Local jets of the frame at ``x`` with coefficient jets of order ``order``."""
    x = np.asarray(x, dtype=float)
    if x.shape != (model.ambient_dim,):
        raise FrameError(f"point has shape {x.shape}, model {model.name!r} expects ({model.ambient_dim},)")
    if order < 1:
        raise FrameError("local frames need order >= 1")
    be = model.backend
    if isinstance(be, ChartModel):
        F = be.coefficient_jets(x, order)
        w, g, d, z = _structure_from_fields(F, model.n)

        def pullback(f: ScalarField, k: int) -> Jet:
            if f.dim != be.dim:
                raise FrameError(f"field has dim {f.dim}, model expects {be.dim}")
            return f.jet(x, k)

        return LocalFrame(model.n, F, pullback, w, g, d, z)

    # Lie group: exponential coordinates s around Y0, left-invariant fields
    # X_j(s) = psi(ad_s) e_j with psi(z) = z / (1 - e^{-z}).
    D = be.algebra_dim
    C = be.structure_constants()
    ad = np.transpose(C, (0, 2, 1))  # ad[i][k, j] = C[i, j, k]
    coords = [Jet.variable(a, 0.0, D, order) for a in range(D)]
    ad_s = Jet(sum(np.multiply.outer(c.coeffs, ad[a]) for a, c in enumerate(coords)), D, order)
    psi = _psi_coeffs(order)
    eye = Jet.constant(np.eye(D), D, order)
    acc, power = eye * psi[0], eye
    for k in range(1, order + 1):
        power = jet_einsum("ab,bc->ac", power, ad_s)
        acc = acc + power * psi[k]
    F = Jet(np.swapaxes(acc.coeffs, 1, 2), D, order)

    Y0 = x.reshape(be.m, be.m)
    n2 = 2 * model.n
    cst = lambda v: Jet.constant(v, D, order - 1)  # noqa: E731
    w, g, d = cst(be.w), cst(be.gamma), cst(be.delta)
    z = cst(np.zeros(n2))

    def pullback(f: ScalarField, k: int) -> Jet:
        if f.dim != be.dim:
            raise FrameError(f"field has dim {f.dim}, model expects {be.dim} matrix entries")
        cs = [Jet.variable(a, 0.0, D, k) for a in range(D)]
        A = Jet(sum(np.multiply.outer(c.coeffs, be.generators[a]) for a, c in enumerate(cs)), D, k)
        E = Jet.constant(np.eye(be.m), D, k)
        P = Jet.constant(np.eye(be.m), D, k)
        for j in range(1, k + 1):
            P = jet_einsum("ab,bc->ac", P, A) * (1.0 / j)
            E = E + P
        Y = jet_einsum("ab,bc->ac", Jet.constant(Y0, D, k), E)
        flat = Jet(Y.coeffs.reshape(Y.coeffs.shape[0], -1), D, k)
        return f.on_jets([flat[a] for a in range(be.dim)])

    return LocalFrame(model.n, F, pullback, w, g, d, z)


# ---------------------------------------------------------------------------
# structure data


@dataclass
class StructureData:
    """Structure functions at a point and their first frame derivatives.

    Derivative arrays carry a leading axis over all ``2n+1`` frame directions,
    e.g. ``dw[l, i, j, k] = X_l w_ij^k`` and ``dw[2n] = Z w``.
    """

    n: int
    w: np.ndarray
    gamma: np.ndarray
    delta: np.ndarray
    zeta: np.ndarray
    dw: np.ndarray
    dgamma: np.ndarray
    ddelta: np.ndarray

    @property
    def n2(self) -> int:
        return 2 * self.n

    @classmethod
    def constant(cls, w, gamma, delta) -> "StructureData":
        w, gamma, delta = (np.asarray(a, dtype=float) for a in (w, gamma, delta))
        n2 = w.shape[0]
        return cls(
            n2 // 2, w, gamma, delta, np.zeros(n2),
            np.zeros((n2 + 1,) + w.shape), np.zeros((n2 + 1,) + gamma.shape), np.zeros((n2 + 1,) + delta.shape),
        )


def structure_from_local(lf: LocalFrame) -> StructureData:
    def deriv(j: Jet):
        if j.order == 0:
            return np.zeros((2 * lf.n + 1,) + j.shape)
        return lf.apply_all(j).value

    return StructureData(
        lf.n, lf.w.value, lf.gamma.value, lf.delta.value, np.atleast_1d(lf.zeta.value),
        deriv(lf.w), deriv(lf.gamma), deriv(lf.delta),
    )


def structure_functions(model: ContactModel, x) -> StructureData:
    """Structure functions (with first derivatives) of the model's frame at ``x``."""
    if isinstance(model.backend, LieGroupModel):
        x = np.asarray(x, dtype=float)
        if x.shape != (model.ambient_dim,):
            raise FrameError(f"point has shape {x.shape}, model expects ({model.ambient_dim},)")
        be = model.backend
        return StructureData.constant(be.w, be.gamma, be.delta)
    return structure_from_local(local_frame(model, x, 2))


# ---------------------------------------------------------------------------
# diagnostics


@dataclass
class Flag:
    name: str
    passed: bool
    violation: float


@dataclass
class DiagnosticsReport:
    flags: list[Flag]

    @property
    def ok(self) -> bool:
        return all(f.passed for f in self.flags)

    def __getitem__(self, name: str) -> Flag:
        for f in self.flags:
            if f.name == name:
                return f
        raise KeyError(name)

    def failures(self) -> list[Flag]:
        return [f for f in self.flags if not f.passed]

    def to_dict(self) -> dict:
        return {f.name: {"passed": f.passed, "violation": f.violation} for f in self.flags}


def diagnose_structure(sd: StructureData, tol: float = 1e-10) -> DiagnosticsReport:
    n2 = sd.n2
    checks = {
        "w_antisymmetric": np.abs(sd.w + np.swapaxes(sd.w, 0, 1)).max(initial=0.0),
        "gamma_antisymmetric": np.abs(sd.gamma + sd.gamma.T).max(initial=0.0),
        "gamma_orthogonal": np.abs(sd.gamma @ sd.gamma.T - np.eye(n2)).max(initial=0.0),
        "reeb_bracket_horizontal": np.abs(sd.zeta).max(initial=0.0),
        "delta_diagonal_zero": np.abs(np.diag(sd.delta)).max(initial=0.0),
    }
    return DiagnosticsReport([Flag(k, bool(v <= tol), float(v)) for k, v in checks.items()])


def check_adapted_frame(model: ContactModel, x, tol: float = 1e-10) -> DiagnosticsReport:
    """Pointwise adaptedness checks; never raises on a failed check."""
    return diagnose_structure(structure_functions(model, x), tol)


def normalizing_rotation(sd: StructureData) -> tuple[np.ndarray, np.ndarray]:
    """Orthogonal change of horizontal frame (preserving ``J``) that zeroes the
    diagonal of the torsion at this point.

    Returns ``(R, new_diag)``: the new frame is ``X'_a = sum_b R[a, b] X_b`` and
    ``new_diag`` is the diagonal of ``tau`` in that frame.
    """
    n2 = sd.n2
    tau = 0.5 * (sd.delta + sd.delta.T)
    Jm = sd.gamma.T  # acting on coefficient column vectors
    basis = np.eye(n2)  # orthonormal basis of the remaining (J, tau)-invariant subspace
    rows = []
    while basis.shape[1] > 0:
        sub = basis.T @ tau @ basis
        vals, vecs = np.linalg.eigh(sub)
        e = basis @ vecs[:, -1]
        je = Jm @ e
        rows += [(e + je) / math.sqrt(2.0), (je - e) / math.sqrt(2.0)]
        span = np.stack([e, je], axis=1)
        rest = basis - span @ (span.T @ basis)
        u, s, _ = np.linalg.svd(rest, full_matrices=False)
        basis = u[:, s > 1e-8]
    R = np.array(rows)
    return R, np.diag(R @ tau @ R.T)


# ---------------------------------------------------------------------------
# frame derivatives


def _word_index(model: ContactModel, c) -> int:
    if isinstance(c, str):
        if c.upper() == "Z":
            return 2 * model.n
        raise FrameError(f"unknown frame symbol {c!r}")
    c = int(c)
    if not 0 <= c <= 2 * model.n:
        raise FrameError(f"frame index {c} out of range 0..{2 * model.n}")
    return c


def frame_derivative(model: ContactModel, f: ScalarField, x, word: Sequence) -> float:
    """``X_{w0} X_{w1} ... f`` at ``x``; entries are 0-based horizontal indices or ``"Z"``."""
    if len(word) > MAX_WORD:
        raise FrameError(f"word of length {len(word)} exceeds {MAX_WORD}")
    idx = [_word_index(model, c) for c in word]
    k = max(len(idx), 1)
    lf = local_frame(model, x, k)
    g = lf.function(f, k)
    for i in reversed(idx):
        g = lf.apply(i, g)
    return float(g.value)


__all__ = [
    "ChartModel",
    "ContactModel",
    "DiagnosticsReport",
    "Flag",
    "FrameError",
    "JetError",
    "LieGroupModel",
    "LocalFrame",
    "Polynomial",
    "StructureData",
    "check_adapted_frame",
    "diagnose_structure",
    "frame_derivative",
    "local_frame",
    "normalizing_rotation",
    "structure_functions",
]
