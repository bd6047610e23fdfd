"""Pointwise second-order calculus: L, the carré du champ forms and their iterates.

``gamma2_forms`` evaluates the iterated forms straight from their definitions
through jets, so it needs no curvature at all.  The Bochner right-hand sides are
assembled from :mod:`contactcd.geometry` and are what the identities test.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .frame import (
    ContactModel,
    FrameError,
    LieGroupModel,
    LocalFrame,
    StructureData,
    local_frame,
    structure_from_local,
)
from .geometry import GeometryData, geometry_data
from .jets import Jet, Polynomial, ScalarField, jet_einsum

GAMMA2_ORDER = 3
DELTA_TOL = 1e-10


@dataclass
class OperatorContext:
    """A model, a point and the jets needed to differentiate there."""

    model: ContactModel
    x: np.ndarray
    order: int = GAMMA2_ORDER
    rtol: float = 1e-8
    atol: float = 1e-10
    frame: LocalFrame = field(init=False, repr=False)
    structure: StructureData = field(init=False, repr=False)
    _geometry: GeometryData | None = field(init=False, default=None, repr=False)

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        if self.order < 1:
            raise FrameError("operator contexts need jet order >= 1")
        self.frame = local_frame(self.model, self.x, max(self.order, 2))
        self.structure = structure_from_local(self.frame)

    @property
    def n(self) -> int:
        return self.model.n

    @property
    def geometry(self) -> GeometryData:
        if self._geometry is None:
            self._geometry = geometry_data(self.structure)
        return self._geometry

    def jet(self, f: ScalarField, order: int | None = None) -> Jet:
        return self.frame.function(f, self.order if order is None else order)

    def derivatives(self, f: ScalarField) -> dict:
        """Frame derivatives of ``f`` of order <= 2 at the point.

        ``d1[i] = X_i f`` and ``d2[i, j] = X_i X_j f`` with ``Z`` at index ``2n``.
        """
        g = self.jet(f, 2)
        d1 = self.frame.apply_all(g)
        d2 = self.frame.apply_all(d1)
        return {"f": g.value, "d1": np.atleast_1d(d1.value), "d2": d2.value}


def _ensure_budget(ctx: OperatorContext, need: int, what: str):
    if ctx.order < need:
        raise FrameError(f"{what} needs jet order >= {need}, context has {ctx.order}")


# ---------------------------------------------------------------------------
# jet-level operators


def _sub_laplacian(lf: LocalFrame, g: Jet) -> Jet:
    n2 = 2 * lf.n
    d1 = lf.apply_all(g)
    h = d1[:n2]
    second = lf.apply_all(h)  # second[j, i] = X_j X_i g
    diag = Jet(np.einsum("pii->p", second.coeffs[:, :n2, :n2]), g.dim, second.order)
    trace_w = Jet(np.einsum("pikk->pi", lf.w.coeffs), g.dim, lf.w.order)
    return diag - jet_einsum("i,i->", trace_w, h)


def _carre(lf: LocalFrame, a: Jet, b: Jet) -> tuple[Jet, Jet]:
    n2 = 2 * lf.n
    da, db = lf.apply_all(a), lf.apply_all(b)
    return jet_einsum("i,i->", da[:n2], db[:n2]), da[n2] * db[n2]


def apply_L(ctx: OperatorContext, f: ScalarField) -> float:
    """``Lf`` at the point with ``L = sum_i X_i^2 + X_0``."""
    _ensure_budget(ctx, 2, "apply_L")
    return float(_sub_laplacian(ctx.frame, ctx.jet(f, 2)).value)


def gamma_forms(ctx: OperatorContext, f: ScalarField, g: ScalarField | None = None) -> tuple[float, float]:
    """``(Gamma(f, g), Gamma^Z(f, g))`` at the point."""
    g = f if g is None else g
    a, b = _carre(ctx.frame, ctx.jet(f, 1), ctx.jet(g, 1))
    return float(a.value), float(b.value)


def carre_du_champ_from_L(ctx: OperatorContext, f: ScalarField, g: ScalarField) -> float:
    """``(L(fg) - f Lg - g Lf) / 2``, the defining identity for ``Gamma``."""
    _ensure_budget(ctx, 2, "carre_du_champ_from_L")
    a, b = ctx.jet(f, 2), ctx.jet(g, 2)
    lf = ctx.frame
    out = _sub_laplacian(lf, a * b) - a * _sub_laplacian(lf, b) - b * _sub_laplacian(lf, a)
    return 0.5 * float(out.value)


def gamma2_forms(ctx: OperatorContext, f: ScalarField) -> tuple[float, float]:
    """``(Gamma_2(f), Gamma_2^Z(f))`` from their definitions.

    ``Gamma_2 = L Gamma(f) / 2 - Gamma(f, Lf)`` and likewise for the vertical form.
    """
    _ensure_budget(ctx, 3, "gamma2_forms")
    lf = ctx.frame
    j = ctx.jet(f, 3)
    gh, gv = _carre(lf, j, j)
    Lf = _sub_laplacian(lf, j)
    ch, cv = _carre(lf, j, Lf)
    g2 = 0.5 * _sub_laplacian(lf, gh).value - ch.value
    g2z = 0.5 * _sub_laplacian(lf, gv).value - cv.value
    return float(g2), float(g2z)


# ---------------------------------------------------------------------------
# Bochner right-hand sides


def horizontal_hessian(ctx: OperatorContext, d: dict) -> np.ndarray:
    """Connection-corrected symmetric horizontal Hessian of ``f``."""
    n2 = 2 * ctx.n
    w = ctx.structure.w
    grad = d["d1"][:n2]
    sym = 0.5 * (d["d2"][:n2, :n2] + d["d2"][:n2, :n2].T)
    corr = 0.5 * (np.einsum("ijl,i->lj", w, grad) + np.einsum("ilj,i->lj", w, grad))
    return sym - corr


def bochner_horizontal_rhs(ctx: OperatorContext, f: ScalarField, ric=None) -> float:
    """Hessian norm plus curvature form plus the mixed ``X_j Z f`` term.

    ``ric`` overrides the curvature matrix (used to inject faults in tests).
    """
    _ensure_budget(ctx, 2, "bochner_horizontal_rhs")
    n2 = 2 * ctx.n
    d = ctx.derivatives(f)
    gd = ctx.geometry
    R = gd.ricTau2 if ric is None else ric
    grad, zf = d["d1"][:n2], d["d1"][n2]
    H = horizontal_hessian(ctx, d)
    xz = d["d2"][:n2, n2]  # X_j Z f
    curv = grad @ R @ grad + (gd.W @ grad) * zf + 0.5 * ctx.n * zf ** 2
    return float(np.sum(H * H) + curv - 2.0 * np.einsum("ij,j,i->", ctx.structure.gamma, xz, grad))


def _require_normalized(ctx: OperatorContext):
    diag = np.abs(np.diag(ctx.structure.delta)).max()
    if diag > DELTA_TOL:
        raise FrameError(f"frame not δ-normalized at this point (max |delta_i^i| = {diag:.3g})")


def bochner_vertical_rhs(ctx: OperatorContext, f: ScalarField) -> float:
    """``sum (X_i Z f)^2`` plus the torsion-Hessian and ``V`` couplings with ``Zf``."""
    _ensure_budget(ctx, 2, "bochner_vertical_rhs")
    _require_normalized(ctx)
    n2 = 2 * ctx.n
    d = ctx.derivatives(f)
    gd = ctx.geometry
    grad, zf = d["d1"][:n2], d["d1"][n2]
    xz = d["d2"][:n2, n2]
    sym = 0.5 * (d["d2"][:n2, :n2] + d["d2"][:n2, :n2].T)
    V_rest = gd.V - _tau_w_part(ctx)
    return float(xz @ xz + 2.0 * np.sum(gd.tau * sym) * zf + (V_rest @ grad) * zf)


def _tau_w_part(ctx: OperatorContext) -> np.ndarray:
    """The part of ``V`` that comes from rewriting the Hessian in connection form."""
    w = ctx.structure.w
    tau = ctx.geometry.tau
    return np.einsum("jl,ilj->i", tau, w) + np.einsum("jl,ijl->i", tau, w)


def bochner_vertical_rhs_tensorial(ctx: OperatorContext, f: ScalarField) -> float:
    """Same value written with the corrected Hessian and the full field ``V``."""
    _require_normalized(ctx)
    n2 = 2 * ctx.n
    d = ctx.derivatives(f)
    gd = ctx.geometry
    grad, zf = d["d1"][:n2], d["d1"][n2]
    xz = d["d2"][:n2, n2]
    H = horizontal_hessian(ctx, d)
    return float(xz @ xz + 2.0 * np.sum(gd.tau * H) * zf + (gd.V @ grad) * zf)


# ---------------------------------------------------------------------------
# rescaled metric


@dataclass
class RescaledForms:
    gamma_lambda: float
    gamma2_lambda: float
    identity_residual: float
    lhs: float
    rhs: float


def rescaled_forms(ctx: OperatorContext, f: ScalarField, lam: float) -> RescaledForms:
    """Forms of ``L + lam^2 Z^2`` and the residual of the exact ``Z^2`` identity.

    The identity compares ``Z^2 Gamma(f) / 2 - Gamma(f, Z^2 f)`` with
    ``sum_k (X_k Z f - 2 (tau grad f)_k)^2 - 2 |tau grad f|^2 - <(nabla_Z tau) grad f, grad f>``.
    """
    if lam <= 0:
        raise ValueError("lambda must be positive")
    _ensure_budget(ctx, 3, "rescaled_forms")
    lf = ctx.frame
    n2 = 2 * ctx.n
    l2 = lam * lam
    j = ctx.jet(f, 3)

    def big_L(g: Jet) -> Jet:
        zg = lf.apply(n2, g)
        return _sub_laplacian(lf, g) + lf.apply(n2, zg) * l2

    def gam(a: Jet, b: Jet) -> Jet:
        h, v = _carre(lf, a, b)
        return h + v * l2

    g_l = gam(j, j)
    g2_l = 0.5 * big_L(g_l).value - gam(j, big_L(j)).value

    # Z^2 identity: both sides independently
    gh, _ = _carre(lf, j, j)
    zz = lf.apply(n2, lf.apply(n2, j))
    lhs = 0.5 * lf.apply(n2, lf.apply(n2, gh)).value - _carre(lf, j, zz)[0].value
    d = ctx.derivatives(f)
    gd = ctx.geometry
    grad = d["d1"][:n2]
    xz = d["d2"][:n2, n2]
    tg = gd.tau @ grad
    rhs = np.sum((xz - 2.0 * tg) ** 2) - 2.0 * tg @ tg - grad @ gd.nablaZtau @ grad
    scale = max(1.0, abs(float(lhs)), abs(float(rhs)))
    return RescaledForms(float(g_l.value), float(g2_l), float(abs(lhs - rhs)) / scale, float(lhs), float(rhs))


# ---------------------------------------------------------------------------
# prescribed jets


@dataclass
class JetPrescription:
    """Target first and second frame derivatives at ``x0`` for the converse construction."""

    x0: np.ndarray
    u: np.ndarray
    v: float
    nu: float
    hessian: np.ndarray | None = None  # corrected horizontal Hessian; default (nu/2) tau v
    xz: np.ndarray | None = None  # X_j Z f; default (1/nu) sum_i gamma_ij u_i


def _local_coordinates(model: ContactModel, x0: np.ndarray) -> list[Polynomial]:
    """Affine functions on the ambient space vanishing at ``x0`` whose
    differentials there span the cotangent space of the manifold."""
    D = model.ambient_dim
    if not isinstance(model.backend, LieGroupModel):
        return [Polynomial.coordinate(a, D) - float(x0[a]) for a in range(D)]
    be = model.backend
    m = be.m
    Y0inv = np.linalg.inv(x0.reshape(m, m))
    basis = be.generators.reshape(len(be.generators), -1)
    P = np.linalg.pinv(basis.T)  # coefficients from a flattened algebra element
    out = []
    for a in range(len(basis)):
        # s_a(Y) = P[a] . vec(Y0^{-1} Y - I), affine in the entries of Y
        lin = np.einsum("bc,bd->cd", P[a].reshape(m, m), Y0inv)  # coefficient of Y[d, c]
        coeffs = lin.T.ravel()
        powers = np.eye(m * m, dtype=np.int64)
        p = Polynomial(coeffs, powers, m * m).simplify(1e-15)
        out.append(p - float(P[a] @ np.eye(m).ravel()))
    return out


def prescribe_jet_function(p: JetPrescription, model: ContactModel) -> Polynomial:
    """Quadratic polynomial realizing the prescription at ``p.x0``."""
    if p.nu <= 0:
        raise ValueError("nu must be positive")
    n2 = 2 * model.n
    x0 = np.asarray(p.x0, dtype=float)
    u = np.asarray(p.u, dtype=float)
    ctx = OperatorContext(model, x0, order=2)
    sd = ctx.structure
    tau = 0.5 * (sd.delta + sd.delta.T)
    hess = (0.5 * p.nu * p.v) * tau if p.hessian is None else np.asarray(p.hessian, float)
    xz = (sd.gamma.T @ u) / p.nu if p.xz is None else np.asarray(p.xz, float)
    if np.allclose(u, 0) and p.v == 0 and np.allclose(hess, 0) and np.allclose(xz, 0):
        return Polynomial.zero(model.ambient_dim)

    t1 = np.r_[u, p.v]
    # symmetric targets for (X_i X_j + X_j X_i) f / 2 over the full frame
    T2 = np.zeros((n2 + 1, n2 + 1))
    corr = 0.5 * (np.einsum("ijl,i->lj", sd.w, u) + np.einsum("ilj,i->lj", sd.w, u))
    T2[:n2, :n2] = hess + corr
    xz_sym = xz - 0.5 * (sd.delta @ u + sd.zeta * p.v)
    T2[:n2, n2] = T2[n2, :n2] = xz_sym

    phis = _local_coordinates(model, x0)
    jets = [ctx.jet(q, 2) for q in phis]
    A = np.stack([np.atleast_1d(ctx.frame.apply_all(jq).value) for jq in jets], axis=1)  # A[i, a] = X_i phi_a
    Q = np.stack([ctx.frame.apply_all(ctx.frame.apply_all(jq)).value for jq in jets], axis=-1)
    Q = 0.5 * (Q + np.swapaxes(Q, 0, 1))
    g = np.linalg.solve(A, t1)
    rhs = T2 - np.einsum("ija,a->ij", Q, g)
    Ainv = np.linalg.inv(A)
    S = Ainv @ rhs @ Ainv.T
    S = 0.5 * (S + S.T)

    f = Polynomial.zero(model.ambient_dim)
    for a, pa in enumerate(phis):
        f = f + pa * float(g[a])
        for b, pb in enumerate(phis):
            if S[a, b] != 0.0:
                f = f + pa * pb * float(0.5 * S[a, b])
    return f.simplify(1e-300)


def prescription_residual(p: JetPrescription, model: ContactModel, f: ScalarField) -> float:
    """Largest deviation of ``f``'s derivatives at ``x0`` from the prescription."""
    n2 = 2 * model.n
    ctx = OperatorContext(model, np.asarray(p.x0, float), order=2)
    sd = ctx.structure
    d = ctx.derivatives(f)
    tau = 0.5 * (sd.delta + sd.delta.T)
    u = np.asarray(p.u, float)
    hess = (0.5 * p.nu * p.v) * tau if p.hessian is None else np.asarray(p.hessian, float)
    xz = (sd.gamma.T @ u) / p.nu if p.xz is None else np.asarray(p.xz, float)
    errs = [
        np.abs(d["d1"][:n2] - u).max(),
        abs(d["d1"][n2] - p.v),
        np.abs(horizontal_hessian(ctx, d) - hess).max(),
        np.abs(d["d2"][:n2, n2] - xz).max(),
    ]
    return float(max(errs))


# ---------------------------------------------------------------------------
# curvature-dimension slack


def cd_inequality_check(ctx: OperatorContext, f: ScalarField, nu: float, constants, form: str = "published") -> float:
    """``Gamma_2 + nu Gamma_2^Z`` minus the lower bound built from ``constants``.

    ``form="published"`` uses the bound exactly as published,
    ``(c1 - 1/nu) Gamma - (c2 + c3 nu) sqrt(Gamma Gamma^Z) + (n/2 - iota nu^2 / 4) Gamma^Z``.
    ``form="corrected"`` uses the bound that the Bochner identities actually
    give, ``(c1 - 1/nu) Gamma - (sqrt(c2) + sqrt(c3) nu) sqrt(Gamma Gamma^Z)
    + (n/2 - u nu^2) Gamma^Z`` with ``u`` a bound on the squared Frobenius norm
    of the torsion.  Both include ``(Lf)^2 / 2n``.
    """
    if nu <= 0:
        raise ValueError("nu must be positive")
    g2, g2z = gamma2_forms(ctx, f)
    gh, gv = gamma_forms(ctx, f)
    Lf = apply_L(ctx, f)
    n = ctx.n
    c = constants
    if form == "published":
        mix = c.c2 + c.c3 * nu
        vert = 0.5 * n - 0.25 * c.iota * nu * nu
    elif form == "corrected":
        mix = math.sqrt(c.c2) + math.sqrt(c.c3) * nu
        vert = 0.5 * n - c.tau_frob * nu * nu
    else:
        raise ValueError(f"unknown form {form!r}")
    bound = Lf * Lf / (2 * n) + (c.c1 - 1.0 / nu) * gh - mix * math.sqrt(max(gh * gv, 0.0)) + vert * gv
    return float(g2 + nu * g2z - bound)


def converse_equality(ctx_model: ContactModel, x0, u, nu: float) -> dict:
    """Evaluate ``Gamma_2 + nu Gamma_2^Z`` on the prescribed function with ``v = 0``.

    Returns the value, the symmetric curvature form at ``u`` and ``|u|^2 / nu``.
    """
    p = JetPrescription(np.asarray(x0, float), np.asarray(u, float), 0.0, nu)
    f = prescribe_jet_function(p, ctx_model)
    ctx = OperatorContext(ctx_model, p.x0)
    g2, g2z = gamma2_forms(ctx, f)
    Rs = ctx.geometry.ric_sym
    u = np.asarray(u, float)
    return {"lhs": g2 + nu * g2z, "curvature": float(u @ Rs @ u), "gamma_over_nu": float(u @ u / nu),
            "prescription_residual": prescription_residual(p, ctx_model, f)}


# ---------------------------------------------------------------------------
# verification sweeps

IDENTITY_TOL = 1e-8
CD_TOL = 1e-8
NU_VALUES = (0.1, 1.0, 10.0)


def sample_pair(model: ContactModel, seed: int, k: int, degree: int = 3) -> tuple[np.ndarray, Polynomial]:
    """The ``k``-th (point, random polynomial) pair of a sweep; reproducible from ``(seed, k)``."""
    rng = np.random.default_rng([int(seed), int(k)])
    x = model.random_point(rng, 1.0 if model.kind == "chart" else 0.7)
    f = Polynomial.random(rng, model.ambient_dim, degree, n_terms=min(20, _monomial_count(model.ambient_dim, degree)))
    return x, f


def _monomial_count(dim: int, degree: int) -> int:
    return math.comb(dim + degree, degree)


def _relative(a: float, b: float) -> float:
    return abs(a - b) / max(1.0, abs(a), abs(b))


@dataclass
class SweepReport:
    model: str
    count: int
    seed: int
    maxima: dict = field(default_factory=dict)
    witnesses: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(self.maxima[k] <= self.tolerances[k] for k in self.maxima)

    def failures(self) -> list[str]:
        return [k for k in self.maxima if self.maxima[k] > self.tolerances[k]]

    def to_dict(self) -> dict:
        return {"model": self.model, "count": self.count, "seed": self.seed, "ok": self.ok,
                "maxima": dict(self.maxima), "tolerances": dict(self.tolerances),
                "witnesses": {k: dict(v) for k, v in self.witnesses.items()}}

    def _record(self, key: str, value: float, witness: dict, tol: float):
        self.tolerances[key] = tol
        if key not in self.maxima or value > self.maxima[key]:
            self.maxima[key] = float(value)
            self.witnesses[key] = witness


def verify_bochner(model: ContactModel, count: int = 100, seed: int = 0, ric_override=None,
                   tol: float = IDENTITY_TOL) -> SweepReport:
    """Sweep random cubic ``f`` and points through both Bochner identities and the ``Z^2`` identity.

    Residuals are relative: ``|a - b| / max(1, |a|, |b|)``.  ``ric_override`` is
    a callable ``StructureData -> matrix`` substituted for the curvature matrix,
    used to check that a wrong curvature is caught.
    """
    rep = SweepReport(model.name, count, seed)
    for k in range(count):
        x, f = sample_pair(model, seed, k)
        ctx = OperatorContext(model, x)
        g2, g2z = gamma2_forms(ctx, f)
        ric = None if ric_override is None else ric_override(ctx.structure)
        witness = {"index": k, "point": [float(v) for v in x], "f_seed": [int(seed), k]}
        rep._record("horizontal", _relative(g2, bochner_horizontal_rhs(ctx, f, ric=ric)), witness, tol)
        rep._record("vertical", _relative(g2z, bochner_vertical_rhs(ctx, f)), witness, tol)
        lam = float(np.random.default_rng([int(seed), k, 1]).uniform(0.5, 2.0))
        rep._record("rescaled", rescaled_forms(ctx, f, lam).identity_residual, dict(witness, lam=lam), tol)
    return rep


def verify_cd(model: ContactModel, constants, count: int = 500, seed: int = 0, form: str = "corrected",
              tol: float = CD_TOL) -> SweepReport:
    """Worst slack of the curvature-dimension bound over ``count`` (f, point, nu) tuples.

    The reported maximum is ``-min slack`` so that the report is ``ok`` when
    no slack falls below ``-tol``.
    """
    rep = SweepReport(model.name, count, seed)
    for k in range(count):
        x, f = sample_pair(model, seed, k)
        nu = NU_VALUES[k % len(NU_VALUES)]
        slack = cd_inequality_check(OperatorContext(model, x), f, nu, constants, form=form)
        witness = {"index": k, "point": [float(v) for v in x], "f_seed": [int(seed), k], "nu": nu,
                   "slack": slack}
        rep._record(f"cd_{form}", -slack, witness, tol)
    return rep


def verify_converse(model: ContactModel, count: int = 50, seed: int = 0, form: str = "corrected",
                    tol: float = IDENTITY_TOL) -> SweepReport:
    """Prescribed-jet sweep comparing ``Gamma_2 + nu Gamma_2^Z`` with the curvature form at ``u``.

    ``form="published"`` expects equality with ``Sym(R)(u, u)``; ``form="corrected"``
    includes the ``-|u|^2 / nu`` contribution of the mixed derivatives.
    """
    if form not in ("published", "corrected"):
        raise ValueError(f"unknown form {form!r}")
    rep = SweepReport(model.name, count, seed)
    for k in range(count):
        rng = np.random.default_rng([int(seed), int(k), 2])
        x = model.random_point(rng, 1.0 if model.kind == "chart" else 0.7)
        u = rng.standard_normal(2 * model.n)
        nu = float(10.0 ** rng.uniform(-1.0, 1.0))
        r = converse_equality(model, x, u, nu)
        target = r["curvature"] - (r["gamma_over_nu"] if form == "corrected" else 0.0)
        witness = {"index": k, "point": [float(v) for v in x], "u": [float(v) for v in u], "nu": nu,
                   "lhs": r["lhs"], "target": target}
        rep._record(f"converse_{form}", _relative(r["lhs"], target), witness, tol)
        rep._record("prescription", r["prescription_residual"], witness, tol)
    return rep
