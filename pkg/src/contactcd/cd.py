"""Curvature bounds, CD parameters and the certificates derived from them."""

from __future__ import annotations

import hashlib
import math
from dataclasses import asdict, dataclass, field
from typing import Iterable

import numpy as np
from scipy.optimize import minimize

from .frame import ContactModel, LieGroupModel, check_adapted_frame, structure_functions
from .geometry import geometry_data

POSITIVE_TOL = 1e-12
FORMS = ("corrected", "published")
OBJECTIVES = ("spectral_gap", "myers_margin", "c_lambda")


class CdError(ValueError):
    pass


@dataclass(frozen=True)
class CdConstants:
    """Sampled bounds on the curvature tensors.

    ``c1`` lower-bounds the symmetric curvature form, ``c2`` and ``c3`` bound
    ``|W|^2`` and ``|V|^2``, ``iota`` bounds the squared operator norm of the
    torsion, ``alpha`` the top eigenvalue of ``nabla_Z tau`` and ``tau_frob``
    the squared Frobenius norm of the torsion.
    """

    c1: float
    c2: float
    c3: float
    iota: float
    alpha: float
    n: int
    tau_frob: float = 0.0
    kappa: float = 1.0
    n_samples: int = 1
    sample_hash: str = ""

    def as_tuple(self) -> tuple:
        return (self.c1, self.c2, self.c3, self.iota, self.alpha)


@dataclass(frozen=True)
class CdParams:
    rho1: float
    rho2: float
    rho3: float
    kappa: float
    m: float
    z: float | None = None
    w: float | None = None
    form: str = "corrected"

    @property
    def sasakian_limit(self) -> bool:
        return self.rho3 == 0.0

    @property
    def rho2_positive(self) -> bool:
        return self.rho2 > 0.0

    def as_tuple(self) -> tuple:
        return (self.rho1, self.rho2, self.rho3, self.kappa, self.m)


# ---------------------------------------------------------------------------
# constants


def _chop(v: float, tol: float = 1e-13) -> float:
    """Snap round-off noise to zero so exact zeros stay exact."""
    return 0.0 if abs(v) < tol else float(v)


def pointwise_constants(model: ContactModel, x) -> dict:
    sd = structure_functions(model, x)
    gd = geometry_data(sd)
    ric_min = float(np.linalg.eigvalsh(gd.ric_sym)[0])
    return {
        "c1": ric_min,
        "c2": float(gd.W @ gd.W),
        "c3": float(gd.V @ gd.V),
        "iota": float(np.linalg.eigvalsh(gd.tau.T @ gd.tau)[-1]),
        "alpha": float(np.linalg.eigvalsh(gd.nablaZtau)[-1]),
        "tau_frob": gd.uCoeff,
    }


def default_sampler(model: ContactModel, samples: int = 64, seed: int = 0, radius: float = 1.0) -> list:
    """Deterministic sample points: the base point plus uniform draws in a box."""
    if isinstance(model.backend, LieGroupModel):
        return [model.default_point()]
    rng = np.random.default_rng(seed)
    pts = [model.default_point()]
    pts += [radius * rng.uniform(-1.0, 1.0, model.ambient_dim) for _ in range(max(samples - 1, 0))]
    return pts


def estimate_constants(model: ContactModel, sampler: Iterable | int | None = None, seed: int = 0,
                       tol: float = 1e-10) -> CdConstants:
    """Inf/sup of the pointwise bounds over the sample points."""
    if sampler is None or isinstance(sampler, int):
        points = default_sampler(model, 64 if sampler is None else sampler, seed)
    else:
        points = [np.asarray(p, dtype=float) for p in sampler]
    if not points:
        raise CdError("empty sample")
    h = hashlib.sha256()
    rows = []
    for p in points:
        rep = check_adapted_frame(model, p, tol)
        if not rep.ok:
            bad = ", ".join(f"{f.name}={f.violation:.3g}" for f in rep.failures())
            raise CdError(f"frame diagnostics failed at {np.asarray(p).tolist()}: {bad}")
        h.update(np.ascontiguousarray(p, dtype=float).tobytes())
        rows.append(pointwise_constants(model, p))
    col = {k: np.array([r[k] for r in rows]) for k in rows[0]}
    return CdConstants(
        c1=_chop(col["c1"].min()),
        c2=_chop(max(col["c2"].max(), 0.0)),
        c3=_chop(max(col["c3"].max(), 0.0)),
        iota=_chop(max(col["iota"].max(), 0.0)),
        alpha=_chop(max(col["alpha"].max(), 0.0)),
        n=model.n,
        tau_frob=_chop(max(col["tau_frob"].max(), 0.0)),
        n_samples=len(points),
        sample_hash=h.hexdigest()[:16],
    )


# ---------------------------------------------------------------------------
# CD parameters


def cd_params(c: CdConstants, z: float = 1.0, w: float = 1.0, form: str = "corrected") -> CdParams:
    """``(rho1, rho2, rho3, kappa, m)`` for a choice of the splitting weights ``z, w``.

    ``form="published"`` follows the published formulas with ``c2, c3`` and
    ``iota / 4``; ``form="corrected"`` uses ``sqrt(c2)``, ``sqrt(c3)`` and the
    squared Frobenius norm of the torsion, which is what the Bochner identities
    support.  Terms whose constant vanishes are dropped so ``z``/``w`` do not
    add spurious penalties.
    """
    if z <= 0 or w <= 0:
        raise CdError("z and w must be positive")
    if form not in FORMS:
        raise CdError(f"unknown form {form!r}")
    if form == "published":
        a2, a3, tors = c.c2, c.c3, 0.25 * c.iota
    else:
        a2, a3, tors = math.sqrt(c.c2), math.sqrt(c.c3), c.tau_frob
    rho1, rho2, rho3 = c.c1, 0.5 * c.n, tors
    if a2 > 0:
        rho1 -= 0.5 * a2 * z
        rho2 -= 0.5 * a2 / z
    if a3 > 0:
        rho1 -= 0.5 * a3 * w
        rho3 += 0.5 * a3 / w
    return CdParams(rho1, rho2, rho3, c.kappa, 2.0 * c.n, z if a2 > 0 else None, w if a3 > 0 else None, form)


# ---------------------------------------------------------------------------
# Myers


def c_lambda(p: CdParams, lam: float, iota: float, alpha: float) -> float:
    s = lam * lam
    beta = 2.0 * iota + alpha
    return min(p.rho1 - p.kappa / s - beta * s, p.rho2 / s - p.rho3 * s)


def myers_certificate(p: CdParams, iota: float, alpha: float) -> dict:
    """Maximize ``c(lambda)`` over ``lambda > 0`` in closed form.

    The first branch is concave in ``s = lambda^2`` and the second decreasing,
    so the maximum of their minimum sits at the peak of the first branch or at
    a crossing.
    """
    beta = 2.0 * iota + alpha
    cands = []
    if beta > 0:
        cands.append(math.sqrt(p.kappa / beta))
    a, b, cc = beta - p.rho3, -p.rho1, p.kappa + p.rho2
    if abs(a) < 1e-300:
        if b != 0:
            cands.append(-cc / b)
    else:
        disc = b * b - 4 * a * cc
        if disc >= 0:
            r = math.sqrt(disc)
            cands += [(-b - r) / (2 * a), (-b + r) / (2 * a)]
    cands = [s for s in cands if s > 0 and math.isfinite(s)]
    best_s, best = None, -math.inf
    for s in cands:
        v = c_lambda(p, math.sqrt(s), iota, alpha)
        if v > best:
            best_s, best = s, v
    if best_s is None:
        # supremum not attained (e.g. approached as lambda -> infinity); scan a wide grid
        grid = np.exp(np.linspace(math.log(1e-6), math.log(1e6), 241))
        best = max(c_lambda(p, math.sqrt(s), iota, alpha) for s in grid)
    threshold = None
    if p.rho2 > 0:
        if p.rho3 > 0:
            threshold = math.sqrt(p.rho3 / p.rho2) * p.kappa + math.sqrt(p.rho2 / p.rho3) * beta
        elif beta == 0:
            threshold = 0.0
        else:
            threshold = math.inf
    published_holds = threshold is not None and p.rho1 > threshold
    holds = p.rho2 > 0 and best > POSITIVE_TOL
    return {
        "holds": bool(holds),
        "margin": float(best),
        "lambda": math.sqrt(best_s) if best_s is not None else None,
        "c_lambda": float(best),
        "attained": best_s is not None,
        "published_threshold": threshold,
        "published_threshold_holds": bool(published_holds),
        "criteria_agree": bool(published_holds == holds),
    }


# ---------------------------------------------------------------------------
# gradient bound, spectral gap, volume


def gap_and_poincare(p: CdParams) -> dict:
    if p.rho2 <= 0:
        return {"sigma": None, "deltaCoeff": None, "gapLowerBound": None, "poincareConstant": None}
    root = math.sqrt(p.rho2 * p.rho3)
    sigma = (2 * p.rho1 * p.rho2 - 2 * p.kappa * root) / (p.rho2 + p.kappa)
    delta = (sigma + math.sqrt(sigma * sigma + 16 * p.rho2 * p.rho3)) / (4 * p.rho2)
    gap = (p.rho1 * p.rho2 - p.kappa * root) / (p.rho2 + p.kappa)
    if gap > POSITIVE_TOL:
        return {"sigma": sigma, "deltaCoeff": delta, "gapLowerBound": gap, "poincareConstant": 1.0 / gap}
    return {"sigma": sigma, "deltaCoeff": delta, "gapLowerBound": None, "poincareConstant": None}


def volume_certificate(c: CdConstants, p: CdParams) -> dict:
    finite = p.rho2 > 0 and p.rho1 - p.kappa * math.sqrt(p.rho3 / p.rho2) > POSITIVE_TOL
    grows = math.isfinite(c.iota) and math.isfinite(c.alpha)
    return {"finiteVolume": bool(finite), "expGrowth": bool(grows)}


# ---------------------------------------------------------------------------
# optimization over (z, w)


def _objective_value(c: CdConstants, z: float, w: float, objective: str, form: str) -> tuple[float, dict]:
    p = cd_params(c, z, w, form)
    if p.rho2 <= 0:
        return -math.inf, {}
    if objective == "spectral_gap":
        root = math.sqrt(p.rho2 * p.rho3)
        return (p.rho1 * p.rho2 - p.kappa * root) / (p.rho2 + p.kappa), {}
    m = myers_certificate(p, c.iota, c.alpha)
    return m["margin"], m


@dataclass
class ZwOptimum:
    z: float | None
    w: float | None
    lam: float | None
    value: float
    params: CdParams
    positive: bool


def optimize_zw(c: CdConstants, objective: str = "spectral_gap", form: str = "corrected",
                grid: int = 61) -> ZwOptimum:
    """Log-grid search over ``z, w`` in ``[1e-3, 1e3]`` refined by Nelder-Mead."""
    if objective not in OBJECTIVES:
        raise CdError(f"unknown objective {objective!r}; choose from {OBJECTIVES}")
    lo, hi = math.log(1e-3), math.log(1e3)
    use_z = (c.c2 > 0)
    use_w = (c.c3 > 0)
    zs = np.exp(np.linspace(lo, hi, grid)) if use_z else np.array([1.0])
    ws = np.exp(np.linspace(lo, hi, grid)) if use_w else np.array([1.0])
    best = (-math.inf, 1.0, 1.0)
    for z in zs:
        for w in ws:
            v, _ = _objective_value(c, float(z), float(w), objective, form)
            if v > best[0]:
                best = (v, float(z), float(w))
    _, z0, w0 = best
    if use_z or use_w:
        free = [i for i, u in enumerate((use_z, use_w)) if u]
        x0 = np.log([z0, w0])[free]

        def unpack(t):
            zz, ww = z0, w0
            vals = np.exp(np.clip(t, lo, hi))
            k = 0
            if use_z:
                zz = float(vals[k])
                k += 1
            if use_w:
                ww = float(vals[k])
            return zz, ww

        def neg(t):
            v, _ = _objective_value(c, *unpack(t), objective, form)
            return 1e300 if not math.isfinite(v) else -v

        res = minimize(neg, x0, method="Nelder-Mead", options={"xatol": 1e-10, "fatol": 1e-14, "maxiter": 2000})
        if -res.fun >= best[0]:
            z0, w0 = unpack(res.x)
    value, m = _objective_value(c, z0, w0, objective, form)
    p = cd_params(c, z0, w0, form)
    lam = m.get("lambda") if m else myers_certificate(p, c.iota, c.alpha)["lambda"]
    return ZwOptimum(p.z, p.w, lam, value, p, bool(value > POSITIVE_TOL))


# ---------------------------------------------------------------------------
# full report


@dataclass
class CertificateReport:
    constants: CdConstants
    params: CdParams
    myers: dict
    sigma: float | None
    deltaCoeff: float | None
    spectralGapLowerBound: float | None
    poincareConstant: float | None
    finiteVolume: bool
    volumeGrowth: dict
    objective: str
    objective_value: float
    notes: list = field(default_factory=list)

    @property
    def compact(self) -> bool:
        return bool(self.myers["holds"])

    def certificates_absent(self) -> bool:
        return (not self.myers["holds"] and self.spectralGapLowerBound is None
                and self.poincareConstant is None and not self.finiteVolume)

    def to_dict(self) -> dict:
        d = {
            "constants": asdict(self.constants),
            "params": {**asdict(self.params), "cd": list(self.params.as_tuple()),
                       "sasakian_limit": self.params.sasakian_limit},
            "myers": self.myers,
            "compact": self.compact,
            "sigma": self.sigma,
            "deltaCoeff": self.deltaCoeff,
            "spectralGapLowerBound": self.spectralGapLowerBound,
            "poincareConstant": self.poincareConstant,
            "finiteVolume": self.finiteVolume,
            "volumeGrowth": self.volumeGrowth,
            "objective": self.objective,
            "objective_value": self.objective_value if math.isfinite(self.objective_value) else None,
            "notes": list(self.notes),
        }
        return d


def certify(c: CdConstants, objective: str = "spectral_gap", form: str = "corrected") -> CertificateReport:
    """Optimize ``(z, w)`` for ``objective`` and derive every certificate from those parameters."""
    opt = optimize_zw(c, objective, form)
    p = opt.params
    my = myers_certificate(p, c.iota, c.alpha)
    if objective == "spectral_gap":
        # Myers is judged with its own best (z, w)
        my = myers_certificate(optimize_zw(c, "myers_margin", form).params, c.iota, c.alpha)
    gp = gap_and_poincare(p)
    vol = volume_certificate(c, p)
    notes = []
    if p.sasakian_limit:
        notes.append("Sasakian limit: rho3 = 0")
    if not opt.positive:
        notes.append(f"no positive certificate for objective {objective}")
    if not my["criteria_agree"]:
        notes.append("Myers: closed-form threshold and sup c(lambda) > 0 disagree")
    vg = {"holds": vol["expGrowth"], "C1": "qualitative", "C2": "qualitative"}
    return CertificateReport(c, p, my, gp["sigma"], gp["deltaCoeff"], gp["gapLowerBound"], gp["poincareConstant"],
                             vol["finiteVolume"], vg, objective, opt.value, notes)


def analyze(model: ContactModel, samples: int = 64, seed: int = 0, objective: str = "spectral_gap",
            form: str = "corrected") -> CertificateReport:
    return certify(estimate_constants(model, samples, seed), objective, form)
