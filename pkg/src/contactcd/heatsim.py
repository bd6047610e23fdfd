"""Monte Carlo simulation of the diffusion generated by ``L = sum X_i^2 + X_0``.

The Stratonovich equation ``dY = X_0(Y) dt + sqrt(2) sum_i X_i(Y) o dB^i`` has
generator ``L``.  Chart models are integrated with the stochastic Heun
predictor-corrector; group models step exactly on the group with
``Y <- Y expm(sqrt(2) sum dB^i A_i + dt A_0)``.

Every path draws its Brownian increments from its own generator seeded by
``(seed, path index)``, so ensembles do not depend on how paths are chunked or
how many workers run them.
"""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from statistics import NormalDist
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import expm

from .cd import CdParams, gap_and_poincare
from .frame import ChartModel, ContactModel, FrameError, LieGroupModel
from .jets import Polynomial, ScalarField

CHUNK = 1024
INNER_GROUPS = 8
WORKERS_ENV = "CONTACTCD_WORKERS"
NOISE_SCALE = math.sqrt(2.0)
GENERATOR_NOTE = "L = sum X_i^2 + X_0 simulated as Stratonovich SDE with noise fields sqrt(2) X_i and drift X_0"


class SimulationError(ValueError):
    pass


@dataclass
class SimConfig:
    model: ContactModel
    start: np.ndarray | None = None  # one point or an array of per-path points
    t: float = 1.0
    dt: float = 0.01
    paths: int = 1000
    seed: int = 0
    escape_radius: float | None = None
    first_variation: bool = False
    record_times: Sequence[float] = ()
    path_offset: int = 0  # first substream index, lets independent ensembles share a seed

    def __post_init__(self):
        if self.dt <= 0:
            raise SimulationError("dt must be positive")
        if self.t < 0:
            raise SimulationError("t must be non-negative")
        if self.paths < 1:
            raise SimulationError("path count must be at least 1")

    @property
    def n_steps(self) -> int:
        return 0 if self.t == 0 else max(1, int(round(self.t / self.dt)))

    @property
    def step(self) -> float:
        return self.t / self.n_steps if self.n_steps else 0.0

    def starts(self) -> np.ndarray:
        x0 = self.model.default_point() if self.start is None else np.asarray(self.start, dtype=float)
        if x0.ndim == 1:
            return np.broadcast_to(x0, (self.paths, x0.size)).copy()
        if x0.shape[0] != self.paths:
            raise SimulationError("per-path start array must have one row per path")
        return x0.copy()


@dataclass
class PathEnsemble:
    terminal: np.ndarray
    escaped: np.ndarray
    escape_time: np.ndarray
    substreams: np.ndarray
    alpha: np.ndarray | None = None
    snapshots: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    @property
    def escaped_fraction(self) -> float:
        return float(self.escaped.mean())


def _workers() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def _noise(seed: int, index: int, steps: int, k: int) -> np.ndarray:
    rng = np.random.default_rng([int(seed), int(index)])
    return rng.standard_normal((steps, k))


# ---------------------------------------------------------------------------
# batched frame data for chart models


def _chart_structure(be: ChartModel, Y: np.ndarray, n2: int, full: bool = False):
    """Frame values and bracket coefficients at many points.

    Returns ``F`` of shape ``(P, fields, D)`` and either the trace vector
    ``t_i = sum_k w_ik^k`` or (``full=True``) the whole coefficient table
    ``C[p, i, j, m]``.
    """
    F = be.field_values(Y)
    dF = be.field_jacobians(Y)
    T = np.einsum("pib,pjab->pija", F, dF)
    B = T - np.swapaxes(T, 1, 2)
    P, m, _, D = B.shape
    Ft = np.swapaxes(F, 1, 2)
    C = np.linalg.solve(Ft, B.reshape(P, m * m, D).transpose(0, 2, 1)).transpose(0, 2, 1).reshape(P, m, m, D)
    trace = np.einsum("pikk->pi", C[:, :n2, :n2, :n2])
    return F, (C if full else None), trace


def _chart_coeffs(be: ChartModel, Y: np.ndarray, n2: int):
    F, _, trace = _chart_structure(be, Y, n2)
    drift = -np.einsum("pi,pia->pa", trace, F[:, :n2])
    return drift, NOISE_SCALE * F[:, :n2]


def _chart_omegas(be: ChartModel, Y: np.ndarray, n2: int, h: float = 1e-5):
    """Matrices ``Omega_k[l, i]`` (bracket of driving field ``k`` with ``X_i``) at many points."""
    F, C, trace = _chart_structure(be, Y, n2, full=True)
    m = n2 + 1
    om = NOISE_SCALE * np.transpose(C[:, :n2], (0, 1, 3, 2))  # om[p, k, l, i] = C[p, k, i, l]
    dtrace = np.zeros((len(Y), m, n2))  # dtrace[p, i, l] = X_i t_l
    for i in range(m):
        _, _, tp = _chart_structure(be, Y + h * F[:, i], n2)
        _, _, tm = _chart_structure(be, Y - h * F[:, i], n2)
        dtrace[:, i] = (tp - tm) / (2 * h)
    om0 = -np.einsum("pj,pjil->pli", trace, C[:, :n2])
    om0[:, :n2, :] += np.transpose(dtrace, (0, 2, 1))
    return om, om0


# ---------------------------------------------------------------------------
# integrators


def _expm_batch(M: np.ndarray, terms: int = 12) -> np.ndarray:
    """Matrix exponential of many small matrices by scaled Taylor series.

    Per-step increments have norm around ``sqrt(dt)``, where a truncated series
    with a few squarings is accurate to rounding and several times faster than
    the general Pade routine; anything large is passed on to scipy.
    """
    norm = np.abs(M).sum(axis=-1).max(initial=0.0)
    if norm > 4.0:
        return expm(M)
    sq = max(0, int(math.ceil(math.log2(norm / 0.25)))) if norm > 0.25 else 0
    A = M / 2.0 ** sq
    eye = np.eye(M.shape[-1])
    E = eye + A / terms
    for k in range(terms - 1, 0, -1):
        E = eye + (A @ E) / k
    for _ in range(sq):
        E = E @ E
    return E


def _group_constants(model: ContactModel):
    be: LieGroupModel = model.backend
    n2 = 2 * model.n
    C = be.structure_constants()
    trace = np.einsum("ikk->i", be.w)
    A0 = -np.einsum("i,iab->ab", trace, be.generators[:n2])
    om = NOISE_SCALE * np.transpose(C[:n2], (0, 2, 1))  # om[k, l, i] = C[k, i, l]
    om0 = -np.einsum("j,jil->li", trace, C[:n2])
    return be, n2, A0, om, om0


def _run_chunk(cfg: SimConfig, idx: np.ndarray, X0: np.ndarray, record_steps: dict):
    model = cfg.model
    n2 = 2 * model.n
    steps, h = cfg.n_steps, cfg.step
    sqh = math.sqrt(h)
    P = len(idx)
    noise = np.stack([_noise(cfg.seed, cfg.path_offset + i, steps, n2) for i in idx], axis=1) if steps else \
        np.zeros((0, P, n2))
    Y = X0.copy()
    escaped = np.zeros(P, dtype=bool)
    etime = np.full(P, np.nan)
    m = n2 + 1
    alpha = np.broadcast_to(np.eye(m), (P, m, m)).copy() if cfg.first_variation else None
    snaps = {}
    if 0 in record_steps.values():
        for tm, s in record_steps.items():
            if s == 0:
                snaps[tm] = Y.copy()

    if isinstance(model.backend, LieGroupModel):
        be, _, A0, om, om0 = _group_constants(model)
        mm = be.m
        G = be.generators[:n2]
        Ymat = Y.reshape(P, mm, mm)
        for s in range(steps):
            dB = sqh * noise[s]
            inc = NOISE_SCALE * np.einsum("pi,iab->pab", dB, G) + h * A0
            Ymat = Ymat @ _expm_batch(inc)
            if alpha is not None:
                gen = np.einsum("pk,kli->pli", dB, om) + h * om0
                alpha = _expm_batch(-gen) @ alpha
            for tm, st in record_steps.items():
                if st == s + 1:
                    snaps[tm] = Ymat.reshape(P, -1).copy()
        Y = Ymat.reshape(P, -1)
    else:
        be = model.backend
        R = cfg.escape_radius
        for s in range(steps):
            live = ~escaped
            if not live.any():
                break
            y = Y[live]
            dB = sqh * noise[s][live]
            try:
                a1, b1 = _chart_coeffs(be, y, n2)
                yp = y + a1 * h + np.einsum("pi,pia->pa", dB, b1)
                a2, b2 = _chart_coeffs(be, yp, n2)
            except np.linalg.LinAlgError as exc:
                raise FrameError(f"singular frame matrix on a path at step {s}") from exc
            ynew = y + 0.5 * (a1 + a2) * h + 0.5 * np.einsum("pi,pia->pa", dB, b1 + b2)
            if alpha is not None:
                al = alpha[live]
                o1, o01 = _chart_omegas(be, y, n2)
                g1 = np.einsum("pk,pkli->pli", dB, o1) + h * o01
                ap = al - np.einsum("pli,pij->plj", g1, al)
                o2, o02 = _chart_omegas(be, yp, n2)
                g2 = np.einsum("pk,pkli->pli", dB, o2) + h * o02
                alpha[live] = al - 0.5 * (np.einsum("pli,pij->plj", g1, al) + np.einsum("pli,pij->plj", g2, ap))
            Y[live] = ynew
            if R is not None:
                out = live.copy()
                out[live] = np.linalg.norm(ynew, axis=1) > R
                escaped |= out
                etime[out] = (s + 1) * h
            for tm, st in record_steps.items():
                if st == s + 1:
                    snaps[tm] = Y.copy()
    return Y, escaped, etime, alpha, snaps


def simulate_paths(cfg: SimConfig) -> PathEnsemble:
    """Integrate ``cfg.paths`` independent paths up to ``cfg.t``."""
    X0 = cfg.starts()
    record_steps = {}
    for tm in cfg.record_times:
        s = int(round(tm / cfg.step)) if cfg.n_steps else 0
        if s < 0 or s > cfg.n_steps or (cfg.n_steps and abs(s * cfg.step - tm) > 1e-9 * max(1.0, tm)):
            raise SimulationError(f"record time {tm} is not on the step grid")
        record_steps[float(tm)] = s
    idx = np.arange(cfg.paths)
    chunks = [idx[i:i + CHUNK] for i in range(0, cfg.paths, CHUNK)]
    work = lambda c: _run_chunk(cfg, c, X0[c], record_steps)  # noqa: E731
    if _workers() > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(_workers()) as ex:
            results = list(ex.map(work, chunks))
    else:
        results = [work(c) for c in chunks]
    Y = np.concatenate([r[0] for r in results])
    esc = np.concatenate([r[1] for r in results])
    et = np.concatenate([r[2] for r in results])
    alpha = np.concatenate([r[3] for r in results]) if cfg.first_variation else None
    snaps = {tm: np.concatenate([r[4][tm] for r in results]) for tm in record_steps}
    meta = {"generator": GENERATOR_NOTE, "integrator": "group exponential" if cfg.model.kind == "lie" else "Heun",
            "steps": cfg.n_steps, "dt": cfg.step}
    return PathEnsemble(Y, esc, et, idx + cfg.path_offset, alpha, snaps, meta)


def dump_csv(ens: PathEnsemble, path) -> None:
    """Terminal points, one row per path, with escape flags."""
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        d = ens.terminal.shape[1]
        wr.writerow(["path"] + [f"y{a}" for a in range(d)] + ["escaped", "escape_time"])
        for i in range(len(ens.terminal)):
            wr.writerow([int(ens.substreams[i])] + [repr(float(v)) for v in ens.terminal[i]]
                        + [int(ens.escaped[i]), "" if np.isnan(ens.escape_time[i]) else repr(float(ens.escape_time[i]))])


# ---------------------------------------------------------------------------
# estimators


def _values(f, Y: np.ndarray) -> np.ndarray:
    return np.asarray(f(Y), dtype=float)


def estimate_semigroup(cfg: SimConfig, f: ScalarField | Callable, ens: PathEnsemble | None = None) -> dict:
    """``P_t f`` at the start point; escaped paths contribute zero."""
    ens = simulate_paths(cfg) if ens is None else ens
    v = np.where(ens.escaped, 0.0, _values(f, ens.terminal))
    return {"mean": float(v.mean()), "stderr": float(v.std(ddof=1) / math.sqrt(len(v))) if len(v) > 1 else 0.0,
            "escaped_fraction": ens.escaped_fraction}


def frame_gradients(model: ContactModel, f: ScalarField, Y: np.ndarray) -> np.ndarray:
    """``X_i f`` for all ``2n+1`` frame fields at many points, shape ``(P, 2n+1)``."""
    grad = np.asarray(f.gradient(Y))
    if isinstance(model.backend, LieGroupModel):
        be = model.backend
        mm = be.m
        tangent = np.einsum("pab,ibc->piac", Y.reshape(-1, mm, mm), be.generators).reshape(len(Y), -1, mm * mm)
        return np.einsum("pia,pa->pi", tangent, grad)
    F = model.backend.field_values(Y)
    return np.einsum("pia,pa->pi", F, grad)


def gamma_values(model: ContactModel, f: ScalarField, Y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    g = frame_gradients(model, f, Y)
    n2 = 2 * model.n
    return np.sum(g[:, :n2] ** 2, axis=1), g[:, n2] ** 2


def first_variation(cfg: SimConfig) -> np.ndarray:
    """Inverse first-variation matrices ``alpha(t)`` for every path."""
    return simulate_paths(replace(cfg, first_variation=True)).alpha


def omega_bound(model: ContactModel, points: np.ndarray | None = None) -> dict:
    """Growth constant for ``E|alpha(t)|_F <= sqrt(2n+1) exp(rate t)``.

    ``rate = |Omega_0| + sum_k |Omega_k|^2`` with operator norms, maximized over
    ``points`` for chart models.
    """
    n2 = 2 * model.n
    if isinstance(model.backend, LieGroupModel):
        _, _, _, om, om0 = _group_constants(model)
        oms, om0s = om[None], om0[None]
    else:
        pts = np.atleast_2d(model.default_point() if points is None else points)
        oms, om0s = _chart_omegas(model.backend, pts, n2)
    norms = np.linalg.norm(oms, ord=2, axis=(-2, -1))
    rate = np.max(np.linalg.norm(om0s, ord=2, axis=(-2, -1)) + np.sum(norms ** 2, axis=1))
    return {"C1": math.sqrt(n2 + 1), "C2": float(rate)}


# ---------------------------------------------------------------------------
# gradient bound


def _perturbed_starts(model: ContactModel, x: np.ndarray, i: int, h: float) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(model.backend, LieGroupModel):
        be = model.backend
        Y = x.reshape(be.m, be.m)
        A = be.generators[i]
        return (Y @ expm(h * A)).ravel(), (Y @ expm(-h * A)).ravel()
    v = model.backend.field_values(x[None])[0, i]
    return x + h * v, x - h * v


def check_gradient_bound(cfg: SimConfig, f: ScalarField, params: CdParams | dict, form: str = "proof",
                         h: float = 1e-3) -> dict:
    """Monte Carlo test of the semigroup gradient bound at ``cfg.start``.

    ``form="proof"`` tests ``delta Gamma(P_t f) + Gamma^Z(P_t f) <= e^{-sigma t}
    (delta P_t Gamma(f) + P_t Gamma^Z(f))``, which is what the comparison
    argument delivers; ``form="statement"`` moves ``delta`` onto the vertical
    terms as in the published statement.  Frame derivatives of ``P_t f`` use
    common-random-number central differences.
    """
    if isinstance(params, CdParams):
        gp = gap_and_poincare(params)
        sigma, delta = gp["sigma"], gp["deltaCoeff"]
    else:
        sigma, delta = params["sigma"], params["deltaCoeff"]
    if sigma is None or delta is None:
        raise SimulationError("gradient bound needs sigma and delta (rho2 > 0)")
    model = cfg.model
    n2 = 2 * model.n
    x = cfg.model.default_point() if cfg.start is None else np.asarray(cfg.start, float)
    if x.ndim != 1:
        raise SimulationError("gradient bound is checked at a single start point")
    wh, wv = (delta, 1.0) if form == "proof" else (1.0, delta)
    if form not in ("proof", "statement"):
        raise SimulationError(f"unknown form {form!r}")

    base = simulate_paths(replace(cfg, start=x))
    gh, gv = gamma_values(model, f, base.terminal)
    rvals = math.exp(-sigma * cfg.t) * (wh * gh + wv * gv)
    rhs = float(rvals.mean())
    rhs_se = float(rvals.std(ddof=1) / math.sqrt(len(rvals)))

    diffs = []
    for i in range(n2 + 1):
        xp, xm = _perturbed_starts(model, x, i, h)
        ep = simulate_paths(replace(cfg, start=xp))
        em = simulate_paths(replace(cfg, start=xm))
        vp = np.where(ep.escaped, 0.0, _values(f, ep.terminal))
        vm = np.where(em.escaped, 0.0, _values(f, em.terminal))
        diffs.append((vp - vm) / (2 * h))
    D = np.stack(diffs, axis=1)  # per-path difference quotients
    N = len(D)
    g = D.mean(axis=0)
    cov = np.cov(D, rowvar=False) / N
    weights = np.r_[np.full(n2, wh), wv]
    # unbiased square of a mean: g^2 - var(g)
    lhs = float(np.sum(weights * (g ** 2 - np.diag(cov))))
    grad = 2 * weights * g
    lhs_se = float(math.sqrt(max(grad @ cov @ grad, 0.0)))
    se = math.sqrt(lhs_se ** 2 + rhs_se ** 2)
    return {"t": cfg.t, "lhs": lhs, "rhs": rhs, "lhs_se": lhs_se, "rhs_se": rhs_se, "combined_se": se,
            "holds": bool(lhs <= rhs + 3 * se), "sigma": sigma, "delta": delta, "form": form,
            "frame_gradient": g.tolist()}


# ---------------------------------------------------------------------------
# variance decay


def _decay_rate(ts: np.ndarray, A: np.ndarray, B: np.ndarray) -> float:
    """Decay rate of ``Var(P_t f)`` from two independent inner estimates.

    ``A`` and ``B`` hold estimates of ``P_t f`` per outer point (rows) and time
    (columns); their centred cross product estimates the variance without the
    inner Monte Carlo bias.  The rate is minus the slope of a log-linear fit.
    """
    v = np.mean((A - A.mean(axis=0)) * (B - B.mean(axis=0)), axis=0)
    if np.any(v <= 0):
        return math.nan
    return -float(np.polyfit(ts, np.log(v), 1)[0])


def _rate_uncertainty(ts: np.ndarray, groups: np.ndarray, n_boot: int, seed: int) -> dict:
    """Standard error of the rate from both sampling stages.

    ``groups[k]`` holds the inner estimate from the ``k``-th of an even number of
    equal inner groups; the first half of the groups forms ``A`` and the rest
    ``B``.  Outer-point sampling is measured by a bootstrap over rows, inner
    sampling by a delete-one-group jackknife; the two are independent so their
    variances add.
    """
    K = len(groups)
    half = K // 2
    A, B = groups[:half].mean(axis=0), groups[half:].mean(axis=0)
    rng = np.random.default_rng([int(seed), 0xB007])
    boot = np.empty(n_boot)
    for r in range(n_boot):
        k = rng.integers(0, len(A), len(A))
        boot[r] = _decay_rate(ts, A[k], B[k])
    boot = boot[np.isfinite(boot)]
    jack = []
    for k in range(K):
        keep = [g for g in range(K) if g != k]
        a = [g for g in keep if g < half]
        b = [g for g in keep if g >= half]
        jack.append(_decay_rate(ts, groups[a].mean(axis=0), groups[b].mean(axis=0)))
    jack = np.array(jack)
    jack = jack[np.isfinite(jack)]
    se_outer = float(boot.std(ddof=1)) if len(boot) > 1 else math.nan
    se_inner = float(math.sqrt((len(jack) - 1) / len(jack) * np.sum((jack - jack.mean()) ** 2))) \
        if len(jack) > 1 else math.nan
    return {"se_outer": se_outer, "se_inner": se_inner, "se": math.hypot(se_outer, se_inner)}


def _mean_over_inner(f, ys: np.ndarray, G: np.ndarray, block: int = 2_000_000) -> np.ndarray:
    """``mean_j f(y G_j)`` for every outer point ``y``.

    For ``f`` affine in the matrix entries the average moves inside ``f``.
    """
    mm = ys.shape[-1]
    if isinstance(f, Polynomial) and f.degree <= 1:
        return _values(f, (ys @ G.mean(axis=0)).reshape(len(ys), -1))
    out = np.empty(len(ys))
    step = max(1, block // max(len(G), 1))
    for a in range(0, len(ys), step):
        prod = np.einsum("oab,jbc->ojac", ys[a:a + step], G).reshape(-1, mm * mm)
        out[a:a + step] = _values(f, prod).reshape(-1, len(G)).mean(axis=1)
    return out


def variance_decay_rate(cfg: SimConfig, f: ScalarField | Callable, burn_in: float = 6.0,
                        times: Sequence[float] | None = None, outer: int | None = None, n_boot: int = 400,
                        level: float = 0.95) -> dict:
    """Fit the exponential decay rate of ``Var_mu(P_t f)`` on a time grid.

    Outer points approximate the invariant law by a burn-in run from the base
    point.  Left invariance lets a single inner ensemble from the identity
    serve every outer point, ``P_t f(y) = E f(y G_t)``.  The inner ensemble is
    split into groups whose two halves give independent estimates, which
    removes the inner-sampling bias of the variance; the confidence interval
    combines outer and inner sampling error.
    """
    model = cfg.model
    if not isinstance(model.backend, LieGroupModel) or not model.backend.compact:
        raise SimulationError(f"variance decay needs a compact group model; {model.name} is not")
    ts = np.asarray(times if times is not None else np.linspace(cfg.t / 4, cfg.t, 4), dtype=float)
    ts = np.unique(np.maximum(np.round(ts / cfg.dt), 1) * cfg.dt)  # snap onto the step grid
    if len(ts) < 2:
        raise SimulationError("variance decay needs at least two distinct times")
    n_out = outer if outer is not None else max(cfg.paths // 50, 20)
    be = model.backend
    mm = be.m
    outer_cfg = replace(cfg, start=model.default_point(), t=burn_in, paths=n_out, record_times=(),
                        path_offset=cfg.path_offset + 10 * cfg.paths + 1)
    outer_ens = simulate_paths(outer_cfg)
    ys = outer_ens.terminal.reshape(n_out, mm, mm)
    inner = simulate_paths(replace(cfg, start=model.default_point(), t=float(ts.max()),
                                   record_times=tuple(float(v) for v in ts)))
    size = cfg.paths // INNER_GROUPS
    if size < 1:
        raise SimulationError(f"variance decay needs at least {INNER_GROUPS} inner paths")
    groups = np.empty((INNER_GROUPS, n_out, len(ts)))
    for c, tm in enumerate(ts):
        G = inner.snapshots[float(tm)].reshape(-1, mm, mm)
        for k in range(INNER_GROUPS):
            groups[k, :, c] = _mean_over_inner(f, ys, G[k * size:(k + 1) * size])
    half = INNER_GROUPS // 2
    A, B = groups[:half].mean(axis=0), groups[half:].mean(axis=0)
    var = np.mean((A - A.mean(axis=0)) * (B - B.mean(axis=0)), axis=0)
    f_stat = _values(f, outer_ens.terminal)
    if np.allclose(f_stat, f_stat[0]) and np.allclose(var, 0.0):
        return {"degenerate": True, "rateEstimate": None, "CI": None, "halfWidth": None,
                "times": ts.tolist(), "variance": var.tolist()}
    rate = _decay_rate(ts, A, B)
    unc = _rate_uncertainty(ts, groups, n_boot, cfg.seed)
    hw = float(NormalDist().inv_cdf(0.5 + level / 2) * unc["se"])
    return {
        "degenerate": False,
        "rateEstimate": rate,
        "CI": [rate - hw, rate + hw],
        "halfWidth": hw,
        **unc,
        "times": ts.tolist(),
        "variance": var.tolist(),
        "outer": n_out,
        "inner": INNER_GROUPS * size,
        "burn_in": burn_in,
        "stationary_diagnostic": {"mean_f": float(f_stat.mean()),
                                  "stderr_f": float(f_stat.std(ddof=1) / math.sqrt(n_out))},
    }
