"""Truncated multivariate Taylor arithmetic.

A :class:`Jet` stores the Taylor coefficients ``d^mu f / mu!`` of a (possibly
tensor-valued) function at a point, for all multi-indices ``|mu| <= order``, in
a dense graded-lexicographic layout.  Because the layout is graded, the
coefficients of a lower-order truncation are a prefix of the higher-order
array, which makes truncation a slice.

Everything downstream (frame brackets, ``L``, ``Gamma_2`` ...) is built from
:func:`jet_mul`, :meth:`Jet.derivative` and scalar-field pullbacks.
"""

from __future__ import annotations

import functools
import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import comb

MAX_ORDER = 4


class JetError(ValueError):
    pass


# ---------------------------------------------------------------------------
# index tables


def _multi_indices(dim: int, order: int) -> np.ndarray:
    rows = []
    for deg in range(order + 1):
        # lexicographically descending within a degree: x1^deg first
        for c in itertools.combinations_with_replacement(range(dim), deg):
            mu = [0] * dim
            for a in c:
                mu[a] += 1
            rows.append(mu)
    return np.array(rows, dtype=np.int64).reshape(-1, dim)


@functools.lru_cache(maxsize=None)
def _tables(dim: int, order: int):
    mi = _multi_indices(dim, order)
    lookup = {tuple(m): k for k, m in enumerate(mi)}
    deg = mi.sum(axis=1)

    # multiplication pairs, grouped by target index for reduceat
    I, J, T = [], [], []
    for i, a in enumerate(mi):
        for j, b in enumerate(mi):
            if deg[i] + deg[j] <= order:
                I.append(i)
                J.append(j)
                T.append(lookup[tuple(a + b)])
    I, J, T = (np.array(v, dtype=np.int64) for v in (I, J, T))
    perm = np.argsort(T, kind="stable")
    I, J, T = I[perm], J[perm], T[perm]
    starts = np.flatnonzero(np.r_[True, T[1:] != T[:-1]])

    # derivative maps: coefficient mu of d_a f comes from mu + e_a with factor mu_a + 1
    n_low = len(mi) if order == 0 else int((deg <= order - 1).sum())
    d_src = np.zeros((dim, n_low), dtype=np.int64)
    d_fac = np.zeros((dim, n_low))
    if order > 0:
        for a in range(dim):
            for k in range(n_low):
                nu = mi[k].copy()
                nu[a] += 1
                d_src[a, k] = lookup[tuple(nu)]
                d_fac[a, k] = nu[a]
    return {
        "mi": mi,
        "lookup": lookup,
        "deg": deg,
        "I": I,
        "J": J,
        "starts": starts,
        "d_src": d_src,
        "d_fac": d_fac,
    }


def n_coeffs(dim: int, order: int) -> int:
    return math.comb(dim + order, order)


def multi_indices(dim: int, order: int) -> np.ndarray:
    """Multi-indices of the dense layout, one row per coefficient."""
    return _tables(dim, order)["mi"].copy()


# ---------------------------------------------------------------------------
# Jet


class Jet:
    """Taylor coefficients of order ``<= order`` in ``dim`` variables.

    ``coeffs`` has shape ``(n_coeffs(dim, order), *shape)``; a scalar jet has
    empty trailing shape.
    """

    __slots__ = ("coeffs", "dim", "order")
    __array_priority__ = 100

    def __init__(self, coeffs, dim: int, order: int):
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape[0] != n_coeffs(dim, order):
            raise JetError(
                f"expected {n_coeffs(dim, order)} coefficients for dim={dim}, "
                f"order={order}, got {coeffs.shape[0]}"
            )
        self.coeffs = coeffs
        self.dim = dim
        self.order = order

    # constructors ---------------------------------------------------------
    @classmethod
    def constant(cls, value, dim: int, order: int) -> "Jet":
        value = np.asarray(value, dtype=float)
        c = np.zeros((n_coeffs(dim, order),) + value.shape)
        c[0] = value
        return cls(c, dim, order)

    @classmethod
    def variable(cls, a: int, x0: float, dim: int, order: int) -> "Jet":
        """Jet of the coordinate function ``x_a`` at a point where it equals ``x0``."""
        c = np.zeros(n_coeffs(dim, order))
        c[0] = x0
        if order >= 1:
            c[1 + a] = 1.0
        return cls(c, dim, order)

    # basic access ---------------------------------------------------------
    @property
    def shape(self) -> tuple:
        return self.coeffs.shape[1:]

    @property
    def value(self):
        v = self.coeffs[0]
        return float(v) if v.ndim == 0 else v

    def __getitem__(self, idx) -> "Jet":
        if not isinstance(idx, tuple):
            idx = (idx,)
        return Jet(self.coeffs[(slice(None),) + idx], self.dim, self.order)

    def coeff(self, mu: Sequence[int]):
        """Taylor coefficient ``d^mu f / mu!``."""
        mu = tuple(int(m) for m in mu)
        if sum(mu) > self.order:
            raise JetError(f"multi-index {mu} exceeds order {self.order}")
        return self.coeffs[_tables(self.dim, self.order)["lookup"][mu]]

    def partial(self, mu: Sequence[int]):
        """Partial derivative ``d^mu f`` at the base point."""
        return self.coeff(mu) * math.prod(math.factorial(int(m)) for m in mu)

    def truncate(self, order: int) -> "Jet":
        if order > self.order:
            raise JetError(f"cannot raise order {self.order} to {order}")
        return Jet(self.coeffs[: n_coeffs(self.dim, order)], self.dim, order)

    def derivative(self, a: int) -> "Jet":
        """Jet of ``d f / d x_a``; the order drops by one."""
        if self.order == 0:
            raise JetError("cannot differentiate an order-0 jet")
        t = _tables(self.dim, self.order)
        fac = t["d_fac"][a].reshape((-1,) + (1,) * len(self.shape))
        return Jet(self.coeffs[t["d_src"][a]] * fac, self.dim, self.order - 1)

    def gradient(self) -> "Jet":
        """Tensor jet with a trailing axis over coordinates."""
        return Jet(
            np.stack([self.derivative(a).coeffs for a in range(self.dim)], axis=-1),
            self.dim,
            self.order - 1,
        )

    # arithmetic -----------------------------------------------------------
    def _align(self, other):
        if isinstance(other, Jet):
            if other.dim != self.dim:
                raise JetError(f"dimension mismatch: {self.dim} vs {other.dim}")
            k = min(self.order, other.order)
            return self.truncate(k), other.truncate(k)
        return self, None

    def __add__(self, other):
        a, b = self._align(other)
        if b is None:
            c = a.coeffs.copy()
            c[0] = c[0] + other
            return Jet(c, a.dim, a.order)
        return Jet(a.coeffs + b.coeffs, a.dim, a.order)

    __radd__ = __add__

    def __neg__(self):
        return Jet(-self.coeffs, self.dim, self.order)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Jet):
            return jet_mul(self, other)
        other = np.asarray(other, dtype=float)
        return Jet(self.coeffs * other, self.dim, self.order)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Jet):
            return jet_mul(self, other.reciprocal())
        return Jet(self.coeffs / other, self.dim, self.order)

    def __pow__(self, k: int):
        if k < 0 or int(k) != k:
            raise JetError("only non-negative integer powers")
        out = Jet.constant(np.ones(self.shape), self.dim, self.order)
        base = self
        while k:
            if k & 1:
                out = out * base
            k >>= 1
            if k:
                base = base * base
        return out

    def compose(self, taylor: Sequence[float]) -> "Jet":
        """Compose with a univariate function given its Taylor coefficients
        ``phi^(k)(g0)/k!`` at the value ``g0`` of this (scalar) jet."""
        h = Jet(self.coeffs.copy(), self.dim, self.order)
        h.coeffs[0] = 0.0
        out = Jet.constant(taylor[0], self.dim, self.order)
        p = Jet.constant(1.0, self.dim, self.order)
        for k in range(1, self.order + 1):
            p = p * h
            out = out + p * taylor[k]
        return out

    def reciprocal(self) -> "Jet":
        g0 = float(self.coeffs[0])
        if g0 == 0.0:
            raise JetError("reciprocal of a jet with zero value")
        return self.compose([(-1) ** k / g0 ** (k + 1) for k in range(self.order + 1)])

    def __repr__(self):
        return f"Jet(dim={self.dim}, order={self.order}, shape={self.shape}, value={self.coeffs[0]!r})"


def _check_pair(a: Jet, b: Jet):
    if a.dim != b.dim:
        raise JetError(f"dimension mismatch: {a.dim} vs {b.dim}")
    if a.order != b.order:
        raise JetError(f"order mismatch: {a.order} vs {b.order}")


def jet_mul(a: Jet, b: Jet) -> Jet:
    """Truncated Cauchy product; trailing tensor shapes broadcast elementwise.

    Jets of different order are truncated to the smaller order first; use
    :func:`jet_mul_strict` to insist on matching shapes.
    """
    if a.order != b.order:
        a, b = a._align(b)
    _check_pair(a, b)
    t = _tables(a.dim, a.order)
    ca, cb = a.coeffs, b.coeffs
    nd = max(ca.ndim, cb.ndim) - 1
    ca = ca.reshape(ca.shape[:1] + (1,) * (nd - ca.ndim + 1) + ca.shape[1:])
    cb = cb.reshape(cb.shape[:1] + (1,) * (nd - cb.ndim + 1) + cb.shape[1:])
    prod = ca[t["I"]] * cb[t["J"]]
    return Jet(np.add.reduceat(prod, t["starts"], axis=0), a.dim, a.order)


def jet_mul_strict(a: Jet, b: Jet) -> Jet:
    _check_pair(a, b)
    if a.shape != b.shape:
        raise JetError(f"shape mismatch: {a.shape} vs {b.shape}")
    return jet_mul(a, b)


def jet_einsum(subscripts: str, a: Jet, b: Jet) -> Jet:
    """Bilinear tensor contraction of two jets, e.g. ``"ij,jk->ik"``."""
    if a.order != b.order:
        a, b = a._align(b)
    _check_pair(a, b)
    t = _tables(a.dim, a.order)
    lhs, out = subscripts.split("->")
    sa, sb = lhs.split(",")
    prod = np.einsum(f"p{sa},p{sb}->p{out}", a.coeffs[t["I"]], b.coeffs[t["J"]])
    return Jet(np.add.reduceat(prod, t["starts"], axis=0), a.dim, a.order)


# ---------------------------------------------------------------------------
# scalar fields


class ScalarField:
    """Base class for test functions and frame coefficients."""

    dim: int

    def jet(self, x, order: int) -> Jet:
        return self.on_jets([Jet.variable(a, xa, self.dim, order) for a, xa in enumerate(x)])

    def on_jets(self, xs: Sequence[Jet]) -> Jet:  # pragma: no cover - interface
        raise NotImplementedError

    def __call__(self, points):
        raise NotImplementedError

    def gradient(self, points) -> np.ndarray:
        raise NotImplementedError


@dataclass(frozen=True)
class Polynomial(ScalarField):
    """Sparse polynomial: ``sum_t coeffs[t] * prod_a x_a ** powers[t, a]``."""

    coeffs: np.ndarray
    powers: np.ndarray
    dim: int = field(default=-1)

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.coeffs, dtype=float))
        p = np.asarray(self.powers, dtype=np.int64)
        if p.ndim == 1:
            p = p.reshape(len(c), -1) if len(c) else p.reshape(0, max(self.dim, 0))
        dim = self.dim if self.dim >= 0 else p.shape[1]
        if p.shape != (len(c), dim):
            raise ValueError(f"powers shape {p.shape} does not match {len(c)} terms in dim {dim}")
        if (p < 0).any():
            raise ValueError("negative exponent")
        object.__setattr__(self, "coeffs", c)
        object.__setattr__(self, "powers", p)
        object.__setattr__(self, "dim", dim)

    # constructors -----------------------------------------------------------
    @classmethod
    def zero(cls, dim: int) -> "Polynomial":
        return cls(np.zeros(0), np.zeros((0, dim), dtype=np.int64), dim)

    @classmethod
    def const(cls, value: float, dim: int) -> "Polynomial":
        return cls([value], np.zeros((1, dim), dtype=np.int64), dim)

    @classmethod
    def coordinate(cls, a: int, dim: int, scale: float = 1.0) -> "Polynomial":
        p = np.zeros((1, dim), dtype=np.int64)
        p[0, a] = 1
        return cls([scale], p, dim)

    @classmethod
    def from_terms(cls, terms, dim: int) -> "Polynomial":
        """From ``[(coeff, powers), ...]`` or ``[{"coeff":..., "powers":[...]}, ...]``."""
        cs, ps = [], []
        for t in terms:
            if isinstance(t, dict):
                cs.append(float(t["coeff"]))
                ps.append(list(t["powers"]))
            else:
                cs.append(float(t[0]))
                ps.append(list(t[1]))
        if not cs:
            return cls.zero(dim)
        return cls(cs, np.array(ps, dtype=np.int64).reshape(len(cs), dim), dim).simplify()

    @classmethod
    def random(cls, rng: np.random.Generator, dim: int, degree: int, n_terms: int | None = None,
               scale: float = 1.0) -> "Polynomial":
        """Random polynomial with Gaussian coefficients on monomials of degree <= ``degree``.

        ``n_terms=None`` uses every monomial.
        """
        mi = multi_indices(dim, degree)
        if n_terms is not None and n_terms < len(mi):
            pick = np.sort(rng.choice(len(mi), size=n_terms, replace=False))
            mi = mi[pick]
        return cls(scale * rng.standard_normal(len(mi)), mi, dim)

    def to_terms(self) -> list[dict]:
        return [{"coeff": float(c), "powers": [int(v) for v in p]} for c, p in zip(self.coeffs, self.powers)]

    # algebra ----------------------------------------------------------------
    def simplify(self, tol: float = 0.0) -> "Polynomial":
        if len(self.coeffs) == 0:
            return self
        keys, inv = np.unique(self.powers, axis=0, return_inverse=True)
        c = np.zeros(len(keys))
        np.add.at(c, inv.ravel(), self.coeffs)
        keep = np.abs(c) > tol
        return Polynomial(c[keep], keys[keep], self.dim)

    @property
    def degree(self) -> int:
        return int(self.powers.sum(axis=1).max()) if len(self.coeffs) else 0

    def __add__(self, other):
        if not isinstance(other, Polynomial):
            other = Polynomial.const(float(other), self.dim)
        if other.dim != self.dim:
            raise ValueError("dimension mismatch")
        return Polynomial(np.r_[self.coeffs, other.coeffs], np.r_[self.powers, other.powers], self.dim).simplify()

    __radd__ = __add__

    def __neg__(self):
        return Polynomial(-self.coeffs, self.powers, self.dim)

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        if not isinstance(other, Polynomial):
            return Polynomial(self.coeffs * float(other), self.powers, self.dim)
        if other.dim != self.dim:
            raise ValueError("dimension mismatch")
        c = (self.coeffs[:, None] * other.coeffs[None, :]).ravel()
        p = (self.powers[:, None, :] + other.powers[None, :, :]).reshape(-1, self.dim)
        return Polynomial(c, p, self.dim).simplify()

    __rmul__ = __mul__

    def diff(self, a: int) -> "Polynomial":
        keep = self.powers[:, a] > 0
        p = self.powers[keep].copy()
        c = self.coeffs[keep] * p[:, a]
        p[:, a] -= 1
        return Polynomial(c, p, self.dim).simplify()

    # evaluation -------------------------------------------------------------
    def __call__(self, points):
        x = np.asarray(points, dtype=float)
        single = x.ndim == 1
        x = np.atleast_2d(x)
        if x.shape[-1] != self.dim:
            raise JetError(f"point has {x.shape[-1]} coordinates, field expects {self.dim}")
        if len(self.coeffs) == 0:
            out = np.zeros(x.shape[0])
        else:
            out = np.prod(x[:, None, :] ** self.powers[None, :, :], axis=2) @ self.coeffs
        return float(out[0]) if single else out

    def gradient(self, points) -> np.ndarray:
        x = np.atleast_2d(np.asarray(points, dtype=float))
        return np.stack([self.diff(a)(x) for a in range(self.dim)], axis=-1)

    def jet(self, x, order: int) -> Jet:
        """Exact Taylor coefficients at ``x`` via the binomial expansion of each monomial."""
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise JetError(f"point has shape {x.shape}, field expects ({self.dim},)")
        mi = _tables(self.dim, order)["mi"]
        if len(self.coeffs) == 0:
            return Jet(np.zeros(len(mi)), self.dim, order)
        p = self.powers[:, None, :]
        m = mi[None, :, :]
        ok = (p >= m).all(axis=2)
        e = np.where(p >= m, p - m, 0)
        terms = comb(p, m) * np.where(p >= m, x ** e, 0.0)
        vals = np.prod(terms, axis=2) * ok
        return Jet(self.coeffs @ vals, self.dim, order)

    def on_jets(self, xs: Sequence[Jet]) -> Jet:
        if len(xs) != self.dim:
            raise JetError(f"{len(xs)} argument jets for a field of dim {self.dim}")
        j0 = xs[0]
        out = Jet.constant(0.0, j0.dim, j0.order)
        if len(self.coeffs) == 0:
            return out
        maxp = self.powers.max(axis=0)
        pows = []
        for a, xa in enumerate(xs):
            seq = [Jet.constant(1.0, j0.dim, j0.order)]
            for _ in range(int(maxp[a])):
                seq.append(seq[-1] * xa)
            pows.append(seq)
        for c, p in zip(self.coeffs, self.powers):
            term = None
            for a in np.flatnonzero(p):
                f = pows[a][p[a]]
                term = f if term is None else term * f
            out = out + (c if term is None else term * c)
        return out


_BUILTINS = {
    "exp": lambda g0, k: [math.exp(g0) / math.factorial(j) for j in range(k + 1)],
    "sin": lambda g0, k: [
        [math.sin(g0), math.cos(g0), -math.sin(g0), -math.cos(g0)][j % 4] / math.factorial(j) for j in range(k + 1)
    ],
    "cos": lambda g0, k: [
        [math.cos(g0), -math.sin(g0), -math.cos(g0), math.sin(g0)][j % 4] / math.factorial(j) for j in range(k + 1)
    ],
}
_BUILTIN_NP = {"exp": (np.exp, np.exp), "sin": (np.sin, np.cos), "cos": (np.cos, lambda u: -np.sin(u))}


@dataclass(frozen=True)
class Builtin(ScalarField):
    """A shipped elementary function applied to a polynomial, e.g. ``sin(p(x))``."""

    name: str
    inner: Polynomial

    def __post_init__(self):
        if self.name not in _BUILTINS:
            raise ValueError(f"unknown builtin field {self.name!r}; choose from {sorted(_BUILTINS)}")

    @property
    def dim(self) -> int:
        return self.inner.dim

    def on_jets(self, xs):
        g = self.inner.on_jets(xs)
        return g.compose(_BUILTINS[self.name](float(g.coeffs[0]), g.order))

    def jet(self, x, order):
        g = self.inner.jet(x, order)
        return g.compose(_BUILTINS[self.name](float(g.coeffs[0]), g.order))

    def __call__(self, points):
        return _BUILTIN_NP[self.name][0](self.inner(points))

    def gradient(self, points):
        u = self.inner(np.atleast_2d(points))
        return _BUILTIN_NP[self.name][1](u)[:, None] * self.inner.gradient(points)

    def to_terms(self):
        return {"builtin": self.name, "inner": self.inner.to_terms()}


def field_from_json(obj, dim: int) -> ScalarField:
    if isinstance(obj, dict) and "builtin" in obj:
        return Builtin(obj["builtin"], Polynomial.from_terms(obj["inner"], dim))
    return Polynomial.from_terms(obj, dim)


def jet_eval(f: ScalarField, x, order: int, max_order: int = MAX_ORDER) -> Jet:
    """Taylor jet of ``f`` at ``x`` (exact for polynomials)."""
    if order > max_order:
        raise JetError(f"order {order} exceeds the configured maximum {max_order}")
    if order < 0:
        raise JetError("order must be non-negative")
    x = np.asarray(x, dtype=float)
    if x.shape != (f.dim,):
        raise JetError(f"point has shape {x.shape}, field expects ({f.dim},)")
    return f.jet(x, order)
