"""Tensors of the Tanno connection computed from structure functions.

All functions take a :class:`~contactcd.frame.StructureData` and use the same
0-based index convention: ``w[i, j, k] = w_ij^k``, ``delta[i, j] = delta_i^j``
and derivative arrays carry the differentiating frame direction first.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .frame import StructureData


def christoffels(sd: StructureData) -> np.ndarray:
    """``G[i, j, k]``: the ``X_k`` component of ``nabla_{X_i} X_j``."""
    w = sd.w
    return 0.5 * (w + np.transpose(w, (1, 2, 0)) + np.transpose(w, (2, 1, 0)))


def tau_and_J(sd: StructureData) -> tuple[np.ndarray, np.ndarray]:
    """Torsion matrix ``tau[i, k] = (delta_k^i + delta_i^k) / 2`` and ``J[i, j] = gamma_ij``."""
    return 0.5 * (sd.delta + sd.delta.T), sd.gamma.copy()


def ric_tau2_matrix(sd: StructureData) -> np.ndarray:
    """Matrix ``R[k, l]`` of the curvature quadratic form acting on ``X_k f X_l f``.

    Only its symmetric part is meaningful.
    """
    w, g, d = sd.w, sd.gamma, sd.delta
    n2 = sd.n2
    dtrace = np.einsum("lkjj->lk", sd.dw[:n2])  # X_l (sum_j w_kj^j)
    R = g @ d
    R = R + dtrace.T - np.einsum("jljk->lk", sd.dw[:n2]).T
    R = R + np.einsum("j,kjl->kl", np.einsum("jii->j", w), w)
    R = R - np.einsum("kjj,ljj->kl", w, w)
    s = w + np.transpose(w, (0, 2, 1))  # s[l, j, i] = w_lj^i + w_li^j
    upper = np.triu(np.ones((n2, n2)), 1)
    R = R + 0.5 * (np.einsum("ij,ijl,ijk->kl", upper, w, w) - np.einsum("ij,lji,kji->kl", upper, s, s))
    return R


def ric_tau2_oracle(sd: StructureData) -> np.ndarray:
    """The same quadratic form assembled from connection coefficients.

    Ricci contraction of the Christoffel table plus the torsion contraction;
    compare symmetric parts with :func:`ric_tau2_matrix`.
    """
    w, g, d = sd.w, sd.gamma, sd.delta
    n2 = sd.n2
    G = christoffels(sd)
    dG = _christoffel_derivatives(sd)  # dG[x, i, j, k] = X_x G_ij^k
    M = (np.einsum("lki,jij->lk", G, G) - np.einsum("jki,lij->lk", G, G) - np.einsum("jli,ikj->lk", w, G))
    M = M + np.einsum("jlkj->lk", dG[:n2]) - np.einsum("ljkj->lk", dG[:n2])
    M = M - 0.5 * np.einsum("jl,jk->lk", g, d - d.T) - 0.5 * np.einsum("kj,jl->lk", d + d.T, g)
    return M


def _christoffel_derivatives(sd: StructureData) -> np.ndarray:
    dw = sd.dw
    return 0.5 * (dw + np.transpose(dw, (0, 2, 3, 1)) + np.transpose(dw, (0, 3, 2, 1)))


def cross_field_W(sd: StructureData) -> np.ndarray:
    """Coefficient vector of ``Zf X_k f`` in the curvature form."""
    w, g = sd.w, sd.gamma
    n2 = sd.n2
    upper = np.triu(np.ones((n2, n2)), 1)
    return (np.einsum("jll,kj->k", w, g) + np.einsum("lj,ljk,lj->k", upper, w, g)
            - np.einsum("jkj->k", sd.dgamma[:n2]))


def v_field(sd: StructureData) -> np.ndarray:
    """The horizontal field ``V`` pairing ``X_i f`` with ``Zf`` in the vertical identity."""
    w, d = sd.w, sd.delta
    n2 = sd.n2
    tau = 0.5 * (d + d.T)
    return (np.einsum("jl,ilj->i", tau, w) + np.einsum("jl,ijl->i", tau, w)
            + np.einsum("jji->i", sd.ddelta[:n2])
            - np.einsum("jkk,ji->i", w, d)
            + np.einsum("ikk->i", sd.dw[n2]))


def nablaZ_tau_form(sd: StructureData) -> np.ndarray:
    """Symmetric matrix of the form ``<(nabla_Z tau) grad f, grad f>``."""
    d = sd.delta
    A = sd.ddelta[sd.n2] + 0.5 * (d @ d.T - d.T @ d)
    return 0.5 * (A + A.T)


@dataclass
class GeometryData:
    christoffel: np.ndarray
    tau: np.ndarray
    J: np.ndarray
    ricTau2: np.ndarray
    W: np.ndarray
    V: np.ndarray
    nablaZtau: np.ndarray
    uCoeff: float

    @property
    def ric_sym(self) -> np.ndarray:
        return 0.5 * (self.ricTau2 + self.ricTau2.T)

    def to_dict(self) -> dict:
        return {k: (v.tolist() if isinstance(v, np.ndarray) else v) for k, v in self.__dict__.items()}


def geometry_data(sd: StructureData) -> GeometryData:
    tau, J = tau_and_J(sd)
    return GeometryData(
        christoffel=christoffels(sd),
        tau=tau,
        J=J,
        ricTau2=ric_tau2_matrix(sd),
        W=cross_field_W(sd),
        V=v_field(sd),
        nablaZtau=nablaZ_tau_form(sd),
        uCoeff=float(np.sum(tau * tau)),
    )
