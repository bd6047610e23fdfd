import numpy as np
import pytest

from contactcd.frame import StructureData, structure_functions
from contactcd.geometry import (
    christoffels,
    cross_field_W,
    geometry_data,
    nablaZ_tau_form,
    ric_tau2_matrix,
    ric_tau2_oracle,
    tau_and_J,
    v_field,
)
from contactcd.models import heisenberg, lie_model_from_table, sheared, twisted

J2 = np.array([[0.0, 1.0], [-1.0, 0.0]])


def _sd(model, x=None):
    return structure_functions(model, model.default_point() if x is None else x)


def _sym(a):
    return 0.5 * (a + a.T)


def test_heisenberg_tensors_vanish():
    g = geometry_data(_sd(heisenberg(1), np.array([0.5, 1.0, -2.0])))
    assert np.all(g.christoffel == 0)
    assert np.all(g.tau == 0)
    assert np.array_equal(g.J, J2)
    assert np.all(g.ricTau2 == 0)
    assert np.all(g.W == 0) and np.all(g.V == 0)
    assert np.all(g.nablaZtau == 0)


@pytest.mark.parametrize("a,b", [(0, 1), (-1, 1), (1, -1), (0.4, 2.5)])
def test_twisted_curvature_is_diagonal(a, b):
    g = geometry_data(_sd(twisted(a, b)))
    assert np.all(g.christoffel == 0)
    assert np.allclose(g.ric_sym, np.diag([b, -a]), atol=1e-14)
    assert np.all(g.W == 0) and np.all(g.V == 0)


def test_twisted_torsion_values():
    tau, J = tau_and_J(_sd(twisted(0, 1)))
    assert np.array_equal(tau, [[0.0, 0.5], [0.5, 0.0]])
    assert np.linalg.norm(tau, 2) == pytest.approx(0.5)
    assert np.array_equal(tau_and_J(_sd(twisted(-1, 1)))[0], np.zeros((2, 2)))
    assert np.allclose(nablaZ_tau_form(_sd(twisted(0, 1))), np.diag([-0.5, 0.5]))
    assert np.allclose(nablaZ_tau_form(_sd(twisted(-1, 1))), 0.0)


def test_christoffel_antisymmetry_on_random_tables():
    rng = np.random.default_rng(0)
    for n2 in (2, 4, 6):
        w = rng.normal(size=(n2, n2, n2))
        w = w - np.swapaxes(w, 0, 1)
        sd = StructureData.constant(w, np.zeros((n2, n2)), np.zeros((n2, n2)))
        G = christoffels(sd)
        assert np.abs(G + np.swapaxes(G, 1, 2)).max() == 0.0


@pytest.mark.parametrize("model", [heisenberg(1), heisenberg(2), sheared(), twisted(0, 1), twisted(0.3, 2.0)],
                         ids=lambda m: m.name)
def test_torsion_anticommutes_with_J(model):
    rng = np.random.default_rng(5)
    for _ in range(3):
        tau, J = tau_and_J(structure_functions(model, model.random_point(rng)))
        assert np.abs(tau @ J + J @ tau).max() <= 1e-10
        assert np.abs(tau - tau.T).max() == 0.0


def _random_constant_structure(rng, n2):
    w = rng.normal(size=(n2, n2, n2))
    w = w - np.swapaxes(w, 0, 1)
    delta = rng.normal(size=(n2, n2))
    np.fill_diagonal(delta, 0.0)
    q, _ = np.linalg.qr(rng.normal(size=(n2, n2)))
    gamma = q @ np.kron(np.eye(n2 // 2), J2) @ q.T
    return StructureData.constant(w, gamma, delta)


def test_curvature_matrix_agrees_with_connection_oracle():
    rng = np.random.default_rng(9)
    for n2 in (2, 4):
        for _ in range(5):
            sd = _random_constant_structure(rng, n2)
            assert np.abs(_sym(ric_tau2_matrix(sd)) - _sym(ric_tau2_oracle(sd))).max() <= 1e-10


def test_curvature_oracle_with_derivatives():
    rng = np.random.default_rng(10)
    m = sheared()
    for _ in range(5):
        sd = structure_functions(m, m.random_point(rng))
        assert np.abs(_sym(ric_tau2_matrix(sd)) - _sym(ric_tau2_oracle(sd))).max() <= 1e-10


def test_cross_field_for_linearly_varying_gamma():
    eps = 0.37
    sd = StructureData.constant(np.zeros((2, 2, 2)), J2, np.zeros((2, 2)))
    sd.dgamma[0, 0, 1] = eps  # X_1 gamma_12
    sd.dgamma[0, 1, 0] = -eps
    assert np.allclose(cross_field_W(sd), [0.0, eps])


def test_v_field_for_linearly_varying_delta():
    eps = -0.8
    sd = StructureData.constant(np.zeros((2, 2, 2)), J2, np.zeros((2, 2)))
    sd.ddelta[0, 0, 1] = eps  # X_1 delta_1^2
    assert np.allclose(v_field(sd), [0.0, eps])


def test_invariants_under_frame_rotation():
    base = twisted(0.3, 2.0)
    C = base.backend.structure_constants()
    for theta in (0.3, 1.1, 2.5):
        R = np.array([[np.cos(theta), np.sin(theta)], [-np.sin(theta), np.cos(theta)]])
        M = np.eye(3)
        M[:2, :2] = R
        Ct = np.einsum("ai,bj,ijk,kc->abc", M, M, C, np.linalg.inv(M))
        rot = lie_model_from_table("rotated", 1, Ct[:2, :2, :2], Ct[:2, :2, 2], Ct[:2, 2, :2])
        g0, g1 = geometry_data(_sd(base)), geometry_data(_sd(rot))
        assert np.allclose(np.linalg.eigvalsh(g0.ric_sym), np.linalg.eigvalsh(g1.ric_sym), atol=1e-10)
        assert np.linalg.norm(g1.V) == pytest.approx(np.linalg.norm(g0.V), abs=1e-10)
        assert np.linalg.norm(g1.W) == pytest.approx(np.linalg.norm(g0.W), abs=1e-10)
        assert np.linalg.norm(g1.tau, 2) == pytest.approx(np.linalg.norm(g0.tau, 2), abs=1e-10)


def test_geometry_report_is_serializable():
    d = geometry_data(_sd(twisted(0, 1))).to_dict()
    assert d["uCoeff"] == pytest.approx(0.5)
    assert np.array(d["ricTau2"]).shape == (2, 2)
