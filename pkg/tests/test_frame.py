import numpy as np
import pytest
from scipy.linalg import expm

from contactcd.frame import (
    ChartModel,
    ContactModel,
    FrameError,
    StructureData,
    check_adapted_frame,
    diagnose_structure,
    frame_derivative,
    normalizing_rotation,
    structure_functions,
)
from contactcd.jets import Polynomial
from contactcd.models import builtin, heisenberg, sheared, twisted

CHART_MODELS = [heisenberg(1), heisenberg(2), sheared()]
ALL_MODELS = CHART_MODELS + [twisted(0, 1), twisted(-1, 1), twisted(1, -1)]


def _coordinate_brackets(model, x):
    """Coordinate brackets ``[U, V]^a = U(V^a) - V(U^a)`` of all frame pairs."""
    F = model.backend.field_values(x[None])[0]
    dF = model.backend.field_jacobians(x[None])[0]
    T = np.einsum("ib,jab->ija", F, dF)
    return F, T - np.swapaxes(T, 0, 1)


def _reassembled(sd, F):
    n2 = sd.n2
    m = n2 + 1
    out = np.zeros((m, m, F.shape[1]))
    out[:n2, :n2] = np.einsum("ijk,ka->ija", sd.w, F[:n2]) + sd.gamma[:, :, None] * F[n2]
    out[:n2, n2] = np.einsum("ij,ja->ia", sd.delta, F[:n2]) + sd.zeta[:, None] * F[n2]
    out[n2, :n2] = -out[:n2, n2]
    return out


def _random_frame(rng, eps=0.1):
    base = heisenberg(1).backend.frame
    D = 3
    rows = []
    for row in base:
        rows.append(tuple(c + Polynomial.random(rng, D, 2, scale=eps) for c in row))
    return ContactModel("random", 1, ChartModel(tuple(rows)), {})


def test_heisenberg_structure():
    sd = structure_functions(heisenberg(1), np.array([0.4, -1.3, 2.0]))
    assert np.all(sd.w == 0)
    assert sd.gamma[0, 1] == 1.0 and sd.gamma[1, 0] == -1.0
    assert np.all(sd.delta == 0)


def test_twisted_returns_its_table():
    sd = structure_functions(twisted(0.5, 2.0), twisted(0.5, 2.0).default_point())
    assert np.all(sd.w == 0)
    assert np.array_equal(sd.gamma, [[0.0, 1.0], [-1.0, 0.0]])
    assert np.array_equal(sd.delta, [[0.0, 0.5], [2.0, 0.0]])
    assert np.all(sd.dw == 0) and np.all(sd.ddelta == 0)


@pytest.mark.parametrize("model", CHART_MODELS, ids=lambda m: m.name)
def test_bracket_closure_on_shipped_charts(model):
    rng = np.random.default_rng(1)
    for _ in range(5):
        x = rng.uniform(-1, 1, model.ambient_dim)
        F, B = _coordinate_brackets(model, x)
        assert np.abs(_reassembled(structure_functions(model, x), F) - B).max() <= 1e-10


def test_bracket_closure_on_random_quadratic_frames():
    rng = np.random.default_rng(7)
    for _ in range(5):
        model = _random_frame(rng)
        x = rng.uniform(-0.5, 0.5, 3)
        F, B = _coordinate_brackets(model, x)
        assert np.abs(_reassembled(structure_functions(model, x), F) - B).max() <= 1e-10


def test_sheared_frame_brackets():
    c = (0.3, 0.5, -0.4, 0.7)
    x = np.array([0.2, -0.6, 0.9])
    sd = structure_functions(sheared(c), x)
    assert sd.w[0, 1, 1] == pytest.approx(-(c[2] + c[3] * x[0] / 2))
    assert sd.w[0, 1, 0] == pytest.approx(0.0, abs=1e-14)
    assert sd.delta[0, 1] == pytest.approx(-c[3])
    assert sd.delta[0, 0] == 0.0 and sd.delta[1, 1] == 0.0


@pytest.mark.parametrize("model", ALL_MODELS, ids=lambda m: m.name)
def test_shipped_models_are_adapted(model):
    rng = np.random.default_rng(2)
    for _ in range(3):
        rep = check_adapted_frame(model, model.random_point(rng))
        assert rep.ok, rep.to_dict()


def test_misscaled_contact_form_is_flagged():
    D = 3
    x, y = Polynomial.coordinate(0, D), Polynomial.coordinate(1, D)
    zero, one = Polynomial.zero(D), Polynomial.const(1.0, D)
    frame = ((one, zero, y * -1.0), (zero, one, x * 1.0), (zero, zero, one))
    model = ContactModel("scaled", 1, ChartModel(frame), {})
    rep = check_adapted_frame(model, np.zeros(3))
    assert not rep["gamma_orthogonal"].passed
    assert rep["gamma_orthogonal"].violation == pytest.approx(3.0)


def test_torsion_model_has_zero_delta_diagonal():
    rep = check_adapted_frame(twisted(0, 1), twisted(0, 1).default_point())
    assert rep.ok
    assert rep["delta_diagonal_zero"].violation == 0.0


def test_normalizing_rotation_zeroes_torsion_diagonal():
    gamma = np.array([[0.0, 1.0], [-1.0, 0.0]])
    delta = np.array([[0.3, 0.5], [0.5, -0.3]])
    sd = StructureData.constant(np.zeros((2, 2, 2)), gamma, delta)
    assert not diagnose_structure(sd)["delta_diagonal_zero"].passed
    R, diag = normalizing_rotation(sd)
    assert np.allclose(R @ R.T, np.eye(2), atol=1e-12)
    assert np.abs(diag).max() <= 1e-12
    Jm = gamma.T
    assert np.allclose(R @ Jm @ R.T, Jm, atol=1e-12) or np.allclose(R @ Jm @ R.T, -Jm, atol=1e-12)


def test_frame_derivative_examples():
    h = heisenberg(1)
    z = Polynomial.coordinate(2, 3)
    assert frame_derivative(h, z, np.array([0.7, -0.2, 1.0]), (0, 1)) == pytest.approx(0.5)
    one = Polynomial.const(1.0, 3)
    for word in [(0,), ("Z",), (1, 0), (0, "Z", 1)]:
        assert frame_derivative(h, one, np.zeros(3), word) == 0.0
    with pytest.raises(FrameError):
        frame_derivative(h, z, np.zeros(3), (0, 1, 0, 1))
    with pytest.raises(FrameError):
        frame_derivative(h, z, np.zeros(3), (5,))


@pytest.mark.parametrize("model", [sheared(), twisted(0, 1), heisenberg(1)], ids=lambda m: m.name)
def test_frame_derivative_commutator(model):
    rng = np.random.default_rng(4)
    for _ in range(4):
        x = model.random_point(rng, 0.7)
        f = Polynomial.random(rng, model.ambient_dim, 3, n_terms=15)
        sd = structure_functions(model, x)
        lhs = frame_derivative(model, f, x, (0, 1)) - frame_derivative(model, f, x, (1, 0))
        rhs = (sum(sd.w[0, 1, k] * frame_derivative(model, f, x, (k,)) for k in range(2))
               + sd.gamma[0, 1] * frame_derivative(model, f, x, ("Z",)))
        assert lhs == pytest.approx(rhs, abs=1e-10)


@pytest.mark.parametrize("ab", [(0, 1), (-1, 1), (1, -1), (0, 0), (0.3, 2.0)])
def test_lie_commutators_match_table(ab):
    be = twisted(*ab).backend
    assert np.abs(be.commutator_table() - be.structure_constants()).max() <= 1e-12


def test_group_steps_stay_on_group():
    m = builtin("su2type")
    be = m.backend
    rng = np.random.default_rng(0)
    Y = np.eye(be.m)
    for _ in range(1000):
        Y = Y @ expm(np.einsum("i,iab->ab", 0.1 * rng.standard_normal(3), be.generators))
    assert be.group_residual(Y).max() <= 1e-8


def test_singular_frame_is_rejected():
    D = 3
    x = Polynomial.coordinate(0, D)
    zero, one = Polynomial.zero(D), Polynomial.const(1.0, D)
    frame = ((x, zero, zero), (zero, one, zero), (zero, zero, one))
    model = ContactModel("degenerate", 1, ChartModel(frame), {})
    with pytest.raises(FrameError):
        structure_functions(model, np.zeros(3))
