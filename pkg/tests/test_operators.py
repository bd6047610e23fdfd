import numpy as np
import pytest

from contactcd.cd import CdConstants, estimate_constants
from contactcd.frame import FrameError, frame_derivative
from contactcd.jets import Polynomial
from contactcd.models import heisenberg, lie_model_from_table, sheared, twisted
from contactcd.operators import (
    JetPrescription,
    OperatorContext,
    apply_L,
    bochner_horizontal_rhs,
    bochner_vertical_rhs,
    bochner_vertical_rhs_tensorial,
    carre_du_champ_from_L,
    cd_inequality_check,
    converse_equality,
    gamma2_forms,
    gamma_forms,
    prescribe_jet_function,
    prescription_residual,
    rescaled_forms,
    sample_pair,
    verify_bochner,
    verify_cd,
    verify_converse,
)

H1 = heisenberg(1)
MODELS = [heisenberg(1), heisenberg(2), sheared(), twisted(0, 1), twisted(-1, 1), twisted(1, -1)]


def coord(a, D=3):
    return Polynomial.coordinate(a, D)


def one(D):
    return Polynomial.const(1.0, D)


def test_sub_laplacian_examples():
    x, y, z = coord(0), coord(1), coord(2)
    assert apply_L(OperatorContext(H1, np.zeros(3)), x * x + y * y) == pytest.approx(4.0)
    for m in MODELS:
        ctx = OperatorContext(m, m.default_point())
        assert apply_L(ctx, one(m.ambient_dim)) == 0.0
    assert apply_L(OperatorContext(H1, np.array([0.3, -1.2, 0.8])), z) == pytest.approx(0.0, abs=1e-15)


def test_carre_du_champ_examples():
    assert gamma_forms(OperatorContext(H1, np.zeros(3)), coord(0)) == (1.0, 0.0)
    assert gamma_forms(OperatorContext(H1, np.ones(3)), one(3)) == (0.0, 0.0)


@pytest.mark.parametrize("model", MODELS, ids=lambda m: m.name)
def test_carre_du_champ_from_generator(model):
    rng = np.random.default_rng(3)
    for _ in range(5):
        x = model.random_point(rng, 0.7)
        f = Polynomial.random(rng, model.ambient_dim, 3, n_terms=12)
        g = Polynomial.random(rng, model.ambient_dim, 2, n_terms=8)
        ctx = OperatorContext(model, x)
        assert carre_du_champ_from_L(ctx, f, g) == pytest.approx(gamma_forms(ctx, f, g)[0], rel=1e-10, abs=1e-10)


def test_iterated_forms_vanish_on_trivial_functions():
    for m in MODELS:
        assert gamma2_forms(OperatorContext(m, m.default_point()), one(m.ambient_dim)) == (0.0, 0.0)
    ctx = OperatorContext(H1, np.array([1.0, 2.0, 3.0]))
    g2, g2z = gamma2_forms(ctx, coord(0))
    assert g2 == pytest.approx(0.0, abs=1e-14) and g2z == pytest.approx(0.0, abs=1e-14)
    assert bochner_horizontal_rhs(ctx, coord(0)) == pytest.approx(0.0, abs=1e-14)
    assert bochner_horizontal_rhs(ctx, one(3)) == 0.0
    assert bochner_vertical_rhs(ctx, one(3)) == 0.0


@pytest.mark.parametrize("model", MODELS, ids=lambda m: m.name)
def test_bochner_identities(model):
    rep = verify_bochner(model, count=20, seed=1)
    assert rep.ok, rep.to_dict()


@pytest.mark.parametrize("model", MODELS, ids=lambda m: m.name)
def test_tensorial_vertical_form_agrees(model):
    rng = np.random.default_rng(6)
    for _ in range(5):
        x = model.random_point(rng, 0.7)
        f = Polynomial.random(rng, model.ambient_dim, 3, n_terms=12)
        ctx = OperatorContext(model, x)
        a, b = bochner_vertical_rhs(ctx, f), bochner_vertical_rhs_tensorial(ctx, f)
        assert a == pytest.approx(b, rel=1e-10, abs=1e-10)


def test_heisenberg_vertical_form_reduces():
    rng = np.random.default_rng(2)
    for _ in range(5):
        x = rng.uniform(-1, 1, 3)
        f = Polynomial.random(rng, 3, 3)
        ctx = OperatorContext(H1, x)
        d = ctx.derivatives(f)
        xz = d["d2"][:2, 2]
        _, g2z = gamma2_forms(ctx, f)
        assert bochner_vertical_rhs(ctx, f) == pytest.approx(xz @ xz, rel=1e-12, abs=1e-12)
        assert g2z == pytest.approx(xz @ xz, rel=1e-10, abs=1e-10)


def test_vertical_form_requires_normalized_frame():
    delta = np.array([[0.3, 0.5], [0.5, -0.3]])
    gamma = np.array([[0.0, 1.0], [-1.0, 0.0]])
    m = lie_model_from_table("unnormalized", 1, np.zeros((2, 2, 2)), gamma, delta)
    ctx = OperatorContext(m, m.default_point())
    with pytest.raises(FrameError, match="δ-normalized"):
        bochner_vertical_rhs(ctx, Polynomial.coordinate(1, m.ambient_dim))


def test_jet_budget_is_enforced():
    ctx = OperatorContext(H1, np.zeros(3), order=2)
    with pytest.raises(FrameError):
        gamma2_forms(ctx, coord(0))


def test_rescaled_examples():
    ctx = OperatorContext(H1, np.array([0.6, -0.4, 2.0]))
    r = rescaled_forms(ctx, one(3), 1.3)
    assert (r.gamma_lambda, r.gamma2_lambda, r.identity_residual) == (0.0, 0.0, 0.0)
    r = rescaled_forms(ctx, coord(2), 1.0)
    assert r.gamma_lambda == pytest.approx(0.6 ** 2 / 4 + 0.4 ** 2 / 4 + 1.0)
    with pytest.raises(ValueError):
        rescaled_forms(ctx, coord(2), 0.0)


def test_rescaled_identity_on_torsion_model():
    m = twisted(0, 1)
    for k in range(20):
        x, f = sample_pair(m, 4, k)
        assert rescaled_forms(OperatorContext(m, x), f, 0.8).identity_residual <= 1e-8


def test_prescription_zero_gives_zero_function():
    p = JetPrescription(np.zeros(3), np.zeros(2), 0.0, 1.0)
    f = prescribe_jet_function(p, H1)
    assert np.abs(f.coeffs).max(initial=0.0) <= 1e-14


def test_prescription_heisenberg_example():
    x0 = np.array([0.2, 0.1, -0.3])
    p = JetPrescription(x0, np.array([1.0, 0.0]), 0.0, 1.0)
    f = prescribe_jet_function(p, H1)
    fd = lambda w: frame_derivative(H1, f, x0, w)  # noqa: E731
    assert fd((0,)) == pytest.approx(1.0, abs=1e-12)
    assert fd((1,)) == pytest.approx(0.0, abs=1e-12)
    assert fd(("Z",)) == pytest.approx(0.0, abs=1e-12)
    assert fd((0, "Z")) == pytest.approx(0.0, abs=1e-12)
    assert fd((1, "Z")) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("model", MODELS, ids=lambda m: m.name)
def test_prescription_round_trip(model):
    rng = np.random.default_rng(12)
    for _ in range(4):
        x0 = model.random_point(rng, 0.5)
        p = JetPrescription(x0, rng.normal(size=2 * model.n), float(rng.normal()), float(rng.uniform(0.2, 5)))
        f = prescribe_jet_function(p, model)
        assert prescription_residual(p, model, f) <= 1e-10


def test_prescription_rejects_nonpositive_nu():
    with pytest.raises(ValueError):
        prescribe_jet_function(JetPrescription(np.zeros(3), np.ones(2), 0.0, 0.0), H1)


@pytest.mark.parametrize("model", MODELS, ids=lambda m: m.name)
def test_converse_includes_mixed_derivative_term(model):
    rng = np.random.default_rng(21)
    for _ in range(5):
        u = rng.normal(size=2 * model.n)
        nu = float(rng.uniform(0.1, 10))
        r = converse_equality(model, model.random_point(rng, 0.5), u, nu)
        assert r["lhs"] == pytest.approx(r["curvature"] - r["gamma_over_nu"], rel=1e-9, abs=1e-9)
    assert verify_converse(model, 10, 0).ok


def test_converse_published_equality_is_off_by_gradient_over_nu():
    rep = verify_converse(heisenberg(1), 10, 0, form="published")
    assert not rep.ok
    w = rep.witnesses["converse_published"]
    assert w["lhs"] - w["target"] == pytest.approx(-np.dot(w["u"], w["u"]) / w["nu"], rel=1e-9)


def test_cd_slack_examples():
    c0 = CdConstants(0.0, 0.0, 0.0, 0.0, 0.0, 1)
    ctx = OperatorContext(H1, np.zeros(3))
    assert cd_inequality_check(ctx, one(3), 1.0, c0) == 0.0
    rng = np.random.default_rng(0)
    for nu in (0.1, 1.0, 10.0):
        f = Polynomial.random(rng, 3, 3)
        ctx = OperatorContext(H1, rng.uniform(-1, 1, 3))
        a = cd_inequality_check(ctx, f, nu, c0, form="published")
        b = cd_inequality_check(ctx, f, nu, c0, form="corrected")
        # with vanishing constants both bounds reduce to the Sasakian inequality
        g2, g2z = gamma2_forms(ctx, f)
        gh, gv = gamma_forms(ctx, f)
        Lf = apply_L(ctx, f)
        direct = g2 + nu * g2z - (Lf ** 2 / 2 - gh / nu + 0.5 * gv)
        assert a == b == pytest.approx(direct, rel=1e-12, abs=1e-12)
        assert a >= -1e-8
    with pytest.raises(ValueError):
        cd_inequality_check(ctx, one(3), 0.0, c0)
    with pytest.raises(ValueError):
        cd_inequality_check(ctx, one(3), 1.0, c0, form="other")


def test_published_bound_fails_on_torsion_witness():
    """At the identity take grad f = 0, Zf = 1, horizontal Hessian -nu tau, X_j Z f = 0."""
    m = twisted(0, 1)
    c = estimate_constants(m)
    nu = 10.0
    ctx = OperatorContext(m, m.default_point())
    tau = ctx.geometry.tau
    p = JetPrescription(m.default_point(), np.zeros(2), 1.0, nu, hessian=-nu * tau, xz=np.zeros(2))
    f = prescribe_jet_function(p, m)
    assert cd_inequality_check(ctx, f, nu, c, form="published") == pytest.approx(-7 * nu ** 2 / 16, rel=1e-9)
    assert cd_inequality_check(ctx, f, nu, c, form="corrected") == pytest.approx(0.0, abs=1e-9)


@pytest.mark.parametrize("model", [twisted(0, 1), sheared(), twisted(-1, 1)], ids=lambda m: m.name)
def test_corrected_bound_sweep(model):
    c = estimate_constants(model)
    assert verify_cd(model, c, 60, 3, form="corrected").ok


def test_fault_injection_is_detected():
    def corrupted(sd):
        from contactcd.geometry import ric_tau2_matrix

        return ric_tau2_matrix(sd) + 0.1 * np.eye(sd.n2)

    rep = verify_bochner(twisted(0, 1), 10, 0, ric_override=corrupted)
    assert not rep.ok and rep.failures() == ["horizontal"]
    w = rep.witnesses["horizontal"]
    assert set(w) >= {"index", "point", "f_seed"}
