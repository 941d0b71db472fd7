import math

import numpy as np
import pytest

from csdyn.errors import (
    KindError,
    ParamError,
    StructureError,
    UnknownModelError,
    UnsupportedContactError,
)
from csdyn.geometry import (
    fd_exterior_derivative_one_form,
    fd_exterior_derivative_two_form,
    fd_gradient,
    wedge_one_two,
)
from csdyn.models import (
    CAT_EIG_MINUS,
    NONEXACT_RATIO,
    conformal_hamiltonian_field,
    contact_lift,
    eval_observables,
    eval_vector_field,
    field_identity_residual,
    instantiate_model,
    rationally_dependent,
    registered_models,
    sample_states,
)

TWO_PI = 2.0 * math.pi

FLOW_CASES = [
    ("circle-linear", {"alpha": 1.0}),
    ("circle-quadratic", {"alpha": 1.0}),
    ("mane", {"alpha": 0.5, "d": 1, "y0": 0.5, "y_sin": -0.5 / TWO_PI}),
    ("mane", {"alpha": 0.5, "d": 2, "y0": (0.3, 0.1), "y_sin": 0.02}),
    ("damped-mechanical", {"alpha": 0.5, "d": 1, "v_cos": 1.0}),
    ("damped-mechanical", {"alpha": 0.5, "d": 2, "v_cos": (1.0, 1.0), "v_cross": 0.3}),
    ("t2-pair-theta1", {}),
    ("t2-pair-theta2", {}),
    ("lee-twisted-t1t2", {}),
]


def test_registry_lists_all_models():
    assert len(registered_models()) == 11


def test_radial_contraction_map():
    m = instantiate_model("radial-contraction", a=0.5)
    assert np.allclose(m.f(np.array([0.3, 2.0])), [0.3, 1.0])


def test_circle_linear_field_value():
    m = instantiate_model("circle-linear", alpha=1.0)
    x = eval_vector_field(m, np.array([0.25, 1.0]))
    assert np.allclose(x, [1.0, -1.0], atol=1e-14)


def test_unknown_model_rejected():
    with pytest.raises(UnknownModelError):
        instantiate_model("no-such-system")


def test_unknown_parameter_rejected():
    with pytest.raises(ParamError):
        instantiate_model("circle-linear", alpha=1.0, beta=2.0)


def test_contraction_ratio_domain():
    with pytest.raises(ParamError):
        instantiate_model("radial-contraction", a=1.5)


def test_circle_linear_alpha_out_of_range_warns_but_builds():
    m = instantiate_model("circle-linear", alpha=7.0)
    assert m.warnings
    assert np.all(np.isfinite(m.X(np.array([0.2, 0.3]))))


def test_lee_twist_independence_gate():
    instantiate_model("lee-twisted-t1t2", a1=1.0, a2=2.0)  # allowed by default
    with pytest.raises(ParamError):
        instantiate_model("lee-twisted-t1t2", a1=1.0, a2=2.0, require_independent=True)
    instantiate_model(
        "lee-twisted-t1t2", a1=math.sqrt(2.0), a2=math.sqrt(3.0),
        require_independent=True,
    )
    assert rationally_dependent(1.0, 2.0)
    assert not rationally_dependent(math.sqrt(2.0), math.sqrt(3.0))


def test_eval_vector_field_rejects_maps():
    m = instantiate_model("radial-contraction", a=0.5)
    with pytest.raises(KindError):
        eval_vector_field(m, np.array([0.0, 1.0]))


def test_theta2_field_on_invariant_circle():
    m = instantiate_model("t2-pair-theta2")
    assert np.allclose(m.X(np.array([0.3, 0.0])), [TWO_PI, 0.0], atol=1e-14)


def test_mane_zero_section_carries_y():
    c = 0.7
    m = instantiate_model("mane", alpha=0.5, d=1, y0=c)
    assert np.allclose(m.X(np.array([0.4, 0.0])), [c, 0.0], atol=1e-15)


def test_damped_critical_point_is_equilibrium():
    m = instantiate_model("damped-mechanical", alpha=0.5, d=1, v_cos=1.0)
    assert np.allclose(m.X(np.array([0.0, 0.0])), 0.0)
    assert np.allclose(m.X(np.array([0.5, 0.0])), 0.0)


def test_eval_observables_circle_linear():
    m = instantiate_model("circle-linear", alpha=1.0)
    obs = eval_observables(m, np.array([0.25, 2.0]))
    assert obs["H"] == pytest.approx(2.0)
    assert np.allclose(obs["lambda"], [2.0, 0.0])
    assert np.array_equal(obs["Omega"], np.array([[0.0, 1.0], [-1.0, 0.0]]))


def test_theta1_lee_form_constant():
    m = instantiate_model("t2-pair-theta1")
    rng = np.random.default_rng(0)
    for x in sample_states(m, 10, rng):
        assert np.array_equal(np.asarray(m.eta(x)), np.array([-TWO_PI, 0.0]))


def test_lee_field_annihilates_lee_form_exactly():
    m = instantiate_model("lee-twisted-t1t2")
    rng = np.random.default_rng(1)
    for x in sample_states(m, 100, rng):
        eta = np.asarray(m.eta(x))
        xdot = np.asarray(m.X(x))
        acc = 0.0
        for i in range(4):
            acc += eta[i] * xdot[i]
        assert acc == 0.0
        assert m.eta_X(x) == 0.0


@pytest.mark.parametrize("name,params", FLOW_CASES, ids=lambda v: str(v)[:40])
def test_defining_identity_at_random_states(name, params):
    m = instantiate_model(name, params)
    rng = np.random.default_rng(2)
    worst = max(field_identity_residual(m, x) for x in sample_states(m, 1000, rng, 1.5))
    assert worst < 1e-9


@pytest.mark.parametrize("name,params", FLOW_CASES, ids=lambda v: str(v)[:40])
def test_analytic_gradient_matches_finite_differences(name, params):
    m = instantiate_model(name, params)
    if m.H is None or m.dH is None:
        pytest.skip("no Hamiltonian")
    rng = np.random.default_rng(3)
    for x in sample_states(m, 10, rng, 1.0):
        fd = fd_gradient(lambda z: float(m.H(z)), x)
        assert np.max(np.abs(fd - np.asarray(m.dH(x)))) < 1e-5


def test_exact_models_have_omega_minus_dlambda():
    rng = np.random.default_rng(4)
    for name, params in (("circle-linear", {"alpha": 1.0}),
                         ("circle-quadratic", {"alpha": 1.0}),
                         ("mane", {"alpha": 0.5, "d": 1, "y0": 0.3}),
                         ("damped-mechanical", {"alpha": 0.5, "d": 1}),
                         ("radial-contraction", {"a": 0.5}),
                         ("shear-contraction", {"a": 0.5})):
        m = instantiate_model(name, params)
        assert m.exact_symplectic and m.lam is not None
        for x in sample_states(m, 100, rng, 1.0):
            dlam = fd_exterior_derivative_one_form(m.lam, x)
            assert np.max(np.abs(np.asarray(m.Omega(x)) + dlam)) < 1e-6


def test_anosov_cover_frame_checks():
    # cover-level certificates only: the s-coordinate contracts onto the
    # invariant slab, and the frame two-form does not vanish on its tangent
    m = instantiate_model("anosov-cover")
    x0 = np.array([0.2, 0.7, 0.3, 1.5])
    end = m.flow_exact(x0, 10.0)
    lam_minus = (3.0 - math.sqrt(5.0)) / 2.0
    assert end[3] == pytest.approx(1.5 * lam_minus**20, rel=1e-12)
    from csdyn.geometry import eval_two_form

    omega = np.asarray(m.Omega(x0))
    witness = eval_two_form(omega, m.frame[:, 0], m.frame[:, 1])
    assert abs(witness) > 0.9  # contracting direction pairs with the z axis


def test_lee_pair_satisfies_domega_eta_wedge_omega():
    m = instantiate_model("lee-twisted-t1t2")
    rng = np.random.default_rng(5)
    for x in sample_states(m, 20, rng):
        domega = fd_exterior_derivative_two_form(m.Omega, x)
        wedge = wedge_one_two(np.asarray(m.eta(x)), np.asarray(m.Omega(x)))
        for key, val in domega.items():
            assert abs(val - wedge[key]) < 1e-6


def test_circle_linear_liouville_decomposition():
    m = instantiate_model("circle-linear", alpha=1.0)
    rng = np.random.default_rng(6)
    for x in sample_states(m, 200, rng):
        z = np.array([0.0, -x[1]])
        assert np.max(np.abs(np.asarray(m.X(x)) - (m.alpha * z + np.asarray(m.X_sym(x))))) < 1e-12


def test_gauge_equivalence_of_rescaled_pair():
    m = instantiate_model("t2-pair-theta2")

    def omega2(x):
        return np.asarray(m.Omega(x)) / float(m.H(x))

    def eta2(x):
        return np.asarray(m.eta(x)) - np.asarray(m.dH(x)) / float(m.H(x))

    def h2(x):
        return 1.0

    def dh2(x):
        return np.zeros(2)

    gauge = conformal_hamiltonian_field(omega2, eta2, h2, dh2)
    rng = np.random.default_rng(7)
    checked = 0
    while checked < 100:
        x = rng.uniform(0.0, 1.0, size=2)
        if float(m.H(x)) < 0.05:
            continue
        checked += 1
        assert np.max(np.abs(gauge(x) - np.asarray(m.X(x)))) < 1e-9


def test_nonexact_linear_structure():
    m = instantiate_model("nonexact-linear")
    assert m.lam is None  # the form is not exact; no Liouville primitive
    assert m.ratio_a == pytest.approx(CAT_EIG_MINUS**2)
    assert m.ratio_a == pytest.approx(NONEXACT_RATIO)
    x = np.array([0.1, 0.2, 0.3, 0.4, 0.5, -0.6])
    round_trip = m.f_inv(m.f(x))
    from csdyn.geometry import torus_distance

    assert torus_distance(m.spec, round_trip, m.spec.wrap(x)) < 1e-12


def test_contact_lift_of_unit_hamiltonian_is_lee_field():
    b = (math.sqrt(2.0), math.sqrt(3.0))
    lifted = contact_lift(lambda y: 1.0, b, dH=lambda y: np.zeros(3))
    lee = instantiate_model("lee-twisted-t1t2", a1=b[0], a2=b[1])
    rng = np.random.default_rng(8)
    for x in sample_states(lee, 100, rng):
        dev = np.max(np.abs(np.asarray(lifted.X(x)) - np.asarray(lee.X(x))))
        assert dev <= 1e-12


def test_contact_lift_geodesic_for_zero_twist():
    lifted = contact_lift(lambda y: 1.0, (0.0, 0.0), dH=lambda y: np.zeros(3))
    x = np.array([0.1, 0.2, 0.3, 0.4])
    c, s = math.cos(TWO_PI * 0.3), math.sin(TWO_PI * 0.3)
    assert np.allclose(lifted.X(x), [c, s, 0.0, 0.0], atol=1e-15)


def test_contact_lift_fiber_hamiltonian_against_contact_identities():
    # H(x, v) = cos(2 pi v); verify alpha(X) = H and
    # i_X d(alpha) = (dH.R) alpha - dH by central differences
    H3 = lambda y: math.cos(TWO_PI * y[2])
    lifted = contact_lift(H3, (0.0, 0.0))
    rng = np.random.default_rng(9)
    for x in sample_states(lifted, 25, rng):
        y = x[:3]
        c, s = math.cos(TWO_PI * y[2]), math.sin(TWO_PI * y[2])
        alpha = np.array([c, s, 0.0])
        dalpha = np.zeros((3, 3))
        dalpha[2, 0], dalpha[0, 2] = -TWO_PI * s, TWO_PI * s
        dalpha[2, 1], dalpha[1, 2] = TWO_PI * c, -TWO_PI * c
        reeb = np.array([c, s, 0.0])
        xc = np.asarray(lifted.X(x))[:3]
        assert abs(float(alpha @ xc) - H3(y)) < 1e-9
        dh = fd_gradient(lambda z: H3(z), y)
        lhs = xc @ dalpha
        rhs = float(dh @ reeb) * alpha - dh
        assert np.max(np.abs(lhs - rhs)) < 1e-6
        # fiber Hamiltonian gives the horizontal unit field
        assert np.allclose(np.asarray(lifted.X(x)), [1.0, 0.0, 0.0, 0.0], atol=1e-9)


def test_contact_lift_rejects_non_flat_data():
    with pytest.raises(UnsupportedContactError):
        contact_lift(lambda y: 1.0, (0.0, 0.0), contact="round-sphere")


def test_identity_residual_requires_structure():
    m = instantiate_model("anosov-cover")
    with pytest.raises(StructureError):
        field_identity_residual(m, np.zeros(4))
