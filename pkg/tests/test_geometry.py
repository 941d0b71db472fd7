import math

import numpy as np
import pytest

from csdyn.errors import DegenerateFormError, DimensionMismatchError, OpenLoopError
from csdyn.geometry import (
    ANGLE,
    LINE,
    CoordinateSpec,
    conformality_ratio_estimate,
    eval_two_form,
    loop_integral,
    pullback_residual,
    torus_distance,
)
from csdyn.models import NONEXACT_RATIO, GOLDEN_CONJ, instantiate_model, sample_states

CANONICAL = np.array([[0.0, 1.0], [-1.0, 0.0]])


def wedge_expand(terms, dim):
    """Independent oracle: assemble sum of c * dx_i ^ dx_j into a matrix."""
    C = np.zeros((dim, dim))
    for (i, j), c in terms:
        C[i, j] += c
        C[j, i] -= c
    return C


def test_eval_two_form_canonical_pairing():
    assert eval_two_form(CANONICAL, [1.0, 0.0], [0.0, 1.0]) == pytest.approx(1.0)


def test_eval_two_form_vanishes_on_equal_arguments():
    rng = np.random.default_rng(0)
    for _ in range(20):
        u = rng.standard_normal(2)
        assert eval_two_form(CANONICAL, u, u) == 0.0


def test_eval_two_form_exactly_antisymmetric():
    rng = np.random.default_rng(1)
    m = instantiate_model("nonexact-linear")
    omega = np.asarray(m.Omega(np.zeros(6)))
    for _ in range(50):
        u, v = rng.standard_normal((2, 6))
        assert eval_two_form(omega, u, v) == -eval_two_form(omega, v, u)


def test_eval_two_form_dimension_mismatch():
    with pytest.raises(DimensionMismatchError):
        eval_two_form(CANONICAL, [1.0, 0.0, 0.0], [0.0, 1.0])


def test_six_dim_two_form_matches_symbolic_expansion():
    # expand Omega_1 + Omega_2 by hand:
    #   (dt2 - p dt1)^(dt4 - p dt3) + (dt1 + p dt2)^dr1 + (dt3 + p dt4)^dr3
    p = GOLDEN_CONJ
    oracle = wedge_expand(
        [
            ((1, 3), 1.0), ((1, 2), -p), ((0, 3), -p), ((0, 2), p * p),
            ((0, 4), 1.0), ((1, 4), p), ((2, 5), 1.0), ((3, 5), p),
        ],
        6,
    )
    m = instantiate_model("nonexact-linear")
    omega = np.asarray(m.Omega(np.zeros(6)))
    assert np.array_equal(omega, oracle)
    e1, e2 = np.eye(6)[0], np.eye(6)[1]
    assert eval_two_form(omega, e1, e2) == oracle[0, 1]
    assert abs(np.linalg.det(omega)) > 1.0  # nondegenerate


def test_conformality_ratio_identity():
    ratio, residual = conformality_ratio_estimate(np.eye(2), CANONICAL, CANONICAL)
    assert ratio == pytest.approx(1.0)
    assert residual == 0.0


def test_conformality_ratio_nonexact_map():
    m = instantiate_model("nonexact-linear")
    rng = np.random.default_rng(2)
    for x in sample_states(m, 10, rng):
        omega = np.asarray(m.Omega(x))
        ratio, residual = conformality_ratio_estimate(
            np.asarray(m.Df(x)), omega, np.asarray(m.Omega(m.f(x)))
        )
        assert abs(ratio - NONEXACT_RATIO) < 1e-12
        assert residual < 1e-12


def test_conformality_ratio_time_one_tangent_map():
    from csdyn.flows import integrate_variational

    m = instantiate_model("circle-linear", alpha=1.0)
    traj = integrate_variational(m, np.array([0.37, 0.41]), (0.0, 1.0), samples=2)
    ratio, residual = conformality_ratio_estimate(
        traj.final_frame,
        np.asarray(m.Omega(traj.states[0])),
        np.asarray(m.Omega(traj.final_state)),
    )
    assert abs(ratio - math.exp(-1.0)) < 1e-8
    assert residual < 1e-8


def test_conformality_ratio_zero_form_rejected():
    with pytest.raises(DegenerateFormError):
        conformality_ratio_estimate(np.eye(2), np.zeros((2, 2)), CANONICAL)


def test_pullback_residual_identity():
    assert pullback_residual(np.eye(2), CANONICAL, CANONICAL, 1.0) == 0.0


def test_pullback_residual_radial_contraction():
    a = 0.5
    J = np.diag([1.0, a])
    assert pullback_residual(J, CANONICAL, CANONICAL, a) == 0.0


def test_pullback_residual_requires_positive_factor():
    with pytest.raises(ValueError):
        pullback_residual(np.eye(2), CANONICAL, CANONICAL, 0.0)


SPEC_TR = CoordinateSpec((ANGLE, LINE))


def r_dtheta(pts):
    out = np.zeros_like(pts)
    out[..., 0] = pts[..., 1]
    return out


def circle_loop(n, r=1.0):
    s = np.linspace(0.0, 1.0, n + 1)
    return np.stack([np.mod(s, 1.0), np.full_like(s, r)], axis=1)


def test_loop_integral_unit_circle():
    assert loop_integral(SPEC_TR, r_dtheta, circle_loop(2048)) == pytest.approx(
        1.0, abs=1e-10
    )


def test_loop_integral_scaled_circle():
    assert loop_integral(SPEC_TR, r_dtheta, circle_loop(2048, r=2.5)) == pytest.approx(
        2.5, abs=1e-10
    )


def test_loop_integral_constant_loop_is_zero():
    loop = np.tile(np.array([0.3, 1.7]), (32, 1))
    assert loop_integral(SPEC_TR, r_dtheta, loop) == 0.0


def test_loop_integral_second_order_convergence():
    # oracle loop with closed-form circulation 1 + 0.03*pi
    def make(n):
        s = np.linspace(0.0, 1.0, n + 1)
        return np.stack(
            [np.mod(s + 0.1 * np.sin(2 * np.pi * s), 1.0),
             1.0 + 0.3 * np.cos(2 * np.pi * s)],
            axis=1,
        )

    exact = 1.0 + 0.03 * math.pi
    err_n = abs(loop_integral(SPEC_TR, r_dtheta, make(128)) - exact)
    err_2n = abs(loop_integral(SPEC_TR, r_dtheta, make(256)) - exact)
    assert err_2n <= 0.5 * err_n


def test_loop_integral_rejects_open_loop():
    pts = np.stack([np.linspace(0.0, 0.7, 32), np.ones(32)], axis=1)
    with pytest.raises(OpenLoopError):
        loop_integral(SPEC_TR, r_dtheta, pts)


def test_loop_integral_rejects_sparse_loop():
    with pytest.raises(OpenLoopError):
        loop_integral(SPEC_TR, r_dtheta, circle_loop(8))


def test_torus_distance_wraps():
    spec = CoordinateSpec((ANGLE, ANGLE))
    assert torus_distance(spec, [0.95, 0.0], [0.05, 0.0]) == pytest.approx(0.1)


def test_torus_distance_zero_iff_equal():
    spec = CoordinateSpec((ANGLE, LINE))
    x = np.array([0.4, -1.2])
    assert torus_distance(spec, x, x) == 0.0
    assert torus_distance(spec, x, x + np.array([0.0, 1e-9])) > 0.0


def test_torus_distance_mixed_axes():
    spec = CoordinateSpec((ANGLE, LINE))
    d = torus_distance(spec, [0.0, 1.0], [0.5, -1.0])
    assert d == pytest.approx(math.sqrt(0.25 + 4.0), abs=1e-12)


def test_torus_distance_triangle_inequality():
    spec = CoordinateSpec((ANGLE, ANGLE, LINE, LINE))
    rng = np.random.default_rng(3)
    for _ in range(1000):
        x, y, z = rng.uniform(-2.0, 2.0, size=(3, 4))
        assert torus_distance(spec, x, z) <= (
            torus_distance(spec, x, y) + torus_distance(spec, y, z) + 1e-12
        )
