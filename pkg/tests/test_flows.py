import math

import numpy as np
import pytest

from csdyn.errors import (
    BlowUpError,
    KindError,
    ParamError,
    PoisonedStateError,
    SectionError,
)
from csdyn.flows import (
    BLOWUP,
    COMPLETED,
    IntegratorConfig,
    SectionSpec,
    conformal_splitting_step,
    flow_ensemble,
    integrate_flow,
    integrate_variational,
    iterate_map,
    poincare_return,
    time_t_map,
)
from csdyn.geometry import LINE, CoordinateSpec, pullback_residual, torus_distance
from csdyn.models import MAP, FLOW, ModelSpec, instantiate_model, sample_states

TWO_PI = 2.0 * math.pi


def riccati_blowup_time(alpha):
    # rdot = -alpha r - 2 pi r^2 from r(0) = -1 escapes at this time
    return math.log(TWO_PI / (TWO_PI - alpha)) / alpha


def test_blowup_time_matches_closed_form():
    m = instantiate_model("circle-quadratic", alpha=1.0)
    t_star = riccati_blowup_time(1.0)
    traj = integrate_flow(m, np.array([0.0, -1.0]), (0.0, 2.0))
    assert traj.status == BLOWUP
    assert abs(traj.t_escape - t_star) < 1e-6
    # the mirrored orbit r -> -r on the theta = 1/2 line escapes at the same time
    traj2 = integrate_flow(m, np.array([0.5, 1.0]), (0.0, 2.0))
    assert traj2.status == BLOWUP
    assert abs(traj2.t_escape - t_star) < 1e-6


def test_spec_anchor_on_theta_half_relaxes_instead_of_blowing_up():
    # negative control for the blow-up certificate: from (1/2, -1) the radial
    # equation is rdot = -r + 2 pi r^2, which relaxes to the invariant circle
    m = instantiate_model("circle-quadratic", alpha=1.0)
    traj = integrate_flow(m, np.array([0.5, -1.0]), (0.0, 2.0))
    assert traj.status == COMPLETED
    assert abs(traj.final_state[1]) < 0.05


def test_integrate_flow_rejects_maps():
    m = instantiate_model("radial-contraction", a=0.5)
    with pytest.raises(KindError):
        integrate_flow(m, np.array([0.0, 1.0]), (0.0, 1.0))


def test_integrate_flow_rejects_zero_span():
    m = instantiate_model("circle-linear", alpha=1.0)
    with pytest.raises(ParamError):
        integrate_flow(m, np.array([0.1, 0.1]), (1.0, 1.0))


def test_damped_energy_never_increases():
    m = instantiate_model("damped-mechanical", alpha=0.5, d=1, v_cos=1.0)
    traj = integrate_flow(m, np.array([0.23, 1.7]), (0.0, 50.0), samples=501)
    h_vals = np.asarray(m.H(traj.states))
    assert np.max(np.diff(h_vals)) < 1e-9


def test_variational_determinant_abel_liouville():
    m = instantiate_model("circle-linear", alpha=1.0)
    traj = integrate_variational(m, np.array([0.13, 0.7]), (0.0, 1.0), samples=2)
    assert abs(np.linalg.det(traj.final_frame) - math.exp(-1.0)) < 1e-8


def test_variational_initial_frame_is_identity():
    m = instantiate_model("circle-linear", alpha=1.0)
    traj = integrate_variational(m, np.array([0.13, 0.7]), (0.0, 0.5), samples=11)
    assert np.array_equal(traj.frames[0], np.eye(2))
    assert traj.times[0] == 0.0


def test_variational_pair_transport():
    m = instantiate_model("t2-pair-theta2")
    traj = integrate_variational(m, np.array([0.1, 0.2]), (0.0, 1.0), samples=2)
    F = traj.final_frame
    omega = np.asarray(m.Omega(traj.states[0]))
    scale = math.exp(traj.r_final)
    assert np.max(np.abs(F.T @ omega @ F - scale * omega)) < 1e-7


@pytest.mark.parametrize("h", [0.1, 0.01, 0.001])
def test_splitting_step_exactly_conformal(h):
    m = instantiate_model("damped-mechanical", alpha=0.5, d=1, v_cos=1.0)
    x = np.array([0.2, 0.3])
    x_new, J = conformal_splitting_step(m, x, h)
    res = pullback_residual(
        J, np.asarray(m.Omega(x)), np.asarray(m.Omega(x_new)), math.exp(-0.5 * h)
    )
    assert res <= 5e-13


def test_splitting_step_midpoint_branch_exactly_conformal():
    m = instantiate_model("mane", alpha=0.5, d=1, y0=0.5, y_sin=-0.5 / TWO_PI)
    x = np.array([0.2, 0.3])
    x_new, J = conformal_splitting_step(m, x, 0.01)
    res = pullback_residual(
        J, np.asarray(m.Omega(x)), np.asarray(m.Omega(x_new)), math.exp(-0.005)
    )
    assert res <= 5e-13


def test_splitting_step_small_h_limit():
    m = instantiate_model("damped-mechanical", alpha=0.5, d=1, v_cos=1.0)
    x = np.array([0.2, 0.3])
    x_new, J = conformal_splitting_step(m, x, 1e-8)
    assert np.max(np.abs(x_new - x)) < 1e-7
    # deviation from the identity scales with h * max(|V''|, alpha)
    assert np.max(np.abs(J - np.eye(2))) < 1e-6


def test_splitting_step_preconditions():
    m = instantiate_model("damped-mechanical", alpha=0.5, d=1, v_cos=1.0)
    with pytest.raises(ParamError):
        conformal_splitting_step(m, np.array([0.2, 0.3]), 0.7)
    m2 = instantiate_model("t2-pair-theta2")
    with pytest.raises(KindError):
        conformal_splitting_step(m2, np.array([0.2, 0.3]), 0.01)


def test_splitting_local_error_order_three():
    m = instantiate_model("damped-mechanical", alpha=0.5, d=1, v_cos=1.0)
    cfg = IntegratorConfig(rel_tol=1e-12, abs_tol=1e-14)
    hs = (0.02, 0.01, 0.005)
    rng = np.random.default_rng(7)
    orders = []
    for x0 in sample_states(m, 6, rng, 1.0):
        errs = []
        for h in hs:
            ref = integrate_flow(m, x0, (0.0, h), cfg, samples=2).final_state
            stepped, _ = conformal_splitting_step(m, x0, h)
            errs.append(np.max(np.abs(stepped - ref)))
        orders.extend(
            math.log(errs[i] / errs[i + 1]) / math.log(2.0) for i in range(2)
        )
    assert 2.7 <= float(np.median(orders)) <= 3.3


def test_iterate_map_shear():
    m = instantiate_model("shear-contraction", a=0.5)
    traj = iterate_map(m, np.array([0.0, 1.0]), 3)
    assert np.allclose(traj.states[-1], [3.0, 0.125])
    assert len(traj.states) == 4


def test_iterate_map_backward_radial():
    m = instantiate_model("radial-contraction", a=0.5)
    traj = iterate_map(m, np.array([0.3, 1.0]), -10)
    assert np.allclose(traj.states[-1], [0.3, 1024.0])


def test_iterate_map_inverse_roundtrip():
    m = instantiate_model("nonexact-linear")
    x = np.array([0.1, 0.7, 0.3, 0.9, 0.4, -1.1])
    fwd = iterate_map(m, x, 1).states[-1]
    back = iterate_map(m, fwd, -1).states[-1]
    assert torus_distance(m.spec, back, m.spec.wrap(x)) < 1e-12


def test_iterate_map_requires_inverse():
    spec = CoordinateSpec((LINE, LINE))
    bare = ModelSpec(
        name="no-inverse", spec=spec, kind=MAP, params={},
        f=lambda x: x + 1.0, Df=lambda x: np.eye(2),
        Omega=lambda x: np.array([[0.0, 1.0], [-1.0, 0.0]]),
    )
    with pytest.raises(KindError):
        iterate_map(bare, np.zeros(2), -1)


def test_iterate_map_frames_accumulate():
    m = instantiate_model("radial-contraction", a=0.5)
    traj = iterate_map(m, np.array([0.3, 1.0]), 3, with_frames=True)
    assert np.allclose(traj.frames[-1], np.diag([1.0, 0.125]))


def test_time_t_map_fixed_point_and_ratio():
    m = instantiate_model("circle-linear", alpha=1.0)
    f1 = time_t_map(m, 1.0)
    assert np.allclose(f1.f(np.array([0.0, 0.0])), [0.0, 0.0], atol=1e-12)
    from csdyn.geometry import conformality_ratio_estimate

    x = np.array([0.37, 0.8])
    ratio, _ = conformality_ratio_estimate(
        np.asarray(f1.Df(x)), np.asarray(m.Omega(x)), np.asarray(m.Omega(f1.f(x)))
    )
    assert abs(ratio - math.exp(-1.0)) < 1e-8
    assert f1.ratio_a == pytest.approx(math.exp(-1.0))


def test_time_t_map_composition():
    m = instantiate_model("circle-linear", alpha=1.0)
    fa, fb, fab = time_t_map(m, 0.4), time_t_map(m, 0.6), time_t_map(m, 1.0)
    x = np.array([0.21, -0.4])
    comp = fb.f(fa.f(x))
    assert torus_distance(m.spec, comp, fab.f(x)) < 1e-8


def test_time_t_map_backward_forward_consistency():
    m = instantiate_model("circle-linear", alpha=1.0)
    f1 = time_t_map(m, 1.0)
    x = np.array([0.67, 0.9])
    assert torus_distance(m.spec, f1.f_inv(f1.f(x)), m.spec.wrap(x)) < 1e-6


def test_time_t_map_propagates_blowup():
    m = instantiate_model("circle-quadratic", alpha=1.0)
    f1 = time_t_map(m, 1.0)
    with pytest.raises(BlowUpError):
        f1.f(np.array([0.0, -1.0]))


def test_time_t_map_requires_nonzero_time():
    m = instantiate_model("circle-linear", alpha=1.0)
    with pytest.raises(ParamError):
        time_t_map(m, 0.0)


def test_poincare_return_time_theta2():
    m = instantiate_model("t2-pair-theta2")
    sec = SectionSpec(axis=0, offset=0.0, direction=1)
    crossings, jacs, times, raccs = poincare_return(m, sec, np.array([0.0, 0.0]), 2)
    assert abs(times[0] - 1.0 / TWO_PI) < 1e-8
    assert abs(times[1] - 2.0 / TWO_PI) < 1e-8
    assert abs(crossings[0][1]) < 1e-9  # stays on the invariant circle


def test_poincare_lee_crossings_equally_spaced():
    m = instantiate_model("lee-twisted-t1t2", a1=math.sqrt(2.0), a2=math.sqrt(3.0))
    x0 = np.array([0.1, 0.2, 0.15, 0.0])
    rate = math.sqrt(2.0) * math.cos(TWO_PI * 0.15) + math.sqrt(3.0) * math.sin(
        TWO_PI * 0.15
    )
    sec = SectionSpec(axis=3, offset=0.0, direction=1 if rate > 0 else -1)
    _, _, times, _ = poincare_return(m, sec, x0, 3)
    gaps = np.diff(times)
    assert np.max(np.abs(gaps - 1.0 / abs(rate))) < 1e-8


def test_section_rejects_zero_gradient():
    with pytest.raises(SectionError):
        SectionSpec(w=np.zeros(2), offset=0.0)


def test_poisoned_field_raises():
    spec = CoordinateSpec((LINE, LINE))
    bad = ModelSpec(
        name="poison", spec=spec, kind=FLOW, params={},
        X=lambda x: np.array([np.nan, 0.0]),
        Omega=lambda x: np.array([[0.0, 1.0], [-1.0, 0.0]]),
    )
    with pytest.raises(PoisonedStateError):
        integrate_flow(bad, np.zeros(2), (0.0, 1.0))


def test_backward_span_flagged_and_consistent():
    m = instantiate_model("circle-linear", alpha=1.0)
    fwd = integrate_flow(m, np.array([0.37, 0.8]), (0.0, 1.0), samples=2)
    back = integrate_flow(m, fwd.final_state, (1.0, 0.0), samples=2)
    assert back.backward
    assert np.all(np.diff(back.times) > 0)
    assert torus_distance(m.spec, back.final_state, fwd.states[0]) < 1e-6
    assert back.r_accum is None  # no Lee form on this model


def test_trajectory_r_accum_starts_at_zero():
    m = instantiate_model("t2-pair-theta2")
    traj = integrate_flow(m, np.array([0.1, 0.2]), (0.0, 1.0), samples=11)
    assert traj.r_accum[0] == 0.0
    assert np.all(np.diff(traj.times) > 0)


def test_flow_ensemble_deterministic_rerun_and_partition():
    m = instantiate_model("t2-pair-theta2")
    batch = np.array([[0.1, 0.2], [0.3, 0.4], [0.5, 0.6], [0.7, 0.8]])
    full, alive, r_full = flow_ensemble(m, batch, 2.0, h=0.01, racc=True)
    again, _, r_again = flow_ensemble(m, batch, 2.0, h=0.01, racc=True)
    # identical shapes are bit-identical; partitions agree to rounding
    assert np.array_equal(full, again)
    assert np.array_equal(r_full, r_again)
    parts, r_parts = [], []
    for half in (batch[:2], batch[2:]):
        out, _, r = flow_ensemble(m, half, 2.0, h=0.01, racc=True)
        parts.append(out)
        r_parts.append(r)
    assert np.allclose(full, np.concatenate(parts), atol=1e-12)
    assert np.allclose(r_full, np.concatenate(r_parts), atol=1e-12)


def test_max_steps_reported():
    m = instantiate_model("circle-linear", alpha=1.0)
    cfg = IntegratorConfig(max_steps=5)
    traj = integrate_flow(m, np.array([0.13, 0.7]), (0.0, 100.0), cfg, samples=11)
    assert traj.status == "max-steps"
