"""Numerical certificates: rotation numbers, transport residuals, spectra,
periodic orbits, attractors, escape statistics, isotropy defects, recurrence
scans and orbit classification.

Every operation is pure given (model, config, seed); ensemble members are
seeded per index so results are identical for any worker count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BlowUpError,
    ConvergenceError,
    NonHyperbolicError,
    ParamError,
    SectionError,
    StructureError,
)
from .flows import (
    BLOWUP,
    IntegratorConfig,
    flow_ensemble,
    integrate_flow,
    integrate_variational,
    iterate_map,
    poincare_return,
    transport_tangents,
)
from .geometry import torus_distance
from .models import MAP

TWO_PI = 2.0 * math.pi


@dataclass
class CheckResult:
    """One named structural check with residual, tolerance and verdict."""

    check: str
    model: str
    params: dict
    residual: float
    tolerance: float
    verdict: str  # PASS | FAIL | PASS-NEGATIVE-CONTROL
    provenance_tag: str
    details: dict = field(default_factory=dict)

    @property
    def passed(self):
        return self.verdict.startswith("PASS")

    def to_json(self):
        return {
            "check": self.check,
            "model": self.model,
            "params": {k: _jsonable(v) for k, v in self.params.items()},
            "residual": self.residual,
            "tolerance": self.tolerance,
            "verdict": self.verdict,
            "provenance_tag": self.provenance_tag,
            "details": {k: _jsonable(v) for k, v in self.details.items()},
        }


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, complex):
        return [v.real, v.imag]
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    return v


def _verdict(residual, tolerance):
    return "PASS" if residual <= tolerance else "FAIL"


# ---------------------------------------------------------------------------
# rotation numbers and conformal transport
# ---------------------------------------------------------------------------

def rotation_number(traj):
    """Final accumulated Lee integral and its time average."""
    if traj.r_accum is None:
        raise StructureError("trajectory carries no rotation integral (model has no eta)")
    if len(traj.times) < 2:
        raise ParamError("zero-length trajectory has no mean rotation")
    span = float(traj.times[-1] - traj.times[0])
    r_T = float(traj.r_accum[-1])
    return r_T, r_T / span


def conformal_transport_check(m, traj, tol=1e-6):
    """Residuals of D^T Omega D = c_t Omega and H o phi_t = c_t H along a trajectory.

    c_t = exp(r_t) for conformal pairs, exp(-alpha t) for exact models.  The
    H-residual is only scored for models whose Hamiltonian scales along the
    flow (conformal pairs and fiberwise-linear exact Hamiltonians).
    """
    if traj.frames is None:
        raise StructureError("conformal transport check needs tangent frames")
    x0 = traj.states[0]
    omega0 = np.asarray(m.Omega(x0), dtype=float)
    norm0 = float(np.linalg.norm(omega0))
    h0 = float(m.H(x0)) if m.H is not None else None
    omega_res = 0.0
    h_res = 0.0
    t0 = float(traj.times[0])
    for i in range(len(traj.times)):
        t = float(traj.times[i]) - t0
        if m.conformal_pair:
            c_t = math.exp(float(traj.r_accum[i]))
        else:
            c_t = math.exp(-m.alpha * t)
        F = traj.frames[i]
        omega_t = np.asarray(m.Omega(traj.states[i]), dtype=float)
        omega_res = max(
            omega_res, float(np.linalg.norm(F.T @ omega_t @ F - c_t * omega0)) / norm0
        )
        if m.H is not None and m.h_scales:
            h_res = max(h_res, abs(float(m.H(traj.states[i])) - c_t * h0))
    residual = max(omega_res, h_res)
    return CheckResult(
        check="conformal-transport",
        model=m.name,
        params=dict(m.params),
        residual=residual,
        tolerance=tol,
        verdict=_verdict(residual, tol),
        provenance_tag="transport/pullback-scaling",
        details={"omega_residual": omega_res, "h_residual": h_res},
    )


# ---------------------------------------------------------------------------
# Lyapunov spectra
# ---------------------------------------------------------------------------

@dataclass
class LyapunovResult:
    exponents: np.ndarray          # sorted descending
    pairing_defect: float
    pairing_target: float
    mean_rotation: float | None
    converged: bool
    history: np.ndarray            # running estimates at each leg


def _pairing_defect(exponents, target):
    ex = np.sort(np.asarray(exponents))[::-1]
    n = len(ex)
    return float(max(abs(ex[i] + ex[n - 1 - i] - target) for i in range(n)))


def lyapunov_spectrum(m, x0, T=200.0, steps=None, cfg=None):
    """Benettin QR exponents over [0, T] with periodic re-orthonormalization.

    The pairing target is -alpha for exact models and the orbit's mean
    rotation for conformal pairs.  Exponents are flagged non-converged when
    the last-quarter drift exceeds 10% of scale.
    """
    if m.kind == MAP:
        return _lyapunov_map(m, x0, int(T))
    cfg = cfg or IntegratorConfig(rel_tol=1e-10, abs_tol=1e-12)
    n = m.dim
    n_legs = int(steps) if steps else max(1, int(round(T / 0.5)))
    dt = T / n_legs
    x = np.asarray(x0, dtype=float)
    Q = np.eye(n)
    sums = np.zeros(n)
    r_total = 0.0
    history = np.zeros((n_legs, n))
    for leg in range(n_legs):
        traj = integrate_variational(
            m, x, (0.0, dt), cfg, samples=2, initial_frame=Q
        )
        if traj.status == BLOWUP:
            raise BlowUpError("orbit blew up during Lyapunov run", t_escape=traj.t_escape)
        F = traj.final_frame
        x = traj.final_state
        if traj.r_accum is not None:
            r_total += traj.r_final
        Q, R = np.linalg.qr(F)
        signs = np.sign(np.diag(R))
        signs[signs == 0] = 1.0
        Q = Q * signs
        sums += np.log(np.abs(np.diag(R)))
        history[leg] = sums / ((leg + 1) * dt)
    exponents = np.sort(sums / T)[::-1]
    mean_rot = r_total / T if m.eta is not None else None
    target = mean_rot if m.conformal_pair else -m.alpha
    defect = _pairing_defect(exponents, target)
    quarter = np.sort(history[3 * n_legs // 4 :], axis=1)[:, ::-1]
    scale = max(float(np.max(np.abs(exponents))), 1e-3)
    drift = float(np.max(np.abs(quarter - exponents[None, :])))
    return LyapunovResult(
        exponents=exponents,
        pairing_defect=defect,
        pairing_target=target,
        mean_rotation=mean_rot,
        converged=drift <= 0.1 * scale,
        history=history,
    )


def _lyapunov_map(m, x0, n_steps):
    traj = iterate_map(m, x0, n_steps)
    n = m.dim
    Q = np.eye(n)
    sums = np.zeros(n)
    history = np.zeros((n_steps, n))
    for k in range(n_steps):
        J = np.asarray(m.Df(traj.states[k]), dtype=float)
        Q, R = np.linalg.qr(J @ Q)
        signs = np.sign(np.diag(R))
        signs[signs == 0] = 1.0
        Q = Q * signs
        sums += np.log(np.abs(np.diag(R)))
        history[k] = sums / (k + 1)
    exponents = np.sort(sums / n_steps)[::-1]
    target = math.log(m.ratio_a) if m.ratio_a else 0.0
    return LyapunovResult(
        exponents=exponents,
        pairing_defect=_pairing_defect(exponents, target),
        pairing_target=target,
        mean_rotation=None,
        converged=True,
        history=history,
    )


# ---------------------------------------------------------------------------
# periodic orbits and Floquet pairing
# ---------------------------------------------------------------------------

@dataclass
class PeriodicOrbit:
    anchor: np.ndarray
    period: float
    samples: np.ndarray
    monodromy: np.ndarray
    multipliers: np.ndarray        # sorted by (modulus, argument)
    mean_rotation: float
    closure_error: float
    pairing_products: np.ndarray
    pairing_defect_modulus: float
    pairing_defect_argument: float
    h_anchor: float | None
    contains_unit_multiplier: bool


def _pairing_products(multipliers, target):
    lams = sorted(multipliers, key=lambda z: (abs(z), np.angle(z)))
    n = len(lams)
    prods = np.array([lams[i] * lams[n - 1 - i] for i in range(n)])
    mod_defect = float(np.max(np.abs(np.abs(prods) - abs(target)))) / max(abs(target), 1e-300)
    ang = np.abs(np.angle(prods))
    arg_defect = float(np.max(np.minimum(ang, 2 * math.pi - ang)))
    return np.array(lams), prods, mod_defect, arg_defect


def find_periodic_orbit(m, sec, guess, cfg=None, newton_tol=1e-12, max_iter=50,
                        backward=False):
    """Newton on the Poincare return map; reports Floquet pairing data.

    With backward=True the search runs on the time-reversed field (the robust
    way to locate repelling orbits); the returned orbit data (monodromy,
    multipliers, mean rotation) is always for the forward flow.
    """
    if sec.axis is None:
        raise SectionError("periodic-orbit search needs an axis section")
    from .flows import time_reversed_view

    cfg = cfg or IntegratorConfig()
    search_model = time_reversed_view(m) if backward else m
    n = m.dim
    red = [i for i in range(n) if i != sec.axis]

    def embed(y):
        x = np.zeros(n)
        x[sec.axis] = sec.offset
        x[red] = y
        return x

    def return_data(y):
        x = embed(y)
        crossings, jacs, times, raccs = poincare_return(search_model, sec, x, 1, cfg)
        delta = m.spec.delta(x, crossings[0])
        return delta[red], jacs[0][np.ix_(red, red)], times[0], raccs[0], crossings[0]

    y = np.asarray(guess, dtype=float)[red] if len(np.asarray(guess)) == n else np.asarray(
        guess, dtype=float
    )
    resid, jac_red, T, racc, x_ret = return_data(y)
    for _ in range(max_iter):
        err = float(np.max(np.abs(resid)))
        if err < newton_tol:
            break
        step = np.linalg.solve(jac_red - np.eye(len(red)), -resid)
        lam = 1.0
        for _ in range(8):
            y_try = y + lam * step
            resid_try, jac_try, T_try, racc_try, x_try = return_data(y_try)
            if float(np.max(np.abs(resid_try))) < err:
                y, resid, jac_red, T, racc, x_ret = (
                    y_try, resid_try, jac_try, T_try, racc_try, x_try,
                )
                break
            lam *= 0.5
        else:
            raise ConvergenceError("periodic-orbit Newton stalled")
    else:
        raise ConvergenceError("periodic-orbit Newton did not converge in 50 iterations")

    anchor = embed(y)
    traj = integrate_variational(m, anchor, (0.0, T), cfg, samples=101)
    monodromy = traj.final_frame
    closure = float(torus_distance(m.spec, anchor, traj.final_state))
    multipliers = np.linalg.eigvals(monodromy)
    mean_rot = (traj.r_final / T) if traj.r_accum is not None else 0.0
    target = math.exp(T * mean_rot)
    lams, prods, mod_defect, arg_defect = _pairing_products(multipliers, target)
    h_anchor = float(m.H(anchor)) if m.H is not None else None
    unit = bool(np.min(np.abs(np.abs(lams) - 1.0)) < 1e-6)
    return PeriodicOrbit(
        anchor=anchor,
        period=T,
        samples=traj.states,
        monodromy=monodromy,
        multipliers=lams,
        mean_rotation=mean_rot,
        closure_error=closure,
        pairing_products=prods,
        pairing_defect_modulus=mod_defect,
        pairing_defect_argument=arg_defect,
        h_anchor=h_anchor,
        contains_unit_multiplier=unit,
    )


# ---------------------------------------------------------------------------
# trapping levels, attractors, invariant manifolds
# ---------------------------------------------------------------------------

def trapping_level(m, n_grid=1024):
    """R = sup_q H(q, 0) on a refined torus grid (fiberwise-convex models)."""
    if m.H is None:
        raise StructureError(f"{m.name} has no Hamiltonian")
    if not m.fiber_convex:
        raise StructureError(f"{m.name} is not fiberwise convex; no trapping level")
    d = m.d

    def h_on_zero_section(qgrid):
        pts = np.concatenate([qgrid, np.zeros_like(qgrid)], axis=-1)
        return np.asarray(m.H(pts), dtype=float)

    axes = [np.linspace(0.0, 1.0, n_grid, endpoint=False) for _ in range(d)]
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
    vals = h_on_zero_section(mesh)
    best = mesh[int(np.argmax(vals))]
    # one refinement pass around the coarse argmax
    half = 1.0 / n_grid
    fine_axes = [np.linspace(b - half, b + half, n_grid) for b in best]
    fine = np.stack(np.meshgrid(*fine_axes, indexing="ij"), axis=-1).reshape(-1, d)
    fvals = h_on_zero_section(fine)
    return float(np.max(fvals))


@dataclass
class AttractorEstimate:
    trap_level: float | None
    cloud: np.ndarray
    invariance_residual: float
    iterations: int
    status: str                 # "trapped" | "not-trapping"
    escaped: int
    occupied_cells: int


def _dedup_cells(spec, pts, eps):
    cells = np.round(spec.wrap(pts) / eps).astype(np.int64)
    # wrap the top cell of angle axes back onto 0
    per = int(round(1.0 / eps))
    cells[:, spec.angle_mask] %= per
    _, idx = np.unique(cells, axis=0, return_index=True)
    return pts[np.sort(idx)]


def _nearest_cloud_distance(spec, pts, cloud, chunk=512):
    out = np.empty(len(pts))
    for i in range(0, len(pts), chunk):
        block = pts[i : i + chunk]
        d = spec.delta(block[:, None, :], cloud[None, :, :])
        out[i : i + chunk] = np.sqrt(np.sum(d * d, axis=-1)).min(axis=1)
    return out


def sample_sublevel_grid(m, R, grid):
    """Rectangular grid sample of the forward-invariant set {H <= R + 1}."""
    d = m.d
    probe = [np.linspace(0.0, 1.0, 64, endpoint=False) for _ in range(d)]
    qmesh = np.stack(np.meshgrid(*probe, indexing="ij"), axis=-1).reshape(-1, d)
    v_min = float(np.min(m.H(np.concatenate([qmesh, np.zeros_like(qmesh)], axis=-1))))
    p_max = math.sqrt(max(2.0 * (R + 1.0 - v_min), 1e-12))
    axes = [np.linspace(0.0, 1.0, grid, endpoint=False) for _ in range(d)]
    axes += [np.linspace(-p_max, p_max, grid) for _ in range(d)]
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 2 * d)
    keep = np.asarray(m.H(mesh), dtype=float) <= R + 1.0
    return mesh[keep]


def sample_box_grid(spec, box, grid):
    axes = []
    for i, (lo, hi) in enumerate(box):
        if spec.axes[i] == "angle":
            axes.append(np.linspace(lo, hi, grid, endpoint=False))
        else:
            axes.append(np.linspace(lo, hi, grid))
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, spec.dim)
    return mesh


def attractor_estimate(m, R=None, t_relax=60.0, grid=33, cfg=None, box=None,
                       eps=1e-3, delta=1.0):
    """Relax a grid sample of the trapping set and measure invariance.

    With `box` given, that compact box is used instead of {H <= R+1}; any
    sample blowing up flags the estimate as not trapping rather than raising.
    """
    cfg = cfg or IntegratorConfig()
    if box is not None:
        seeds = sample_box_grid(m.spec, box, grid)
    else:
        if R is None:
            R = trapping_level(m)
        seeds = sample_sublevel_grid(m, R, grid)
    h = min(cfg.h, 0.01)
    evolved, alive = flow_ensemble(
        m, seeds, t_relax, h=h, blowup_threshold=cfg.blowup_threshold
    )
    escaped = int(np.sum(~alive))
    cloud = _dedup_cells(m.spec, evolved[alive], eps)
    if len(cloud) == 0:
        return AttractorEstimate(R, cloud, math.inf, 0, "not-trapping", escaped, 0)
    pushed, alive2 = flow_ensemble(
        m, cloud, delta, h=h, blowup_threshold=cfg.blowup_threshold
    )
    residual = float(np.max(_nearest_cloud_distance(m.spec, pushed[alive2], cloud)))
    status = "trapped" if (escaped == 0 and bool(np.all(alive2))) else "not-trapping"
    return AttractorEstimate(
        trap_level=R,
        cloud=cloud,
        invariance_residual=residual,
        iterations=int(math.ceil(t_relax / h)),
        status=status,
        escaped=escaped,
        occupied_cells=len(cloud),
    )


def refine_equilibrium(m, z0, max_iter=80, tol=1e-12):
    """Damped Gauss-Newton polish of a field zero from a nearby seed."""
    z = np.asarray(z0, dtype=float).copy()
    fz = np.asarray(m.X(z), dtype=float)
    for _ in range(max_iter):
        if float(np.max(np.abs(fz))) < tol:
            break
        J = m.jacobian(z)
        step, *_ = np.linalg.lstsq(J, -fz, rcond=None)
        lam = 1.0
        for _ in range(10):
            z_try = z + lam * step
            f_try = np.asarray(m.X(z_try), dtype=float)
            if float(np.max(np.abs(f_try))) < float(np.max(np.abs(fz))):
                z, fz = z_try, f_try
                break
            lam *= 0.5
        else:
            break
    return m.spec.wrap(z), float(np.max(np.abs(fz)))


def unstable_manifold_cloud(m, fixed_point, t_grow, cfg=None, seed_radius=1e-4,
                            spacing=2e-3, leg=0.5, seeds_per_leg=8,
                            max_points=40000):
    """Grow the unstable manifold of a hyperbolic equilibrium.

    One-dimensional unstable spaces return an arclength-resampled polyline
    (with unit tangents as 1-column frames); higher-dimensional ones return
    shells of transported points with orthonormal frames spanning the pushed
    unstable directions.
    """
    cfg = cfg or IntegratorConfig()
    fp = np.asarray(fixed_point, dtype=float)
    A = m.jacobian(fp)
    eigvals, eigvecs = np.linalg.eig(A)
    if float(np.min(np.abs(eigvals.real))) < 1e-8:
        raise NonHyperbolicError(f"equilibrium of {m.name} has a near-zero exponent")
    unstable = eigvals.real > 0
    k = int(np.sum(unstable))
    if k == 0:
        raise NonHyperbolicError("no unstable direction at this equilibrium")
    basis = eigvecs[:, unstable]
    real_basis = np.concatenate([basis.real, basis.imag], axis=1)
    q, _ = np.linalg.qr(real_basis)
    # rank of the real span equals the number of unstable eigenvalues
    E = q[:, :k]

    if k == 1:
        return _grow_manifold_polyline(
            m, fp, E[:, 0], float(np.max(eigvals.real)), t_grow, cfg, seed_radius,
            spacing, leg, seeds_per_leg, max_points,
        )
    return _grow_manifold_shells(m, fp, E, t_grow, cfg, seed_radius, leg)


def _grow_manifold_polyline(m, fp, v, mu, t_grow, cfg, r0, spacing, leg,
                            n_seeds, max_points):
    g = math.exp(mu * leg)
    offsets = r0 * g ** (np.arange(n_seeds) / n_seeds)
    n_legs = int(math.ceil(t_grow / leg))
    pieces = []
    for sign in (+1.0, -1.0):
        seeds = fp[None, :] + sign * offsets[:, None] * v[None, :]
        branch = [fp[None, :], seeds]
        current = seeds
        for _ in range(n_legs):
            current, alive = flow_ensemble(
                m, current, leg, h=min(cfg.h, 0.01),
                blowup_threshold=cfg.blowup_threshold,
            )
            if not np.all(alive):
                break
            branch.append(current)
        pts = np.concatenate(branch, axis=0)
        pieces.append(_resample_polyline(m.spec, pts, spacing, max_points // 2))
    points = np.concatenate([p[0] for p in pieces], axis=0)
    frames = np.concatenate([p[1] for p in pieces], axis=0)
    return points, frames


def _resample_polyline(spec, pts, spacing, max_points):
    deltas = spec.delta(pts[:-1], pts[1:])
    seglen = np.sqrt(np.sum(deltas * deltas, axis=-1))
    s = np.concatenate([[0.0], np.cumsum(seglen)])
    total = float(s[-1])
    n_out = min(max(int(total / spacing) + 1, 2), max_points)
    targets = np.linspace(0.0, total, n_out)
    idx = np.clip(np.searchsorted(s, targets, side="right") - 1, 0, len(seglen) - 1)
    frac = (targets - s[idx]) / np.maximum(seglen[idx], 1e-300)
    out = pts[idx] + frac[:, None] * deltas[idx]
    tangents = deltas[idx] / np.maximum(seglen[idx], 1e-300)[:, None]
    return spec.wrap(out), tangents[:, :, None]


def _grow_manifold_shells(m, fp, E, t_grow, cfg, r0, leg):
    n, k = E.shape
    n_dirs = 24
    angles = np.linspace(0.0, 2 * math.pi, n_dirs, endpoint=False)
    if k == 2:
        dirs = np.outer(np.cos(angles), E[:, 0]) + np.outer(np.sin(angles), E[:, 1])
    else:
        rng = np.random.default_rng(12345)
        raw = rng.standard_normal((n_dirs, k))
        raw /= np.linalg.norm(raw, axis=1, keepdims=True)
        dirs = raw @ E.T
    seeds = fp[None, :] + r0 * dirs
    n_legs = int(math.ceil(t_grow / leg))
    points, frames = [], []
    states = seeds
    Qs = np.broadcast_to(E, (n_dirs, n, k)).copy()
    for _ in range(n_legs):
        new_states = np.empty_like(states)
        for i in range(n_dirs):
            traj = integrate_variational(
                m, states[i], (0.0, leg), cfg, samples=2, initial_frame=None
            )
            F = traj.final_frame
            new_states[i] = traj.final_state
            Q, _ = np.linalg.qr(F @ Qs[i])
            Qs[i] = Q[:, :k]
        states = new_states
        points.append(states.copy())
        frames.append(Qs.copy())
    return np.concatenate(points, axis=0), np.concatenate(frames, axis=0)


def isotropy_defect(points, frames, omega_eval, normalize=True):
    """sup over points and frame-column pairs of |Omega(u_i, u_j)|."""
    points = np.asarray(points, dtype=float)
    frames = np.asarray(frames, dtype=float)
    if frames.ndim != 3 or frames.shape[2] < 2:
        raise ParamError("isotropy defect needs frames with k >= 2 columns")
    worst = 0.0
    for x, B in zip(points, frames):
        if normalize:
            B = B / np.linalg.norm(B, axis=0, keepdims=True)
        omega = np.asarray(omega_eval(x), dtype=float)
        M = B.T @ omega @ B
        k = M.shape[0]
        iu = np.triu_indices(k, 1)
        worst = max(worst, float(np.max(np.abs(M[iu]))))
    return worst


# ---------------------------------------------------------------------------
# escape statistics
# ---------------------------------------------------------------------------

@dataclass
class EscapeStats:
    total: int
    escaped: int
    max_steps: int
    box: tuple
    exit_steps: np.ndarray   # first exit step per sample, 0 = never escaped

    def __post_init__(self):
        if self.escaped > self.total:
            raise ParamError("escaped count exceeds total")

    @property
    def escaped_fraction(self):
        return self.escaped / self.total if self.total else 0.0

    def escaped_within(self, n):
        """Escape count had the run been truncated at n steps (monotone in n)."""
        return int(np.sum((self.exit_steps > 0) & (self.exit_steps <= n)))


def _in_box_mask(spec, pts, box):
    inside = np.ones(len(pts), dtype=bool)
    for i, (lo, hi) in enumerate(box):
        if spec.axes[i] == "angle" and hi - lo >= 1.0:
            continue
        inside &= (pts[:, i] >= lo) & (pts[:, i] <= hi)
    return inside


def escape_statistics(m, box, n_steps, samples, seed, exclusion=None,
                      sample_override=None):
    """Backward-orbit escape counts for a map model over a compact box.

    Samples are drawn uniformly in the box with the given seed (rejection
    sampling against `exclusion` when provided); a sample escapes when its
    backward orbit first leaves the box within n_steps.  Samples evolve
    batched but row-independently, so counts match any worker partition.
    """
    if m.kind != MAP:
        raise ParamError("escape statistics is defined for map models")
    if m.f_inv is None:
        raise ParamError(f"{m.name} provides no inverse map")
    box = tuple((float(lo), float(hi)) for lo, hi in box)
    rng = np.random.default_rng(seed)
    if sample_override is not None:
        pts = np.asarray(sample_override, dtype=float)
        samples = len(pts)
    else:
        lo = np.array([b[0] for b in box])
        hi = np.array([b[1] for b in box])
        pts = np.empty((samples, m.dim))
        for i in range(samples):
            while True:
                cand = lo + (hi - lo) * rng.uniform(size=m.dim)
                if exclusion is None or not exclusion(cand):
                    break
            pts[i] = cand
    exit_steps = np.zeros(samples, dtype=np.int64)
    alive = np.ones(samples, dtype=bool)
    current = pts.copy()
    for k in range(1, n_steps + 1):
        act = np.nonzero(alive)[0]
        if len(act) == 0:
            break
        current[act] = np.asarray(m.f_inv(current[act]), dtype=float)
        inside = _in_box_mask(m.spec, current[act], box)
        left = act[~inside]
        exit_steps[left] = k
        alive[left] = False
    escaped = int(np.sum(exit_steps > 0))
    return EscapeStats(
        total=samples, escaped=escaped, max_steps=n_steps, box=box,
        exit_steps=exit_steps,
    )


# ---------------------------------------------------------------------------
# loop cohomology
# ---------------------------------------------------------------------------

def _loop_tangents(spec, loop):
    """Index-derivative tangents of a closed uniformly-parameterized loop.

    Works on the unwrapped lift (cumulated minimal increments), fourth-order
    central differences with periodic extension.
    """
    pts = loop[:-1]  # drop the duplicated closing sample
    inc = spec.delta(pts, np.roll(pts, -1, axis=0))
    lift = np.concatenate([np.zeros((1, pts.shape[1])), np.cumsum(inc, axis=0)])
    winding = lift[-1]
    u = lift[:-1]
    up1 = np.roll(u, -1, axis=0).copy()
    up2 = np.roll(u, -2, axis=0).copy()
    um1 = np.roll(u, 1, axis=0).copy()
    um2 = np.roll(u, 2, axis=0).copy()
    up1[-1:] += winding
    up2[-2:] += winding
    um1[:1] -= winding
    um2[:2] -= winding
    return pts, (-up2 + 8 * up1 - 8 * um1 + um2) / 12.0


def loop_cohomology_check(m, loop, t, cfg=None, tol=1e-7):
    """Transport a closed loop and compare circulations of the Liouville form.

    I_0 is the polygonal trapezoid circulation of the input loop; I_t is the
    circulation of the image loop, evaluated in the source parameterization
    (lambda(phi(x)) . Dphi(x) gamma'(x), periodic trapezoid) so the exponential
    compression of the image does not starve the quadrature.
    PASS iff |I_t - exp(-alpha t) I_0| <= tol * (1 + |I_0|).
    """
    from .geometry import loop_integral

    if m.lam is None:
        raise StructureError(f"{m.name} carries no Liouville form")
    cfg = cfg or IntegratorConfig()
    loop = np.asarray(loop, dtype=float)
    i0 = loop_integral(m.spec, m.lam, loop)
    if t == 0:
        i_t = i0
    else:
        pts, taus = _loop_tangents(m.spec, loop)
        flowed, moved, alive = transport_tangents(
            m, pts, taus, t, h=min(cfg.h, 1e-3),
            blowup_threshold=cfg.blowup_threshold,
        )
        if not np.all(alive):
            raise BlowUpError("a loop point blew up during transport")
        lam_vals = np.asarray(m.lam(flowed), dtype=float)
        i_t = float(np.sum(lam_vals * moved))
    expected = math.exp(-m.alpha * t) * i0
    residual = abs(i_t - expected)
    tolerance = tol * (1.0 + abs(i0))
    return CheckResult(
        check="loop-cohomology",
        model=m.name,
        params=dict(m.params),
        residual=residual,
        tolerance=tolerance,
        verdict=_verdict(residual, tolerance),
        provenance_tag="transport/loop-circulation",
        details={"i0": i0, "i_t": i_t, "expected": expected, "t": t},
    )


# ---------------------------------------------------------------------------
# recurrence scans and orbit classification
# ---------------------------------------------------------------------------

def recurrence_scan(m, x0, t_max, dt, cfg=None):
    """Minimal wrapped return distance over sampled times in [dt, t_max]."""
    if t_max < dt:
        raise ParamError("t_max must be at least dt")
    n = int(math.floor(t_max / dt + 1e-9))
    if n > 1e7:
        raise ParamError("too many recurrence samples (t_max/dt > 1e7)")
    ts = dt * np.arange(1, n + 1)
    x0 = np.asarray(x0, dtype=float)
    if m.flow_exact is not None:
        states = m.flow_exact(x0, ts)
    else:
        traj = integrate_flow(m, x0, (0.0, float(ts[-1])), cfg, times=ts)
        states = traj.states[: len(ts)]
    dists = torus_distance(m.spec, states, x0)
    i = int(np.argmin(dists))
    return float(dists[i]), float(ts[i])


@dataclass
class ClassifyThresholds:
    """Finite-time stand-ins for the asymptotic dichotomy; all configurable."""

    dissipative_slope: float = -0.1
    dissipative_h: float = 1e-3
    conservative_r: float = 1e-4
    return_dist: float = 1e-3


@dataclass
class OrbitClass:
    verdict: str                # "dissipative" | "conservative" | "undetermined"
    r_slope: float
    omega_H_max: float
    min_return_dist: float
    r_abs_max: float

    def __post_init__(self):
        if self.verdict == "dissipative" and not (self.r_slope < 0):
            raise ParamError("dissipative verdict requires a negative rotation slope")


def classify_orbit(m, x0, T, cfg=None, thresholds=None):
    res = classify_ensemble(m, np.asarray(x0, dtype=float)[None, :], T, cfg, thresholds)
    return res[0]


def classify_ensemble(m, starts, T, cfg=None, thresholds=None, h=1e-3):
    """Vectorized finite-time conservative/dissipative classification."""
    if m.eta is None or m.H is None:
        raise StructureError("classification needs both eta and H")
    th = thresholds or ClassifyThresholds()
    cfg = cfg or IntegratorConfig()
    starts = np.asarray(starts, dtype=float)
    n_orb, dim = starts.shape
    n_steps = int(math.ceil(T / h))
    r_series = np.zeros((n_orb, n_steps + 1))
    h_abs_late = np.zeros(n_orb)
    r_abs_max = np.zeros(n_orb)
    min_ret = np.full(n_orb, np.inf)
    settle = max(1, int(0.01 * n_steps))
    late_start = int(0.9 * n_steps)

    from .flows import _eta_contraction, _rk4_step

    eta_dot = _eta_contraction(m)

    def rhs(y):
        x = y[..., :dim]
        f = np.asarray(m.X(x), dtype=float)
        rdot = np.asarray(eta_dot(x), dtype=float)
        return np.concatenate([f, rdot[..., None]], axis=-1)

    Y = np.concatenate([starts, np.zeros((n_orb, 1))], axis=-1)
    for k in range(n_steps):
        hh = min(h, T - k * h)
        X_old = Y[:, :dim].copy()
        Y = _rk4_step(rhs, Y, hh)
        r = Y[:, dim]
        r_series[:, k + 1] = r
        r_abs_max = np.maximum(r_abs_max, np.abs(r))
        if k >= settle:
            # closest approach of the linear step segment to the start point
            a = m.spec.delta(starts, X_old)
            b = m.spec.delta(starts, Y[:, :dim])
            ab = b - a
            denom = np.sum(ab * ab, axis=1)
            s = np.clip(
                -np.sum(a * ab, axis=1) / np.maximum(denom, 1e-300), 0.0, 1.0
            )
            seg = a + s[:, None] * ab
            min_ret = np.minimum(min_ret, np.sqrt(np.sum(seg * seg, axis=1)))
        if k >= late_start:
            h_abs_late = np.maximum(
                h_abs_late, np.abs(np.asarray(m.H(Y[:, :dim]), dtype=float))
            )

    # regression slope of r_t over the last half
    half = n_steps // 2
    ts = h * np.arange(n_steps + 1)[half:]
    ts_c = ts - ts.mean()
    denom = float(np.sum(ts_c * ts_c))
    slopes = (r_series[:, half:] @ ts_c) / denom

    out = []
    for i in range(n_orb):
        if slopes[i] <= th.dissipative_slope and h_abs_late[i] <= th.dissipative_h:
            verdict = "dissipative"
        elif r_abs_max[i] <= th.conservative_r and min_ret[i] <= th.return_dist:
            verdict = "conservative"
        else:
            verdict = "undetermined"
        out.append(
            OrbitClass(
                verdict=verdict,
                r_slope=float(slopes[i]),
                omega_H_max=float(h_abs_late[i]),
                min_return_dist=float(min_ret[i]),
                r_abs_max=float(r_abs_max[i]),
            )
        )
    return out
