"""Registry of the concrete dynamical systems handled by the toolkit.

Every model exposes its vector field or map together with the structural
data (two-form, Liouville/Lee forms, Hamiltonian, analytic Jacobians) that
the diagnostics certify against.  All evaluators broadcast over leading
axes, so a field can be evaluated on an (N, dim) batch of states at once.

Sign conventions
----------------
Exact-symplectic models use omega = -d(lambda) with lambda = p dq, and the
dissipative Hamiltonian field defined by i_X omega = alpha*lambda + dH with
alpha >= 0, so the flow satisfies phi_t^* omega = exp(-alpha t) omega and
the volume contracts.  Conformal-pair models carry alpha = 0; dissipation
enters through the Lee form via i_X Omega = dH - H eta.

The non-exact linear map scales its two fiber coordinates by the cube of
the contracting cat-map eigenvalue: with the torus block acting by A + A
and the registered two-form, that is the only scalar fiber scaling whose
pullback is a constant multiple of the form (eigencovector bookkeeping:
the fiber pairing covectors expand by 1/eig, so eig^3 * (1/eig) matches
the eig^2 scaling of the torus-torus part).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    KindError,
    ParamError,
    StructureError,
    UnknownModelError,
    UnsupportedContactError,
)
from .geometry import ANGLE, LINE, CoordinateSpec, fd_gradient, fd_jacobian

TWO_PI = 2.0 * math.pi

SQRT5 = math.sqrt(5.0)
GOLDEN_CONJ = (SQRT5 - 1.0) / 2.0          # p with p^2 = 1 - p
CAT_EIG_MINUS = (3.0 - SQRT5) / 2.0        # contracting eigenvalue of [[2,1],[1,1]]
NONEXACT_RATIO = (7.0 - 3.0 * SQRT5) / 2.0  # = CAT_EIG_MINUS ** 2
NONEXACT_R_SCALE = 9.0 - 4.0 * SQRT5        # = CAT_EIG_MINUS ** 3, see docstring

MAP = "map"
FLOW = "flow"


@dataclass
class ModelSpec:
    """A registered dynamical system with evaluators and structure flags."""

    name: str
    spec: CoordinateSpec
    kind: str
    params: dict
    alpha: float = 0.0
    ratio_a: float | None = None
    X: object = None            # flow field, state -> tangent
    DX: object = None           # analytic Jacobian of X at a single state
    DX_batch: object = None     # analytic Jacobians on an (N, dim) batch
    f: object = None            # map, state -> state
    Df: object = None           # map Jacobian
    f_inv: object = None        # closed-form inverse map
    H: object = None
    dH: object = None           # analytic gradient of H
    lam: object = None          # Liouville form coefficients
    eta: object = None          # Lee form coefficients
    eta_X: object = None        # closed-form eta(X), exact where it vanishes
    Omega: object = None        # two-form matrix at a state
    X_sym: object = None        # alpha = 0 Hamiltonian part (splitting)
    DX_sym: object = None
    grad_V: object = None       # mechanical models only
    hess_V: object = None
    flow_exact: object = None   # closed-form flow (x, t) -> state, if any
    exact_symplectic: bool = False
    conformal_pair: bool = False
    cotangent_splittable: bool = False
    mechanical: bool = False
    fiber_convex: bool = False
    h_scales: bool = False      # H o phi_t = c_t H holds along the flow
    equilibria: tuple = ()
    frame: object = None        # tangent frame matrix (anosov cover)
    warnings: tuple = ()

    def __post_init__(self):
        if self.kind not in (MAP, FLOW):
            raise ParamError(f"unknown model kind {self.kind!r}")
        if self.kind == FLOW and (self.X is None or self.f is not None):
            raise ParamError("flow models must define X and not f")
        if self.kind == MAP and (self.f is None or self.X is not None):
            raise ParamError("map models must define f and not X")
        if self.Omega is None:
            raise ParamError("models must define Omega")

    @property
    def dim(self):
        return self.spec.dim

    @property
    def d(self):
        return self.spec.dim // 2

    def jacobian(self, x):
        """Analytic field Jacobian, central-difference fallback."""
        if self.DX is not None:
            return np.asarray(self.DX(x), dtype=float)
        x = np.asarray(x, dtype=float)
        h = max(1e-6, 1e-6 * float(np.linalg.norm(x)))
        return fd_jacobian(self.X, x, h=h)


def eval_vector_field(m, x):
    """Evaluate the flow field; the defining identity is certified in tests."""
    if m.kind != FLOW:
        raise KindError(f"{m.name} is a map model; it has no vector field")
    return np.asarray(m.X(np.asarray(x, dtype=float)), dtype=float)


def eval_observables(m, x):
    """All defined observables at x; the two-form is always present."""
    x = np.asarray(x, dtype=float)
    out = {"Omega": np.asarray(m.Omega(x), dtype=float)}
    if m.H is not None:
        out["H"] = m.H(x)
    if m.lam is not None:
        out["lambda"] = np.asarray(m.lam(x), dtype=float)
    if m.eta is not None:
        out["eta"] = np.asarray(m.eta(x), dtype=float)
    return out


def conformal_hamiltonian_field(omega_eval, eta_eval, h_eval, dh_eval):
    """Field of a conformal pair: solve i_X Omega = dH - H eta pointwise."""

    def X(x):
        x = np.asarray(x, dtype=float)
        omega = np.asarray(omega_eval(x), dtype=float)
        rhs = np.asarray(dh_eval(x), dtype=float) - h_eval(x) * np.asarray(
            eta_eval(x), dtype=float
        )
        # i_X Omega as a covector is Omega^T X
        return np.linalg.solve(omega.T, rhs)

    return X


# ---------------------------------------------------------------------------
# shared canonical structures
# ---------------------------------------------------------------------------

def _canonical_omega(d):
    C = np.zeros((2 * d, 2 * d))
    C[:d, d:] = np.eye(d)
    C[d:, :d] = -np.eye(d)
    return C


def _const(matrix):
    matrix = np.asarray(matrix, dtype=float)

    def omega(x):
        return matrix

    return omega


def _tautological_lambda(d):
    def lam(x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        out[..., :d] = x[..., d:]
        return out

    return lam


def _get_params(defaults, params, name):
    merged = dict(defaults)
    for key, val in params.items():
        if key not in defaults:
            raise ParamError(f"unknown parameter {key!r} for model {name!r}")
        merged[key] = val
    return merged


# ---------------------------------------------------------------------------
# model builders
# ---------------------------------------------------------------------------

def _build_radial_contraction(params):
    p = _get_params({"a": 0.5}, params, "radial-contraction")
    a = float(p["a"])
    if not 0.0 < a < 1.0:
        raise ParamError("radial-contraction requires a in (0, 1)")
    spec = CoordinateSpec((ANGLE, LINE))
    df = np.diag([1.0, a])

    def f(x):
        x = np.asarray(x, dtype=float)
        return spec.wrap(np.stack([x[..., 0], a * x[..., 1]], axis=-1))

    def f_inv(x):
        x = np.asarray(x, dtype=float)
        return spec.wrap(np.stack([x[..., 0], x[..., 1] / a], axis=-1))

    return ModelSpec(
        name="radial-contraction",
        spec=spec,
        kind=MAP,
        params=p,
        ratio_a=a,
        f=f,
        Df=lambda x: df,
        f_inv=f_inv,
        lam=_tautological_lambda(1),
        Omega=_const(_canonical_omega(1)),
        exact_symplectic=True,
    )


def _build_shear_contraction(params):
    p = _get_params({"a": 0.5}, params, "shear-contraction")
    a = float(p["a"])
    if not 0.0 < a < 1.0:
        raise ParamError("shear-contraction requires a in (0, 1)")
    spec = CoordinateSpec((LINE, LINE))
    df = np.diag([1.0, a])

    def f(x):
        x = np.asarray(x, dtype=float)
        return np.stack([x[..., 0] + 1.0, a * x[..., 1]], axis=-1)

    def f_inv(x):
        x = np.asarray(x, dtype=float)
        return np.stack([x[..., 0] - 1.0, x[..., 1] / a], axis=-1)

    return ModelSpec(
        name="shear-contraction",
        spec=spec,
        kind=MAP,
        params=p,
        ratio_a=a,
        f=f,
        Df=lambda x: df,
        f_inv=f_inv,
        lam=_tautological_lambda(1),
        Omega=_const(_canonical_omega(1)),
        exact_symplectic=True,
    )


def _build_circle_linear(params):
    p = _get_params({"alpha": 1.0}, params, "circle-linear")
    alpha = float(p["alpha"])
    if alpha <= 0:
        raise ParamError("circle-linear requires alpha > 0")
    warnings = ()
    if not alpha < TWO_PI:
        # formula stays valid, but the saddle structure changes
        warnings = (f"alpha={alpha} outside (0, 2*pi); saddle structure not guaranteed",)
    spec = CoordinateSpec((ANGLE, LINE))

    def X(x):
        x = np.asarray(x, dtype=float)
        th, r = x[..., 0], x[..., 1]
        return np.stack(
            [np.sin(TWO_PI * th), -(alpha + TWO_PI * np.cos(TWO_PI * th)) * r], axis=-1
        )

    def X_sym(x):
        x = np.asarray(x, dtype=float)
        th, r = x[..., 0], x[..., 1]
        return np.stack(
            [np.sin(TWO_PI * th), -TWO_PI * np.cos(TWO_PI * th) * r], axis=-1
        )

    def DX_batch(x):
        x = np.asarray(x, dtype=float)
        th, r = x[..., 0], x[..., 1]
        c, s = np.cos(TWO_PI * th), np.sin(TWO_PI * th)
        out = np.zeros(x.shape[:-1] + (2, 2))
        out[..., 0, 0] = TWO_PI * c
        out[..., 1, 0] = TWO_PI * TWO_PI * s * r
        out[..., 1, 1] = -(alpha + TWO_PI * c)
        return out

    def DX(x):
        return DX_batch(np.asarray(x, dtype=float))

    def DX_sym(x):
        th, r = float(x[0]), float(x[1])
        c, s = math.cos(TWO_PI * th), math.sin(TWO_PI * th)
        return np.array([[TWO_PI * c, 0.0], [TWO_PI * TWO_PI * s * r, -TWO_PI * c]])

    def H(x):
        x = np.asarray(x, dtype=float)
        return x[..., 1] * np.sin(TWO_PI * x[..., 0])

    def dH(x):
        x = np.asarray(x, dtype=float)
        th, r = x[..., 0], x[..., 1]
        return np.stack([TWO_PI * r * np.cos(TWO_PI * th), np.sin(TWO_PI * th)], axis=-1)

    return ModelSpec(
        name="circle-linear",
        spec=spec,
        kind=FLOW,
        params=p,
        alpha=alpha,
        X=X,
        DX=DX,
        DX_batch=DX_batch,
        X_sym=X_sym,
        DX_sym=DX_sym,
        H=H,
        dH=dH,
        lam=_tautological_lambda(1),
        Omega=_const(_canonical_omega(1)),
        exact_symplectic=True,
        cotangent_splittable=True,
        h_scales=True,  # H is fiberwise linear, so H o phi_t = exp(-alpha t) H
        equilibria=(np.array([0.0, 0.0]), np.array([0.5, 0.0])),
        warnings=warnings,
    )


def _build_circle_quadratic(params):
    p = _get_params({"alpha": 1.0}, params, "circle-quadratic")
    alpha = float(p["alpha"])
    if alpha <= 0:
        raise ParamError("circle-quadratic requires alpha > 0")
    spec = CoordinateSpec((ANGLE, LINE))

    def X(x):
        x = np.asarray(x, dtype=float)
        th, r = x[..., 0], x[..., 1]
        return np.stack(
            [
                2.0 * r * np.sin(TWO_PI * th),
                -alpha * r - TWO_PI * r * r * np.cos(TWO_PI * th),
            ],
            axis=-1,
        )

    def X_sym(x):
        x = np.asarray(x, dtype=float)
        th, r = x[..., 0], x[..., 1]
        return np.stack(
            [2.0 * r * np.sin(TWO_PI * th), -TWO_PI * r * r * np.cos(TWO_PI * th)],
            axis=-1,
        )

    def DX_batch(x):
        x = np.asarray(x, dtype=float)
        th, r = x[..., 0], x[..., 1]
        c, s = np.cos(TWO_PI * th), np.sin(TWO_PI * th)
        out = np.zeros(x.shape[:-1] + (2, 2))
        out[..., 0, 0] = 2.0 * r * TWO_PI * c
        out[..., 0, 1] = 2.0 * s
        out[..., 1, 0] = TWO_PI * TWO_PI * r * r * s
        out[..., 1, 1] = -alpha - 2.0 * TWO_PI * r * c
        return out

    def DX(x):
        return DX_batch(np.asarray(x, dtype=float))

    def DX_sym(x):
        th, r = float(x[0]), float(x[1])
        c, s = math.cos(TWO_PI * th), math.sin(TWO_PI * th)
        return np.array(
            [
                [2.0 * r * TWO_PI * c, 2.0 * s],
                [TWO_PI * TWO_PI * r * r * s, -2.0 * TWO_PI * r * c],
            ]
        )

    def H(x):
        x = np.asarray(x, dtype=float)
        return x[..., 1] ** 2 * np.sin(TWO_PI * x[..., 0])

    def dH(x):
        x = np.asarray(x, dtype=float)
        th, r = x[..., 0], x[..., 1]
        return np.stack(
            [TWO_PI * r * r * np.cos(TWO_PI * th), 2.0 * r * np.sin(TWO_PI * th)],
            axis=-1,
        )

    return ModelSpec(
        name="circle-quadratic",
        spec=spec,
        kind=FLOW,
        params=p,
        alpha=alpha,
        X=X,
        DX=DX,
        DX_batch=DX_batch,
        X_sym=X_sym,
        DX_sym=DX_sym,
        H=H,
        dH=dH,
        lam=_tautological_lambda(1),
        Omega=_const(_canonical_omega(1)),
        exact_symplectic=True,
        cotangent_splittable=True,
    )


def _as_matrix(val, d):
    arr = np.asarray(val, dtype=float)
    if arr.ndim == 0:
        arr = arr * np.eye(d)
    arr = arr.reshape(d, d)
    return arr


def _build_mane(params):
    p = _get_params(
        {"alpha": 0.5, "d": 1, "y0": 0.0, "y_sin": 0.0, "y_cos": 0.0},
        params,
        "mane",
    )
    alpha = float(p["alpha"])
    d = int(p["d"])
    if alpha <= 0:
        raise ParamError("mane requires alpha > 0")
    if d not in (1, 2):
        raise ParamError("mane supports d in {1, 2}")
    y0 = np.broadcast_to(np.asarray(p["y0"], dtype=float), (d,)).copy()
    y_sin = _as_matrix(p["y_sin"], d)
    y_cos = _as_matrix(p["y_cos"], d)
    spec = CoordinateSpec((ANGLE,) * d + (LINE,) * d)

    def Y(q):
        s, c = np.sin(TWO_PI * q), np.cos(TWO_PI * q)
        return y0 + np.einsum("ij,...j->...i", y_sin, s) + np.einsum(
            "ij,...j->...i", y_cos, c
        )

    def DY(q):
        # DY[..., i, j] = dY_i/dq_j
        s, c = np.sin(TWO_PI * q), np.cos(TWO_PI * q)
        return TWO_PI * (y_sin * c[..., None, :] - y_cos * s[..., None, :])

    def DYt_p(q, pv):
        return np.einsum("...j,...ji->...i", pv, DY(q))

    def X(x):
        x = np.asarray(x, dtype=float)
        q, pv = x[..., :d], x[..., d:]
        return np.concatenate([pv + Y(q), -DYt_p(q, pv) - alpha * pv], axis=-1)

    def X_sym(x):
        x = np.asarray(x, dtype=float)
        q, pv = x[..., :d], x[..., d:]
        return np.concatenate([pv + Y(q), -DYt_p(q, pv)], axis=-1)

    def _dx(x, with_alpha):
        x = np.asarray(x, dtype=float)
        q, pv = x[:d], x[d:]
        dy = DY(q)
        s, c = np.sin(TWO_PI * q), np.cos(TWO_PI * q)
        # d/dq_k of (tDY p)_i is diagonal for the separable trig field
        m_diag = -(TWO_PI**2) * np.einsum("j,ji->i", pv, y_sin * s + y_cos * c)
        out = np.zeros((2 * d, 2 * d))
        out[:d, :d] = dy
        out[:d, d:] = np.eye(d)
        out[d:, :d] = -np.diag(m_diag)
        out[d:, d:] = -dy.T - (alpha if with_alpha else 0.0) * np.eye(d)
        return out

    def H(x):
        x = np.asarray(x, dtype=float)
        q, pv = x[..., :d], x[..., d:]
        return 0.5 * np.sum(pv * pv, axis=-1) + np.sum(pv * Y(q), axis=-1)

    def dH(x):
        x = np.asarray(x, dtype=float)
        q, pv = x[..., :d], x[..., d:]
        return np.concatenate([DYt_p(q, pv), pv + Y(q)], axis=-1)

    m = ModelSpec(
        name="mane",
        spec=spec,
        kind=FLOW,
        params=p,
        alpha=alpha,
        X=X,
        DX=lambda x: _dx(x, True),
        X_sym=X_sym,
        DX_sym=lambda x: _dx(x, False),
        H=H,
        dH=dH,
        lam=_tautological_lambda(d),
        Omega=_const(_canonical_omega(d)),
        exact_symplectic=True,
        cotangent_splittable=True,
        fiber_convex=True,
    )
    m.Y = Y
    m.DY = DY
    return m


def _build_damped_mechanical(params):
    p = _get_params(
        {"alpha": 0.5, "d": 1, "v_cos": 1.0, "v_sin": 0.0, "v_cross": 0.0},
        params,
        "damped-mechanical",
    )
    alpha = float(p["alpha"])
    d = int(p["d"])
    vx = float(p["v_cross"])
    if alpha <= 0:
        raise ParamError("damped-mechanical requires alpha > 0")
    if d not in (1, 2):
        raise ParamError("damped-mechanical supports d in {1, 2}")
    if vx != 0.0 and d != 2:
        raise ParamError("the coupling term v_cross needs d = 2")
    vc = np.broadcast_to(np.asarray(p["v_cos"], dtype=float), (d,)).copy()
    vs = np.broadcast_to(np.asarray(p["v_sin"], dtype=float), (d,)).copy()
    spec = CoordinateSpec((ANGLE,) * d + (LINE,) * d)

    def V(q):
        out = np.sum(vc * np.cos(TWO_PI * q) + vs * np.sin(TWO_PI * q), axis=-1)
        if vx:
            out = out + vx * np.cos(TWO_PI * (q[..., 0] - q[..., 1]))
        return out

    def grad_V(q):
        out = TWO_PI * (-vc * np.sin(TWO_PI * q) + vs * np.cos(TWO_PI * q))
        if vx:
            cross = -vx * TWO_PI * np.sin(TWO_PI * (q[..., 0] - q[..., 1]))
            out = out.copy()
            out[..., 0] += cross
            out[..., 1] -= cross
        return out

    def hess_V_batch(q):
        q = np.asarray(q, dtype=float)
        diag = (TWO_PI**2) * (-vc * np.cos(TWO_PI * q) - vs * np.sin(TWO_PI * q))
        out = np.zeros(q.shape[:-1] + (d, d))
        for i in range(d):
            out[..., i, i] = diag[..., i]
        if vx:
            cc = -vx * (TWO_PI**2) * np.cos(TWO_PI * (q[..., 0] - q[..., 1]))
            out[..., 0, 0] += cc
            out[..., 1, 1] += cc
            out[..., 0, 1] -= cc
            out[..., 1, 0] -= cc
        return out

    def hess_V(q):
        return hess_V_batch(np.asarray(q, dtype=float))

    def X(x):
        x = np.asarray(x, dtype=float)
        q, pv = x[..., :d], x[..., d:]
        return np.concatenate([pv, -grad_V(q) - alpha * pv], axis=-1)

    def X_sym(x):
        x = np.asarray(x, dtype=float)
        q, pv = x[..., :d], x[..., d:]
        return np.concatenate([pv, -grad_V(q)], axis=-1)

    def _dx(x, with_alpha):
        q = np.asarray(x, dtype=float)[:d]
        out = np.zeros((2 * d, 2 * d))
        out[:d, d:] = np.eye(d)
        out[d:, :d] = -hess_V(q)
        out[d:, d:] = -(alpha if with_alpha else 0.0) * np.eye(d)
        return out

    def DX_batch(x):
        x = np.asarray(x, dtype=float)
        q = x[..., :d]
        out = np.zeros(x.shape[:-1] + (2 * d, 2 * d))
        out[..., :d, d:] = np.eye(d)
        out[..., d:, :d] = -hess_V_batch(q)
        out[..., d:, d:] = -alpha * np.eye(d)
        return out

    def H(x):
        x = np.asarray(x, dtype=float)
        q, pv = x[..., :d], x[..., d:]
        return 0.5 * np.sum(pv * pv, axis=-1) + V(q)

    def dH(x):
        x = np.asarray(x, dtype=float)
        q, pv = x[..., :d], x[..., d:]
        return np.concatenate([grad_V(q), pv], axis=-1)

    # critical points of the separable potential, with p = 0; with coupling
    # they stay critical only when the per-axis roots align modulo 1/2
    eq = []
    for i in range(d):
        base = math.atan2(vs[i], vc[i]) / TWO_PI if (vc[i] or vs[i]) else 0.0
        eq.append(sorted((base % 1.0, (base + 0.5) % 1.0)))
    points = [[]]
    for roots in eq:
        points = [pt + [r] for pt in points for r in roots]
    candidates = [np.array(pt + [0.0] * d) for pt in points]
    equilibria = tuple(
        z for z in candidates if float(np.max(np.abs(grad_V(z[:d])))) < 1e-12
    )

    m = ModelSpec(
        name="damped-mechanical",
        spec=spec,
        kind=FLOW,
        params=p,
        alpha=alpha,
        X=X,
        DX=lambda x: _dx(x, True),
        DX_batch=DX_batch,
        X_sym=X_sym,
        DX_sym=lambda x: _dx(x, False),
        H=H,
        dH=dH,
        lam=_tautological_lambda(d),
        Omega=_const(_canonical_omega(d)),
        grad_V=grad_V,
        hess_V=hess_V,
        exact_symplectic=True,
        cotangent_splittable=True,
        mechanical=True,
        fiber_convex=True,
        equilibria=equilibria,
    )
    m.V = V
    return m


def _nonexact_omega():
    # coordinates (t1, t2, t3, t4, r1, r3); r2 = p r1 and r4 = p r3 eliminated
    p = GOLDEN_CONJ
    C = np.zeros((6, 6))

    def add(i, j, c):
        C[i, j] += c
        C[j, i] -= c

    # Omega_1 = (dt2 - p dt1) ^ (dt4 - p dt3)
    add(1, 3, 1.0)
    add(1, 2, -p)
    add(0, 3, -p)
    add(0, 2, p * p)
    # Omega_2 = induced canonical form: (dt1 + p dt2) ^ dr1 + (dt3 + p dt4) ^ dr3
    add(0, 4, 1.0)
    add(1, 4, p)
    add(2, 5, 1.0)
    add(3, 5, p)
    return C


def _build_nonexact_linear(params):
    p = _get_params({}, params, "nonexact-linear")
    spec = CoordinateSpec((ANGLE, ANGLE, ANGLE, ANGLE, LINE, LINE))
    A = np.array([[2.0, 1.0], [1.0, 1.0]])
    A_inv = np.array([[1.0, -1.0], [-1.0, 2.0]])
    sigma = NONEXACT_R_SCALE
    df = np.zeros((6, 6))
    df[0:2, 0:2] = A
    df[2:4, 2:4] = A
    df[4, 4] = sigma
    df[5, 5] = sigma
    df_inv = np.zeros((6, 6))
    df_inv[0:2, 0:2] = A_inv
    df_inv[2:4, 2:4] = A_inv
    df_inv[4, 4] = 1.0 / sigma
    df_inv[5, 5] = 1.0 / sigma

    def f(x):
        x = np.asarray(x, dtype=float)
        return spec.wrap(np.einsum("ij,...j->...i", df, x))

    def f_inv(x):
        x = np.asarray(x, dtype=float)
        return spec.wrap(np.einsum("ij,...j->...i", df_inv, x))

    return ModelSpec(
        name="nonexact-linear",
        spec=spec,
        kind=MAP,
        params=p,
        ratio_a=NONEXACT_RATIO,
        f=f,
        Df=lambda x: df,
        f_inv=f_inv,
        Omega=_const(_nonexact_omega()),
    )


def _build_t2_pair_theta1(params):
    p = _get_params({}, params, "t2-pair-theta1")
    spec = CoordinateSpec((ANGLE, ANGLE))
    eta_vec = np.array([-TWO_PI, 0.0])
    amp = 2.0 * math.sqrt(2.0) * math.pi

    def X(x):
        x = np.asarray(x, dtype=float)
        th1 = x[..., 0]
        out = np.zeros_like(x)
        out[..., 1] = -amp * np.sin(TWO_PI * (0.125 + th1))
        return out

    def DX(x):
        th1 = float(x[0])
        return np.array(
            [[0.0, 0.0], [-amp * TWO_PI * math.cos(TWO_PI * (0.125 + th1)), 0.0]]
        )

    def H(x):
        x = np.asarray(x, dtype=float)
        return np.sin(TWO_PI * x[..., 0])

    def dH(x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        out[..., 0] = TWO_PI * np.cos(TWO_PI * x[..., 0])
        return out

    def eta_X(x):
        x = np.asarray(x, dtype=float)
        return np.zeros(x.shape[:-1])  # the displayed field has no theta1 component

    return ModelSpec(
        name="t2-pair-theta1",
        spec=spec,
        kind=FLOW,
        params=p,
        X=X,
        DX=DX,
        H=H,
        dH=dH,
        eta=lambda x: eta_vec,
        eta_X=eta_X,
        Omega=_const(_canonical_omega(1)),
        conformal_pair=True,
        h_scales=True,
    )


def _build_t2_pair_theta2(params):
    p = _get_params({}, params, "t2-pair-theta2")
    spec = CoordinateSpec((ANGLE, ANGLE))
    eta_vec = np.array([-TWO_PI, 0.0])

    def X(x):
        x = np.asarray(x, dtype=float)
        th2 = x[..., 1]
        return np.stack(
            [TWO_PI * np.cos(TWO_PI * th2), -TWO_PI * np.sin(TWO_PI * th2)], axis=-1
        )

    def DX(x):
        th2 = float(x[1])
        c, s = math.cos(TWO_PI * th2), math.sin(TWO_PI * th2)
        return np.array([[0.0, -TWO_PI * TWO_PI * s], [0.0, -TWO_PI * TWO_PI * c]])

    def H(x):
        x = np.asarray(x, dtype=float)
        return np.sin(TWO_PI * x[..., 1])

    def dH(x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        out[..., 1] = TWO_PI * np.cos(TWO_PI * x[..., 1])
        return out

    def eta_X(x):
        x = np.asarray(x, dtype=float)
        return -TWO_PI * TWO_PI * np.cos(TWO_PI * x[..., 1])

    return ModelSpec(
        name="t2-pair-theta2",
        spec=spec,
        kind=FLOW,
        params=p,
        X=X,
        DX=DX,
        H=H,
        dH=dH,
        eta=lambda x: eta_vec,
        eta_X=eta_X,
        Omega=_const(_canonical_omega(1)),
        conformal_pair=True,
        h_scales=True,
    )


def rationally_dependent(a1, a2, max_coeff=64, tol=1e-9):
    """Desk-scale integer-relation scan for (1, a1, a2).

    Searches |m1| , |m2| <= max_coeff for m0 + m1 a1 + m2 a2 = 0 with integer
    m0; exact rational independence of floats is undecidable, so this is the
    documented practical gate.
    """
    for m1 in range(-max_coeff, max_coeff + 1):
        for m2 in range(-max_coeff, max_coeff + 1):
            if m1 == 0 and m2 == 0:
                continue
            val = m1 * a1 + m2 * a2
            if abs(val - round(val)) < tol:
                return True
    return False


def _lee_omega_matrix(a1, a2):
    def omega(x):
        x = np.asarray(x, dtype=float)
        v = x[..., 2]
        c, s = np.cos(TWO_PI * v), np.sin(TWO_PI * v)
        shape = x.shape[:-1] + (4, 4)
        C = np.zeros(shape)

        def add(i, j, val):
            C[..., i, j] += val
            C[..., j, i] -= val

        add(0, 1, a1 * s - a2 * c)
        add(0, 2, -TWO_PI * s)
        add(1, 2, TWO_PI * c)
        add(0, 3, c)
        add(1, 3, s)
        return C

    return omega


def _build_lee_twisted(params):
    p = _get_params(
        {"a1": math.sqrt(2.0), "a2": math.sqrt(3.0), "require_independent": False},
        params,
        "lee-twisted-t1t2",
    )
    a1, a2 = float(p["a1"]), float(p["a2"])
    if p["require_independent"] and rationally_dependent(a1, a2):
        raise ParamError(
            "(1, a1, a2) rationally dependent; no-periodic-orbit certificate refused"
        )
    spec = CoordinateSpec((ANGLE, ANGLE, ANGLE, ANGLE))  # (x1, x2, v, theta)
    eta_vec = np.array([a1, a2, 0.0, -1.0])

    def X(x):
        x = np.asarray(x, dtype=float)
        v = x[..., 2]
        c, s = np.cos(TWO_PI * v), np.sin(TWO_PI * v)
        out = np.empty_like(x)
        out[..., 0] = c
        out[..., 1] = s
        out[..., 2] = 0.0
        out[..., 3] = a1 * c + a2 * s
        return out

    def DX(x):
        v = float(x[2])
        c, s = math.cos(TWO_PI * v), math.sin(TWO_PI * v)
        out = np.zeros((4, 4))
        out[0, 2] = -TWO_PI * s
        out[1, 2] = TWO_PI * c
        out[3, 2] = TWO_PI * (-a1 * s + a2 * c)
        return out

    def flow_exact(x, t):
        x = np.asarray(x, dtype=float)
        t = np.asarray(t, dtype=float)
        shape = np.broadcast_shapes(x[..., 0].shape, t.shape)
        v = np.broadcast_to(x[..., 2], shape)
        c, s = np.cos(TWO_PI * v), np.sin(TWO_PI * v)
        out = np.stack(
            [
                np.broadcast_to(x[..., 0], shape) + t * c,
                np.broadcast_to(x[..., 1], shape) + t * s,
                v,
                np.broadcast_to(x[..., 3], shape) + t * (a1 * c + a2 * s),
            ],
            axis=-1,
        )
        return spec.wrap(out)

    def H(x):
        x = np.asarray(x, dtype=float)
        return np.ones(x.shape[:-1]) if x.ndim > 1 else 1.0

    def dH(x):
        return np.zeros_like(np.asarray(x, dtype=float))

    def eta_X(x):
        # eta(L_eta) = 0 identically for the Lee field
        x = np.asarray(x, dtype=float)
        return np.zeros(x.shape[:-1])

    return ModelSpec(
        name="lee-twisted-t1t2",
        spec=spec,
        kind=FLOW,
        params=p,
        X=X,
        DX=DX,
        H=H,
        dH=dH,
        eta=lambda x: eta_vec,
        eta_X=eta_X,
        Omega=_lee_omega_matrix(a1, a2),
        flow_exact=flow_exact,
        conformal_pair=True,
        h_scales=True,
    )


def _build_anosov_cover(params):
    p = _get_params({}, params, "anosov-cover")
    spec = CoordinateSpec((ANGLE, ANGLE, LINE, LINE))  # (xi1, xi2, z, s)
    lam_minus = CAT_EIG_MINUS
    rate = 2.0 * math.log(lam_minus)  # < 0, contraction of the s-coordinate
    phi = (1.0 + SQRT5) / 2.0
    # frame columns: contracting torus direction, z, expanding direction, s
    frame = np.array(
        [
            [1.0, 0.0, 1.0, 0.0],
            [-phi, 0.0, GOLDEN_CONJ, 0.0],
            [0.0, 1.0, 0.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
        ]
    )
    c_can = np.zeros((4, 4))
    c_can[0, 1], c_can[1, 0] = 1.0, -1.0
    c_can[2, 3], c_can[3, 2] = 1.0, -1.0
    f_inv_mat = np.linalg.inv(frame)
    omega_chart = f_inv_mat.T @ c_can @ f_inv_mat

    def X(x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        out[..., 2] = 1.0
        out[..., 3] = rate * x[..., 3]
        return out

    def DX(x):
        out = np.zeros((4, 4))
        out[3, 3] = rate
        return out

    def flow_exact(x, t):
        x = np.asarray(x, dtype=float)
        out = x.copy()
        out[..., 2] = x[..., 2] + t
        out[..., 3] = x[..., 3] * lam_minus ** (2.0 * t)
        return spec.wrap(out)

    m = ModelSpec(
        name="anosov-cover",
        spec=spec,
        kind=FLOW,
        params=p,
        X=X,
        DX=DX,
        Omega=_const(omega_chart),
        flow_exact=flow_exact,
        frame=frame,
    )
    return m


_REGISTRY = {
    "radial-contraction": _build_radial_contraction,
    "shear-contraction": _build_shear_contraction,
    "circle-linear": _build_circle_linear,
    "circle-quadratic": _build_circle_quadratic,
    "mane": _build_mane,
    "damped-mechanical": _build_damped_mechanical,
    "nonexact-linear": _build_nonexact_linear,
    "t2-pair-theta1": _build_t2_pair_theta1,
    "t2-pair-theta2": _build_t2_pair_theta2,
    "lee-twisted-t1t2": _build_lee_twisted,
    "anosov-cover": _build_anosov_cover,
}


def registered_models():
    return sorted(_REGISTRY)


def instantiate_model(name, params=None, **kwargs):
    """Build a validated model by registry name."""
    if name not in _REGISTRY:
        raise UnknownModelError(
            f"unknown model {name!r}; registered: {', '.join(registered_models())}"
        )
    merged = dict(params or {})
    merged.update(kwargs)
    return _REGISTRY[name](merged)


# ---------------------------------------------------------------------------
# contact lift on the flat unit tangent bundle of T^2
# ---------------------------------------------------------------------------

FLAT_T2_CONTACT = "flat-t1t2"


def contact_lift(H, beta, dH=None, contact=FLAT_T2_CONTACT):
    """Lift a contact Hamiltonian on flat T^1 T^2 to its twisted symplectization.

    The contact field X on (Y, alpha) solves alpha(X) = H and
    i_X d(alpha) = (dH.R) alpha - dH; the lifted conformal field appends the
    theta-component beta(X) - dH.R.  H takes the 3-vector (x1, x2, v); dH is
    its analytic gradient, central differences when omitted.
    """
    if contact != FLAT_T2_CONTACT:
        raise UnsupportedContactError(
            f"only the flat torus unit tangent bundle is supported, got {contact!r}"
        )
    b1, b2 = float(beta[0]), float(beta[1])

    def grad_h(y):
        if dH is not None:
            return np.asarray(dH(y), dtype=float)
        return fd_gradient(H, y, h=1e-6)

    def contact_field(y):
        # closed form on the flat structure: X = H R + (dH_v/2pi) T - (dH(T)/2pi) e_v
        y = np.asarray(y, dtype=float)
        c, s = math.cos(TWO_PI * y[2]), math.sin(TWO_PI * y[2])
        g = grad_h(y)
        hval = float(H(y))
        r_vec = np.array([c, s, 0.0])
        t_vec = np.array([-s, c, 0.0])
        dh_t = -s * g[0] + c * g[1]
        dh_v = g[2]
        return hval * r_vec + (dh_v / TWO_PI) * t_vec - (dh_t / TWO_PI) * np.array(
            [0.0, 0.0, 1.0]
        ), g, c, s

    def X(x):
        x = np.asarray(x, dtype=float)
        if x.ndim > 1:
            return np.stack([X(row) for row in x])
        xc, g, c, s = contact_field(x[:3])
        dh_r = c * g[0] + s * g[1]
        theta_dot = b1 * xc[0] + b2 * xc[1] - dh_r
        return np.concatenate([xc, [theta_dot]])

    spec = CoordinateSpec((ANGLE, ANGLE, ANGLE, ANGLE))
    eta_vec = np.array([b1, b2, 0.0, -1.0])

    def H4(x):
        x = np.asarray(x, dtype=float)
        if x.ndim > 1:
            return np.array([float(H(row[:3])) for row in x])
        return float(H(x[:3]))

    def dH4(x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(4)
        out[:3] = grad_h(x[:3])
        return out

    return ModelSpec(
        name="contact-lift",
        spec=spec,
        kind=FLOW,
        params={"beta": (b1, b2)},
        X=X,
        H=H4,
        dH=dH4,
        eta=lambda x: eta_vec,
        Omega=_lee_omega_matrix(b1, b2),
        conformal_pair=True,
        h_scales=True,
    )


# ---------------------------------------------------------------------------
# structural self-checks (used by tests and the verify suite)
# ---------------------------------------------------------------------------

def sample_states(m, n, rng, line_scale=2.0):
    """Random states in the model's chart: angles uniform, lines ~ N(0, scale)."""
    pts = np.empty((n, m.dim))
    mask = m.spec.angle_mask
    pts[:, mask] = rng.uniform(0.0, 1.0, size=(n, int(mask.sum())))
    pts[:, ~mask] = line_scale * rng.standard_normal((n, int((~mask).sum())))
    return pts


def field_identity_residual(m, x):
    """Residual of the defining identity at a single state.

    Exact-symplectic flows: i_X omega - alpha lambda - dH.
    Conformal pairs:        i_X Omega - dH + H eta.
    """
    if m.kind != FLOW:
        raise KindError("field identity applies to flow models")
    x = np.asarray(x, dtype=float)
    omega = np.asarray(m.Omega(x), dtype=float)
    xdot = np.asarray(m.X(x), dtype=float)
    lhs = omega.T @ xdot
    if m.conformal_pair:
        rhs = np.asarray(m.dH(x), dtype=float) - float(m.H(x)) * np.asarray(
            m.eta(x), dtype=float
        )
    elif m.exact_symplectic:
        if m.lam is None or m.dH is None:
            raise StructureError(f"{m.name} lacks lambda/dH for the identity check")
        rhs = m.alpha * np.asarray(m.lam(x), dtype=float) + np.asarray(
            m.dH(x), dtype=float
        )
    else:
        raise StructureError(f"{m.name} declares no Hamiltonian structure")
    return float(np.max(np.abs(lhs - rhs)))
