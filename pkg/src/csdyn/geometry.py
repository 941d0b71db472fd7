"""Coordinate spaces with mixed circle/line axes and chart-level form algebra.

Circle axes have period 1; all trigonometric model code carries the 2*pi
factor explicitly.  Two-forms are dense antisymmetric matrices in chart
coordinates, one-forms are coefficient vectors; there is no symbolic layer.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateFormError, DimensionMismatchError, OpenLoopError

ANGLE = "angle"
LINE = "line"

ANTISYMMETRY_TOL = 1e-14


@dataclass(frozen=True)
class CoordinateSpec:
    """Ordered list of axis kinds for an even-dimensional chart."""

    axes: tuple

    def __post_init__(self):
        axes = tuple(self.axes)
        object.__setattr__(self, "axes", axes)
        if any(a not in (ANGLE, LINE) for a in axes):
            raise ValueError(f"unknown axis kind in {axes}")
        if len(axes) < 2 or len(axes) % 2 != 0:
            raise ValueError("dimension must be even and >= 2")
        object.__setattr__(
            self, "angle_mask", np.array([a == ANGLE for a in axes], dtype=bool)
        )

    @property
    def dim(self):
        return len(self.axes)

    def wrap(self, x):
        """Normalize angle components into [0, 1); line components untouched."""
        x = np.asarray(x, dtype=float)
        out = x.copy()
        out[..., self.angle_mask] = np.mod(out[..., self.angle_mask], 1.0)
        return out

    def delta(self, x, y):
        """Minimal displacement y - x, angle components wrapped into (-0.5, 0.5]."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        d = y - x
        m = self.angle_mask
        d_ang = np.mod(d[..., m] + 0.5, 1.0) - 0.5
        out = d.copy()
        out[..., m] = d_ang
        return out


def torus_distance(spec, x, y):
    """Euclidean distance with per-axis wrap min(|d|, 1-|d|) on angle axes."""
    d = spec.delta(x, y)
    return np.sqrt(np.sum(d * d, axis=-1))


def check_two_form(matrix):
    """Validate a two-form value: antisymmetric within 1e-14, nondegenerate."""
    m = np.asarray(matrix, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionMismatchError(f"two-form matrix must be square, got {m.shape}")
    scale = max(1.0, float(np.max(np.abs(m))))
    if float(np.max(np.abs(m + m.T))) > ANTISYMMETRY_TOL * scale:
        raise DegenerateFormError("two-form matrix is not antisymmetric")
    if abs(np.linalg.det(m)) == 0.0:
        raise DegenerateFormError("two-form matrix is degenerate")
    return m


def eval_two_form(omega, u, v):
    """Pair two tangent vectors against a two-form matrix: u^T omega v.

    Evaluated in antisymmetrized form, so swapping the arguments negates the
    result exactly, including rounding.
    """
    omega = np.asarray(omega, dtype=float)
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    n = omega.shape[-1]
    if omega.shape[-2:] != (n, n) or u.shape[-1] != n or v.shape[-1] != n:
        raise DimensionMismatchError(
            f"shape mismatch: omega {omega.shape}, u {u.shape}, v {v.shape}"
        )
    uv = np.einsum("...i,...ij,...j->...", u, omega, v)
    vu = np.einsum("...i,...ij,...j->...", v, omega, u)
    return 0.5 * (uv - vu)


def interior_product(omega, x):
    """Covector i_X omega, components (i_X omega)_j = sum_i X_i omega_ij."""
    omega = np.asarray(omega, dtype=float)
    x = np.asarray(x, dtype=float)
    return np.einsum("...i,...ij->...j", x, omega)


def conformality_ratio_estimate(jac, omega_x, omega_fx):
    """Least-squares scalar a minimizing ||J^T omega_fx J - a omega_x||_F.

    Returns (ratio, residual) with the residual normalized by ||omega_x||_F.
    The Frobenius fit is robust to near-zero individual entries.
    """
    jac = np.asarray(jac, dtype=float)
    omega_x = np.asarray(omega_x, dtype=float)
    omega_fx = np.asarray(omega_fx, dtype=float)
    if jac.shape != omega_x.shape or omega_x.shape != omega_fx.shape:
        raise DimensionMismatchError("jacobian and form matrices must share shape")
    denom = float(np.tensordot(omega_x, omega_x))
    if denom == 0.0:
        raise DegenerateFormError("omega_x is the zero matrix")
    pulled = jac.T @ omega_fx @ jac
    ratio = float(np.tensordot(pulled, omega_x)) / denom
    residual = float(np.linalg.norm(pulled - ratio * omega_x)) / np.sqrt(denom)
    return ratio, residual


def pullback_residual(jac, omega_x, omega_fx, expected):
    """Max-entry deviation ||J^T omega_fx J - expected * omega_x||_inf."""
    jac = np.asarray(jac, dtype=float)
    omega_x = np.asarray(omega_x, dtype=float)
    omega_fx = np.asarray(omega_fx, dtype=float)
    if jac.shape != omega_x.shape or omega_x.shape != omega_fx.shape:
        raise DimensionMismatchError("jacobian and form matrices must share shape")
    if expected <= 0:
        raise ValueError("expected pullback factor must be positive")
    return float(np.max(np.abs(jac.T @ omega_fx @ jac - expected * omega_x)))


def loop_integral(spec, lambda_eval, loop, closure_tol=1e-9):
    """Composite-trapezoid estimate of the circulation of a 1-form along a loop.

    `loop` is an ordered array of states whose first and last entries agree up
    to angle wrap.  Angle displacements are unwrapped segment by segment; the
    caller must sample densely enough that adjacent samples differ by < 0.5
    per axis.
    """
    pts = np.asarray(loop, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != spec.dim:
        raise DimensionMismatchError("loop must be an (n, dim) array of states")
    if pts.shape[0] < 16:
        raise OpenLoopError("need at least 16 loop samples")
    if float(torus_distance(spec, pts[0], pts[-1])) > closure_tol:
        raise OpenLoopError("loop is not closed (first != last up to wrap)")
    lam = np.asarray(lambda_eval(pts), dtype=float)
    if lam.shape != pts.shape:
        lam = np.stack([np.asarray(lambda_eval(p), dtype=float) for p in pts])
    steps = spec.delta(pts[:-1], pts[1:])
    mid = 0.5 * (lam[:-1] + lam[1:])
    return float(np.sum(mid * steps))


# ---------------------------------------------------------------------------
# finite-difference exterior calculus, used for structural self-checks
# ---------------------------------------------------------------------------

def fd_gradient(f, x, h=1e-6):
    """Central-difference gradient of a scalar function."""
    x = np.asarray(x, dtype=float)
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def fd_jacobian(f, x, h=1e-6):
    """Central-difference Jacobian of a vector function, rows = components."""
    x = np.asarray(x, dtype=float)
    f0 = np.asarray(f(x), dtype=float)
    jac = np.zeros((f0.size, x.size))
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        jac[:, i] = (np.asarray(f(x + e)) - np.asarray(f(x - e))) / (2 * h)
    return jac


def fd_exterior_derivative_one_form(lambda_eval, x, h=1e-6):
    """(d lambda)_ij = d_i lambda_j - d_j lambda_i by central differences."""
    jac = fd_jacobian(lambda_eval, x, h)  # jac[j, i] = d_i lambda_j
    return jac.T - jac


def fd_exterior_derivative_two_form(omega_eval, x, h=1e-6):
    """Components (d omega)(e_i, e_j, e_k) of the exterior derivative.

    Returns a dict {(i, j, k): value} over i < j < k.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    domega = np.zeros((n, n, n))  # domega[i, j, k] = d_i omega_jk
    for i in range(n):
        e = np.zeros_like(x)
        e[i] = h
        domega[i] = (np.asarray(omega_eval(x + e)) - np.asarray(omega_eval(x - e))) / (2 * h)
    out = {}
    for i in range(n):
        for j in range(i + 1, n):
            for k in range(j + 1, n):
                out[(i, j, k)] = domega[i, j, k] + domega[j, k, i] + domega[k, i, j]
    return out


def wedge_one_two(eta, omega):
    """Components (eta ^ omega)(e_i, e_j, e_k) over i < j < k as a dict."""
    eta = np.asarray(eta, dtype=float)
    omega = np.asarray(omega, dtype=float)
    n = eta.size
    out = {}
    for i in range(n):
        for j in range(i + 1, n):
            for k in range(j + 1, n):
                out[(i, j, k)] = (
                    eta[i] * omega[j, k] - eta[j] * omega[i, k] + eta[k] * omega[i, j]
                )
    return out
