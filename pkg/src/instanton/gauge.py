"""Connection, curvature and charge density of the instanton built from ADHM data.

All work happens in the complex representation.  With M = (T - x)^*, the
unnormalised kernel frame of R_x = (M, P) is w = [-M^-1 P; 1], S = w^* w and
the unit frame is v = w S^(-1/2).  Curvature uses the projector formula

    F_w = S^-1 (d_mu w^* (1 - w S^-1 w^*) d_nu w - (mu <-> nu)),
    F   = S^(1/2) F_w S^(-1/2),

which only needs first derivatives of w, and d_mu M^-1 = -M^-1 (d_mu M) M^-1.
"""
from dataclasses import dataclass

import numpy as np

from . import jsonio
from .errors import GaugeSingularity
from .quat import BASIS2, QMatrix, Quaternion, c2_to_quat, hamilton, qconj, quat_to_c2

# Orientation of R^4 used by the Hodge star.  With x = x1 + x2 i + x3 j + x4 k
# and M = (T - x)^*, the curvature satisfies F_12 = F_34 in the dx1234
# orientation, i.e. it is anti-self-dual for the opposite orientation.
ORIENTATION = -1

# c2 density = C2_NORMALIZATION * Re tr(F12 F34 - F13 F24 + F14 F23) on the
# 2x2 complex representation.  Fixed by calibrate_normalization() (k=1 charge
# equals 1); the test suite checks the two agree.
C2_NORMALIZATION = -1.0 / (4.0 * np.pi ** 2)

PAIRS = ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3))
SINGULAR_TOL = 1e-6


def _points(x):
    x = np.asarray(getattr(x, "array", x), dtype=float)
    single = x.ndim == 1
    return np.atleast_2d(x), single


def _herm(a):
    return np.conj(np.swapaxes(a, -1, -2))


def _inv_sqrt_and_derivs(S, dS):
    """S^(-1/2), S^(1/2) and directional derivatives of S^(-1/2) (Daleckii-Krein)."""
    s, U = np.linalg.eigh(S)
    f = s ** -0.5
    Sm = (U * f[..., None, :]) @ _herm(U)
    Sp = (U * np.sqrt(s)[..., None, :]) @ _herm(U)
    a = s[..., :, None]
    b = s[..., None, :]
    same = np.abs(a - b) <= 1e-12 * np.maximum(np.abs(a), 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        div = np.where(same, -0.5 * a ** -1.5, (a ** -0.5 - b ** -0.5) / np.where(same, 1.0, a - b))
    dSm = []
    for d in dS:
        inner = _herm(U) @ d @ U
        dSm.append(U @ (inner * div) @ _herm(U))
    return Sm, Sp, np.stack(dSm)


def _frame_parts(d, x):
    """w, d_mu w, S and related quantities for a batch of points (n, 4)."""
    k = d.k
    Tc = d.T.complex_rep()
    Pc = d.P.complex_rep()
    X = quat_to_c2(x)
    M = _herm(Tc[None] - np.einsum("ij,nab->niajb", np.eye(k), X).reshape(-1, 2 * k, 2 * k))
    sv = np.linalg.svd(M, compute_uv=False)[:, -1]
    bad = sv <= SINGULAR_TOL * max(1.0, d.T.norm())
    if np.any(bad):
        raise GaugeSingularity("x = %s is (numerically) a left eigenvalue of T" % (x[np.argmax(bad)],))
    Minv = np.linalg.inv(M)
    top = -Minv @ Pc
    n = len(x)
    w = np.concatenate([top, np.broadcast_to(np.eye(2), (n, 2, 2))], axis=1)
    dw = np.zeros((4, n, 2 * k + 2, 2), dtype=complex)
    top4 = top.reshape(n, k, 2, 2)
    for mu in range(4):
        Eh = np.conj(BASIS2[mu].T)
        dtop = Minv @ np.einsum("ab,nkbc->nkac", Eh, top4).reshape(n, 2 * k, 2)
        dw[mu, :, :2 * k] = dtop
    S = _herm(w) @ w
    return w, dw, S


def _frame_from_parts(w, S):
    s, U = np.linalg.eigh(S)
    return w @ ((U * (s ** -0.5)[..., None, :]) @ _herm(U))


def frame_complex(d, x):
    pts, single = _points(x)
    w, _, S = _frame_parts(d, pts)
    v = _frame_from_parts(w, S)
    return v[0] if single else v


def build_frame(d, x):
    """Unit frame v_x spanning ker R_x, as a quaternion (k+1)-vector."""
    pts, single = _points(x)
    v = frame_complex(d, pts)
    out = [QMatrix.from_complex_rep(vi) for vi in v]
    return out[0] if single else out


def _connection_analytic(d, pts):
    w, dw, S = _frame_parts(d, pts)
    dS = np.stack([_herm(dw[m]) @ w + _herm(w) @ dw[m] for m in range(4)])
    Sm, Sp, dSm = _inv_sqrt_and_derivs(S, dS)
    A = np.stack([Sm @ _herm(w) @ dw[m] @ Sm + Sp @ dSm[m] for m in range(4)])
    return A


def _curvature_analytic(d, pts):
    w, dw, S = _frame_parts(d, pts)
    Sinv = np.linalg.inv(S)
    n2 = w.shape[1]
    proj = np.eye(n2) - w @ Sinv @ _herm(w)
    s, U = np.linalg.eigh(S)
    Sm = (U * (s ** -0.5)[..., None, :]) @ _herm(U)
    Sp = (U * np.sqrt(s)[..., None, :]) @ _herm(U)
    F = []
    for mu, nu in PAIRS:
        a = _herm(dw[mu]) @ proj @ dw[nu]
        Fw = Sinv @ (a - _herm(a))
        F.append(Sp @ Fw @ Sm)
    return np.stack(F)


def _step(pts, h):
    if h is None:
        return 1e-4 * (1.0 + np.linalg.norm(pts, axis=-1))
    return np.broadcast_to(np.asarray(h, dtype=float), (len(pts),)).copy()


def _connection_fd(d, pts, h=None):
    hs = _step(pts, h)
    v0 = frame_complex(d, pts)
    A = []
    for mu in range(4):
        e = np.zeros(4)
        e[mu] = 1.0
        vp = frame_complex(d, pts + hs[:, None] * e)
        vm = frame_complex(d, pts - hs[:, None] * e)
        A.append(_herm(v0) @ (vp - vm) / (2 * hs[:, None, None]))
    return np.stack(A)


def _curvature_fd(d, pts, h=None):
    hs = _step(pts, h)
    A0 = _connection_fd(d, pts, hs)
    dA = []
    for mu in range(4):
        e = np.zeros(4)
        e[mu] = 1.0
        Ap = _connection_fd(d, pts + hs[:, None] * e, hs)
        Am = _connection_fd(d, pts - hs[:, None] * e, hs)
        dA.append((Ap - Am) / (2 * hs[None, :, None, None]))
    F = []
    for mu, nu in PAIRS:
        F.append(dA[mu][nu] - dA[nu][mu] + A0[mu] @ A0[nu] - A0[nu] @ A0[mu])
    return np.stack(F)


def _to_quat(mats):
    q = c2_to_quat(mats)
    if np.max(np.abs(q.imag), initial=0.0) <= 1e-9 * max(1.0, np.max(np.abs(q), initial=0.0)):
        return q.real
    return q


def connection_matrices(d, x, mode="analytic", h=None):
    """A_mu as 2x2 anti-Hermitian matrices, shape (4, n, 2, 2)."""
    pts, _ = _points(x)
    if mode == "analytic":
        return _connection_analytic(d, pts)
    if mode in ("fd", "finite-difference"):
        return _connection_fd(d, pts, h)
    raise ValueError("mode must be 'analytic' or 'finite-difference'")


def curvature_matrices(d, x, mode="analytic", h=None):
    """F_mu_nu for the pairs 12,13,14,23,24,34 as 2x2 matrices, shape (6, n, 2, 2)."""
    pts, _ = _points(x)
    if mode == "analytic":
        return _curvature_analytic(d, pts)
    if mode in ("fd", "finite-difference"):
        return _curvature_fd(d, pts, h)
    raise ValueError("mode must be 'analytic' or 'finite-difference'")


def connection(d, x, mode="analytic", h=None):
    """A_mu(x) = v^* d_mu v as imaginary quaternions: shape (4, 4) or (n, 4, 4)."""
    pts, single = _points(x)
    A = np.moveaxis(_to_quat(connection_matrices(d, pts, mode, h)), 0, 1)
    return A[0] if single else A


def curvature(d, x, mode="analytic", h=None):
    """F_mu_nu(x) for mu < nu (order 12,13,14,23,24,34) as imaginary quaternions."""
    pts, single = _points(x)
    F = np.moveaxis(_to_quat(curvature_matrices(d, pts, mode, h)), 0, 1)
    return F[0] if single else F


def hodge_star(F):
    """Hodge star on 2-form components (..., 6, ...) in the order 12,13,14,23,24,34."""
    F = np.asarray(F)
    f12, f13, f14, f23, f24, f34 = (F[..., i, :] for i in range(6))
    out = np.stack([f34, -f24, f23, f14, -f13, f12], axis=-2)
    return ORIENTATION * out


def asd_residual(F):
    """||F + *F|| / ||F|| per point for F with shape (..., 6, 4)."""
    F = np.asarray(F)
    num = np.sqrt(np.sum(np.abs(F + hodge_star(F)) ** 2, axis=(-2, -1)))
    den = np.sqrt(np.sum(np.abs(F) ** 2, axis=(-2, -1)))
    return num / den


def _raw_density(Fm):
    tr = lambda a, b: np.trace(a @ b, axis1=-2, axis2=-1)
    return np.real(tr(Fm[0], Fm[5]) - tr(Fm[1], Fm[4]) + tr(Fm[2], Fm[3]))


def c2_density(d, x):
    """Coefficient of dx1 dx2 dx3 dx4 in the Chern-Weil form, normalised so the total is k."""
    pts, single = _points(x)
    val = C2_NORMALIZATION * _raw_density(_curvature_analytic(d, pts))
    return float(val[0]) if single else val


def charge(d, quad=None, centers=None):
    """Integral of c2_density over R^4; returns (value, error)."""
    from .geometry import R4QuadratureSpec, integrate_r4
    if quad is None:
        quad = R4QuadratureSpec()
    if centers is None and quad.centers is None:
        diag = d.T.data[np.arange(d.k), np.arange(d.k)].real
        scale = max(float(np.linalg.norm(d.P.data)) / np.sqrt(d.k), 1e-3)
        quad = quad.with_centers(diag, [scale] * d.k)
    return integrate_r4(lambda p: c2_density(d, p), quad)


def calibrate_normalization(rho=1.0, n_theta=64):
    """1 / integral of the raw density for k=1 data (rotationally symmetric)."""
    from .adhm import k1_data
    from numpy.polynomial.legendre import leggauss
    d = k1_data(np.zeros(4), rho)
    t, wt = leggauss(n_theta)
    theta = 0.5 * np.pi * (t + 1)
    wt = 0.5 * np.pi * wt
    r = rho * np.tan(theta / 2)
    dr = rho / (2 * np.cos(theta / 2) ** 2)
    pts = np.zeros((n_theta, 4))
    pts[:, 1] = r
    raw = _raw_density(_curvature_analytic(d, pts))
    total = np.sum(wt * raw * 2 * np.pi ** 2 * r ** 3 * dr)
    return 1.0 / total


@dataclass(frozen=True)
class GaugeSample:
    x: np.ndarray
    v: QMatrix
    A: np.ndarray
    F: np.ndarray
    c2: float

    def to_json(self):
        def enc(a):
            a = np.asarray(a)
            if np.iscomplexobj(a):
                return np.stack([a.real, a.imag], axis=-1).tolist()
            return a.tolist()
        return {"x": enc(self.x), "v": enc(self.v.data[:, 0, :]), "A": enc(self.A), "F": enc(self.F), "c2": float(self.c2)}

    def dumps(self):
        return jsonio.dumps(self.to_json())


def gauge_sample(d, x, mode="analytic"):
    pts, _ = _points(x)
    return GaugeSample(x=pts[0], v=build_frame(d, pts[0]), A=connection(d, pts[0], mode),
                       F=curvature(d, pts[0], mode), c2=c2_density(d, pts[0]))


class ClosedFormK1:
    """Charge one fields written directly in quaternion arithmetic.

    T is the centre, P the framing quaternion (rho = |P|).  These are the
    hand-derived formulas used as oracles for the generic-k code.
    """

    def __init__(self, T, P):
        self.T = np.asarray(getattr(T, "array", T), dtype=float)
        self.P = np.asarray(getattr(P, "array", P), dtype=float)
        self.rho = float(np.linalg.norm(self.P))

    def _xt(self, x):
        pts, single = _points(x)
        return pts - self.T, single

    def delta2(self, x):
        xt, _ = self._xt(x)
        return self.rho ** 2 + np.sum(xt ** 2, axis=-1)

    def frame(self, x):
        """(top, bottom) quaternions of v = |xt|/Delta [xt P / |xt|^2 ; 1]."""
        xt, single = self._xt(x)
        r2 = np.sum(xt ** 2, axis=-1)
        D = np.sqrt(self.rho ** 2 + r2)
        top = hamilton(xt, np.broadcast_to(self.P, xt.shape)) / (np.sqrt(r2) * D)[:, None]
        bot = np.zeros_like(xt)
        bot[:, 0] = np.sqrt(r2) / D
        return (top[0], bot[0]) if single else (top, bot)

    def connection(self, x):
        """A_mu = -(1/(Delta^2 |xt|^2)) Im(P^* conj(e_mu) xt P)."""
        xt, single = self._xt(x)
        r2 = np.sum(xt ** 2, axis=-1)
        D2 = self.rho ** 2 + r2
        Pc = qconj(self.P)
        out = np.zeros((len(xt), 4, 4))
        for mu in range(4):
            e = np.zeros(4)
            e[mu] = 1.0
            q = hamilton(np.broadcast_to(Pc, xt.shape), hamilton(np.broadcast_to(qconj(e), xt.shape),
                                                                   hamilton(xt, np.broadcast_to(self.P, xt.shape))))
            q[:, 0] = 0.0
            out[:, mu] = -q / (D2 * r2)[:, None]
        return out[0] if single else out

    def curvature(self, x):
        """F_mu_nu = (1/(Delta^4 |xt|^2)) P^* conj(xt) (e_mu conj(e_nu) - e_nu conj(e_mu)) xt P."""
        xt, single = self._xt(x)
        r2 = np.sum(xt ** 2, axis=-1)
        D2 = self.rho ** 2 + r2
        Pc = qconj(self.P)
        out = np.zeros((len(xt), 6, 4))
        eye = np.eye(4)
        for i, (mu, nu) in enumerate(PAIRS):
            m = hamilton(eye[mu], qconj(eye[nu])) - hamilton(eye[nu], qconj(eye[mu]))
            inner = hamilton(np.broadcast_to(m, xt.shape), hamilton(xt, np.broadcast_to(self.P, xt.shape)))
            q = hamilton(np.broadcast_to(Pc, xt.shape), hamilton(qconj(xt), inner))
            out[:, i] = q / (D2 ** 2 * r2)[:, None]
        return out[0] if single else out

    def c2(self, x):
        D2 = self.delta2(x)
        val = 6 * self.rho ** 4 / (np.pi ** 2 * D2 ** 4)
        return float(val[0]) if np.ndim(val) and len(val) == 1 and np.ndim(x) == 1 else val
