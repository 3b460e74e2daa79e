"""Torus-equivariant curvature and c2 on complex-form ADHM data, fixed sets,
the equivariant Euler class of their normal bundles, the regularised
restriction to reducible data, and Weyl-group helpers.

The torus T^k acts on complex-form data through diagonal unitaries g:
(T, P) -> (g T g^-1, g P).  Its Lie algebra element xi = i diag(c) acts on
C^k (x)_R H, and in the complex representation as kron(xi, 1_2).
"""
import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np
from numpy.polynomial import Polynomial
from numpy.polynomial.legendre import leggauss

from .adhm import AdhmData, _R_complex
from .errors import WrongForm
from .gauge import C2_NORMALIZATION, PAIRS, _curvature_analytic, _frame_parts, _frame_from_parts, _herm, _points
from .geometry import sphere3_rule
from .quat import BASIS2, QMatrix, pfaffian

# c^k(xi) = EQ_NORMALIZATION tr(F_g ^ F_g); the dx1234 coefficient of tr(F ^ F)
# is 2 tr(F12 F34 - F13 F24 + F14 F23), hence half the density constant.
EQ_NORMALIZATION = C2_NORMALIZATION / 2


@dataclass(frozen=True)
class TorusElement:
    """xi = lam * i * diag(coeffs) in the Lie algebra of T^k."""
    coeffs: tuple
    lam: float = 1.0

    @classmethod
    def generator(cls, j, k, lam=1.0):
        """xi_j: i in slot j (1-based), zero elsewhere."""
        if not 1 <= j <= k:
            raise ValueError("need 1 <= j <= k")
        c = [0.0] * k
        c[j - 1] = 1.0
        return cls(tuple(c), lam)

    @property
    def k(self):
        return len(self.coeffs)

    def matrix(self):
        return 1j * self.lam * np.diag(np.asarray(self.coeffs, dtype=float))

    def complex_rep(self):
        return np.kron(self.matrix(), np.eye(2))

    def scaled(self, s):
        return TorusElement(self.coeffs, self.lam * s)

    def exp(self, t=1.0):
        return np.diag(np.exp(1j * t * self.lam * np.asarray(self.coeffs, dtype=float)))


def _require_complex(d):
    if d.form != "complex":
        raise WrongForm("the torus acts on complex-form data; convert with real_complex_convert")


def torus_vector_field(xi, d):
    """X_xi(T, P) = ([xi, T], xi P) as a pair of complex-coefficient QMatrix."""
    _require_complex(d)
    X = xi.matrix()
    Tc = d.T.components()
    Pc = d.P.components()
    dT = np.stack([X @ Tc[m] - Tc[m] @ X for m in range(4)])
    dP = np.stack([X @ Pc[m] for m in range(4)])
    return QMatrix.from_components(dT), QMatrix.from_components(dP)


def vector_field_norm(field_value):
    dT, dP = field_value
    return float(np.sqrt(np.sum(np.abs(dT.data) ** 2) + np.sum(np.abs(dP.data) ** 2)))


# ------------------------------------------------------------- fixed sets

@dataclass(frozen=True)
class FixedSetDescriptor:
    """Sing_j^k: row/column j of T is zero off the diagonal and P_j = 0."""
    j: int
    k: int

    def _others(self):
        return [m for m in range(self.k) if m != self.j - 1]

    def project(self, d):
        _require_complex(d)
        T = np.array(d.T.data)
        P = np.array(d.P.data)
        jj = self.j - 1
        for m in self._others():
            T[m, jj] = 0
            T[jj, m] = 0
        P[jj] = 0
        return AdhmData(QMatrix(T), QMatrix(P), "complex")

    def contains(self, d, tol=1e-12):
        jj = self.j - 1
        off = [d.T.data[m, jj] for m in self._others()] + [d.P.data[jj, 0]]
        return max(float(np.max(np.abs(o))) for o in off) <= tol

    @property
    def normal_dimension(self):
        return 8 * self.k

    def normal_basis(self):
        """Real basis of the normal space as (dT, dP) complex arrays.

        Ordering: for each m != j (increasing) the column-j entry T[m, j]
        (its partner T[j, m] is the adjoint), then P_j; inside an entry the real parts of the (1, i, j, k)
        coefficients, then the imaginary parts.
        """
        k, jj = self.k, self.j - 1
        qconj = np.array([1, -1, -1, -1])
        basis = []
        slots = [("T", m) for m in self._others()] + [("P", jj)]
        for kind, m in slots:
            for part in (1.0, 1j):
                for mu in range(4):
                    e = np.zeros(4, dtype=complex)
                    e[mu] = part
                    dT = np.zeros((k, k, 4), dtype=complex)
                    dP = np.zeros((k, 1, 4), dtype=complex)
                    if kind == "T":
                        dT[m, jj] = e
                        dT[jj, m] = np.conj(e) * qconj
                    else:
                        dP[m, 0] = e
                    basis.append((dT, dP))
        return basis

    def coordinates(self, dT, dP):
        jj = self.j - 1
        out = []
        for m in self._others():
            e = dT[m, jj]
            out += list(e.real) + list(e.imag)
        e = dP[jj, 0]
        out += list(e.real) + list(e.imag)
        return np.array(out)


def _linear_field(xi, dT, dP):
    X = xi.matrix()
    nT = np.einsum("ab,bcm->acm", X, dT) - np.einsum("abm,bc->acm", dT, X)
    nP = np.einsum("ab,bcm->acm", X, dP)
    return nT, nP


def normal_operator(k, j, lam=1.0):
    """Matrix of the infinitesimal action of lam xi_j on the normal space of Sing_j^k."""
    fs = FixedSetDescriptor(j, k)
    xi = TorusElement.generator(j, k, lam)
    cols = [fs.coordinates(*_linear_field(xi, dT, dP)) for dT, dP in fs.normal_basis()]
    return np.stack(cols, axis=1)


@dataclass(frozen=True)
class EulerClassResult:
    exponent: int
    coefficient: float
    lambdas: tuple
    pfaffians: tuple

    def __call__(self, lam):
        return self.coefficient * lam ** self.exponent


def euler_class(k, j, lambdas=(0.5, 1.0, 2.0, 3.0)):
    """Pfaffian of (1/2 pi) times the equivariant curvature of the normal bundle,
    read off as a monomial coefficient * lam^exponent."""
    if not 1 <= j <= k:
        raise ValueError("need 1 <= j <= k")
    pf = []
    for lam in lambdas:
        A = normal_operator(k, j, lam) / (2 * np.pi)
        pf.append(pfaffian(A))
    pf = np.array(pf)
    lam = np.asarray(lambdas, dtype=float)
    slope = np.polyfit(np.log(lam), np.log(np.abs(pf)), 1)[0]
    exponent = int(round(slope))
    coeffs = pf / lam ** exponent
    if np.max(np.abs(coeffs - coeffs[0])) > 1e-9 * abs(coeffs[0]):
        raise ArithmeticError("Pfaffian is not a monomial in lambda")
    return EulerClassResult(exponent, float(coeffs[1] if len(coeffs) > 1 else coeffs[0]), tuple(lambdas), tuple(pf))


# ------------------------------------------------------------- equivariant curvature

def _moment_matrix(d, pts, xi):
    w, _, S = _frame_parts(d, pts)
    v = _frame_from_parts(w, S)
    k = d.k
    L = np.zeros((2 * k + 2, 2 * k + 2), dtype=complex)
    L[:2 * k, :2 * k] = xi.complex_rep()
    return _herm(v) @ L @ v


def equivariant_curvature(d, x, xi):
    """(F, -v^* L(xi) v): curvature matrices (6, n, 2, 2) and the moment term (n, 2, 2)."""
    pts, single = _points(x)
    F = _curvature_analytic(d, pts)
    Mt = -_moment_matrix(d, pts, xi)
    if single:
        return F[:, 0], Mt[0]
    return F, Mt


@dataclass
class EquivariantC2:
    degree4: np.ndarray
    degree2: np.ndarray
    degree0: np.ndarray


def equivariant_c2(d, x, xi):
    """Mixed-degree coefficients of N tr(F_g ^ F_g), F_g = F - v^* L(xi) v.

    degree4: dx1234 coefficient (the ordinary c2 density); degree2: the six
    dx_mu dx_nu coefficients (order 12,13,14,23,24,34) of -2N tr(F M);
    degree0: N tr(M^2), with M = v^* L(xi) v and N = EQ_NORMALIZATION.
    """
    pts, single = _points(x)
    F = _curvature_analytic(d, pts)
    M = _moment_matrix(d, pts, xi)
    tr = lambda a, b: np.real(np.trace(a @ b, axis1=-2, axis2=-1))
    deg4 = C2_NORMALIZATION * (tr(F[0], F[5]) - tr(F[1], F[4]) + tr(F[2], F[3]))
    deg2 = np.stack([-2 * EQ_NORMALIZATION * tr(F[i], M) for i in range(6)], axis=-1)
    deg0 = EQ_NORMALIZATION * tr(M, M)
    if single:
        return EquivariantC2(float(deg4[0]), deg2[0], float(deg0[0]))
    return EquivariantC2(deg4, deg2, deg0)


# ------------------------------------------------------------- reducible data

def split_data(T0, T1, P1):
    """k = 2 complex-form data T = diag(T0, T1), P = (0, P1)."""
    T = np.zeros((2, 2, 4), dtype=complex)
    T[0, 0] = getattr(T0, "array", T0)
    T[1, 1] = getattr(T1, "array", T1)
    P = np.zeros((2, 1, 4), dtype=complex)
    P[1, 0] = getattr(P1, "array", P1)
    return AdhmData(QMatrix(T), QMatrix(P), "complex")


def projector_density(d, x, rho=0.0, block=0):
    """c2 density from Phi = d_mu R^* F_rho d_nu R pi_rho - (mu <-> nu), where
    F_rho = (R R^* + rho^2 Pi)^-1, Pi projects onto quaternion row `block`
    and pi_rho = 1 - R^* F_rho R.  rho = 0 gives the ordinary density."""
    pts, single = _points(x)
    k = d.k
    R = _R_complex(d, pts)
    Pi = np.zeros((2 * k, 2 * k))
    Pi[2 * block:2 * block + 2, 2 * block:2 * block + 2] = np.eye(2)
    Fr = np.linalg.inv(R @ _herm(R) + rho ** 2 * Pi)
    pi = np.eye(2 * k + 2) - _herm(R) @ Fr @ R
    dR = []
    for mu in range(4):
        m = np.zeros((2 * k, 2 * k + 2), dtype=complex)
        m[:, :2 * k] = -np.kron(np.eye(k), np.conj(BASIS2[mu].T))
        dR.append(m)
    Phi = []
    for mu, nu in PAIRS:
        a = np.conj(dR[mu].T) @ Fr @ dR[nu] - np.conj(dR[nu].T) @ Fr @ dR[mu]
        Phi.append(a @ pi)
    tr = lambda a, b: np.real(np.trace(a @ b, axis1=-2, axis2=-1))
    val = C2_NORMALIZATION * (tr(Phi[0], Phi[5]) - tr(Phi[1], Phi[4]) + tr(Phi[2], Phi[3]))
    return float(val[0]) if single else val


def _ball_integral(f, center, radius, scale, n_radial=64, n_u=6, n_xi=8):
    """Integral of f over the ball |x - center| < radius with r = scale tan(theta/2)."""
    t, w = leggauss(n_radial)
    tmax = 2 * np.arctan(radius / scale)
    theta = 0.5 * tmax * (t + 1)
    wt = 0.5 * tmax * w
    r = scale * np.tan(theta / 2)
    wr = wt * scale / (2 * np.cos(theta / 2) ** 2) * r ** 3
    dirs, wd = sphere3_rule(n_u, n_xi)
    pts = np.asarray(center) + (r[:, None, None] * dirs[None]).reshape(-1, 4)
    vals = np.asarray(f(pts))
    return math.fsum((vals * (wr[:, None] * wd[None]).ravel()))


@dataclass
class ReducibleReport:
    rhos: tuple
    far_points: np.ndarray
    far_deviation: tuple
    far_rate: float
    ball_radius: float
    excess_mass: tuple
    mu_excess: tuple
    monotone: bool

    def to_json(self):
        return {"rhos": list(self.rhos), "far_deviation": list(self.far_deviation), "far_rate": self.far_rate,
                "ball_radius": self.ball_radius, "excess_mass": list(self.excess_mass),
                "mu_excess": list(self.mu_excess), "monotone": self.monotone}


def _mu_excess(d, sigma, rho, n_cross=40, n_theta=40, n_u=4, n_xi=8):
    """Crossing integral of the T0-block excess through a 3-sphere sigma.

    T0 runs along the normal line through the pole c + R nhat, oriented inward;
    for each T0 the excess 4-form E(x - T0) is integrated over sigma with the
    moduli slot filled by that direction.  Nodes are clustered at scale rho
    around the crossing point, so the value tends to the unit Poincare-dual
    pairing as rho -> 0.
    """
    k1 = AdhmData(QMatrix(d.T.data[1:, 1:]), QMatrix(d.P.data[1:]), "complex")
    R = sigma.radius
    c = sigma.offset_vector
    frame = sigma.frame_matrix
    nhat = frame[:, 0]
    perp = frame[:, 1:]
    # polar angle from the pole, clustered near 0
    t, w = leggauss(n_theta)
    phi = 0.5 * np.pi * (t + 1)
    wphi = 0.5 * np.pi * w
    a = rho / R
    theta = 2 * np.arctan(a * np.tan(phi / 2))
    wtheta = wphi * a / (np.cos(phi / 2) ** 2 * (1 + (a * np.tan(phi / 2)) ** 2))
    # unit S^2 directions orthogonal to nhat
    tz, wz = leggauss(n_u)
    az = 2 * np.pi * np.arange(n_xi) / n_xi
    Z, A = np.meshgrid(tz, az, indexing="ij")
    Wd = np.broadcast_to(wz[:, None], Z.shape) * (2 * np.pi / n_xi)
    s2 = np.stack([np.sqrt(1 - Z ** 2) * np.cos(A), np.sqrt(1 - Z ** 2) * np.sin(A), Z], -1).reshape(-1, 3)
    Wd = Wd.ravel()
    u = s2 @ perp.T
    ys = c + R * (np.cos(theta)[:, None, None] * nhat + np.sin(theta)[:, None, None] * u[None])
    ys = ys.reshape(-1, 4)
    # oriented volume element times det[t1, t2, t3, nhat]: R^3 sin^2 theta cos theta
    wy = (wtheta * R ** 3 * np.sin(theta) ** 2 * np.cos(theta))[:, None] * Wd[None]
    wy = wy.ravel()
    L = 0.5 * R
    ts, ws = leggauss(n_cross)
    psimax = np.arctan(L / rho)
    psi = psimax * ts
    s = rho * np.tan(psi)
    ws = ws * psimax * rho / np.cos(psi) ** 2
    base = projector_density(k1, ys, 0.0)
    total = 0.0
    for si, wi in zip(s, ws):
        T0 = c + (R - si) * nhat
        dd = AdhmData(QMatrix(_with_T0(d, T0)), d.P, "complex")
        e = projector_density(dd, ys, rho) - base
        total += wi * math.fsum(e * wy)
    return total


def _with_T0(d, T0):
    T = np.array(d.T.data)
    T[0, 0] = T0
    return T


def reducible_restriction_check(d_red, sigma=None, xi=None, rhos=(0.2, 0.1, 0.05, 0.025), far_points=None,
                                ball_radius=None):
    """Numerical check of the restriction of the regularised density to split k=2 data.

    (a) away from T0 the regularised density approaches the k=1 density of (T1, P1);
    (b) its excess over that density near T0 has mass approaching 1;
    (c) for a 3-sphere sigma around T0 the excess, integrated over sigma and across
        it in the T0 direction, approaches the Poincare-dual pairing 1.
    """
    _require_complex(d_red)
    if d_red.k != 2 or np.any(d_red.P.data[0] != 0) or np.any(d_red.T.data[0, 1] != 0):
        raise ValueError("expected split data T = diag(T0, T1), P = (0, P1)")
    T0 = d_red.T.data[0, 0].real
    T1 = d_red.T.data[1, 1].real
    k1 = AdhmData(QMatrix(d_red.T.data[1:, 1:]), QMatrix(d_red.P.data[1:]), "complex")
    sep = float(np.linalg.norm(T1 - T0))
    if far_points is None:
        rng = np.random.default_rng(0)
        dirs = rng.normal(size=(8, 4))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        far_points = T0 + 0.5 * sep * dirs
    if ball_radius is None:
        ball_radius = 0.4 * sep
    c1 = projector_density(k1, far_points, 0.0)
    dev, mass, mu = [], [], []
    for rho in rhos:
        dev.append(float(np.max(np.abs(projector_density(d_red, far_points, rho) - c1))))
        f = lambda p, rho=rho: projector_density(d_red, p, rho) - projector_density(k1, p, 0.0)
        mass.append(_ball_integral(f, T0, ball_radius, rho))
        if sigma is not None:
            mu.append(float(_mu_excess(d_red, sigma, rho)))
    rate = float(np.polyfit(np.log(rhos), np.log(dev), 1)[0])
    err = np.abs(np.array(mass) - 1)
    monotone = bool(np.all(np.diff(err) <= 1e-12))
    return ReducibleReport(tuple(rhos), np.asarray(far_points), tuple(dev), rate, ball_radius, tuple(mass),
                           tuple(mu), monotone)


# ------------------------------------------------------------- Weyl data

@dataclass(frozen=True)
class WeylData:
    k: int
    order: int
    roots: tuple

    def w(self, z):
        """Product over a < b of (z_a - z_b)."""
        z = np.asarray(z)
        out = np.ones(z.shape[:-1], dtype=z.dtype)
        for a, b in self.roots:
            out = out * (z[..., a] - z[..., b])
        return out


def weyl_data(k):
    if k < 1:
        raise ValueError("k must be positive")
    return WeylData(k, math.factorial(k), tuple(combinations(range(k), 2)))


def pr_ev(p):
    """Even part (p(z) + p(-z)) / 2 of a one-variable polynomial."""
    poly = p if isinstance(p, Polynomial) else Polynomial(np.asarray(p, dtype=float))
    c = np.array(poly.coef, dtype=float)
    c[1::2] = 0.0
    out = Polynomial(c)
    return out if isinstance(p, Polynomial) else out.coef
