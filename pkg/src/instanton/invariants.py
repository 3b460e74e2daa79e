"""Linking numbers, charge-one mu-forms, the Donaldson integral Don_1 and
delta-family limits.

Moduli of charge one (after fixing the framing) are (T, rho) in R^4 x (0, inf),
oriented by (T1, T2, T3, T4, rho).  On R^4 x moduli the universal charge
density form is

    c = a dxt_1 ^ dxt_2 ^ dxt_3 ^ dxt_4 + b drho ^ alpha,     xt = x - T,
    a = 6 rho^4 / (pi^2 Delta^8),  b = 6 rho^3 / (pi^2 Delta^8),
    alpha(v1, v2, v3) = -det[xt, v1, v2, v3],

which equals -d(f alpha) with f = (|xt|^2 + 3 rho^2) / (2 pi^2 Delta^6), so it
is closed.
"""
import math
from dataclasses import dataclass, field

import numpy as np

from . import jsonio
from .errors import DimensionBudgetViolated, DimensionMismatch, NotDisjoint
from .geometry import (R4QuadratureSpec, _fsum, chunked_map, check_disjoint, form_basis, integrate_r4,
                       min_distance, wedge)

VOL_S3 = 2 * np.pi ** 2


# ------------------------------------------------------------- Gauss linking

@dataclass(frozen=True)
class LinkingResult:
    value: float
    error: float
    config: tuple

    @property
    def nearest_integer(self):
        return int(round(self.value))

    def to_json(self):
        return {"value": float(self.value), "error": float(self.error), "nearest_integer": self.nearest_integer,
                "config": {"d1": self.config[0], "d2": self.config[1]}}


def _link_sum(a, b, order_a, order_b):
    pa, ta, wa = a.sample(order_a)
    pb, tb, wb = b.sample(order_b)
    total = []
    chunk = max(1, 200000 // max(1, len(pb)))
    for i in range(0, len(pa), chunk):
        xt = pa[i:i + chunk, None, :] - pb[None, :, :]
        n1, n2 = xt.shape[:2]
        cols = [xt]
        cols += [np.broadcast_to(ta[i:i + chunk, None, j, :], (n1, n2, 4)) for j in range(a.dim)]
        cols += [np.broadcast_to(-tb[None, :, j, :], (n1, n2, 4)) for j in range(b.dim)]
        det = np.linalg.det(np.stack(cols, axis=-1))
        r4 = np.sum(xt ** 2, axis=-1) ** 2
        vals = -det / r4 / (2 * np.pi ** 2)
        total.append(_fsum(vals * wa[i:i + chunk, None] * wb[None, :]))
    return math.fsum(total)


def gauss_link(a, b, order=None):
    """Gauss linking integral of a (dim d1) and b (dim d2), d1 + d2 = 3.

    Integrates -(1/2 pi^2) |xt|^-4 det[xt, t^a..., -t^b...] with xt = x_a - x_b,
    i.e. the pull-back of alpha / (2 pi^2 |xt|^4) along (x_a, x_b) -> xt.
    """
    if a.dim + b.dim != 3:
        raise DimensionMismatch("dimensions %d + %d must sum to 3" % (a.dim, b.dim))
    dist = min_distance(a, b)
    if dist <= 1e-9:
        raise NotDisjoint("submanifolds intersect (distance %.3g)" % dist)
    oa = order or a.order
    ob = order or b.order
    fine = _link_sum(a, b, oa, ob)
    coarse = _link_sum(a, b, max(3, (2 * oa) // 3), max(3, (2 * ob) // 3))
    return LinkingResult(fine, abs(fine - coarse), (a.dim, b.dim))


# ------------------------------------------------------------- the form c

def f_profile(r, rho):
    """f = (|xt|^2 + 3 rho^2) / (2 pi^2 (|xt|^2 + rho^2)^3) at |xt| = r."""
    return (r ** 2 + 3 * rho ** 2) / (2 * np.pi ** 2 * (r ** 2 + rho ** 2) ** 3)


def c_form_evaluate(x, T, rho, vectors):
    """c(V1, V2, V3, V4) for vectors in (x, T, rho) space, shape (..., 4, 9)."""
    x = np.asarray(x, dtype=float)
    T = np.asarray(T, dtype=float)
    rho = np.asarray(rho, dtype=float)
    V = np.asarray(vectors, dtype=float)
    xt = x - T
    D2 = rho ** 2 + np.sum(xt ** 2, axis=-1)
    a = 6 * rho ** 4 / (np.pi ** 2 * D2 ** 4)
    b = 6 * rho ** 3 / (np.pi ** 2 * D2 ** 4)
    xi = V[..., :, 0:4] - V[..., :, 4:8]
    r = V[..., :, 8]
    val = a * np.linalg.det(xi)
    xtb = np.broadcast_to(xt[..., None, :], xi.shape[:-2] + (1, 4))
    for i in range(4):
        if not np.any(r[..., i]):
            continue
        rest = np.concatenate([xi[..., :i, :], xi[..., i + 1:, :]], axis=-2)
        alpha = -np.linalg.det(np.concatenate([xtb, rest], axis=-2))
        val = val + b * (-1) ** i * r[..., i] * alpha
    return val


def _moduli_vectors(p):
    """Unit vectors in (x, T, rho) space for the moduli multi-indices of degree p."""
    out = []
    for I in form_basis(p, 5):
        vs = np.zeros((p, 9))
        for j, idx in enumerate(I):
            vs[j, 4 + idx] = 1.0
        out.append(vs)
    return out


def mu_density(x, tangents, T, rho):
    """Components on form_basis(4 - d, 5) of I -> c(t_1..t_d, e_I) at surface points.

    x (n, 4), tangents (n, d, 4), T (n, 4), rho (n,).
    """
    x = np.asarray(x, dtype=float)
    n, d = tangents.shape[:2]
    tv = np.zeros((n, d, 9))
    tv[:, :, :4] = tangents
    comps = []
    for mv in _moduli_vectors(4 - d):
        V = np.concatenate([tv, np.broadcast_to(mv, (n,) + mv.shape)], axis=1)
        comps.append(c_form_evaluate(x, T, rho, V))
    return np.stack(comps, axis=-1)


@dataclass
class MuFormK1:
    """mu(Sigma) = integral over Sigma of c: a (4 - d)-form on the moduli (T, rho)."""
    sigma: object
    order: int = None

    @property
    def degree(self):
        return 4 - self.sigma.dim

    def components(self, T, rho, order=None):
        """Components on form_basis(degree, 5) at one moduli point."""
        pts, tang, w = self.sigma.sample(order or self.order or self.sigma.order)
        n = len(pts)
        dens = mu_density(pts, tang, np.broadcast_to(np.asarray(T, float), (n, 4)), np.full(n, float(rho)))
        return np.array([_fsum(dens[:, i] * w) for i in range(dens.shape[1])])

    def evaluate(self, T, rho, moduli_vectors, order=None):
        """mu(m_1, ..., m_{4-d}) for moduli tangent vectors (T-part, rho-part) of shape (4-d, 5)."""
        mv = np.asarray(moduli_vectors, dtype=float).reshape(self.degree, 5)
        comps = self.components(T, rho, order)
        total = 0.0
        for i, I in enumerate(form_basis(self.degree, 5)):
            total += comps[i] * (np.linalg.det(mv[:, list(I)]) if self.degree else 1.0)
        return total


def mu_form_k1(sigma, order=None):
    return MuFormK1(sigma, order)


def moduli_exterior_derivative(mu, T, rho, h=1e-4, order=None):
    """Central-difference d(mu) at a moduli point: components on form_basis(p+1, 5)."""
    p = mu.degree
    base = np.concatenate([np.asarray(T, float), [float(rho)]])
    grads = []
    for i in range(5):
        e = np.zeros(5)
        e[i] = h
        up, dn = base + e, base - e
        grads.append((mu.components(up[:4], up[4], order) - mu.components(dn[:4], dn[4], order)) / (2 * h))
    bp = {I: i for i, I in enumerate(form_basis(p, 5))}
    out = np.zeros(len(form_basis(p + 1, 5)))
    for k, K in enumerate(form_basis(p + 1, 5)):
        for pos, i in enumerate(K):
            out[k] += (-1) ** pos * grads[i][bp[K[:pos] + K[pos + 1:]]]
    return out


# ------------------------------------------------------------- Don_1

def smooth_step(s):
    """1 for s <= 0, 0 for s >= 1, C-infinity in between."""
    s = np.clip(s, 0.0, 1.0)
    a = np.where(s < 1, np.exp(-1.0 / np.maximum(1 - s, 1e-300)), 0.0)
    b = np.where(s > 0, np.exp(-1.0 / np.maximum(s, 1e-300)), 0.0)
    return a / (a + b)


@dataclass(frozen=True)
class BumpWeight:
    """phi(T, rho) = 1 on the ball |(T - center, rho)| <= inner, 0 beyond inner + width."""
    center: tuple
    inner: float
    width: float = 1.0

    def __call__(self, T, rho):
        s = np.sqrt(np.sum((np.asarray(T) - np.asarray(self.center)) ** 2, axis=-1) + np.asarray(rho) ** 2)
        return smooth_step((s - self.inner) / self.width)

    @property
    def outer(self):
        return self.inner + self.width


def default_weight(specs, margin=20.0):
    pts = np.concatenate([s.points(16) for s in specs])
    center = pts.mean(axis=0)
    radius = float(np.max(np.linalg.norm(pts - center, axis=1)))
    return BumpWeight(tuple(center), radius + margin, 1.0)


@dataclass
class Don1Result:
    value: float
    error: float
    eps: tuple
    by_eps: tuple
    by_eps_error: tuple
    n_samples: int
    config: tuple

    def to_json(self):
        return {"value": self.value, "error": self.error, "eps": list(self.eps), "by_eps": list(self.by_eps),
                "by_eps_error": list(self.by_eps_error), "n_samples": self.n_samples,
                "config": {"dims": list(self.config)}}


def lagrange_weights_at_zero(nodes):
    nodes = np.asarray(nodes, dtype=float)
    w = np.ones(len(nodes))
    for i in range(len(nodes)):
        for j in range(len(nodes)):
            if i != j:
                w[i] *= nodes[j] / (nodes[j] - nodes[i])
    return w


def _random_params(spec, rng, n):
    """Uniform parameter samples and the parameter-domain volume."""
    kind = spec.kind
    if kind == "point":
        return np.zeros((n, 0)), 1.0
    if kind == "circle":
        return rng.uniform(0, 2 * np.pi, (n, 1)), 2 * np.pi
    if kind == "sphere2":
        return np.stack([rng.uniform(0, np.pi, n), rng.uniform(0, 2 * np.pi, n)], 1), 2 * np.pi ** 2
    if kind == "torus2":
        return rng.uniform(0, 2 * np.pi, (n, 2)), 4 * np.pi ** 2
    return np.stack([rng.uniform(0, np.pi / 2, n), rng.uniform(0, 2 * np.pi, n), rng.uniform(0, 2 * np.pi, n)], 1), 2 * np.pi ** 3


def _surface_samples(spec, rng, n):
    params, vol = _random_params(spec, rng, n)
    y, t = spec._model(params)
    Q = spec.frame_matrix
    return y @ Q.T + spec.offset_vector, t @ Q.T, vol


def _don1_chunk(specs, weight, eps_min, r_max, m, seed, p_kernel=0.8, p_logrho=0.85):
    rng = np.random.default_rng(seed)
    surf = [_surface_samples(s, rng, m) for s in specs]
    l = len(specs)
    # rho: log-uniform on (eps_min, r_max) mixed with uniform on (eps_min, r_max)
    lo, hi = np.log(eps_min), np.log(r_max)
    use_log = rng.random(m) < p_logrho
    rho = np.where(use_log, np.exp(rng.uniform(lo, hi, m)), rng.uniform(eps_min, r_max, m))
    q_rho = p_logrho / (rho * (hi - lo)) + (1 - p_logrho) / (r_max - eps_min)
    # T: charge-one kernels of width rho centred at the sampled surface points, plus a broad part
    comp = rng.integers(0, l, m)
    use_kernel = rng.random(m) < p_kernel
    centers = np.stack([surf[j][0] for j in range(l)], 0)[comp, np.arange(m)]
    t = rng.beta(2.0, 2.0, m)
    g = rng.normal(size=(m, 4))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    broad_c = np.asarray(weight.center)
    broad_s = weight.outer / 2
    scale = np.where(use_kernel, rho, broad_s)
    base = np.where(use_kernel[:, None], centers, broad_c)
    T = base + (scale * np.sqrt(t / (1 - t)))[:, None] * g

    def kern(Tq, c, s):
        r2 = np.sum((Tq - c) ** 2, axis=-1)
        return 6 * s ** 4 / (np.pi ** 2 * (s ** 2 + r2) ** 4)

    q_T = (1 - p_kernel) * kern(T, broad_c, broad_s)
    for j in range(l):
        q_T = q_T + p_kernel / l * kern(T, surf[j][0], rho)
    phi = weight(T, rho)
    form = None
    deg = 0
    for j in range(l):
        pts, tang, vol = surf[j]
        mu = mu_density(pts, tang, T, rho) * vol
        if form is None:
            form, deg = mu, 4 - specs[j].dim
        else:
            form = wedge(form, deg, mu, 4 - specs[j].dim, n=5)
            deg += 4 - specs[j].dim
    g_val = phi * form[:, 0] / (q_rho * q_T)
    return g_val, rho


def don1(specs, phi=None, eps=(0.2, 0.1, 0.05), scale=None, n_samples=2_000_000, seed=0,
         chunk=100_000):
    """Monte Carlo estimate of Don_1(Sigma_1..Sigma_l)(phi) = int phi mu_1 ^ ... ^ mu_l.

    The moduli integral is restricted to rho > e for each e in eps * scale with
    common random numbers, then extrapolated to e = 0 with the quadratic
    Lagrange weights.  The error is the standard error of the combined estimator.
    """
    specs = list(specs)
    l = len(specs)
    budget = 4 * l - 5
    if sum(s.dim for s in specs) != budget:
        raise DimensionBudgetViolated("dimensions %s must sum to 4l - 5 = %d" % ([s.dim for s in specs], budget))
    check_disjoint(specs)
    if phi is None:
        phi = default_weight(specs)
    if scale is None:
        scale = 1.0
    eps_vals = np.asarray(eps, dtype=float) * scale
    eps_min = float(eps_vals.min())
    r_max = float(phi.outer)
    lw = lagrange_weights_at_zero(eps_vals)
    n_chunks = max(1, -(-n_samples // chunk))
    seeds = np.random.SeedSequence(seed).spawn(n_chunks)
    sizes = [n_samples // n_chunks + (1 if i < n_samples % n_chunks else 0) for i in range(n_chunks)]

    def run(args):
        ss, m = args
        g, rho = _don1_chunk(specs, phi, eps_min, r_max, m, ss)
        ind = rho[:, None] > eps_vals[None, :]
        per = g[:, None] * ind
        comb = per @ lw
        return ([_fsum(per[:, i]) for i in range(len(eps_vals))], [_fsum(per[:, i] ** 2) for i in range(len(eps_vals))],
                _fsum(comb), _fsum(comb ** 2))

    parts = chunked_map(run, list(zip(seeds, sizes)))
    n = float(n_samples)
    by, by_err = [], []
    for i in range(len(eps_vals)):
        s1 = math.fsum(p[0][i] for p in parts)
        s2 = math.fsum(p[1][i] for p in parts)
        mean = s1 / n
        by.append(mean)
        by_err.append(math.sqrt(max(s2 / n - mean ** 2, 0.0) / n))
    c1 = math.fsum(p[2] for p in parts)
    c2 = math.fsum(p[3] for p in parts)
    mean = c1 / n
    err = math.sqrt(max(c2 / n - mean ** 2, 0.0) / n)
    return Don1Result(mean, err, tuple(eps_vals), tuple(by), tuple(by_err), int(n_samples),
                      tuple(s.dim for s in specs))


# ------------------------------------------------------------- delta families

def delta_family_mass(n, rho, f, quad=None):
    """int rho^4 / (rho^2 + |y|^2)^n f(y) d^4 y, with a log radial map around 0."""
    if n not in (2, 3, 4):
        raise ValueError("n must be 2, 3 or 4")
    if quad is None:
        quad = R4QuadratureSpec(scale=rho, radial_map="log", log_range=(1e-6, 1e3 / rho), n_radial=400,
                                n_u=8, n_xi=12, budget=10 ** 7)

    def g(y):
        r2 = np.sum(y ** 2, axis=1)
        return rho ** 4 / (rho ** 2 + r2) ** n * np.asarray(f(y), dtype=float)

    return integrate_r4(g, quad)


def c2_kernel_mass(rho, f, quad=None):
    """int 6 rho^4 / Delta^8 f(y) d^4 y divided by vol(S^3) / 2; tends to f(0)."""
    val, err = delta_family_mass(4, rho, f, quad)
    return 6 * val / (VOL_S3 / 2), 6 * err / (VOL_S3 / 2)
