"""Quadrature over R^4, parametrised submanifolds of R^4, differential form helpers
and mollified Poincare duals."""
import itertools
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.optimize import minimize

from .errors import (DegenerateParametrization, NotDisjoint, QuadratureBudgetExceeded,
                     WidthTooLarge)


# ------------------------------------------------------------- parallel helpers

def max_threads():
    try:
        return max(1, int(os.environ.get("INSTANTON_THREADS", "1")))
    except ValueError:
        return 1


def chunked_map(fn, chunks):
    """Apply fn to each chunk, possibly in threads; results come back in chunk order."""
    n = max_threads()
    if n == 1 or len(chunks) == 1:
        return [fn(c) for c in chunks]
    with ThreadPoolExecutor(max_workers=n) as ex:
        return list(ex.map(fn, chunks))


def _eval_chunked(f, pts, chunk=20000):
    pieces = [pts[i:i + chunk] for i in range(0, len(pts), chunk)]
    return np.concatenate(chunked_map(lambda p: np.asarray(f(p), dtype=float).reshape(len(p)), pieces))


def _fsum(a):
    return math.fsum(np.asarray(a, dtype=float).ravel())


# ------------------------------------------------------------- differential forms
# A p-form on R^4 is stored as an array (..., C(4,p)) of components on the
# increasing multi-indices returned by form_basis(p).

def form_basis(p, n=4):
    return list(itertools.combinations(range(n), p))


def _perm_sign(seq):
    seq = list(seq)
    sign = 1
    for i in range(len(seq)):
        for j in range(i + 1, len(seq)):
            if seq[i] > seq[j]:
                sign = -sign
    return sign


def wedge(a, p, b, q, n=4):
    """Wedge of a p-form and a q-form given by component arrays."""
    a = np.asarray(a)
    b = np.asarray(b)
    basis_out = {I: i for i, I in enumerate(form_basis(p + q, n))}
    out = np.zeros(np.broadcast_shapes(a.shape[:-1], b.shape[:-1]) + (len(basis_out),),
                   dtype=np.result_type(a, b))
    if p + q > n:
        return out
    for i, I in enumerate(form_basis(p, n)):
        for j, J in enumerate(form_basis(q, n)):
            if set(I) & set(J):
                continue
            K = tuple(sorted(I + J))
            out[..., basis_out[K]] += _perm_sign(I + J) * a[..., i] * b[..., j]
    return out


def evaluate_form(comps, p, vectors):
    """omega(v_1, ..., v_p) for vectors of shape (..., p, 4)."""
    comps = np.asarray(comps)
    if p == 0:
        return comps[..., 0]
    vectors = np.asarray(vectors)
    total = 0.0
    for i, I in enumerate(form_basis(p)):
        sub = vectors[..., :, list(I)]
        total = total + comps[..., i] * np.linalg.det(sub)
    return total


def one_forms_wedge(grads):
    """dn_1 ^ ... ^ dn_m from gradients of shape (..., m, 4)."""
    grads = np.asarray(grads)
    m = grads.shape[-2]
    out = []
    for I in form_basis(m):
        out.append(np.linalg.det(grads[..., :, list(I)]) if m else np.ones(grads.shape[:-2]))
    return np.stack(out, axis=-1)


def exterior_derivative_fd(form_fn, p, x, h=1e-4):
    """Central-difference exterior derivative of a p-form field at points x (n, 4)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    grads = []
    for mu in range(4):
        e = np.zeros(4)
        e[mu] = h
        grads.append((np.asarray(form_fn(x + e)) - np.asarray(form_fn(x - e))) / (2 * h))
    basis_p = {I: i for i, I in enumerate(form_basis(p))}
    out = np.zeros((len(x), len(form_basis(p + 1))))
    for k, K in enumerate(form_basis(p + 1)):
        for pos, mu in enumerate(K):
            rest = K[:pos] + K[pos + 1:]
            out[:, k] += (-1) ** pos * grads[mu][:, basis_p[rest]]
    return out


# ------------------------------------------------------------- R^4 quadrature

@dataclass(frozen=True)
class R4QuadratureSpec:
    """How to integrate over R^4.

    scheme "product": r = scale * tan(theta/2) ("tan") or r = scale * exp(u)
    ("log") radial map with Gauss-Legendre nodes, times a Hopf-coordinate rule
    on S^3.  Several centres are combined with a partition of unity.
    scheme "mc": importance sampling from the charge-one density profile.
    """
    scheme: str = "product"
    center: tuple = (0.0, 0.0, 0.0, 0.0)
    scale: float = 1.0
    budget: int = 10 ** 6
    seed: int = 0
    n_radial: int = 40
    n_u: int = 12
    n_xi: int = 16
    radial_map: str = "tan"
    log_range: tuple = (1e-6, 1e4)
    centers: tuple = None
    scales: tuple = None
    n_samples: int = 200000

    def with_centers(self, centers, scales):
        return replace(self, centers=tuple(tuple(map(float, c)) for c in centers),
                       scales=tuple(float(s) for s in scales))

    def _centers(self):
        if self.centers is None:
            return np.array([self.center], dtype=float), np.array([self.scale], dtype=float)
        return np.array(self.centers, dtype=float), np.array(self.scales, dtype=float)

    def node_count(self):
        c, _ = self._centers()
        if self.scheme == "mc":
            return self.n_samples
        return len(c) * self.n_radial * self.n_u * self.n_xi ** 2

    def to_json(self):
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.__dict__.items()}


def sphere3_rule(n_u, n_xi):
    """Nodes on the unit S^3 and weights summing to 2 pi^2 (u = sin^2 eta)."""
    t, w = leggauss(n_u)
    u = 0.5 * (t + 1)
    wu = 0.5 * w
    xi = 2 * np.pi * np.arange(n_xi) / n_xi
    U, X1, X2 = np.meshgrid(u, xi, xi, indexing="ij")
    W = np.broadcast_to(wu[:, None, None], U.shape) * (2 * np.pi / n_xi) ** 2 * 0.5
    pts = np.stack([np.sqrt(1 - U) * np.cos(X1), np.sqrt(1 - U) * np.sin(X1),
                    np.sqrt(U) * np.cos(X2), np.sqrt(U) * np.sin(X2)], axis=-1)
    return pts.reshape(-1, 4), W.ravel()


def radial_rule(n, scale, radial_map="tan", log_range=(1e-6, 1e4)):
    """Nodes r and weights for int_0^inf g(r) r^3 dr."""
    t, w = leggauss(n)
    if radial_map == "tan":
        theta = 0.5 * np.pi * (t + 1)
        wt = 0.5 * np.pi * w
        r = scale * np.tan(theta / 2)
        jac = scale / (2 * np.cos(theta / 2) ** 2)
        return r, wt * jac * r ** 3
    if radial_map == "log":
        lo, hi = np.log(log_range[0]), np.log(log_range[1])
        u = lo + 0.5 * (hi - lo) * (t + 1)
        wt = 0.5 * (hi - lo) * w
        r = scale * np.exp(u)
        return r, wt * r ** 4
    raise ValueError("unknown radial map %r" % radial_map)


def _product_nodes(quad, n_radial, n_u, n_xi):
    cs, ss = quad._centers()
    dirs, wdir = sphere3_rule(n_u, n_xi)
    pts, wts, owner = [], [], []
    for i, (c, s) in enumerate(zip(cs, ss)):
        r, wr = radial_rule(n_radial, s, quad.radial_map, quad.log_range)
        p = c + r[:, None, None] * dirs[None]
        pts.append(p.reshape(-1, 4))
        wts.append((wr[:, None] * wdir[None]).ravel())
        owner.append(np.full(len(r) * len(wdir), i))
    return np.concatenate(pts), np.concatenate(wts), np.concatenate(owner)


def partition_weights(pts, centers, scales):
    """Weights p_i / sum_j p_j with p_j = s_j^4 / (s_j^2 + |x - c_j|^2)^4."""
    d2 = np.sum((pts[:, None, :] - centers[None]) ** 2, axis=-1)
    logp = 4 * np.log(scales)[None] - 4 * np.log(scales[None] ** 2 + d2)
    logp -= np.max(logp, axis=1, keepdims=True)
    p = np.exp(logp)
    return p / np.sum(p, axis=1, keepdims=True)


def _product_integral(f, quad, n_radial, n_u, n_xi):
    pts, wts, owner = _product_nodes(quad, n_radial, n_u, n_xi)
    vals = _eval_chunked(f, pts)
    cs, ss = quad._centers()
    if len(cs) > 1:
        pw = partition_weights(pts, cs, ss)
        vals = vals * pw[np.arange(len(pts)), owner]
    return _fsum(vals * wts)


def sample_kernel_points(rng, n, center, scale):
    """Draw from the normalised density 6 s^4 / (pi^2 (s^2 + |y|^2)^4) on R^4.

    With t = r^2 / (r^2 + s^2) the radial law is Beta(2, 2).
    """
    t = rng.beta(2.0, 2.0, size=n)
    r = scale * np.sqrt(t / (1 - t))
    g = rng.normal(size=(n, 4))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    return np.asarray(center) + r[:, None] * g


def kernel_density(y, center, scale):
    r2 = np.sum((np.asarray(y) - center) ** 2, axis=-1)
    return 6 * scale ** 4 / (np.pi ** 2 * (scale ** 2 + r2) ** 4)


def _mc_integral(f, quad):
    cs, ss = quad._centers()
    comps = [(c, s) for c, s in zip(cs, ss)] + [(cs.mean(axis=0), 4.0 * ss.max())]
    mix = np.array([0.9 / len(cs)] * len(cs) + [0.1])
    n = quad.n_samples
    n_chunks = max(1, n // 50000)
    seeds = np.random.SeedSequence(quad.seed).spawn(n_chunks)
    sizes = [n // n_chunks + (1 if i < n % n_chunks else 0) for i in range(n_chunks)]

    def run(args):
        ss_, m = args
        rng = np.random.default_rng(ss_)
        which = rng.choice(len(comps), size=m, p=mix)
        pts = np.empty((m, 4))
        for j, (c, s) in enumerate(comps):
            sel = which == j
            pts[sel] = sample_kernel_points(rng, int(sel.sum()), c, s)
        q = sum(mix[j] * kernel_density(pts, c, s) for j, (c, s) in enumerate(comps))
        vals = np.asarray(f(pts), dtype=float) / q
        return _fsum(vals), _fsum(vals ** 2), m

    parts = chunked_map(run, list(zip(seeds, sizes)))
    s1 = math.fsum(p[0] for p in parts)
    s2 = math.fsum(p[1] for p in parts)
    mean = s1 / n
    var = max(s2 / n - mean ** 2, 0.0)
    return mean, math.sqrt(var / n)


def integrate_r4(f, quad=None):
    """Integral of a vectorised scalar field f(points (n, 4)) over R^4; returns (value, error)."""
    if quad is None:
        quad = R4QuadratureSpec()
    if quad.node_count() > quad.budget:
        raise QuadratureBudgetExceeded("%d nodes exceed the budget %d" % (quad.node_count(), quad.budget))
    if quad.scheme == "mc":
        return _mc_integral(f, quad)
    if quad.scheme != "product":
        raise ValueError("unsupported quadrature scheme %r" % quad.scheme)
    fine = _product_integral(f, quad, quad.n_radial, quad.n_u, quad.n_xi)
    coarse = _product_integral(f, quad, max(4, (2 * quad.n_radial) // 3), max(2, (2 * quad.n_u) // 3),
                               max(4, (2 * quad.n_xi) // 3))
    return fine, abs(fine - coarse)


# ------------------------------------------------------------- submanifolds

KIND_DIM = {"point": 0, "circle": 1, "sphere2": 2, "torus2": 2, "sphere3": 3}


def _trap(n):
    return 2 * np.pi * np.arange(n) / n, np.full(n, 2 * np.pi / n)


def _gl(n, a, b):
    t, w = leggauss(n)
    return a + 0.5 * (b - a) * (t + 1), 0.5 * (b - a) * w


@dataclass(frozen=True)
class SubmanifoldSpec:
    """A standard compact model placed in R^4 by x = frame @ y + offset.

    Models (y coordinates):
      point   : the origin
      circle  : radius r in the y1 y2 plane, parameter t
      sphere2 : radius r in the y1 y2 y3 space, parameters (theta, phi)
      torus2  : (r cos a, r sin a, r2 cos b, r2 sin b)
      sphere3 : radius r, Hopf parameters (eta, xi1, xi2)
    Orientation: the parameter order; for the spheres this puts the outward
    normal first for sphere2 (inside its 3-space) and last for sphere3.
    """
    kind: str
    radius: float = 1.0
    radius2: float = None
    frame: tuple = None
    offset: tuple = (0.0, 0.0, 0.0, 0.0)
    order: int = 32

    def __post_init__(self):
        if self.kind not in KIND_DIM:
            raise ValueError("unknown submanifold kind %r" % self.kind)
        if self.kind != "point" and not self.radius > 0:
            raise DegenerateParametrization("radius must be positive")
        if self.kind == "torus2" and self.radius2 is not None and not self.radius2 > 0:
            raise DegenerateParametrization("radius2 must be positive")
        Q = self.frame_matrix
        if np.max(np.abs(Q.T @ Q - np.eye(4))) > 1e-10:
            raise DegenerateParametrization("frame must be orthogonal")

    @property
    def dim(self):
        return KIND_DIM[self.kind]

    @property
    def frame_matrix(self):
        return np.eye(4) if self.frame is None else np.asarray(self.frame, dtype=float)

    @property
    def offset_vector(self):
        return np.asarray(self.offset, dtype=float)

    @property
    def r2(self):
        return self.radius if self.radius2 is None else self.radius2

    def moved(self, Q, b):
        """Apply the isometry x -> Q x + b."""
        Q = np.asarray(Q, dtype=float)
        frame = Q @ self.frame_matrix
        off = Q @ self.offset_vector + np.asarray(b, dtype=float)
        return replace(self, frame=tuple(map(tuple, frame)), offset=tuple(off))

    def with_order(self, order):
        return replace(self, order=int(order))

    # model parametrisation -------------------------------------------------
    def _model(self, params, normal=None):
        """Model points and parameter tangents (n, d, 4) at params, optionally displaced
        by tube coordinates `normal` (n, 4 - d)."""
        r, r2 = self.radius, self.r2
        kind = self.kind
        n = len(params)
        if normal is None:
            normal = np.zeros((n, 4 - self.dim))
        if kind == "point":
            return normal.copy(), np.zeros((n, 0, 4))
        if kind == "circle":
            t = params[:, 0]
            R = r + normal[:, 0]
            y = np.stack([R * np.cos(t), R * np.sin(t), normal[:, 1], normal[:, 2]], axis=-1)
            dt = np.stack([-R * np.sin(t), R * np.cos(t), 0 * t, 0 * t], axis=-1)
            return y, dt[:, None, :]
        if kind == "sphere2":
            th, ph = params[:, 0], params[:, 1]
            R = r + normal[:, 0]
            s = np.stack([np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)], axis=-1)
            dth = np.stack([np.cos(th) * np.cos(ph), np.cos(th) * np.sin(ph), -np.sin(th)], axis=-1)
            dph = np.stack([-np.sin(th) * np.sin(ph), np.sin(th) * np.cos(ph), 0 * th], axis=-1)
            y = np.concatenate([R[:, None] * s, normal[:, 1:2]], axis=-1)
            z = np.zeros((n, 1))
            tang = np.stack([np.concatenate([R[:, None] * dth, z], -1), np.concatenate([R[:, None] * dph, z], -1)], 1)
            return y, tang
        if kind == "torus2":
            a, b = params[:, 0], params[:, 1]
            R1 = r + normal[:, 0]
            R2 = r2 + normal[:, 1]
            y = np.stack([R1 * np.cos(a), R1 * np.sin(a), R2 * np.cos(b), R2 * np.sin(b)], axis=-1)
            z = 0 * a
            da = np.stack([-R1 * np.sin(a), R1 * np.cos(a), z, z], axis=-1)
            db = np.stack([z, z, -R2 * np.sin(b), R2 * np.cos(b)], axis=-1)
            return y, np.stack([da, db], axis=1)
        # sphere3, parameter order (eta, xi1, xi2) puts the outward normal last
        eta, x1, x2 = params[:, 0], params[:, 1], params[:, 2]
        R = r + normal[:, 0]
        ce, se = np.cos(eta), np.sin(eta)
        y = R[:, None] * np.stack([ce * np.cos(x1), ce * np.sin(x1), se * np.cos(x2), se * np.sin(x2)], -1)
        deta = R[:, None] * np.stack([-se * np.cos(x1), -se * np.sin(x1), ce * np.cos(x2), ce * np.sin(x2)], -1)
        z = 0 * eta
        dx1 = R[:, None] * np.stack([-ce * np.sin(x1), ce * np.cos(x1), z, z], -1)
        dx2 = R[:, None] * np.stack([z, z, -se * np.sin(x2), se * np.cos(x2)], -1)
        return y, np.stack([deta, dx1, dx2], axis=1)

    def _normal_coords(self, y):
        """Tube coordinates n(y) and their gradients (n, m, 4) in model space."""
        r, r2 = self.radius, self.r2
        kind = self.kind
        m = len(y)
        eye = np.eye(4)
        if kind == "point":
            return y.copy(), np.broadcast_to(eye, (m, 4, 4)).copy()

        def radial(idx, rad):
            sub = y[:, idx]
            nr = np.linalg.norm(sub, axis=1)
            g = np.zeros((m, 4))
            g[:, idx] = sub / nr[:, None]
            return nr - rad, g

        if kind == "circle":
            n1, g1 = radial([0, 1], r)
            return np.stack([n1, y[:, 2], y[:, 3]], 1), np.stack([g1, np.broadcast_to(eye[2], (m, 4)),
                                                                   np.broadcast_to(eye[3], (m, 4))], 1)
        if kind == "sphere2":
            n1, g1 = radial([0, 1, 2], r)
            return np.stack([n1, y[:, 3]], 1), np.stack([g1, np.broadcast_to(eye[3], (m, 4))], 1)
        if kind == "torus2":
            n1, g1 = radial([0, 1], r)
            n2, g2 = radial([2, 3], r2)
            return np.stack([n1, n2], 1), np.stack([g1, g2], 1)
        n1, g1 = radial([0, 1, 2, 3], r)
        return n1[:, None], g1[:, None, :]

    def reach(self):
        if self.kind == "point":
            return np.inf
        if self.kind == "torus2":
            return min(self.radius, self.r2)
        return self.radius

    def param_rule(self, order=None):
        """Parameter nodes (n, d) and weights for the parameter measure."""
        n = int(order or self.order)
        kind = self.kind
        if kind == "point":
            return np.zeros((1, 0)), np.ones(1)
        if kind == "circle":
            t, w = _trap(max(n, 3))
            return t[:, None], w
        if kind == "sphere2":
            th, wth = _gl(n, 0.0, np.pi)
            ph, wph = _trap(2 * n)
            A, B = np.meshgrid(th, ph, indexing="ij")
            return np.stack([A.ravel(), B.ravel()], 1), np.outer(wth, wph).ravel()
        if kind == "torus2":
            a, wa = _trap(2 * n)
            A, B = np.meshgrid(a, a, indexing="ij")
            return np.stack([A.ravel(), B.ravel()], 1), np.outer(wa, wa).ravel()
        eta, we = _gl(n, 0.0, np.pi / 2)
        xi, wx = _trap(2 * n)
        E, X1, X2 = np.meshgrid(eta, xi, xi, indexing="ij")
        W = we[:, None, None] * wx[None, :, None] * wx[None, None, :]
        return np.stack([E.ravel(), X1.ravel(), X2.ravel()], 1), W.ravel()

    def sample(self, order=None):
        """(points (n, 4), tangents (n, d, 4), weights) in world coordinates."""
        params, w = self.param_rule(order)
        y, t = self._model(params)
        Q = self.frame_matrix
        return y @ Q.T + self.offset_vector, t @ Q.T, w

    def points(self, order=None):
        return self.sample(order)[0]

    def to_json(self):
        out = {"kind": self.kind, "radius": float(self.radius), "frame": self.frame_matrix.tolist(),
               "offset": [float(v) for v in self.offset_vector], "order": int(self.order)}
        if self.radius2 is not None:
            out["radius2"] = float(self.radius2)
        return out

    @classmethod
    def from_json(cls, obj):
        frame = obj.get("frame")
        return cls(kind=obj["kind"], radius=float(obj.get("radius", 1.0)),
                   radius2=None if obj.get("radius2") is None else float(obj["radius2"]),
                   frame=None if frame is None else tuple(map(tuple, frame)),
                   offset=tuple(obj.get("offset", (0.0, 0.0, 0.0, 0.0))), order=int(obj.get("order", 32)))


def point(p, order=1):
    return SubmanifoldSpec("point", offset=tuple(map(float, p)), order=order)


def volume_form_integrand(points, tangents):
    d = tangents.shape[1]
    if d == 0:
        return np.ones(len(points))
    G = tangents @ np.swapaxes(tangents, 1, 2)
    return np.sqrt(np.clip(np.linalg.det(G), 0.0, None))


def integrate_submanifold(form, s, order=None):
    """Integrate a pulled-back d-form over s; form(points, tangents) -> values.

    Returns (value, error) with the error from a rule of about 2/3 the order.
    """
    order = int(order or s.order)

    def once(o):
        pts, tang, w = s.sample(o)
        vals = np.asarray(form(pts, tang), dtype=float).reshape(len(pts))
        return _fsum(vals * w)

    fine = once(order)
    if s.dim == 0:
        return fine, 0.0
    coarse = once(max(3, (2 * order) // 3))
    return fine, abs(fine - coarse)


def form_integrand(comps):
    """Wrap a constant-coefficient or callable form field into form(points, tangents)."""
    def f(points, tangents):
        c = comps(points) if callable(comps) else np.broadcast_to(comps, (len(points), np.shape(comps)[-1]))
        return evaluate_form(c, tangents.shape[1], tangents)
    return f


def min_distance(a, b, order=48):
    """Grid search over both parametrisations, then a local polish of the closest pair."""
    qa, _ = a.param_rule(order)
    qb, _ = b.param_rule(order)
    pa, pb = a.points(order), b.points(order)
    best, ia, ib = np.inf, 0, 0
    for i in range(0, len(pa), 2000):
        d = np.linalg.norm(pa[i:i + 2000, None, :] - pb[None], axis=-1)
        j = int(np.argmin(d))
        if d.flat[j] < best:
            best = float(d.flat[j])
            ia, ib = i + j // d.shape[1], j % d.shape[1]
    na = qa.shape[1]

    def gap(z):
        ya = a._model(z[None, :na])[0] @ a.frame_matrix.T + a.offset_vector
        yb = b._model(z[None, na:])[0] @ b.frame_matrix.T + b.offset_vector
        return float(np.sum((ya - yb) ** 2))

    z0 = np.concatenate([qa[ia], qb[ib]])
    if len(z0):
        res = minimize(gap, z0, method="Nelder-Mead", options={"xatol": 1e-12, "fatol": 1e-24, "maxiter": 4000})
        best = min(best, math.sqrt(max(res.fun, 0.0)))
    return best


def check_disjoint(specs, tol=1e-6):
    for i in range(len(specs)):
        for j in range(i + 1, len(specs)):
            dist = min_distance(specs[i], specs[j])
            if dist <= tol:
                raise NotDisjoint("submanifolds %d and %d meet (distance %.3g)" % (i, j, dist))


# ------------------------------------------------------------- mollified duals

def _bump(s):
    out = np.zeros_like(s)
    inside = s < 1
    out[inside] = np.exp(-1.0 / (1.0 - s[inside] ** 2))
    return out


def _bump_mass(m, n=400):
    """int over R^m of bump(|n|) dn."""
    t, w = _gl(n, 0.0, 1.0)
    area = 2 * np.pi ** (m / 2) / math.gamma(m / 2)
    return area * float(np.sum(w * _bump(t) * t ** (m - 1)))


class PoincareDual:
    """Closed (4 - d)-form sign * phi(n) dn_1 ^ ... ^ dn_m in the tube coordinates n of s.

    phi is a bump of radius `width` with unit integral over each normal fibre,
    so the form is exactly closed and pairs with closed d-forms like s does.
    """

    def __init__(self, s, width, others=()):
        if not width > 0:
            raise WidthTooLarge("width must be positive")
        if width >= s.reach():
            raise WidthTooLarge("width %.3g exceeds the reach %.3g of the %s" % (width, s.reach(), s.kind))
        for o in others:
            if width >= 0.5 * min_distance(s, o):
                raise WidthTooLarge("tube of width %.3g meets another submanifold" % width)
        self.s = s
        self.width = float(width)
        self.m = 4 - s.dim
        self._norm = 1.0 / (_bump_mass(self.m) * self.width ** self.m)
        # sign making (d/dt, d/dn) positively oriented
        params, _ = s.param_rule(5)
        p = params[len(params) // 2 + 1:len(params) // 2 + 2]
        _, tang = s._model(p)
        eps = 1e-6
        cols = [tang[0, i] for i in range(s.dim)]
        for j in range(self.m):
            nrm = np.zeros((1, self.m))
            nrm[0, j] = eps
            yp, _ = s._model(p, nrm)
            ym, _ = s._model(p, -nrm)
            cols.append((yp[0] - ym[0]) / (2 * eps))
        self.sign = float(np.sign(np.linalg.det(np.stack(cols, 1))))

    def phi(self, n):
        return self._norm * _bump(np.linalg.norm(n, axis=-1) / self.width)

    def components(self, x):
        """Components of the form at world points x (n, 4) on form_basis(m)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        Q = self.s.frame_matrix
        y = (x - self.s.offset_vector) @ Q
        nrm, grads = self.s._normal_coords(y)
        grads = grads @ Q.T
        return self.sign * self.phi(nrm)[:, None] * one_forms_wedge(grads)

    def pair(self, beta, order=None, n_normal=16):
        """Integral over R^4 of beta ^ alpha for a d-form beta(points, tangents)."""
        s = self.s
        params, wp = s.param_rule(order)
        t, wt = _gl(n_normal, -self.width, self.width)
        grids = np.meshgrid(*([t] * self.m), indexing="ij")
        nodes = np.stack([g.ravel() for g in grids], -1)
        wn = np.ones(len(nodes))
        for g in np.meshgrid(*([wt] * self.m), indexing="ij"):
            wn = wn * g.ravel()
        keep = np.linalg.norm(nodes, axis=1) < self.width
        nodes, wn = nodes[keep], wn[keep] * self.phi(nodes[keep])
        P = np.repeat(params, len(nodes), axis=0)
        N = np.tile(nodes, (len(params), 1))
        W = np.repeat(wp, len(nodes)) * np.tile(wn, len(params))
        y, tang = s._model(P, N)
        Q = s.frame_matrix
        vals = np.asarray(beta(y @ Q.T + s.offset_vector, tang @ Q.T), dtype=float)
        return _fsum(vals * W)


def point_dual_primitive(center, width):
    """3-form gamma = g(|y|) iota_y(vol) / (2 pi^2 |y|^4) with d gamma the
    mollified point dual of the given width (g is its radial mass function)."""
    center = np.asarray(center, dtype=float)
    tq, wq = _gl(200, 0.0, 1.0)
    b = _bump(tq) * tq ** 3
    total = _bump_mass(4)

    def g(r):
        s = np.clip(r / width, 0.0, 1.0)
        out = np.empty_like(s)
        for i, si in enumerate(s.ravel()):
            out.flat[i] = 2 * np.pi ** 2 * si * np.sum(wq * _bump(si * tq) * (si * tq) ** 3) / total
        return out

    def comps(x):
        y = np.atleast_2d(np.asarray(x, dtype=float)) - center
        r = np.linalg.norm(y, axis=1)
        # iota_y(dy1234) = y1 dy234 - y2 dy134 + y3 dy124 - y4 dy123
        basis = form_basis(3)
        out = np.zeros((len(y), 4))
        for i in range(4):
            rest = tuple(j for j in range(4) if j != i)
            out[:, basis.index(rest)] = (-1) ** i * y[:, i]
        return out * (g(r) / (2 * np.pi ** 2 * r ** 4))[:, None]

    return comps
