"""Quaternions, quaternionic matrices and the linear algebra built on them.

Basis convention: components are stored as (w, x, y, z) for w + x i + y j + z k,
and i j = k.  The complex representation sends q = a + b j (a, b complex) to

    [[a, b], [-conj(b), conj(a)]]

so 1 -> I, i -> diag(i, -i), j -> [[0, 1], [-1, 0]], k -> [[0, i], [i, 0]].
A k x k quaternionic matrix becomes a 2k x 2k complex matrix whose (r, c)
2 x 2 block is the image of entry (r, c).  Matrices whose components carry
complex coefficients (the biquaternion data used for U(k) ADHM data) go
through the same formula.
"""
import numpy as np
from scipy import optimize

from .errors import ConvergenceFailure, NotAntisymmetric, OddDimension

# e_a e_b = sum_c MUL[a, b, c] e_c
MUL = np.zeros((4, 4, 4))
_table = {
    (0, 0): (0, 1), (0, 1): (1, 1), (0, 2): (2, 1), (0, 3): (3, 1),
    (1, 0): (1, 1), (1, 1): (0, -1), (1, 2): (3, 1), (1, 3): (2, -1),
    (2, 0): (2, 1), (2, 1): (3, -1), (2, 2): (0, -1), (2, 3): (1, 1),
    (3, 0): (3, 1), (3, 1): (2, 1), (3, 2): (1, -1), (3, 3): (0, -1),
}
for (_a, _b), (_c, _s) in _table.items():
    MUL[_a, _b, _c] = _s

CONJ_SIGN = np.array([1.0, -1.0, -1.0, -1.0])

# images of 1, i, j, k in M_2(C)
BASIS2 = np.array([
    [[1, 0], [0, 1]],
    [[1j, 0], [0, -1j]],
    [[0, 1], [-1, 0]],
    [[0, 1j], [1j, 0]],
], dtype=complex)


def hamilton(a, b):
    """Hamilton product of arrays of quaternions with shape (..., 4)."""
    a = np.asarray(a)
    b = np.asarray(b)
    a0, a1, a2, a3 = np.moveaxis(a, -1, 0)
    b0, b1, b2, b3 = np.moveaxis(b, -1, 0)
    return np.stack([
        a0 * b0 - a1 * b1 - a2 * b2 - a3 * b3,
        a0 * b1 + a1 * b0 + a2 * b3 - a3 * b2,
        a0 * b2 - a1 * b3 + a2 * b0 + a3 * b1,
        a0 * b3 + a1 * b2 - a2 * b1 + a3 * b0,
    ], axis=-1)


def qconj(a):
    return np.asarray(a) * CONJ_SIGN


def quat_to_c2(q):
    """(..., 4) components -> (..., 2, 2) complex matrices."""
    return np.einsum("...m,mab->...ab", np.asarray(q), BASIS2)


def c2_to_quat(m):
    """Inverse of quat_to_c2; complex coefficients are kept if present."""
    m = np.asarray(m)
    comps = 0.5 * np.einsum("mab,...ab->...m", BASIS2.conj(), m)
    return comps


class Quaternion:
    """Immutable real quaternion w + x i + y j + z k."""

    __slots__ = ("_q",)

    def __init__(self, w=0.0, x=0.0, y=0.0, z=0.0):
        q = np.array([w, x, y, z], dtype=float)
        q.setflags(write=False)
        object.__setattr__(self, "_q", q)

    def __setattr__(self, name, value):
        raise AttributeError("Quaternion is immutable")

    @classmethod
    def from_array(cls, arr):
        arr = np.asarray(arr, dtype=float)
        return cls(*arr)

    @property
    def array(self):
        return self._q

    w = property(lambda self: float(self._q[0]))
    x = property(lambda self: float(self._q[1]))
    y = property(lambda self: float(self._q[2]))
    z = property(lambda self: float(self._q[3]))

    def __mul__(self, other):
        if isinstance(other, Quaternion):
            return Quaternion.from_array(hamilton(self._q, other._q))
        return Quaternion.from_array(self._q * float(other))

    def __rmul__(self, other):
        return Quaternion.from_array(self._q * float(other))

    def __truediv__(self, s):
        return Quaternion.from_array(self._q / float(s))

    def __add__(self, other):
        if not isinstance(other, Quaternion):
            other = Quaternion(float(other))
        return Quaternion.from_array(self._q + other._q)

    __radd__ = __add__

    def __sub__(self, other):
        if not isinstance(other, Quaternion):
            other = Quaternion(float(other))
        return Quaternion.from_array(self._q - other._q)

    def __neg__(self):
        return Quaternion.from_array(-self._q)

    def __eq__(self, other):
        return isinstance(other, Quaternion) and np.array_equal(self._q, other._q)

    def __hash__(self):
        return hash(tuple(self._q))

    def conj(self):
        return Quaternion.from_array(self._q * CONJ_SIGN)

    def norm(self):
        return float(np.linalg.norm(self._q))

    def inverse(self):
        n2 = float(self._q @ self._q)
        if n2 == 0.0:
            raise ZeroDivisionError("inverse of zero quaternion")
        return Quaternion.from_array(self._q * CONJ_SIGN / n2)

    @property
    def real(self):
        return self.w

    def imag(self):
        return Quaternion(0.0, self.x, self.y, self.z)

    def isclose(self, other, atol=1e-12):
        return bool(np.allclose(self._q, np.asarray(other.array), atol=atol, rtol=0))

    def to_c2(self):
        return quat_to_c2(self._q)

    def __repr__(self):
        return "Quaternion(%r, %r, %r, %r)" % tuple(self._q.tolist())


def qmul(a, b):
    return a * b


ONE = Quaternion(1.0)
I = Quaternion(0.0, 1.0)
J = Quaternion(0.0, 0.0, 1.0)
K = Quaternion(0.0, 0.0, 0.0, 1.0)


class QMatrix:
    """Matrix with quaternion entries, stored as an array of shape (rows, cols, 4).

    Components may be complex, which models C^k (x)_R H style data: the
    complex unit then commutes with the quaternion units.
    """

    __slots__ = ("_d",)

    def __init__(self, data):
        d = np.array(data)
        if d.ndim == 1 and d.shape[0] == 4:
            d = d.reshape(1, 1, 4)
        if d.ndim == 2 and d.shape[-1] == 4:
            d = d[:, None, :]
        if d.ndim != 3 or d.shape[-1] != 4:
            raise ValueError("QMatrix data must have shape (rows, cols, 4)")
        if not np.iscomplexobj(d):
            d = d.astype(float)
        d.setflags(write=False)
        object.__setattr__(self, "_d", d)

    def __setattr__(self, name, value):
        raise AttributeError("QMatrix is immutable")

    @classmethod
    def zeros(cls, rows, cols, dtype=float):
        return cls(np.zeros((rows, cols, 4), dtype=dtype))

    @classmethod
    def identity(cls, n):
        d = np.zeros((n, n, 4))
        d[np.arange(n), np.arange(n), 0] = 1.0
        return cls(d)

    @classmethod
    def scalar(cls, q, n):
        q = q.array if isinstance(q, Quaternion) else np.asarray(q)
        d = np.zeros((n, n, 4), dtype=q.dtype if np.iscomplexobj(q) else float)
        d[np.arange(n), np.arange(n)] = q
        return cls(d)

    @classmethod
    def from_entries(cls, rows):
        return cls(np.array([[np.asarray(getattr(e, "array", e)) for e in r] for r in rows]))

    @classmethod
    def from_components(cls, comps):
        """Build from a (4, rows, cols) stack of coefficient matrices."""
        return cls(np.moveaxis(np.asarray(comps), 0, -1))

    @property
    def data(self):
        return self._d

    @property
    def shape(self):
        return self._d.shape[:2]

    @property
    def is_complex(self):
        return np.iscomplexobj(self._d) and bool(np.any(self._d.imag != 0))

    def components(self):
        return np.moveaxis(self._d, -1, 0)

    def __getitem__(self, idx):
        r, c = idx
        e = self._d[r, c]
        if np.iscomplexobj(e):
            return e.copy()
        return Quaternion.from_array(e)

    def adjoint(self):
        return QMatrix(np.conj(np.swapaxes(self._d, 0, 1)) * CONJ_SIGN)

    def transpose(self):
        return QMatrix(np.swapaxes(self._d, 0, 1))

    def __matmul__(self, other):
        prod = np.einsum("ila,ljb,abc->ijc", self._d, other._d, MUL)
        return QMatrix(prod)

    def left_scale(self, q):
        """Multiply every entry on the left by the scalar quaternion q."""
        q = q.array if isinstance(q, Quaternion) else np.asarray(q)
        return QMatrix(hamilton(np.broadcast_to(q, self._d.shape), self._d))

    def right_scale(self, q):
        q = q.array if isinstance(q, Quaternion) else np.asarray(q)
        return QMatrix(hamilton(self._d, np.broadcast_to(q, self._d.shape)))

    def __add__(self, other):
        return QMatrix(self._d + other._d)

    def __sub__(self, other):
        return QMatrix(self._d - other._d)

    def __neg__(self):
        return QMatrix(-self._d)

    def __mul__(self, s):
        return QMatrix(self._d * s)

    __rmul__ = __mul__

    def imag_part(self):
        d = self._d.copy()
        d[..., 0] = 0
        return QMatrix(d)

    def real_part(self):
        d = np.zeros_like(self._d)
        d[..., 0] = self._d[..., 0]
        return QMatrix(d)

    def entry_norms(self):
        return np.sqrt(np.sum(np.abs(self._d) ** 2, axis=-1))

    def norm(self):
        return float(np.sqrt(np.sum(np.abs(self._d) ** 2)))

    def is_symmetric(self, tol=1e-12):
        return self.shape[0] == self.shape[1] and bool(
            np.max(np.abs(self._d - np.swapaxes(self._d, 0, 1)), initial=0.0) <= tol)

    def allclose(self, other, atol=1e-12):
        return self.shape == other.shape and bool(np.allclose(self._d, other._d, atol=atol, rtol=0))

    def complex_rep(self):
        r, c = self.shape
        blocks = np.einsum("rcm,mab->racb", self._d, BASIS2)
        return blocks.reshape(2 * r, 2 * c)

    @classmethod
    def from_complex_rep(cls, mat, keep_complex=None):
        mat = np.asarray(mat)
        r, c = mat.shape[0] // 2, mat.shape[1] // 2
        blocks = mat.reshape(r, 2, c, 2).transpose(0, 2, 1, 3)
        comps = c2_to_quat(blocks)
        if keep_complex is None:
            keep_complex = bool(np.max(np.abs(comps.imag), initial=0.0) > 1e-12 * max(1.0, np.max(np.abs(comps))))
        return cls(comps if keep_complex else comps.real)

    def __repr__(self):
        return "QMatrix(shape=%s, complex=%s)" % (self.shape, self.is_complex)


def complex_rep(m):
    if isinstance(m, Quaternion):
        return m.to_c2()
    return m.complex_rep()


def _as_qmatrix(T):
    if isinstance(T, QMatrix):
        return T
    if isinstance(T, Quaternion):
        return QMatrix(T.array.reshape(1, 1, 4))
    return QMatrix(np.asarray(T))


def vector_from_kernel(u):
    """Complex vector in C^{2k} (interleaved layout) -> quaternion column.

    The column u is read as the first column of the complex image of a
    quaternion vector; any such u in the kernel of complex_rep(M) gives a
    quaternion vector killed by M.
    """
    u = np.asarray(u).reshape(-1, 2)
    a = u[:, 0]
    b = -np.conj(u[:, 1])
    return np.stack([a.real, a.imag, b.real, b.imag], axis=-1)


def smallest_singular_value(T, lam):
    """sigma_min of complex_rep(T - lam * 1) for a batch of lam with shape (..., 4)."""
    C = T.complex_rep()
    k = T.shape[0]
    lam = np.asarray(lam, dtype=float)
    L = quat_to_c2(lam)
    shifted = C - np.einsum("ij,...ab->...iajb", np.eye(k), L).reshape(lam.shape[:-1] + (2 * k, 2 * k))
    return np.linalg.svd(shifted, compute_uv=False)[..., -1]


def _newton_polish(T, lam0):
    """Solve T v = lam v, v_0^* v = 1 from a starting lam by Levenberg-Marquardt."""
    k = T.shape[0]
    C = T.complex_rep()
    shifted = C - np.kron(np.eye(k), quat_to_c2(lam0))
    _, _, vh = np.linalg.svd(shifted)
    v0 = vector_from_kernel(vh[-1].conj())
    nv = np.linalg.norm(v0)
    v0 = v0 / nv
    ref = v0.copy()
    Td = T.data

    def resid(z):
        lam = z[:4]
        v = z[4:].reshape(k, 4)
        Tv = np.einsum("ila,lb,abc->ic", Td, v, MUL)
        lv = hamilton(np.broadcast_to(lam, v.shape), v)
        gauge = np.sum(hamilton(qconj(ref), v), axis=0) - np.array([1.0, 0, 0, 0])
        return np.concatenate([(Tv - lv).ravel(), gauge])

    z0 = np.concatenate([np.asarray(lam0, float), v0.ravel()])
    sol = optimize.least_squares(resid, z0, method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=200 * (4 + 4 * k))
    return sol.x[:4]


def left_eigenvalue_search(T, tol=1e-8, n_grid=5, n_local=8, seed=0):
    """Left eigenvalues lam (T v = lam v) found by a seeded multi-start search.

    Returns a list of (Quaternion, residual) with residual the smallest
    singular value of complex_rep(T - lam 1).  The list is not claimed to be
    complete.
    """
    T = _as_qmatrix(T)
    k = T.shape[0]
    if k < 1 or T.shape[0] != T.shape[1]:
        raise ValueError("T must be square with k >= 1")
    if T.is_complex:
        raise ValueError("left eigenvalues need a real-coefficient quaternion matrix")
    T = QMatrix(np.real(T.data))
    scale = max(T.norm(), 1e-300)
    rng = np.random.default_rng(seed)

    axis = np.linspace(-scale, scale, n_grid)
    grid = np.stack(np.meshgrid(axis, axis, axis, axis, indexing="ij"), axis=-1).reshape(-1, 4)
    diag = T.data[np.arange(k), np.arange(k)].real
    seeds = np.concatenate([diag, grid, rng.normal(scale=scale / 2, size=(16, 4))])
    vals = smallest_singular_value(T, seeds)
    order = np.argsort(vals)
    starts = list(range(len(diag))) + [i for i in order[: n_local] if i >= len(diag)]

    def f(lam):
        return float(smallest_singular_value(T, lam))

    found = []
    for idx in starts:
        lam = seeds[idx]
        res = optimize.minimize(f, lam, method="Nelder-Mead",
                                options={"xatol": 1e-10 * scale, "fatol": 1e-14 * scale, "maxiter": 4000,
                                         "initial_simplex": lam + np.vstack([np.zeros(4), 0.1 * scale * np.eye(4)])})
        lam = res.x
        try:
            lam = _newton_polish(T, lam)
        except (ValueError, np.linalg.LinAlgError):
            pass
        r = f(lam)
        if r <= tol * max(1.0, scale):
            if all(np.linalg.norm(lam - g.array) > 1e-6 * max(1.0, scale) for g, _ in found):
                found.append((Quaternion.from_array(lam), r))
    if not found:
        raise ConvergenceFailure("no left eigenvalue reached residual %g" % tol)
    found.sort(key=lambda t: t[1])
    return found


def _householder(x):
    sigma = float(x[1:] @ x[1:])
    if sigma == 0.0:
        return np.zeros_like(x), 0.0, x[0]
    norm_x = np.sqrt(x[0] ** 2 + sigma)
    v = x.copy()
    if x[0] <= 0:
        v[0] -= norm_x
        alpha = norm_x
    else:
        v[0] += norm_x
        alpha = -norm_x
    v /= np.linalg.norm(v)
    return v, 2.0, alpha


def pfaffian(A, tol=1e-12):
    """Pfaffian of a real antisymmetric matrix by Householder tridiagonalisation."""
    A = np.array(A, dtype=float)
    n = A.shape[0]
    if A.ndim != 2 or A.shape[1] != n:
        raise NotAntisymmetric("matrix must be square")
    if np.max(np.abs(A + A.T), initial=0.0) > tol * max(1.0, np.max(np.abs(A), initial=0.0)):
        raise NotAntisymmetric("matrix is not antisymmetric")
    if n % 2:
        raise OddDimension("odd dimension %d" % n)
    if n == 0:
        return 1.0
    pf = 1.0
    for i in range(0, n - 1, 2):
        v, tau, alpha = _householder(A[i + 1:, i].copy())
        A[i + 1, i] = alpha
        A[i, i + 1] = -alpha
        A[i + 2:, i] = 0.0
        A[i, i + 2:] = 0.0
        if tau:
            w = tau * (A[i + 1:, i + 1:] @ v)
            A[i + 1:, i + 1:] += np.outer(v, w) - np.outer(w, v)
            pf *= 1.0 - tau
        pf *= -alpha
    return float(pf)
