"""ADHM data (T, P): moment map, nondegeneracy, group actions, samplers.

Real form: T is a symmetric k x k quaternion matrix, P a quaternion column,
acted on by O(k) x Sp(1).  Complex form: the four coefficient matrices of T
are Hermitian and P has complex coefficients (C^k (x)_R H), acted on by
U(k) x Sp(1).  Real-form data is complex-form data with real coefficients,
so every routine below accepts either.
"""
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, optimize

from . import jsonio
from .errors import ConvergenceFailure, NotInGroup, NotRealizable
from .quat import MUL, QMatrix, Quaternion, hamilton, left_eigenvalue_search, quat_to_c2


@dataclass(frozen=True)
class AdhmData:
    T: QMatrix
    P: QMatrix
    form: str = "real"

    def __post_init__(self):
        k = self.T.shape[0]
        if self.T.shape != (k, k) or self.P.shape != (k, 1):
            raise ValueError("T must be k x k and P must be k x 1")
        if self.form not in ("real", "complex"):
            raise ValueError("form must be 'real' or 'complex'")
        if self.form == "real":
            if self.T.is_complex or self.P.is_complex:
                raise ValueError("real-form data must have real coefficients")
            if not self.T.is_symmetric(1e-12 * max(1.0, self.T.norm())):
                raise ValueError("real-form T must be symmetric")
        else:
            comps = self.T.components()
            herm = np.max(np.abs(comps - np.conj(np.swapaxes(comps, 1, 2))), initial=0.0)
            if herm > 1e-12 * max(1.0, self.T.norm()):
                raise ValueError("complex-form T must have Hermitian coefficient matrices")

    @property
    def k(self):
        return self.T.shape[0]

    @classmethod
    def from_arrays(cls, T, P, form="real"):
        T = np.asarray(T)
        P = np.asarray(P)
        if P.ndim == 2:
            P = P[:, None, :]
        return cls(QMatrix(T), QMatrix(P), form)

    def T_complex(self):
        return self.T.complex_rep()

    def P_complex(self):
        return self.P.complex_rep()

    def to_json(self):
        def enc(a):
            if self.form == "complex":
                a = np.asarray(a, dtype=complex)
                return np.stack([a.real, a.imag], axis=-1).tolist()
            return np.asarray(a, dtype=float).tolist()
        return {"k": self.k, "form": self.form, "T": enc(self.T.data), "P": enc(self.P.data[:, 0, :])}

    @classmethod
    def from_json(cls, obj):
        form = obj.get("form", "real")
        T = np.asarray(obj["T"], dtype=float)
        P = np.asarray(obj["P"], dtype=float)
        if form == "complex":
            T = T[..., 0] + 1j * T[..., 1]
            P = P[..., 0] + 1j * P[..., 1]
        d = cls.from_arrays(T, P, form)
        if int(obj.get("k", d.k)) != d.k:
            raise ValueError("k does not match the size of T")
        return d

    def dumps(self):
        return jsonio.dumps(self.to_json())


def _zeta_quat(zeta0):
    if zeta0 is None:
        return np.zeros(4)
    if isinstance(zeta0, Quaternion):
        z = zeta0.array.copy()
    else:
        z = np.asarray(zeta0, dtype=float)
        if z.shape == (3,):
            z = np.concatenate([[0.0], z])
    z[0] = 0.0
    return z


def moment_map(d, zeta0=None):
    """Im(T* T + P P*) - zeta0 * 1, as a QMatrix of imaginary entries."""
    X = d.T.adjoint() @ d.T + d.P @ d.P.adjoint()
    M = X.imag_part().data.copy()
    z = _zeta_quat(zeta0)
    k = d.k
    M[np.arange(k), np.arange(k)] -= z
    return QMatrix(M)


def check_adhm(d, tol=1e-10, zeta0=None):
    norms = moment_map(d, zeta0).entry_norms()
    worst = float(np.max(norms, initial=0.0))
    return worst <= tol, worst


def _R_complex(d, x):
    """Complex image of R_x = ((T - x)^*, P) for a batch of points x (..., 4)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    k = d.k
    Tc = d.T_complex()
    Pc = d.P_complex()
    X = np.einsum("ij,nab->niajb", np.eye(k), quat_to_c2(x)).reshape(-1, 2 * k, 2 * k)
    M = np.conj(np.swapaxes(Tc[None] - X, 1, 2))
    R = np.concatenate([M, np.broadcast_to(Pc, (len(x),) + Pc.shape)], axis=2)
    return R


def r_sigma_min(d, x):
    """Smallest singular value of R_x at a batch of points."""
    R = _R_complex(d, x)
    ev = np.linalg.eigvalsh(R @ np.conj(np.swapaxes(R, 1, 2)))
    return np.sqrt(np.clip(ev[:, 0], 0.0, None))


@dataclass(frozen=True)
class NondegeneracyVerdict:
    status: str
    witness: Quaternion = None
    margin: float = None
    evaluations: int = 0

    @property
    def nondegenerate(self):
        return self.status == "nondegenerate"


def nondegeneracy_check(d, tol=1e-8, n_grid=7, n_local=12, seed=0):
    """Search x in H for rank loss of R_x.

    Outside a ball of radius |T| + |P| the operator R_x R_x^* is bounded below
    by (|x| - |T|)^2, so seeds on a grid of radius 2(|T| + |P|) together with
    the left eigenvalues of T cover every place where rank can drop.
    """
    rng = np.random.default_rng(seed)
    k = d.k
    tn, pn = d.T.norm(), d.P.norm()
    radius = 2.0 * (tn + pn) + 1e-12
    seeds = [d.T.data[np.arange(k), np.arange(k)].real.reshape(-1, 4)]
    if not d.T.is_complex:
        try:
            seeds.append(np.array([lam.array for lam, _ in left_eigenvalue_search(d.T, seed=seed)]))
        except ConvergenceFailure:
            pass
    axis = np.linspace(-radius, radius, n_grid)
    grid = np.stack(np.meshgrid(axis, axis, axis, axis, indexing="ij"), axis=-1).reshape(-1, 4)
    seeds.append(grid)
    seeds.append(rng.uniform(-radius, radius, size=(32, 4)))
    seeds = np.concatenate(seeds)
    vals = r_sigma_min(d, seeds)
    n_eval = len(seeds)
    order = np.argsort(vals)
    best_x, best_v = seeds[order[0]], float(vals[order[0]])

    def f(x):
        return float(r_sigma_min(d, x)[0])

    for idx in order[:n_local]:
        if best_v <= tol:
            break
        x0 = seeds[idx]
        step = 0.05 * radius
        res = optimize.minimize(f, x0, method="Nelder-Mead",
                                options={"xatol": 1e-12 * radius, "fatol": 1e-15, "maxiter": 3000,
                                         "initial_simplex": x0 + np.vstack([np.zeros(4), step * np.eye(4)])})
        n_eval += res.nfev
        if res.fun < best_v:
            best_v, best_x = float(res.fun), res.x
    if best_v <= tol:
        return NondegeneracyVerdict("degenerate", witness=Quaternion.from_array(best_x), margin=best_v, evaluations=n_eval)
    if best_v <= 1e3 * tol:
        raise ConvergenceFailure("minimum %.3e is too close to the tolerance to decide" % best_v)
    return NondegeneracyVerdict("nondegenerate", witness=Quaternion.from_array(best_x), margin=best_v, evaluations=n_eval)


def _check_group(d, g, q):
    g = np.asarray(g)
    k = d.k
    if g.shape != (k, k):
        raise NotInGroup("g must be %d x %d" % (k, k))
    if d.form == "real":
        if np.iscomplexobj(g) and np.max(np.abs(g.imag)) > 1e-10:
            raise NotInGroup("real-form data needs a real orthogonal g")
        g = np.real(g)
    err = np.max(np.abs(np.conj(g.T) @ g - np.eye(k)))
    if err > 1e-10:
        raise NotInGroup("g is not %s (defect %.2e)" % ("orthogonal" if d.form == "real" else "unitary", err))
    qa = q.array if isinstance(q, Quaternion) else np.asarray(q, dtype=float)
    if abs(np.linalg.norm(qa) - 1.0) > 1e-12:
        raise NotInGroup("q must be a unit quaternion")
    return g, qa


def group_act(g, q, d):
    """(g, q) . (T, P) = (g T g^-1, g P q^-1)."""
    g, qa = _check_group(d, g, q)
    ginv = np.conj(g.T)
    Tn = np.einsum("ij,jlm,lk->ikm", g, d.T.data, ginv)
    qinv = qa * np.array([1.0, -1.0, -1.0, -1.0])
    Pn = np.einsum("ij,jlm->ilm", g, d.P.data)
    Pn = hamilton(Pn, np.broadcast_to(qinv, Pn.shape))
    if d.form == "real":
        Tn, Pn = Tn.real, Pn.real
        Tn = 0.5 * (Tn + np.swapaxes(Tn, 0, 1))
    return AdhmData(QMatrix(Tn), QMatrix(Pn), d.form)


def stabilizer_probe(d, g, q, tol=1e-10):
    moved = group_act(g, q, d)
    return bool(np.max(np.abs(moved.T.data - d.T.data)) <= tol and np.max(np.abs(moved.P.data - d.P.data)) <= tol)


def to_complex_form(d):
    if d.form == "complex":
        return d
    return AdhmData(QMatrix(d.T.data.astype(complex)), QMatrix(d.P.data.astype(complex)), "complex")


def to_real_form(d, tol=1e-9):
    """Find g in U(k) with g.d real and return that real representative."""
    if d.form == "real":
        return d
    Tc = d.T.components()
    Pc = d.P.components()[:, :, 0]
    k = d.k
    scale = max(1.0, d.T.norm() + d.P.norm())
    if np.max(np.abs(Tc.imag)) <= 1e-14 * scale and np.max(np.abs(Pc.imag)) <= 1e-14 * scale:
        T = np.real(d.T.data)
        return AdhmData(QMatrix(0.5 * (T + np.swapaxes(T, 0, 1))), QMatrix(np.real(d.P.data)), "real")
    # S = g^T g must satisfy conj(T_m) S = S T_m and S P_m = conj(P_m)
    eye = np.eye(k)
    rows, rhs = [], []
    for m in range(4):
        rows.append(np.kron(eye, np.conj(Tc[m])) - np.kron(Tc[m].T, eye))
        rhs.append(np.zeros(k * k, dtype=complex))
        rows.append(np.kron(Pc[m][None, :], eye))
        rhs.append(np.conj(Pc[m]))
    A = np.concatenate(rows)
    b = np.concatenate(rhs)
    s, *_ = np.linalg.lstsq(A, b, rcond=None)
    S = s.reshape(k, k, order="F")
    resid = np.linalg.norm(A @ s - b) / scale
    if resid > tol or np.max(np.abs(S - S.T)) > tol or np.max(np.abs(np.conj(S.T) @ S - eye)) > tol:
        raise NotRealizable("no unitary g makes this data real (residual %.2e)" % resid)
    g = linalg.sqrtm(S)
    moved = group_act(g, Quaternion(1.0), d)
    if np.max(np.abs(moved.T.data.imag)) > tol * scale or np.max(np.abs(moved.P.data.imag)) > tol * scale:
        raise NotRealizable("unitary change of basis did not produce real data")
    T = np.real(moved.T.data)
    return AdhmData(QMatrix(0.5 * (T + np.swapaxes(T, 0, 1))), QMatrix(np.real(moved.P.data)), "real")


def real_complex_convert(d):
    """Switch between real and complex form.

    real -> complex is the inclusion of real coefficients; complex -> real
    returns a U(k)-equivalent real representative (NotRealizable otherwise).
    """
    return to_complex_form(d) if d.form == "real" else to_real_form(d)


# ---------------------------------------------------------------- samplers

def _pack_real(z, k):
    iu = np.triu_indices(k)
    n_t = len(iu[0]) * 4
    T = np.zeros((k, k, 4))
    T[iu] = z[:n_t].reshape(-1, 4)
    T[(iu[1], iu[0])] = z[:n_t].reshape(-1, 4)
    P = z[n_t:].reshape(k, 1, 4)
    return AdhmData(QMatrix(T), QMatrix(P), "real")


def _unpack_real(d):
    iu = np.triu_indices(d.k)
    return np.concatenate([d.T.data[iu].ravel(), d.P.data.ravel()])


def _pack_complex(z, k):
    n_h = k * k
    T = np.zeros((4, k, k), dtype=complex)
    iu = np.triu_indices(k, 1)
    for m in range(4):
        h = z[m * n_h:(m + 1) * n_h]
        diag = h[:k]
        off = h[k:k + len(iu[0])] + 1j * h[k + len(iu[0]):]
        T[m][np.arange(k), np.arange(k)] = diag
        T[m][iu] = off
        T[m][(iu[1], iu[0])] = np.conj(off)
    p = z[4 * n_h:]
    P = (p[:4 * k] + 1j * p[4 * k:]).reshape(k, 1, 4)
    return AdhmData(QMatrix.from_components(T), QMatrix(P), "complex")


def _unpack_complex(d):
    k = d.k
    iu = np.triu_indices(k, 1)
    parts = []
    for m in range(4):
        Tm = d.T.components()[m]
        parts += [Tm[np.arange(k), np.arange(k)].real, Tm[iu].real, Tm[iu].imag]
    p = d.P.data.ravel()
    parts += [p.real, p.imag]
    return np.concatenate(parts)


def _moment_residual(d):
    M = moment_map(d).components()[1:]
    k = d.k
    if d.form == "real":
        iu = np.triu_indices(k, 1)
        return np.concatenate([M[m].real[iu] for m in range(3)])
    iu = np.triu_indices(k)
    return np.concatenate([np.concatenate([M[m][iu].real, M[m][iu].imag]) for m in range(3)])


def project_to_adhm(d, tol=1e-13, max_iter=60):
    """Minimum-norm Newton projection onto Im(T*T + PP*) = 0."""
    k = d.k
    if k == 1 and d.form == "real":
        return d
    pack, unpack = (_pack_real, _unpack_real) if d.form == "real" else (_pack_complex, _unpack_complex)
    z = unpack(d)
    scale = max(1.0, float(np.linalg.norm(z)))

    def resid(zz):
        return _moment_residual(pack(zz, k))

    for _ in range(max_iter):
        r = resid(z)
        if np.linalg.norm(r) <= tol * scale ** 2:
            break
        h = 1e-3 * scale
        J = np.empty((len(r), len(z)))
        for i in range(len(z)):
            e = np.zeros_like(z)
            e[i] = h
            J[:, i] = (resid(z + e) - resid(z - e)) / (2 * h)
        step, *_ = np.linalg.lstsq(J, -r, rcond=1e-10)
        z = z + step
    else:
        raise ConvergenceFailure("ADHM projection did not converge")
    return pack(z, k)


def random_adhm(k, seed=0, form="real", scale=1.0, spread=None, rho_range=(0.5, 1.5)):
    """Seeded sample of ADHM data satisfying the moment-map condition.

    T starts with diagonal entries spread over a ball of radius `spread`
    (default 2 * scale * k) and small off-diagonal noise; P entries have norms
    in rho_range * scale.  The start is projected onto the ADHM variety.  The
    resulting distribution is an artifact of this recipe, not a canonical
    measure.
    """
    rng = np.random.default_rng(seed)
    if spread is None:
        spread = 2.0 * scale * k
    T = np.zeros((k, k, 4))
    T[np.arange(k), np.arange(k)] = rng.normal(size=(k, 4)) * spread / 2
    off = rng.normal(size=(k, k, 4)) * 0.1 * scale
    T += 0.5 * (off + np.swapaxes(off, 0, 1)) * (1 - np.eye(k))[:, :, None]
    dirs = rng.normal(size=(k, 4))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    P = dirs * rng.uniform(*rho_range, size=(k, 1)) * scale
    d = AdhmData(QMatrix(T), QMatrix(P[:, None, :]), "real")
    if form == "complex":
        d = to_complex_form(d)
        z = _unpack_complex(d)
        z = z + 0.05 * scale * rng.normal(size=z.shape)
        d = _pack_complex(z, k)
    return project_to_adhm(d)


def random_orthogonal(k, rng):
    q, r = np.linalg.qr(rng.normal(size=(k, k)))
    return q * np.sign(np.diag(r))


def random_unitary(k, rng):
    z = rng.normal(size=(k, k)) + 1j * rng.normal(size=(k, k))
    q, r = np.linalg.qr(z)
    ph = np.diag(r) / np.abs(np.diag(r))
    return q * ph


def random_unit_quaternion(rng):
    q = rng.normal(size=4)
    return Quaternion.from_array(q / np.linalg.norm(q))


def reducible_block_data(T1, T2, P1):
    """k = 2 data diag(T1, T2), P = (P1, 0): fixed by u = diag(1, -1)."""
    T = np.zeros((2, 2, 4))
    T[0, 0] = getattr(T1, "array", T1)
    T[1, 1] = getattr(T2, "array", T2)
    P = np.zeros((2, 1, 4))
    P[0, 0] = getattr(P1, "array", P1)
    return AdhmData(QMatrix(T), QMatrix(P), "real")


def k1_data(T, rho, direction=None):
    """Charge one data with centre T and scale rho."""
    u = np.array([1.0, 0, 0, 0]) if direction is None else np.asarray(getattr(direction, "array", direction), float)
    u = u / np.linalg.norm(u)
    Ta = np.asarray(getattr(T, "array", T), dtype=float)
    return AdhmData(QMatrix(Ta.reshape(1, 1, 4)), QMatrix((rho * u).reshape(1, 1, 4)), "real")
