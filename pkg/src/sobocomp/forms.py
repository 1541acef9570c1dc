"""Quadratic form fields, form-weighted norms, gradients and cutoffs."""

from dataclasses import dataclass, field
import math

import numpy as np

from .domain import lp_norm
from .errors import (
    AssemblyError,
    CoverageError,
    PreconditionError,
    PSDError,
    StencilError,
    SupportError,
)
from .expr import compile_expr

PSD_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class QuadraticFormField:
    domain: object
    Q: np.ndarray = field(repr=False)
    label: str = ""

    def __post_init__(self):
        Q = np.asarray(self.Q, dtype=float)
        n, m = self.domain.dim, self.domain.n_active
        if Q.shape != (m, n, n):
            raise PreconditionError(f"form has shape {Q.shape}, expected {(m, n, n)}")
        if not np.all(np.isfinite(Q)):
            raise PreconditionError("form entries must be finite")
        Q = 0.5 * (Q + np.swapaxes(Q, 1, 2))
        lam = np.linalg.eigvalsh(Q)[:, 0]
        if np.any(lam < -PSD_TOL):
            i = int(np.argmin(lam))
            raise PSDError(f"form is not positive semidefinite at cell {i} (eigenvalue {lam[i]:.3g})",
                           witness={"cell": i, "eigenvalue": float(lam[i])})
        Q.setflags(write=False)
        object.__setattr__(self, "Q", Q)


def identity_form(domain):
    m, n = domain.n_active, domain.dim
    return QuadraticFormField(domain, np.broadcast_to(np.eye(n), (m, n, n)).copy(), "identity")


def zero_form(domain):
    m, n = domain.n_active, domain.dim
    return QuadraticFormField(domain, np.zeros((m, n, n)), "zero")


def grushin_form(domain):
    """diag(1, x1^2, ..., x1^2)."""
    m, n = domain.n_active, domain.dim
    if n < 2:
        raise PreconditionError("grushin form needs dim >= 2")
    Q = np.zeros((m, n, n))
    Q[:, 0, 0] = 1.0
    for k in range(1, n):
        Q[:, k, k] = domain.centers[:, 0] ** 2
    return QuadraticFormField(domain, Q, "grushin")


def diag_expr_form(domain, entries):
    m, n = domain.n_active, domain.dim
    if len(entries) != n:
        raise PreconditionError(f"need {n} diagonal expressions, got {len(entries)}")
    Q = np.zeros((m, n, n))
    for k, e in enumerate(entries):
        Q[:, k, k] = compile_expr(e)(domain.centers) if isinstance(e, str) else e
    return QuadraticFormField(domain, Q, "diag_expr")


def quadratic_value(Q, g):
    g = np.asarray(g, dtype=float).reshape(Q.Q.shape[0], -1)
    return np.einsum("mi,mij,mj->m", g, Q.Q, g)


def sqrtQ_magnitude(Q, g):
    """|sqrt(Q(x)) g(x)| = (g^T Q g)^{1/2} per cell."""
    g = np.asarray(g, dtype=float)
    if g.ndim == 1:
        g = g[:, None]
    if g.shape != Q.Q.shape[:2]:
        raise PreconditionError(f"vector field shape {g.shape} does not match form {Q.Q.shape[:2]}")
    val = quadratic_value(Q, g)
    scale = np.maximum(1.0, np.sum(g * g, axis=1))
    if np.any(val < -PSD_TOL * scale):
        i = int(np.argmin(val / scale))
        raise PSDError(f"negative quadratic form value {val[i]:.3g} at cell {i}", witness={"cell": i})
    return np.sqrt(np.maximum(val, 0.0))


def form_lp_norm(g, Q, p, mu, E=None):
    return lp_norm(sqrtQ_magnitude(Q, g), p, mu, E)


@dataclass(frozen=True, eq=False)
class SobolevPair:
    f: np.ndarray = field(repr=False)
    g: np.ndarray = field(repr=False)
    support: np.ndarray = field(default=None, repr=False)
    label: str = ""

    def __post_init__(self):
        f = np.asarray(self.f, dtype=float)
        g = np.asarray(self.g, dtype=float)
        if g.ndim == 1:
            g = g[:, None]
        if g.shape[0] != f.shape[0]:
            raise PreconditionError("f and g must live on the same cells")
        if not (np.all(np.isfinite(f)) and np.all(np.isfinite(g))):
            raise PreconditionError("pair values must be finite")
        if self.support is not None:
            s = np.asarray(self.support, dtype=bool)
            outside = ~s & ((f != 0) | np.any(g != 0, axis=1))
            if outside.any():
                i = int(np.flatnonzero(outside)[0])
                raise SupportError(f"pair does not vanish outside its support (cell {i})",
                                   witness={"cell": i})
            object.__setattr__(self, "support", s)
        object.__setattr__(self, "f", f)
        object.__setattr__(self, "g", g)

    def scaled(self, c):
        return SobolevPair(c * self.f, c * self.g, self.support, self.label)

    def with_f(self, f):
        return SobolevPair(f, self.g, None, self.label)


def sobolev_norm(pair, p, nu, mu, Q, E=None):
    """||f||_{L^p_nu(E)} + ||g||_{L^p_mu(E, Q)}."""
    return lp_norm(pair.f, p, nu, E) + form_lp_norm(pair.g, Q, p, mu, E)


def _neighbors(domain, axis, step):
    """Active index of the neighbor along ``axis`` (or -1)."""
    multi = domain._multi
    nb = multi.copy()
    nb[:, axis] += step
    ok = (nb[:, axis] >= 0) & (nb[:, axis] < domain.cells_per_axis[axis])
    out = np.full(domain.n_active, -1, dtype=np.int64)
    out[ok] = domain.index[tuple(nb[ok].T)]
    return out


def gradient(domain, f):
    """Central differences where both neighbors are active, one-sided otherwise.

    A cell with no active neighbor along some axis gets 0 in that component;
    a cell with no active neighbor at all raises :class:`StencilError`.
    """
    f = np.asarray(f, dtype=float)
    if f.shape != (domain.n_active,):
        raise PreconditionError(f"field has shape {f.shape}, expected ({domain.n_active},)")
    g = np.zeros((domain.n_active, domain.dim))
    any_nb = np.zeros(domain.n_active, dtype=bool)
    for k in range(domain.dim):
        h = domain.spacing[k]
        up, dn = _neighbors(domain, k, 1), _neighbors(domain, k, -1)
        hu, hd = up >= 0, dn >= 0
        both = hu & hd
        g[both, k] = (f[up[both]] - f[dn[both]]) / (2 * h)
        only_u = hu & ~hd
        g[only_u, k] = (f[up[only_u]] - f[only_u]) / h
        only_d = hd & ~hu
        g[only_d, k] = (f[only_d] - f[dn[only_d]]) / h
        any_nb |= hu | hd
    if not any_nb.all():
        i = int(np.flatnonzero(~any_nb)[0])
        raise StencilError(f"active cell {i} has no active neighbor", witness={"cell": i})
    return g


def _distance_gradient(d, domain, y):
    """Gradient in x of d(y, x) at active centers, or None if not available."""
    diff = domain.centers - domain.centers[y]
    if d.kind in ("euclidean", "power"):
        r = np.sqrt(np.sum(diff ** 2, axis=1))
        with np.errstate(invalid="ignore", divide="ignore"):
            unit = np.where(r[:, None] > 0, diff / r[:, None], 0.0)
        if d.kind == "euclidean":
            return unit
        return d.beta * (r ** (d.beta - 1))[:, None] * unit
    if d.kind == "anisotropic":
        beta = np.asarray(d.beta)
        comp = np.abs(diff) ** beta
        k = np.argmax(comp, axis=1)
        out = np.zeros_like(diff)
        rows = np.arange(diff.shape[0])
        a = np.abs(diff[rows, k])
        with np.errstate(invalid="ignore", divide="ignore"):
            out[rows, k] = np.where(a > 0, beta[k] * a ** (beta[k] - 1) * np.sign(diff[rows, k]), 0.0)
        return out
    return None


@dataclass(eq=False)
class Cutoff:
    phi: np.ndarray = field(repr=False)
    grad: np.ndarray = field(repr=False)
    ball: object
    gamma: float
    inner: np.ndarray = field(repr=False)
    certificate: dict
    symbolic: bool = True


def build_cutoff(d, domain, B_outer, gamma_inner=None, Q=None, mu=None, s=math.inf):
    """Piecewise-linear plateau in d(y, .): 1 on B_gamma(y), 0 off B_r(y).

    The certificate carries ||sqrt(Q) grad phi||_{L^s_mu}; ``ok`` is false when
    that norm is not finite.
    """
    r = B_outer.radius
    if gamma_inner is None:
        gamma_inner = r / 2
    if not 0 < gamma_inner < r:
        raise PreconditionError(f"need 0 < gamma < r, got gamma={gamma_inner}, r={r}")
    y = B_outer.center
    dist = d.from_cell(domain, y)
    dist[y] = 0.0
    phi = np.clip((r - dist) / (r - gamma_inner), 0.0, 1.0)
    phi[~B_outer.cells] = 0.0
    ramp = (dist > gamma_inner) & (dist < r)
    dgrad = _distance_gradient(d, domain, y)
    if dgrad is not None:
        grad = np.zeros((domain.n_active, domain.dim))
        grad[ramp] = -dgrad[ramp] / (r - gamma_inner)
        symbolic = True
    else:
        grad = gradient(domain, phi)
        symbolic = False
    cert = {"s": s, "symbolic": symbolic}
    if Q is not None and mu is not None:
        with np.errstate(over="ignore", invalid="ignore"):
            val = form_lp_norm(grad, Q, s, mu)
        cert["norm"] = val
        cert["ok"] = bool(np.isfinite(val))
    return Cutoff(phi, grad, B_outer, float(gamma_inner), phi >= 1.0, cert, symbolic)


@dataclass(eq=False)
class CutoffFamily:
    psis: np.ndarray = field(repr=False)
    grads: np.ndarray = field(repr=False)
    balls: list
    phis: np.ndarray = field(repr=False)

    @property
    def J(self):
        return self.psis.shape[0]

    def total(self):
        return self.psis.sum(axis=0)

    def product_form(self):
        """1 - prod_j (1 - phi_j), cellwise."""
        return 1.0 - np.prod(1.0 - self.phis, axis=0)


def partition_of_unity(K, cutoffs):
    """psi_1 = phi_1, psi_j = (1-phi_1)...(1-phi_{j-1}) phi_j, with gradients
    from the product rule."""
    if not cutoffs:
        raise PreconditionError("need at least one cutoff")
    K = np.asarray(K, dtype=bool)
    inner = np.zeros_like(K)
    for c in cutoffs:
        inner |= c.inner
    if np.any(K & ~inner):
        i = int(np.flatnonzero(K & ~inner)[0])
        raise CoverageError(f"cutoff plateaus miss K at cell {i}", witness={"cell": i})
    m, n = cutoffs[0].grad.shape
    P = np.ones(m)
    dP = np.zeros((m, n))
    psis, grads = [], []
    for c in cutoffs:
        psis.append(P * c.phi)
        grads.append(dP * c.phi[:, None] + P[:, None] * c.grad)
        dP = dP * (1.0 - c.phi)[:, None] - P[:, None] * c.grad
        P = P * (1.0 - c.phi)
    return CutoffFamily(np.array(psis), np.array(grads), [c.ball for c in cutoffs],
                        np.array([c.phi for c in cutoffs]))


def partition_gradient_norms(family, Q, mu, s):
    return np.array([form_lp_norm(family.grads[j], Q, s, mu, family.balls[j].cells)
                     for j in range(family.J)])


def local_to_global_sobolev(local_constants, C1_constants, psi_norms):
    """sum_j C(B_j) (1 + Cbar C_1(B_j)) with Cbar = max_j psi_norms[j].

    ``psi_norms[j]`` is ||sqrt(Q) grad psi_j||_{L^s_mu(B_j)}.
    """
    C = np.asarray(local_constants, dtype=float)
    C1 = np.asarray(C1_constants, dtype=float)
    nrm = np.asarray(psi_norms, dtype=float)
    if not (C.shape == C1.shape == nrm.shape):
        raise PreconditionError("per-ball constant lists must have equal length")
    for name, arr in (("C(B)", C), ("C1(B)", C1), ("psi gradient norm", nrm)):
        bad = ~np.isfinite(arr) | (arr < 0)
        if bad.any():
            j = int(np.flatnonzero(bad)[0])
            raise AssemblyError(f"{name} is not a finite nonnegative number at ball {j}",
                                witness={"ball": j, "value": float(arr[j])})
    cbar = float(nrm.max()) if nrm.size else 0.0
    return float(np.sum(C * (1.0 + cbar * C1))), cbar
