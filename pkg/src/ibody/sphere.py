"""Geometry and quadrature on the unit sphere S^{n-1}.

All grids here are tensor products in hyperspherical angles

    y_1 = cos t_1, y_2 = sin t_1 cos t_2, ..., y_d = sin t_1 ... sin t_{d-1}

expressed in a local orthonormal frame whose first column is the grid pole.
Polar angles live in [0, pi], the last (azimuthal) angle in [0, 2 pi).
Functions passed to the integrators are vectorized: they take an (m, n)
array of points and return m values.
"""
import hashlib
from dataclasses import dataclass, field

import numpy as np
from scipy.special import roots_jacobi

from .numerics import sphere_area

DEFAULT_NODE_CAP = 200_000


class ConfigError(ValueError):
    pass


class ResourceError(RuntimeError):
    pass


@dataclass(frozen=True)
class HyperplaneBasis:
    anchor: np.ndarray
    basis: np.ndarray  # (n-1, n), rows span anchor-perp


@dataclass(frozen=True)
class SubsphereRule:
    anchor: np.ndarray
    nodes: np.ndarray  # (q, n)
    weights: np.ndarray  # (q,)


@dataclass(frozen=True, eq=False)
class SphereGrid:
    """Antipodally symmetric tensor grid on S^{n-1}.

    ``axes`` holds the 1D angle nodes (polar t_1 first, azimuth last) and
    ``polar_breaks`` the interior breakpoints of the composite t_1 rule
    (empty for a plain Gauss-Jacobi grid).
    """

    n: int
    nodes: np.ndarray
    weights: np.ndarray
    antipodal: np.ndarray
    frame: np.ndarray
    axes: tuple
    polar_breaks: tuple = ()
    sub_antipodal: np.ndarray = field(default=None, repr=False)

    @property
    def size(self):
        return len(self.weights)

    @property
    def shape(self):
        return tuple(len(a) for a in self.axes)

    @property
    def pole(self):
        return self.frame[:, 0]

    def spacing(self):
        """Largest gap between consecutive polar nodes (radians)."""
        t = self.axes[0]
        return float(np.max(np.diff(np.concatenate([[-t[0]], t, [2 * np.pi - t[-1]]]))))

    def digest(self):
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.nodes).tobytes())
        h.update(np.ascontiguousarray(self.weights).tobytes())
        return h.hexdigest()[:16]

    def even_index(self):
        """Representatives of the antipodal pairs: i with i < sigma(i)."""
        idx = np.arange(self.size)
        return idx[idx < self.antipodal]


def _as_unit(x, tol=1e-8):
    x = np.asarray(x, dtype=float)
    nrm = np.linalg.norm(x)
    if nrm == 0.0 or not np.isfinite(nrm):
        raise ValueError("zero or non-finite direction")
    if abs(nrm - 1.0) > tol:
        raise ValueError(f"expected a unit vector, |x| = {nrm}")
    return x / nrm


def householder_frame(x):
    """Orthogonal n x n matrix whose first column is x.

    Deterministic: x and -x give the same trailing columns.
    """
    x = np.asarray(x, dtype=float)
    n = len(x)
    s = 1.0 if x[0] >= 0 else -1.0
    v = x.copy()
    v[0] += s
    H = np.eye(n) - 2.0 * np.outer(v, v) / np.dot(v, v)
    H[:, 0] = x
    return H


def _householder_batch(X):
    """Batched ``householder_frame`` for rows of X, shape (b, n, n)."""
    b, n = X.shape
    s = np.where(X[:, 0] >= 0, 1.0, -1.0)
    V = X.copy()
    V[:, 0] += s
    H = np.eye(n)[None] - 2.0 * V[:, :, None] * V[:, None, :] / np.einsum("bi,bi->b", V, V)[:, None, None]
    H[:, :, 0] = X
    return H


def orthonormal_basis(x):
    """Complete the unit vector x to an orthonormal frame of x-perp."""
    x = _as_unit(x)
    H = householder_frame(x)
    return HyperplaneBasis(anchor=x, basis=H[:, 1:].T.copy())


def random_rotation(n, rng):
    """Haar-distributed orthogonal matrix (QR of a Gaussian, sign-fixed)."""
    Z = rng.standard_normal((n, n))
    Q, R = np.linalg.qr(Z)
    return Q * np.sign(np.diag(R))


def random_unit(n, rng, size=None):
    if size is None:
        z = rng.standard_normal(n)
        return z / np.linalg.norm(z)
    z = rng.standard_normal((size, n))
    return z / np.linalg.norm(z, axis=1, keepdims=True)


# -- 1D angle rules ----------------------------------------------------------

def _symmetrize(t, w, period):
    t = 0.5 * (t + (period - t[::-1]))
    w = 0.5 * (w + w[::-1])
    return t, w


def polar_rule(k, r):
    """Gauss-Jacobi rule in u = cos t for the weight sin(t)^k dt on [0, pi].

    Exact for polynomials of degree <= 2r-1 in cos t times sin(t)^k.
    """
    a = (k - 1) / 2.0
    u, w = roots_jacobi(r, a, a)
    t = np.arccos(u)[::-1]
    return _symmetrize(t, w[::-1].astype(float), np.pi)


def azimuth_rule(m):
    t = (np.arange(m) + 0.5) * (2.0 * np.pi / m)
    return t, np.full(m, 2.0 * np.pi / m)


# -- tensor rules -----------------------------------------------------------

def angles_to_local(angles):
    """Map (..., d-1) hyperspherical angles to (..., d) unit vectors."""
    angles = np.asarray(angles, dtype=float)
    d = angles.shape[-1] + 1
    y = np.empty(angles.shape[:-1] + (d,))
    s = np.ones(angles.shape[:-1])
    for j in range(d - 1):
        y[..., j] = s * np.cos(angles[..., j])
        s = s * np.sin(angles[..., j])
    y[..., d - 1] = s
    return y


def local_to_angles(y):
    """Inverse of ``angles_to_local`` for (..., d) unit vectors, d >= 2."""
    y = np.asarray(y, dtype=float)
    d = y.shape[-1]
    out = np.empty(y.shape[:-1] + (d - 1,))
    # tail[j] = |y_{j:}|
    tail = np.sqrt(np.cumsum((y ** 2)[..., ::-1], axis=-1)[..., ::-1])
    for j in range(d - 2):
        out[..., j] = np.arctan2(tail[..., j + 1], y[..., j])
    out[..., d - 2] = np.mod(np.arctan2(y[..., d - 1], y[..., d - 2]), 2.0 * np.pi)
    return out


def _tensor(axes, axis_weights):
    grids = np.meshgrid(*axes, indexing="ij")
    angles = np.stack([g.ravel() for g in grids], axis=-1)
    w = axis_weights[0]
    for aw in axis_weights[1:]:
        w = np.multiply.outer(w, aw)
    return angles, np.ravel(w)


def _tensor_antipodal(shape):
    """Index map of the antipodal involution on a symmetric tensor grid."""
    idx = np.indices(shape)
    mapped = []
    for j, m in enumerate(shape):
        if j < len(shape) - 1:
            mapped.append(m - 1 - idx[j])
        else:
            mapped.append((idx[j] + m // 2) % m)
    return np.ravel_multi_index(tuple(mapped), shape).ravel()


def sphere_rule_axes(d, r):
    """Angle axes of the plain product rule on S^{d-1}, d >= 2."""
    axes, wts = [], []
    for k in range(d - 2, 0, -1):
        t, w = polar_rule(k, r)
        axes.append(t)
        wts.append(w)
    t, w = azimuth_rule(2 * r)
    axes.append(t)
    wts.append(w)
    return axes, wts


def local_sphere_rule(d, r):
    """Product rule on S^{d-1} in local coordinates: (points, weights)."""
    if d == 1:
        return np.array([[1.0], [-1.0]]), np.array([1.0, 1.0])
    axes, wts = sphere_rule_axes(d, r)
    angles, w = _tensor(axes, wts)
    y = angles_to_local(angles)
    anti = _tensor_antipodal(tuple(len(a) for a in axes))
    _enforce_antipodal(y, w, anti)
    return y, w


def _enforce_antipodal(y, w, anti):
    first = np.arange(len(w)) < anti
    y[anti[first]] = -y[first]
    w[anti[first]] = w[first]


def staggered_polar_nodes(feature_angle, per_segment, width=1.5):
    """Polar rings clustered on a cap of radius ``feature_angle`` and its equator.

    Rings in [0, pi/2] sit at u = k + 3/4 of a parameter u in [0, 3m] whose
    image t(u) has spacing a/m on the cap [0, a] and on the band
    [pi/2 - a, pi/2], growing smoothly in between (logistic transitions
    ``width`` rings wide, so neighbouring gaps differ by less than a factor
    of about 2).  The map satisfies t(3m - u) = pi/2 - t(u), so the offsets
    pi/2 - t_k of the grazing subspheres interlace the rings from below;
    this keeps Funk collocation off the vanishing diagonal of its Abel-type
    kernel.
    """
    a = min(float(feature_angle), np.pi / 4)
    m = int(per_segment)
    M = 3 * m
    w = float(width)
    c = min(2.5 * w, m / 4.0)
    u = np.linspace(0.0, M, 64 * M + 1)
    s = 1.0 / (1.0 + np.exp(-(u - m - c) / w)) / (1.0 + np.exp(-(M - m - c - u) / w))
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (s[1:] + s[:-1]) * np.diff(u))])
    # density h + (H - h) * s: h fixed by the cap, H by the total length
    h = a / m
    H = max(h + (np.pi / 2 - h * M) / cum[-1], h) if cum[-1] > 0 else h
    phi = h * u + (H - h) * cum
    phi *= (np.pi / 2) / phi[-1]
    uk = np.arange(M) + 0.75
    t = np.interp(uk, u, phi)
    t = 0.5 * (t + (np.pi / 2 - np.interp(M - uk, u, phi)))
    return np.concatenate([t, np.pi - t[::-1]]), (a, np.pi / 2 - a, np.pi / 2 + a, np.pi - a)


def polar_stencil(t, q):
    """Cubic Lagrange stencils on polar rings ``t`` evaluated at angles ``q``.

    Ghost rings reflect through both poles; returns ring indices, a flag
    marking reflected (ghost) entries, and the weights, each of shape (m, 4).
    """
    nt = len(t)
    ext_t = np.concatenate([-t[2::-1], t, 2 * np.pi - t[:-4:-1]])
    ext_i = np.concatenate([[2, 1, 0], np.arange(nt), [nt - 1, nt - 2, nt - 3]])
    ext_f = np.concatenate([[True] * 3, np.zeros(nt, bool), [True] * 3])
    k = np.clip(np.searchsorted(ext_t, q, side="right") - 1, 1, len(ext_t) - 3)
    st = k[:, None] + np.arange(-1, 3)[None, :]
    xs = ext_t[st]
    w = np.ones_like(xs)
    for j in range(4):
        for i in range(4):
            if i != j:
                w[:, j] *= (q - xs[:, i]) / (xs[:, j] - xs[:, i])
    return ext_i[st], ext_f[st], w


def cell_polar_weights(t, k):
    """Integral of sin^k over the cell of each ring (cells split at midpoints).

    Positive, and the total is exactly the integral over [0, pi].
    """
    edges = np.concatenate([[0.0], 0.5 * (t[1:] + t[:-1]), [np.pi]])
    gx, gw = np.polynomial.legendre.leggauss(16)
    lo, hi = edges[:-1], edges[1:]
    q = 0.5 * (hi - lo)[:, None] * gx + 0.5 * (hi + lo)[:, None]
    return np.sum(0.5 * (hi - lo)[:, None] * gw * np.sin(q) ** k, axis=1)


def sphere_grid(n, resolution, pole=None, feature_angle=None, sub_resolution=None,
                max_nodes=DEFAULT_NODE_CAP):
    """Antipodally symmetric product grid on S^{n-1}.

    With ``feature_angle`` the polar angle (measured from ``pole``) uses the
    staggered rings of ``staggered_polar_nodes`` with ``resolution`` rings
    per segment and cell weights, and the remaining angles use the
    plain rule at ``sub_resolution`` (default 3).
    """
    n = int(n)
    if n < 3:
        raise ConfigError(f"sphere_grid: need n >= 3, got {n}")
    if resolution < 4:
        raise ConfigError(f"sphere_grid: resolution must be >= 4, got {resolution}")
    pole = np.eye(n)[0] if pole is None else _as_unit(pole)
    frame = householder_frame(pole)

    if feature_angle is None:
        sub_axes, sub_w = sphere_rule_axes(n - 1, resolution if sub_resolution is None else sub_resolution)
        t1, w1 = polar_rule(n - 2, resolution)
        breaks = ()
    else:
        sub_axes, sub_w = sphere_rule_axes(n - 1, 3 if sub_resolution is None else sub_resolution)
        t1, breaks = staggered_polar_nodes(feature_angle, resolution)
        w1 = cell_polar_weights(t1, n - 2)
        t1, w1 = _symmetrize(t1, w1, np.pi)
    axes = [t1] + list(sub_axes)
    shape = tuple(len(a) for a in axes)
    total = int(np.prod(shape))
    if total > max_nodes:
        raise ResourceError(f"sphere_grid: {total} nodes exceeds cap {max_nodes}")
    angles, w = _tensor(axes, [w1] + list(sub_w))
    local = angles_to_local(angles)
    anti = _tensor_antipodal(shape)
    _enforce_antipodal(local, w, anti)
    nodes = local @ frame.T
    first = np.arange(total) < anti
    nodes[anti[first]] = -nodes[first]
    nodes.setflags(write=False)
    w.setflags(write=False)
    return SphereGrid(n=n, nodes=nodes, weights=w, antipodal=anti, frame=frame,
                      axes=tuple(axes), polar_breaks=tuple(breaks),
                      sub_antipodal=_tensor_antipodal(shape[1:]))


def subsphere_rule(x, resolution):
    """Product Gauss-Jacobi rule on the great subsphere S^{n-1} cap x-perp."""
    if resolution < 4:
        raise ConfigError(f"subsphere_rule: resolution must be >= 4, got {resolution}")
    hb = orthonormal_basis(x)
    y, w = local_sphere_rule(len(hb.anchor) - 1, resolution)
    return SubsphereRule(anchor=hb.anchor, nodes=y @ hb.basis, weights=w)


def focused_subsphere_rules(X, pole, alpha_breaks, polar_nodes, rest_resolution, min_pieces=0):
    """Subsphere rules for many anchors, each polarized at the projection of ``pole``.

    For anchor x the subsphere x-perp is parametrized by the angle psi from
    u = proj(pole)/|proj(pole)| and a point of the (n-3)-sphere orthogonal to
    x and u.  The psi-rule is composite Gauss-Legendre with breakpoints at the
    preimages of ``alpha_breaks`` (angles from ``pole``), so features sharp in
    the distance to the pole are resolved uniformly in the anchor.
    ``min_pieces`` adds uniform psi-breaks so no piece is longer than
    pi / min_pieces.

    Returns nodes (b, q, n) and weights (b, q).
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    b, n = X.shape
    pole = np.asarray(pole, dtype=float)
    dots = X @ pole
    U = pole[None, :] - dots[:, None] * X
    c = np.linalg.norm(U, axis=1)
    F = _householder_batch(X)
    degenerate = c < 1e-12
    U = np.where(degenerate[:, None], F[:, :, 1], U / np.where(degenerate, 1.0, c)[:, None])
    c = np.where(degenerate, 0.0, np.minimum(c, 1.0))

    # frame of x-perp whose first vector is u
    V = np.einsum("bji,bj->bi", F[:, :, 1:], U)
    G = _householder_batch(V / np.linalg.norm(V, axis=1, keepdims=True))
    E = np.einsum("bij,bjk->bik", F[:, :, 1:], G)  # (b, n, n-1)

    # psi breakpoints per anchor
    cos_a = np.cos(np.asarray(alpha_breaks, dtype=float))
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(c[:, None] > 0, cos_a[None, :] / c[:, None], np.sign(cos_a)[None, :] * np.inf)
    psi_b = np.arccos(np.clip(ratio, -1.0, 1.0))
    if min_pieces > 1:
        extra = np.linspace(0.0, np.pi, int(min_pieces) + 1)[1:-1]
        psi_b = np.sort(np.concatenate([psi_b, np.broadcast_to(extra, (b, len(extra)))], axis=1), axis=1)
    edges = np.concatenate([np.zeros((b, 1)), psi_b, np.full((b, 1), np.pi)], axis=1)
    gx, gw = np.polynomial.legendre.leggauss(int(polar_nodes))
    lo, hi = edges[:, :-1], edges[:, 1:]
    half = 0.5 * (hi - lo)
    psi = (half[:, :, None] * gx + 0.5 * (hi + lo)[:, :, None]).reshape(b, -1)
    wpsi = (half[:, :, None] * gw).reshape(b, -1) * np.sin(psi) ** (n - 3)

    zeta, wz = local_sphere_rule(n - 2, rest_resolution)  # (r, n-2)
    rest = np.einsum("bij,rj->bri", E[:, :, 1:], zeta)  # (b, r, n)
    cp, sp = np.cos(psi), np.sin(psi)
    nodes = cp[:, :, None, None] * E[:, None, None, :, 0] + sp[:, :, None, None] * rest[:, None, :, :]
    weights = wpsi[:, :, None] * wz[None, None, :]
    return nodes.reshape(b, -1, n), weights.reshape(b, -1)


def focused_subsphere_rule(x, pole, alpha_breaks, polar_nodes=16, rest_resolution=2, min_pieces=0):
    x = _as_unit(x)
    nodes, w = focused_subsphere_rules(x[None], pole, alpha_breaks, polar_nodes, rest_resolution, min_pieces)
    return SubsphereRule(anchor=x, nodes=nodes[0], weights=w[0])


def integrate_subsphere(f, x, rule):
    """Sum of weights times f over the rule nodes; ``rule`` must be anchored at x."""
    x = np.asarray(x, dtype=float)
    if not np.allclose(rule.anchor, x, atol=1e-12):
        raise ValueError("rule is anchored at a different direction")
    vals = np.asarray(f(rule.nodes), dtype=float)
    if not np.all(np.isfinite(vals)):
        raise FloatingPointError("integrand returned non-finite values")
    return float(np.dot(rule.weights, vals))


def integrate_grid(values, grid):
    return float(np.dot(grid.weights, values))


def spherical_laplacian(f, theta, h=1e-3):
    """Laplace-Beltrami of f at theta via the ambient Laplacian of f(y/|y|).

    ``theta`` may be a single point (n,) or a batch (m, n).
    """
    if not 1e-5 <= h <= 1e-2:
        raise ConfigError(f"spherical_laplacian: step {h} outside [1e-5, 1e-2]")
    theta = np.asarray(theta, dtype=float)
    single = theta.ndim == 1
    T = np.atleast_2d(theta)
    m, n = T.shape

    def F(Y):
        return np.asarray(f(Y / np.linalg.norm(Y, axis=1, keepdims=True)), dtype=float)

    E = np.eye(n) * h
    plus = (T[:, None, :] + E[None]).reshape(-1, n)
    minus = (T[:, None, :] - E[None]).reshape(-1, n)
    center = F(T)
    lap = (F(plus).reshape(m, n).sum(1) + F(minus).reshape(m, n).sum(1) - 2 * n * center) / h ** 2
    return float(lap[0]) if single else lap


def check_area(weights, d, tol=1e-8):
    return abs(np.sum(weights) / sphere_area(d) - 1.0) <= tol
