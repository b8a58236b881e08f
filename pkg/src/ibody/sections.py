"""Central hyperplane sections K cap V and their intersection-body test.

The radial function of K cap V is rho_K restricted to V.  Its Funk preimage
inside V is tested for positivity with the same machinery as in the full
space, one dimension lower.  Separately the great-semicircle integral of
f_eps from the normal e_V (the "deficit") is compared with the Wallis
baseline: it is what eats into the preimage of the unperturbed section.
"""
import csv
import functools
from dataclasses import dataclass, field

import numpy as np

from .body import QUAD_NODES, SUB_RESOLUTION, StarBody
from .bump import bump_eval
from .numerics import sin_power_integral
from .radon import GridFunction, assemble_operator, intersection_certificate
from .sphere import local_sphere_rule, orthonormal_basis, random_unit, sphere_grid

DEFICIT_DIRECTIONS = 64


@dataclass(frozen=True, eq=False)
class SubspaceFrame:
    normal: np.ndarray
    basis: np.ndarray  # (n-1, n)

    @classmethod
    def from_normal(cls, normal):
        hb = orthonormal_basis(normal)
        return cls(normal=hb.anchor, basis=hb.basis)

    @property
    def n(self):
        return len(self.normal)


@dataclass(frozen=True, eq=False)
class SectionCertificate:
    frame: SubspaceFrame
    inner: object  # IntersectionCertificate in V
    deficit_max: float
    baseline: float
    label: str = ""
    restricted: StarBody = field(default=None, repr=False)

    @property
    def verdict(self):
        return self.inner.verdict

    def to_dict(self):
        return {
            "label": self.label,
            "normal": [float(v) for v in self.frame.normal],
            "min_preimage": self.inner.min_preimage,
            "residual": self.inner.residual,
            "verdict": self.inner.verdict,
            "deficit_max": self.deficit_max,
            "baseline": self.baseline,
        }


def _restricted_rho(Z, parent, basis):
    return parent(Z @ basis)


def section_geometry(b, frame):
    """Pole (in V coordinates) and feature angle of the restricted body.

    With x0 = a e_V + |v| u, the section preimage is non-constant on the caps
    |(zeta, u)| > sqrt(s^2 - a^2) / |v| (s = 1 - eps^2/2) and rho restricted
    to V varies on the band |(zeta, u)| < sin(cap) / |v|.
    """
    d = b.n - 1
    if b.params is None:
        return np.eye(d)[0], np.pi / 4
    x0 = b.params.x0
    v = frame.basis @ x0
    vn = float(np.linalg.norm(v))
    if vn < 1e-12:
        return np.eye(d)[0], np.pi / 4
    a = float(frame.normal @ x0)
    s = 1.0 - 0.5 * b.params.eps ** 2
    t0 = np.sqrt(max(0.0, s * s - a * a)) / vn
    cap_f = np.arccos(min(1.0, t0))
    band_f = np.arcsin(min(1.0, np.sin(b.params.cap) / vn))
    return v / vn, float(min(cap_f, band_f, np.pi / 4))


def section_restrict(b, frame, resolution=None, sub_resolution=SUB_RESOLUTION):
    """The (n-1)-dimensional body K cap V in the coordinates of ``frame.basis``."""
    resolution = b.resolution if resolution is None else resolution
    pole, fa = section_geometry(b, frame)
    grid = sphere_grid(b.n - 1, resolution, pole=pole, feature_angle=fa, sub_resolution=sub_resolution)
    rho = functools.partial(_restricted_rho, parent=b.rho, basis=frame.basis)
    values = rho(grid.nodes)
    values = 0.5 * (values + values[grid.antipodal])
    return StarBody(n=b.n - 1, params=None, rho=rho, sampled=GridFunction(grid, values),
                    rho_min=float(values.min()), rho_max=float(values.max()),
                    resolution=resolution, amplitude=b.amplitude, pole=pole, feature_angle=fa)


def _semicircle_integrals(p, normal, Xi, amplitude=1.0, nodes=QUAD_NODES):
    """Integral over [0, pi] of f(cos phi e_V + sin phi xi) sin^{n-3} phi, per row of Xi."""
    n = p.n
    a = float(normal @ p.x0)
    beta = Xi @ p.x0
    R = np.hypot(a, beta)
    s = 1.0 - 0.5 * p.eps ** 2
    delta = np.arccos(np.clip(s / np.maximum(R, 1e-300), -1.0, 1.0))
    delta = np.where(R > s, delta, 0.0)
    phi0 = np.arctan2(beta, a)
    cand = phi0[:, None] + np.array([0.0, np.pi, -np.pi])[None, :]
    edges = np.concatenate([cand - delta[:, None], cand + delta[:, None]], axis=1)
    edges = np.sort(np.clip(np.concatenate([np.zeros((len(Xi), 1)), edges,
                                            np.full((len(Xi), 1), np.pi)], axis=1), 0.0, np.pi), axis=1)
    gx, gw = np.polynomial.legendre.leggauss(nodes)
    lo, hi = edges[:, :-1], edges[:, 1:]
    half = 0.5 * (hi - lo)
    phi = (half[:, :, None] * gx + 0.5 * (hi + lo)[:, :, None]).reshape(len(Xi), -1)
    w = (half[:, :, None] * gw).reshape(len(Xi), -1) * np.sin(phi) ** (n - 3)
    Y = np.cos(phi)[:, :, None] * normal + np.sin(phi)[:, :, None] * Xi[:, None, :]
    return amplitude * np.einsum("bq,bq->b", w, bump_eval(p, Y))


def deficit(p, frame, theta, resolution=8, amplitude=1.0):
    """Max over xi in the (n-3)-sphere of V cap theta-perp of the semicircle integral.

    The sampled xi include a product rule on that sphere and the two unit
    vectors along the projection of x0, where the maximum sits.
    """
    theta = np.asarray(theta, dtype=float)
    tl = frame.basis @ theta
    if abs(np.linalg.norm(tl) - 1.0) > 1e-8:
        raise ValueError("theta must be a unit vector in V")
    W = orthonormal_basis(tl / np.linalg.norm(tl)).basis @ frame.basis  # (n-2, n)
    y, _ = local_sphere_rule(p.n - 2, resolution)
    Xi = y @ W
    proj = W.T @ (W @ p.x0)
    pn = np.linalg.norm(proj)
    if pn > 1e-12:
        Xi = np.vstack([Xi, proj / pn, -proj / pn])
    return float(np.max(_semicircle_integrals(p, frame.normal, Xi, amplitude)))


def deficit_max(b, frame, rng=None, directions=DEFICIT_DIRECTIONS, resolution=8):
    """Max of ``deficit`` over sampled theta in V plus the two extremal ones."""
    if b.params is None:
        return 0.0
    p = b.params
    rng = np.random.default_rng(0) if rng is None else rng
    thetas = random_unit(b.n - 1, rng, directions) @ frame.basis
    pole, _ = section_geometry(b, frame)
    u = pole @ frame.basis
    perp = orthonormal_basis(pole).basis[0] @ frame.basis
    thetas = np.vstack([thetas, u, perp])
    return max(deficit(p, frame, t, resolution, b.amplitude) for t in thetas)


def section_certificate(b, frame, resolution=None, rng=None, label=""):
    """Funk sign test for K cap V plus the sampled deficit bound."""
    if b.n - 1 < 4:
        raise ValueError("sections need n >= 5")
    r = section_restrict(b, frame, resolution)
    op = assemble_operator(r.grid)
    inner = intersection_certificate(op, r.sampled)
    return SectionCertificate(frame=frame, inner=inner, deficit_max=deficit_max(b, frame, rng),
                              baseline=sin_power_integral(b.n - 3), label=label, restricted=r)


def extremal_frames(b):
    """Hyperplanes with normal x0 and with a normal orthogonal to x0."""
    n = b.n
    x0 = np.eye(n)[0] if b.params is None else b.params.x0
    perp = orthonormal_basis(x0).basis[0]
    return [("normal=x0", SubspaceFrame.from_normal(x0)),
            ("normal_perp_x0", SubspaceFrame.from_normal(perp))]


def section_scan(b, num_subspaces, seed, resolution=None):
    """Certificates for seeded Haar-random hyperplanes plus the extremal ones, worst first."""
    if num_subspaces < 1:
        raise ValueError("num_subspaces must be >= 1")
    rng = np.random.default_rng(seed)
    normals = random_unit(b.n, rng, num_subspaces)
    frames = extremal_frames(b) + [(f"haar_{i}", SubspaceFrame.from_normal(v)) for i, v in enumerate(normals)]
    drng = np.random.default_rng([seed, 1])
    certs = [section_certificate(b, f, resolution, drng, label) for label, f in frames]
    return sorted(certs, key=lambda c: c.inner.min_preimage)


def write_sections_csv(certs, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["frame_id", "min_preimage", "deficit_max", "verdict"])
        for c in certs:
            w.writerow([c.label, format(c.inner.min_preimage, ".17g"), format(c.deficit_max, ".17g"),
                        c.verdict])
