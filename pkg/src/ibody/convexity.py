"""Planar convexity test J = 2 rho'^2 - rho'' rho + rho^2 > 0.

A star body is convex iff every central 2-plane section is a convex planar
curve; in polar coordinates that is positivity of J along the profile.
"""
import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .sphere import orthonormal_basis

MIN_ANGLES = 64


@dataclass(frozen=True, eq=False)
class PlaneSectionProfile:
    basis: np.ndarray  # (2, n)
    angles: np.ndarray
    rho: np.ndarray

    def __post_init__(self):
        if len(self.angles) < MIN_ANGLES:
            raise ValueError(f"profile needs at least {MIN_ANGLES} angles")

    @property
    def step(self):
        return 2.0 * np.pi / len(self.angles)


@dataclass(frozen=True, eq=False)
class ConvexityCertificate:
    J_min: float
    worst_plane: np.ndarray
    worst_angle: float
    num_planes: int
    seed: int
    m: int
    max_d1: float = 0.0
    max_d2: float = 0.0
    profiles: list = field(default=None, repr=False)

    def to_dict(self):
        return {
            "J_min": self.J_min,
            "worst_plane": [[float(v) for v in row] for row in self.worst_plane],
            "worst_angle": self.worst_angle,
            "num_planes": self.num_planes,
            "seed": self.seed,
            "m": self.m,
            "max_abs_rho_d1": self.max_d1,
            "max_abs_rho_d2": self.max_d2,
        }


def uniform_angles(m):
    return 2.0 * np.pi * np.arange(m) / m


def profile_from_function(rho, m, basis=None):
    """Synthetic profile from a function of the angle (for oracles)."""
    phi = uniform_angles(m)
    basis = np.eye(2) if basis is None else basis
    return PlaneSectionProfile(basis=basis, angles=phi, rho=np.asarray(rho(phi), dtype=float))


def section_profile(b, xi1, xi2, m):
    """rho of the body along x = xi1 cos phi + xi2 sin phi, phi uniform."""
    xi1, xi2 = np.asarray(xi1, dtype=float), np.asarray(xi2, dtype=float)
    if abs(xi1 @ xi2) > 1e-10 or abs(xi1 @ xi1 - 1) > 1e-10 or abs(xi2 @ xi2 - 1) > 1e-10:
        raise ValueError("xi1, xi2 must be orthonormal")
    phi = uniform_angles(m)
    X = np.cos(phi)[:, None] * xi1 + np.sin(phi)[:, None] * xi2
    return PlaneSectionProfile(basis=np.vstack([xi1, xi2]), angles=phi, rho=b.rho(X))


def profile_derivatives(p):
    """rho', rho'' by 4th-order periodic central differences."""
    r, h = p.rho, p.step
    rp1, rm1 = np.roll(r, -1), np.roll(r, 1)
    rp2, rm2 = np.roll(r, -2), np.roll(r, 2)
    d1 = (-rp2 + 8 * rp1 - 8 * rm1 + rm2) / (12 * h)
    d2 = (-rp2 + 16 * rp1 - 30 * r + 16 * rm1 - rm2) / (12 * h * h)
    return d1, d2


def curvature_functional(p):
    d1, d2 = profile_derivatives(p)
    return 2 * d1 ** 2 - d2 * p.rho + p.rho ** 2


def default_angles(eps):
    if eps <= 0:
        return 256
    return max(256, math.ceil(64 * math.pi / eps))


def random_planes(n, count, rng):
    """Haar-random 2-frames: QR of Gaussian n x 2 blocks."""
    out = []
    for _ in range(count):
        Q, R = np.linalg.qr(rng.standard_normal((n, 2)))
        Q = Q * np.sign(np.diag(R))
        out.append(Q.T)
    return out


def axial_planes(b):
    """Planes spanned by x0 and each basis vector of x0-perp."""
    x0 = b.pole if b.pole is not None else np.eye(b.n)[0]
    return [np.vstack([x0, v]) for v in orthonormal_basis(x0).basis]


def convexity_scan(b, num_planes, m=None, seed=0, keep_profiles=False):
    """Minimum of J over seeded random planes and the axial family."""
    if num_planes < 1:
        raise ValueError("num_planes must be >= 1")
    m = default_angles(b.eps) if m is None else int(m)
    rng = np.random.default_rng(seed)
    planes = axial_planes(b) + random_planes(b.n, num_planes, rng)
    best = (np.inf, None, 0.0)
    max_d1 = max_d2 = 0.0
    profiles = [] if keep_profiles else None
    for P in planes:
        prof = section_profile(b, P[0], P[1], m)
        d1, d2 = profile_derivatives(prof)
        J = 2 * d1 ** 2 - d2 * prof.rho + prof.rho ** 2
        i = int(np.argmin(J))
        if J[i] < best[0]:
            best = (float(J[i]), P, float(prof.angles[i]))
        max_d1 = max(max_d1, float(np.max(np.abs(d1))))
        max_d2 = max(max_d2, float(np.max(np.abs(d2))))
        if keep_profiles:
            profiles.append((prof, d1, d2, J))
    return ConvexityCertificate(J_min=best[0], worst_plane=best[1], worst_angle=best[2],
                                num_planes=len(planes), seed=seed, m=m,
                                max_d1=max_d1, max_d2=max_d2, profiles=profiles)


def write_convexity_csv(cert, path):
    """One row per (plane, angle); needs a scan run with keep_profiles=True."""
    if cert.profiles is None:
        raise ValueError("certificate has no stored profiles")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["plane_id", "phi", "rho", "rho_d1", "rho_d2", "J"])
        for k, (prof, d1, d2, J) in enumerate(cert.profiles):
            for row in zip(prof.angles, prof.rho, d1, d2, J):
                w.writerow([k] + [format(float(v), ".17g") for v in row])
