"""The star body K with radial function pi * R(1 - f_eps).

Away from the support caps the body is the ball of radius c_n(n); the bump
only dents it near the equator of x0.  Radial values are computed by fresh
subsphere quadrature in every direction, never interpolated.
"""
import csv
import functools
from dataclasses import dataclass, field

import numpy as np

from .bump import BumpParams, bump_eval
from .numerics import c_n
from .radon import GridFunction
from .sphere import ConfigError, focused_subsphere_rules, sphere_grid

QUAD_NODES = 64
DEFAULT_RESOLUTION = 12
SUB_RESOLUTION = 2


class BodyError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class StarBody:
    """Origin-symmetric star body given by its radial function.

    ``rho`` maps an (m, n) array of unit vectors to m radii.  ``pole`` and
    ``feature_angle`` describe where the radial function varies fastest;
    certification grids are aligned with them.
    """

    n: int
    params: BumpParams | None
    rho: object = field(repr=False)
    sampled: GridFunction = field(repr=False)
    rho_min: float
    rho_max: float
    resolution: int = DEFAULT_RESOLUTION
    amplitude: float = 1.0
    pole: np.ndarray | None = field(default=None, repr=False)
    feature_angle: float | None = None

    @property
    def grid(self):
        return self.sampled.grid

    @property
    def eps(self):
        return 0.0 if self.params is None else self.params.eps

    def radius(self, x):
        """rho at one unit vector (float) or a batch (array)."""
        x = np.asarray(x, dtype=float)
        out = self.rho(np.atleast_2d(x))
        return float(out[0]) if x.ndim == 1 else out


def perturbation(p, x, resolution=QUAD_NODES, chunk=256):
    """pi times the integral of f_eps over the great subsphere x-perp.

    Directions whose subsphere misses both support caps get exactly 0: the
    subsphere x-perp comes within angle a of x0 only when the projection of
    x0 onto it has length above cos a.
    """
    x = np.asarray(x, dtype=float)
    X = np.atleast_2d(x)
    if resolution < 4:
        raise ConfigError("perturbation: resolution must be >= 4")
    a = p.cap
    proj = np.sqrt(np.clip(1.0 - (X @ p.x0) ** 2, 0.0, 1.0))
    active = np.flatnonzero(proj > np.cos(a) - 1e-12)
    out = np.zeros(len(X))
    for s in range(0, len(active), chunk):
        rows = active[s:s + chunk]
        nodes, w = focused_subsphere_rules(X[rows], p.x0, [a, np.pi - a], resolution, 2)
        out[rows] = np.pi * np.einsum("bq,bq->b", w, bump_eval(p, nodes))
    return float(out[0]) if x.ndim == 1 else out


def _bump_radial(X, p, cn, amplitude, quad_nodes):
    return cn - amplitude * perturbation(p, X, quad_nodes)


def _ball_radial(X, cn):
    return np.full(len(X), cn)


def _finish(n, params, rho, grid, resolution, amplitude, pole, feature_angle):
    values = rho(grid.nodes)
    values = 0.5 * (values + values[grid.antipodal])
    rmin = float(values.min())
    if not rmin > 0.0:
        raise BodyError(f"epsilon too large: radial function reaches {rmin:.6g} <= 0")
    return StarBody(n=n, params=params, rho=rho, sampled=GridFunction(grid, values),
                    rho_min=rmin, rho_max=float(values.max()), resolution=resolution,
                    amplitude=amplitude, pole=pole, feature_angle=feature_angle)


def construct_body(p, resolution=DEFAULT_RESOLUTION, quad_nodes=QUAD_NODES, amplitude=1.0,
                   sub_resolution=SUB_RESOLUTION):
    """Build K for the bump ``p`` (``amplitude`` scales f_eps; 1 is the counterexample).

    The sample grid has its pole at x0 and ``resolution`` polar rings per
    cap-sized segment, i.e. about 3*resolution/eps rings per pi of angle.
    """
    if resolution < 4:
        raise ConfigError(f"construct_body: resolution must be >= 4, got {resolution}")
    n = p.n
    rho = functools.partial(_bump_radial, p=p, cn=c_n(n), amplitude=float(amplitude),
                            quad_nodes=int(quad_nodes))
    grid = sphere_grid(n, resolution, pole=p.x0, feature_angle=p.cap, sub_resolution=sub_resolution)
    return _finish(n, p, rho, grid, resolution, float(amplitude), p.x0, p.cap)


def ball_body(n, resolution=DEFAULT_RESOLUTION, sub_resolution=SUB_RESOLUTION):
    """The eps -> 0 limit: the Euclidean ball of radius c_n(n)."""
    if resolution < 4:
        raise ConfigError(f"ball_body: resolution must be >= 4, got {resolution}")
    pole = np.eye(n)[0]
    rho = functools.partial(_ball_radial, cn=c_n(n))
    grid = sphere_grid(n, resolution, pole=pole, feature_angle=np.pi / 4, sub_resolution=sub_resolution)
    return _finish(n, None, rho, grid, resolution, 0.0, pole, np.pi / 4)


def make_body(n, eps, x0=None, resolution=DEFAULT_RESOLUTION, **kw):
    """Body for ``eps`` in [0, 1); eps = 0 gives the ball."""
    if eps == 0:
        return ball_body(n, resolution)
    x0 = np.eye(n)[0] if x0 is None else np.asarray(x0, dtype=float)
    return construct_body(BumpParams(n, x0, eps), resolution, **kw)


def minkowski_norm(b, x):
    """|x| / rho(x/|x|); zero at the origin."""
    x = np.asarray(x, dtype=float)
    X = np.atleast_2d(x)
    r = np.linalg.norm(X, axis=1)
    out = np.zeros(len(X))
    nz = r > 0
    if np.any(nz):
        out[nz] = r[nz] / b.rho(X[nz] / r[nz, None])
    return float(out[0]) if x.ndim == 1 else out


def body_summary(b):
    return {
        "n": b.n,
        "eps": b.eps,
        "x0": None if b.params is None else [float(v) for v in b.params.x0],
        "resolution": b.resolution,
        "C_n": c_n(b.n),
        "rho_min": b.rho_min,
        "rho_max": b.rho_max,
        "grid_hash": b.grid.digest(),
    }


def write_body_csv(b, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"x{i + 1}" for i in range(b.n)] + ["rho"])
        for x, r in zip(b.grid.nodes, b.sampled.values):
            w.writerow([format(float(v), ".17g") for v in x] + [format(float(r), ".17g")])
