"""Empirical eps-scaling of the perturbation transform and its derivatives.

For small eps the perturbation is eps^{n-2} G(beta / eps) in the angle beta
from the equator of x0, so the sup, first and second derivative sups
should scale like eps^{n-2}, eps^{n-3} and eps^{n-4}.
"""
import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .body import QUAD_NODES, SUB_RESOLUTION, perturbation
from .bump import BumpParams
from .sphere import ConfigError, _householder_batch, spherical_laplacian, sphere_grid

DEFAULT_LADDER = (0.4, 0.3, 0.2, 0.15, 0.1)
REFIT_RESIDUAL = 0.05


@dataclass(frozen=True)
class ScalingConfig:
    resolution: int = 8
    quad_nodes: int = 32
    step_ratio: float = 1.0 / 20.0  # h = step_ratio * eps
    sub_resolution: int = SUB_RESOLUTION


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    intercept: float
    ci95: float
    rms_residual: float
    rungs: int

    def to_dict(self):
        return {"slope": self.slope, "intercept": self.intercept, "ci95": self.ci95,
                "rms_residual": self.rms_residual, "rungs": self.rungs}


@dataclass(frozen=True, eq=False)
class ScalingExperiment:
    n: int
    eps_ladder: tuple
    sup_values: np.ndarray
    grad_sup_values: np.ndarray
    hess_sup_values: np.ndarray
    fits: dict = field(default_factory=dict)

    @property
    def fitted_slopes(self):
        """(sup, grad / |ln eps|, hess) slopes, each from its preferred fit."""
        return tuple(self.preferred(k).slope for k in ("sup", "grad_log_corrected", "hess"))

    def preferred(self, key):
        """The 3-smallest-rung refit when the full fit is poor, else the full fit."""
        full = self.fits[key]["all"]
        return self.fits[key].get("small", full) if full.rms_residual > REFIT_RESIDUAL else full

    def to_dict(self):
        return {
            "n": self.n,
            "eps": list(self.eps_ladder),
            "sup": [float(v) for v in self.sup_values],
            "grad_sup": [float(v) for v in self.grad_sup_values],
            "hess_sup": [float(v) for v in self.hess_sup_values],
            "slopes": {k: {kk: f.to_dict() for kk, f in v.items()} | {"preferred": self.preferred(k).slope}
                       for k, v in self.fits.items()},
            "targets": {"sup": self.n - 2, "grad_log_corrected": self.n - 3,
                        "grad_uncorrected": self.n - 3, "hess": self.n - 4},
        }


def _grid(p, cfg):
    return sphere_grid(p.n, cfg.resolution, pole=p.x0, feature_angle=p.cap,
                       sub_resolution=cfg.sub_resolution)


def transform_sup(p, grid, resolution=QUAD_NODES):
    """Max over grid nodes of the perturbation; returns (value, argmax node)."""
    vals = perturbation(p, grid.nodes, resolution)
    i = int(np.argmax(vals))
    return float(vals[i]), grid.nodes[i]


def _geodesic(X, T, h):
    return math.cos(h) * X + math.sin(h) * T


def tangent_derivatives(p, X, h, resolution=QUAD_NODES, chunk=64):
    """Gradient and Hessian of the perturbation in the tangent frame of each node.

    Entries are central differences along great circles: axis directions
    for the gradient and diagonal, the pairs (t_i +- t_j)/sqrt(2) for the
    mixed terms.  Returns (m, n-1) gradients and (m, n-1, n-1) Hessians.
    """
    m, n = X.shape
    d = n - 1
    pairs = [(i, j) for i in range(d) for j in range(i + 1, d)]
    grads = np.empty((m, d))
    hess = np.empty((m, d, d))
    for s in range(0, m, chunk):
        Xc = X[s:s + chunk]
        b = len(Xc)
        T = np.transpose(_householder_batch(Xc)[:, :, 1:], (0, 2, 1))  # (b, d, n)
        dirs = [T]
        if pairs:
            I, J = np.array(pairs).T
            dirs += [(T[:, I] + T[:, J]) / math.sqrt(2.0), (T[:, I] - T[:, J]) / math.sqrt(2.0)]
        D = np.concatenate(dirs, axis=1)  # (b, k, n)
        Xb = np.broadcast_to(Xc[:, None, :], D.shape)
        pts = np.concatenate([_geodesic(Xb, D, h), _geodesic(Xb, D, -h)], axis=1).reshape(-1, n)
        vals = perturbation(p, pts, resolution).reshape(b, 2, -1)
        f0 = perturbation(p, Xc, resolution)[:, None]
        fp, fm = vals[:, 0], vals[:, 1]
        second = (fp - 2 * f0 + fm) / (h * h)
        grads[s:s + b] = (fp[:, :d] - fm[:, :d]) / (2 * h)
        H = np.zeros((b, d, d))
        H[:, np.arange(d), np.arange(d)] = second[:, :d]
        if pairs:
            mixed = 0.5 * (second[:, d:d + len(pairs)] - second[:, d + len(pairs):])
            H[:, I, J] = mixed
            H[:, J, I] = mixed
        hess[s:s + b] = H
    return grads, hess


def _check_step(p, h):
    h = p.eps / 20.0 if h is None else float(h)
    if not 0 < h <= p.eps / 20.0 + 1e-15:
        raise ConfigError(f"step {h} must satisfy 0 < h <= eps/20 = {p.eps / 20.0}")
    return h


def derivative_sups(p, grid, h=None, resolution=QUAD_NODES):
    """(gradient sup, node), (Hessian sup, node) over the grid.

    The sup over directions is taken exactly from the finite-difference
    gradient (its norm) or Hessian (its spectral norm), so it does not
    depend on how the tangent frame is oriented.
    """
    h = _check_step(p, h)
    X = grid.nodes
    # nodes whose neighbourhood misses the support carry no derivative
    proj = np.sqrt(np.clip(1.0 - (X @ p.x0) ** 2, 0.0, 1.0))
    live = np.flatnonzero(proj > np.cos(p.cap + 2 * h) - 1e-12)
    if len(live) == 0:
        return (0.0, X[0]), (0.0, X[0])
    G, H = tangent_derivatives(p, X[live], h, resolution)
    out = []
    for per_node in (np.linalg.norm(G, axis=1), np.max(np.abs(np.linalg.eigvalsh(H)), axis=1)):
        i = int(np.argmax(per_node))
        out.append((float(per_node[i]), X[live[i]]))
    return tuple(out)


def directional_derivative_sup(p, grid, order, h=None, resolution=QUAD_NODES):
    """Sup over nodes and unit tangent directions of the order-th derivative along great circles.

    Returns (value, node); see ``derivative_sups``.
    """
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    return derivative_sups(p, grid, h, resolution)[order - 1]


def laplacian_crosscheck(p, grid, h=None, resolution=QUAD_NODES):
    """Second-derivative sup and |Laplace-Beltrami| of the perturbation at the same node.

    Near the equator of x0 the perturbation varies along one direction only,
    so the two should nearly agree.
    """
    h = min(p.eps / 20.0, 1e-2) if h is None else h
    hess, x = directional_derivative_sup(p, grid, 2, h, resolution)
    lap = spherical_laplacian(lambda X: perturbation(p, X, resolution), x, max(h, 1e-5))
    return hess, abs(lap)


def fit_slope(eps, values):
    le, lv = np.log(eps), np.log(values)
    r = stats.linregress(le, lv)
    resid = lv - (r.intercept + r.slope * le)
    dof = len(eps) - 2
    ci = float(stats.t.ppf(0.975, dof) * r.stderr) if dof > 0 else float("nan")
    return SlopeFit(slope=float(r.slope), intercept=float(r.intercept), ci95=ci,
                    rms_residual=float(np.sqrt(np.mean(resid ** 2))), rungs=len(eps))


def _fits(eps, values):
    out = {"all": fit_slope(eps, values)}
    order = np.argsort(eps)[:3]
    out["small"] = fit_slope(eps[order], values[order])
    return out


def scaling_experiment(n, eps_ladder=DEFAULT_LADDER, cfg=None, x0=None):
    """Sup, gradient and Hessian sups over the ladder with log-log slope fits."""
    cfg = ScalingConfig() if cfg is None else cfg
    ladder = tuple(float(e) for e in eps_ladder)
    if len(ladder) < 4:
        raise ValueError("eps ladder needs at least 4 rungs")
    if any(b >= a for a, b in zip(ladder, ladder[1:])):
        raise ValueError("eps ladder must be strictly decreasing")
    x0 = np.eye(n)[0] if x0 is None else np.asarray(x0, dtype=float)
    sup, grad, hess = [], [], []
    for eps in ladder:
        p = BumpParams(n, x0, eps)
        grid = _grid(p, cfg)
        h = cfg.step_ratio * eps
        sup.append(transform_sup(p, grid, cfg.quad_nodes)[0])
        (g1, _), (g2, _) = derivative_sups(p, grid, h, cfg.quad_nodes)
        grad.append(g1)
        hess.append(g2)
    e = np.array(ladder)
    sup, grad, hess = np.array(sup), np.array(grad), np.array(hess)
    fits = {
        "sup": _fits(e, sup),
        "grad_log_corrected": _fits(e, grad / np.abs(np.log(e))),
        "grad_uncorrected": _fits(e, grad),
        "hess": _fits(e, hess),
    }
    return ScalingExperiment(n=n, eps_ladder=ladder, sup_values=sup, grad_sup_values=grad,
                             hess_sup_values=hess, fits=fits)


def write_asymptotics_csv(exp, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["eps", "sup", "grad_sup", "hess_sup"])
        for row in zip(exp.eps_ladder, exp.sup_values, exp.grad_sup_values, exp.hess_sup_values):
            w.writerow([format(float(v), ".17g") for v in row])
