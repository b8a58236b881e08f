"""The even smooth bump supported on chordal eps-caps around +-x0."""
from dataclasses import dataclass

import numpy as np

from .numerics import cap_angle


@dataclass(frozen=True, eq=False)
class BumpParams:
    n: int
    x0: np.ndarray
    eps: float

    def __post_init__(self):
        x0 = np.asarray(self.x0, dtype=float)
        if self.n < 3:
            raise ValueError(f"dimension must be >= 3, got {self.n}")
        if x0.shape != (self.n,):
            raise ValueError(f"x0 must have shape ({self.n},)")
        if abs(np.linalg.norm(x0) - 1.0) > 1e-10:
            raise ValueError("x0 must be a unit vector")
        if not 0.0 < self.eps < 1.0:
            raise ValueError(f"eps must lie in (0, 1), got {self.eps}")
        object.__setattr__(self, "x0", x0 / np.linalg.norm(x0))

    @property
    def cap(self):
        """Geodesic radius of each support cap."""
        return cap_angle(self.eps)


def _one_cap(d2, eps):
    inside = d2 < eps * eps
    # clamp keeps exp() away from underflow traps; tiny values become exact zeros
    expo = np.maximum(-d2 / np.where(inside, eps * eps - d2, 1.0), -700.0)
    val = 2.0 * np.exp(expo)
    return np.where(inside & (val >= 1e-300), val, 0.0)


def bump_eval(p, x):
    """f_eps at the unit vector(s) x, using ambient chordal distances."""
    x = np.asarray(x, dtype=float)
    dm = np.sum((x - p.x0) ** 2, axis=-1)
    dp = np.sum((x + p.x0) ** 2, axis=-1)
    # caps are disjoint for eps < 1, so at most one term is non-zero
    out = _one_cap(dm, p.eps) + _one_cap(dp, p.eps)
    return float(out) if out.ndim == 0 else out


def bump_support(p, x):
    x = np.asarray(x, dtype=float)
    dm = np.sqrt(np.sum((x - p.x0) ** 2, axis=-1))
    dp = np.sqrt(np.sum((x + p.x0) ** 2, axis=-1))
    out = (dm < p.eps) | (dp < p.eps)
    return bool(out) if out.ndim == 0 else out


def cap_measure(n, eps):
    """Surface measure of one chordal eps-cap on S^{n-1} (1D quadrature)."""
    from scipy.integrate import quad
    from .numerics import sphere_area
    a = cap_angle(eps)
    val, _ = quad(lambda t: np.sin(t) ** (n - 2), 0.0, a)
    return sphere_area(n - 1) * val
