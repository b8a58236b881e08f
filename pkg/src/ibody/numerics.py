"""Special functions and closed-form constants on spheres."""
import math


def gamma(x):
    """Euler Gamma function for positive real arguments."""
    x = float(x)
    if not x > 0.0 or not math.isfinite(x):
        raise ValueError(f"gamma: argument must be positive and finite, got {x}")
    return math.gamma(x)


def sphere_area(d):
    """Surface measure of the unit sphere S^{d-1} in R^d."""
    d = int(d)
    if d < 1:
        raise ValueError(f"sphere_area: need d >= 1, got {d}")
    return 2.0 * math.pi ** (d / 2.0) / gamma(d / 2.0)


def c_n(n):
    """Radius of the unperturbed body: 2 pi^{(n+1)/2} / Gamma((n-1)/2)."""
    n = int(n)
    if n < 2:
        raise ValueError(f"c_n: need n >= 2, got {n}")
    return 2.0 * math.pi ** ((n + 1) / 2.0) / gamma((n - 1) / 2.0)


def sin_power_integral(m):
    """Integral of sin(phi)^m over [0, pi] by the Wallis recurrence."""
    m = int(m)
    if m < 0:
        raise ValueError(f"sin_power_integral: need m >= 0, got {m}")
    # I_m = (m-1)/m * I_{m-2}, I_0 = pi, I_1 = 2
    val = math.pi if m % 2 == 0 else 2.0
    for k in range(2 + m % 2, m + 1, 2):
        val *= (k - 1) / k
    return val


def cap_angle(eps):
    """Geodesic radius of the chordal ball {|x - x0| < eps} on the unit sphere."""
    return 2.0 * math.asin(min(eps, 2.0) / 2.0)
