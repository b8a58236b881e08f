import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ibody.bump import BumpParams, bump_eval, bump_support, cap_measure
from ibody.sphere import integrate_grid, orthonormal_basis, random_unit, sphere_grid

X0 = np.eye(5)[0]


def point_at_chord(x0, d):
    """Unit vector at chordal distance d from x0."""
    t = 2 * math.asin(d / 2)
    v = orthonormal_basis(x0).basis[0]
    return math.cos(t) * x0 + math.sin(t) * v


def test_params_validation():
    with pytest.raises(ValueError):
        BumpParams(5, X0, 1.0)
    with pytest.raises(ValueError):
        BumpParams(5, X0, 0.0)
    with pytest.raises(ValueError):
        BumpParams(5, 2 * X0, 0.3)
    with pytest.raises(ValueError):
        BumpParams(5, np.eye(4)[0], 0.3)


def test_values_at_pole_and_half_radius():
    p = BumpParams(5, X0, 0.3)
    assert bump_eval(p, X0) == 2.0
    assert bump_eval(p, -X0) == 2.0
    x = point_at_chord(X0, 0.3 / math.sqrt(2))
    assert bump_eval(p, x) == pytest.approx(2 * math.exp(-1), rel=1e-12)


def test_boundary_decay():
    p = BumpParams(5, X0, 0.3)
    assert bump_eval(p, point_at_chord(X0, 0.3)) == 0.0
    assert not bump_support(p, point_at_chord(X0, 0.3))
    assert bump_eval(p, point_at_chord(X0, 0.3 * 0.9995)) < 1e-300
    assert bump_support(p, X0)
    assert not bump_support(p, np.eye(5)[1])


@settings(max_examples=50)
@given(st.integers(0, 2 ** 32 - 1), st.floats(0.05, 0.95))
def test_even_and_bounded(seed, eps):
    rng = np.random.default_rng(seed)
    p = BumpParams(5, random_unit(5, rng), eps)
    x = random_unit(5, rng, 100)
    v = bump_eval(p, x)
    assert np.array_equal(v, bump_eval(p, -x))
    assert np.all((v >= 0) & (v <= 2))
    assert np.array_equal(v > 0, bump_support(p, x) & (v > 0))


def test_grid_mass_scaling():
    eps = np.array([0.4, 0.3, 0.2, 0.15, 0.1])
    mass = []
    for e in eps:
        p = BumpParams(5, X0, e)
        g = sphere_grid(5, 8, pole=X0, feature_angle=p.cap)
        m = integrate_grid(bump_eval(p, g.nodes), g)
        assert 0 < m < 2 * 2 * cap_measure(5, e)
        mass.append(m)
    slope = np.polyfit(np.log(eps), np.log(mass), 1)[0]
    assert abs(slope - 4) <= 0.3


def test_great_circle_derivative_scaling():
    eps = np.array([0.4, 0.3, 0.2, 0.15, 0.1])
    v = orthonormal_basis(X0).basis[0]
    d1, d2 = [], []
    for e in eps:
        p = BumpParams(5, X0, e)
        t = np.linspace(-p.cap, p.cap, 4001)
        f = bump_eval(p, np.cos(t)[:, None] * X0 + np.sin(t)[:, None] * v)
        h = t[1] - t[0]
        d1.append(np.max(np.abs(np.gradient(f, h))))
        d2.append(np.max(np.abs(np.diff(f, 2) / h ** 2)))
    s1 = np.polyfit(np.log(eps), np.log(d1), 1)[0]
    s2 = np.polyfit(np.log(eps), np.log(d2), 1)[0]
    assert abs(s1 + 1) <= 0.4
    assert abs(s2 + 2) <= 0.4
