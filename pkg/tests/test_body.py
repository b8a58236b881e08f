import csv
import math

import numpy as np
import pytest
from scipy import integrate
from hypothesis import given, settings, strategies as st

from ibody.body import (BodyError, ball_body, body_summary, make_body, minkowski_norm,
                        perturbation, write_body_csv)
from ibody.bump import BumpParams, bump_eval
from ibody.numerics import c_n, sphere_area
from ibody.sphere import ConfigError, orthonormal_basis, random_rotation, random_unit

C5 = c_n(5)


def rotation_fixing(x0, rng):
    """Random rotation Q with Q x0 = x0."""
    B = orthonormal_basis(x0).basis  # (n-1, n)
    R = random_rotation(len(x0) - 1, rng)
    return np.outer(x0, x0) + B.T @ R @ B


def test_ball_radius(ball5, rng):
    X = random_unit(5, rng, 50)
    assert np.all(ball5.rho(X) == C5)
    assert np.all(ball5.sampled.values == C5)
    assert ball5.eps == 0.0


def test_pole_and_far_directions_untouched(body03, rng):
    x0 = body03.params.x0
    assert body03.radius(x0) == C5
    assert body03.radius(-x0) == C5
    # a subsphere through x has to come within the cap of x0 to feel the bump
    near_pole = math.cos(0.5) * x0 + math.sin(0.5) * orthonormal_basis(x0).basis[1]
    assert body03.radius(near_pole) == C5


def reduced_funk(p, x):
    """Funk transform of f_eps at x as a 1-D integral in the angle from proj(x0)."""
    n = p.n
    r = math.sqrt(max(0.0, 1 - float(x @ p.x0) ** 2))
    e = orthonormal_basis(p.x0).basis[0]

    def f(alpha):
        c = r * math.cos(alpha)
        y = c * p.x0 + math.sqrt(1 - c * c) * e
        return float(bump_eval(p, y)) * math.sin(alpha) ** (n - 3)

    a = p.cap
    pts = [a0 for a0 in (math.acos(min(1, math.cos(a) / r)), math.pi - math.acos(min(1, math.cos(a) / r)))]
    val, _ = integrate.quad(f, 0, math.pi, points=pts, limit=200, epsabs=1e-13)
    return sphere_area(n - 2) * val


def test_decomposition_against_adaptive_funk(body03):
    p = body03.params
    B = orthonormal_basis(p.x0).basis
    for t in (0.0, 0.05, 0.15, 0.25):
        x = math.sin(t) * p.x0 + math.cos(t) * B[2]
        exact = C5 - math.pi * reduced_funk(p, x)
        assert body03.radius(x) == pytest.approx(exact, abs=1e-10)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_axial_symmetry(body03, seed):
    rng = np.random.default_rng(seed)
    Q = rotation_fixing(body03.params.x0, rng)
    X = random_unit(5, rng, 8)
    assert np.allclose(body03.rho(X @ Q.T), body03.rho(X), rtol=0, atol=1e-10)


def test_rho_even_and_bounded(body03, rng):
    X = random_unit(5, rng, 200)
    r = body03.rho(X)
    assert np.allclose(r, body03.rho(-X), atol=1e-12)
    assert np.all(r <= C5 + 1e-12)
    assert body03.rho_min > 0
    assert body03.rho_max == pytest.approx(C5)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.floats(0.1, 10.0))
def test_minkowski_norm_homogeneous_even(body03, seed, lam):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(5)
    nx = minkowski_norm(body03, x)
    assert minkowski_norm(body03, lam * x) == pytest.approx(lam * nx, rel=1e-12)
    assert minkowski_norm(body03, -x) == pytest.approx(nx, rel=1e-12)
    assert minkowski_norm(body03, np.zeros(5)) == 0.0


def test_perturbation_peaks_at_equator():
    p = BumpParams(5, np.eye(5)[0], 0.3)
    B = orthonormal_basis(p.x0).basis
    t = np.linspace(0, math.pi / 2, 400)
    X = np.sin(t)[:, None] * p.x0 + np.cos(t)[:, None] * B[0]
    v = perturbation(p, X)
    assert t[np.argmax(v)] < 1e-9
    assert np.all(np.diff(v) <= 1e-12)
    assert np.all(v[t > p.cap + 1e-9] == 0)


def test_perturbation_scaling():
    eps = np.array([0.4, 0.3, 0.2, 0.15, 0.1])
    e1 = np.eye(5)[1]
    sups = [perturbation(BumpParams(5, np.eye(5)[0], e), e1) for e in eps]
    slope = np.polyfit(np.log(eps), np.log(sups), 1)[0]
    assert abs(slope - 3) < 0.1


def test_config_errors():
    with pytest.raises(ConfigError):
        make_body(5, 0.3, resolution=2)
    with pytest.raises(ConfigError):
        ball_body(5, resolution=3)
    with pytest.raises(BodyError):
        make_body(5, 0.9, resolution=4, amplitude=200.0)


def test_make_body_zero_is_ball():
    b = make_body(5, 0.0, resolution=4)
    assert b.params is None
    assert np.all(b.sampled.values == C5)


def test_summary_and_export(body03, tmp_path):
    s = body_summary(body03)
    assert s["n"] == 5 and s["eps"] == 0.3 and s["C_n"] == C5
    assert s["grid_hash"] == body03.grid.digest()
    path = tmp_path / "body.csv"
    write_body_csv(body03, path)
    with open(path) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["x1", "x2", "x3", "x4", "x5", "rho"]
    assert len(rows) == body03.grid.size + 1
    vals = np.array(rows[1:], dtype=float)
    assert np.array_equal(vals[:, :5], body03.grid.nodes)
    assert np.array_equal(vals[:, 5], body03.sampled.values)
