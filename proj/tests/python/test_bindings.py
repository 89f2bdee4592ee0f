import math

import numpy as np
import pytest

import lodgpe

SQUARE = """
[domain]
xmin = 0
xmax = 1
ymin = 0
ymax = 1
[potential]
kind = constant
value = 0
[model]
beta = 0
[flow]
tol_energy = 1e-13
tol_residual = 1e-11
initial_guess = constant
[study]
fine_h = 1/32
"""


def test_linear_ground_state():
    r = lodgpe.solve(SQUARE, ["solve.space=fine_fem"])
    assert r["converged"]
    assert abs(r["eigenvalue"] - 2 * math.pi**2) < 0.05 * 2 * math.pi**2
    assert r["eigenvalue"] > 2 * math.pi**2
    u, x, y = r["u"], r["x"], r["y"]
    assert u.shape == x.shape == y.shape == (33 * 33,)
    # Ground state has one sign and vanishes on the boundary.
    assert np.all(u >= -1e-14) or np.all(u <= 1e-14)
    edge = (x == 0) | (x == 1) | (y == 0) | (y == 1)
    assert np.all(u[edge] == 0.0)


def test_lod_at_fine_scale_equals_fem():
    fem = lodgpe.solve(SQUARE, ["solve.space=fine_fem"])
    lod = lodgpe.solve(SQUARE, ["solve.space=lod", "solve.H=1/32", "study.use_cache=false"])
    assert abs(lod["energy"] - fem["energy"]) < 1e-10


def test_nonlinear_energy_history_decreases():
    r = lodgpe.solve(SQUARE, ["model.beta=50", "solve.space=coarse_fem", "solve.H=1/8"])
    hist = np.array(r["energy_history"])
    assert r["converged"]
    assert np.all(np.diff(hist) <= 1e-12 * abs(hist[0]))


def test_small_study():
    cfg = SQUARE + "H = 1/4, 1/8\nbaseline_coarse_fem = true\nuse_cache = false\n"
    res = lodgpe.study(cfg, ["potential.kind=harmonic", "model.beta=10"])
    assert res["valid"]
    assert [row["H"] for row in res["rows"]] == [0.25, 0.125]
    assert res["rates"]["h1"] > res["baseline_rates"]["h1"]


def test_config_errors_raise_value_error():
    with pytest.raises(ValueError):
        lodgpe.solve(SQUARE, ["model.nope=1"])
    with pytest.raises(lodgpe.ConfigError):
        lodgpe.resolve_config("[bogus]\nx = 1\n")


def test_resolve_and_fit_rate():
    text = lodgpe.resolve_config(SQUARE, ["model.beta=3"])
    assert "beta = 3" in text
    assert lodgpe.resolve_config(text) == text
    assert lodgpe.fit_rate([1.0, 0.5, 0.25], [1.0, 0.125, 0.015625]) == pytest.approx(3.0)
    with pytest.raises(ValueError):
        lodgpe.fit_rate([1.0], [1.0])
