import json

import numpy as np
import pytest

from admmlocus.bounds import bound_spectrum, build_spectral_model, mu_joint
from admmlocus.engine import (
    AdmmConfig,
    recover_primal,
    run,
    state_from_z,
    step_dr,
    step_scaled,
    step_unscaled,
)
from admmlocus.exceptions import NonFinite, ValidationError
from admmlocus.lasso import gen_lasso
from admmlocus.problem import Quadratic, SplitProblem

from conftest import random_convex_problem, random_mixed_problem, random_quadratic_problem


def scalar_qq(a1=2.0, a2=1.0, c1=1.0, c2=-0.5, A1=1.0, A2=1.0, b=0.3, e=1.5):
    return SplitProblem(f1=Quadratic([[a1]], [c1]), f2=Quadratic([[a2]], [c2]),
                        A1=[[A1]], A2=[[A2]], b=[b], E=[[e]])


@pytest.mark.parametrize("kw", [dict(q=0), dict(max_iters=0), dict(tol_state=-1.0),
                                dict(q=float("nan"))])
def test_config_validation(kw):
    with pytest.raises(ValidationError):
        AdmmConfig(**kw)


def test_step_dr_q1_is_composition(rng):
    p = random_quadratic_problem(rng)
    z = rng.standard_normal(p.m)
    from admmlocus.engine import contexts
    c1, c2 = contexts(p)
    np.testing.assert_allclose(step_dr(p, AdmmConfig(q=1.0), z), c1.reflect(c2.reflect(z)),
                               atol=1e-14)


def test_fixed_point_unchanged(rng):
    p = random_quadratic_problem(rng, m=4)
    cfg = AdmmConfig(q=0.8, max_iters=5000, tol_state=1e-14)
    z = run(p, cfg).z
    np.testing.assert_allclose(step_dr(p, cfg, z), z, atol=1e-12)
    s = state_from_z(p, z)
    s2 = step_scaled(p, cfg, s)
    np.testing.assert_allclose(s2.x1, s.x1, atol=1e-12)
    np.testing.assert_allclose(s2.x2, s.x2, atol=1e-12)
    np.testing.assert_allclose(s2.lambda_tilde, s.lambda_tilde, atol=1e-12)


@pytest.mark.parametrize("q", [0.3, 0.5, 1.0, 1.6, -0.4])
def test_scaled_and_recursion_agree(rng, q):
    for _ in range(3):
        p = random_convex_problem(rng)
        cfg = AdmmConfig(q=q)
        z = rng.standard_normal(p.m)
        s = state_from_z(p, z)
        for _ in range(100):
            s = step_scaled(p, cfg, s)
            z = step_dr(p, cfg, z)
            assert np.max(np.abs(s.z - z)) <= 1e-12 * (1 + np.max(np.abs(z)))


def test_half_relaxation_is_plain_admm():
    inst = gen_lasso(30, 20, 5, seed=1)
    p = inst.problem
    s = t = state_from_z(p, np.zeros(p.m))
    cfg = AdmmConfig(q=0.5)
    for _ in range(100):
        s, t = step_scaled(p, cfg, s), step_unscaled(p, t)
        np.testing.assert_allclose(s.x1, t.x1, atol=1e-12)
        np.testing.assert_allclose(s.x2, t.x2, atol=1e-12)
        np.testing.assert_allclose(s.lambda_tilde, t.lambda_tilde, atol=1e-12)


def test_one_step_closed_form():
    # scalar quadratics: every update is affine and can be written out by hand
    a1, a2, c1, c2, A1, A2, b, e, q = 2.0, 1.0, 1.0, -0.5, 1.0, 1.0, 0.3, 1.5, 0.7
    p = scalar_qq(a1, a2, c1, c2, A1, A2, b, e)
    x2, lt = 0.4, -0.2
    s = state_from_z(p, [np.sqrt(e) * (lt + A2 * x2)])
    assert s.x2[0] == pytest.approx((c2 + A2 * e * (lt + A2 * x2)) / (a2 + A2 * A2 * e))
    x2, lt = s.x2[0], s.lambda_tilde[0]
    x1n = (c1 + A1 * e * (A2 * x2 + b - lt)) / (a1 + A1 * A1 * e)
    yn = 2 * q * A1 * x1n + (1 - 2 * q) * (A2 * x2 + b)
    x2n = (c2 + A2 * e * (yn - b + lt)) / (a2 + A2 * A2 * e)
    ltn = lt + yn - A2 * x2n - b
    out = step_scaled(p, AdmmConfig(q=q), s)
    assert out.x1[0] == pytest.approx(x1n, abs=1e-12)
    assert out.y[0] == pytest.approx(yn, abs=1e-12)
    assert out.x2[0] == pytest.approx(x2n, abs=1e-12)
    assert out.lambda_tilde[0] == pytest.approx(ltn, abs=1e-12)


def test_recover_primal_quadratic_closed_form():
    a1, a2, c1, c2, A1, A2, b, e = 2.0, 1.0, 1.0, -0.5, 1.0, 1.0, 0.3, 1.5
    p = scalar_qq(a1, a2, c1, c2, A1, A2, b, e)
    z = 0.9
    w = z / np.sqrt(e)
    x2 = (c2 + A2 * e * w) / (a2 + A2 * A2 * e)
    d2 = 2 * np.sqrt(e) * A2 * x2 - z + np.sqrt(e) * b
    x1 = (c1 + A1 * e * d2 / np.sqrt(e)) / (a1 + A1 * A1 * e)
    r1, r2 = recover_primal(p, [z])
    assert r1[0] == pytest.approx(x1, abs=1e-12)
    assert r2[0] == pytest.approx(x2, abs=1e-12)


def test_recover_primal_symmetric():
    f = Quadratic(np.diag([1.0, 2.0]), np.array([0.5, -1.0]))
    p = SplitProblem(f1=f, f2=f, A1=np.eye(2), A2=np.eye(2), b=np.zeros(2), E=np.eye(2))
    z = run(p, AdmmConfig(q=1.0, tol_state=1e-14, max_iters=5000)).z
    x1, x2 = recover_primal(p, z)
    np.testing.assert_allclose(x1, x2, atol=1e-12)
    np.testing.assert_allclose(x1, [0.5, -0.5], atol=1e-12)


def test_lasso_run_recovers_minimiser():
    inst = gen_lasso(40, 25, 6, eps=1.0, seed=2)
    p = inst.problem
    res = run(p, AdmmConfig(q=1.0, max_iters=20000, tol_state=1e-10))
    assert res.reason == "state_tol"
    np.testing.assert_allclose(res.x1, res.x2, atol=1e-8)
    # optimality of the Lasso: 0 in Q x - c + w * sign(x)
    x = res.x2
    g = p.f1.Q @ x - p.f1.c
    on = np.abs(x) > 1e-8
    np.testing.assert_allclose(g[on], -inst.w[on] * np.sign(x[on]), atol=1e-6)
    assert np.all(np.abs(g[~on]) <= inst.w[~on] + 1e-6)


def test_divergent_instance_raises():
    # f1 = -x^2/4 is non-convex but g1 = f1 + x^2/2 is convex; D1 has slope h(-1/2) = 3
    p = SplitProblem(f1=Quadratic([[-0.5]], [0.0]), f2=Quadratic([[0.0]], [0.0]),
                     A1=[[1.0]], A2=[[1.0]], b=[0.0], E=[[1.0]])
    with pytest.raises(NonFinite) as info:
        with np.errstate(over="ignore", invalid="ignore"):
            run(p, AdmmConfig(q=1.0, max_iters=5000), z0="random")
    assert info.value.iteration > 1


def test_history_and_json(rng):
    p = random_quadratic_problem(rng, m=3)
    res = run(p, AdmmConfig(q=0.9, max_iters=2000, record_history=True))
    assert len(res.history) == res.iterations
    assert all(r.state_delta >= 0 and r.constraint_residual >= 0 for r in res.history)
    d = json.loads(res.to_json())
    assert d["termination"] == "state_tol"
    assert set(d["history"][0]) == {"iteration", "state_delta", "constraint_residual", "objective"}


def test_primal_tolerance_stop(rng):
    p = random_quadratic_problem(rng, m=3)
    res = run(p, AdmmConfig(q=1.0, max_iters=2000, tol_state=0.0, tol_primal=1e-6))
    assert res.reason == "primal_tol"
    x1, x2 = recover_primal(p, res.z)
    assert np.linalg.norm(p.constraint_residual(x1, x2)) <= 1e-6


def test_max_iters_reason(rng):
    p = random_quadratic_problem(rng, m=3)
    res = run(p, AdmmConfig(q=1.0, max_iters=3, tol_state=0.0))
    assert res.reason == "max_iters" and res.iterations == 3 and not res.converged


def test_deterministic(rng):
    p = random_mixed_problem(rng, m=4)
    cfg = AdmmConfig(q=0.7, max_iters=200, seed=4)
    a, b = run(p, cfg, z0="random"), run(p, cfg, z0="random")
    assert a.to_json() == b.to_json()


def test_distance_to_limit_contracts(rng):
    for _ in range(5):
        p = random_mixed_problem(rng, m=4)
        q = 0.8
        mu = mu_joint(bound_spectrum(build_spectral_model(p)), q).value
        cfg = AdmmConfig(q=q, max_iters=300, tol_state=0.0)
        z_star = run(p, AdmmConfig(q=q, max_iters=50000, tol_state=1e-14)).z
        z = rng.standard_normal(p.m)
        for _ in range(60):
            zn = step_dr(p, cfg, z)
            d0 = np.linalg.norm(z - z_star)
            if d0 < 1e-9:
                break
            assert np.linalg.norm(zn - z_star) <= (mu + 1e-8) * d0
            z = zn
