import numpy as np
import pytest

import neemo


def test_exact_emd_of_two_diracs():
    plan = neemo.exact_emd([1.0], [[0.0, 0.0]], [1.0], [[0.6, 0.8]])
    assert plan.cost == pytest.approx(1.0, abs=1e-12)
    assert plan.gamma.shape == (1, 1)


def test_exact_matches_1d_and_sinkhorn():
    rng = np.random.default_rng(0)
    a, b = rng.uniform(0.1, 1, 7), rng.uniform(0.1, 1, 5)
    x, y = rng.uniform(size=7), rng.uniform(size=5)
    exact = neemo.exact_emd(a, x[:, None], b, y[:, None]).cost
    assert neemo.emd_1d(a, x, b, y) == pytest.approx(exact, abs=1e-12)
    sk = neemo.sinkhorn_emd(a, x[:, None], b, y[:, None], epsilon=1e-3)
    assert sk["value"] >= exact - 1e-9
    assert sk["value"] == pytest.approx(exact, rel=1e-2)


def test_estimate_is_a_lower_bound():
    rng = np.random.default_rng(1)
    x, y = rng.uniform(size=(6, 2)), rng.uniform(size=(4, 2))
    a, b = np.full(6, 1 / 6), np.full(4, 1 / 4)
    cfg = neemo.FitConfig()
    cfg.estimate_steps = 300
    est = neemo.estimate_emd(a, x, b, y, cfg)
    exact = neemo.exact_emd(a, x, b, y).cost
    assert max(est["history"]) <= exact + 1e-6
    assert est["emd"] > 0.5 * exact


def test_network_is_one_lipschitz():
    arch = neemo.Architecture()
    arch.hidden = [16, 16]
    net = neemo.LipschitzMLP.random(arch, 3)
    x = np.random.default_rng(2).uniform(-1, 1, size=(200, 2))
    f = net(x)
    d = np.linalg.norm(x[:, None] - x[None], axis=-1)
    df = np.abs(f[:, None] - f[None])
    assert np.all(df <= d + 1e-12)


def test_shape_sampling_and_json():
    spec = neemo.ShapeSpec.circle_set([(0.0, 0.0, 1.0)], samples=4)
    w, p = spec.sample()
    np.testing.assert_allclose(w, 0.25)
    np.testing.assert_allclose(p, [[1, 0], [0, 1], [-1, 0], [0, -1]], atol=1e-15)
    back = neemo.ShapeSpec.from_json(spec.to_json())
    assert back.theta == spec.theta


def test_fit_moves_circle_toward_event():
    event = neemo.gen_circle_event([(0.5, 0.5, 0.2)], 60, 0.0, 1)
    init = neemo.ShapeSpec.circle_set([(0.56, 0.46, 0.2)], samples=32)
    cfg = neemo.FitConfig()
    cfg.arch.hidden = [32, 32]
    cfg.outer_steps = 40
    cfg.warmup_inner_steps = 300
    cfg.refit_inner_steps = 200
    trace = neemo.fit(event, init, cfg)
    assert len(trace.records) == 40
    before = np.hypot(0.06, 0.04)
    after = np.hypot(trace.final_theta[0] - 0.5, trace.final_theta[1] - 0.5)
    assert after < before
    heat = neemo.potential_heatmap(trace.final_net, neemo.GridSpec(), trace.origin)
    assert heat.shape == (64, 64)


def test_events_round_trip(tmp_path):
    ev = neemo.gen_subjet_event(n_centers=3, seed=4)
    assert len(ev) == 30
    path = tmp_path / "ev.csv"
    ev.save(path)
    back = neemo.load_event(path)
    np.testing.assert_array_equal(back.positions, ev.positions)


def test_errors_map_to_exceptions(tmp_path):
    with pytest.raises(neemo.InputError):
        neemo.exact_emd([-1.0], [[0.0, 0.0]], [1.0], [[1.0, 0.0]])
    bad = tmp_path / "bad.csv"
    bad.write_text("E,x1,x2\n1,0,oops\n")
    with pytest.raises(neemo.ParseError):
        neemo.load_event(bad)
    with pytest.raises(neemo.ConfigError):
        neemo.FitConfig.parse("bogus = 1\n")


def test_self_checks():
    assert "oracle" in neemo.check_names()
    assert neemo.run_check("oracle")["passed"]
