import math

import numpy as np
import pytest

from ghm.errors import InputError, NumericalError
from ghm.estimator import Dataset, FitOptions, ModelConfig
from ghm.inference import BootstrapConfig
from ghm.relu_nets import value_bound
from ghm.sim import (
    KINDS,
    SimDesign,
    ar1_errors,
    compute_metrics,
    demo_grid,
    eval_grid,
    forecast_metrics,
    metrics_from_files,
    read_records,
    rolling_forecast,
    run_study,
    simulate,
    true_f,
    true_theta,
    write_records,
    write_summary,
)
from ghm.sim.forecast import nearest_constant
from oracles import sample_autocorr

THETA_STAR = np.array([0.6, 0.8, 0.6, -0.8])


# --- design -----------------------------------------------------------------------

def test_true_f_examples():
    assert true_f(np.array([0.0, 0.0]), 2) == 1.0
    assert true_f(np.array([0.2, 0.0]), 2) == pytest.approx(2.0 + math.sin(0.4), abs=1e-15)
    assert true_f(np.zeros(4), 4) == 1.0
    x = np.array([[0.1, -0.3], [0.5, 0.2]])
    assert np.allclose(true_f(x), [true_f(x[0]), true_f(x[1])])
    with pytest.raises(InputError):
        true_f(np.zeros(3), 2)


def test_true_theta():
    th = true_theta(3)
    assert [b.tolist() for b in th.blocks] == [[0.6, 0.8], [0.6, -0.8], [0.6, 0.8]]
    for b in th.blocks:
        assert abs(np.linalg.norm(b) - 1) < 1e-15 and b[0] > 0
    with pytest.raises(InputError):
        true_theta(0)


def test_design_validation():
    for bad in (dict(T=49), dict(J=0), dict(rho_eps=1.0), dict(noise_sd=-1.0),
                dict(activation="tanh"), dict(L=0)):
        with pytest.raises(InputError):
            SimDesign(**bad)
    d = SimDesign(noise_sd=0.1, rho_eps=0.6)
    assert d.innovation_sd == pytest.approx(0.08)


def test_simulate_is_deterministic_and_in_range():
    design = SimDesign(T=200)
    a = simulate(design, np.random.default_rng(3))
    b = simulate(design, np.random.default_rng(3))
    assert np.array_equal(a.y, b.y) and np.array_equal(a.z, b.z)
    assert np.all(np.abs(a.z) <= 1 / 1.4)


def test_noise_free_response_equals_true_surface():
    design = SimDesign(T=100, noise_sd=0.0)
    data = simulate(design, np.random.default_rng(0))
    x = np.column_stack([data.z[:, :2] @ [0.6, 0.8], data.z[:, 2:] @ [0.6, -0.8]])
    assert np.allclose(data.y, true_f(x), atol=1e-14)


@pytest.mark.parametrize("rho,target", [(0.0, 0.0), (0.2, 0.2)])
def test_ar1_lag_one_autocorrelation(rho, target):
    e = ar1_errors(100_000, rho, 0.2 * math.sqrt(1 - rho**2), np.random.default_rng(11))
    tol = 0.05 if rho == 0.0 else 0.02
    assert abs(sample_autocorr(e, 1) - target) < tol
    assert abs(e.std() - 0.2) < 0.005


def test_eval_grid():
    g = eval_grid(0.9, 2, 2)
    assert np.allclose(g, [[-0.9, -0.9], [0.0, 0.0], [0.9, 0.9]])
    g20 = eval_grid(0.9, 3, 20)
    assert g20.shape == (21, 3) and g20[0, 0] == -0.9 and g20[-1, 0] == 0.9
    with pytest.raises(InputError):
        eval_grid(0.9, 2, 0)


# --- metrics ---------------------------------------------------------------------------

def fake_records(theta, fhat, lo=None, hi=None):
    J, d = theta.shape
    lo = np.full((J, d), np.nan) if lo is None else lo
    hi = np.full((J, d), np.nan) if hi is None else hi
    return {"ok": np.ones(J, dtype=int), "theta": theta, "fhat": fhat, "ci_lo": lo,
            "ci_hi": hi, "pci_lo": lo, "pci_hi": hi}


def test_metrics_vanish_at_truth():
    grid = eval_grid(0.9, 2, 4)
    f_star = true_f(grid)
    rec = fake_records(np.tile(THETA_STAR, (5, 1)), np.tile(f_star, (5, 1)))
    m = compute_metrics(rec, THETA_STAR, f_star, 2)
    assert m["rmse_theta"] == 0.0 and m["rmse_f"] == 0.0
    assert m["bias_theta"] == 0.0 and m["std_theta"] == 0.0
    assert math.isnan(m["cr_theta"])


def test_unbounded_intervals_cover_everything():
    J = 4
    theta = np.tile(THETA_STAR, (J, 1)) + 0.3
    rec = fake_records(theta, np.zeros((J, 3)), np.full((J, 4), -np.inf), np.full((J, 4), np.inf))
    m = compute_metrics(rec, THETA_STAR, np.zeros(3), 2)
    assert m["cr_theta"] == 1.0


def test_metric_formulas_against_hand_computation():
    theta = np.array([THETA_STAR + [0.1, 0, 0, 0], THETA_STAR - [0, 0.2, 0, 0]])
    fhat = np.array([[1.0, 2.0], [3.0, np.nan]])
    f_star = np.array([1.5, 2.0])
    lo = theta - 0.15
    hi = theta + 0.15
    m = compute_metrics(fake_records(theta, fhat, lo, hi), THETA_STAR, f_star, 2)
    assert m["rmse_theta"] == pytest.approx(math.sqrt((0.01 + 0.04) / 2))
    assert m["bias_theta"] == pytest.approx((0.1 + 0.2) / 2 / 2)
    assert m["rmse_f"] == pytest.approx(math.sqrt((0.25 + 0 + 2.25) / 3))
    assert m["f_missing"] == 1
    assert m["cr_theta"] == pytest.approx(7 / 8)


# --- Monte Carlo harness -------------------------------------------------------------------

@pytest.fixture(scope="module")
def small_study():
    design = SimDesign(T=200, J=3, seed=4)
    return run_study(design, FitOptions(n_starts=2, warn=False), BootstrapConfig(R=5))


def test_study_records_reproduce_summary(tmp_path, small_study):
    rec = tmp_path / "rec.csv"
    write_records(rec, small_study)
    again = metrics_from_files(rec, small_study.design)
    summary = small_study.summary()
    for key, value in again.items():
        if isinstance(value, float) and math.isnan(value):
            assert summary[key] is None
        else:
            assert summary[key] == value
    back = read_records(rec)
    assert np.array_equal(back["theta"], small_study.records["theta"])


def test_study_metrics_in_range(small_study):
    s = small_study
    assert s.n_ok == 3 and s.n_failed == 0
    assert 0.0 <= s.cr_theta <= 1.0
    for key in ("rmse_theta", "rmse_f", "bias_theta", "std_theta", "bias_f", "std_f"):
        assert getattr(s, key) >= 0.0


def test_study_is_deterministic_and_schedule_free(tmp_path):
    design = SimDesign(T=150, J=3, seed=8)
    opts = FitOptions(n_starts=2, warn=False)
    a = run_study(design, opts, workers=1)
    b = run_study(design, opts, workers=2)
    write_summary(tmp_path / "a.json", a)
    write_summary(tmp_path / "b.json", b)
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()


def test_noise_free_single_replication_recovers_theta():
    design = SimDesign(T=1000, J=1, noise_sd=0.0, rho_eps=0.0)
    rep = run_study(design, FitOptions(n_starts=4, warn=False))
    assert rep.rmse_theta < 0.05
    # approximation error of the sieve only
    assert rep.rmse_f < 0.5


def test_study_aborts_when_most_replications_fail(monkeypatch):
    import ghm.sim.study as study

    def broken(*args, **kwargs):
        raise NumericalError("forced")

    monkeypatch.setattr(study, "fit", broken)
    with pytest.raises(NumericalError):
        run_study(SimDesign(T=100, J=3))


# --- forecasting ---------------------------------------------------------------------------

def test_forecast_metric_examples():
    y = np.array([1.0, -2.0, 0.5, 3.0])
    assert forecast_metrics(y, y) == (0.0, 1.0)
    assert forecast_metrics(-y, y)[1] == 0.0
    rmse, cs = forecast_metrics(np.zeros(4), y)
    assert cs == 0.0 and rmse == pytest.approx(math.sqrt(np.mean(y**2)))
    with pytest.raises(InputError):
        forecast_metrics([], [])


def test_sign_agreement_for_white_noise_against_constant_forecast():
    rng = np.random.default_rng(5)
    y = rng.normal(0.3, 1.0, 20000)
    # a positive constant forecast agrees exactly with the positive outcomes
    _, cs = forecast_metrics(np.full(y.size, 0.3), y)
    assert cs == pytest.approx(np.mean(y > 0))
    assert abs(cs - 0.6179) < 0.015


def test_rolling_forecast_structure():
    design = SimDesign(T=160)
    data = simulate(design, np.random.default_rng(2))
    config = design.model_config()
    rep = rolling_forecast(data, config, window=140, step=5, lag=1,
                           opts=FitOptions(n_starts=1, maxfev=30, max_outer=1, warn=False))
    assert rep.rows.tolist() == list(range(141, 160))
    assert np.array_equal(rep.y, data.y[rep.rows])
    assert np.all(np.isfinite(rep.y_hat))
    assert set(np.unique(rep.flags)) <= {0, 1, 2}
    with pytest.raises(InputError):
        rolling_forecast(data, config, window=160)
    with pytest.raises(InputError):
        rolling_forecast(data, config, window=3)


def test_nearest_constant_fallback():
    design = SimDesign(T=300)
    data = simulate(design, np.random.default_rng(0))
    from ghm.estimator import fit

    res = fit(data, design.model_config(), FitOptions(n_starts=1, warn=False))
    far = np.array([[5.0, 5.0]])
    val = nearest_constant(res, far)
    part = res.config.partition()
    top = part.linear(np.array([[part.M - 1, part.M - 1]]))[0]
    if res.occupancy[top]:
        assert val[0] == res.coef[top, 0]


# --- demo grids ------------------------------------------------------------------------------

@pytest.mark.parametrize("kind", KINDS)
def test_demo_grids(kind):
    header, rows = demo_grid(kind, 3, n=11)
    assert header[-1] == "error" and rows.shape[1] == len(header)
    err = rows[:, -1]
    assert np.all(err >= -1e-12)
    if kind == "smoothed":
        assert np.max(err) == pytest.approx(3 / (16 * 16))
    else:
        # the monomial kinds run a three-input tree
        bound = value_bound(3, 3) if kind.startswith("monomial") else 2.0**-3
        assert np.all(err <= bound + 1e-12)


def test_demo_rejects_unknown_kind():
    with pytest.raises(InputError):
        demo_grid("nope", 3)
    with pytest.raises(InputError):
        demo_grid("product", 3, n=1)


def test_dataset_with_flat_block_layout_is_forecastable():
    rng = np.random.default_rng(1)
    z = rng.uniform(-0.7, 0.7, (120, 4))
    data = Dataset(z[:, 0] + z[:, 2], z, (2, 2))
    rep = rolling_forecast(data, ModelConfig((2, 2), vartheta=1), window=100, step=10,
                           opts=FitOptions(n_starts=1, warn=False))
    assert rep.rmse < 0.5
