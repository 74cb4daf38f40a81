import numpy as np
import pytest

from riskcfa.forecast import (FAN, TRUTH, ExogenousSeries, ForecastModel, IngestionError, evolve_forecast,
                              load_series, sample_fan, stream, synthesize_series, truth_path, write_series)


def test_zero_variance_is_identity():
    rng = stream(0, FAN)
    assert evolve_forecast(37.5, ForecastModel(0.0), rng) == 37.5
    fan = sample_fan(12.0, 4, 3, ForecastModel(0.0), rng)
    assert np.all(fan.paths == 12.0) and np.all(fan.point_forecast == 12.0)
    assert np.all(truth_path(ForecastModel(0.0), 9.0, 6, rng) == 9.0)


def test_zero_is_absorbing():
    assert evolve_forecast(0.0, ForecastModel(0.5), stream(1, FAN)) == 0.0


def test_martingale_mean():
    n = 100_000
    fan = sample_fan(100.0, 1, n, ForecastModel(0.1), stream(2, FAN))
    assert abs(fan.paths[:, 0].mean() - 100.0) < 3 * 10.0 / np.sqrt(n)


def test_fan_variance_grows_with_lead():
    fan = sample_fan(100.0, 5, 10_000, ForecastModel(0.1), stream(3, FAN))
    v = fan.paths.var(axis=0)
    assert v[4] > v[0]
    assert len(fan) == 10_000 and fan.horizon == 5


def test_single_path_fan():
    fan = sample_fan(5.0, 3, 1, ForecastModel(0.2), stream(4, FAN))
    assert fan.paths.shape == (1, 3)


def test_truth_path_properties():
    m = ForecastModel(0.3)
    a = truth_path(m, 50.0, 20, stream(7, TRUTH, 0))
    b = truth_path(m, 50.0, 20, stream(7, TRUTH, 0))
    assert np.array_equal(a, b)
    assert a[0] == 50.0 and np.all(a >= 0)
    ends = np.array([truth_path(ForecastModel(0.1), 100.0, 10, stream(8, TRUTH, i))[-1] for i in range(10_000)])
    se = ends.std() / np.sqrt(ends.size)
    assert abs(ends.mean() - 100.0) < 4 * se


def test_clamp_max():
    fan = sample_fan(90.0, 10, 200, ForecastModel(0.5, clamp_max=100.0), stream(9, FAN))
    assert fan.paths.max() <= 100.0 and fan.paths.min() >= 0.0


def test_streams_are_independent_by_key():
    a = stream(1, FAN, 0, 0).standard_normal(4)
    b = stream(1, FAN, 0, 1).standard_normal(4)
    c = stream(1, TRUTH, 0, 0).standard_normal(4)
    assert not np.array_equal(a, b) and not np.array_equal(a, c)


def test_series_round_trip(tmp_path):
    s = ExogenousSeries(np.array([1.0, 2.5, 3.0]), np.array([40.0, 41.0, 42.5]), 2.0)
    path = tmp_path / "s.csv"
    write_series(s, path)
    back = load_series(path, 2.0)
    assert len(back) == 3
    assert np.array_equal(back.demand, s.demand) and np.array_equal(back.hydrogen_price, s.hydrogen_price)


@pytest.mark.parametrize("body, line", [
    ("0,1,2\n1,-3,2\n", 3),
    ("0,1,2\n1,x,2\n", 3),
    ("0,1,2\n2,1,2\n", 3),
    ("0,1\n", 2),
])
def test_series_errors_name_the_line(tmp_path, body, line):
    path = tmp_path / "bad.csv"
    path.write_text("step,demand_mwh,h2_price_per_mwh\n" + body)
    with pytest.raises(IngestionError, match=f"bad.csv:{line}"):
        load_series(path, 1.0)


def test_series_missing_file_and_header(tmp_path):
    with pytest.raises(IngestionError, match="not found"):
        load_series(tmp_path / "nope.csv", 1.0)
    path = tmp_path / "h.csv"
    path.write_text("t,d,p\n0,1,2\n")
    with pytest.raises(IngestionError, match="header"):
        load_series(path, 1.0)


def test_synthetic_peak():
    s = synthesize_series(1913.0, 365, seed=4)
    assert abs(s.demand.max() - 1913.0) <= 1e-9
    assert len(s) == 365 and np.all(s.demand > 0) and np.all(s.hydrogen_price > 0)
    assert np.array_equal(s.demand, synthesize_series(1913.0, 365, seed=4).demand)
