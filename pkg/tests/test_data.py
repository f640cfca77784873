import numpy as np
import pytest
from hypothesis import given, strategies as st

from h2sched.data import (
    DataError,
    read_market_csv,
    read_scenarios_csv,
    synthetic_market,
    write_market_csv,
    write_scenarios_csv,
)
from h2sched.model import MarketSeries


def _write(path, text):
    path.write_text(text)
    return path


def test_market_roundtrip(tmp_path):
    m = synthetic_market(48, seed=5)
    write_market_csv(m, tmp_path / "m.csv")
    back = read_market_csv(tmp_path / "m.csv")
    assert np.array_equal(back.lam, m.lam)
    assert np.allclose(back.wind, m.wind, rtol=0, atol=1e-15)


def test_market_rows_sorted_and_scaled(tmp_path):
    p = _write(tmp_path / "m.csv", "# note\nhour,price_eur_mwh,wind_cf\n1,20,0.5\n0,-3.5,1.0\n")
    m = read_market_csv(p, wind_capacity=4.0)
    assert m.lam.tolist() == [-3.5, 20.0]
    assert m.wind.tolist() == [4.0, 2.0]


@pytest.mark.parametrize(
    "body,match",
    [
        ("hour,price,wind\n0,1,0.5\n", "header"),
        ("hour,price_eur_mwh,wind_cf\n0,1\n", ":2: expected 3 fields"),
        ("hour,price_eur_mwh,wind_cf\n0,abc,0.5\n", ":2:"),
        ("hour,price_eur_mwh,wind_cf\n0,1,1.5\n", "outside"),
        ("hour,price_eur_mwh,wind_cf\n0,1,0.5\n0,2,0.5\n", "already given on line 2"),
        ("hour,price_eur_mwh,wind_cf\n0,1,0.5\n2,2,0.5\n", "consecutive"),
        ("hour,price_eur_mwh,wind_cf\n0,nan,0.5\n", "non-finite"),
        ("hour,price_eur_mwh,wind_cf\n", "no data"),
        ("", "empty"),
    ],
)
def test_market_errors(tmp_path, body, match):
    with pytest.raises(DataError, match=match):
        read_market_csv(_write(tmp_path / "m.csv", body))


def test_scenario_roundtrip(tmp_path):
    wind = np.arange(12, dtype=float).reshape(4, 3) / 7
    pi = np.array([0.2, 0.3, 0.5])
    write_scenarios_csv(wind, tmp_path / "s.csv", pi, tmp_path / "p.csv")
    w, p = read_scenarios_csv(tmp_path / "s.csv", tmp_path / "p.csv")
    assert np.array_equal(w, wind)
    assert np.allclose(p, pi)
    w, p = read_scenarios_csv(tmp_path / "s.csv")
    assert np.allclose(p, 1 / 3)


@pytest.mark.parametrize(
    "body,match",
    [
        ("hour,scenario,wind_mw\n0,0,1\n0,0,2\n", "duplicate"),
        ("hour,scenario,wind_mw\n0,0,1\n0,1,2\n1,0,1\n", "every hour"),
        ("hour,scenario,wind_mw\n0,0,-1\n", "negative"),
    ],
)
def test_scenario_errors(tmp_path, body, match):
    with pytest.raises(DataError, match=match):
        read_scenarios_csv(_write(tmp_path / "s.csv", body))


def test_probability_errors(tmp_path):
    s = _write(tmp_path / "s.csv", "hour,scenario,wind_mw\n0,0,1\n0,1,2\n")
    with pytest.raises(DataError, match="sum to 1"):
        read_scenarios_csv(s, _write(tmp_path / "p.csv", "scenario,probability\n0,0.5\n1,0.6\n"))
    with pytest.raises(DataError, match="do not match"):
        read_scenarios_csv(s, _write(tmp_path / "q.csv", "scenario,probability\n0,1.0\n"))


@given(st.integers(1, 200), st.integers(0, 2**31))
def test_synthetic_market_seeded(hours, seed):
    a = synthetic_market(hours, seed)
    b = synthetic_market(hours, seed)
    assert isinstance(a, MarketSeries) and a.T == hours
    assert np.array_equal(a.lam, b.lam) and np.array_equal(a.wind, b.wind)
    assert np.all((a.wind >= 0) & (a.wind <= 2.0))


def test_synthetic_year_has_some_negative_prices():
    m = synthetic_market(8760, seed=0)
    share = float(np.mean(m.lam <= 0))
    assert 0.001 < share < 0.05
