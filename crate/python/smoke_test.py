"""Smoke test for the reqvar extension module.

Build it first with `pip install --no-build-isolation -e crates/python`.
"""

import math
import pathlib

import reqvar

DATA = pathlib.Path(__file__).resolve().parent.parent / "data"


def main():
    weather = reqvar.WeatherSeries.load(str(DATA / "base_weather.csv"))
    assert len(weather) > 0 and weather.step_s > 0
    t_out = weather.column("t_out")
    assert len(t_out) == len(weather)

    spec = reqvar.BuildingSpec.load(str(DATA / "case_study_building.toml"))
    assert reqvar.BuildingSpec.from_toml(spec.to_toml()).to_toml() == spec.to_toml()

    ds = reqvar.simulate(spec, weather, "2000-12-01T00:00:00", "2001-01-10T00:00:00")
    assert not ds.noisy and len(ds) > 0
    noisy = ds.with_noise(seed=3)
    assert noisy.noisy
    sub = noisy.subset("2000-12-20T00:00:00", 5.0)
    assert len(sub) == 5 * 144

    target = reqvar.compute_target(spec, t_out=2.0, setpoint=20.0, start="2001-01-01T00:00:00", days=10)
    r_star = target["r_eq_star"]
    assert r_star > 0 and target["r_squared"] > 0.9

    est = reqvar.fit(sub, n_restarts=2, seed=1)
    assert math.isfinite(est.log_likelihood)
    names = [name for name, _ in est.params]
    assert "r_o" in names and "r_i" in names
    req = est.req(5.0)
    assert math.isclose(req["r_eq"], est.r_eq)
    score = reqvar.interpretability(req["r_eq"], req["sigma"], r_star)
    assert 0.0 <= score <= 1.0

    acf = reqvar.residual_autocorrelation(est.residuals, 50)
    assert len(acf["acf"]) == 51 and acf["acf"][0] == 1.0

    verdict = reqvar.iso9869_convergence([(1.0, 0.010), (2.0, 0.0104), (3.0, 0.0105)])
    assert verdict["criterion_24h_met"]

    rows = reqvar.build_sample_plan(8, 5)
    assert len(rows) == 7 * 8 and rows[0] == [rows[0][0]] * 6

    s1, se = reqvar.first_order_group_index([float(k) for k in range(20)], [float(k) for k in range(20)])
    assert s1 == 1.0 and se >= 0.0

    try:
        reqvar.simulate(spec, weather, "not a date", "2001-01-10T00:00:00")
    except ValueError:
        pass
    else:
        raise AssertionError("bad timestamp accepted")

    print(f"ok: R*_eq={r_star:.5f} K/W, 5-day R_eq={req['r_eq']:.5f} +/- {req['sigma']:.5f}, I={score:.2f}")


if __name__ == "__main__":
    main()
