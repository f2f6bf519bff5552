mod common;

use std::f64::consts::PI;
use std::path::PathBuf;

use chrono::{Datelike, NaiveDate, NaiveDateTime, Timelike};
use common::{rng, simpson};
use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;
use reqvar_core::weather::*;

fn base() -> WeatherSeries {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/base_weather.csv");
    load_weather(&path, Site::default()).unwrap()
}

fn models(base: &WeatherSeries) -> Vec<VariableModel> {
    WeatherVariable::ALL
        .into_iter()
        .map(|v| fit_variable_model(base, v).unwrap())
        .collect()
}

fn hourly_t_out(values: Vec<f64>) -> WeatherSeries {
    let start = parse_time("2001-01-01T00:00:00").unwrap();
    let mut ws = WeatherSeries::constant(start, 3600, values.len(), [0.0, 70.0, 0.0, 0.0, 2.0, 180.0], Site::default());
    ws.t_out = values;
    ws
}

#[test]
fn ar1_coefficient_is_recovered() {
    let mut r = rng(8);
    for phi in [0.8, 0.5] {
        let mut x = 0.0;
        let values: Vec<f64> = (0..30 * 24)
            .map(|_| {
                x = phi * x + r.sample::<f64, _>(StandardNormal);
                x
            })
            .collect();
        let m = fit_variable_model(&hourly_t_out(values), WeatherVariable::TOut).unwrap();
        assert!((m.residual_ar1.phi - phi).abs() <= 0.1, "{} vs {phi}", m.residual_ar1.phi);
    }
}

#[test]
fn zero_amplitude_reproduces_the_trend() {
    let base = base();
    let models = models(&base);
    let ws = sample_weather(&models, &base, &[1, 2, 3, 4, 5, 6], 0.0).unwrap();
    for (m, var) in models.iter().zip(WeatherVariable::ALL) {
        let trend = m.trend_series(&base);
        let max = ws.values(var).iter().zip(&trend).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert_eq!(max, 0.0, "{var}");
    }
}

#[test]
fn sampling_is_deterministic_and_group_local() {
    let base = base();
    let models = models(&base);
    let a = sample_weather(&models, &base, &[7; 6], 1.0).unwrap();
    assert_eq!(a, sample_weather(&models, &base, &[7; 6], 1.0).unwrap());
    let mut seeds = [7; 6];
    seeds[2] = 8;
    let b = sample_weather(&models, &base, &seeds, 1.0).unwrap();
    for var in WeatherVariable::ALL {
        assert_eq!(a.values(var) == b.values(var), var != WeatherVariable::IDn, "{var}");
    }
    a.validate().unwrap();
}

/// Expected value of one generated step, by Simpson quadrature over the
/// standard-normal stationary marginal of the AR(1) driver.
fn expected_step(m: &VariableModel, trend: f64, base_value: f64) -> f64 {
    let (lo, hi) = m.bounds;
    let finish = |x: f64| {
        if m.variable.is_irradiance() && base_value <= 0.0 {
            0.0
        } else {
            x.clamp(lo, hi)
        }
    };
    let density = |z: f64| (-0.5 * z * z).exp() / (2.0 * PI).sqrt();
    simpson(|z| finish(trend + m.quantile_map.map(z)) * density(z), -8.0, 8.0, 400)
}

#[test]
fn sample_monthly_means_match_the_model_expectation() {
    let base = base();
    let models = models(&base);
    let month_of: Vec<u32> = (0..base.len()).map(|k| base.time_at(k).month()).collect();
    let months = [11, 12, 1, 2];
    let monthly = |v: &[f64]| -> Vec<f64> {
        months
            .iter()
            .map(|m| {
                let sel: Vec<f64> = v.iter().zip(&month_of).filter(|(_, mm)| *mm == m).map(|(x, _)| *x).collect();
                sel.iter().sum::<f64>() / sel.len() as f64
            })
            .collect()
    };
    let draws: Vec<WeatherSeries> = (0..200u64)
        .map(|i| sample_weather(&models, &base, &[1000 + i; 6], 1.0).unwrap())
        .collect();
    let t = base.elapsed_seconds();
    let (mut within, mut cells) = (0, 0);
    for (m, var) in models.iter().zip(WeatherVariable::ALL) {
        if var == WeatherVariable::WindDir {
            continue;
        }
        let expected: Vec<f64> = (0..base.len())
            .map(|k| expected_step(m, m.trend.evaluate(t[k]), base.values(var)[k]))
            .collect();
        let target = monthly(&expected);
        let per_draw: Vec<Vec<f64>> = draws.iter().map(|d| monthly(d.values(var))).collect();
        for (j, tgt) in target.iter().enumerate() {
            let xs: Vec<f64> = per_draw.iter().map(|row| row[j]).collect();
            let mean = xs.iter().sum::<f64>() / xs.len() as f64;
            let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt();
            let se = sd / (xs.len() as f64).sqrt();
            let z = (mean - tgt).abs() / se;
            assert!(z <= 4.0, "{var} month {}: {mean} vs {tgt} ({z:.1} se)", months[j]);
            cells += 1;
            if z <= 2.0 {
                within += 1;
            }
        }
    }
    assert!(within >= 18, "{within}/{cells} monthly means within 2 se");
}

#[test]
fn plan_has_pick_freeze_structure() {
    let plan = build_sample_plan(50, 77).unwrap();
    assert_eq!(plan.rows.len(), 350);
    for r in 0..plan.n {
        let a = &plan.rows[plan.row_index(Block::A, r)];
        assert_eq!(a.group_seeds, [plan.seeds_a[r]; 6]);
        for i in 0..6 {
            let c = &plan.rows[plan.row_index(Block::C(i), r)];
            for g in 0..6 {
                let expect = if g == i { plan.seeds_a[r] } else { plan.seeds_b[r] };
                assert_eq!(c.group_seeds[g], expect);
            }
        }
    }
    assert_eq!(plan, build_sample_plan(50, 77).unwrap());
    assert_ne!(plan.seeds_a, build_sample_plan(50, 78).unwrap().seeds_a);
    assert!(build_sample_plan(1, 77).is_err());
}

/// Solar position from the NOAA low-precision algorithm (Julian century form).
fn noaa_cos_zenith(t: NaiveDateTime, site: &Site) -> f64 {
    let utc = t - chrono::Duration::seconds((site.utc_offset * 3600.0) as i64);
    let epoch = NaiveDate::from_ymd_opt(2000, 1, 1).unwrap().and_hms_opt(12, 0, 0).unwrap();
    let jc = (utc - epoch).num_seconds() as f64 / 86400.0 / 36525.0;
    let l0 = (280.46646 + jc * (36000.76983 + jc * 0.0003032)).rem_euclid(360.0);
    let m = 357.52911 + jc * (35999.05029 - 0.0001537 * jc);
    let e = 0.016708634 - jc * (0.000042037 + 0.0000001267 * jc);
    let mr = m.to_radians();
    let c = mr.sin() * (1.914602 - jc * (0.004817 + 0.000014 * jc))
        + (2.0 * mr).sin() * (0.019993 - 0.000101 * jc)
        + (3.0 * mr).sin() * 0.000289;
    let true_long = l0 + c;
    let omega = 125.04 - 1934.136 * jc;
    let app_long = true_long - 0.00569 - 0.00478 * omega.to_radians().sin();
    let eps0 = 23.0 + (26.0 + (21.448 - jc * (46.815 + jc * (0.00059 - jc * 0.001813))) / 60.0) / 60.0;
    let eps = eps0 + 0.00256 * omega.to_radians().cos();
    let decl = (eps.to_radians().sin() * app_long.to_radians().sin()).asin();
    let y = (eps.to_radians() / 2.0).tan().powi(2);
    let l0r = l0.to_radians();
    let eot = 4.0
        * (y * (2.0 * l0r).sin() - 2.0 * e * mr.sin() + 4.0 * e * y * mr.sin() * (2.0 * l0r).cos()
            - 0.5 * y * y * (4.0 * l0r).sin()
            - 1.25 * e * e * (2.0 * mr).sin())
        .to_degrees();
    let minutes = utc.hour() as f64 * 60.0 + utc.minute() as f64 + utc.second() as f64 / 60.0;
    let true_solar = (minutes + eot + 4.0 * site.longitude).rem_euclid(1440.0);
    let hour_angle = (true_solar / 4.0 - 180.0).to_radians();
    let lat = site.latitude.to_radians();
    lat.sin() * decl.sin() + lat.cos() * decl.cos() * hour_angle.cos()
}

#[test]
fn zenith_matches_reference_algorithm() {
    let site = Site::default();
    let mut r = rng(4);
    let start = parse_time("2001-01-01T00:00:00").unwrap();
    for _ in 0..500 {
        let t = start + chrono::Duration::minutes(r.random_range(0..365 * 24 * 60));
        let ours = cos_zenith(t, &site);
        let oracle = noaa_cos_zenith(t, &site);
        assert!((ours - oracle).abs() < 0.01, "{t}: {ours} vs {oracle}");
    }
    // Equinox solar noon at 46.2° N.
    let noon = parse_time("2001-03-20T12:00:00").unwrap() + chrono::Duration::minutes(44);
    let cz = cos_zenith(noon, &site);
    assert!((cz - 46.2f64.to_radians().cos()).abs() < 0.01);
    let mut ws = WeatherSeries::constant(noon, 3600, 1, [5.0, 50.0, 400.0, 100.0, 1.0, 0.0], site);
    ws.i_dn[0] = 400.0;
    assert!((global_horizontal(&ws)[0] - (400.0 * cz + 100.0)).abs() < 1e-9);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn samples_respect_physical_bounds(seeds in prop::array::uniform6(any::<u64>()), amplitude in 0.0f64..3.0) {
        let base = base();
        let models = models(&base);
        let ws = sample_weather(&models, &base, &seeds, amplitude).unwrap();
        prop_assert!(ws.validate().is_ok());
        prop_assert!(ws.wind_dir.iter().all(|d| (0.0..360.0).contains(d)));
    }

    #[test]
    fn quantile_map_preserves_rank_order(zs in prop::collection::vec(-6.0f64..6.0, 2..200), var in 0usize..5) {
        let base = base();
        let m = fit_variable_model(&base, WeatherVariable::ALL[var]).unwrap();
        let mut sorted = zs.clone();
        sorted.sort_by(f64::total_cmp);
        let mapped: Vec<f64> = sorted.iter().map(|z| m.quantile_map.map(*z)).collect();
        prop_assert!(mapped.windows(2).all(|w| w[0] <= w[1]));
    }
}

#[test]
fn pure_sinusoid_has_no_residual() {
    let ws = hourly_t_out((0..30 * 24).map(|k| 5.0 + 3.0 * (2.0 * PI * k as f64 / 24.0).sin()).collect());
    let m = fit_variable_model(&ws, WeatherVariable::TOut).unwrap();
    assert!((m.trend.amplitude(86400.0).unwrap() - 3.0).abs() < 1e-6);
    assert!(m.residual_ar1.sigma < 1e-6);
}
