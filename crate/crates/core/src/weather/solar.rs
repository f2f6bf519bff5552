use std::f64::consts::PI;

use chrono::{Datelike, NaiveDateTime, Timelike};

use super::{Site, WeatherSeries};

/// Cosine of the solar zenith angle at local standard time `t`.
///
/// Declination and equation of time use Spencer's Fourier series; the hour
/// angle is taken from apparent solar time at the site longitude.
pub fn cos_zenith(t: NaiveDateTime, site: &Site) -> f64 {
    let day = t.ordinal() as f64;
    let gamma = 2.0 * PI * (day - 1.0) / 365.0;
    let declination = 0.006918 - 0.399912 * gamma.cos() + 0.070257 * gamma.sin()
        - 0.006758 * (2.0 * gamma).cos()
        + 0.000907 * (2.0 * gamma).sin()
        - 0.002697 * (3.0 * gamma).cos()
        + 0.00148 * (3.0 * gamma).sin();
    // minutes
    let equation_of_time = 229.18
        * (0.000075 + 0.001868 * gamma.cos()
            - 0.032077 * gamma.sin()
            - 0.014615 * (2.0 * gamma).cos()
            - 0.040849 * (2.0 * gamma).sin());
    let clock_hours = t.hour() as f64 + t.minute() as f64 / 60.0 + t.second() as f64 / 3600.0;
    let solar_hours =
        clock_hours + (4.0 * (site.longitude - 15.0 * site.utc_offset) + equation_of_time) / 60.0;
    let hour_angle = (15.0 * (solar_hours - 12.0)).to_radians();
    let lat = site.latitude.to_radians();
    lat.sin() * declination.sin() + lat.cos() * declination.cos() * hour_angle.cos()
}

/// Global horizontal irradiance `i_dn·max(0, cos θz) + i_dh` for every step.
pub fn global_horizontal(series: &WeatherSeries) -> Vec<f64> {
    (0..series.len())
        .map(|k| {
            let cz = cos_zenith(series.time_at(k), &series.site).max(0.0);
            (series.i_dn[k] * cz + series.i_dh[k]).max(0.0)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weather::series::parse_time;

    #[test]
    fn midnight_without_diffuse_is_dark() {
        let start = parse_time("2001-01-15T00:00:00").unwrap();
        let ws = WeatherSeries::constant(start, 3600, 1, [0.0, 80.0, 500.0, 0.0, 1.0, 0.0], Site::default());
        assert!(cos_zenith(start, &ws.site) < 0.0);
        assert_eq!(global_horizontal(&ws), vec![0.0]);
    }

    #[test]
    fn diffuse_only_passes_through() {
        let start = parse_time("2001-01-15T00:00:00").unwrap();
        let ws = WeatherSeries::constant(start, 3600, 48, [0.0, 80.0, 0.0, 150.0, 1.0, 0.0], Site::default());
        assert!(global_horizontal(&ws).iter().all(|&g| g == 150.0));
    }

    #[test]
    fn equinox_solar_noon_matches_latitude() {
        // At the March equinox the declination is ~0, so cos θz at solar noon
        // equals cos(latitude). Scan the day for the highest sun.
        let site = Site {
            latitude: 46.2,
            longitude: 6.13,
            utc_offset: 1.0,
        };
        let day = parse_time("2001-03-21T00:00:00").unwrap();
        let best = (0..24 * 60)
            .map(|m| cos_zenith(day + chrono::Duration::minutes(m), &site))
            .fold(f64::MIN, f64::max);
        let expected = 46.2f64.to_radians().cos();
        assert!((best - expected).abs() < 0.01, "{best} vs {expected}");

        let noon = parse_time("2001-03-21T12:00:00").unwrap();
        let ws = WeatherSeries::constant(noon, 3600, 1, [0.0, 50.0, 800.0, 100.0, 0.0, 0.0], site);
        // Local 12:00 in Geneva is about 43 min before solar noon
        // (longitude offset -35.5 min, equation of time -7.5 min).
        let g = global_horizontal(&ws)[0];
        let oracle = 800.0 * expected * (43.0f64 / 60.0 * 15.0).to_radians().cos() + 100.0;
        assert!((g - oracle).abs() < 5.0, "{g} vs {oracle}");
    }
}
