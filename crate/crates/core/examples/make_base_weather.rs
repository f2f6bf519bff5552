//! Writes the bundled synthetic base-weather file.
//!
//! The series is a deterministic Geneva-like winter (2000-11-01 to
//! 2001-03-01, hourly): seasonal and daily temperature cycles, multi-day
//! cloudiness and pressure-system persistence, clear-sky beam and diffuse
//! irradiance, and a gusty wind with a prevailing south-west direction.
//!
//! ```text
//! cargo run -p reqvar-core --example make_base_weather -- data/base_weather.csv
//! ```

use std::f64::consts::PI;
use std::path::PathBuf;

use chrono::Duration;
use rand::Rng;
use rand_distr::StandardNormal;
use reqvar_core::seeds::rng_for;
use reqvar_core::weather::{cos_zenith, parse_time, Site, WeatherSeries};

fn main() {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("data/base_weather.csv"));
    let site = Site::default();
    let start = parse_time("2000-11-01T00:00:00").unwrap();
    let end = parse_time("2001-03-01T00:00:00").unwrap();
    let n = ((end - start).num_hours() + 1) as usize;
    let mut ws = WeatherSeries::constant(start, 3600, n, [0.0, 80.0, 0.0, 0.0, 0.0, 0.0], site);

    let mut rng = rng_for("base-weather", &[2001]);
    let mut gauss = || -> f64 { rng.sample(StandardNormal) };

    // Slow weather-regime states, hourly AR(1).
    let mut synoptic = 0.0; // K
    let mut cloud = 0.0; // latent cloudiness
    let mut gust = 0.0;
    let mut veer = 0.0;
    for k in 0..n {
        let t = start + Duration::hours(k as i64);
        let day = k as f64 / 24.0;
        let hour = (k % 24) as f64;

        synoptic = 0.985 * synoptic + 0.55 * gauss();
        cloud = 0.97 * cloud + 0.245 * gauss();
        gust = 0.9 * gust + 0.436 * gauss();
        veer = 0.95 * veer + 0.31 * gauss();

        let overcast = 1.0 / (1.0 + (-(cloud + 0.6) * 2.0).exp());
        let seasonal = 1.0 + 3.0 * (1.0 - (2.0 * PI * (day - 75.0) / 240.0).cos());
        let daily_amp = 4.0 * (1.0 - 0.7 * overcast);
        let diurnal = daily_amp * (2.0 * PI * (hour - 15.0) / 24.0).cos() * 0.5;
        ws.t_out[k] = seasonal + synoptic + diurnal;

        ws.rh[k] = (78.0 + 12.0 * overcast - 1.5 * diurnal - 0.8 * synoptic + 3.0 * gauss()).clamp(35.0, 100.0);

        let cz = cos_zenith(t, &site);
        if cz > 0.0 {
            let air_mass = 1.0 / cz.max(0.065);
            let clear_beam = 1050.0 * (-0.2 * air_mass).exp();
            ws.i_dn[k] = (clear_beam * (1.0 - overcast).powf(1.5)).max(0.0);
            let clear_diffuse = 120.0 * cz.powf(0.8);
            ws.i_dh[k] = (clear_diffuse * (1.0 + 1.4 * overcast * (1.0 - overcast) * 2.0)).max(0.0);
        }

        let speed = 2.4 * (0.35 * gust - 0.25 * synoptic.min(0.0) / 3.0).exp();
        ws.wind_speed[k] = (speed * (1.0 + 0.15 * (2.0 * PI * (hour - 14.0) / 24.0).cos())).clamp(0.0, 25.0);
        let prevailing = if synoptic > 0.0 { 45.0 } else { 225.0 };
        ws.wind_dir[k] = (prevailing + 40.0 * veer).rem_euclid(360.0);
    }
    for v in ws.t_out.iter_mut().chain(ws.rh.iter_mut()).chain(ws.i_dn.iter_mut()).chain(ws.i_dh.iter_mut()) {
        *v = (*v * 1e4).round() / 1e4;
    }
    for v in ws.wind_speed.iter_mut().chain(ws.wind_dir.iter_mut()) {
        *v = (*v * 1e4).round() / 1e4;
        if *v >= 360.0 {
            *v = 0.0;
        }
    }
    ws.validate().expect("generated weather is valid");
    ws.save(&out).expect("write weather file");
    eprintln!("wrote {} rows to {}", n, out.display());
}
