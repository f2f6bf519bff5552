use chrono::{Datelike, NaiveDateTime, Timelike, Weekday};
use serde::{Deserialize, Serialize};

/// kg/m³
pub const AIR_DENSITY: f64 = 1.204;
/// J/(kg·K)
pub const AIR_CP: f64 = 1006.0;

/// Coefficients of the design-flow-rate infiltration model
/// `Q = V·F·(A + B·|ΔT| + C·wind + D·wind²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VentilationCoefficients {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl Default for VentilationCoefficients {
    /// BLAST defaults.
    fn default() -> Self {
        VentilationCoefficients {
            a: 0.606,
            b: 0.03636,
            c: 0.1177,
            d: 0.0,
        }
    }
}

impl VentilationCoefficients {
    /// Volumetric flow in m³/s.
    pub fn flow(&self, t_zone: f64, t_odb: f64, wind: f64, design_flow: f64, schedule: f64) -> f64 {
        design_flow * schedule * (self.a + self.b * (t_zone - t_odb).abs() + self.c * wind + self.d * wind * wind)
    }
}

/// Airflow with the default coefficients.
pub fn ventilation_flow(t_zone: f64, t_odb: f64, wind: f64, design_flow: f64, schedule: f64) -> f64 {
    VentilationCoefficients::default().flow(t_zone, t_odb, wind, design_flow, schedule)
}

/// Weekly heating setpoint pattern. Windows are `[start, end)` in hours.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SetpointSchedule {
    pub occupied: f64,
    pub unoccupied: f64,
    pub workday_windows: Vec<(u32, u32)>,
    /// Days heated over `long_day_window` instead of the workday windows.
    pub long_days: Vec<Weekday>,
    pub long_day_window: (u32, u32),
}

impl Default for SetpointSchedule {
    fn default() -> Self {
        SetpointSchedule {
            occupied: 20.0,
            unoccupied: 17.0,
            workday_windows: vec![(6, 9), (18, 23)],
            long_days: vec![Weekday::Wed, Weekday::Sat, Weekday::Sun],
            long_day_window: (7, 23),
        }
    }
}

impl SetpointSchedule {
    pub fn constant(value: f64) -> Self {
        SetpointSchedule {
            occupied: value,
            unoccupied: value,
            workday_windows: Vec::new(),
            long_days: Vec::new(),
            long_day_window: (0, 0),
        }
    }

    pub fn at(&self, t: NaiveDateTime) -> f64 {
        let hour = t.hour();
        let inside = |w: &(u32, u32)| hour >= w.0 && hour < w.1;
        let occupied = if self.long_days.contains(&t.weekday()) {
            inside(&self.long_day_window)
        } else {
            self.workday_windows.iter().any(inside)
        };
        if occupied {
            self.occupied
        } else {
            self.unoccupied
        }
    }
}

pub fn setpoint(t: NaiveDateTime, schedule: &SetpointSchedule) -> f64 {
    schedule.at(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn at(s: &str) -> NaiveDateTime {
        NaiveDateTime::parse_from_str(s, "%Y-%m-%d %H:%M").unwrap()
    }

    #[test]
    fn default_coefficients() {
        let c = VentilationCoefficients::default();
        assert_eq!((c.a, c.b, c.c, c.d), (0.606, 0.03636, 0.1177, 0.0));
    }

    #[test]
    fn still_air_flow_is_a_times_design() {
        assert!((ventilation_flow(20.0, 20.0, 0.0, 0.0694, 1.0) - 0.606 * 0.0694).abs() < 1e-15);
    }

    #[test]
    fn hand_evaluated_flow() {
        let q = ventilation_flow(20.0, 10.0, 2.0, 0.0694, 1.0);
        assert!((q - 0.0694 * (0.606 + 0.3636 + 0.2354)).abs() < 1e-12);
        assert!((q - 0.0836).abs() < 5e-5);
        assert_eq!(ventilation_flow(20.0, 10.0, 2.0, 0.0694, 0.0), 0.0);
    }

    #[test]
    fn weekly_pattern() {
        let s = SetpointSchedule::default();
        // 2001-01-01 is a Monday.
        assert_eq!(setpoint(at("2001-01-01 12:00"), &s), 17.0);
        assert_eq!(setpoint(at("2001-01-01 07:30"), &s), 20.0);
        assert_eq!(setpoint(at("2001-01-01 23:00"), &s), 17.0);
        assert_eq!(setpoint(at("2001-01-06 12:00"), &s), 20.0);
        assert_eq!(setpoint(at("2001-01-03 12:00"), &s), 20.0);
        assert_eq!(setpoint(at("2001-01-03 03:00"), &s), 17.0);
        assert_eq!(SetpointSchedule::constant(19.0).at(at("2001-01-03 12:00")), 19.0);
    }
}
