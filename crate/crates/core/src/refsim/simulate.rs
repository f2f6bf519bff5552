use chrono::{Duration, NaiveDateTime, Timelike};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::dataset::{DatasetMeta, SimDataset};
use super::network::{BoundaryKind, NetworkModel};
use super::schedule::{AIR_CP, AIR_DENSITY};
use super::SimError;
use crate::weather::{cos_zenith, WeatherSeries, WeatherVariable};

/// Days simulated before the first recorded row.
pub const WARMUP_DAYS: i64 = 15;

/// Simulated period `[start, end)`, including the warm-up.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunWindow {
    pub start: NaiveDateTime,
    pub end: NaiveDateTime,
    pub step_s: u32,
}

impl RunWindow {
    pub fn steps(&self) -> usize {
        ((self.end - self.start).num_seconds() / self.step_s as i64).max(0) as usize
    }

    pub fn time(&self, k: usize) -> NaiveDateTime {
        self.start + Duration::seconds(k as i64 * self.step_s as i64)
    }
}

/// Step-averaged energy flows (W) over the recorded rows.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EnergyTrace {
    pub heating: Vec<f64>,
    pub solar: Vec<f64>,
    pub conduction_loss: Vec<f64>,
    pub window_loss: Vec<f64>,
    pub ventilation_loss: Vec<f64>,
    /// Rate of change of stored heat.
    pub storage: Vec<f64>,
}

impl EnergyTrace {
    /// Largest absolute imbalance `heating + solar - losses - storage`.
    pub fn max_imbalance(&self) -> f64 {
        (0..self.heating.len())
            .map(|k| {
                (self.heating[k] + self.solar[k]
                    - self.conduction_loss[k]
                    - self.window_loss[k]
                    - self.ventilation_loss[k]
                    - self.storage[k])
                    .abs()
            })
            .fold(0.0, f64::max)
    }
}

/// Dense solver for `(M0 + Σ_j d_j e_j e_jᵀ) x = b` with the diagonal
/// updates restricted to at most two fixed nodes.
struct Solver {
    minv: DMatrix<f64>,
    nodes: Vec<usize>,
}

impl Solver {
    fn new(m0: DMatrix<f64>, nodes: Vec<usize>) -> Option<Solver> {
        Some(Solver {
            minv: m0.try_inverse()?,
            nodes,
        })
    }

    fn solve(&self, b: &[f64], d: &[f64], x: &mut [f64]) {
        let n = b.len();
        for (i, xi) in x.iter_mut().enumerate() {
            let mut s = 0.0;
            for j in 0..n {
                s += self.minv[(i, j)] * b[j];
            }
            *xi = s;
        }
        if d.iter().all(|&v| v == 0.0) {
            return;
        }
        // Woodbury: x = x0 - W D (I + EᵀW D)⁻¹ Eᵀ x0, W = M0⁻¹ E.
        let w = |i: usize, j: usize| self.minv[(i, self.nodes[j])];
        let y: Vec<f64> = match self.nodes.len() {
            1 => {
                let s = 1.0 + w(self.nodes[0], 0) * d[0];
                vec![x[self.nodes[0]] / s]
            }
            _ => {
                let (p, q) = (self.nodes[0], self.nodes[1]);
                let s11 = 1.0 + w(p, 0) * d[0];
                let s12 = w(p, 1) * d[1];
                let s21 = w(q, 0) * d[0];
                let s22 = 1.0 + w(q, 1) * d[1];
                let det = s11 * s22 - s12 * s21;
                let (r1, r2) = (x[p], x[q]);
                vec![(s22 * r1 - s12 * r2) / det, (s11 * r2 - s21 * r1) / det]
            }
        };
        for (i, xi) in x.iter_mut().enumerate() {
            let mut corr = 0.0;
            for j in 0..y.len() {
                corr += w(i, j) * d[j] * y[j];
            }
            *xi -= corr;
        }
    }
}

/// Runs the network over `run` and returns the rows after the warm-up.
pub fn simulate(network: &NetworkModel, weather: &WeatherSeries, run: &RunWindow) -> Result<SimDataset, SimError> {
    simulate_traced(network, weather, run, WARMUP_DAYS).map(|(ds, _)| ds)
}

pub fn simulate_traced(
    network: &NetworkModel,
    weather: &WeatherSeries,
    run: &RunWindow,
    warmup_days: i64,
) -> Result<(SimDataset, EnergyTrace), SimError> {
    if run.step_s == 0 {
        return Err(SimError::Range("time step must be positive".into()));
    }
    let steps = run.steps();
    let warmup = (warmup_days * 86_400 / run.step_s as i64) as usize;
    if steps <= warmup {
        return Err(SimError::Range(format!(
            "run window {} to {} leaves no rows after a {warmup_days}-day warm-up",
            run.start, run.end
        )));
    }
    let last = run.time(steps - 1);
    if weather.is_empty() || run.start < weather.start || last > weather.time_at(weather.len() - 1) {
        return Err(SimError::Range(format!(
            "run window {} to {} is not covered by weather {} to {}",
            run.start,
            last,
            weather.start,
            weather.end()
        )));
    }

    let n = network.n_nodes();
    let dt = run.step_s as f64;
    let cdt: Vec<f64> = network.capacitance.iter().map(|c| c / dt).collect();
    let gb = network.boundary_conductance();
    let mut m0 = network.conductance_matrix();
    for i in 0..n {
        m0[(i, i)] += cdt[i] + gb[i];
    }
    let h = network.heater_node;
    let v = network.vent_node;
    let nodes = if h == v { vec![h] } else { vec![h, v] };
    let solver = Solver::new(m0, nodes.clone())
        .ok_or_else(|| SimError::Numerical {
            step: 0,
            message: "system matrix is singular".into(),
        })?;
    let slot_h = 0;
    let slot_v = if h == v { 0 } else { 1 };

    let rows = steps - warmup;
    let mut ds = SimDataset {
        start: run.time(warmup),
        step_s: run.step_s,
        t_in: Vec::with_capacity(rows),
        t_out: Vec::with_capacity(rows),
        i_sol: Vec::with_capacity(rows),
        p_h: Vec::with_capacity(rows),
        meta: DatasetMeta {
            spec_hash: Some(network.spec_hash.clone()),
            ..Default::default()
        },
    };
    let mut trace = EnergyTrace::default();

    let mut temp = vec![network.setpoint.unoccupied; n];
    let mut next = vec![0.0; n];
    let mut b = vec![0.0; n];
    let mut d = vec![0.0; nodes.len()];
    let rho_cp = AIR_DENSITY * AIR_CP;

    for k in 0..steps {
        let t = run.time(k);
        let sample = |var| {
            weather.interpolate(var, t).ok_or_else(|| SimError::Range(format!("no weather at {t}")))
        };
        let t_out = sample(WeatherVariable::TOut)?;
        let wind = sample(WeatherVariable::WindSpeed)?;
        let i_dn = sample(WeatherVariable::IDn)?;
        let i_dh = sample(WeatherVariable::IDh)?;
        let i_gh = i_dn * cos_zenith(t, &weather.site).max(0.0) + i_dh;
        let sp = network.setpoint.at(t);
        let g_vent = if network.design_flow > 0.0 {
            rho_cp
                * network.vent_coefficients.flow(
                    temp[v],
                    t_out,
                    wind,
                    network.design_flow,
                    network.vent_schedule.at_hour(t.hour()),
                )
        } else {
            0.0
        };

        for i in 0..n {
            b[i] = cdt[i] * temp[i] + network.solar_area[i] * i_gh;
        }
        for bl in &network.boundary_links {
            let tb = match bl.kind {
                BoundaryKind::Ground => network.ground_temperature,
                _ => t_out,
            };
            b[bl.node] += bl.conductance * tb;
        }
        b[v] += g_vent * t_out;
        d.iter_mut().for_each(|x| *x = 0.0);
        d[slot_v] += g_vent;

        let mut power = 0.0;
        if network.max_power > 0.0 {
            let gain = network.proportional_gain;
            b[h] += gain * sp;
            d[slot_h] += gain;
            solver.solve(&b, &d, &mut next);
            power = gain * (sp - next[h]);
            b[h] -= gain * sp;
            d[slot_h] -= gain;
            if power <= 0.0 {
                power = 0.0;
                solver.solve(&b, &d, &mut next);
            } else if power > network.max_power {
                power = network.max_power;
                b[h] += power;
                solver.solve(&b, &d, &mut next);
            }
        } else {
            solver.solve(&b, &d, &mut next);
        }
        if next.iter().any(|x| !x.is_finite()) {
            return Err(SimError::Numerical {
                step: k,
                message: format!("non-finite temperature at {t}"),
            });
        }

        if k >= warmup {
            ds.t_in.push(temp[h]);
            ds.t_out.push(t_out);
            ds.i_sol.push(i_gh);
            ds.p_h.push(power);

            let mut cond = 0.0;
            let mut win = 0.0;
            for bl in &network.boundary_links {
                match bl.kind {
                    BoundaryKind::Window => win += bl.conductance * (next[bl.node] - t_out),
                    BoundaryKind::Outdoor => cond += bl.conductance * (next[bl.node] - t_out),
                    BoundaryKind::Ground => cond += bl.conductance * (next[bl.node] - network.ground_temperature),
                }
            }
            trace.heating.push(power);
            trace.solar.push(network.solar_area.iter().sum::<f64>() * i_gh);
            trace.conduction_loss.push(cond);
            trace.window_loss.push(win);
            trace.ventilation_loss.push(g_vent * (next[v] - t_out));
            trace
                .storage
                .push((0..n).map(|i| cdt[i] * (next[i] - temp[i])).sum());
        }
        std::mem::swap(&mut temp, &mut next);
    }
    Ok((ds, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::refsim::network::build_thermal_network;
    use crate::refsim::schedule::SetpointSchedule;
    use crate::refsim::spec::{BuildingSpec, HeaterSpec, Layer, WallAssembly, ZoneSpec};
    use crate::weather::{parse_time, Site};

    fn toy(capacitance_scale: f64) -> BuildingSpec {
        BuildingSpec {
            zones: vec![ZoneSpec {
                id: "room".into(),
                air_capacitance: 1e5 * capacitance_scale,
                volume: 30.0,
            }],
            walls: vec![WallAssembly {
                name: "w".into(),
                from: "room".into(),
                to: "outdoor".into(),
                area: 20.0,
                sub_nodes: 2,
                from_film: 0.13,
                to_film: 0.04,
                layers: vec![Layer {
                    thickness: 0.1,
                    conductivity: 0.04,
                    density: 30.0 * capacitance_scale,
                    specific_heat: 1400.0,
                }],
            }],
            windows: vec![],
            ventilation: None,
            heater: HeaterSpec {
                zone: "room".into(),
                max_power: 5000.0,
                proportional_gain: 800.0,
            },
            setpoint: SetpointSchedule::constant(20.0),
            boundary: Default::default(),
        }
    }

    fn constant_weather(days: usize, t_out: f64) -> WeatherSeries {
        WeatherSeries::constant(
            parse_time("2001-01-01T00:00:00").unwrap(),
            3600,
            days * 24 + 1,
            [t_out, 80.0, 0.0, 0.0, 0.0, 0.0],
            Site::default(),
        )
    }

    fn window(days: i64) -> RunWindow {
        let start = parse_time("2001-01-01T00:00:00").unwrap();
        RunWindow {
            start,
            end: start + Duration::days(days),
            step_s: 600,
        }
    }

    #[test]
    fn steady_power_matches_series_conductance() {
        let net = build_thermal_network(&toy(1.0)).unwrap();
        let (ds, trace) = simulate_traced(&net, &constant_weather(20, 0.0), &window(20), 15).unwrap();
        let ua = 1.0 / ((0.13 + 2.5 + 0.04) / 20.0);
        let t_in = *ds.t_in.last().unwrap();
        let p = *ds.p_h.last().unwrap();
        assert!((p - ua * t_in).abs() / p < 1e-6, "{p} vs {}", ua * t_in);
        assert!(trace.max_imbalance() < 1e-6 * p);
    }

    #[test]
    fn free_float_decays_towards_outdoor() {
        let net = build_thermal_network(&toy(1.0)).unwrap().with_max_power(0.0);
        let ds = simulate(&net, &constant_weather(40, 5.0), &window(40)).unwrap();
        assert!(ds.p_h.iter().all(|&p| p == 0.0));
        assert!(ds.t_in.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        assert!((ds.t_in.last().unwrap() - 5.0).abs() < 0.01);
    }

    #[test]
    fn capped_power_is_reported_as_max() {
        let net = build_thermal_network(&toy(1.0)).unwrap().with_max_power(100.0);
        let ds = simulate(&net, &constant_weather(20, -10.0), &window(20)).unwrap();
        assert!(ds.p_h.iter().all(|&p| p == 100.0));
    }

    #[test]
    fn uncovered_window_is_a_range_error() {
        let net = build_thermal_network(&toy(1.0)).unwrap();
        assert!(matches!(
            simulate(&net, &constant_weather(10, 0.0), &window(20)),
            Err(SimError::Range(_))
        ));
    }
}
