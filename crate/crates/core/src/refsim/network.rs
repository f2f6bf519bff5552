use std::collections::VecDeque;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::schedule::{SetpointSchedule, VentilationCoefficients};
use super::spec::{BuildingSpec, ScheduleFraction, GROUND, OUTDOOR};
use super::SimError;
use crate::seeds::sha256_hex;

/// Conductance between two internal nodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Link {
    pub a: usize,
    pub b: usize,
    /// W/K
    pub conductance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundaryKind {
    /// Opaque conduction to outdoor air.
    Outdoor,
    /// Window U·A to outdoor air.
    Window,
    Ground,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryLink {
    pub node: usize,
    pub kind: BoundaryKind,
    pub conductance: f64,
}

/// Immutable nodal network assembled from a [`BuildingSpec`].
///
/// Zones occupy nodes `0..n_zones` in spec order; wall nodes follow.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkModel {
    pub node_names: Vec<String>,
    pub n_zones: usize,
    /// J/K per node
    pub capacitance: Vec<f64>,
    pub links: Vec<Link>,
    pub boundary_links: Vec<BoundaryLink>,
    /// Effective aperture area (m²) multiplying global horizontal irradiance.
    pub solar_area: Vec<f64>,
    pub heater_node: usize,
    pub max_power: f64,
    pub proportional_gain: f64,
    pub vent_node: usize,
    pub design_flow: f64,
    pub vent_coefficients: VentilationCoefficients,
    pub vent_schedule: ScheduleFraction,
    pub setpoint: SetpointSchedule,
    pub ground_temperature: f64,
    /// SHA-256 of the canonical spec serialisation.
    pub spec_hash: String,
}

impl NetworkModel {
    pub fn n_nodes(&self) -> usize {
        self.capacitance.len()
    }

    /// Symmetric conductance (Laplacian) matrix of the internal links.
    pub fn conductance_matrix(&self) -> DMatrix<f64> {
        let n = self.n_nodes();
        let mut k = DMatrix::zeros(n, n);
        for l in &self.links {
            k[(l.a, l.a)] += l.conductance;
            k[(l.b, l.b)] += l.conductance;
            k[(l.a, l.b)] -= l.conductance;
            k[(l.b, l.a)] -= l.conductance;
        }
        k
    }

    /// Total boundary conductance attached to each node.
    pub fn boundary_conductance(&self) -> Vec<f64> {
        let mut g = vec![0.0; self.n_nodes()];
        for b in &self.boundary_links {
            g[b.node] += b.conductance;
        }
        g
    }

    pub fn with_setpoint(mut self, schedule: SetpointSchedule) -> Self {
        self.setpoint = schedule;
        self
    }

    /// Overrides the heater limit; zero disables heating entirely.
    pub fn with_max_power(mut self, max_power: f64) -> Self {
        self.max_power = max_power.max(0.0);
        self
    }

    pub fn with_design_flow(mut self, design_flow: f64) -> Self {
        self.design_flow = design_flow.max(0.0);
        self
    }
}

pub fn build_thermal_network(spec: &BuildingSpec) -> Result<NetworkModel, SimError> {
    spec.validate()?;
    let n_zones = spec.zones.len();
    let mut names: Vec<String> = spec.zones.iter().map(|z| z.id.clone()).collect();
    let mut capacitance: Vec<f64> = spec.zones.iter().map(|z| z.air_capacitance).collect();
    let mut links = Vec::new();
    let mut boundary_links = Vec::new();

    enum End {
        Node(usize),
        Boundary(BoundaryKind),
    }
    let resolve = |id: &str| match id {
        OUTDOOR => End::Boundary(BoundaryKind::Outdoor),
        GROUND => End::Boundary(BoundaryKind::Ground),
        z => End::Node(spec.zone_index(z).expect("validated zone id")),
    };
    let connect = |a: &End, b: usize, g: f64, links: &mut Vec<Link>, bl: &mut Vec<BoundaryLink>| match a {
        End::Node(i) => links.push(Link { a: *i, b, conductance: g }),
        End::Boundary(kind) => bl.push(BoundaryLink {
            node: b,
            kind: *kind,
            conductance: g,
        }),
    };

    for w in &spec.walls {
        let from = resolve(&w.from);
        let to = resolve(&w.to);
        if matches!((&from, &to), (End::Boundary(_), End::Boundary(_))) {
            return Err(SimError::Construction(format!(
                "wall `{}` connects two boundary conditions",
                w.name
            )));
        }
        let s = w.sub_nodes;
        // Resistance carried over to the next node: the film plus the
        // half-slice of the previous layer.
        let mut pending = w.from_film / w.area;
        let mut prev: Option<usize> = None;
        for (li, layer) in w.layers.iter().enumerate() {
            let r_slice = layer.thickness / (layer.conductivity * w.area) / s as f64;
            let c_slice = layer.density * layer.specific_heat * layer.thickness * w.area / s as f64;
            for j in 0..s {
                let idx = names.len();
                names.push(format!("{}/{}/{}", w.name, li, j));
                capacitance.push(c_slice);
                let r = if j == 0 { pending + 0.5 * r_slice } else { r_slice };
                match prev {
                    None => connect(&from, idx, 1.0 / r, &mut links, &mut boundary_links),
                    Some(p) => links.push(Link {
                        a: p,
                        b: idx,
                        conductance: 1.0 / r,
                    }),
                }
                prev = Some(idx);
            }
            pending = 0.5 * r_slice;
        }
        let last = prev.expect("at least one layer");
        let r = pending + w.to_film / w.area;
        connect(&to, last, 1.0 / r, &mut links, &mut boundary_links);
    }

    let mut solar_area = vec![0.0; names.len()];
    for win in &spec.windows {
        let z = spec.zone_index(&win.zone).expect("validated zone id");
        boundary_links.push(BoundaryLink {
            node: z,
            kind: BoundaryKind::Window,
            conductance: win.u_value * win.area,
        });
        solar_area[z] += win.solar_aperture * win.area;
    }

    let heater_node = spec.zone_index(&spec.heater.zone).expect("validated zone id");
    let (vent_node, design_flow, vent_coefficients, vent_schedule) = match &spec.ventilation {
        Some(v) => (
            v.zone
                .as_deref()
                .map(|z| spec.zone_index(z).expect("validated zone id"))
                .unwrap_or(heater_node),
            v.design_flow,
            v.coefficients,
            v.schedule.clone(),
        ),
        None => (heater_node, 0.0, VentilationCoefficients::default(), ScheduleFraction::Constant(0.0)),
    };

    let model = NetworkModel {
        node_names: names,
        n_zones,
        capacitance,
        links,
        boundary_links,
        solar_area,
        heater_node,
        max_power: spec.heater.max_power,
        proportional_gain: spec.heater.proportional_gain,
        vent_node,
        design_flow,
        vent_coefficients,
        vent_schedule,
        setpoint: spec.setpoint.clone(),
        ground_temperature: spec.boundary.ground_temperature,
        spec_hash: sha256_hex(spec.to_toml().as_bytes()),
    };
    check_connectivity(&model, spec)?;
    Ok(model)
}

/// Every zone must reach the outdoor boundary through some chain of links.
fn check_connectivity(model: &NetworkModel, spec: &BuildingSpec) -> Result<(), SimError> {
    let n = model.n_nodes();
    let mut adjacency = vec![Vec::new(); n];
    for l in &model.links {
        adjacency[l.a].push(l.b);
        adjacency[l.b].push(l.a);
    }
    let mut outdoor = vec![false; n];
    for b in &model.boundary_links {
        if b.kind != BoundaryKind::Ground {
            outdoor[b.node] = true;
        }
    }
    if model.design_flow > 0.0 {
        outdoor[model.vent_node] = true;
    }
    for z in 0..model.n_zones {
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([z]);
        seen[z] = true;
        let mut reached = false;
        while let Some(i) = queue.pop_front() {
            if outdoor[i] {
                reached = true;
                break;
            }
            for &j in &adjacency[i] {
                if !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        if !reached {
            return Err(SimError::Construction(format!(
                "zone `{}` has no thermal path to the outdoor boundary",
                spec.zones[z].id
            )));
        }
    }
    Ok(())
}
