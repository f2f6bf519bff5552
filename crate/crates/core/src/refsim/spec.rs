use std::path::Path;

use serde::{Deserialize, Serialize};

use super::schedule::{SetpointSchedule, VentilationCoefficients};
use super::SimError;

pub const OUTDOOR: &str = "outdoor";
pub const GROUND: &str = "ground";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZoneSpec {
    pub id: String,
    /// J/K, including furniture and light internal mass.
    pub air_capacitance: f64,
    /// m³
    pub volume: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    /// m
    pub thickness: f64,
    /// W/(m·K)
    pub conductivity: f64,
    /// kg/m³
    pub density: f64,
    /// J/(kg·K)
    pub specific_heat: f64,
}

/// A layered assembly between two nodes. Layers are listed from `from` to
/// `to`; either end may be a zone id, `outdoor` or `ground`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WallAssembly {
    pub name: String,
    pub from: String,
    pub to: String,
    /// m²
    pub area: f64,
    #[serde(default = "default_sub_nodes")]
    pub sub_nodes: usize,
    /// Surface film resistance on the `from` side, m²K/W.
    #[serde(default)]
    pub from_film: f64,
    /// Surface film resistance on the `to` side, m²K/W.
    #[serde(default)]
    pub to_film: f64,
    pub layers: Vec<Layer>,
}

fn default_sub_nodes() -> usize {
    3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowSpec {
    pub zone: String,
    #[serde(default)]
    pub orientation: String,
    pub area: f64,
    pub u_value: f64,
    /// Fraction of global horizontal irradiance on the window area that ends
    /// up as a zone gain.
    pub solar_aperture: f64,
}

/// Constant fraction or 24 hourly fractions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScheduleFraction {
    Constant(f64),
    Hourly(Vec<f64>),
}

impl ScheduleFraction {
    pub fn at_hour(&self, hour: u32) -> f64 {
        match self {
            ScheduleFraction::Constant(v) => *v,
            ScheduleFraction::Hourly(v) => v[hour as usize % v.len()],
        }
    }
}

impl Default for ScheduleFraction {
    fn default() -> Self {
        ScheduleFraction::Constant(1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VentilationSpec {
    /// Ventilated zone; defaults to the heated zone.
    #[serde(default)]
    pub zone: Option<String>,
    /// m³/s
    pub design_flow: f64,
    #[serde(default)]
    pub coefficients: VentilationCoefficients,
    #[serde(default)]
    pub schedule: ScheduleFraction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeaterSpec {
    pub zone: String,
    /// W
    pub max_power: f64,
    /// W/K
    #[serde(default = "default_gain")]
    pub proportional_gain: f64,
}

fn default_gain() -> f64 {
    800.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundarySpec {
    /// °C
    pub ground_temperature: f64,
}

impl Default for BoundarySpec {
    fn default() -> Self {
        BoundarySpec {
            ground_temperature: 10.0,
        }
    }
}

/// Full description of the reference building.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildingSpec {
    pub zones: Vec<ZoneSpec>,
    #[serde(default)]
    pub walls: Vec<WallAssembly>,
    #[serde(default)]
    pub windows: Vec<WindowSpec>,
    pub ventilation: Option<VentilationSpec>,
    pub heater: HeaterSpec,
    #[serde(default)]
    pub setpoint: SetpointSchedule,
    #[serde(default)]
    pub boundary: BoundarySpec,
}

impl BuildingSpec {
    pub fn from_toml(text: &str) -> Result<Self, SimError> {
        let spec: BuildingSpec = toml::from_str(text).map_err(|e| SimError::Spec(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self, SimError> {
        let text = std::fs::read_to_string(path).map_err(|e| SimError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("building spec serialises")
    }

    pub fn zone_index(&self, id: &str) -> Option<usize> {
        self.zones.iter().position(|z| z.id == id)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::Spec(m));
        if self.zones.is_empty() {
            return bad("at least one zone is required".into());
        }
        for (i, z) in self.zones.iter().enumerate() {
            if z.id == OUTDOOR || z.id == GROUND {
                return bad(format!("zone id `{}` is reserved", z.id));
            }
            if self.zones[..i].iter().any(|o| o.id == z.id) {
                return bad(format!("duplicate zone id `{}`", z.id));
            }
            if !(z.air_capacitance > 0.0) || !(z.volume > 0.0) {
                return bad(format!("zone `{}` needs positive capacitance and volume", z.id));
            }
        }
        let known = |id: &str| id == OUTDOOR || id == GROUND || self.zone_index(id).is_some();
        for w in &self.walls {
            if !known(&w.from) || !known(&w.to) {
                return bad(format!("wall `{}` references an unknown node", w.name));
            }
            if !(w.area > 0.0) || w.sub_nodes == 0 || w.layers.is_empty() {
                return bad(format!("wall `{}` needs positive area, sub-nodes and at least one layer", w.name));
            }
            if w.from_film < 0.0 || w.to_film < 0.0 {
                return bad(format!("wall `{}` has a negative film resistance", w.name));
            }
            for l in &w.layers {
                if !(l.thickness > 0.0 && l.conductivity > 0.0 && l.density > 0.0 && l.specific_heat > 0.0) {
                    return bad(format!("wall `{}` has a non-positive layer property", w.name));
                }
            }
        }
        for w in &self.windows {
            if self.zone_index(&w.zone).is_none() {
                return bad(format!("window references unknown zone `{}`", w.zone));
            }
            if !(w.area > 0.0) || !(w.u_value > 0.0) || !(0.0..=1.0).contains(&w.solar_aperture) {
                return bad(format!("window in `{}` has invalid properties", w.zone));
            }
        }
        if self.zone_index(&self.heater.zone).is_none() {
            return bad(format!("heater references unknown zone `{}`", self.heater.zone));
        }
        if !(self.heater.max_power > 0.0) || !(self.heater.proportional_gain > 0.0) {
            return bad("heater needs positive max_power and proportional_gain".into());
        }
        if let Some(v) = &self.ventilation {
            if let Some(z) = &v.zone {
                if self.zone_index(z).is_none() {
                    return bad(format!("ventilation references unknown zone `{z}`"));
                }
            }
            if !(v.design_flow >= 0.0) {
                return bad("ventilation design_flow must be >= 0".into());
            }
            let fractions: Vec<f64> = match &v.schedule {
                ScheduleFraction::Constant(x) => vec![*x],
                ScheduleFraction::Hourly(xs) => xs.clone(),
            };
            if fractions.is_empty() || fractions.iter().any(|f| !(0.0..=1.0).contains(f)) {
                return bad("ventilation schedule fractions must lie in [0, 1]".into());
            }
        }
        Ok(())
    }
}
