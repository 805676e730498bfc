//! Built-in scenarios.

use std::collections::BTreeMap;

use crate::config::{
    DensitySpec, GeometrySpec, InitialSpec, MeshSpec, Perturbation, RawConfig, RawObserve, RawParameters, RawRun,
    Units,
};
use crate::error::{Error, Result};
use crate::kinetic::Coupling;

/// Density scale used by the table-unit presets. Only `b` and `c` see it;
/// chosen so that a cluster of unit density strips its nutrient within a few
/// time units.
pub const CELLS_PER_UNIT_DENSITY: f64 = 2.5e6;

pub trait Preset: Send + Sync {
    fn name(&self) -> &'static str;
    fn summary(&self) -> &'static str;
    fn config(&self) -> RawConfig;
}

/// Table values in physical units.
pub fn table_parameters() -> RawParameters {
    RawParameters {
        v0: Some(25.0),
        psi_0: Some(3.0),
        chi_n: Some(0.6),
        chi_s: Some(0.2),
        delta_n: Some(0.05),
        delta_s: Some(0.05),
        x_bar: Some(1.0),
        t_bar: Some(40.0),
        tau_2: Some(2.0),
        a: Some(5e-3),
        b: Some(4e5),
        c: Some(2e-7),
        d_n: Some(8e-6),
        d_s: Some(8e-6),
        cells_per_unit_density: Some(CELLS_PER_UNIT_DENSITY),
        ..Default::default()
    }
}

fn run(t_end: f64) -> RawRun {
    RawRun {
        t_end,
        output_every: None,
        cfl: None,
        limiter: None,
        solver: None,
        solver_tol: None,
        solver_max_iter: None,
        eps_c: None,
        strict_positivity: None,
    }
}

fn geometry(kind: &str, params: serde_json::Value) -> GeometrySpec {
    GeometrySpec {
        kind: kind.into(),
        params,
    }
}

/// Aggregation of a Gaussian cluster on the attractant it secretes.
pub struct SingleCluster;

impl SingleCluster {
    pub fn with_mass(m: f64) -> RawConfig {
        RawConfig {
            name: "test1".into(),
            notes: vec!["tumbling responds to the chemoattractant only; the nutrient is inert".into()],
            geometry: geometry("box", serde_json::json!({})),
            mesh: MeshSpec {
                bounds: [-0.25, 0.25, -0.25, 0.25],
                n_x: 120,
                n_y: 120,
                n_v: 64,
            },
            units: Units::Physical,
            coupling: Coupling::ChemoattractantOnly,
            parameters: RawParameters {
                c: Some(0.0),
                ..table_parameters()
            },
            initial: InitialSpec {
                density: DensitySpec::Gaussian {
                    center: [0.0, 0.0],
                    sharpness: 100.0,
                    m,
                },
                nutrient: 1.0,
                attractant: 0.0,
                perturbation: None,
            },
            run: run(10.0),
            observe: Some(RawObserve {
                center: Some([0.0, 0.0]),
                section_axis: None,
                tail_window: None,
            }),
        }
    }
}

impl Preset for SingleCluster {
    fn name(&self) -> &'static str {
        "test1"
    }
    fn summary(&self) -> &'static str {
        "Gaussian cluster aggregating in a closed square"
    }
    fn config(&self) -> RawConfig {
        Self::with_mass(1.0)
    }
}

/// Expanding and returning ring in a disc.
pub struct DiscWave;

impl Preset for DiscWave {
    fn name(&self) -> &'static str {
        "test2"
    }
    fn summary(&self) -> &'static str {
        "travelling ring in a disc of radius 3"
    }
    fn config(&self) -> RawConfig {
        RawConfig {
            name: "test2".into(),
            notes: vec![
                "initial density uses exp(-|x|^2), a decaying Gaussian, with m = 0.1 so the total mass is 2 pi 0.1".into(),
            ],
            geometry: geometry("disc", serde_json::json!({"center": [0.0, 0.0], "radius": 3.0})),
            mesh: MeshSpec {
                bounds: [-3.0, 3.0, -3.0, 3.0],
                n_x: 80,
                n_y: 80,
                n_v: 64,
            },
            units: Units::Physical,
            coupling: Coupling::Both,
            parameters: table_parameters(),
            initial: InitialSpec {
                density: DensitySpec::Gaussian {
                    center: [0.0, 0.0],
                    sharpness: 1.0,
                    m: 0.1,
                },
                nutrient: 1.0,
                attractant: 0.0,
                perturbation: None,
            },
            run: run(32.0),
            observe: Some(RawObserve {
                center: Some([0.0, 0.0]),
                section_axis: None,
                tail_window: None,
            }),
        }
    }
}

/// Two clusters at the ends of a narrow U channel.
pub struct NarrowChannel;

impl NarrowChannel {
    pub const WIDTH: f64 = 1.0;
    pub const CELLS_PER_UNIT_DENSITY: f64 = 6.25e5;
}

impl Preset for NarrowChannel {
    fn name(&self) -> &'static str {
        "test3"
    }
    fn summary(&self) -> &'static str {
        "clusters at both ends of a U channel of width 1 meet in the bend"
    }
    fn config(&self) -> RawConfig {
        RawConfig {
            name: "test3".into(),
            notes: vec![
                "channel layout chosen to fit the box; straight walls sit midway between mesh lines and the legs run out through the bottom frame".into(),
                "cells_per_unit_density lowered to 6.25e5; at 2.5e6 the bands stall and fade before meeting in the bend".into(),
            ],
            geometry: geometry(
                "u_channel",
                serde_json::json!({
                    "center": [4.0, 2.0],
                    "inner_radius": 2.45,
                    "outer_radius": 3.45,
                    "leg_length": 2.5,
                    "orientation": "down",
                }),
            ),
            mesh: MeshSpec {
                bounds: [0.0, 8.0, 0.0, 6.0],
                n_x: 80,
                n_y: 60,
                n_v: 64,
            },
            units: Units::Physical,
            coupling: Coupling::Both,
            parameters: RawParameters {
                cells_per_unit_density: Some(NarrowChannel::CELLS_PER_UNIT_DENSITY),
                ..table_parameters()
            },
            initial: InitialSpec {
                density: DensitySpec::Rectangle {
                    min: [0.0, 0.0],
                    max: [8.0, 1.0],
                    value: 0.25,
                },
                nutrient: 1.0,
                attractant: 0.0,
                perturbation: None,
            },
            run: RawRun {
                output_every: Some(1.0),
                ..run(40.0)
            },
            observe: None,
        }
    }
}

/// One cluster entering a wide U channel from the end of one leg.
pub struct WideChannel;

impl Preset for WideChannel {
    fn name(&self) -> &'static str {
        "test4"
    }
    fn summary(&self) -> &'static str {
        "single cluster travelling through a U channel of width 3"
    }
    fn config(&self) -> RawConfig {
        RawConfig {
            name: "test4".into(),
            notes: vec![
                "channel opens to the right; the cluster fills the end of the lower leg".into(),
            ],
            geometry: geometry(
                "u_channel",
                serde_json::json!({
                    "center": [4.0, 4.0],
                    "inner_radius": 0.45,
                    "outer_radius": 3.45,
                    "leg_length": 2.6,
                    "orientation": "right",
                }),
            ),
            mesh: MeshSpec {
                bounds: [0.0, 6.5, 0.0, 8.0],
                n_x: 65,
                n_y: 80,
                n_v: 64,
            },
            units: Units::Physical,
            coupling: Coupling::Both,
            parameters: table_parameters(),
            initial: InitialSpec {
                density: DensitySpec::Rectangle {
                    min: [5.0, 0.0],
                    max: [6.5, 4.0],
                    value: 0.25,
                },
                nutrient: 1.0,
                attractant: 0.0,
                perturbation: None,
            },
            run: run(46.5),
            observe: None,
        }
    }
}

/// Ring instability with nutrient-limited growth and a quiescence sink.
pub struct GrowingColony;

impl Preset for GrowingColony {
    fn name(&self) -> &'static str {
        "test5"
    }
    fn summary(&self) -> &'static str {
        "growing colony on a nutrient plate, dimensionless parameters"
    }
    fn config(&self) -> RawConfig {
        RawConfig {
            name: "test5".into(),
            notes: vec![
                "G_0 = 1, gamma = 1, v0 = 1 and the square [-10,10]^2 are guesses; they are not given".into(),
                "a 1% seeded multiplicative perturbation breaks the symmetry of the initial disc".into(),
            ],
            geometry: geometry("box", serde_json::json!({})),
            mesh: MeshSpec {
                bounds: [-10.0, 10.0, -10.0, 10.0],
                n_x: 100,
                n_y: 100,
                n_v: 64,
            },
            units: Units::Dimensionless,
            coupling: Coupling::Both,
            parameters: RawParameters {
                v0: Some(1.0),
                psi_0: Some(1.0),
                chi_n: Some(0.5),
                chi_s: Some(0.1),
                delta_n: Some(20.0),
                delta_s: Some(20.0),
                a: Some(8.0),
                b: Some(20.0),
                c: Some(0.8),
                d_n: Some(1.0),
                d_s: Some(1.0),
                g_0: Some(1.0),
                sigma: Some(0.1),
                gamma: Some(1.0),
                rho_inf: Some(15.0),
                ..Default::default()
            },
            initial: InitialSpec {
                density: DensitySpec::Disc {
                    center: [0.0, 0.0],
                    radius: 1.0,
                    value: 1.0,
                },
                nutrient: 0.5,
                attractant: 0.0,
                perturbation: Some(Perturbation {
                    amplitude: 0.01,
                    seed: 20_240_601,
                }),
            },
            run: run(55.0),
            observe: Some(RawObserve {
                center: Some([0.0, 0.0]),
                section_axis: None,
                tail_window: None,
            }),
        }
    }
}

pub struct PresetRegistry {
    presets: BTreeMap<&'static str, Box<dyn Preset>>,
}

impl Default for PresetRegistry {
    fn default() -> Self {
        let mut r = Self {
            presets: BTreeMap::new(),
        };
        r.register(Box::new(SingleCluster));
        r.register(Box::new(DiscWave));
        r.register(Box::new(NarrowChannel));
        r.register(Box::new(WideChannel));
        r.register(Box::new(GrowingColony));
        r
    }
}

impl PresetRegistry {
    pub fn register(&mut self, preset: Box<dyn Preset>) {
        self.presets.insert(preset.name(), preset);
    }

    pub fn iter(&self) -> impl Iterator<Item = &dyn Preset> {
        self.presets.values().map(|p| p.as_ref())
    }

    pub fn get(&self, name: &str) -> Result<&dyn Preset> {
        self.presets.get(name).map(|p| p.as_ref()).ok_or_else(|| Error::UnknownStrategy {
            kind: "preset",
            name: name.into(),
            available: self.presets.keys().copied().collect::<Vec<_>>().join(", "),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::validate_config;

    #[test]
    fn every_preset_validates_and_round_trips() {
        let registry = PresetRegistry::default();
        let names: Vec<_> = registry.iter().map(|p| p.name()).collect();
        assert_eq!(names, ["test1", "test2", "test3", "test4", "test5"]);
        for p in registry.iter() {
            let raw = p.config();
            let text = serde_json::to_string_pretty(&raw).unwrap();
            let back = crate::config::parse_config(&text).unwrap();
            assert_eq!(back, raw);
            validate_config(raw).unwrap_or_else(|e| panic!("{}: {e}", p.name()));
        }
        assert!(registry.get("test6").is_err());
    }

    #[test]
    fn table_presets_are_unit_speed() {
        let cfg = validate_config(SingleCluster.config()).unwrap();
        assert!((cfg.params.v0 - 1.0).abs() < 1e-14);
        assert_eq!((cfg.mesh.n_x, cfg.mesh.n_y, cfg.vgrid.n_v), (120, 120, 64));
    }
}
