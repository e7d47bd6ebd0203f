//! Run configuration: a TOML file with one table per concern. Every field has
//! a default, so an empty file is a valid pendulum run.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context, Result};
use contact_kam::expr::Expr;
use contact_kam::grid::{GridFunction, PeriodicGrid};
use contact_kam::semigroup::{Backend, Direction, EvolveSettings};
use contact_kam::verify::VerifyConfig;
use contact_kam::ContactModel;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub model: ModelConfig,
    pub grid: GridConfig,
    pub settings: SettingsConfig,
    pub tolerances: ToleranceConfig,
    pub check: CheckConfig,
    pub evolve: EvolveConfig,
    pub orbit: OrbitConfig,
    pub action: ActionConfig,
    pub minimize: MinimizeConfig,
    pub manifold: ManifoldConfig,
    pub verify: VerifyConfig,
}

/// A catalog model by name, or a mechanical model when `kinetic` is given.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub name: String,
    pub params: BTreeMap<String, f64>,
    pub dim: usize,
    pub kinetic: Option<String>,
    pub drift: [String; 2],
    pub potential: String,
    pub coupling: String,
    pub kappa: Option<f64>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            name: "pendulum".into(),
            params: BTreeMap::new(),
            dim: 1,
            kinetic: None,
            drift: ["0".into(), "0".into()],
            potential: "0".into(),
            coupling: "u".into(),
            kappa: None,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub n: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { n: 256 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SettingsConfig {
    pub backend: Backend,
    pub delta: f64,
    pub v_max: Option<f64>,
    pub picard_iters: usize,
    pub refine: bool,
}

impl Default for SettingsConfig {
    fn default() -> Self {
        Self {
            backend: Backend::Variational,
            delta: 1e-2,
            v_max: None,
            picard_iters: 1,
            refine: true,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToleranceConfig {
    pub tol: f64,
    pub t_max: f64,
    pub epsilon_mane: Option<f64>,
    pub cluster_eps: f64,
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        Self {
            tol: 1e-4,
            t_max: 60.0,
            epsilon_mane: None,
            cluster_eps: 5e-2,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CheckConfig {
    pub u_min: f64,
    pub u_max: f64,
    pub n_scan: usize,
}

impl Default for CheckConfig {
    fn default() -> Self {
        Self {
            u_min: -2.0,
            u_max: 2.0,
            n_scan: 64,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvolveConfig {
    /// Initial data as an expression in `x` and `y`.
    pub phi: String,
    pub t: f64,
    pub direction: Direction,
    /// Time between snapshots; 0 writes only the final state.
    pub snapshot_every: f64,
}

impl Default for EvolveConfig {
    fn default() -> Self {
        Self {
            phi: "0".into(),
            t: 1.0,
            direction: Direction::Backward,
            snapshot_every: 0.0,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OrbitConfig {
    pub x: [f64; 2],
    pub p: [f64; 2],
    pub u: f64,
    pub t_end: f64,
    pub dt: f64,
    pub window_fraction: f64,
}

impl Default for OrbitConfig {
    fn default() -> Self {
        Self {
            x: [1.0, 0.0],
            p: [0.0, 0.0],
            u: 0.0,
            t_end: 40.0,
            dt: 1e-2,
            window_fraction: 0.25,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ActionConfig {
    pub x0: [f64; 2],
    pub u0: f64,
    pub t_end: f64,
    /// Every how many layers a CSV block is written.
    pub csv_every: usize,
}

impl Default for ActionConfig {
    fn default() -> Self {
        Self {
            x0: [0.0, 0.0],
            u0: 0.0,
            t_end: 2.0,
            csv_every: 10,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MinimizeConfig {
    pub x0: [f64; 2],
    pub u0: f64,
    pub horizons: Vec<f64>,
    pub cauchy_tol: f64,
}

impl Default for MinimizeConfig {
    fn default() -> Self {
        Self {
            x0: [1.0, 0.0],
            u0: 0.0,
            horizons: vec![4.0, 8.0, 16.0],
            cauchy_tol: contact_kam::minimizer::DEFAULT_CAUCHY_TOL,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ManifoldConfig {
    pub x0: f64,
    pub eps_seed: f64,
    pub t_back: f64,
    /// Refine every crossing in double-double arithmetic and land it at `t_land`.
    pub polish: bool,
    pub t_land: f64,
}

impl Default for ManifoldConfig {
    fn default() -> Self {
        Self {
            x0: 1.0,
            eps_seed: contact_kam::minimizer::DEFAULT_SEED,
            t_back: contact_kam::minimizer::DEFAULT_T_BACK,
            polish: true,
            t_land: 100.0,
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn build_model(&self) -> Result<ContactModel> {
        let m = &self.model;
        let mut model = match &m.kinetic {
            Some(kinetic) => {
                let v_max = m.params.get("v_max").copied().unwrap_or(4.0);
                ContactModel::mechanical(
                    &m.name,
                    m.dim,
                    kinetic,
                    [&m.drift[0], &m.drift[1]],
                    &m.potential,
                    &m.coupling,
                    v_max,
                    m.kappa,
                )?
            }
            None => {
                let mut params = m.params.clone();
                params.entry("dim".into()).or_insert(m.dim as f64);
                ContactModel::builtin(&m.name, &params)?
            }
        };
        if let Some(v) = self.settings.v_max {
            if !(v > 0.0) {
                bail!("settings.v_max must be positive, got {v}");
            }
            model.v_max = v;
        }
        Ok(model)
    }

    pub fn build_grid(&self, model: &ContactModel) -> Result<PeriodicGrid> {
        Ok(PeriodicGrid::new(model.dim, self.grid.n)?)
    }

    pub fn build_settings(&self, model: &ContactModel) -> Result<EvolveSettings> {
        let s = &self.settings;
        let mut settings = match s.backend {
            Backend::Variational => EvolveSettings::variational(model, s.delta),
            Backend::LaxFriedrichs => EvolveSettings::lax_friedrichs(s.delta),
        };
        settings.picard_iters = s.picard_iters;
        settings.refine = s.refine && s.backend == Backend::Variational;
        settings.validate(model)?;
        Ok(settings)
    }

    pub fn initial_data(&self, grid: PeriodicGrid) -> Result<GridFunction> {
        let expr = Expr::parse(&self.evolve.phi).with_context(|| format!("parsing phi = {:?}", self.evolve.phi))?;
        Ok(GridFunction::from_fn(grid, |x| expr.eval(x[0], x[1], 0.0)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_the_pendulum() {
        let c: RunConfig = toml::from_str("").unwrap();
        let model = c.build_model().unwrap();
        assert_eq!(model.name, "pendulum");
        assert_eq!(c.build_grid(&model).unwrap().len(), 256);
        assert_eq!(c.build_settings(&model).unwrap().search_radius, 4.0 * 1e-2);
    }

    #[test]
    fn sections_and_overrides() {
        let text = r#"
            seed = 9
            [model]
            name = "free_discount"
            dim = 2
            params = { lambda = 0.8, amp = 0.3 }
            [settings]
            backend = "lax_friedrichs"
            delta = 0.002
            v_max = 3.0
            [evolve]
            phi = "sin(x) * cos(y)"
        "#;
        let c: RunConfig = toml::from_str(text).unwrap();
        let model = c.build_model().unwrap();
        assert_eq!((model.dim, model.v_max), (2, 3.0));
        let settings = c.build_settings(&model).unwrap();
        assert_eq!(settings.backend, Backend::LaxFriedrichs);
        let phi = c.initial_data(c.build_grid(&model).unwrap()).unwrap();
        assert_eq!(phi.values[0], 0.0);
    }

    #[test]
    fn custom_mechanical_model() {
        let text = r#"
            [model]
            name = "tilted"
            kinetic = "1"
            potential = "cos(x) - 1"
            coupling = "0.5 * u"
            kappa = 0.5
        "#;
        let c: RunConfig = toml::from_str(text).unwrap();
        let model = c.build_model().unwrap();
        assert_eq!(model.kappa, 0.5);
        assert!((model.hamiltonian(&[0.0; 2], &[2.0, 0.0], 2.0) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn errors_are_reported() {
        assert!(toml::from_str::<RunConfig>("[grid]\nsize = 3").is_err());
        let c: RunConfig = toml::from_str("[model]\nname = \"nope\"").unwrap();
        assert!(c.build_model().is_err());
        let c: RunConfig = toml::from_str("[settings]\ndelta = 2.0").unwrap();
        assert!(c.build_settings(&c.build_model().unwrap()).is_err());
    }
}
