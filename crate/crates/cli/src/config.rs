//! Experiment configuration: one TOML document, every section optional.

use std::path::{Path, PathBuf};

use fixangle_core::carleman::{geometry_check, CarlemanWeight};
use fixangle_core::freqbridge::Window;
use fixangle_core::potential::{Bump, EnsembleSpec, Potential};
use fixangle_core::{GaussRule, GridConfig, SolverConfig, SpaceTimeGrid};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

/// Environment variable that overrides `output`.
pub const OUTPUT_ENV: &str = "FIXANGLE_OUTPUT";

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Overrides the ensemble and test-suite seeds when set.
    pub seed: Option<u64>,
    pub output: Option<PathBuf>,
    pub grid: GridConfig,
    pub solver: SolverConfig,
    pub potential: PotentialSection,
    pub ensemble: EnsembleSpec,
    pub stability: StabilitySection,
    pub carleman: CarlemanSection,
    pub hs_decay: DecaySection,
    pub farfield: FarfieldSection,
    pub recovery: RecoverySection,
    pub solve: SolveSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PotentialSection {
    pub bumps: Vec<Bump>,
    /// Second potential for `recover-trace` and `farfield`; empty means zero.
    pub compare: Vec<Bump>,
}

impl Default for PotentialSection {
    fn default() -> Self {
        Self {
            bumps: vec![Bump::new([0.0; 3], 0.8, 1.0)],
            compare: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StabilitySection {
    pub pairs: usize,
    /// Horizons at which the ensemble is rerun.
    pub t_values: Vec<f64>,
    pub exclude_fraction: f64,
    pub floor: f64,
}

impl Default for StabilitySection {
    fn default() -> Self {
        Self {
            pairs: 10,
            t_values: vec![6.5, 8.0],
            exclude_fraction: 1e-3,
            floor: 1e-10,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Quadrature {
    #[default]
    Gauss,
    Grid,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CarlemanSection {
    pub a: f64,
    pub lambda: f64,
    #[serde(alias = "T")]
    pub t_end: f64,
    pub s_values: Vec<f64>,
    pub suite_size: usize,
    pub suite_seed: u64,
    /// Half-width of the test functions' cutoff.
    pub cutoff: f64,
    pub quadrature: Quadrature,
    /// Radial, angular, time panels, time order of the Gauss rule.
    pub gauss: [usize; 4],
    /// `s` used by `ibp-check`.
    pub identity_s: f64,
    pub identity_suite: usize,
    pub identity_tolerance: f64,
    /// Largest accepted `max / min` of the per-`s` maxima.
    pub spread_limit: f64,
    /// Slice time of the energy check near `t = T`.
    pub tau: f64,
}

impl Default for CarlemanSection {
    fn default() -> Self {
        Self {
            a: 1.1,
            lambda: 0.1,
            t_end: 6.5,
            s_values: vec![0.5, 1.0, 2.0, 4.0],
            suite_size: 20,
            suite_seed: 11,
            cutoff: 1.6,
            quadrature: Quadrature::Gauss,
            gauss: [64, 256, 4, 16],
            identity_s: 1.0,
            identity_suite: 10,
            identity_tolerance: 0.05,
            spread_limit: 2.0,
            tau: 6.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecaySection {
    pub s_values: Vec<f64>,
    pub resolution: usize,
}

impl Default for DecaySection {
    fn default() -> Self {
        Self {
            s_values: vec![0.5, 1.0, 2.0, 4.0, 8.0],
            resolution: 64,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FarfieldSection {
    pub ks: Vec<f64>,
    /// Observation angles in radians.
    pub thetas: Vec<f64>,
    pub window: Window,
}

impl Default for FarfieldSection {
    fn default() -> Self {
        let thetas = (0..16)
            .map(|i| i as f64 * std::f64::consts::PI / 8.0)
            .collect();
        Self {
            ks: vec![1.0, 2.0, 4.0],
            thetas,
            window: Window::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RecoverySection {
    pub tolerance: f64,
    /// Offset in `eps` units of the characteristic-data comparison.
    pub data_offset: f64,
}

impl Default for RecoverySection {
    fn default() -> Self {
        Self {
            tolerance: 0.05,
            data_offset: 8.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveSection {
    /// Write every `sigma_every`-th level of the `Sigma` trace.
    pub sigma_every: usize,
    /// Run the enlarged-box reflection check before solving.
    pub calibrate: bool,
}

impl Default for SolveSection {
    fn default() -> Self {
        Self {
            sigma_every: 8,
            calibrate: false,
        }
    }
}

fn invalid(section: &str, e: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("[{section}] {e}"))
}

impl ExperimentConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let mut cfg: Self = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
                toml::from_str(&text)
                    .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
            }
            None => Self::default(),
        };
        if let Some(seed) = cfg.seed {
            cfg.ensemble.seed = seed;
            cfg.carleman.suite_seed = seed;
        }
        Ok(cfg)
    }

    pub fn output_dir(&self) -> PathBuf {
        std::env::var_os(OUTPUT_ENV)
            .map(PathBuf::from)
            .or_else(|| self.output.clone())
            .unwrap_or_else(|| PathBuf::from("fixangle-out"))
    }

    /// SHA-256 of the canonical TOML form.
    pub fn hash(&self) -> String {
        let text = toml::to_string(self).unwrap_or_default();
        Sha256::digest(text.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn build_grid(&self) -> Result<SpaceTimeGrid, CliError> {
        SpaceTimeGrid::build(&self.grid).map_err(|e| invalid("grid", e))
    }

    pub fn grid_with_t(&self, t_end: f64) -> Result<SpaceTimeGrid, CliError> {
        SpaceTimeGrid::build(&GridConfig {
            t_end,
            ..self.grid.clone()
        })
        .map_err(|e| invalid("grid", e))
    }

    pub fn potential(&self) -> Result<Potential, CliError> {
        Potential::new(self.grid.n, self.potential.bumps.clone())
            .map_err(|e| invalid("potential", e))
    }

    pub fn compare_potential(&self) -> Result<Potential, CliError> {
        Potential::new(self.grid.n, self.potential.compare.clone())
            .map_err(|e| invalid("potential.compare", e))
    }

    pub fn weight(&self) -> Result<CarlemanWeight, CliError> {
        let c = &self.carleman;
        let s = c.s_values.first().copied().unwrap_or(c.identity_s);
        CarlemanWeight::new(c.a, c.lambda, s, c.t_end).map_err(|e| invalid("carleman", e))
    }

    pub fn gauss_rule(&self) -> Result<GaussRule, CliError> {
        let [r, a, p, o] = self.carleman.gauss;
        GaussRule::new(self.grid.n, self.carleman.t_end, r, a, p, o)
            .map_err(|e| invalid("carleman.gauss", e))
    }

    /// Everything a command needs, checked before any solve or sweep.
    pub fn validate(&self, command: Command) -> Result<(), CliError> {
        let needs_grid = matches!(
            command,
            Command::Solve
                | Command::Stability
                | Command::RecoverTrace
                | Command::Farfield
                | Command::GenPotential
        ) || (command == Command::IbpCheck
            || command == Command::EnergyCheck
            || command == Command::CarlemanVerify)
            && self.carleman.quadrature == Quadrature::Grid;
        if needs_grid {
            let grid = self.build_grid()?;
            if matches!(
                command,
                Command::Solve | Command::Stability | Command::RecoverTrace | Command::Farfield
            ) {
                self.solver
                    .validate(&grid)
                    .map_err(|e| invalid("solver", e))?;
            }
        }
        self.potential()?;
        self.compare_potential()?;
        match command {
            Command::GenPotential | Command::Stability => {
                self.ensemble
                    .validate()
                    .map_err(|e| invalid("ensemble", e))?;
            }
            _ => {}
        }
        if command == Command::Stability {
            let s = &self.stability;
            if s.pairs == 0 {
                return Err(invalid("stability", "pairs must be positive"));
            }
            if s.t_values.is_empty() || s.t_values.iter().any(|t| !(*t > 6.0)) {
                return Err(invalid(
                    "stability",
                    "t_values must be non-empty and each above 6",
                ));
            }
            for &t in &s.t_values {
                let g = self.grid_with_t(t)?;
                self.solver.validate(&g).map_err(|e| invalid("solver", e))?;
            }
        }
        if matches!(
            command,
            Command::CarlemanVerify | Command::IbpCheck | Command::EnergyCheck | Command::HsDecay
        ) {
            self.weight()?;
            let c = &self.carleman;
            if c.s_values.is_empty() || c.s_values.windows(2).any(|w| w[1] <= w[0]) {
                return Err(invalid(
                    "carleman",
                    "s_values must be non-empty and strictly ascending",
                ));
            }
            if c.suite_size == 0 || c.identity_suite == 0 {
                return Err(invalid("carleman", "suite sizes must be positive"));
            }
            if c.quadrature == Quadrature::Gauss {
                self.gauss_rule()?;
            } else if (self.grid.t_end - c.t_end).abs() > 1e-12 {
                return Err(invalid(
                    "carleman",
                    "grid quadrature needs grid.t_end equal to carleman.t_end",
                ));
            }
        }
        if command == Command::HsDecay {
            let d = &self.hs_decay;
            if d.s_values.is_empty()
                || d.s_values.windows(2).any(|w| w[1] <= w[0])
                || d.s_values[0] <= 0.0
            {
                return Err(invalid(
                    "hs_decay",
                    "s_values must be positive and strictly ascending",
                ));
            }
            let g = geometry_check(self.carleman.t_end, self.carleman.a)
                .map_err(|e| invalid("carleman", e))?;
            if !g.ok {
                return Err(invalid(
                    "carleman",
                    format!(
                        "geometry condition fails for T = {}, a = {}",
                        self.carleman.t_end, self.carleman.a
                    ),
                ));
            }
        }
        if command == Command::Farfield {
            let f = &self.farfield;
            if f.ks.is_empty() || f.ks.iter().any(|k| !(*k > 0.0)) {
                return Err(invalid("farfield", "ks must be positive"));
            }
            if !(0.0..1.0).contains(&f.window.taper_fraction) {
                return Err(invalid(
                    "farfield.window",
                    "taper_fraction must lie in [0, 1)",
                ));
            }
            let grid = self.build_grid()?;
            let nyquist = std::f64::consts::PI / grid.dt;
            if let Some(k) = f.ks.iter().find(|k| **k >= nyquist) {
                return Err(invalid(
                    "farfield",
                    format!("k = {k} beyond Nyquist {nyquist}"),
                ));
            }
        }
        if command == Command::Solve && self.solve.sigma_every == 0 {
            return Err(invalid("solve", "sigma_every must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    GenPotential,
    Solve,
    Stability,
    CarlemanVerify,
    IbpCheck,
    EnergyCheck,
    RecoverTrace,
    HsDecay,
    Farfield,
    Report,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::GenPotential => "gen-potential",
            Command::Solve => "solve",
            Command::Stability => "stability",
            Command::CarlemanVerify => "carleman-verify",
            Command::IbpCheck => "ibp-check",
            Command::EnergyCheck => "energy-check",
            Command::RecoverTrace => "recover-trace",
            Command::HsDecay => "hs-decay",
            Command::Farfield => "farfield",
            Command::Report => "report",
        }
    }
}
