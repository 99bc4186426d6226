//! Experiment configuration files.
//!
//! A config is a TOML document (`key = value` lines grouped in `[sections]`).
//! Relative paths inside it resolve against the directory holding the file.
//! A run manifest written by [`crate::run`] can be loaded in place of a
//! config: its `config` object is the fully resolved configuration.

use std::fmt;
use std::path::{Path, PathBuf};

use kerr_ising_core::dynamics::EvolutionConfig;
use kerr_ising_core::model::{default_cutoff, AdjacencyMatrix, ModelParams, SpinConfig};
use kerr_ising_core::stats::Signal;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Spectrum,
    LnSweep,
    SteadyState,
    Trajectories,
    Classical,
    Stats,
    Compare,
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Kind::Spectrum => "spectrum",
            Kind::LnSweep => "ln-sweep",
            Kind::SteadyState => "steady-state",
            Kind::Trajectories => "trajectories",
            Kind::Classical => "classical",
            Kind::Stats => "stats",
            Kind::Compare => "compare",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Option<Kind>,
    #[serde(default)]
    pub seed: u64,
    pub model: Option<ModelSection>,
    pub grid: Option<GridSection>,
    pub evolution: Option<EvolutionSection>,
    pub ensemble: Option<EnsembleSection>,
    pub spectrum: Option<SpectrumSection>,
    pub sweep: Option<SweepSection>,
    pub stats: Option<StatsSection>,
    pub compare: Option<CompareSection>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    #[serde(default = "two")]
    pub n_modes: usize,
    /// Fock levels per mode; chosen from `chi` and `epsilon` when absent.
    pub cutoff: Option<usize>,
    pub chi: f64,
    #[serde(default)]
    pub delta: f64,
    #[serde(default)]
    pub epsilon: f64,
    #[serde(default)]
    pub eta: f64,
    #[serde(default)]
    pub gamma: f64,
    #[serde(default)]
    pub nbar: f64,
    /// `pair`, `uncoupled`, or a path to an edge-list file.
    #[serde(default = "pair")]
    pub graph: String,
}

fn two() -> usize {
    2
}

fn pair() -> String {
    "pair".into()
}

/// Explicit values or `{ start, stop, points }` (inclusive, evenly spaced).
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    Values(Vec<f64>),
    Range { start: f64, stop: f64, points: usize },
}

impl Grid {
    pub fn values(&self) -> Vec<f64> {
        match *self {
            Grid::Values(ref v) => v.clone(),
            Grid::Range { start, stop, points } => match points {
                0 => Vec::new(),
                1 => vec![start],
                n => (0..n)
                    .map(|k| {
                        let f = k as f64 / (n - 1) as f64;
                        start * (1.0 - f) + stop * f
                    })
                    .collect(),
            },
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub epsilon: Option<Grid>,
    pub eta: Option<Grid>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolutionSection {
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_t_final")]
    pub t_final: f64,
    /// Spacing of stored samples; must be a whole number of steps.
    #[serde(default = "default_store_dt")]
    pub store_dt: f64,
    #[serde(default)]
    pub bridge_levels: u32,
    /// Step of the unconditional master-equation check.
    #[serde(default = "default_master_dt")]
    pub master_dt: f64,
}

fn default_dt() -> f64 {
    5e-4
}
fn default_t_final() -> f64 {
    4.0
}
fn default_store_dt() -> f64 {
    0.05
}
fn default_master_dt() -> f64 {
    5e-3
}

impl Default for EvolutionSection {
    fn default() -> Self {
        Self {
            dt: default_dt(),
            t_final: default_t_final(),
            store_dt: default_store_dt(),
            bridge_levels: 0,
            master_dt: default_master_dt(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SignalChoice {
    #[default]
    Denoised,
    Raw,
}

impl From<SignalChoice> for Signal {
    fn from(s: SignalChoice) -> Self {
        match s {
            SignalChoice::Denoised => Signal::Denoised,
            SignalChoice::Raw => Signal::RawCurrent,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSection {
    #[serde(default = "default_m")]
    pub m: usize,
    /// Ensemble size used under `--full`.
    #[serde(default = "default_m_full")]
    pub m_full: usize,
    #[serde(default)]
    pub signal: SignalChoice,
    /// Spin relation counted as correct; antiferromagnetic when absent.
    pub target: Option<Vec<i8>>,
    #[serde(default = "yes")]
    pub write_trajectories: bool,
    /// Also integrate the master equation and compare ensemble means.
    #[serde(default)]
    pub master_check: bool,
}

fn default_m() -> usize {
    200
}
fn default_m_full() -> usize {
    2000
}
fn yes() -> bool {
    true
}

impl Default for EnsembleSection {
    fn default() -> Self {
        Self {
            m: default_m(),
            m_full: default_m_full(),
            signal: SignalChoice::default(),
            target: None,
            write_trajectories: true,
            master_check: false,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumSection {
    #[serde(default = "default_levels")]
    pub levels: usize,
    /// Write ground-state degeneracy, LN and the joint photon distribution.
    #[serde(default)]
    pub ground_details: bool,
}

fn default_levels() -> usize {
    8
}

impl Default for SpectrumSection {
    fn default() -> Self {
        Self {
            levels: default_levels(),
            ground_details: false,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum StateChoice {
    #[default]
    Ground,
    Steady,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    #[serde(default)]
    pub state: StateChoice,
    #[serde(default = "default_tol")]
    pub tol: f64,
}

fn default_tol() -> f64 {
    1e-8
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            state: StateChoice::default(),
            tol: default_tol(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StatsSection {
    /// Quantum or classical trajectory CSV.
    pub input: PathBuf,
    #[serde(default)]
    pub signal: SignalChoice,
    pub target: Option<Vec<i8>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareSection {
    pub quantum: PathBuf,
    pub classical: PathBuf,
    #[serde(default)]
    pub signal: SignalChoice,
    pub target: Option<Vec<i8>>,
}

/// Command-line overrides applied on top of a file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub experiment: Option<Kind>,
    pub seed: Option<u64>,
    pub full: bool,
    pub state: Option<StateChoice>,
    pub signal: Option<SignalChoice>,
}

fn config_error(source: &str, msg: impl fmt::Display) -> CliError {
    CliError::Config(format!("{source}: {msg}"))
}

impl ExperimentConfig {
    /// Reads a config or a run manifest and resolves relative paths.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let source = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|e| config_error(&source, e))?;
        let mut cfg = if path.extension().is_some_and(|e| e == "json") {
            let v: serde_json::Value = serde_json::from_str(&text).map_err(|e| config_error(&source, e))?;
            let inner = v.get("config").cloned().unwrap_or(v);
            serde_json::from_value::<Self>(inner).map_err(|e| config_error(&source, e))?
        } else {
            Self::parse(&text, &source)?
        };
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let base = std::fs::canonicalize(&base).unwrap_or(base);
        cfg.resolve_paths(&base);
        Ok(cfg)
    }

    pub fn parse(text: &str, source: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| config_error(source, e.to_string().trim_end()))
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(m) = self.model.as_mut() {
            if !matches!(m.graph.as_str(), "pair" | "uncoupled") {
                let mut p = PathBuf::from(&m.graph);
                fix(&mut p);
                m.graph = p.display().to_string();
            }
        }
        if let Some(s) = self.stats.as_mut() {
            fix(&mut s.input);
        }
        if let Some(c) = self.compare.as_mut() {
            fix(&mut c.quantum);
            fix(&mut c.classical);
        }
    }

    /// Applies overrides and fills defaulted sections, so the result
    /// records every setting the run used.
    pub fn resolve(mut self, o: &Overrides) -> Result<Self, CliError> {
        match (o.experiment, self.experiment) {
            (Some(k), Some(f)) if k != f => {
                return Err(CliError::Config(format!(
                    "field `experiment`: config is a `{f}` experiment, not `{k}`"
                )))
            }
            (Some(k), _) => self.experiment = Some(k),
            (None, None) => return Err(CliError::Config("field `experiment` is required".into())),
            _ => {}
        }
        if let Some(seed) = o.seed {
            self.seed = seed;
        }
        let kind = self.kind();
        if matches!(kind, Kind::Trajectories | Kind::Classical) {
            let e = self.ensemble.get_or_insert_with(Default::default);
            if o.full {
                e.m = e.m_full;
            }
            if let Some(s) = o.signal {
                e.signal = s;
            }
            self.evolution.get_or_insert_with(Default::default);
        }
        if let (Some(s), Some(st)) = (o.signal, self.stats.as_mut()) {
            st.signal = s;
        }
        if let (Some(s), Some(c)) = (o.signal, self.compare.as_mut()) {
            c.signal = s;
        }
        if kind == Kind::LnSweep {
            let sw = self.sweep.get_or_insert_with(Default::default);
            if let Some(s) = o.state {
                sw.state = s;
            }
        } else if o.state.is_some() {
            return Err(CliError::Config("`--state` only applies to ln-sweep".into()));
        }
        if kind == Kind::SteadyState {
            self.sweep.get_or_insert_with(Default::default);
        }
        if kind == Kind::Spectrum {
            self.spectrum.get_or_insert_with(Default::default);
        }
        if let Some(m) = self.model.as_mut() {
            if m.cutoff.is_none() {
                m.cutoff = Some(default_cutoff(m.chi.max(f64::MIN_POSITIVE), m.epsilon));
            }
        }
        self.validate()?;
        Ok(self)
    }

    pub fn kind(&self) -> Kind {
        self.experiment.expect("experiment resolved")
    }

    fn validate(&self) -> Result<(), CliError> {
        let bad = |field: &str, msg: String| Err(CliError::Config(format!("field `{field}`: {msg}")));
        let kind = self.kind();
        let needs_model = !matches!(kind, Kind::Stats | Kind::Compare);
        if needs_model && self.model.is_none() {
            return bad("model", format!("a [model] section is required for `{kind}`"));
        }
        if let Some(m) = &self.model {
            if m.n_modes == 0 {
                return bad("model.n_modes", "must be >= 1".into());
            }
            if !(m.chi > 0.0) {
                return bad("model.chi", format!("must be > 0, got {}", m.chi));
            }
            if m.epsilon < 0.0 {
                return bad("model.epsilon", "pump amplitude must be >= 0".into());
            }
            if matches!(kind, Kind::Trajectories | Kind::Classical | Kind::SteadyState) && !(m.gamma > 0.0) {
                return bad("model.gamma", format!("`{kind}` needs gamma > 0"));
            }
            if matches!(kind, Kind::Trajectories | Kind::Classical) && m.n_modes != 2 {
                return bad("model.n_modes", "ensemble statistics need exactly 2 modes".into());
            }
        }
        if let Some(g) = &self.grid {
            for (name, grid) in [("grid.epsilon", &g.epsilon), ("grid.eta", &g.eta)] {
                if let Some(grid) = grid {
                    let v = grid.values();
                    if v.is_empty() {
                        return bad(name, "grid is empty".into());
                    }
                    if v.iter().any(|x| !x.is_finite()) {
                        return bad(name, "grid values must be finite".into());
                    }
                }
            }
            if g.epsilon.as_ref().is_some_and(|e| e.values().iter().any(|&x| x < 0.0)) {
                return bad("grid.epsilon", "pump amplitudes must be >= 0".into());
            }
        }
        if let Some(e) = &self.ensemble {
            if e.m < 1 {
                return bad("ensemble.m", "must be >= 1".into());
            }
        }
        if let Some(ev) = &self.evolution {
            if matches!(kind, Kind::Trajectories | Kind::Classical) {
                self.store_stride(ev.dt, ev.store_dt)
                    .map_err(|m| CliError::Config(format!("field `evolution.store_dt`: {m}")))?;
                EvolutionConfig::new(ev.dt, ev.t_final, 1, 0)
                    .map_err(|e| CliError::Config(format!("[evolution]: {e}")))?;
            }
        }
        if let Some(s) = &self.spectrum {
            if s.levels == 0 {
                return bad("spectrum.levels", "must be >= 1".into());
            }
        }
        for (field, t) in [
            ("ensemble.target", self.ensemble.as_ref().and_then(|e| e.target.clone())),
            ("stats.target", self.stats.as_ref().and_then(|e| e.target.clone())),
            ("compare.target", self.compare.as_ref().and_then(|e| e.target.clone())),
        ] {
            if let Some(t) = t {
                SpinConfig::new(t).map_err(|e| CliError::Config(format!("field `{field}`: {e}")))?;
            }
        }
        match kind {
            Kind::Stats if self.stats.is_none() => bad("stats", "a [stats] section with `input` is required".into()),
            Kind::Compare if self.compare.is_none() => bad(
                "compare",
                "a [compare] section with `quantum` and `classical` is required".into(),
            ),
            _ => Ok(()),
        }
    }

    fn store_stride(&self, dt: f64, store_dt: f64) -> Result<usize, String> {
        let ratio = store_dt / dt;
        let stride = ratio.round();
        if !(stride >= 1.0) || (ratio - stride).abs() > 1e-6 * stride {
            return Err(format!("{store_dt} is not a whole number of steps of {dt}"));
        }
        Ok(stride as usize)
    }

    pub fn model_section(&self) -> &ModelSection {
        self.model.as_ref().expect("validated")
    }

    /// Model parameters at the configured point.
    pub fn params(&self) -> Result<ModelParams, CliError> {
        let m = self.model_section();
        let cutoff = m.cutoff.expect("resolved");
        let p = ModelParams::closed(m.n_modes, cutoff, m.chi, m.delta, m.epsilon, m.eta)
            .and_then(|p| p.with_damping(m.gamma, m.nbar))
            .map_err(|e| CliError::Config(format!("[model]: {e}")))?;
        Ok(p)
    }

    pub fn adjacency(&self) -> Result<AdjacencyMatrix, CliError> {
        let m = self.model_section();
        let s = match m.graph.as_str() {
            "pair" => AdjacencyMatrix::pair(),
            "uncoupled" => AdjacencyMatrix::uncoupled(m.n_modes),
            path => AdjacencyMatrix::from_edge_list_file(Path::new(path), Some(m.n_modes))
                .map_err(|e| CliError::Config(e.to_string()))?,
        };
        if s.n() != m.n_modes {
            return Err(CliError::Config(format!(
                "field `model.graph`: graph has {} nodes, model has {} modes",
                s.n(),
                m.n_modes
            )));
        }
        Ok(s)
    }

    /// Simulation settings for ensembles.
    pub fn evolution_config(&self) -> Result<EvolutionConfig, CliError> {
        let ev = self.evolution.clone().unwrap_or_default();
        let stride = self.store_stride(ev.dt, ev.store_dt).map_err(CliError::Config)?;
        let mut cfg =
            EvolutionConfig::new(ev.dt, ev.t_final, stride, self.seed).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.bridge_levels = ev.bridge_levels;
        Ok(cfg)
    }

    /// Master-equation settings on the same storage grid as the ensemble.
    pub fn master_config(&self) -> Result<EvolutionConfig, CliError> {
        let ev = self.evolution.clone().unwrap_or_default();
        let stride = self
            .store_stride(ev.master_dt, ev.store_dt)
            .map_err(|m| CliError::Config(format!("field `evolution.master_dt`: {m}")))?;
        EvolutionConfig::new(ev.master_dt, ev.t_final, stride, self.seed).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn ensemble_section(&self) -> EnsembleSection {
        self.ensemble.clone().unwrap_or_default()
    }

    pub fn epsilon_grid(&self) -> Vec<f64> {
        self.grid
            .as_ref()
            .and_then(|g| g.epsilon.as_ref())
            .map(Grid::values)
            .unwrap_or_else(|| vec![self.model_section().epsilon])
    }

    pub fn eta_grid(&self) -> Vec<f64> {
        self.grid
            .as_ref()
            .and_then(|g| g.eta.as_ref())
            .map(Grid::values)
            .unwrap_or_else(|| vec![self.model_section().eta])
    }
}

/// Antiferromagnetic alternation `+1, -1, +1, ...` unless given.
pub fn target_or_default(target: Option<Vec<i8>>, n: usize) -> Result<SpinConfig, CliError> {
    let spins = target.unwrap_or_else(|| (0..n).map(|i| if i % 2 == 0 { 1 } else { -1 }).collect());
    SpinConfig::new(spins).map_err(|e| CliError::Config(format!("target: {e}")))
}
