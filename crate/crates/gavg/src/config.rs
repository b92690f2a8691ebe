//! TOML experiment configuration. Parsing, expression compilation and every
//! cross-field check happen here, before any solve starts.

use std::path::{Path, PathBuf};

use gavg_core::ergogen::{TableOptions, DEFAULT_ALPHAS, DEFAULT_STARTS};
use gavg_core::fnpde::{Axis, Boundary, GridSpec, TimeStep};
use gavg_core::scenario::{ControlPolicy, SimSettings};
use gavg_core::system::SystemSource;
use gavg_core::{parse_expr, Expr, GFunction, TwoScaleSystem};
use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::error::{AppError, AppResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Converge,
    GheatOracle,
    MaxOracle,
    Findim,
    Contraction,
    Khasminskii,
    Moments,
    Generator,
    Solve,
    Simulate,
}

impl ExperimentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::Converge => "converge",
            ExperimentKind::GheatOracle => "gheat_oracle",
            ExperimentKind::MaxOracle => "max_oracle",
            ExperimentKind::Findim => "findim",
            ExperimentKind::Contraction => "contraction",
            ExperimentKind::Khasminskii => "khasminskii",
            ExperimentKind::Moments => "moments",
            ExperimentKind::Generator => "generator",
            ExperimentKind::Solve => "solve",
            ExperimentKind::Simulate => "simulate",
        }
    }
}

fn default_threads() -> usize {
    1
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    seed: u64,
    #[serde(default = "default_threads")]
    threads: usize,
    out: Option<PathBuf>,
    system: RawSystem,
    g: RawG,
    grid: Option<RawGrid>,
    ladder: Option<RawLadder>,
    table: Option<RawTable>,
    #[serde(default)]
    experiment: RawExperiment,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSystem {
    b_tilde: String,
    b_bar: String,
    sigma_tilde: String,
    sigma_bar: String,
    h_tilde: Option<String>,
    h_bar: Option<String>,
    phi: String,
    epsilon: Option<f64>,
    eta: f64,
    lip: f64,
    growth: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawG {
    sigma_lo_sq: f64,
    sigma_hi_sq: f64,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAxis {
    lo: f64,
    hi: f64,
    nodes: usize,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpacing {
    half: f64,
    h: f64,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(untagged)]
enum RawFast {
    Nodes(RawAxis),
    Spacing(RawSpacing),
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
enum RawBoundary {
    #[default]
    Neumann,
    Quadratic,
}

fn default_snapshots() -> usize {
    20
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    slow: RawAxis,
    fast: Option<RawFast>,
    horizon: f64,
    dt: Option<f64>,
    #[serde(default)]
    boundary_margin: usize,
    #[serde(default = "default_snapshots")]
    snapshots: usize,
    #[serde(default)]
    boundary: RawBoundary,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLadder {
    epsilons: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTable {
    x_grid: Vec<f64>,
    directions: Option<usize>,
    horizon: Option<f64>,
    fast_h: Option<f64>,
    starts: Option<Vec<f64>>,
    alphas: Option<Vec<f64>>,
    cross_check: Option<f64>,
    load: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum RawPolicy {
    Constant { value: f64 },
    Schedule { times: Vec<f64>, values: Vec<f64> },
    BangBang { switch: String, lo: f64, hi: f64 },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FindimMode {
    /// Additive data split exactly; anything else is nested.
    #[default]
    Auto,
    /// Always solve one inner problem per strided slow node.
    Nested,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExperiment {
    kind: Option<ExperimentKind>,
    window: Option<f64>,
    t_min_fraction: Option<f64>,
    slices: Option<Vec<f64>>,
    tolerance: Option<f64>,
    oracle_tolerance: Option<f64>,
    dpp_delta: Option<usize>,
    drift: Option<f64>,
    vol: Option<f64>,
    oracle: Option<String>,
    averaged_slow: Option<RawAxis>,
    t1: Option<f64>,
    t2: Option<f64>,
    findim_phi: Option<String>,
    #[serde(default)]
    findim_mode: FindimMode,
    findim_stride: Option<usize>,
    #[serde(default)]
    probes: Vec<[f64; 3]>,
    property_trials: Option<usize>,
    paths: Option<usize>,
    dt_sim: Option<f64>,
    dt_sim_relative: Option<f64>,
    sim_horizon: Option<f64>,
    x0: Option<f64>,
    y0: Option<f64>,
    ya: Option<f64>,
    yb: Option<f64>,
    record_every: Option<usize>,
    t_checks: Option<Vec<f64>>,
    policy: Option<RawPolicy>,
    #[serde(default)]
    policies: Vec<RawPolicy>,
}

/// Generator table build parameters.
#[derive(Debug, Clone)]
pub struct TableConfig {
    pub x_grid: Vec<f64>,
    pub options: TableOptions,
    /// Read a previously written `table.bin` instead of building.
    pub load: Option<PathBuf>,
}

/// Error window: `t ≥ t_min_fraction·T`, `|x̃| ≤ half_width`, fast slices.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    pub t_min_fraction: f64,
    pub half_width: Option<f64>,
    pub slices: Vec<f64>,
}

impl Window {
    pub fn contains_t(&self, t: f64, horizon: f64) -> bool {
        t >= self.t_min_fraction * horizon - 1e-12 * horizon
    }

    pub fn contains_x(&self, x: f64) -> bool {
        self.half_width.is_none_or(|w| x.abs() <= w + 1e-9)
    }
}

#[derive(Debug, Clone)]
pub struct GheatConfig {
    pub drift: f64,
    pub vol: f64,
    /// Exact solution in `x1` (position) and `x2` (time).
    pub oracle: Option<Expr>,
}

#[derive(Debug, Clone)]
pub struct FindimConfig {
    pub t1: f64,
    pub t2: f64,
    /// Data `φ(a, b)` with `a = x1`, `b = x2`.
    pub phi: Expr,
    pub mode: FindimMode,
    pub stride: usize,
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub paths: usize,
    pub dt_sim: Option<f64>,
    /// Step as a multiple of ε; overrides `dt_sim` for ε-ladder runs.
    pub dt_sim_relative: Option<f64>,
    pub horizon: f64,
    pub x0: f64,
    pub y0: f64,
    pub ya: f64,
    pub yb: f64,
    pub record_every: usize,
    pub t_checks: Vec<f64>,
    pub policy: ControlPolicy,
    pub policies: Vec<ControlPolicy>,
}

impl SimConfig {
    pub fn dt_for(&self, eps: f64) -> AppResult<f64> {
        match (self.dt_sim_relative, self.dt_sim) {
            (Some(r), _) => Ok(r * eps),
            (None, Some(dt)) => Ok(dt),
            (None, None) => Err(AppError::config("experiment.dt_sim or experiment.dt_sim_relative is required")),
        }
    }

    pub fn settings(&self, eps: f64, seed: u64) -> AppResult<SimSettings> {
        Ok(SimSettings::new(self.paths, self.dt_for(eps)?, self.horizon, seed)
            .start(self.x0, self.y0)
            .record_every(self.record_every))
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    /// Kind declared in the file, if any.
    pub kind: Option<ExperimentKind>,
    pub seed: u64,
    pub threads: usize,
    pub out: Option<PathBuf>,
    /// Built at `system.epsilon` (or the first ladder value).
    pub system: TwoScaleSystem,
    pub grid: Option<GridSpec>,
    pub ladder: Vec<f64>,
    pub table: Option<TableConfig>,
    pub window: Window,
    /// Final-error threshold relative to the oscillation of φ.
    pub tolerance: f64,
    /// Absolute threshold for oracle comparisons.
    pub oracle_tolerance: Option<f64>,
    pub dpp_delta: usize,
    pub gheat: GheatConfig,
    pub averaged_slow: Option<Axis>,
    pub findim: Option<FindimConfig>,
    pub probes: Vec<[f64; 3]>,
    pub property_trials: usize,
    pub sim: SimConfig,
    pub config_sha256: String,
    has_epsilon: bool,
}

fn cfg_err(context: &str) -> impl Fn(gavg_core::Error) -> AppError + '_ {
    move |e| AppError::Config(format!("{context}: {e}"))
}

fn axis(raw: RawAxis, what: &str) -> AppResult<Axis> {
    Axis::new(raw.lo, raw.hi, raw.nodes).map_err(cfg_err(what))
}

fn policy(raw: &RawPolicy, g: &GFunction) -> AppResult<ControlPolicy> {
    let p = match raw {
        RawPolicy::Constant { value } => ControlPolicy::Constant(*value),
        RawPolicy::Schedule { times, values } => ControlPolicy::Schedule { times: times.clone(), values: values.clone() },
        RawPolicy::BangBang { switch, lo, hi } => ControlPolicy::BangBang {
            switch: parse_expr(switch, 1, 1).map_err(cfg_err("experiment.policy.switch"))?,
            lo: *lo,
            hi: *hi,
        },
    };
    p.validate(g).map_err(cfg_err("experiment.policy"))?;
    Ok(p)
}

fn strictly_increasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[0] < w[1])
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> AppResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> AppResult<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| AppError::Config(e.to_string()))?;
        let config_sha256 = format!("{:x}", Sha256::digest(text.as_bytes()));

        if raw.threads == 0 {
            return Err(AppError::config("threads must be at least 1"));
        }

        let ladder = match &raw.ladder {
            Some(l) => {
                if l.epsilons.is_empty() {
                    return Err(AppError::config("ladder.epsilons is empty"));
                }
                if l.epsilons.iter().any(|e| !(*e > 0.0 && *e < 1.0)) {
                    return Err(AppError::config("ladder.epsilons must lie in (0, 1)"));
                }
                if l.epsilons.windows(2).any(|w| !(w[0] > w[1])) {
                    return Err(AppError::config("ladder.epsilons must be strictly decreasing"));
                }
                l.epsilons.clone()
            }
            None => Vec::new(),
        };

        let g = GFunction::interval(raw.g.sigma_lo_sq, raw.g.sigma_hi_sq).map_err(cfg_err("g"))?;
        let s = &raw.system;
        let epsilon = s.epsilon.or(ladder.first().copied()).unwrap_or(0.5);
        let fields = [
            ("b_tilde", Some(&s.b_tilde)),
            ("b_bar", Some(&s.b_bar)),
            ("sigma_tilde", Some(&s.sigma_tilde)),
            ("sigma_bar", Some(&s.sigma_bar)),
            ("h_tilde", s.h_tilde.as_ref()),
            ("h_bar", s.h_bar.as_ref()),
            ("phi", Some(&s.phi)),
        ];
        for (name, text) in fields {
            if let Some(text) = text {
                parse_expr(text, 1, 1).map_err(|e| AppError::Config(format!("system.{name}: {e}")))?;
            }
        }
        let mut src = SystemSource::scalar(&s.b_tilde, &s.b_bar, &s.sigma_tilde, &s.sigma_bar, &s.phi)
            .epsilon(epsilon)
            .constants(s.eta, s.lip, s.growth);
        if s.h_tilde.is_some() || s.h_bar.is_some() {
            src = src.h(s.h_tilde.as_deref().unwrap_or("0"), s.h_bar.as_deref().unwrap_or("0"));
        }
        let system = src.build(g.clone()).map_err(cfg_err("system"))?;

        let grid = match &raw.grid {
            Some(rg) => {
                let slow = axis(rg.slow, "grid.slow")?;
                let fast = match rg.fast {
                    None => None,
                    Some(RawFast::Nodes(a)) => Some(axis(a, "grid.fast")?),
                    Some(RawFast::Spacing(sp)) => Some(Axis::symmetric(sp.half, sp.h).map_err(cfg_err("grid.fast"))?),
                };
                let boundary = match rg.boundary {
                    RawBoundary::Neumann => Boundary::Neumann,
                    RawBoundary::Quadratic => Boundary::QuadraticExtrapolation,
                };
                let mut spec = GridSpec::new(slow, fast, rg.horizon, rg.boundary_margin)
                    .and_then(|g| g.with_snapshots(rg.snapshots))
                    .map_err(cfg_err("grid"))?
                    .with_boundary(boundary);
                if let Some(dt) = rg.dt {
                    spec = spec.with_time_step(TimeStep::Fixed(dt)).map_err(cfg_err("grid.dt"))?;
                }
                spec.validate().map_err(cfg_err("grid"))?;
                Some(spec)
            }
            None => None,
        };

        let table = match &raw.table {
            Some(t) => {
                let mut options = TableOptions::new(t.directions.unwrap_or(32), t.horizon.unwrap_or(20.0));
                options.fast_h = t.fast_h.unwrap_or(options.fast_h);
                options.starts = t.starts.clone().unwrap_or_else(|| DEFAULT_STARTS.to_vec());
                options.alpha_ladder = t.alphas.clone().unwrap_or_else(|| DEFAULT_ALPHAS.to_vec());
                options.cross_check_fraction = t.cross_check.unwrap_or(options.cross_check_fraction);
                options.seed = raw.seed;
                if t.x_grid.len() < 2 || !strictly_increasing(&t.x_grid) {
                    return Err(AppError::config("table.x_grid needs two or more strictly increasing nodes"));
                }
                if options.n_directions < 8 || options.n_directions % 4 != 0 {
                    return Err(AppError::config("table.directions must be a multiple of 4 and at least 8"));
                }
                if !(options.horizon > 0.0 && options.fast_h > 0.0) {
                    return Err(AppError::config("table.horizon and table.fast_h must be positive"));
                }
                if options.starts.is_empty() || options.alpha_ladder.len() < 2 {
                    return Err(AppError::config("table.starts must be nonempty and table.alphas needs two values"));
                }
                if options.alpha_ladder.iter().any(|a| !(*a > 0.0)) || options.alpha_ladder.windows(2).any(|w| !(w[0] > w[1])) {
                    return Err(AppError::config("table.alphas must be positive and strictly decreasing"));
                }
                if !(0.0..=1.0).contains(&options.cross_check_fraction) {
                    return Err(AppError::config("table.cross_check must lie in [0, 1]"));
                }
                Some(TableConfig { x_grid: t.x_grid.clone(), options, load: t.load.clone() })
            }
            None => None,
        };

        let e = &raw.experiment;
        let window = Window {
            t_min_fraction: e.t_min_fraction.unwrap_or(0.2),
            half_width: e.window,
            slices: e.slices.clone().unwrap_or_else(|| vec![0.0]),
        };
        if !(0.0..1.0).contains(&window.t_min_fraction) {
            return Err(AppError::config("experiment.t_min_fraction must lie in [0, 1)"));
        }
        if window.half_width.is_some_and(|w| !(w > 0.0)) || window.slices.is_empty() {
            return Err(AppError::config("experiment.window must be positive and experiment.slices nonempty"));
        }

        let gheat = GheatConfig {
            drift: e.drift.unwrap_or(0.0),
            vol: e.vol.unwrap_or(1.0),
            oracle: match &e.oracle {
                Some(o) => Some(parse_expr(o, 2, 0).map_err(cfg_err("experiment.oracle"))?),
                None => None,
            },
        };

        let findim = match (e.t1, e.t2, &e.findim_phi) {
            (Some(t1), Some(t2), Some(phi)) => {
                if !(t1 > 0.0 && t1 < t2) {
                    return Err(AppError::config("findim needs 0 < t1 < t2"));
                }
                let stride = e.findim_stride.unwrap_or(10);
                if stride == 0 {
                    return Err(AppError::config("experiment.findim_stride must be positive"));
                }
                let phi = parse_expr(phi, 2, 0).map_err(cfg_err("experiment.findim_phi"))?;
                Some(FindimConfig { t1, t2, phi, mode: e.findim_mode, stride })
            }
            (None, None, None) => None,
            _ => return Err(AppError::config("findim needs t1, t2 and findim_phi together")),
        };

        let policy_main = match &e.policy {
            Some(p) => policy(p, &g)?,
            None => ControlPolicy::Constant(raw.g.sigma_hi_sq),
        };
        let policies = e.policies.iter().map(|p| policy(p, &g)).collect::<AppResult<Vec<_>>>()?;
        let sim = SimConfig {
            paths: e.paths.unwrap_or(10_000),
            dt_sim: e.dt_sim,
            dt_sim_relative: e.dt_sim_relative,
            horizon: e.sim_horizon.unwrap_or(1.0),
            x0: e.x0.unwrap_or(0.0),
            y0: e.y0.unwrap_or(0.0),
            ya: e.ya.unwrap_or(-1.0),
            yb: e.yb.unwrap_or(1.0),
            record_every: e.record_every.unwrap_or(1),
            t_checks: e.t_checks.clone().unwrap_or_default(),
            policy: policy_main,
            policies,
        };
        if sim.paths == 0 || sim.record_every == 0 || !(sim.horizon > 0.0) {
            return Err(AppError::config("paths, record_every and sim_horizon must be positive"));
        }
        if sim.dt_sim.is_some_and(|d| !(d > 0.0)) || sim.dt_sim_relative.is_some_and(|d| !(d > 0.0)) {
            return Err(AppError::config("simulation steps must be positive"));
        }

        let averaged_slow = match e.averaged_slow {
            Some(a) => Some(axis(a, "experiment.averaged_slow")?),
            None => None,
        };
        let tolerance = e.tolerance.unwrap_or(0.02);
        if !(tolerance > 0.0) || e.oracle_tolerance.is_some_and(|t| !(t > 0.0)) {
            return Err(AppError::config("tolerances must be positive"));
        }
        if e.probes.iter().flatten().any(|v| !v.is_finite()) {
            return Err(AppError::config("experiment.probes must be finite"));
        }

        Ok(ExperimentConfig {
            kind: e.kind,
            seed: raw.seed,
            threads: raw.threads,
            out: raw.out,
            system,
            grid,
            ladder,
            table,
            window,
            tolerance,
            oracle_tolerance: e.oracle_tolerance,
            dpp_delta: e.dpp_delta.unwrap_or(10),
            gheat,
            averaged_slow,
            findim,
            probes: e.probes.clone(),
            property_trials: e.property_trials.unwrap_or(100),
            sim,
            config_sha256,
            has_epsilon: s.epsilon.is_some(),
        })
    }

    /// Replaces the seed everywhere it is consumed.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        if let Some(t) = &mut self.table {
            t.options.seed = seed;
        }
        self
    }

    pub fn grid(&self) -> AppResult<&GridSpec> {
        self.grid.as_ref().ok_or_else(|| AppError::config("a [grid] section is required"))
    }

    pub fn two_scale_grid(&self) -> AppResult<&GridSpec> {
        let g = self.grid()?;
        match g.fast {
            Some(fast) => {
                if let Some(y) = self.window.slices.iter().find(|y| **y < fast.lo || **y > fast.hi) {
                    return Err(AppError::Config(format!("slice {y} lies outside grid.fast")));
                }
                Ok(g)
            }
            None => Err(AppError::config("grid.fast is required")),
        }
    }

    pub fn table_config(&self) -> AppResult<&TableConfig> {
        self.table.as_ref().ok_or_else(|| AppError::config("a [table] section is required"))
    }

    fn require_ladder(&self) -> AppResult<()> {
        if self.ladder.is_empty() {
            return Err(AppError::config("a [ladder] section is required"));
        }
        Ok(())
    }

    fn check_table_covers(&self, lo: f64, hi: f64) -> AppResult<()> {
        let t = self.table_config()?;
        if t.load.is_none() && (lo < t.x_grid[0] || hi > t.x_grid[t.x_grid.len() - 1]) {
            return Err(AppError::Config(format!("table.x_grid does not cover [{lo}, {hi}]")));
        }
        Ok(())
    }

    /// Everything `kind` needs is present and consistent.
    pub fn validate_for(&self, kind: ExperimentKind) -> AppResult<()> {
        use ExperimentKind::*;
        match kind {
            Converge | MaxOracle | Findim => {
                let g = self.two_scale_grid()?;
                self.require_ladder()?;
                self.check_table_covers(g.slow.lo, g.slow.hi)?;
                if let Some(a) = self.averaged_slow {
                    self.check_table_covers(a.lo, a.hi)?;
                }
                if kind == Findim && self.findim.is_none() {
                    return Err(AppError::config("findim needs experiment.t1, t2 and findim_phi"));
                }
            }
            GheatOracle => {
                if self.grid()?.fast.is_some() {
                    return Err(AppError::config("the G-heat solve takes no grid.fast"));
                }
                if self.gheat.oracle.is_none() {
                    return Err(AppError::config("experiment.oracle is required"));
                }
            }
            Solve => {
                self.two_scale_grid()?;
                if !self.has_epsilon {
                    return Err(AppError::config("system.epsilon is required"));
                }
            }
            Generator => {
                if self.table.is_none() && self.probes.is_empty() {
                    return Err(AppError::config("generator needs a [table] section or experiment.probes"));
                }
            }
            Contraction => {
                self.sim.dt_for(1.0)?;
                if self.sim.t_checks.is_empty() {
                    return Err(AppError::config("experiment.t_checks is required"));
                }
            }
            Khasminskii | Moments => {
                self.require_ladder()?;
                self.sim.dt_for(self.ladder[0])?;
            }
            Simulate => {
                self.sim.dt_for(self.system.epsilon)?;
            }
        }
        Ok(())
    }
}
