//! Experiment definitions, the registry of named scenarios, and the drivers
//! for limit runs, confined runs and sweeps over the confinement level k.

use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::confinement::{snap_buffer, BasePotential, Exterior, Kernel, PotentialField, Setting};
use crate::diagnostics::{l2_norm_outside, mass_outside, Diagnostics, DiagnosticsRecord, Recorder, StepAudit};
use crate::error::{config_err, ConfigError, Error, Result};
use crate::fields::DENSITY_FLOOR;
use crate::grid::{Grid, Interval, SubDomain};
use crate::initdata::{
    dirac_boundary_placement_1d, sample_ic, sample_ic_with_potential, transport_mass_2d,
    InitialKind, InitialSpec, TransportMethod,
};
use crate::nonlinearity::{DiffusionKind, Nonlinearity};
use crate::solver::{Problem, Solver, SolverParams, State};

fn default_dt() -> f64 {
    1e-5
}
fn default_cfl() -> f64 {
    0.4
}
fn default_theta() -> f64 {
    1.5
}
fn default_floor() -> f64 {
    DENSITY_FLOOR
}
fn default_true() -> bool {
    true
}

/// Everything needed to reproduce one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub dim: usize,
    /// The bounded domain Ω.
    pub omega: Vec<Interval>,
    /// The computational box B of the confined problem.
    pub domain: Vec<Interval>,
    pub dx: f64,
    #[serde(default = "default_dt")]
    pub dt_init: f64,
    pub t_final: f64,
    /// Spacing of the observation times 0, Δ, 2Δ, …, t_final.
    pub observe_every: f64,
    pub setting: Setting,
    #[serde(default)]
    pub k_list: Vec<f64>,
    pub diffusion: DiffusionKind,
    pub potential: BasePotential,
    #[serde(default)]
    pub kernel: Kernel,
    pub initial: InitialSpec,
    /// How exterior initial mass reaches ∂Ω for the 2D limit problem.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transport: Option<TransportMethod>,
    #[serde(default)]
    pub exterior: Exterior,
    /// Slit of the Moses potential; without it the exterior is k + |x|².
    #[serde(default)]
    pub slit: bool,
    /// Round the buffer width 1/k to a whole number of cells.
    #[serde(default = "default_true")]
    pub snap_buffer: bool,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    #[serde(default = "default_theta")]
    pub theta: f64,
    #[serde(default = "default_floor")]
    pub floor: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

fn iv(lo: f64, hi: f64) -> Interval {
    Interval::new(lo, hi)
}

fn ks(lo: u32, hi: u32) -> Vec<f64> {
    (lo..=hi).map(f64::from).collect()
}

impl ScenarioConfig {
    /// Shared 1D layout: Ω = [−1, 1], B = [−4, 4], dx = 0.01, observations
    /// every 0.01 up to 0.2.
    fn base_1d(name: &str) -> Self {
        ScenarioConfig {
            name: name.into(),
            dim: 1,
            omega: vec![iv(-1.0, 1.0)],
            domain: vec![iv(-4.0, 4.0)],
            dx: 0.01,
            dt_init: 1e-5,
            t_final: 0.2,
            observe_every: 0.01,
            setting: Setting::L2,
            k_list: ks(1, 10),
            diffusion: DiffusionKind::Linear,
            potential: BasePotential::Zero,
            kernel: Kernel::Zero,
            initial: InitialSpec::new(InitialKind::Constant {
                value: 1.0,
                region: Some(vec![iv(-1.0, 1.0)]),
            }),
            transport: None,
            exterior: Exterior::Radial,
            slit: false,
            snap_buffer: true,
            cfl: 0.4,
            theta: 1.5,
            floor: DENSITY_FLOOR,
            output: None,
        }
    }

    /// Shared 2D layout: Ω = [−1, 1]², B = [−4, 4]², dx = 0.1, t_final 0.01.
    fn base_2d(name: &str) -> Self {
        ScenarioConfig {
            dim: 2,
            omega: vec![iv(-1.0, 1.0), iv(-1.0, 1.0)],
            domain: vec![iv(-4.0, 4.0), iv(-4.0, 4.0)],
            dx: 0.1,
            t_final: 0.01,
            observe_every: 0.001,
            transport: Some(TransportMethod::Perpendicular),
            ..Self::base_1d(name)
        }
    }

    pub fn law(&self) -> Result<Nonlinearity> {
        Nonlinearity::new(self.diffusion)
    }

    pub fn solver_params(&self) -> SolverParams {
        SolverParams {
            cfl: self.cfl,
            theta: self.theta,
            floor: self.floor,
            dt_init: self.dt_init,
        }
    }

    pub fn box_grid(&self) -> Result<Grid> {
        Grid::new(&self.domain, self.dx)
    }

    pub fn omega_grid(&self) -> Result<Grid> {
        Grid::new(&self.omega, self.dx)
    }

    /// 0, Δ, 2Δ, …, t_final.
    pub fn observation_times(&self) -> Vec<f64> {
        let n = (self.t_final / self.observe_every).round() as usize;
        let mut t: Vec<f64> = (0..=n).map(|i| i as f64 * self.observe_every).collect();
        if let Some(last) = t.last_mut() {
            *last = self.t_final;
        }
        t
    }

    /// Buffer width used at level k and whether it was snapped.
    pub fn buffer_for(&self, k: f64) -> (f64, bool) {
        if self.snap_buffer {
            snap_buffer(k, self.dx)
        } else {
            (1.0 / k, false)
        }
    }

    pub fn transport_method(&self) -> TransportMethod {
        self.transport.unwrap_or(TransportMethod::Perpendicular)
    }

    /// Checks shapes, geometry and parameter ranges.
    pub fn validate(&self) -> Result<()> {
        let err = |key: &str, msg: String| -> Result<()> {
            Err(Error::Config(ConfigError::at_key(key, msg)))
        };
        if self.dim != 1 && self.dim != 2 {
            return err("dim", format!("must be 1 or 2, got {}", self.dim));
        }
        if self.omega.len() != self.dim {
            return err("omega", format!("needs {} intervals", self.dim));
        }
        if self.domain.len() != self.dim {
            return err("domain", format!("needs {} intervals", self.dim));
        }
        for (name, v) in [("dt_init", self.dt_init), ("t_final", self.t_final), ("observe_every", self.observe_every)] {
            if !(v > 0.0) || !v.is_finite() {
                return err(name, format!("must be positive, got {v}"));
            }
        }
        let steps = self.t_final / self.observe_every;
        if (steps - steps.round()).abs() > 1e-9 * steps.max(1.0) {
            return err(
                "observe_every",
                format!("{} does not divide t_final = {}", self.observe_every, self.t_final),
            );
        }
        let wrap = |key: &str, e: Error| match e {
            Error::Config(c) => Error::Config(ConfigError::at_key(key, c.to_string())),
            other => other,
        };
        let b = self.box_grid().map_err(|e| wrap("domain", e))?;
        self.omega_grid().map_err(|e| wrap("omega", e))?;
        b.restrict(&self.omega).map_err(|e| wrap("omega", e))?;
        self.law().map_err(|e| wrap("diffusion", e))?;
        Problem::new(
            b.clone(),
            self.law()?,
            PotentialField::from_values(Setting::Plain, None, vec![0.0; b.len()])?,
            self.kernel,
            self.solver_params(),
        )
        .map_err(|e| wrap("solver", e))?;
        for &k in &self.k_list {
            if !(k >= 1.0) || !k.is_finite() {
                return err("k_list", format!("levels must be finite and >= 1, got {k}"));
            }
            if !self.snap_buffer && matches!(self.setting, Setting::L2 | Setting::FreeEnergy) {
                let (_, off) = snap_buffer(k, self.dx);
                if off {
                    return err(
                        "k_list",
                        format!("buffer width 1/{k} is not a multiple of dx = {}", self.dx),
                    );
                }
            }
        }
        if self.setting == Setting::Moses && self.dim != 2 {
            return err("setting", "the slit confinement needs dim = 2".into());
        }
        let g = self.box_grid()?;
        let probe = match &self.initial.profile {
            InitialKind::Gibbs => Ok(()),
            _ => sample_ic(&self.initial, &g).map(|_| ()),
        };
        probe.map_err(|e| wrap("initial", e))?;
        Ok(())
    }
}

/// Names of all registered scenarios.
pub fn scenario_names() -> Vec<&'static str> {
    vec![
        "fig2_linear",
        "fig3_nonlinear_local",
        "fig3_degenerate",
        "fig4_nonlinear_nonlocal",
        "fig5_comparison",
        "fig5_comparison_local",
        "fig5_comparison_nonlocal",
        "fig6_exterior_gaussian",
        "fig8_transport_2d",
        "fig8_transport_2d_asym_data",
        "fig8_transport_2d_asym_potential",
        "fig8_transport_2d_radial_transport",
        "fig9_moses",
        "fig9_moses_text_levels",
        "fig9_simple",
    ]
}

/// Looks up a registered scenario by name.
pub fn scenario(name: &str) -> Result<ScenarioConfig> {
    let base = ScenarioConfig::base_1d(name);
    let quad = DiffusionKind::Quadratic { beta: 0.49 };
    let fig5 = ScenarioConfig {
        initial: InitialSpec::new(InitialKind::Indicator {
            boxes: vec![vec![iv(-1.0, -0.7)], vec![iv(0.7, 1.0)]],
        }),
        ..base.clone()
    };
    let fig8 = ScenarioConfig {
        setting: Setting::FreeEnergy,
        k_list: vec![25.0],
        initial: InitialSpec::normalized(InitialKind::Volcano),
        ..ScenarioConfig::base_2d(name)
    };
    let fig9 = ScenarioConfig {
        setting: Setting::Moses,
        slit: true,
        k_list: vec![5.0, 20.0, 50.0, 100.0],
        initial: InitialSpec::normalized(InitialKind::Exponential { rate: 0.5 }),
        ..ScenarioConfig::base_2d(name)
    };
    let fig3 = ScenarioConfig {
        dx: 0.005,
        diffusion: quad,
        potential: BasePotential::fig3(),
        initial: InitialSpec::new(InitialKind::Indicator {
            boxes: vec![vec![iv(0.1, 0.3)]],
        }),
        ..base.clone()
    };
    let cfg = match name {
        "fig2_linear" => ScenarioConfig {
            potential: BasePotential::Quadratic { coeff: 1.5 },
            ..base
        },
        "fig3_nonlinear_local" => fig3,
        "fig3_degenerate" => ScenarioConfig {
            diffusion: DiffusionKind::Degenerate { beta: 0.49, m: 2.0 },
            ..fig3
        },
        "fig4_nonlinear_nonlocal" => ScenarioConfig {
            diffusion: quad,
            potential: BasePotential::fig4(),
            kernel: Kernel::Hat,
            k_list: ks(1, 9),
            ..base
        },
        "fig5_comparison" => fig5,
        "fig5_comparison_local" => ScenarioConfig {
            diffusion: quad,
            ..fig5
        },
        "fig5_comparison_nonlocal" => ScenarioConfig {
            diffusion: quad,
            kernel: Kernel::Hat,
            ..fig5
        },
        "fig6_exterior_gaussian" => ScenarioConfig {
            t_final: 2.0,
            initial: InitialSpec::normalized(InitialKind::Gaussian {
                center: vec![0.0],
                sigma: 2.0,
            }),
            ..base
        },
        "fig8_transport_2d" => fig8,
        "fig8_transport_2d_asym_data" => ScenarioConfig {
            initial: InitialSpec::normalized(InitialKind::AsymmetricVolcano),
            ..fig8
        },
        "fig8_transport_2d_asym_potential" => ScenarioConfig {
            exterior: Exterior::NonRadial,
            ..fig8
        },
        "fig8_transport_2d_radial_transport" => ScenarioConfig {
            transport: Some(TransportMethod::Radial),
            ..fig8
        },
        "fig9_moses" => fig9,
        "fig9_moses_text_levels" => ScenarioConfig {
            k_list: vec![5.0, 10.0, 15.0, 20.0],
            ..fig9
        },
        "fig9_simple" => ScenarioConfig { slit: false, ..fig9 },
        other => {
            return Err(Error::Config(ConfigError::at_key(
                "scenario",
                format!("unknown scenario '{other}'; known: {}", scenario_names().join(", ")),
            )))
        }
    };
    Ok(cfg)
}

/// What to retain from a run.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RunOptions {
    pub keep_snapshots: bool,
    /// Evaluate energies after every step (slower).
    pub audit_energy: bool,
}

/// Result of a single run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub label: String,
    pub k: Option<f64>,
    pub problem: Problem,
    /// Ω inside the run's grid.
    pub omega: SubDomain,
    pub initial: State,
    pub final_state: State,
    pub records: Vec<DiagnosticsRecord>,
    /// States at the observation times, when requested.
    pub snapshots: Vec<State>,
    pub audit: StepAudit,
    pub buffer: f64,
    pub buffer_snapped: bool,
}

/// Label used for a level in file names and tables.
pub fn k_label(k: f64) -> String {
    if k.fract() == 0.0 {
        format!("k_{}", k as i64)
    } else {
        format!("k_{k}")
    }
}

/// The limit problem on Ω: V₀ only, no-flux at ∂Ω, exterior initial mass
/// moved onto the boundary.
pub fn build_limit(cfg: &ScenarioConfig) -> Result<(Problem, State)> {
    let og = cfg.omega_grid()?;
    let pot = PotentialField::plain(&cfg.potential, &og)?;
    let u0 = match cfg.initial.profile {
        InitialKind::Gibbs => sample_ic_with_potential(&cfg.initial, &og, Some(pot.values()))?,
        _ => {
            let bg = cfg.box_grid()?;
            let full = sample_ic(&cfg.initial, &bg)?;
            let om = bg.restrict(&cfg.omega)?;
            if cfg.dim == 1 {
                dirac_boundary_placement_1d(&full, &om)?
            } else {
                transport_mass_2d(&full, &om, cfg.transport_method())?
            }
        }
    };
    let u0 = State::new(og.clone(), u0.into_values(), 0.0)?;
    let problem = Problem::new(og, cfg.law()?, pot, cfg.kernel, cfg.solver_params())?;
    Ok((problem, u0))
}

/// V_k on the box B for level k, per the configured setting.
pub fn confined_potential(cfg: &ScenarioConfig, k: f64, grid: &Grid) -> Result<(PotentialField, bool)> {
    let (w, snapped) = cfg.buffer_for(k);
    if snapped {
        log::warn!(
            "{}: buffer width 1/{k} snapped to {w} (dx = {})",
            cfg.name,
            cfg.dx
        );
    }
    let field = match cfg.setting {
        Setting::Plain => PotentialField::plain(&cfg.potential, grid)?,
        Setting::L2 => PotentialField::l2_with_buffer(&cfg.potential, &cfg.omega, k, w, grid)?,
        Setting::FreeEnergy => PotentialField::free_energy_with_buffer(
            &cfg.potential,
            &cfg.omega,
            k,
            w,
            cfg.exterior,
            grid,
        )?,
        Setting::Moses => PotentialField::moses(k, cfg.slit, &cfg.omega, grid)?,
    };
    Ok((field, snapped && cfg.setting != Setting::Moses))
}

/// The whole-box problem at level k.
pub fn build_confined(cfg: &ScenarioConfig, k: f64) -> Result<(Problem, State, bool)> {
    let bg = cfg.box_grid()?;
    let (pot, snapped) = confined_potential(cfg, k, &bg)?;
    let u0 = sample_ic_with_potential(&cfg.initial, &bg, Some(pot.values()))?;
    let problem = Problem::new(bg, cfg.law()?, pot, cfg.kernel, cfg.solver_params())?;
    Ok((problem, u0, snapped))
}

fn execute(
    cfg: &ScenarioConfig,
    k: Option<f64>,
    problem: Problem,
    u0: State,
    omega: SubDomain,
    reference: Option<&[State]>,
    opts: RunOptions,
) -> Result<RunOutput> {
    let whole = omega.len() == problem.grid.len();
    let mut diag = Diagnostics::new(&problem, if whole { None } else { Some(omega.clone()) });
    if let Some(r) = reference {
        diag = diag.with_reference(r.to_vec());
    }
    let mut rec = Recorder::new(diag)
        .keep_snapshots(opts.keep_snapshots)
        .audit_energy(opts.audit_energy);
    rec.start(&u0);
    let mut solver = Solver::new(problem.clone());
    let final_state = solver.run(&u0, cfg.t_final, &cfg.observation_times(), &mut rec)?;
    let (buffer, buffer_snapped) = match k {
        Some(k) if cfg.setting != Setting::Moses && cfg.setting != Setting::Plain => cfg.buffer_for(k),
        _ => (0.0, false),
    };
    Ok(RunOutput {
        label: k.map_or_else(|| "limit".to_string(), k_label),
        k,
        problem,
        omega,
        initial: u0,
        final_state,
        records: rec.records,
        snapshots: rec.snapshots,
        audit: rec.audit,
        buffer,
        buffer_snapped,
    })
}

/// Solves the limit problem on Ω.
pub fn run_limit_problem(cfg: &ScenarioConfig, opts: RunOptions) -> Result<RunOutput> {
    let (problem, u0) = build_limit(cfg)?;
    let omega = problem.grid.full();
    execute(cfg, None, problem, u0, omega, None, opts)
}

/// Solves the confined problem on B at level k, comparing against
/// `reference` states on Ω when given.
pub fn run_confined(
    cfg: &ScenarioConfig,
    k: f64,
    reference: Option<&[State]>,
    opts: RunOptions,
) -> Result<RunOutput> {
    let (problem, u0, _) = build_confined(cfg, k)?;
    let omega = problem.grid.restrict(&cfg.omega)?;
    execute(cfg, Some(k), problem, u0, omega, reference, opts)
}

/// One line of a sweep summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub k: f64,
    pub l2_error_omega: Option<f64>,
    pub l2_norm_outside: Option<f64>,
    pub mass_outside: Option<f64>,
    pub status: String,
}

#[derive(Debug)]
pub struct SweepResult {
    pub limit: RunOutput,
    pub runs: Vec<(f64, Result<RunOutput>)>,
    pub summary: Vec<SweepRow>,
}

/// Runs the limit problem, then every level of `k_list` (in parallel), and
/// tabulates the errors at the final time.
pub fn k_sweep(cfg: &ScenarioConfig, opts: RunOptions) -> Result<SweepResult> {
    if cfg.k_list.is_empty() {
        return Err(Error::Config(ConfigError::at_key("k_list", "sweep needs at least one level")));
    }
    let limit = run_limit_problem(
        cfg,
        RunOptions {
            keep_snapshots: true,
            ..opts
        },
    )?;
    let reference = limit.snapshots.clone();
    let runs: Vec<(f64, Result<RunOutput>)> = cfg
        .k_list
        .par_iter()
        .map(|&k| (k, run_confined(cfg, k, Some(&reference), opts)))
        .collect();
    let summary = runs
        .iter()
        .map(|(k, r)| match r {
            Ok(out) => {
                let fin = &out.final_state;
                SweepRow {
                    k: *k,
                    l2_error_omega: out.records.last().and_then(|r| r.l2_error_omega),
                    l2_norm_outside: Some(l2_norm_outside(fin, &out.omega)),
                    mass_outside: Some(mass_outside(fin, &out.omega)),
                    status: "ok".into(),
                }
            }
            Err(e) => SweepRow {
                k: *k,
                l2_error_omega: None,
                l2_norm_outside: None,
                mass_outside: None,
                status: format!("failed: {e}"),
            },
        })
        .collect();
    Ok(SweepResult {
        limit,
        runs,
        summary,
    })
}

/// Values next to ∂Ω, one per boundary face, clockwise from (1, 1).
///
/// Each face of ∂Ω carries the value of the adjacent cell of Ω; `s` is the
/// arc length along ∂Ω of the face midpoint, so corner cells appear once on
/// each of their two sides.
pub fn boundary_trace(state: &State, omega: &SubDomain) -> Result<Vec<(f64, f64)>> {
    if state.grid().dim() != 2 {
        return Err(Error::Unsupported("boundary traces are two-dimensional".into()));
    }
    if omega.parent() != state.grid() {
        return config_err("Ω must be a sub-domain of the state's grid");
    }
    let g = state.grid();
    let u = state.values();
    let r = omega.ranges();
    let (xs, ys) = (r[0].clone(), r[1].clone());
    let b = omega.bounds();
    let (x0, x1, y0, y1) = (b[0].lo, b[0].hi, b[1].lo, b[1].hi);
    let (w, h) = (x1 - x0, y1 - y0);
    let mut out = Vec::with_capacity(2 * (xs.len() + ys.len()));
    // Right side, top to bottom.
    for j in ys.clone().rev() {
        out.push((y1 - g.center(1, j), u[g.index(xs.end - 1, j)]));
    }
    // Bottom side, right to left.
    for i in xs.clone().rev() {
        out.push((h + x1 - g.center(0, i), u[g.index(i, ys.start)]));
    }
    // Left side, bottom to top.
    for j in ys.clone() {
        out.push((h + w + g.center(1, j) - y0, u[g.index(xs.start, j)]));
    }
    // Top side, left to right.
    for i in xs.clone() {
        out.push((2.0 * h + w + g.center(0, i) - x0, u[g.index(i, ys.end - 1)]));
    }
    Ok(out)
}
