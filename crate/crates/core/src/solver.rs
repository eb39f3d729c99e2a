//! Second-order upwind finite-volume stepper with no-flux boundaries.
//!
//! Each right-hand-side evaluation reassembles W∗u, the chemical potential h
//! and the face velocities v = −∇h, reconstructs limited face densities and
//! forms upwind fluxes F = v⁺u⁻ + v⁻u⁺. Boundary faces carry no flux, so mass
//! telescopes exactly. Time stepping is SSP-RK2 (Heun).

use serde::{Deserialize, Serialize};

use crate::confinement::{Kernel, PotentialField};
use crate::error::{config_err, Error, Result};
use crate::fields::{assemble_chem, face_velocities, Convolution, FaceField, DENSITY_FLOOR};
use crate::grid::{Grid, SubDomain};
use crate::nonlinearity::Nonlinearity;

/// Density field on a grid at a given time.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    grid: Grid,
    u: Vec<f64>,
    t: f64,
}

impl State {
    pub fn new(grid: Grid, u: Vec<f64>, t: f64) -> Result<Self> {
        if u.len() != grid.len() {
            return config_err(format!(
                "state has {} values but the grid has {} cells",
                u.len(),
                grid.len()
            ));
        }
        if let Some((i, v)) = u.iter().enumerate().find(|(_, v)| !(**v >= 0.0) || !v.is_finite()) {
            return config_err(format!("density must be finite and non-negative; cell {i} has {v}"));
        }
        Ok(State { grid, u, t })
    }

    pub fn zeros(grid: Grid) -> Self {
        let n = grid.len();
        State {
            grid,
            u: vec![0.0; n],
            t: 0.0,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.u
    }

    pub fn into_values(self) -> Vec<f64> {
        self.u
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn with_time(mut self, t: f64) -> Self {
        self.t = t;
        self
    }

    /// dxᵈ Σ uᵢ, summed left to right.
    pub fn mass(&self) -> f64 {
        self.u.iter().sum::<f64>() * self.grid.cell_volume()
    }

    pub fn min(&self) -> f64 {
        self.u.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.u.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Numerical constants of the scheme.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverParams {
    /// Courant number, applied per spatial dimension.
    pub cfl: f64,
    /// Minmod steepness parameter.
    pub theta: f64,
    /// Density floor inside log u.
    pub floor: f64,
    /// Initial and maximal time step.
    pub dt_init: f64,
}

impl Default for SolverParams {
    fn default() -> Self {
        SolverParams {
            cfl: 0.4,
            theta: 1.5,
            floor: DENSITY_FLOOR,
            dt_init: 1e-5,
        }
    }
}

/// Everything that defines one evolution problem on one grid.
#[derive(Debug, Clone)]
pub struct Problem {
    pub grid: Grid,
    pub law: Nonlinearity,
    pub potential: PotentialField,
    pub kernel: Kernel,
    /// Source cells of the convolution.
    pub support: SubDomain,
    pub degenerate: bool,
    pub params: SolverParams,
}

impl Problem {
    pub fn new(
        grid: Grid,
        law: Nonlinearity,
        potential: PotentialField,
        kernel: Kernel,
        params: SolverParams,
    ) -> Result<Self> {
        if potential.len() != grid.len() {
            return config_err(format!(
                "potential has {} samples but the grid has {} cells",
                potential.len(),
                grid.len()
            ));
        }
        if !(params.cfl > 0.0 && params.cfl <= 0.5) {
            return config_err(format!("cfl must lie in (0, 0.5], got {}", params.cfl));
        }
        if !(params.theta >= 1.0 && params.theta <= 2.0) {
            return config_err(format!("theta must lie in [1, 2], got {}", params.theta));
        }
        if !(params.dt_init > 0.0) || !(params.floor > 0.0) {
            return config_err("dt_init and floor must be positive");
        }
        let support = grid.full();
        Ok(Problem {
            degenerate: law.is_degenerate(),
            grid,
            law,
            potential,
            kernel,
            support,
            params,
        })
    }

    /// Restricts the convolution to a sub-domain of the grid.
    pub fn with_support(mut self, support: SubDomain) -> Result<Self> {
        if support.parent() != &self.grid {
            return config_err("convolution support must be a sub-domain of the problem grid");
        }
        self.support = support;
        Ok(self)
    }
}

fn minmod3(a: f64, b: f64, c: f64) -> f64 {
    if a > 0.0 && b > 0.0 && c > 0.0 {
        a.min(b).min(c)
    } else if a < 0.0 && b < 0.0 && c < 0.0 {
        a.max(b).max(c)
    } else {
        0.0
    }
}

/// Limited face values of every cell: `plus` on the high side of each axis
/// (east, north) and `minus` on the low side (west, south).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Reconstruction {
    pub plus_x: Vec<f64>,
    pub minus_x: Vec<f64>,
    pub plus_y: Vec<f64>,
    pub minus_y: Vec<f64>,
}

impl Reconstruction {
    pub fn new(grid: &Grid) -> Self {
        let n = grid.len();
        let m = if grid.dim() == 2 { n } else { 0 };
        Reconstruction {
            plus_x: vec![0.0; n],
            minus_x: vec![0.0; n],
            plus_y: vec![0.0; m],
            minus_y: vec![0.0; m],
        }
    }
}

/// Half-jump (dx/2)·s along one line of cells with stride `stride`.
fn reconstruct_line(
    u: &[f64],
    start: usize,
    len: usize,
    stride: usize,
    theta: f64,
    plus: &mut [f64],
    minus: &mut [f64],
) {
    let at = |k: usize| start + k * stride;
    for k in 0..len {
        let i = at(k);
        let ui = u[i];
        let half = if k == 0 || k + 1 == len {
            0.0
        } else {
            let (ul, ur) = (u[at(k - 1)], u[at(k + 1)]);
            let d = 0.5 * minmod3(theta * (ur - ui), 0.5 * (ur - ul), theta * (ui - ul));
            if ui + d < 0.0 || ui - d < 0.0 {
                0.0
            } else {
                d
            }
        };
        plus[i] = ui + half;
        minus[i] = ui - half;
    }
}

/// Minmod-limited piecewise-linear reconstruction; boundary cells are flat.
pub fn reconstruct(u: &[f64], grid: &Grid, theta: f64, out: &mut Reconstruction) {
    let (nx, ny) = (grid.nx(), grid.ny());
    for j in 0..ny {
        reconstruct_line(u, j * nx, nx, 1, theta, &mut out.plus_x, &mut out.minus_x);
    }
    if grid.dim() == 2 {
        for i in 0..nx {
            reconstruct_line(u, i, ny, nx, theta, &mut out.plus_y, &mut out.minus_y);
        }
    }
}

/// Upwind fluxes on interior faces.
pub fn flux(rec: &Reconstruction, vel: &FaceField, grid: &Grid, out: &mut FaceField) {
    let (nx, ny) = (grid.nx(), grid.ny());
    for j in 0..ny {
        for i in 0..nx - 1 {
            let f = j * (nx - 1) + i;
            let c = j * nx + i;
            let v = vel.x[f];
            out.x[f] = v.max(0.0) * rec.plus_x[c] + v.min(0.0) * rec.minus_x[c + 1];
        }
    }
    if grid.dim() == 2 {
        for f in 0..nx * (ny - 1) {
            let v = vel.y[f];
            out.y[f] = v.max(0.0) * rec.plus_y[f] + v.min(0.0) * rec.minus_y[f + nx];
        }
    }
}

/// −div F with zero flux through the boundary.
fn divergence(fl: &FaceField, grid: &Grid, out: &mut [f64]) {
    let (nx, ny) = (grid.nx(), grid.ny());
    let inv = 1.0 / grid.dx();
    for j in 0..ny {
        let row = &fl.x[j * (nx - 1)..(j + 1) * (nx - 1)];
        for i in 0..nx {
            let east = if i + 1 < nx { row[i] } else { 0.0 };
            let west = if i > 0 { row[i - 1] } else { 0.0 };
            out[j * nx + i] = -(east - west) * inv;
        }
    }
    if grid.dim() == 2 {
        for j in 0..ny {
            for i in 0..nx {
                let north = if j + 1 < ny { fl.y[j * nx + i] } else { 0.0 };
                let south = if j > 0 { fl.y[(j - 1) * nx + i] } else { 0.0 };
                out[j * nx + i] -= (north - south) * inv;
            }
        }
    }
}

#[derive(Debug, Clone)]
struct Scratch {
    conv: Vec<f64>,
    chem: Vec<f64>,
    vel: FaceField,
    rec: Reconstruction,
    flux: FaceField,
    rhs0: Vec<f64>,
    rhs1: Vec<f64>,
    stage: Vec<f64>,
}

/// Outcome of one accepted step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInfo {
    pub dt: f64,
    pub max_speed: f64,
    pub retries: u32,
}

/// Owns a problem and the work buffers needed to advance states on it.
#[derive(Debug, Clone)]
pub struct Solver {
    problem: Problem,
    conv_op: Option<Convolution>,
    scratch: Scratch,
}

/// Callbacks invoked during [`Solver::run`].
pub trait Observer {
    /// Called at every requested observation time.
    fn observe(&mut self, problem: &Problem, state: &State) -> Result<()>;

    /// Called after every accepted step.
    fn on_step(&mut self, _problem: &Problem, _state: &State, _info: &StepInfo) -> Result<()> {
        Ok(())
    }
}

/// Observer that does nothing.
pub struct NoObserver;

impl Observer for NoObserver {
    fn observe(&mut self, _: &Problem, _: &State) -> Result<()> {
        Ok(())
    }
}

const MAX_RETRIES: u32 = 30;

impl Solver {
    pub fn new(problem: Problem) -> Self {
        let g = &problem.grid;
        let n = g.len();
        let scratch = Scratch {
            conv: vec![0.0; n],
            chem: vec![0.0; n],
            vel: FaceField::zeros(g),
            rec: Reconstruction::new(g),
            flux: FaceField::zeros(g),
            rhs0: vec![0.0; n],
            rhs1: vec![0.0; n],
            stage: vec![0.0; n],
        };
        let conv_op = Convolution::new(problem.kernel, &problem.support);
        Solver {
            problem,
            conv_op,
            scratch,
        }
    }

    pub fn problem(&self) -> &Problem {
        &self.problem
    }

    /// Fills conv, chem and face velocities for density `u`.
    fn assemble(&mut self, u: &[f64]) {
        let p = &self.problem;
        let s = &mut self.scratch;
        let conv = match &self.conv_op {
            Some(op) => {
                op.apply(u, &mut s.conv);
                Some(s.conv.as_slice())
            }
            None => None,
        };
        assemble_chem(
            u,
            &p.law,
            p.potential.values(),
            conv,
            p.degenerate,
            p.params.floor,
            &mut s.chem,
        );
        face_velocities(&s.chem, &p.grid, &mut s.vel);
    }

    /// Chemical potential and face velocities of a density.
    pub fn fields(&mut self, u: &[f64]) -> (Vec<f64>, FaceField) {
        self.assemble(u);
        (self.scratch.chem.clone(), self.scratch.vel.clone())
    }

    /// Velocities and upwinded face densities, for the dissipation.
    pub fn upwind_faces(&mut self, u: &[f64]) -> (FaceField, FaceField) {
        self.assemble(u);
        let s = &mut self.scratch;
        let p = &self.problem;
        reconstruct(u, &p.grid, p.params.theta, &mut s.rec);
        let mut dens = FaceField::zeros(&p.grid);
        let ones = FaceField {
            x: s.vel.x.iter().map(|v| v.signum()).collect(),
            y: s.vel.y.iter().map(|v| v.signum()).collect(),
        };
        flux(&s.rec, &ones, &p.grid, &mut dens);
        for d in dens.x.iter_mut().chain(dens.y.iter_mut()) {
            *d = d.abs();
        }
        (s.vel.clone(), dens)
    }

    /// du/dt into `which` (0 or 1); returns max |v|.
    fn rhs(&mut self, u: &[f64], which: usize) -> f64 {
        self.assemble(u);
        let p = &self.problem;
        let s = &mut self.scratch;
        reconstruct(u, &p.grid, p.params.theta, &mut s.rec);
        flux(&s.rec, &s.vel, &p.grid, &mut s.flux);
        let out = if which == 0 { &mut s.rhs0 } else { &mut s.rhs1 };
        divergence(&s.flux, &p.grid, out);
        s.vel.max_abs()
    }

    fn dt_for_speed(&self, max_speed: f64) -> f64 {
        let p = &self.problem.params;
        let dim = self.problem.grid.dim() as f64;
        if max_speed > 0.0 {
            p.dt_init.min(p.cfl * self.problem.grid.dx() / (dim * max_speed))
        } else {
            p.dt_init
        }
    }

    /// C·dx²/(2d·max φ'(u)): keeps the explicit diffusion stable where the
    /// transport speed alone does not limit the step, e.g. at a smooth peak.
    pub fn diffusion_dt(&self, u: &[f64]) -> f64 {
        let law = &self.problem.law;
        let dmax = u.iter().fold(0.0_f64, |m, &s| m.max(law.phi_prime_raw(s)));
        if dmax > 0.0 {
            let p = &self.problem.params;
            let dx = self.problem.grid.dx();
            p.cfl * dx * dx / (2.0 * self.problem.grid.dim() as f64 * dmax)
        } else {
            f64::INFINITY
        }
    }

    /// min(dt_init, C·dx/(d·max|v|), C·dx²/(2d·max φ'(u))).
    pub fn cfl_dt(&mut self, state: &State) -> f64 {
        let u = state.values().to_vec();
        self.assemble(&u);
        let speed = self.scratch.vel.max_abs();
        self.dt_for_speed(speed).min(self.diffusion_dt(&u))
    }

    /// Largest step that keeps a forward-Euler stage non-negative.
    fn positivity_dt(&self, max_speed: f64) -> f64 {
        if max_speed > 0.0 {
            self.problem.grid.dx() / (2.0 * self.problem.grid.dim() as f64 * max_speed)
        } else {
            f64::INFINITY
        }
    }

    /// One SSP-RK2 step of exactly `dt`.
    pub fn step(&mut self, state: &State, dt: f64) -> Result<State> {
        let u = state.values();
        self.rhs(u, 0);
        let mut next = vec![0.0; u.len()];
        self.finish_step(u, state.t(), dt, &mut next)?;
        State::new(state.grid().clone(), next, state.t() + dt).map_err(|_| Error::Blowup {
            t: state.t() + dt,
            detail: "step produced an invalid density".into(),
        })
    }

    /// Second stage and averaging, given rhs0 of `u`. Returns the speed of
    /// the intermediate stage.
    fn finish_step(&mut self, u: &[f64], t: f64, dt: f64, next: &mut [f64]) -> Result<f64> {
        let mut stage = std::mem::take(&mut self.scratch.stage);
        for ((s, &ui), &r) in stage.iter_mut().zip(u).zip(&self.scratch.rhs0) {
            *s = ui + dt * r;
        }
        let speed1 = self.rhs(&stage, 1);
        for (((n, &ui), &si), &r) in next.iter_mut().zip(u).zip(&stage).zip(&self.scratch.rhs1) {
            *n = 0.5 * (ui + si + dt * r);
        }
        self.scratch.stage = stage;
        if let Some(i) = next.iter().position(|v| !v.is_finite()) {
            return Err(Error::Blowup {
                t: t + dt,
                detail: format!("non-finite density in cell {i}"),
            });
        }
        Ok(speed1)
    }

    /// Advances `u` in place by at most `dt_max`; returns the step taken.
    fn advance(&mut self, u: &mut Vec<f64>, t: f64, dt_max: f64) -> Result<StepInfo> {
        let speed0 = self.rhs(u, 0);
        if !speed0.is_finite() {
            return Err(Error::Blowup {
                t,
                detail: "non-finite velocity".into(),
            });
        }
        let mut dt = dt_max.min(self.dt_for_speed(speed0)).min(self.diffusion_dt(u));
        let mut next = vec![0.0; u.len()];
        let mut retries = 0;
        loop {
            let speed1 = self.finish_step(u, t, dt, &mut next)?;
            let ok_cfl = dt <= self.positivity_dt(speed1) * (1.0 + 1e-12);
            let ok_sign = next.iter().all(|&v| v >= 0.0);
            if ok_cfl && ok_sign {
                std::mem::swap(u, &mut next);
                return Ok(StepInfo {
                    dt,
                    max_speed: speed0.max(speed1),
                    retries,
                });
            }
            retries += 1;
            if retries > MAX_RETRIES {
                return Err(Error::Blowup {
                    t,
                    detail: format!("step rejected {MAX_RETRIES} times (dt = {dt:e})"),
                });
            }
            dt = if ok_cfl {
                0.5 * dt
            } else {
                dt.min(self.dt_for_speed(speed1))
            };
        }
    }

    /// Integrates from `u0` to `t_final`, landing exactly on each requested
    /// observation time.
    pub fn run(
        &mut self,
        u0: &State,
        t_final: f64,
        observe_at: &[f64],
        observer: &mut dyn Observer,
    ) -> Result<State> {
        if u0.grid() != &self.problem.grid {
            return config_err("initial state is not on the problem grid");
        }
        let t0 = u0.t();
        if !(t_final >= t0) {
            return config_err(format!("final time {t_final} precedes the start time {t0}"));
        }
        for w in observe_at.windows(2) {
            if !(w[1] > w[0]) {
                return config_err("observation times must be strictly increasing");
            }
        }
        if observe_at
            .iter()
            .any(|&t| t < t0 - 1e-14 || t > t_final + 1e-14)
        {
            return config_err("observation times must lie within the run interval");
        }
        let mut stops: Vec<f64> = observe_at.to_vec();
        if stops.last().is_none_or(|&t| t < t_final) {
            stops.push(t_final);
        }
        let is_obs = |i: usize| i < observe_at.len();

        let mut state = u0.clone();
        for (si, &stop) in stops.iter().enumerate() {
            while state.t < stop {
                let remaining = stop - state.t;
                let info = self.advance(&mut state.u, state.t, remaining)?;
                state.t = if info.dt >= remaining * (1.0 - 1e-12) {
                    stop
                } else {
                    state.t + info.dt
                };
                observer.on_step(&self.problem, &state, &info)?;
            }
            if is_obs(si) {
                observer.observe(&self.problem, &state)?;
            }
        }
        Ok(state)
    }
}
