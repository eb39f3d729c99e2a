//! Initial densities, and the procedures that move exterior initial mass
//! onto the boundary of Ω for the limit problem.

use serde::{Deserialize, Serialize};

use crate::error::{config_err, Error, Result};
use crate::grid::{Grid, Interval, SubDomain};
use crate::solver::State;

/// Profile of an initial density before normalization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialKind {
    /// `value` on `region`, or everywhere when no region is given.
    Constant {
        value: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        region: Option<Vec<Interval>>,
    },
    /// Characteristic function of a union of boxes.
    Indicator { boxes: Vec<Vec<Interval>> },
    /// exp(−|x − c|²/(2σ²)).
    Gaussian { center: Vec<f64>, sigma: f64 },
    /// e^{−5(r−1)²}.
    Volcano,
    /// (1 + sin(x₂/r)/2)·e^{−5(r−1)²}.
    AsymmetricVolcano,
    /// e^{−rate·|x|}.
    Exponential { rate: f64 },
    /// e^{−V}, using the potential of the run.
    Gibbs,
}

fn default_mass() -> f64 {
    1.0
}

/// An initial density: a profile, optionally rescaled to a prescribed mass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSpec {
    pub profile: InitialKind,
    #[serde(default)]
    pub normalize: bool,
    #[serde(default = "default_mass")]
    pub mass: f64,
}

impl InitialSpec {
    pub fn new(profile: InitialKind) -> Self {
        InitialSpec {
            profile,
            normalize: false,
            mass: 1.0,
        }
    }

    pub fn normalized(profile: InitialKind) -> Self {
        InitialSpec {
            profile,
            normalize: true,
            mass: 1.0,
        }
    }

    pub fn needs_potential(&self) -> bool {
        matches!(self.profile, InitialKind::Gibbs)
    }
}

fn volcano(p: &[f64; 2]) -> f64 {
    let r = p[0].hypot(p[1]);
    (-5.0 * (r - 1.0) * (r - 1.0)).exp()
}

fn profile(kind: &InitialKind, p: &[f64; 2], dim: usize, v: Option<f64>) -> f64 {
    match kind {
        InitialKind::Constant { value, region } => match region {
            Some(r) if !Grid::point_in(r, p) => 0.0,
            _ => *value,
        },
        InitialKind::Indicator { boxes } => {
            if boxes.iter().any(|b| Grid::point_in(b, p)) {
                1.0
            } else {
                0.0
            }
        }
        InitialKind::Gaussian { center, sigma } => {
            let d2: f64 = (0..dim).map(|a| (p[a] - center[a]).powi(2)).sum();
            (-d2 / (2.0 * sigma * sigma)).exp()
        }
        InitialKind::Volcano => volcano(p),
        InitialKind::AsymmetricVolcano => {
            let r = p[0].hypot(p[1]);
            let s = if r < 1e-12 { 0.0 } else { (p[1] / r).sin() };
            (1.0 + 0.5 * s) * volcano(p)
        }
        InitialKind::Exponential { rate } => {
            let r = if dim == 1 { p[0].abs() } else { p[0].hypot(p[1]) };
            (-rate * r).exp()
        }
        InitialKind::Gibbs => (-v.unwrap_or(0.0)).exp(),
    }
}

fn check_spec(spec: &InitialSpec, grid: &Grid) -> Result<()> {
    let dim = grid.dim();
    match &spec.profile {
        InitialKind::Constant { value, region } => {
            if !(*value >= 0.0) || !value.is_finite() {
                return config_err(format!("constant initial value must be >= 0, got {value}"));
            }
            if region.as_ref().is_some_and(|r| r.len() != dim) {
                return config_err("constant region must have one interval per axis");
            }
        }
        InitialKind::Indicator { boxes } => {
            if boxes.is_empty() || boxes.iter().any(|b| b.len() != dim) {
                return config_err("indicator boxes must be nonempty with one interval per axis");
            }
        }
        InitialKind::Gaussian { center, sigma } => {
            if center.len() != dim {
                return config_err("gaussian center must have one coordinate per axis");
            }
            if !(*sigma > 0.0) {
                return config_err(format!("gaussian width must be positive, got {sigma}"));
            }
        }
        InitialKind::Volcano | InitialKind::AsymmetricVolcano => {
            if dim != 2 {
                return Err(Error::Unsupported(
                    "volcano initial data are two-dimensional".into(),
                ));
            }
        }
        InitialKind::Exponential { rate } => {
            if !(*rate >= 0.0) {
                return config_err(format!("exponential rate must be >= 0, got {rate}"));
            }
        }
        InitialKind::Gibbs => {}
    }
    if spec.normalize && !(spec.mass > 0.0) {
        return config_err(format!("target mass must be positive, got {}", spec.mass));
    }
    Ok(())
}

/// Samples at cell centers; a Gibbs profile needs the potential samples.
pub fn sample_ic_with_potential(
    spec: &InitialSpec,
    grid: &Grid,
    potential: Option<&[f64]>,
) -> Result<State> {
    check_spec(spec, grid)?;
    if spec.needs_potential() && potential.is_none_or(|v| v.len() != grid.len()) {
        return config_err("a Gibbs initial density needs the potential on the same grid");
    }
    let dim = grid.dim();
    let mut u: Vec<f64> = grid
        .points()
        .iter()
        .enumerate()
        .map(|(i, p)| profile(&spec.profile, p, dim, potential.map(|v| v[i])))
        .collect();
    if spec.normalize {
        let m = u.iter().sum::<f64>() * grid.cell_volume();
        if !(m > 0.0) || !m.is_finite() {
            return config_err("cannot normalize an initial density that samples to zero");
        }
        let c = spec.mass / m;
        u.iter_mut().for_each(|x| *x *= c);
    }
    State::new(grid.clone(), u, 0.0)
}

/// Samples at cell centers.
pub fn sample_ic(spec: &InitialSpec, grid: &Grid) -> Result<State> {
    sample_ic_with_potential(spec, grid, None)
}

fn check_sub(state: &State, omega: &SubDomain) -> Result<()> {
    if omega.parent() != state.grid() {
        return config_err("Ω must be a sub-domain of the state's grid");
    }
    Ok(())
}

/// Masses left and right of Ω in 1D.
pub fn exterior_masses_1d(state: &State, omega: &SubDomain) -> Result<(f64, f64)> {
    check_sub(state, omega)?;
    let r = &omega.ranges()[0];
    let u = state.values();
    let dx = state.grid().dx();
    Ok((
        u[..r.start].iter().sum::<f64>() * dx,
        u[r.end..].iter().sum::<f64>() * dx,
    ))
}

/// Restricts a 1D density to Ω, spreading the exterior masses M_l and M_r
/// over the first and last cell of Ω.
pub fn dirac_boundary_placement_1d(state: &State, omega: &SubDomain) -> Result<State> {
    check_sub(state, omega)?;
    if state.grid().dim() != 1 {
        return Err(Error::Unsupported("boundary placement is one-dimensional".into()));
    }
    let r = omega.ranges()[0].clone();
    let u = state.values();
    let mut out = u[r.clone()].to_vec();
    let left: f64 = u[..r.start].iter().sum();
    let right: f64 = u[r.end..].iter().sum();
    out[0] += left;
    let last = out.len() - 1;
    out[last] += right;
    State::new(omega.grid(), out, state.t())
}

/// How exterior mass reaches ∂Ω in two dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransportMethod {
    /// Along the axis that leaves Ω; corner regions go to the corner cell.
    Perpendicular,
    /// To the boundary cell of Ω with the closest polar angle.
    Radial,
}

/// Cells of Ω adjacent to ∂Ω, as (i, j) in parent-grid indices.
fn boundary_ring(omega: &SubDomain) -> Vec<(usize, usize)> {
    let r = omega.ranges();
    let (xs, ys) = (r[0].clone(), r[1].clone());
    let mut ring = Vec::new();
    for j in ys.clone() {
        for i in xs.clone() {
            if i == xs.start || i + 1 == xs.end || j == ys.start || j + 1 == ys.end {
                ring.push((i, j));
            }
        }
    }
    ring
}

/// Maps (x, y) into 0 ≤ y ≤ x. Returns the image and the symmetry used.
fn to_octant(x: f64, y: f64) -> ((f64, f64), (bool, bool, bool)) {
    let (sx, sy) = (x < 0.0, y < 0.0);
    let (ax, ay) = (x.abs(), y.abs());
    if ay > ax {
        ((ay, ax), (sx, sy, true))
    } else {
        ((ax, ay), (sx, sy, false))
    }
}

fn from_octant(p: (f64, f64), sym: (bool, bool, bool)) -> (f64, f64) {
    let (mut x, mut y) = if sym.2 { (p.1, p.0) } else { p };
    if sym.0 {
        x = -x;
    }
    if sym.1 {
        y = -y;
    }
    (x, y)
}

/// Absolute difference of two angles on the circle.
fn angle_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).abs() % std::f64::consts::TAU;
    d.min(std::f64::consts::TAU - d)
}

/// Moves all mass outside Ω onto the boundary ring of Ω.
///
/// Deposits are cell values mass/dx². The radial search runs in the octant
/// 0 ≤ y ≤ x after reflecting the source cell, so the result commutes with
/// the symmetries of the square; among equally close boundary cells the one
/// with the smaller angle wins.
pub fn transport_mass_2d(
    state: &State,
    omega: &SubDomain,
    method: TransportMethod,
) -> Result<State> {
    check_sub(state, omega)?;
    let grid = state.grid();
    if grid.dim() != 2 {
        return Err(Error::Unsupported("mass transport is two-dimensional".into()));
    }
    let r = omega.ranges();
    let (xs, ys) = (r[0].clone(), r[1].clone());
    let sub = omega.grid();
    let snx = sub.nx();
    let u = state.values();
    let mut out = omega.extract(u);
    let local = |i: usize, j: usize| (j - ys.start) * snx + (i - xs.start);

    match method {
        TransportMethod::Perpendicular => {
            for idx in omega.complement() {
                let (i, j) = grid.unravel(idx);
                let ti = i.clamp(xs.start, xs.end - 1);
                let tj = j.clamp(ys.start, ys.end - 1);
                out[local(ti, tj)] += u[idx];
            }
        }
        TransportMethod::Radial => {
            let b = omega.bounds();
            let tol = 1e-9 * grid.dx();
            let centered = (b[0].lo + b[0].hi).abs() < tol
                && (b[1].lo + b[1].hi).abs() < tol
                && (b[0].hi - b[1].hi).abs() < tol;
            if !centered {
                return Err(Error::Unsupported(
                    "radial transport needs Ω to be a square centered at the origin".into(),
                ));
            }
            let ring: Vec<((usize, usize), f64)> = boundary_ring(omega)
                .into_iter()
                .map(|(i, j)| ((i, j), grid.center(1, j).atan2(grid.center(0, i))))
                .collect();
            let dx = grid.dx();
            let locate = |x: f64, axis: usize| -> usize {
                ((x - grid.bounds()[axis].lo) / dx - 0.5).round() as usize
            };
            for idx in omega.complement() {
                if u[idx] == 0.0 {
                    continue;
                }
                let p = grid.point(idx);
                let ((cx, cy), sym) = to_octant(p[0], p[1]);
                let theta = cy.atan2(cx);
                let mut best: Option<((usize, usize), f64, f64)> = None;
                for &((i, j), ang) in &ring {
                    let gap = angle_gap(theta, ang);
                    let better = match best {
                        None => true,
                        Some((_, g, a)) => gap < g || (gap == g && ang < a),
                    };
                    if better {
                        best = Some(((i, j), gap, ang));
                    }
                }
                let ((bi, bj), _, _) = best.expect("Ω has at least one cell");
                let (tx, ty) = from_octant((grid.center(0, bi), grid.center(1, bj)), sym);
                out[local(locate(tx, 0), locate(ty, 1))] += u[idx];
            }
        }
    }
    State::new(sub, out, state.t())
}
