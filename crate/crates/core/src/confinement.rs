//! External potentials sampled at cell centers, and interaction kernels.
//!
//! A confined potential V_k equals the base potential V₀ on Ω, blends over a
//! buffer shell Ω_k∖Ω of sup-norm width w (nominally 1/k), and takes its
//! exterior value outside Ω_k. The blend is
//!
//! ```text
//! ψ(x) = V₀(π(x)) + (target(x) − V₀(π(x)))·S(t),   S(t) = 3t² − 2t³,
//! ```
//!
//! where π is the nearest point of Ω and t = dist_∞(x, Ω)/w.

use serde::{Deserialize, Serialize};

use crate::error::{config_err, Error, Result};
use crate::grid::{Grid, Interval};

/// The interior potential V₀.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BasePotential {
    Zero,
    /// c·|x|².
    Quadratic { coeff: f64 },
    /// scale·(1 + amplitude·sin(frequency·x))·(x² + offset).
    SinModulated {
        scale: f64,
        amplitude: f64,
        frequency: f64,
        offset: f64,
    },
    /// scale·(a1·e^{−w1 x²} − a2·e^{−w2 x²} + 1).
    DoubleGaussian {
        scale: f64,
        a1: f64,
        w1: f64,
        a2: f64,
        w2: f64,
    },
    /// Σ cₙ xⁿ in 1D, Σ cₙ rⁿ in 2D.
    CustomPolynomial { coeffs: Vec<f64> },
}

impl BasePotential {
    /// 0.46(1 + 0.2 sin 20x)(x² + 0.75).
    pub fn fig3() -> Self {
        BasePotential::SinModulated {
            scale: 0.46,
            amplitude: 0.2,
            frequency: 20.0,
            offset: 0.75,
        }
    }

    /// 0.56[e^{−100x²} − 1.5e^{−50x²} + 1].
    pub fn fig4() -> Self {
        BasePotential::DoubleGaussian {
            scale: 0.56,
            a1: 1.0,
            w1: 100.0,
            a2: 1.5,
            w2: 50.0,
        }
    }

    /// Evaluates at a point; 1D potentials read `p[0]`, 2D ones use r = |p|
    /// for the profiles defined along a line.
    pub fn eval(&self, p: &[f64; 2], dim: usize) -> f64 {
        let r2 = p[0] * p[0] + p[1] * p[1];
        let x = if dim == 1 { p[0] } else { r2.sqrt() };
        match self {
            BasePotential::Zero => 0.0,
            BasePotential::Quadratic { coeff } => coeff * r2,
            BasePotential::SinModulated {
                scale,
                amplitude,
                frequency,
                offset,
            } => scale * (1.0 + amplitude * (frequency * x).sin()) * (x * x + offset),
            BasePotential::DoubleGaussian {
                scale,
                a1,
                w1,
                a2,
                w2,
            } => scale * (a1 * (-w1 * x * x).exp() - a2 * (-w2 * x * x).exp() + 1.0),
            BasePotential::CustomPolynomial { coeffs } => {
                coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
            }
        }
    }
}

/// Exterior profile for the free-energy setting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Exterior {
    /// ζ = k + r² − L_k².
    #[default]
    Radial,
    /// ζ = k + r̃² − L_k² with r̃ = (1 + sin(x₂/r)/2)·r.
    NonRadial,
}

/// Which family of potentials a field belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Setting {
    /// V₀ alone, for the bounded-domain problem.
    Plain,
    /// Bounded plateau k outside Ω_k.
    L2,
    /// Quadratically growing exterior ζ_k ≥ k.
    FreeEnergy,
    /// No buffer; k + |x|² outside Ω except on a slit |x₁| < 1/√k.
    Moses,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PotentialField {
    setting: Setting,
    k: Option<f64>,
    buffer: f64,
    values: Vec<f64>,
}

/// Smoothstep 3t² − 2t³ on [0, 1].
pub fn smoothstep(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

/// Sup-norm distance from `p` to the box `omega`.
fn sup_distance(omega: &[Interval], p: &[f64; 2]) -> f64 {
    omega
        .iter()
        .zip(p)
        .map(|(o, &x)| o.distance(x))
        .fold(0.0, f64::max)
}

fn project(omega: &[Interval], p: &[f64; 2]) -> [f64; 2] {
    let mut q = *p;
    for (o, x) in omega.iter().zip(q.iter_mut()) {
        *x = o.clamp(*x);
    }
    q
}

/// Half-width of Ω_k = Ω expanded by `buffer`, measured from the origin.
fn outer_half_width(omega: &[Interval], buffer: f64) -> f64 {
    omega
        .iter()
        .map(|o| (o.lo - buffer).abs().max((o.hi + buffer).abs()))
        .fold(0.0, f64::max)
}

fn zeta(k: f64, half_width: f64, p: &[f64; 2], exterior: Exterior) -> f64 {
    let r2 = p[0] * p[0] + p[1] * p[1];
    let rr = match exterior {
        Exterior::Radial => r2,
        Exterior::NonRadial => {
            let r = r2.sqrt();
            let s = if r < 1e-12 { 0.0 } else { (p[1] / r).sin() };
            let rt = (1.0 + 0.5 * s) * r;
            rt * rt
        }
    };
    k + rr - half_width * half_width
}

/// Buffer width for level `k` snapped to the nearest multiple of `dx`.
///
/// Returns the width and whether snapping changed it. A snapped width of
/// zero means V jumps straight from V₀ to the exterior value at ∂Ω.
pub fn snap_buffer(k: f64, dx: f64) -> (f64, bool) {
    let w = 1.0 / k;
    let n = (w / dx).round();
    let snapped = n * dx;
    let changed = ((w / dx) - n).abs() > 1e-9 * n.max(1.0);
    (if changed { snapped } else { w }, changed)
}

fn check_level(k: f64) -> Result<()> {
    if !(k >= 1.0) || !k.is_finite() {
        return config_err(format!("confinement level k must be a finite value >= 1, got {k}"));
    }
    Ok(())
}

impl PotentialField {
    /// V₀ alone on the given grid.
    pub fn plain(v0: &BasePotential, grid: &Grid) -> Result<Self> {
        let values = grid
            .points()
            .iter()
            .map(|p| v0.eval(p, grid.dim()))
            .collect();
        Self::finish(Setting::Plain, None, 0.0, values)
    }

    /// Bounded-plateau potential with the nominal buffer 1/k.
    pub fn l2(v0: &BasePotential, omega: &[Interval], k: f64, grid: &Grid) -> Result<Self> {
        Self::l2_with_buffer(v0, omega, k, 1.0 / k, grid)
    }

    pub fn l2_with_buffer(
        v0: &BasePotential,
        omega: &[Interval],
        k: f64,
        buffer: f64,
        grid: &Grid,
    ) -> Result<Self> {
        check_level(k)?;
        let dim = grid.dim();
        let interior_max = grid
            .points()
            .iter()
            .filter(|p| Grid::point_in(omega, p))
            .map(|p| v0.eval(p, dim))
            .fold(f64::NEG_INFINITY, f64::max);
        if interior_max > k {
            log::warn!("plateau k = {k} lies below the interior maximum {interior_max:.6} of V0");
        }
        let values = grid
            .points()
            .iter()
            .map(|p| blended(v0, omega, buffer, p, dim, |_| k))
            .collect();
        Self::finish(Setting::L2, Some(k), buffer, values)
    }

    /// Quadratically growing exterior with the nominal buffer 1/k.
    pub fn free_energy(
        v0: &BasePotential,
        omega: &[Interval],
        k: f64,
        exterior: Exterior,
        grid: &Grid,
    ) -> Result<Self> {
        Self::free_energy_with_buffer(v0, omega, k, 1.0 / k, exterior, grid)
    }

    pub fn free_energy_with_buffer(
        v0: &BasePotential,
        omega: &[Interval],
        k: f64,
        buffer: f64,
        exterior: Exterior,
        grid: &Grid,
    ) -> Result<Self> {
        check_level(k)?;
        let dim = grid.dim();
        let half = outer_half_width(omega, buffer);
        let values = grid
            .points()
            .iter()
            .map(|p| blended(v0, omega, buffer, p, dim, |q| zeta(k, half, q, exterior)))
            .collect();
        Self::finish(Setting::FreeEnergy, Some(k), buffer, values)
    }

    /// The slit potential on Ω = [−1, 1]²; with `slit = false` it is the
    /// plain quadratic confinement k + |x|² outside Ω.
    pub fn moses(k: f64, slit: bool, omega: &[Interval], grid: &Grid) -> Result<Self> {
        check_level(k)?;
        if grid.dim() != 2 {
            return Err(Error::Unsupported(
                "the slit confinement is defined in two dimensions only".into(),
            ));
        }
        let half_slit = 1.0 / k.sqrt();
        let values = grid
            .points()
            .iter()
            .map(|p| {
                if Grid::point_in(omega, p) || (slit && p[0].abs() < half_slit) {
                    0.0
                } else {
                    k + p[0] * p[0] + p[1] * p[1]
                }
            })
            .collect();
        Self::finish(Setting::Moses, Some(k), 0.0, values)
    }

    /// Wraps precomputed samples, e.g. a snapshot read back from disk.
    pub fn from_values(setting: Setting, k: Option<f64>, values: Vec<f64>) -> Result<Self> {
        Self::finish(setting, k, 0.0, values)
    }

    fn finish(setting: Setting, k: Option<f64>, buffer: f64, values: Vec<f64>) -> Result<Self> {
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v < 0.0)
        {
            return config_err(format!(
                "potential must be finite and non-negative; cell {i} has {v}"
            ));
        }
        Ok(PotentialField {
            setting,
            k,
            buffer,
            values,
        })
    }

    pub fn setting(&self) -> Setting {
        self.setting
    }

    pub fn k(&self) -> Option<f64> {
        self.k
    }

    pub fn buffer(&self) -> f64 {
        self.buffer
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

fn blended(
    v0: &BasePotential,
    omega: &[Interval],
    buffer: f64,
    p: &[f64; 2],
    dim: usize,
    exterior: impl Fn(&[f64; 2]) -> f64,
) -> f64 {
    let d = sup_distance(omega, p);
    if d == 0.0 {
        return v0.eval(p, dim);
    }
    if d > buffer {
        return exterior(p);
    }
    let y = project(omega, p);
    let inner = v0.eval(&y, dim);
    // the point on ∂Ω_k along the ray from π(x) through x
    let scale = buffer / d;
    let outer = [y[0] + (p[0] - y[0]) * scale, y[1] + (p[1] - y[1]) * scale];
    inner + (exterior(&outer) - inner) * smoothstep(d / buffer)
}

/// Interaction kernel W.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Kernel {
    #[default]
    Zero,
    /// W(z) = −(1 − |z|)₊.
    Hat,
}

impl Kernel {
    pub fn eval(&self, z: &[f64; 2]) -> f64 {
        match self {
            Kernel::Zero => 0.0,
            Kernel::Hat => {
                let r = (z[0] * z[0] + z[1] * z[1]).sqrt();
                -(1.0 - r).max(0.0)
            }
        }
    }

    /// Lower bound q with W ≥ −q.
    pub fn lower_bound(&self) -> f64 {
        match self {
            Kernel::Zero => 0.0,
            Kernel::Hat => 1.0,
        }
    }

    /// Radius outside which W vanishes, if any.
    pub fn support_radius(&self) -> Option<f64> {
        match self {
            Kernel::Zero => Some(0.0),
            Kernel::Hat => Some(1.0),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Kernel::Zero)
    }
}
