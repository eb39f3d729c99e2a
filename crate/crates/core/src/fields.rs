//! Discrete convolution W∗u, the chemical potential
//! h = log u + ξ(u) + V + W∗u, and face velocities v = −∇h.

use crate::confinement::Kernel;
use crate::grid::{Grid, SubDomain};
use crate::nonlinearity::Nonlinearity;

/// Density floor applied inside the logarithm only.
pub const DENSITY_FLOOR: f64 = 1e-12;

/// Midpoint-rule convolution on a uniform grid, with the kernel tabulated at
/// lattice displacements. Kernels are even, so W(xᵢ − xⱼ) = W(xⱼ − xᵢ).
#[derive(Debug, Clone)]
pub struct Convolution {
    nx: usize,
    ny: usize,
    rx: usize,
    ry: usize,
    weights: Vec<f64>,
    support: [(usize, usize); 2],
    cell_volume: f64,
}

impl Convolution {
    /// Builds the operator with source cells restricted to `support`.
    pub fn new(kernel: Kernel, support: &SubDomain) -> Option<Self> {
        if kernel.is_zero() {
            return None;
        }
        let grid = support.parent();
        let dx = grid.dx();
        let reach = |axis: usize| -> usize {
            let n = grid.cells(axis);
            if axis >= grid.dim() {
                return 0;
            }
            match kernel.support_radius() {
                Some(r) => ((r / dx).ceil() as usize).min(n - 1),
                None => n - 1,
            }
        };
        let (rx, ry) = (reach(0), reach(1));
        let (wx, wy) = (2 * rx + 1, 2 * ry + 1);
        let mut weights = Vec::with_capacity(wx * wy);
        for dj in 0..wy {
            for di in 0..wx {
                let z = [
                    (di as f64 - rx as f64) * dx,
                    (dj as f64 - ry as f64) * dx,
                ];
                weights.push(kernel.eval(&z));
            }
        }
        let r = support.ranges();
        let sy = r.get(1).map_or((0, 1), |r| (r.start, r.end));
        Some(Convolution {
            nx: grid.nx(),
            ny: grid.ny(),
            rx,
            ry,
            weights,
            support: [(r[0].start, r[0].end), sy],
            cell_volume: grid.cell_volume(),
        })
    }

    /// Writes (W∗u)ᵢ = dxᵈ Σⱼ W(xᵢ − xⱼ) uⱼ into `out`.
    pub fn apply(&self, u: &[f64], out: &mut [f64]) {
        let wx = 2 * self.rx + 1;
        let [(sx0, sx1), (sy0, sy1)] = self.support;
        for j in 0..self.ny {
            let jlo = j.saturating_sub(self.ry).max(sy0);
            let jhi = (j + self.ry + 1).min(sy1);
            for i in 0..self.nx {
                let ilo = i.saturating_sub(self.rx).max(sx0);
                let ihi = (i + self.rx + 1).min(sx1);
                if ilo >= ihi {
                    out[j * self.nx + i] = 0.0;
                    continue;
                }
                let mut acc = 0.0;
                for jj in jlo..jhi {
                    let wrow = (jj + self.ry - j) * wx + self.rx;
                    let urow = jj * self.nx;
                    let w = &self.weights[wrow + ilo - i..wrow + ihi - i];
                    let us = &u[urow + ilo..urow + ihi];
                    acc += w.iter().zip(us).map(|(a, b)| a * b).sum::<f64>();
                }
                out[j * self.nx + i] = self.cell_volume * acc;
            }
        }
    }
}

/// W∗u over the cells of `support`; a zero kernel gives a zero field.
pub fn convolve(u: &[f64], kernel: Kernel, support: &SubDomain) -> Vec<f64> {
    let mut out = vec![0.0; u.len()];
    if let Some(op) = Convolution::new(kernel, support) {
        op.apply(u, &mut out);
    }
    out
}

/// hᵢ = log(max(uᵢ, floor)) + ξ(uᵢ) + Vᵢ + convᵢ; the log is dropped for
/// degenerate diffusion.
pub fn assemble_chem(
    u: &[f64],
    law: &Nonlinearity,
    potential: &[f64],
    conv: Option<&[f64]>,
    degenerate: bool,
    floor: f64,
    out: &mut [f64],
) {
    for (i, h) in out.iter_mut().enumerate() {
        let s = u[i];
        let mut v = law.xi_raw(s) + potential[i];
        if !degenerate {
            v += s.max(floor).ln();
        }
        if let Some(c) = conv {
            v += c[i];
        }
        *h = v;
    }
}

/// Velocities on interior faces, stored per axis.
///
/// x-faces: `j * (nx - 1) + i` sits between cells `(i, j)` and `(i + 1, j)`.
/// y-faces: `j * nx + i` sits between cells `(i, j)` and `(i, j + 1)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FaceField {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl FaceField {
    pub fn zeros(grid: &Grid) -> Self {
        let (nx, ny) = (grid.nx(), grid.ny());
        let y = if grid.dim() == 2 { nx * (ny - 1) } else { 0 };
        FaceField {
            x: vec![0.0; (nx - 1) * ny],
            y: vec![0.0; y],
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.x
            .iter()
            .chain(&self.y)
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.x.iter().chain(&self.y)
    }
}

/// v = −(h₊ − h₋)/dx on every interior face.
pub fn face_velocities(h: &[f64], grid: &Grid, out: &mut FaceField) {
    let (nx, ny) = (grid.nx(), grid.ny());
    let inv = 1.0 / grid.dx();
    for j in 0..ny {
        let row = &h[j * nx..(j + 1) * nx];
        let vrow = &mut out.x[j * (nx - 1)..(j + 1) * (nx - 1)];
        for (v, w) in vrow.iter_mut().zip(row.windows(2)) {
            *v = -(w[1] - w[0]) * inv;
        }
    }
    if grid.dim() == 2 {
        for j in 0..ny - 1 {
            for i in 0..nx {
                out.y[j * nx + i] = -(h[(j + 1) * nx + i] - h[j * nx + i]) * inv;
            }
        }
    }
}
