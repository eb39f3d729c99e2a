//! Scalar functionals of a density: mass, norms, energies, dissipation, and
//! the discrete counterparts of the a priori bounds.

use serde::{Deserialize, Serialize};

use crate::error::{config_err, Result};
use crate::fields::FaceField;
use crate::grid::{Grid, SubDomain};
use crate::nonlinearity::{xlogx, Nonlinearity};
use crate::solver::{Observer, Problem, Solver, State, StepInfo};

/// One row of a diagnostics time series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub mass: f64,
    pub mass_outside: f64,
    /// Distance to the reference solution on Ω, when one is attached.
    pub l2_error_omega: Option<f64>,
    pub free_energy: f64,
    pub dissipation: f64,
    pub weighted_l2: f64,
    /// Undefined for degenerate diffusion.
    pub weighted_q: Option<f64>,
    pub max_tail: f64,
    pub carleman_slack: f64,
}

/// dxᵈ Σ [u log u + Ξ(u) + uV + ½u(W∗u)]; the entropy term is dropped for
/// degenerate diffusion.
pub fn free_energy(
    state: &State,
    law: &Nonlinearity,
    potential: &[f64],
    conv: Option<&[f64]>,
    degenerate: bool,
) -> f64 {
    let u = state.values();
    let mut acc = 0.0;
    for (i, &s) in u.iter().enumerate() {
        let mut e = law.big_xi_raw(s) + s * potential[i];
        if !degenerate {
            e += xlogx(s);
        }
        if let Some(c) = conv {
            e += 0.5 * s * c[i];
        }
        acc += e;
    }
    acc * state.grid().cell_volume()
}

/// dxᵈ Σ_faces ũ v² with ũ the upwinded face density.
pub fn dissipation(grid: &Grid, velocity: &FaceField, upwind: &FaceField) -> f64 {
    let sum: f64 = velocity
        .iter()
        .zip(upwind.iter())
        .map(|(v, u)| u * v * v)
        .sum();
    sum * grid.cell_volume()
}

/// Discrete L² distance between `a` and `b` over the cells of `sub`.
///
/// `a` lives on the parent grid of `sub`; `b` may live on the parent grid
/// or on the grid of `sub` itself.
pub fn l2_error_on(sub: &SubDomain, a: &State, b: &State) -> Result<f64> {
    if a.grid() != sub.parent() {
        return config_err("first state is not on the grid that contains the sub-domain");
    }
    let av = sub.extract(a.values());
    let bv = if b.grid() == sub.parent() {
        sub.extract(b.values())
    } else if *b.grid() == sub.grid() {
        b.values().to_vec()
    } else {
        return config_err("second state is not aligned with the sub-domain");
    };
    let s: f64 = av.iter().zip(&bv).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok((s * sub.parent().cell_volume()).sqrt())
}

/// Mass in the cells outside `omega`.
pub fn mass_outside(state: &State, omega: &SubDomain) -> f64 {
    let u = state.values();
    omega.complement().map(|i| u[i]).sum::<f64>() * state.grid().cell_volume()
}

/// Discrete L² norm over the cells outside `omega`.
pub fn l2_norm_outside(state: &State, omega: &SubDomain) -> f64 {
    let u = state.values();
    let s: f64 = omega.complement().map(|i| u[i] * u[i]).sum();
    (s * state.grid().cell_volume()).sqrt()
}

/// dxᵈ Σ u² e^V.
pub fn weighted_l2(state: &State, potential: &[f64]) -> f64 {
    let s: f64 = state
        .values()
        .iter()
        .zip(potential)
        .map(|(u, v)| u * u * v.exp())
        .sum();
    s * state.grid().cell_volume()
}

/// dxᵈ Σ e^V Q(u); `None` when Q is undefined for the law.
pub fn weighted_q(state: &State, law: &Nonlinearity, potential: &[f64]) -> Option<f64> {
    if law.is_degenerate() {
        return None;
    }
    let s: f64 = state
        .values()
        .iter()
        .zip(potential)
        .map(|(&u, v)| law.q_raw(u) * v.exp())
        .sum();
    Some(s * state.grid().cell_volume())
}

/// max uᵢ e^{Vᵢ}.
pub fn max_tail(state: &State, potential: &[f64]) -> f64 {
    state
        .values()
        .iter()
        .zip(potential)
        .map(|(u, v)| u * v.exp())
        .fold(0.0, f64::max)
}

/// max(0, max uᵢ e^{Vᵢ} − m).
pub fn tail_check(state: &State, potential: &[f64], m: f64) -> f64 {
    (max_tail(state, potential) - m).max(0.0)
}

/// dxᵈ Σ [ρ(log ρ)₋ − γρ − e^{−γ}/e]; non-positive for admissible pairs.
pub fn carleman_check(rho: &State, gamma: &[f64]) -> f64 {
    let inv_e = (-1.0f64).exp();
    let s: f64 = rho
        .values()
        .iter()
        .zip(gamma)
        .map(|(&r, &g)| {
            let neg = if r > 0.0 && r < 1.0 { -r * r.ln() } else { 0.0 };
            neg - g * r - inv_e * (-g).exp()
        })
        .sum();
    s * rho.grid().cell_volume()
}

/// Computes every entry of a [`DiagnosticsRecord`] for states of one problem.
#[derive(Debug, Clone)]
pub struct Diagnostics {
    solver: Solver,
    omega: Option<SubDomain>,
    reference: Vec<State>,
    gamma: Vec<f64>,
}

impl Diagnostics {
    /// `omega` marks Ω inside the problem grid; `None` means the whole grid.
    pub fn new(problem: &Problem, omega: Option<SubDomain>) -> Self {
        let gamma = problem.potential.values().iter().map(|v| 0.5 * v).collect();
        Diagnostics {
            solver: Solver::new(problem.clone()),
            omega,
            reference: Vec::new(),
            gamma,
        }
    }

    /// Attaches reference states (on Ω or on the full grid) compared at
    /// matching observation times.
    pub fn with_reference(mut self, reference: Vec<State>) -> Self {
        self.reference = reference;
        self
    }

    pub fn problem(&self) -> &Problem {
        self.solver.problem()
    }

    pub fn omega(&self) -> Option<&SubDomain> {
        self.omega.as_ref()
    }

    fn conv(&self, u: &[f64]) -> Option<Vec<f64>> {
        let p = self.solver.problem();
        if p.kernel.is_zero() {
            return None;
        }
        Some(crate::fields::convolve(u, p.kernel, &p.support))
    }

    pub fn free_energy(&self, state: &State) -> f64 {
        let p = self.solver.problem();
        let conv = self.conv(state.values());
        free_energy(
            state,
            &p.law,
            p.potential.values(),
            conv.as_deref(),
            p.degenerate,
        )
    }

    pub fn dissipation(&mut self, state: &State) -> f64 {
        let (vel, up) = self.solver.upwind_faces(state.values());
        dissipation(state.grid(), &vel, &up)
    }

    fn reference_at(&self, t: f64) -> Option<&State> {
        self.reference
            .iter()
            .find(|s| (s.t() - t).abs() <= 1e-9 * t.abs().max(1.0))
    }

    pub fn record(&mut self, state: &State) -> Result<DiagnosticsRecord> {
        let p = self.solver.problem();
        let v = p.potential.values();
        let (outside, err) = match &self.omega {
            Some(om) => {
                let err = match self.reference_at(state.t()) {
                    Some(r) => Some(l2_error_on(om, state, r)?),
                    None => None,
                };
                (mass_outside(state, om), err)
            }
            None => (0.0, None),
        };
        let weighted_q = weighted_q(state, &p.law, v);
        let record = DiagnosticsRecord {
            t: state.t(),
            mass: state.mass(),
            mass_outside: outside,
            l2_error_omega: err,
            free_energy: self.free_energy(state),
            dissipation: 0.0,
            weighted_l2: weighted_l2(state, v),
            weighted_q,
            max_tail: max_tail(state, v),
            carleman_slack: carleman_check(state, &self.gamma),
        };
        Ok(DiagnosticsRecord {
            dissipation: self.dissipation(state),
            ..record
        })
    }
}

/// Per-step checks accumulated during a run.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StepAudit {
    pub steps: usize,
    pub retries: u32,
    pub min_value: f64,
    pub max_mass_drift: f64,
    /// Largest E_{n+1} − E_n.
    pub max_energy_increase: f64,
    /// Largest relative increase of dxΣu²e^V.
    pub max_weighted_l2_increase: f64,
    /// Largest relative increase of dxΣe^V Q(u).
    pub max_weighted_q_increase: f64,
    pub min_dt: f64,
}

#[derive(Debug, Clone, Copy)]
struct Levels {
    mass: f64,
    energy: f64,
    wl2: f64,
    wq: Option<f64>,
}

/// Observer that records diagnostics at observation times, optionally keeps
/// the observed states, and audits every accepted step.
#[derive(Debug, Clone)]
pub struct Recorder {
    diag: Diagnostics,
    pub records: Vec<DiagnosticsRecord>,
    pub snapshots: Vec<State>,
    keep_snapshots: bool,
    audit_energy: bool,
    pub audit: StepAudit,
    initial: Option<Levels>,
    last: Option<Levels>,
}

impl Recorder {
    pub fn new(diag: Diagnostics) -> Self {
        Recorder {
            diag,
            records: Vec::new(),
            snapshots: Vec::new(),
            keep_snapshots: false,
            audit_energy: false,
            audit: StepAudit {
                min_value: f64::INFINITY,
                min_dt: f64::INFINITY,
                ..Default::default()
            },
            initial: None,
            last: None,
        }
    }

    pub fn keep_snapshots(mut self, keep: bool) -> Self {
        self.keep_snapshots = keep;
        self
    }

    /// Evaluates the free energy and weighted energies after every step.
    pub fn audit_energy(mut self, on: bool) -> Self {
        self.audit_energy = on;
        self
    }

    pub fn diagnostics(&self) -> &Diagnostics {
        &self.diag
    }

    fn levels(&self, state: &State) -> Levels {
        let p = self.diag.problem();
        let v = p.potential.values();
        let (energy, wl2, wq) = if self.audit_energy {
            (
                self.diag.free_energy(state),
                weighted_l2(state, v),
                weighted_q(state, &p.law, v),
            )
        } else {
            (0.0, 0.0, None)
        };
        Levels {
            mass: state.mass(),
            energy,
            wl2,
            wq,
        }
    }

    /// Sets the baseline for the step audit; called before the run starts.
    pub fn start(&mut self, state: &State) {
        let l = self.levels(state);
        self.initial = Some(l);
        self.last = Some(l);
        self.audit.min_value = self.audit.min_value.min(state.min());
    }
}

fn rel_increase(new: f64, old: f64) -> f64 {
    (new - old) / old.abs().max(f64::MIN_POSITIVE)
}

impl Observer for Recorder {
    fn observe(&mut self, _problem: &Problem, state: &State) -> Result<()> {
        let rec = self.diag.record(state)?;
        self.records.push(rec);
        if self.keep_snapshots {
            self.snapshots.push(state.clone());
        }
        Ok(())
    }

    fn on_step(&mut self, _problem: &Problem, state: &State, info: &StepInfo) -> Result<()> {
        let a = &mut self.audit;
        a.steps += 1;
        a.retries += info.retries;
        a.min_dt = a.min_dt.min(info.dt);
        a.min_value = a.min_value.min(state.min());
        let now = self.levels(state);
        if let (Some(init), Some(prev)) = (self.initial, self.last) {
            let a = &mut self.audit;
            a.max_mass_drift = a
                .max_mass_drift
                .max(((now.mass - init.mass) / init.mass).abs());
            if self.audit_energy {
                a.max_energy_increase = a.max_energy_increase.max(now.energy - prev.energy);
                a.max_weighted_l2_increase =
                    a.max_weighted_l2_increase.max(rel_increase(now.wl2, prev.wl2));
                if let (Some(n), Some(p)) = (now.wq, prev.wq) {
                    a.max_weighted_q_increase =
                        a.max_weighted_q_increase.max(rel_increase(n, p));
                }
            }
        }
        self.last = Some(now);
        Ok(())
    }
}
