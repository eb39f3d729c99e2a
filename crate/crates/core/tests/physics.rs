use nlfp::confinement::{BasePotential, Kernel, PotentialField};
use nlfp::diagnostics::{tail_check, Diagnostics};
use nlfp::grid::{Grid, Interval};
use nlfp::nonlinearity::Nonlinearity;
use nlfp::scenarios::{build_confined, build_limit, scenario};
use nlfp::solver::{NoObserver, Observer, Problem, Solver, SolverParams, State, StepInfo};
use proptest::prelude::*;

/// Accumulates Σ D_h·dt with the dissipation of the state reached by each step.
struct Balance {
    diag: Diagnostics,
    dissipated: f64,
    worst: f64,
    e0: f64,
}

impl Observer for Balance {
    fn observe(&mut self, _: &Problem, _: &State) -> nlfp::Result<()> {
        Ok(())
    }

    fn on_step(&mut self, _: &Problem, s: &State, info: &StepInfo) -> nlfp::Result<()> {
        self.dissipated += self.diag.dissipation(s) * info.dt;
        let gap = (self.diag.free_energy(s) + self.dissipated - self.e0) / self.e0.abs();
        self.worst = self.worst.max(gap.abs());
        Ok(())
    }
}

fn balance_gap(problem: Problem, u0: State, t: f64) -> f64 {
    let diag = Diagnostics::new(&problem, None);
    let e0 = diag.free_energy(&u0);
    let mut b = Balance { diag, dissipated: 0.0, worst: 0.0, e0 };
    Solver::new(problem).run(&u0, t, &[], &mut b).unwrap();
    b.worst
}

#[test]
fn energy_balance_on_the_quadratic_well() {
    let cfg = scenario("fig2_linear").unwrap();
    let (p, u0) = build_limit(&cfg).unwrap();
    let gap = balance_gap(p, u0, cfg.t_final);
    assert!(gap <= 5e-2, "limit: {gap}");
    let (p, u0, _) = build_confined(&cfg, 5.0).unwrap();
    let gap = balance_gap(p, u0, cfg.t_final);
    assert!(gap <= 5e-2, "k = 5: {gap}");
}

#[test]
fn free_energy_decreases_with_interaction() {
    let cfg = scenario("fig4_nonlinear_nonlocal").unwrap();
    let (p, u0) = build_limit(&cfg).unwrap();
    let diag = Diagnostics::new(&p, None);
    let mut solver = Solver::new(p);
    let mut s = u0;
    let mut e = diag.free_energy(&s);
    for _ in 0..5 {
        s = solver.run(&s, s.t() + 0.01, &[], &mut NoObserver).unwrap();
        let next = diag.free_energy(&s);
        assert!(next < e, "{next} >= {e}");
        e = next;
    }
}

#[test]
fn gibbs_state_has_negligible_dissipation() {
    let g = Grid::new_1d(-4.0, 4.0, 0.01).unwrap();
    let v0 = BasePotential::Quadratic { coeff: 1.5 };
    let pot = PotentialField::plain(&v0, &g).unwrap();
    let z: f64 = pot.values().iter().map(|v| (-v).exp()).sum::<f64>() * g.dx();
    let u: Vec<f64> = pot.values().iter().map(|v| (-v).exp() / z).collect();
    let p = Problem::new(g.clone(), Nonlinearity::linear(), pot, Kernel::Zero, SolverParams::default()).unwrap();
    let mut diag = Diagnostics::new(&p, None);
    let d = diag.dissipation(&State::new(g, u, 0.0).unwrap());
    assert!(d < 1e-20, "{d}");
}

fn plateau_problem() -> (Problem, Vec<f64>) {
    let cfg = scenario("fig2_linear").unwrap();
    let (p, _, _) = build_confined(&cfg, 5.0).unwrap();
    let v = p.potential.values().to_vec();
    (p, v)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn tail_bound_survives_truncation_and_scaling(
        lo in -3.5f64..0.0,
        width in 0.5f64..3.5,
        frac in 0.1f64..1.0,
    ) {
        let (p, v) = plateau_problem();
        let g = p.grid.clone();
        let hi = (lo + width).min(3.5);
        let u: Vec<f64> = g
            .centers(0)
            .iter()
            .zip(&v)
            .map(|(&x, vi)| if Interval::new(lo, hi).contains(x) { frac * (-vi).exp() } else { 0.0 })
            .collect();
        let s0 = State::new(g, u, 0.0).unwrap();
        let end = Solver::new(p).run(&s0, 0.02, &[], &mut NoObserver).unwrap();
        prop_assert!(tail_check(&end, &v, 1.0) <= 1e-3);
    }

    #[test]
    fn mass_is_conserved_for_random_data(seed in prop::collection::vec(0.0f64..3.0, 40)) {
        let g = Grid::new_1d(-1.0, 1.0, 0.05).unwrap();
        let pot = PotentialField::plain(&BasePotential::fig4(), &g).unwrap();
        let law = Nonlinearity::quadratic(0.49).unwrap();
        let p = Problem::new(g.clone(), law, pot, Kernel::Hat, SolverParams::default()).unwrap();
        let s0 = State::new(g, seed, 0.0).unwrap();
        let m0 = s0.mass();
        let end = Solver::new(p).run(&s0, 0.01, &[], &mut NoObserver).unwrap();
        prop_assert!(end.min() >= 0.0);
        if m0 > 0.0 {
            prop_assert!(((end.mass() - m0) / m0).abs() <= 1e-12);
        }
    }
}
