//! The diffusion law φ and the scalar functionals derived from it.
//!
//! Non-degenerate laws have the form φ(s) = s + σ(s); the degenerate law is
//! φ = σ. With σ′ known in closed form every kind gets
//!
//! * ξ(s) = ∫₁ˢ σ′(r)/r dr and Ξ(s) = ∫₀ˢ ξ,
//! * P(s) = exp(∫₁ˢ φ′(r)/r dr) = s·e^{ξ(s)} and Q(s) = ∫₀ˢ P,
//! * Θ(s) = ∫₀ˢ ∫₁ᵗ φ′(r)/r dr dt.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{adaptive_simpson, DEFAULT_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DiffusionKind {
    /// φ(s) = s.
    Linear,
    /// φ(s) = s + βs².
    Quadratic { beta: f64 },
    /// φ(s) = s + βsᵐ.
    Power { beta: f64, m: f64 },
    /// φ(s) = βsᵐ (no linear part).
    Degenerate { beta: f64, m: f64 },
}

/// Constants (μ, a, b) of the growth bound μ sᵃ ≤ σ′(s) ≤ sᵇ/μ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthBounds {
    pub mu: f64,
    pub a: f64,
    pub b: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Nonlinearity {
    kind: DiffusionKind,
}

fn check_domain(function: &'static str, s: f64) -> Result<()> {
    if s >= 0.0 {
        Ok(())
    } else {
        Err(Error::Domain {
            function,
            value: s,
            expected: "s >= 0",
        })
    }
}

/// s·log s with 0·log 0 = 0.
pub fn xlogx(s: f64) -> f64 {
    if s > 0.0 {
        s * s.ln()
    } else {
        0.0
    }
}

impl Nonlinearity {
    pub fn new(kind: DiffusionKind) -> Result<Self> {
        let bad = |what: &str| Err(Error::Unsupported(format!("{what} in {kind:?}")));
        match kind {
            DiffusionKind::Linear => {}
            DiffusionKind::Quadratic { beta } => {
                if !(beta > 0.0 && beta.is_finite()) {
                    return bad("beta must be positive");
                }
            }
            DiffusionKind::Power { beta, m } | DiffusionKind::Degenerate { beta, m } => {
                if !(beta > 0.0 && beta.is_finite()) {
                    return bad("beta must be positive");
                }
                if !(m > 1.0 && m.is_finite()) {
                    return bad("exponent m must exceed 1");
                }
            }
        }
        Ok(Nonlinearity { kind })
    }

    pub fn linear() -> Self {
        Nonlinearity {
            kind: DiffusionKind::Linear,
        }
    }

    pub fn quadratic(beta: f64) -> Result<Self> {
        Self::new(DiffusionKind::Quadratic { beta })
    }

    pub fn kind(&self) -> DiffusionKind {
        self.kind
    }

    pub fn is_degenerate(&self) -> bool {
        matches!(self.kind, DiffusionKind::Degenerate { .. })
    }

    /// (β, m) of σ(s) = βsᵐ, or `None` for linear diffusion.
    fn sigma_params(&self) -> Option<(f64, f64)> {
        match self.kind {
            DiffusionKind::Linear => None,
            DiffusionKind::Quadratic { beta } => Some((beta, 2.0)),
            DiffusionKind::Power { beta, m } | DiffusionKind::Degenerate { beta, m } => {
                Some((beta, m))
            }
        }
    }

    pub fn growth_bounds(&self) -> Option<GrowthBounds> {
        let (beta, m) = self.sigma_params()?;
        let c = beta * m;
        Some(GrowthBounds {
            mu: c.min(1.0 / c),
            a: m - 1.0,
            b: m - 1.0,
        })
    }

    fn linear_part(&self) -> f64 {
        if self.is_degenerate() {
            0.0
        } else {
            1.0
        }
    }

    pub(crate) fn sigma_prime_raw(&self, s: f64) -> f64 {
        match self.sigma_params() {
            None => 0.0,
            Some((beta, m)) => beta * m * s.powf(m - 1.0),
        }
    }

    /// ξ(s) without the domain check; used on the solver's hot path.
    #[inline]
    pub(crate) fn xi_raw(&self, s: f64) -> f64 {
        match self.kind {
            DiffusionKind::Linear => 0.0,
            DiffusionKind::Quadratic { beta } => 2.0 * beta * (s - 1.0),
            DiffusionKind::Power { beta, m } | DiffusionKind::Degenerate { beta, m } => {
                beta * m * (s.powf(m - 1.0) - 1.0) / (m - 1.0)
            }
        }
    }

    #[inline]
    pub(crate) fn big_xi_raw(&self, s: f64) -> f64 {
        match self.sigma_params() {
            None => 0.0,
            Some((beta, m)) => beta * (s.powf(m) - m * s) / (m - 1.0),
        }
    }

    pub fn phi(&self, s: f64) -> Result<f64> {
        check_domain("phi", s)?;
        let sigma = self.sigma_params().map_or(0.0, |(beta, m)| beta * s.powf(m));
        Ok(self.linear_part() * s + sigma)
    }

    pub fn phi_prime(&self, s: f64) -> Result<f64> {
        check_domain("phi_prime", s)?;
        Ok(self.phi_prime_raw(s))
    }

    #[inline]
    pub(crate) fn phi_prime_raw(&self, s: f64) -> f64 {
        self.linear_part() + self.sigma_prime_raw(s)
    }

    pub fn sigma_prime(&self, s: f64) -> Result<f64> {
        check_domain("sigma_prime", s)?;
        Ok(self.sigma_prime_raw(s))
    }

    pub fn xi(&self, s: f64) -> Result<f64> {
        check_domain("xi", s)?;
        Ok(self.xi_raw(s))
    }

    pub fn big_xi(&self, s: f64) -> Result<f64> {
        check_domain("Xi", s)?;
        Ok(self.big_xi_raw(s))
    }

    /// P(s) = s·e^{ξ(s)}; undefined for degenerate diffusion.
    pub fn p(&self, s: f64) -> Result<f64> {
        check_domain("P", s)?;
        if self.is_degenerate() {
            return Err(Error::UnsupportedFunctional("P"));
        }
        Ok(self.p_raw(s))
    }

    fn p_raw(&self, s: f64) -> f64 {
        s * self.xi_raw(s).exp()
    }

    /// Q(s) = ∫₀ˢ P with Q(0) = 0.
    pub fn q(&self, s: f64) -> Result<f64> {
        check_domain("Q", s)?;
        if self.is_degenerate() {
            return Err(Error::UnsupportedFunctional("Q"));
        }
        Ok(self.q_raw(s))
    }

    pub(crate) fn q_raw(&self, s: f64) -> f64 {
        match self.kind {
            DiffusionKind::Linear => 0.5 * s * s,
            DiffusionKind::Quadratic { beta } if beta >= 1e-3 => {
                // ∫₀ˢ r e^{c(r-1)} dr with c = 2β.
                let c = 2.0 * beta;
                let inv = 1.0 / c;
                (-c).exp() * ((c * s).exp() * (s * inv - inv * inv) + inv * inv)
            }
            _ => adaptive_simpson(|r| self.p_raw(r), 0.0, s, DEFAULT_TOL),
        }
    }

    /// Θ(s): s log s − s + Ξ(s), or Ξ(s) for degenerate diffusion.
    pub fn theta(&self, s: f64) -> Result<f64> {
        check_domain("Theta", s)?;
        let entropy = if self.is_degenerate() {
            0.0
        } else {
            xlogx(s) - s
        };
        Ok(entropy + self.big_xi_raw(s))
    }

    /// Samples φ′ and the growth bounds on a log grid s ∈ [1e-8, 1e3].
    pub fn check_structure(&self) -> Result<()> {
        let bounds = self.growth_bounds();
        for s in log_grid(1e-8, 1e3, 200) {
            let dphi = self.phi_prime(s)?;
            if !(dphi > 0.0) {
                return Err(Error::Unsupported(format!(
                    "phi is not strictly increasing at s = {s:e}"
                )));
            }
            if let Some(g) = bounds {
                let sp = self.sigma_prime_raw(s);
                let lo = g.mu * s.powf(g.a);
                let hi = s.powf(g.b) / g.mu;
                let slack = 1e-12 * sp.abs().max(1e-300);
                if sp < lo - slack || sp > hi + slack {
                    return Err(Error::Unsupported(format!(
                        "growth bound violated at s = {s:e}: {lo:e} <= {sp:e} <= {hi:e}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// `n` log-spaced points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// θ_{p,a} = ((p−1)/(e·a))^{(p−1)/a}, the sharp constant in sᵖ ≤ θ·s·e^{sᵃ}.
pub fn theta_pa(p: f64, a: f64) -> Result<f64> {
    if !(p > 1.0) {
        return Err(Error::Domain {
            function: "theta_pa",
            value: p,
            expected: "p > 1",
        });
    }
    if !(a > 0.0) {
        return Err(Error::Domain {
            function: "theta_pa",
            value: a,
            expected: "a > 0",
        });
    }
    let e = (p - 1.0) / a;
    Ok(((p - 1.0) / (std::f64::consts::E * a)).powf(e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn quad() -> Nonlinearity {
        Nonlinearity::quadratic(0.49).unwrap()
    }

    fn all_kinds() -> Vec<Nonlinearity> {
        vec![
            Nonlinearity::linear(),
            quad(),
            Nonlinearity::new(DiffusionKind::Power { beta: 0.3, m: 3.0 }).unwrap(),
            Nonlinearity::new(DiffusionKind::Degenerate { beta: 0.49, m: 2.0 }).unwrap(),
        ]
    }

    #[test]
    fn phi_values() {
        assert_abs_diff_eq!(quad().phi(1.0).unwrap(), 1.49, epsilon = 1e-15);
        assert_eq!(Nonlinearity::linear().phi(2.5).unwrap(), 2.5);
        for n in all_kinds() {
            assert_eq!(n.phi(0.0).unwrap(), 0.0);
        }
    }

    #[test]
    fn negative_density_is_domain_error() {
        let n = quad();
        assert!(matches!(n.phi(-1e-3), Err(Error::Domain { .. })));
        assert!(n.xi(-1.0).is_err());
        assert!(n.q(-1.0).is_err());
        assert!(n.theta(-1.0).is_err());
    }

    #[test]
    fn derivatives_match_finite_differences() {
        for n in all_kinds() {
            for s in log_grid(1e-3, 1e2, 20) {
                let h = 1e-6 * s;
                let fd = (n.phi(s + h).unwrap() - n.phi(s - h).unwrap()) / (2.0 * h);
                assert_relative_eq!(n.phi_prime(s).unwrap(), fd, max_relative = 1e-6);
            }
        }
    }

    #[test]
    fn xi_vanishes_at_one() {
        for n in all_kinds() {
            assert_abs_diff_eq!(n.xi(1.0).unwrap(), 0.0, epsilon = 1e-15);
        }
        let lin = Nonlinearity::linear();
        assert_eq!(lin.xi(3.0).unwrap(), 0.0);
        assert_eq!(lin.big_xi(3.0).unwrap(), 0.0);
    }

    #[test]
    fn xi_matches_quadrature() {
        for n in all_kinds() {
            for &s in &[0.2, 1.0, 2.0, 7.5] {
                let oracle = adaptive_simpson(|r| n.sigma_prime_raw(r) / r, 1.0, s, 1e-12);
                assert_abs_diff_eq!(n.xi(s).unwrap(), oracle, epsilon = 1e-9);
                let oracle_big = adaptive_simpson(|t| n.xi_raw(t), 0.0, s, 1e-12);
                assert_abs_diff_eq!(n.big_xi(s).unwrap(), oracle_big, epsilon = 1e-9);
            }
        }
        // ∫₁² 2β dr with β = 0.49.
        assert_abs_diff_eq!(quad().xi(2.0).unwrap(), 0.98, epsilon = 1e-14);
    }

    #[test]
    fn p_and_q_basics() {
        for n in all_kinds().into_iter().filter(|n| !n.is_degenerate()) {
            assert_abs_diff_eq!(n.p(1.0).unwrap(), 1.0, epsilon = 1e-15);
            assert_eq!(n.q(0.0).unwrap(), 0.0);
        }
        let oracle = (adaptive_simpson(|s| 1.0 / s + 0.98, 1.0, 2.0, 1e-13)).exp();
        assert_abs_diff_eq!(quad().p(2.0).unwrap(), oracle, epsilon = 1e-10);
        assert_abs_diff_eq!(quad().p(2.0).unwrap(), 5.328_912, epsilon = 1e-6);
    }

    #[test]
    fn degenerate_has_no_p() {
        let n = Nonlinearity::new(DiffusionKind::Degenerate { beta: 1.0, m: 2.0 }).unwrap();
        assert!(matches!(n.p(1.0), Err(Error::UnsupportedFunctional("P"))));
        assert!(matches!(n.q(1.0), Err(Error::UnsupportedFunctional("Q"))));
    }

    #[test]
    fn quadratic_q_closed_form_matches_quadrature() {
        let n = quad();
        for &s in &[0.01, 0.5, 1.0, 3.0, 10.0] {
            let tol = 1e-13 * (1.0 + s * s * (0.98_f64 * s).exp());
            let oracle = adaptive_simpson(|r| r * (0.98 * (r - 1.0)).exp(), 0.0, s, tol);
            assert_relative_eq!(n.q(s).unwrap(), oracle, max_relative = 1e-10, epsilon = 1e-14);
        }
    }

    #[test]
    fn q_lower_bounds() {
        let n = quad();
        let (mu, a) = (0.98_f64, 1.0_f64);
        let c = (-mu / a).exp();
        for s in log_grid(1e-4, 20.0, 200) {
            let p = n.p(s).unwrap();
            assert!(p >= c * s * (1.0 - 1e-12), "P/s at {s}");
            if s >= 1.0 {
                let bound = s * (mu / a * (s.powf(a) - 1.0)).exp();
                assert!(p >= bound * (1.0 - 1e-12), "P at {s}");
            }
            assert!(n.q(s).unwrap() >= 0.5 * c * s * s * (1.0 - 1e-12), "Q at {s}");
        }
    }

    #[test]
    fn q_is_convex() {
        let n = quad();
        let pts = log_grid(1e-3, 10.0, 40);
        for &s in &pts {
            for &t in &pts {
                let mid = n.q(0.5 * (s + t)).unwrap();
                let avg = 0.5 * (n.q(s).unwrap() + n.q(t).unwrap());
                assert!(mid <= avg + 1e-12 * avg.abs(), "{s} {t}");
            }
        }
    }

    #[test]
    fn power_q_uses_quadrature() {
        let n = Nonlinearity::new(DiffusionKind::Power { beta: 0.3, m: 3.0 }).unwrap();
        let oracle = adaptive_simpson(|r| r * n.xi_raw(r).exp(), 0.0, 2.0, 1e-12);
        assert_abs_diff_eq!(n.q(2.0).unwrap(), oracle, epsilon = 1e-9);
    }

    fn theta_oracle(n: &Nonlinearity, s: f64) -> f64 {
        // Θ(s) = ∫₀ˢ g(t) dt with g(t) = ∫₁ᵗ φ′(r)/r dr, both written in
        // logarithmic variables so the integrands stay smooth.
        let g = |y: f64| adaptive_simpson(|z| n.phi_prime(z.exp()).unwrap(), 0.0, y, 1e-12);
        adaptive_simpson(|y| g(y) * y.exp(), -40.0, s.ln(), 1e-11)
    }

    #[test]
    fn theta_matches_double_quadrature() {
        let lin = Nonlinearity::linear();
        let e = std::f64::consts::E;
        assert_abs_diff_eq!(lin.theta(e).unwrap(), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(lin.theta(e).unwrap(), theta_oracle(&lin, e), epsilon = 1e-8);
        assert_abs_diff_eq!(lin.theta(1.0).unwrap(), -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(lin.theta(1.0).unwrap(), theta_oracle(&lin, 1.0), epsilon = 1e-8);
        let q = quad();
        let expected = 2.0 * 2f64.ln() - 2.0 + q.big_xi(2.0).unwrap();
        assert_abs_diff_eq!(q.theta(2.0).unwrap(), expected, epsilon = 1e-14);
        assert_abs_diff_eq!(q.theta(2.0).unwrap(), theta_oracle(&q, 2.0), epsilon = 1e-8);
        let d = Nonlinearity::new(DiffusionKind::Degenerate { beta: 0.49, m: 2.0 }).unwrap();
        assert_abs_diff_eq!(d.theta(1.5).unwrap(), d.big_xi(1.5).unwrap(), epsilon = 1e-15);
        assert_abs_diff_eq!(d.theta(1.5).unwrap(), theta_oracle(&d, 1.5), epsilon = 1e-8);
        assert_eq!(lin.theta(0.0).unwrap(), 0.0);
    }

    /// max over s of s^{p−1}·e^{−sᵃ}, by a log grid scan refined with
    /// golden-section search.
    fn theta_oracle_max(p: f64, a: f64) -> f64 {
        let f = |s: f64| (p - 1.0) * s.ln() - s.powf(a);
        let grid = log_grid(1e-6, 1e3, 20_000);
        let best = (1..grid.len() - 1)
            .max_by(|&i, &j| f(grid[i]).total_cmp(&f(grid[j])))
            .unwrap();
        let (mut lo, mut hi) = (grid[best - 1], grid[best + 1]);
        let g = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..200 {
            let x1 = hi - g * (hi - lo);
            let x2 = lo + g * (hi - lo);
            if f(x1) < f(x2) {
                lo = x1;
            } else {
                hi = x2;
            }
        }
        f(0.5 * (lo + hi)).exp()
    }

    #[test]
    fn theta_pa_values() {
        let inv_e = (-1f64).exp();
        assert_abs_diff_eq!(theta_pa(2.0, 1.0).unwrap(), inv_e, epsilon = 1e-12);
        assert_abs_diff_eq!(theta_oracle_max(2.0, 1.0), inv_e, epsilon = 1e-6);
        assert_abs_diff_eq!(theta_pa(3.0, 2.0).unwrap(), inv_e, epsilon = 1e-12);
        assert_abs_diff_eq!(theta_oracle_max(3.0, 2.0), inv_e, epsilon = 1e-6);
        assert_abs_diff_eq!(theta_pa(1.0 + 1e-12, 1.0).unwrap(), 1.0, epsilon = 1e-9);
        assert!(theta_pa(1.0, 1.0).is_err());
        assert!(theta_pa(2.0, 0.0).is_err());
        for p in [2.0, 3.0, 4.0] {
            for a in [0.5, 1.0, 2.0] {
                let th = theta_pa(p, a).unwrap();
                assert_relative_eq!(th, theta_oracle_max(p, a), max_relative = 1e-6);
            }
        }
    }

    #[test]
    fn theta_pa_inequality_holds_on_grid() {
        for p in [2.0, 3.0, 4.0] {
            for a in [0.5, 1.0, 2.0] {
                let th = theta_pa(p, a).unwrap();
                for s in log_grid(1e-6, 1e3, 1000) {
                    // compare logs to stay finite for large s
                    let lhs = p * s.ln();
                    let rhs = th.ln() + s.ln() + s.powf(a);
                    assert!(lhs <= rhs + 1e-12, "p={p} a={a} s={s}");
                }
            }
        }
    }

    #[test]
    fn structure_checks() {
        for n in all_kinds() {
            n.check_structure().unwrap();
        }
        let g = quad().growth_bounds().unwrap();
        assert_abs_diff_eq!(g.mu, 0.98, epsilon = 1e-15);
        assert_eq!((g.a, g.b), (1.0, 1.0));
        assert!(Nonlinearity::linear().growth_bounds().is_none());
        assert!(Nonlinearity::quadratic(-1.0).is_err());
        assert!(Nonlinearity::new(DiffusionKind::Power { beta: 1.0, m: 1.0 }).is_err());
    }
}
