//! Randomized verification suites shared by the command-line interface and
//! the acceptance tests: commutator identities on random smooth fields, the
//! ODE bound on randomized perturbed oscillators, and the inequality checks
//! on synthetic and evolved fields. All randomness is seeded.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::calculus::{
    self, boost_good_commutator_residual, boost_partial_commutator_residual, box_commutator_residual,
    minus_box_cartesian_at, minus_box_hyperboloidal_at, partial_good_commutator_residual,
    apply_chain, FieldOp, Sampler,
};
use crate::fields::{make_initial_data, GridMode, GridSpec, Profile};
use crate::geometry::SpacetimePoint;
use crate::kg_ode::{ode_bound_check, OdeProblem};
use crate::norms::{hardy_check, sobolev_check, SobolevReport};
use crate::solver::{evolve, ModelParams};

/// Band-limited random smooth field: a handful of plane-wave modes with
/// wavenumbers below one, so derivatives stay tame for stencil checks.
#[derive(Clone)]
pub struct RandomField {
    terms: Vec<(f64, [f64; 4], f64)>,
}

impl RandomField {
    pub fn sample(rng: &mut impl Rng) -> Self {
        let n = rng.gen_range(3..=6);
        let terms = (0..n)
            .map(|_| {
                let amp = rng.gen_range(0.2..1.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                let k = [
                    rng.gen_range(-0.6..0.6),
                    rng.gen_range(-0.6..0.6),
                    rng.gen_range(-0.6..0.6),
                    rng.gen_range(-0.6..0.6),
                ];
                let phase = rng.gen_range(0.0..std::f64::consts::TAU);
                (amp, k, phase)
            })
            .collect();
        Self { terms }
    }
}

impl Sampler for RandomField {
    fn eval(&self, t: f64, x: [f64; 3]) -> f64 {
        self.terms
            .iter()
            .map(|(a, k, phi)| {
                a * (k[0] * t + k[1] * x[0] + k[2] * x[1] + k[3] * x[2] + phi).sin()
            })
            .sum()
    }
}

fn cone_sample_points(rng: &mut impl Rng, count: usize) -> Vec<SpacetimePoint> {
    (0..count)
        .map(|_| {
            let t = rng.gen_range(4.0..12.0);
            let r = rng.gen_range(0.0..0.7 * (t - 1.0));
            let costh: f64 = rng.gen_range(-1.0..1.0);
            let phi = rng.gen_range(0.0..std::f64::consts::TAU);
            let sinth = (1.0 - costh * costh).sqrt();
            SpacetimePoint::new(t, [r * sinth * phi.cos(), r * sinth * phi.sin(), r * costh])
        })
        .collect()
}

/// One refinement study: max residual at h, h/2, h/4 plus the fitted order.
#[derive(Debug, Clone)]
pub struct ConvergenceCheck {
    pub label: String,
    pub residuals: [f64; 3],
    /// log2 ratio of successive residuals, averaged; `None` when the
    /// residual sits at the roundoff floor at every resolution (identities
    /// that the discrete operators satisfy exactly).
    pub order: Option<f64>,
    pub pass: bool,
}

const EXACT_FLOOR: f64 = 1e-10;

fn order_check(label: &str, residuals: [f64; 3], want: f64, tol: f64) -> ConvergenceCheck {
    if residuals.iter().all(|r| *r < EXACT_FLOOR) {
        return ConvergenceCheck {
            label: label.to_string(),
            residuals,
            order: None,
            pass: true,
        };
    }
    let o1 = (residuals[0] / residuals[1]).log2();
    let o2 = (residuals[1] / residuals[2]).log2();
    let order = 0.5 * (o1 + o2);
    ConvergenceCheck {
        label: label.to_string(),
        residuals,
        order: Some(order),
        pass: (order - want).abs() <= tol,
    }
}

#[derive(Debug)]
pub struct CommutatorSuiteReport {
    pub checks: Vec<ConvergenceCheck>,
    /// fitted estimate-form constants at two stencil refinements
    pub estimate_constants: (f64, f64),
    pub estimate_stable: bool,
    pub xi_max_degree: f64,
    pub xi_pass: bool,
}

impl CommutatorSuiteReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass) && self.estimate_stable && self.xi_pass
    }
}

/// The base identity and Killing checks (order 2.0 +- 0.2 under two
/// halvings on `n_fields` random smooth fields), the estimate-form constant
/// stability, and the scale-invariance check of the boost-rescaled ratio.
pub fn commutator_suite(seed: u64, n_fields: usize) -> CommutatorSuiteReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fields: Vec<RandomField> = (0..n_fields).map(|_| RandomField::sample(&mut rng)).collect();
    let points = cone_sample_points(&mut rng, 12);
    let steps = [0.16, 0.08, 0.04];

    let max_over = |f: &dyn Fn(&RandomField, SpacetimePoint, f64) -> f64, h: f64| -> f64 {
        let mut worst: f64 = 0.0;
        for field in &fields {
            for &p in &points {
                worst = worst.max(f(field, p, h).abs());
            }
        }
        worst
    };

    let mut checks = Vec::new();
    let mut study = |label: &str, f: &dyn Fn(&RandomField, SpacetimePoint, f64) -> f64| {
        let residuals = [
            max_over(f, steps[0]),
            max_over(f, steps[1]),
            max_over(f, steps[2]),
        ];
        checks.push(order_check(label, residuals, 2.0, 0.2));
    };

    // the six base coefficient families
    study("[L_a, d_t] table", &|fld, p, h| {
        (0..3)
            .map(|a| boost_partial_commutator_residual(a, 0, fld, p.t, p.x, h).abs())
            .fold(0.0, f64::max)
    });
    study("[L_a, d_b] table", &|fld, p, h| {
        let mut w: f64 = 0.0;
        for a in 0..3 {
            for b in 1..4 {
                w = w.max(boost_partial_commutator_residual(a, b, fld, p.t, p.x, h).abs());
            }
        }
        w
    });
    study("[d_t, g_b] table", &|fld, p, h| {
        (0..3)
            .map(|b| partial_good_commutator_residual(0, b, fld, p.t, p.x, h).abs())
            .fold(0.0, f64::max)
    });
    study("[d_a, g_b] table", &|fld, p, h| {
        let mut w: f64 = 0.0;
        for alpha in 1..4 {
            for b in 0..3 {
                w = w.max(partial_good_commutator_residual(alpha, b, fld, p.t, p.x, h).abs());
            }
        }
        w
    });
    study("[L_a, g_b] table", &|fld, p, h| {
        let mut w: f64 = 0.0;
        for a in 0..3 {
            for b in 0..3 {
                w = w.max(boost_good_commutator_residual(a, b, fld, p.t, p.x, h).abs());
            }
        }
        w
    });
    study("[L_a, box] Killing", &|fld, p, h| {
        (0..3)
            .map(|a| box_commutator_residual(FieldOp::Boost(a), fld, p.t, p.x, h).abs())
            .fold(0.0, f64::max)
    });
    // [d_alpha, box] commutes exactly for the shift-based stencils; the
    // order fit degenerates and the check passes via the exactness floor
    study("[d_a, box] Killing", &|fld, p, h| {
        (0..4)
            .map(|alpha| box_commutator_residual(FieldOp::Partial(alpha), fld, p.t, p.x, h).abs())
            .fold(0.0, f64::max)
    });

    // estimate form: |[d^I L^J, d_alpha] f| <= C sum_{|J'|<|J|} |d d^I L^{J'} f|
    let estimate_constant = |h: f64| -> f64 {
        let mut c_fit: f64 = 0.0;
        for field in &fields {
            for &p in &points {
                // I = (d_1), J = (L_1, L_2): [d^I L^J, d_alpha]
                let composite = [FieldOp::Partial(1), FieldOp::Boost(0), FieldOp::Boost(1)];
                for alpha in 0..4 {
                    let lhs = calculus::commutator_at(
                        &composite,
                        FieldOp::Partial(alpha),
                        field,
                        p.t,
                        p.x,
                        h,
                    )
                    .abs();
                    // majorant: all |d_beta d^I L^{J'} f| with |J'| < 2
                    let mut rhs = 0.0;
                    for beta in 0..4 {
                        for js in [vec![], vec![FieldOp::Boost(0)], vec![FieldOp::Boost(1)]] {
                            let mut ops = vec![FieldOp::Partial(beta), FieldOp::Partial(1)];
                            ops.extend(js);
                            rhs += apply_chain(&ops, field, p.t, p.x, h).abs();
                        }
                    }
                    if rhs > 1e-8 {
                        c_fit = c_fit.max(lhs / rhs);
                    }
                }
            }
        }
        c_fit
    };
    let c_coarse = estimate_constant(0.08);
    let c_fine = estimate_constant(0.04);
    let estimate_stable =
        (c_coarse - c_fine).abs() <= 0.2 * c_fine.max(1e-12) && c_fine.is_finite();

    // scale invariance of (t/s) d^I L^J (s/t) for all tracked shapes
    let xi_points = cone_sample_points(&mut rng, 6);
    let mut xi_max_degree = f64::NEG_INFINITY;
    for (partials, boosts) in [
        (vec![], vec![0]),
        (vec![0], vec![1]),
        (vec![1], vec![0, 2]),
        (vec![0, 2], vec![1]),
    ] {
        let rep = calculus::xi_homogeneity_check(&partials, &boosts, &xi_points, 1e-3);
        xi_max_degree = xi_max_degree.max(rep.max_degree);
    }
    let xi_pass = xi_max_degree <= 0.05;

    CommutatorSuiteReport {
        checks,
        estimate_constants: (c_coarse, c_fine),
        estimate_stable,
        xi_max_degree,
        xi_pass,
    }
}

/// Wave-operator decomposition agreement on random smooth fields
/// (Cartesian against hyperboloidal form, second order).
pub fn box_agreement_suite(seed: u64, n_fields: usize) -> Vec<ConvergenceCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed + 1);
    let points = cone_sample_points(&mut rng, 8);
    (0..n_fields)
        .map(|i| {
            let field = RandomField::sample(&mut rng);
            let residual = |h: f64| -> f64 {
                let mut worst: f64 = 0.0;
                for &p in &points {
                    let a = minus_box_cartesian_at(&field, p.t, p.x, h);
                    if let Some(b) = minus_box_hyperboloidal_at(&field, p.t, p.x, h) {
                        worst = worst.max((a - b).abs());
                    }
                }
                worst
            };
            order_check(
                &format!("box forms, field {i}"),
                [residual(0.16), residual(0.08), residual(0.04)],
                2.0,
                0.5,
            )
        })
        .collect()
}

/// One randomized perturbed-oscillator problem.
fn random_ode_problem(rng: &mut impl Rng, mass: f64) -> (OdeProblem, f64) {
    // coefficient: smooth sum of sines, clamped into [-1/3, 1/3]
    let modes: Vec<(f64, f64, f64)> = (0..rng.gen_range(2..5))
        .map(|_| {
            (
                rng.gen_range(0.2..1.0),
                rng.gen_range(0.1..0.8),
                rng.gen_range(0.0..std::f64::consts::TAU),
            )
        })
        .collect();
    let total: f64 = modes.iter().map(|m| m.0).sum();
    let coeff = move |l: f64| -> f64 {
        modes
            .iter()
            .map(|(a, w, p)| a * (w * l + p).sin())
            .sum::<f64>()
            / (3.0 * total)
    };
    // source: a few Gaussian bumps
    let bumps: Vec<(f64, f64, f64)> = (0..rng.gen_range(1..4))
        .map(|_| {
            (
                rng.gen_range(-1.0..1.0),
                rng.gen_range(4.0..20.0),
                rng.gen_range(0.3..2.0),
            )
        })
        .collect();
    let source = move |l: f64| -> f64 {
        bumps
            .iter()
            .map(|(a, c, w)| a * (-(l - c) * (l - c) / (2.0 * w * w)).exp())
            .sum()
    };
    let s_end = rng.gen_range(15.0..30.0);
    (
        OdeProblem {
            coeff: Box::new(coeff),
            source: Box::new(source),
            mass,
            s0: 2.0,
            z0: rng.gen_range(-1.0..1.0),
            z1: rng.gen_range(-1.0..1.0),
        },
        s_end,
    )
}

#[derive(Debug)]
pub struct OdeBatchReport {
    pub fitted_constant: f64,
    pub calibration_max: f64,
    pub verification_max: f64,
    pub violations: usize,
    pub count: usize,
    pub stable: bool,
}

impl OdeBatchReport {
    pub fn pass(&self) -> bool {
        self.violations == 0 && self.stable
    }
}

/// Fit the outer bound constant on one batch, then demand zero violations
/// and a stable maximum on a fresh batch of `count` problems.
pub fn ode_batch(seed: u64, count: usize, mass: f64) -> OdeBatchReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let run_batch = |rng: &mut ChaCha8Rng, n: usize| -> Vec<f64> {
        (0..n)
            .map(|_| {
                let (p, s_end) = random_ode_problem(rng, mass);
                ode_bound_check(&p, s_end, Some(0.01)).expect("ode integration")
            })
            .collect()
    };
    let calibration = run_batch(&mut rng, count);
    let calibration_max = calibration.iter().fold(0.0f64, |m, &r| m.max(r));
    // freeze with a 25% headroom over the calibration batch
    let fitted = 1.25 * calibration_max;
    let verification = run_batch(&mut rng, count);
    let verification_max = verification.iter().fold(0.0f64, |m, &r| m.max(r));
    let violations = verification.iter().filter(|&&r| r > fitted).count();
    OdeBatchReport {
        fitted_constant: fitted,
        calibration_max,
        verification_max,
        violations,
        count,
        stable: (verification_max - calibration_max).abs() <= 0.2 * calibration_max,
    }
}

#[derive(Debug)]
pub struct InequalityReport {
    /// (coarse, fine) fitted Sobolev constants over the evolved family
    pub sobolev_constants: (f64, f64),
    /// (coarse, fine) fitted Hardy constants
    pub hardy_constants: (f64, f64),
    pub static_hardy_max: f64,
    pub synthetic_sobolev: SobolevReport,
    pub stable: bool,
}

impl InequalityReport {
    pub fn pass(&self) -> bool {
        self.stable
            && self.sobolev_constants.1.is_finite()
            && self.sobolev_constants.1 > 0.0
            && self.hardy_constants.1.is_finite()
    }
}

/// Sobolev and Hardy checks on an evolved small-data run at two resolutions
/// plus one synthetic lifted bump; fitted constants must move by at most
/// 20% under the dx-halving.
pub fn inequality_suite(stability_tol: f64) -> InequalityReport {
    let run_constants = |n: usize| -> (f64, f64, f64) {
        let grid = GridSpec::new(GridMode::Radial1d, 24.0, n, 0.8).unwrap();
        let params = ModelParams::decoupled(1.0, 1e-2);
        let data = make_initial_data(Profile::Bump, 1e-2, grid);
        let out = evolve(&params, grid, &data, 20.0, false).expect("evolve");
        let mut sob: f64 = 0.0;
        for s in [3.0, 4.5, 6.0] {
            let st = crate::fields::hyper_stack(&out.u, s, false).expect("stack");
            sob = sob.max(sobolev_check(&st).ratio);
            let stv = crate::fields::hyper_stack(&out.v, s, false).expect("stack");
            sob = sob.max(sobolev_check(&stv).ratio);
        }
        let hardy = hardy_check(&out.u, 2.5, 6.0, 16).expect("hardy");
        (sob, hardy.ratio, hardy.static_ratio)
    };
    let (sob_coarse, hardy_coarse, _) = run_constants(1024);
    let (sob_fine, hardy_fine, static_fine) = run_constants(2048);

    // synthetic: lifted bump on one hyperboloid
    let grid = GridSpec::new(GridMode::Radial1d, 12.0, 1024, 0.8).unwrap();
    let levels: Vec<Vec<f64>> = (0..200)
        .map(|_| {
            (0..grid.n)
                .map(|i| {
                    let r = grid.radius(i);
                    if r < 1.0 {
                        (1.0 - r * r).powi(2)
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect();
    let h = crate::fields::History {
        grid,
        t0: 1.9,
        dt: 0.05,
        levels,
        which: "bump".into(),
    };
    let st = crate::fields::hyper_stack(&h, 2.5, false).expect("stack");
    let synthetic_sobolev = sobolev_check(&st);

    let rel = |a: f64, b: f64| (a - b).abs() / b.max(1e-12);
    InequalityReport {
        sobolev_constants: (sob_coarse, sob_fine),
        hardy_constants: (hardy_coarse, hardy_fine),
        static_hardy_max: static_fine,
        synthetic_sobolev,
        stable: rel(sob_coarse, sob_fine) <= stability_tol
            && rel(hardy_coarse, hardy_fine) <= stability_tol,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn commutator_suite_passes() {
        let rep = commutator_suite(7, 4);
        for c in &rep.checks {
            assert!(c.pass, "{}: residuals {:?} order {:?}", c.label, c.residuals, c.order);
        }
        assert!(rep.estimate_stable, "estimate constants {:?}", rep.estimate_constants);
        assert!(rep.xi_pass, "xi degree {}", rep.xi_max_degree);
    }

    #[test]
    fn box_agreement_converges() {
        for c in box_agreement_suite(11, 5) {
            assert!(c.pass, "{}: {:?} order {:?}", c.label, c.residuals, c.order);
        }
    }

    #[test]
    fn ode_batch_zero_violations() {
        let rep = ode_batch(42, 25, 1.0);
        assert!(rep.pass(), "{rep:?}");
    }

    #[test]
    fn ode_batch_reproducible() {
        let a = ode_batch(99, 10, 1.0);
        let b = ode_batch(99, 10, 1.0);
        assert_eq!(a.calibration_max, b.calibration_max);
        assert_eq!(a.verification_max, b.verification_max);
    }
}
