//! Discrete differential operators built from the frame vector fields:
//! Cartesian partials, Lorentz boosts, hyperboloid-tangent derivatives, the
//! foliation-orthogonal field, rotations, and the flat wave operator in both
//! its Cartesian and hyperboloidal decompositions.
//!
//! Operators act on anything that can be point-sampled ([`Sampler`]): either
//! closed-form test fields or interpolated evolution histories. A first-order
//! operator with coefficients c^mu(t,x) is applied at a point as a centered
//! directional difference along the frozen coefficient vector, which is exact
//! for the operator up to the O(h^2) stencil error; composites nest the
//! stencils right-to-left.

use crate::geometry::SpacetimePoint;

/// Point-sampled spacetime scalar field.
pub trait Sampler: Sync {
    fn eval(&self, t: f64, x: [f64; 3]) -> f64;
}

/// Closed-form field, for oracles and synthetic tests.
pub struct AnalyticField<F: Fn(f64, [f64; 3]) -> f64 + Sync>(pub F);

impl<F: Fn(f64, [f64; 3]) -> f64 + Sync> Sampler for AnalyticField<F> {
    fn eval(&self, t: f64, x: [f64; 3]) -> f64 {
        (self.0)(t, x)
    }
}

/// First-order vector-field operators of the foliation calculus.
///
/// Spatial indices are 0-based here (`Boost(0)` is the boost along x^1);
/// `Partial(0)` is the time derivative and `Partial(1..=3)` the spatial ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldOp {
    /// d_alpha, alpha in 0..=3 (0 = time).
    Partial(usize),
    /// Lorentz boost x^a d_t + t d_a, a in 0..=2.
    Boost(usize),
    /// Hyperboloid-tangent derivative (x^a/t) d_t + d_a, a in 0..=2.
    GoodDeriv(usize),
    /// Hyperboloidal-frame derivative: index 0 is (s/t) d_t, index a >= 1
    /// coincides with `GoodDeriv(a-1)`.
    HyperDeriv(usize),
    /// Foliation-orthogonal field d_t + (x^a/t) d_a.
    Perp,
    /// Rotation x^a d_b - x^b d_a, indices in 0..=2.
    Rotation(usize, usize),
}

impl FieldOp {
    /// Coefficient vector (c^t, c^1, c^2, c^3) at a point.
    pub fn direction(&self, t: f64, x: [f64; 3]) -> [f64; 4] {
        match *self {
            FieldOp::Partial(0) => [1.0, 0.0, 0.0, 0.0],
            FieldOp::Partial(a) => {
                let mut d = [0.0; 4];
                d[a] = 1.0;
                d
            }
            FieldOp::Boost(a) => {
                let mut d = [0.0; 4];
                d[0] = x[a];
                d[a + 1] = t;
                d
            }
            FieldOp::GoodDeriv(a) => {
                let mut d = [0.0; 4];
                d[0] = x[a] / t;
                d[a + 1] = 1.0;
                d
            }
            FieldOp::HyperDeriv(0) => {
                let s = SpacetimePoint::new(t, x).s();
                [s / t, 0.0, 0.0, 0.0]
            }
            FieldOp::HyperDeriv(a) => FieldOp::GoodDeriv(a - 1).direction(t, x),
            FieldOp::Perp => [1.0, x[0] / t, x[1] / t, x[2] / t],
            FieldOp::Rotation(a, b) => {
                let mut d = [0.0; 4];
                d[b + 1] = x[a];
                d[a + 1] = -x[b];
                d
            }
        }
    }
}

/// Apply a first-order operator at a point: centered 3-point difference
/// along the coefficient direction, second-order accurate.
pub fn apply_op_at(op: FieldOp, f: &dyn Sampler, t: f64, x: [f64; 3], h: f64) -> f64 {
    let d = op.direction(t, x);
    let shift = |sgn: f64| {
        f.eval(
            t + sgn * h * d[0],
            [
                x[0] + sgn * h * d[1],
                x[1] + sgn * h * d[2],
                x[2] + sgn * h * d[3],
            ],
        )
    };
    (shift(1.0) - shift(-1.0)) / (2.0 * h)
}

/// Apply a composite written left-to-right (`ops[0]` acts last). Each level
/// nests another 3-point stencil, so a composite of order k costs 2^k samples.
pub fn apply_chain(ops: &[FieldOp], f: &dyn Sampler, t: f64, x: [f64; 3], h: f64) -> f64 {
    match ops.split_first() {
        None => f.eval(t, x),
        Some((&head, rest)) => {
            if rest.is_empty() {
                apply_op_at(head, f, t, x, h)
            } else {
                let inner = ChainField { ops: rest, f, h };
                apply_op_at(head, &inner, t, x, h)
            }
        }
    }
}

struct ChainField<'a> {
    ops: &'a [FieldOp],
    f: &'a dyn Sampler,
    h: f64,
}

impl Sampler for ChainField<'_> {
    fn eval(&self, t: f64, x: [f64; 3]) -> f64 {
        apply_chain(self.ops, self.f, t, x, self.h)
    }
}

/// Commutator [X, Y] f at a point.
pub fn commutator_at(
    x_ops: &[FieldOp],
    y: FieldOp,
    f: &dyn Sampler,
    t: f64,
    x: [f64; 3],
    h: f64,
) -> f64 {
    let mut xy: Vec<FieldOp> = x_ops.to_vec();
    xy.push(y);
    let mut yx: Vec<FieldOp> = vec![y];
    yx.extend_from_slice(x_ops);
    apply_chain(&xy, f, t, x, h) - apply_chain(&yx, f, t, x, h)
}

/// -box in Cartesian form, d_t d_t - sum_a d_a d_a, by nested differences.
pub fn minus_box_cartesian_at(f: &dyn Sampler, t: f64, x: [f64; 3], h: f64) -> f64 {
    let mut acc = second_along(f, t, x, [1.0, 0.0, 0.0, 0.0], h);
    for a in 0..3 {
        let mut dir = [0.0; 4];
        dir[a + 1] = 1.0;
        acc -= second_along(f, t, x, dir, h);
    }
    acc
}

/// -box decomposed in the hyperboloidal frame:
/// `b0 b0 - sum_a b_a b_a + 2 (x^a/s) b0 b_a + (3/s) b0` where b are the
/// hyperboloidal-frame derivatives. Valid strictly inside the cone; rejects
/// s < 1 where the frame degenerates.
pub fn minus_box_hyperboloidal_at(f: &dyn Sampler, t: f64, x: [f64; 3], h: f64) -> Option<f64> {
    let s = SpacetimePoint::new(t, x).s();
    if s < 1.0 {
        return None;
    }
    let b0 = FieldOp::HyperDeriv(0);
    let mut acc = apply_chain(&[b0, b0], f, t, x, h);
    for a in 0..3 {
        let ba = FieldOp::HyperDeriv(a + 1);
        acc -= apply_chain(&[ba, ba], f, t, x, h);
        acc += 2.0 * (x[a] / s) * apply_chain(&[b0, ba], f, t, x, h);
    }
    acc += (3.0 / s) * apply_op_at(b0, f, t, x, h);
    Some(acc)
}

/// Plain second derivative along a frozen direction (3-point stencil).
fn second_along(f: &dyn Sampler, t: f64, x: [f64; 3], dir: [f64; 4], h: f64) -> f64 {
    let shift = |sgn: f64| {
        f.eval(
            t + sgn * h * dir[0],
            [
                x[0] + sgn * h * dir[1],
                x[1] + sgn * h * dir[2],
                x[2] + sgn * h * dir[3],
            ],
        )
    };
    (shift(1.0) - 2.0 * f.eval(t, x) + shift(-1.0)) / (h * h)
}

/// Closed-form commutator coefficient tables.
///
/// With boosts L_a, partials d_beta and tangent derivatives g_b:
///   [L_a, d_beta]  = theta(a, beta)^gamma d_gamma        (constants)
///   [d_alpha, g_b] = t^{-1} gamma_under(alpha, b)^gamma d_gamma
///   [L_a, g_b]     = theta_under(a, b)^gamma g_gamma     (no d_t component)
/// Spatial arguments a, b are 0-based; frame indices beta, gamma run 0..=3.
pub struct CommutatorTable;

impl CommutatorTable {
    /// Coefficient of d_gamma in [L_a, d_beta].
    pub fn theta(a: usize, beta: usize, gamma: usize) -> f64 {
        if beta == 0 {
            // [L_a, d_t] = -d_a
            if gamma == a + 1 {
                -1.0
            } else {
                0.0
            }
        } else {
            // [L_a, d_b] = -delta_ab d_t
            if beta == a + 1 && gamma == 0 {
                -1.0
            } else {
                0.0
            }
        }
    }

    /// Coefficient of d_gamma in t * [d_alpha, g_beta]; `beta = 0` denotes the
    /// frame's time leg (g_0 = d_t) and commutes with everything.
    pub fn gamma_under(alpha: usize, beta: usize, gamma: usize, t: f64, x: [f64; 3]) -> f64 {
        if beta == 0 || gamma != 0 {
            return 0.0;
        }
        let b = beta - 1;
        if alpha == 0 {
            -x[b] / t
        } else if alpha == beta {
            1.0
        } else {
            0.0
        }
    }

    /// Coefficient of g_gamma in [L_a, g_beta] (expansion in the
    /// semi-hyperboloidal frame; the gamma = 0 leg is d_t).
    pub fn theta_under(a: usize, beta: usize, gamma: usize, t: f64, x: [f64; 3]) -> f64 {
        if beta == 0 {
            // [L_a, d_t] = -d_a = -g_a + (x^a/t) d_t
            if gamma == 0 {
                x[a] / t
            } else if gamma == a + 1 {
                -1.0
            } else {
                0.0
            }
        } else {
            // [L_a, g_b] = -(x^b/t) g_a : tangent again, no d_t component
            let b = beta - 1;
            if gamma == a + 1 {
                -x[b] / t
            } else {
                0.0
            }
        }
    }
}

/// Residual of the base identity [L_a, d_beta] f = theta(a,beta)^gamma d_gamma f.
pub fn boost_partial_commutator_residual(
    a: usize,
    beta: usize,
    f: &dyn Sampler,
    t: f64,
    x: [f64; 3],
    h: f64,
) -> f64 {
    let lhs = commutator_at(&[FieldOp::Boost(a)], FieldOp::Partial(beta), f, t, x, h);
    let mut rhs = 0.0;
    for gamma in 0..4 {
        let c = CommutatorTable::theta(a, beta, gamma);
        if c != 0.0 {
            rhs += c * apply_op_at(FieldOp::Partial(gamma), f, t, x, h);
        }
    }
    lhs - rhs
}

/// Residual of [d_alpha, g_b] f = t^{-1} gamma_under(alpha,b)^gamma d_gamma f.
pub fn partial_good_commutator_residual(
    alpha: usize,
    b: usize,
    f: &dyn Sampler,
    t: f64,
    x: [f64; 3],
    h: f64,
) -> f64 {
    let lhs = commutator_at(&[FieldOp::Partial(alpha)], FieldOp::GoodDeriv(b), f, t, x, h);
    let mut rhs = 0.0;
    for gamma in 0..4 {
        let c = CommutatorTable::gamma_under(alpha, b + 1, gamma, t, x);
        if c != 0.0 {
            rhs += c / t * apply_op_at(FieldOp::Partial(gamma), f, t, x, h);
        }
    }
    lhs - rhs
}

/// Residual of [L_a, g_b] f = theta_under(a,b)^gamma g_gamma f.
pub fn boost_good_commutator_residual(
    a: usize,
    b: usize,
    f: &dyn Sampler,
    t: f64,
    x: [f64; 3],
    h: f64,
) -> f64 {
    let lhs = commutator_at(&[FieldOp::Boost(a)], FieldOp::GoodDeriv(b), f, t, x, h);
    let mut rhs = 0.0;
    for gamma in 0..4 {
        let c = CommutatorTable::theta_under(a, b + 1, gamma, t, x);
        if c != 0.0 {
            let op = if gamma == 0 {
                FieldOp::Partial(0)
            } else {
                FieldOp::GoodDeriv(gamma - 1)
            };
            rhs += c * apply_op_at(op, f, t, x, h);
        }
    }
    lhs - rhs
}

/// [X, -box] f for the Killing checks ([d_alpha, box] = [L_a, box] = 0).
pub fn box_commutator_residual(op: FieldOp, f: &dyn Sampler, t: f64, x: [f64; 3], h: f64) -> f64 {
    let boxed = BoxedField { f, h };
    let x_box = apply_op_at(op, &boxed, t, x, h);
    let op_field = OpField { op, f, h };
    let box_x = minus_box_cartesian_at(&op_field, t, x, h);
    x_box - box_x
}

struct BoxedField<'a> {
    f: &'a dyn Sampler,
    h: f64,
}

impl Sampler for BoxedField<'_> {
    fn eval(&self, t: f64, x: [f64; 3]) -> f64 {
        minus_box_cartesian_at(self.f, t, x, self.h)
    }
}

struct OpField<'a> {
    op: FieldOp,
    f: &'a dyn Sampler,
    h: f64,
}

impl Sampler for OpField<'_> {
    fn eval(&self, t: f64, x: [f64; 3]) -> f64 {
        apply_op_at(self.op, self.f, t, x, self.h)
    }
}

/// Report from the scale-invariance check of (t/s) d^I L^J (s/t).
#[derive(Debug, Clone)]
pub struct XiReport {
    pub max_abs: f64,
    /// Largest fitted homogeneity degree across sample points (expect <= 0
    /// up to stencil noise).
    pub max_degree: f64,
}

/// Evaluate Xi = (t/s) d^I L^J (s/t) by nested differences of the explicit
/// ratio, check boundedness on { r <= 0.9 (t-1) }, and fit the homogeneity
/// degree from dyadic rescalings of each sample point.
pub fn xi_homogeneity_check(
    partials: &[usize],
    boosts: &[usize],
    points: &[SpacetimePoint],
    h: f64,
) -> XiReport {
    assert!(partials.len() + boosts.len() <= 3, "desk scale tracks order <= 3");
    let ratio = AnalyticField(|t: f64, x: [f64; 3]| SpacetimePoint::new(t, x).s() / t);
    let mut ops: Vec<FieldOp> = partials.iter().map(|&a| FieldOp::Partial(a)).collect();
    ops.extend(boosts.iter().map(|&a| FieldOp::Boost(a)));

    let xi_at = |p: SpacetimePoint| -> f64 {
        (p.t / p.s()) * apply_chain(&ops, &ratio, p.t, p.x, h)
    };

    let mut max_abs: f64 = 0.0;
    let mut max_degree = f64::NEG_INFINITY;
    let scales = [1.0, 2.0, 4.0, 8.0];
    for &p in points {
        let base = xi_at(p).abs();
        max_abs = max_abs.max(base);
        if base < 1e-7 {
            continue; // zero component; degree undefined
        }
        // least-squares slope of log|Xi| against log(scale)
        let mut sx = 0.0;
        let mut sy = 0.0;
        let mut sxx = 0.0;
        let mut sxy = 0.0;
        for &lam in &scales {
            let q = SpacetimePoint::new(lam * p.t, [lam * p.x[0], lam * p.x[1], lam * p.x[2]]);
            let v = xi_at(q).abs().max(1e-300);
            let lx = lam.ln();
            let ly = v.ln();
            sx += lx;
            sy += ly;
            sxx += lx * lx;
            sxy += lx * ly;
        }
        let n = scales.len() as f64;
        let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        max_degree = max_degree.max(slope);
    }
    XiReport { max_abs, max_degree }
}
