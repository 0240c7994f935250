//! Hyperboloid integrals and the energy machinery.
//!
//! All hyperboloid integrals use the flat measure dx (integration over the
//! Euclidean projection of H_s), not the induced (s/t) dx measure; the
//! geometric variant is available behind a flag for cross-checks. Radial
//! fields integrate as 4 pi r^2 dr profiles with exact angular moments where
//! boosts introduce angular factors.

use crate::fields::{
    hyper_stack, sample_hyperboloid_lenient, FieldError, GridMode, GridSpec, History, HyperStack,
};
use crate::geometry::Mat4;
use crate::quad::simpson_samples;

/// Integrate a node function over the grid with the full 3d measure.
/// Radial mode uses Simpson with the 4 pi r^2 weight; 3d mode uses the plain
/// cell sum (second order and better on compactly supported smooth fields).
pub fn integrate_nodes(grid: GridSpec, f: impl Fn(usize) -> f64) -> f64 {
    let dx = grid.dx();
    match grid.mode {
        GridMode::Radial1d => {
            let vals: Vec<f64> = (0..grid.n)
                .map(|i| {
                    let r = grid.radius(i);
                    4.0 * std::f64::consts::PI * r * r * f(i)
                })
                .collect();
            simpson_samples(&vals, dx)
        }
        GridMode::Full3d => {
            let w = dx * dx * dx;
            (0..grid.node_count()).map(|i| f(i) * w).sum::<f64>()
        }
    }
}

/// Flat integral of a sampled hyperboloid slice.
pub fn integral_dx(grid: GridSpec, values: &[f64]) -> f64 {
    integrate_nodes(grid, |i| values[i])
}

/// Flat L2 norm on the slice.
pub fn l2f_norm(grid: GridSpec, values: &[f64]) -> f64 {
    integrate_nodes(grid, |i| values[i] * values[i]).max(0.0).sqrt()
}

/// Geometric-measure variant (weight s/t), kept for cross-checks only.
pub fn l2_geometric_norm(st: &HyperStack) -> f64 {
    integrate_nodes(st.grid, |i| {
        let t = st.t_at(i);
        (st.s / t) * st.u[i] * st.u[i]
    })
    .max(0.0)
    .sqrt()
}

/// The three displayed forms of the hyperboloid energy integrand evaluated
/// from a derivative stack at one node: (raw cross-term form, frame form,
/// orthogonal-split form).
fn energy_integrand_forms(st: &HyperStack, c: f64, i: usize) -> (f64, f64, f64) {
    let t = st.t_at(i);
    let s_over_t = st.s / t;
    let ut = st.ut[i];
    let u = st.u[i];
    match st.grid.mode {
        GridMode::Radial1d => {
            let r = st.grid.radius(i);
            let ur = st.ux[0][i];
            let raw = ut * ut + ur * ur + 2.0 * (r / t) * ut * ur + c * c * u * u;
            let good = (r / t) * ut + ur;
            let frame = (s_over_t * ut).powi(2) + good * good + c * c * u * u;
            let perp = ut + (r / t) * ur;
            let ortho = perp * perp + (s_over_t * ur).powi(2) + c * c * u * u;
            (raw, frame, ortho)
        }
        GridMode::Full3d => {
            let x = st.grid.coords3(i);
            let mut raw = ut * ut + c * c * u * u;
            let mut frame = (s_over_t * ut).powi(2) + c * c * u * u;
            let mut perp = ut;
            let mut ortho_spatial = 0.0;
            for a in 0..3 {
                let ua = st.ux[a][i];
                raw += ua * ua + 2.0 * (x[a] / t) * ut * ua;
                let good = (x[a] / t) * ut + ua;
                frame += good * good;
                perp += (x[a] / t) * ua;
                ortho_spatial += (s_over_t * ua).powi(2);
            }
            let mut rot = 0.0;
            for a in 0..3 {
                for b in (a + 1)..3 {
                    let w = x[a] * st.ux[b][i] - x[b] * st.ux[a][i];
                    rot += (w / t) * (w / t);
                }
            }
            let ortho = perp * perp + ortho_spatial + rot + c * c * u * u;
            (raw, frame, ortho)
        }
    }
}

/// Hyperboloid energy for mass c computed via all three displayed integrand
/// forms. Pairwise disagreement beyond roundoff signals a stack bug.
#[derive(Debug, Clone, Copy)]
pub struct EnergyForms {
    pub raw: f64,
    pub frame: f64,
    pub orthogonal: f64,
}

impl EnergyForms {
    pub fn max_relative_spread(&self) -> f64 {
        let m = self.raw.abs().max(self.frame.abs()).max(self.orthogonal.abs());
        if m == 0.0 {
            return 0.0;
        }
        let lo = self.raw.min(self.frame).min(self.orthogonal);
        let hi = self.raw.max(self.frame).max(self.orthogonal);
        (hi - lo) / m
    }
}

pub fn energy_forms(st: &HyperStack, c: f64) -> EnergyForms {
    let raw = integrate_nodes(st.grid, |i| energy_integrand_forms(st, c, i).0);
    let frame = integrate_nodes(st.grid, |i| energy_integrand_forms(st, c, i).1);
    let orthogonal = integrate_nodes(st.grid, |i| energy_integrand_forms(st, c, i).2);
    EnergyForms {
        raw,
        frame,
        orthogonal,
    }
}

/// Hyperboloid energy in the frame form (the default evaluation route).
pub fn energy_flat(st: &HyperStack, c: f64) -> f64 {
    integrate_nodes(st.grid, |i| energy_integrand_forms(st, c, i).1)
}

/// Curved-metric correction: E_{g,c} = E_{m,c} + int (2 h^{ab} d_t v d_b v X_a
/// - h^{ab} d_a v d_b v) dx with X = (1, -x/t) and h^{ab} = coupling * u,
/// where `wave_on_slice` holds u sampled on the same hyperboloid.
pub fn energy_curved(v: &HyperStack, wave_on_slice: &[f64], coupling: &Mat4, c: f64) -> f64 {
    let flat = energy_flat(v, c);
    let grid = v.grid;
    let correction = integrate_nodes(grid, |i| {
        let t = v.t_at(i);
        let u = wave_on_slice[i];
        if u == 0.0 {
            return 0.0;
        }
        let (grad, x) = gradient_at(v, i);
        let mut xvec = [1.0, 0.0, 0.0, 0.0];
        for a in 0..3 {
            xvec[a + 1] = -x[a] / t;
        }
        let mut corr = 0.0;
        for alpha in 0..4 {
            for beta in 0..4 {
                let h = coupling[alpha][beta] * u;
                if h == 0.0 {
                    continue;
                }
                corr += 2.0 * h * grad[0] * grad[beta] * xvec[alpha];
                corr -= h * grad[alpha] * grad[beta];
            }
        }
        corr
    });
    flat + correction
}

/// (d_t v, d_1 v, d_2 v, d_3 v) and the node coordinates.
fn gradient_at(st: &HyperStack, i: usize) -> ([f64; 4], [f64; 3]) {
    match st.grid.mode {
        GridMode::Radial1d => {
            let r = st.grid.radius(i);
            // rotationally invariant sums are insensitive to the direction;
            // place the node on the first axis
            let ur = st.ux[0][i];
            ([st.ut[i], ur, 0.0, 0.0], [r, 0.0, 0.0])
        }
        GridMode::Full3d => {
            let x = st.grid.coords3(i);
            ([st.ut[i], st.ux[0][i], st.ux[1][i], st.ux[2][i]], x)
        }
    }
}

/// Sup-norm diagnostics of a stack: (|u|, |perp u|, |tangent gradient|) maxima.
pub fn sup_norms(st: &HyperStack) -> (f64, f64, f64) {
    let mut su = 0.0f64;
    let mut sp = 0.0f64;
    let mut sg = 0.0f64;
    for i in 0..st.grid.node_count() {
        let t = st.t_at(i);
        match st.grid.mode {
            GridMode::Radial1d => {
                let r = st.grid.radius(i);
                let perp = st.ut[i] + (r / t) * st.ux[0][i];
                let good = (r / t) * st.ut[i] + st.ux[0][i];
                su = su.max(st.u[i].abs());
                sp = sp.max(perp.abs());
                sg = sg.max(good.abs());
            }
            GridMode::Full3d => {
                let x = st.grid.coords3(i);
                let mut perp = st.ut[i];
                let mut good2 = 0.0;
                for a in 0..3 {
                    perp += (x[a] / t) * st.ux[a][i];
                    let g = (x[a] / t) * st.ut[i] + st.ux[a][i];
                    good2 += g * g;
                }
                su = su.max(st.u[i].abs());
                sp = sp.max(perp.abs());
                sg = sg.max(good2.sqrt());
            }
        }
    }
    (su, sp, sg)
}

/// One field's functionals at one hyperbolic time.
#[derive(Debug, Clone)]
pub struct FieldEnergies {
    pub label: String,
    pub e_m: f64,
    pub e_mc: f64,
    pub e_gc: Option<f64>,
    pub l2f: f64,
    pub sup_field: f64,
    pub sup_perp: f64,
    pub sup_good: f64,
    pub truncated: bool,
}

#[derive(Debug, Clone)]
pub struct EnergyRecord {
    pub s: f64,
    pub fields: Vec<FieldEnergies>,
}

pub fn energy_csv_header() -> &'static str {
    "s,field,e_m,e_mc,e_gc,l2f,sup_field,sup_perp,sup_good,truncated"
}

impl EnergyRecord {
    pub fn csv_rows(&self) -> String {
        let mut out = String::new();
        for f in &self.fields {
            out.push_str(&format!(
                "{},{},{:e},{:e},{},{:e},{:e},{:e},{:e},{}\n",
                self.s,
                f.label,
                f.e_m,
                f.e_mc,
                f.e_gc.map_or(String::new(), |v| format!("{v:e}")),
                f.l2f,
                f.sup_field,
                f.sup_perp,
                f.sup_good,
                f.truncated as u8,
            ));
        }
        out
    }
}

/// Flux identity check for the wave energy: with f = d_tt u - lap u (the
/// source of the evolution equation, i.e. minus the wave operator of the
/// sign convention used throughout), the exact identity reads
///
///   E(s)/2 - E(s0)/2 = int_{s0}^{s} int_{H_sb} (sb/t) d_t u f dx dsb,
///
/// together with the integrated inequality
/// E^{1/2}(s) <= E^{1/2}(s0) + int ||f||_{L2_f}.
#[derive(Debug, Clone, Copy)]
pub struct FluxCheck {
    pub s0: f64,
    pub s1: f64,
    pub lhs: f64,
    pub rhs: f64,
    /// inequality slack: E^{1/2}(s0) + int ||f|| - E^{1/2}(s1)
    pub inequality_slack: f64,
    pub energy_start: f64,
    pub energy_end: f64,
}

impl FluxCheck {
    pub fn residual(&self) -> f64 {
        (self.lhs - self.rhs).abs()
    }
}

/// `source` holds f = d_tt u - lap u as a history on the same grid (for a
/// solver run this is exactly the nonlinear right-hand side).
pub fn flux_identity(
    u: &History,
    source: &History,
    s0: f64,
    s1: f64,
    n_quad: usize,
) -> Result<FluxCheck, FieldError> {
    let st0 = hyper_stack(u, s0, false)?;
    let st1 = hyper_stack(u, s1, false)?;
    let e0 = energy_flat(&st0, 0.0);
    let e1 = energy_flat(&st1, 0.0);
    let n_quad = n_quad.max(8);
    let ds = (s1 - s0) / n_quad as f64;
    let mut inner = Vec::with_capacity(n_quad + 1);
    let mut source_norms = Vec::with_capacity(n_quad + 1);
    for j in 0..=n_quad {
        let s = s0 + j as f64 * ds;
        let st = hyper_stack(u, s, false)?;
        let (src_slice, _) = sample_hyperboloid_lenient(source, s);
        inner.push(integrate_nodes(u.grid, |i| {
            let t = st.t_at(i);
            (s / t) * st.ut[i] * src_slice.values[i]
        }));
        source_norms.push(l2f_norm(u.grid, &src_slice.values));
    }
    let rhs = simpson_samples(&inner, ds);
    let int_source = simpson_samples(&source_norms, ds);
    Ok(FluxCheck {
        s0,
        s1,
        lhs: 0.5 * e1 - 0.5 * e0,
        rhs,
        inequality_slack: e0.sqrt() + int_source - e1.sqrt(),
        energy_start: e0,
        energy_end: e1,
    })
}

/// Sup / L2 comparison of the hyperboloid Sobolev inequality:
/// sup (s + |x|)^{3/2} |u| against the boost norms up to order two.
#[derive(Debug, Clone, Copy)]
pub struct SobolevReport {
    pub lhs_sup: f64,
    pub rhs_sum: f64,
    pub ratio: f64,
}

pub fn sobolev_check(st: &HyperStack) -> SobolevReport {
    let grid = st.grid;
    let s = st.s;
    let mut lhs: f64 = 0.0;
    for i in 0..grid.node_count() {
        let r = grid.node_radius(i);
        lhs = lhs.max((s + r).powf(1.5) * st.u[i].abs());
    }
    let rhs = match grid.mode {
        GridMode::Radial1d => radial_boost_norm_sum(st),
        GridMode::Full3d => full3d_boost_norm_sum(st),
    };
    SobolevReport {
        lhs_sup: lhs,
        rhs_sum: rhs,
        ratio: if rhs == 0.0 { 0.0 } else { lhs / rhs },
    }
}

/// Sum of ||L^I u||_{L2_f} over |I| <= 2 for radial fields, via exact
/// angular moments: L_a u = x^a G and L_b L_a u = x^a x^b G2 + t delta_ab G
/// with G = u_t + (t/r) u_r and G2 its repeated ray combination.
fn radial_boost_norm_sum(st: &HyperStack) -> f64 {
    let grid = st.grid;
    let dx = grid.dx();
    let n = grid.n;
    let pi4 = 4.0 * std::f64::consts::PI;

    let mut g = vec![0.0; n];
    let mut g2 = vec![0.0; n];
    for i in 1..n {
        let r = grid.radius(i);
        let t = st.t_at(i);
        g[i] = st.ut[i] + (t / r) * st.ux[0][i];
        // G2 = d_t G + (t/r) d_r G expanded in the Cartesian stack
        g2[i] = st.utt[i]
            + st.ux[0][i] / r
            + 2.0 * (t / r) * st.utx[0][i]
            + (t * t / (r * r)) * (st.uxx[0][i] - st.ux[0][i] / r);
    }
    // r = 0 limits by parity (the weights r^4, r^6 suppress them anyway)
    g[0] = st.ut[0] + st.s * st.uxx[0][0];
    g2[0] = 0.0;

    // ||u||
    let mut sum = l2f_norm(grid, &st.u);
    // ||L_a u||, three equal copies
    let la2 = simpson_samples(
        &(0..n)
            .map(|i| {
                let r = grid.radius(i);
                (pi4 / 3.0) * r.powi(4) * g[i] * g[i]
            })
            .collect::<Vec<_>>(),
        dx,
    );
    sum += 3.0 * la2.max(0.0).sqrt();
    // ||L_b L_a u||: diagonal (3 copies) and off-diagonal (6 copies)
    let diag2 = simpson_samples(
        &(0..n)
            .map(|i| {
                let r = grid.radius(i);
                let t = st.t_at(i);
                pi4 * (0.2 * r.powi(6) * g2[i] * g2[i]
                    + (2.0 / 3.0) * t * r.powi(4) * g[i] * g2[i]
                    + t * t * r * r * g[i] * g[i])
            })
            .collect::<Vec<_>>(),
        dx,
    );
    let off2 = simpson_samples(
        &(0..n)
            .map(|i| {
                let r = grid.radius(i);
                (pi4 / 15.0) * r.powi(6) * g2[i] * g2[i]
            })
            .collect::<Vec<_>>(),
        dx,
    );
    sum += 3.0 * diag2.max(0.0).sqrt() + 6.0 * off2.max(0.0).sqrt();
    sum
}

fn full3d_boost_norm_sum(st: &HyperStack) -> f64 {
    let grid = st.grid;
    let idx2 = |a: usize, b: usize| -> usize {
        // packed symmetric order [11,12,13,22,23,33] with 0-based axes
        match (a.min(b), a.max(b)) {
            (0, 0) => 0,
            (0, 1) => 1,
            (0, 2) => 2,
            (1, 1) => 3,
            (1, 2) => 4,
            (2, 2) => 5,
            _ => unreachable!(),
        }
    };
    let mut sum = l2f_norm(grid, &st.u);
    for a in 0..3 {
        let la2 = integrate_nodes(grid, |i| {
            let x = grid.coords3(i);
            let t = st.t_at(i);
            let v = x[a] * st.ut[i] + t * st.ux[a][i];
            v * v
        });
        sum += la2.max(0.0).sqrt();
    }
    for b in 0..3 {
        for a in 0..3 {
            let norm2 = integrate_nodes(grid, |i| {
                let x = grid.coords3(i);
                let t = st.t_at(i);
                let v = x[a] * x[b] * st.utt[i]
                    + x[b] * st.ux[a][i]
                    + t * x[b] * st.utx[a][i]
                    + if a == b { t * st.ut[i] } else { 0.0 }
                    + t * x[a] * st.utx[b][i]
                    + t * t * st.uxx[idx2(a, b)][i];
                v * v
            });
            sum += norm2.max(0.0).sqrt();
        }
    }
    sum
}

/// Both sides of the Hardy-type inequality on the foliation, plus the static
/// lemma ||u/r|| <= C sum_a ||tangent_a u||.
#[derive(Debug, Clone, Copy)]
pub struct HardyReport {
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    pub static_lhs: f64,
    pub static_rhs: f64,
    pub static_ratio: f64,
}

pub fn hardy_check(u: &History, s0: f64, s1: f64, n_quad: usize) -> Result<HardyReport, FieldError> {
    let st1 = hyper_stack(u, s1, false)?;
    let grid = u.grid;
    let lhs = l2f_norm(grid, &st1.u.iter().map(|v| v / s1).collect::<Vec<_>>());

    let st0 = hyper_stack(u, s0, false)?;
    let u0_norm = l2f_norm(grid, &st0.u);
    let tangent_end = tangent_norm_sum(&st1);

    let n_quad = n_quad.max(8);
    let ds = (s1 - s0) / n_quad as f64;
    let mut integrand = Vec::with_capacity(n_quad + 1);
    for j in 0..=n_quad {
        let s = s0 + j as f64 * ds;
        let st = hyper_stack(u, s, false)?;
        integrand.push((tangent_norm_sum(&st) + scaled_gradient_norm_sum(&st)) / s);
    }
    let time_term = simpson_samples(&integrand, ds);
    let rhs = u0_norm + tangent_end + time_term;

    let static_lhs = inverse_r_norm(&st1);
    let static_rhs = tangent_norm_sum(&st1);
    Ok(HardyReport {
        lhs,
        rhs,
        ratio: if rhs == 0.0 { 0.0 } else { lhs / rhs },
        static_lhs,
        static_rhs,
        static_ratio: if static_rhs == 0.0 {
            0.0
        } else {
            static_lhs / static_rhs
        },
    })
}

/// sum_a || tangent_a u ||_{L2_f}.
fn tangent_norm_sum(st: &HyperStack) -> f64 {
    match st.grid.mode {
        GridMode::Radial1d => {
            let grid = st.grid;
            let pi4 = 4.0 * std::f64::consts::PI;
            let dx = grid.dx();
            let n = grid.n;
            // tangent_a u = x_a W with W = u_t / t + u_r / r
            let vals: Vec<f64> = (0..n)
                .map(|i| {
                    if i == 0 {
                        return 0.0;
                    }
                    let r = grid.radius(i);
                    let t = st.t_at(i);
                    let w = st.ut[i] / t + st.ux[0][i] / r;
                    (pi4 / 3.0) * r.powi(4) * w * w
                })
                .collect();
            3.0 * simpson_samples(&vals, dx).max(0.0).sqrt()
        }
        GridMode::Full3d => {
            let grid = st.grid;
            (0..3)
                .map(|a| {
                    integrate_nodes(grid, |i| {
                        let x = grid.coords3(i);
                        let t = st.t_at(i);
                        let v = (x[a] / t) * st.ut[i] + st.ux[a][i];
                        v * v
                    })
                    .max(0.0)
                    .sqrt()
                })
                .sum()
        }
    }
}

/// sum_a || (s/t) d_a u ||_{L2_f}.
fn scaled_gradient_norm_sum(st: &HyperStack) -> f64 {
    match st.grid.mode {
        GridMode::Radial1d => {
            let grid = st.grid;
            let pi4 = 4.0 * std::f64::consts::PI;
            let vals: Vec<f64> = (0..grid.n)
                .map(|i| {
                    if i == 0 {
                        return 0.0;
                    }
                    let r = grid.radius(i);
                    let t = st.t_at(i);
                    let v = (st.s / t) * st.ux[0][i];
                    (pi4 / 3.0) * r * r * v * v
                })
                .collect();
            3.0 * simpson_samples(&vals, grid.dx()).max(0.0).sqrt()
        }
        GridMode::Full3d => {
            let grid = st.grid;
            (0..3)
                .map(|a| {
                    integrate_nodes(grid, |i| {
                        let t = st.t_at(i);
                        let v = (st.s / t) * st.ux[a][i];
                        v * v
                    })
                    .max(0.0)
                    .sqrt()
                })
                .sum()
        }
    }
}

/// || u / r ||_{L2_f} with the measure-zero node r = 0 excluded.
fn inverse_r_norm(st: &HyperStack) -> f64 {
    match st.grid.mode {
        GridMode::Radial1d => {
            let grid = st.grid;
            let pi4 = 4.0 * std::f64::consts::PI;
            let vals: Vec<f64> = (0..grid.n)
                .map(|i| if i == 0 { 0.0 } else { pi4 * st.u[i] * st.u[i] })
                .collect();
            simpson_samples(&vals, grid.dx()).max(0.0).sqrt()
        }
        GridMode::Full3d => integrate_nodes(st.grid, |i| {
            let r = st.grid.node_radius(i);
            if r < 0.5 * st.grid.dx() {
                0.0
            } else {
                st.u[i] * st.u[i] / (r * r)
            }
        })
        .max(0.0)
        .sqrt(),
    }
}

/// Coercivity sandwich between the flat and curved massive energies:
/// with |hbar00| <= 1/3, E_{m,c}/2 <= E_{g,c} <= 2 E_{m,c}.
#[derive(Debug, Clone, Copy)]
pub struct CoercivityCheck {
    pub e_mc: f64,
    pub e_gc: f64,
    pub holds: bool,
}

pub fn coercivity_check(
    v: &HyperStack,
    wave_on_slice: &[f64],
    coupling: &Mat4,
    c: f64,
) -> CoercivityCheck {
    let e_mc = energy_flat(v, c);
    let e_gc = energy_curved(v, wave_on_slice, coupling, c);
    let tol = 1e-9 * e_mc.abs().max(1e-30);
    let holds = e_gc >= 0.5 * e_mc - tol && e_gc <= 2.0 * e_mc + tol;
    CoercivityCheck { e_mc, e_gc, holds }
}

/// Largest s whose hyperboloid support is fully covered by a history that
/// stores t <= t_final: the support edge of H_s sits at t = (s^2 + 1) / 2.
pub fn fully_covered_s(t_final: f64, grid: GridSpec) -> f64 {
    let by_time = (2.0 * t_final - 1.0).max(0.0).sqrt();
    // also require the support radius to stay inside the grid
    let by_box = (2.0 * grid.extent + 1.0).sqrt();
    by_time.min(by_box)
}
