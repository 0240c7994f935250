//! Leapfrog evolution of the coupled model system
//!
//! ```text
//!   d_tt u = lap u + P^{ab} d_a v d_b v + R v^2
//!   (1 + u H^{00}) d_tt v = lap v - u (2 H^{0a} d_t d_a + H^{ab} d_a d_b) v - c^2 v
//! ```
//!
//! in Cartesian time, from compactly supported data at t = 2, in radial or
//! full 3d mode. Hyperboloids are diagnostic surfaces only; the evolution
//! never leaves the Cartesian grid. The quasilinear principal coefficient is
//! monitored against the 1/3 well-posedness band and the run aborts rather
//! than adapts when it, the CFL bound, or the support containment fails.

use rayon::prelude::*;
use thiserror::Error;

use crate::fields::{FieldError, GridMode, GridSpec, History, InitialData, Profile};
use crate::geometry::Mat4;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("quasilinear coefficient left the well-posedness band at t={t:.3}: sup |hbar00| = {max_h:.4} > 1/3")]
    CoefficientDegeneracy { t: f64, max_h: f64 },
    #[error("CFL violated at t={t:.3}: dt={dt:.4e} exceeds allowed {allowed:.4e}")]
    CflViolation { t: f64, dt: f64, allowed: f64 },
    #[error("field support reached the outer guard band at t={t:.3}")]
    BoundaryContamination { t: f64 },
    #[error("invalid model parameters: {0}")]
    BadParams(String),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("{op:?} not representable in radial mode (tracked derivatives are time-partials only)")]
    RadialTracking { op: crate::calculus::FieldOp },
}

/// Reference regularity order of the continuum analysis; the bootstrap
/// exponent band delta in [1/(10 N), 1/(5 N)] refers to this N, not to the
/// desk-scale tracked order.
pub const N_REFERENCE: usize = 8;

/// Constants of the model system plus the bootstrap bookkeeping parameters.
#[derive(Debug, Clone)]
pub struct ModelParams {
    /// P^{ab}: symmetric coupling of the wave source quadratic in dv.
    pub p_coupling: Mat4,
    /// R: coupling of the v^2 wave source.
    pub r_coupling: f64,
    /// H^{ab}: symmetric quasilinear coupling (metric-like, enters as u H).
    pub h_coupling: Mat4,
    /// Klein-Gordon mass c > 0.
    pub mass: f64,
    /// Data amplitude.
    pub eps: f64,
    /// Bootstrap exponent.
    pub delta: f64,
    /// Max tracked composite order |I| + |J| (desk scale; <= 3).
    pub n_track: usize,
}

impl ModelParams {
    pub fn validate(&self, mode: GridMode) -> Result<(), SolverError> {
        if self.mass <= 0.0 {
            return Err(SolverError::BadParams(format!("mass c = {}", self.mass)));
        }
        let n = N_REFERENCE as f64;
        if self.delta < 1.0 / (10.0 * n) - 1e-12 || self.delta > 1.0 / (5.0 * n) + 1e-12 {
            return Err(SolverError::BadParams(format!(
                "delta = {} outside [1/{}, 1/{}]",
                self.delta,
                10.0 * n,
                5.0 * n
            )));
        }
        if self.n_track > 3 {
            return Err(SolverError::BadParams(format!(
                "n_track = {} exceeds the desk-scale cap 3",
                self.n_track
            )));
        }
        for m in [&self.p_coupling, &self.h_coupling] {
            for i in 0..4 {
                for j in 0..4 {
                    if (m[i][j] - m[j][i]).abs() > 1e-14 {
                        return Err(SolverError::BadParams("couplings must be symmetric".into()));
                    }
                }
            }
        }
        if mode == GridMode::Radial1d {
            // radial symmetry forces vanishing mixed blocks and isotropic
            // spatial blocks
            for m in [&self.p_coupling, &self.h_coupling] {
                for a in 1..4 {
                    if m[0][a].abs() > 0.0 {
                        return Err(SolverError::BadParams(
                            "radial mode needs vanishing time-space coupling blocks".into(),
                        ));
                    }
                    for b in 1..4 {
                        let want = if a == b { m[1][1] } else { 0.0 };
                        if (m[a][b] - want).abs() > 1e-14 {
                            return Err(SolverError::BadParams(
                                "radial mode needs isotropic spatial coupling blocks".into(),
                            ));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// All couplings zero: independent free wave and Klein-Gordon fields.
    pub fn decoupled(mass: f64, eps: f64) -> Self {
        Self {
            p_coupling: [[0.0; 4]; 4],
            r_coupling: 0.0,
            h_coupling: [[0.0; 4]; 4],
            mass,
            eps,
            delta: 1.0 / 64.0,
            n_track: 3,
        }
    }

    /// Default coupled model: unit couplings on the diagonal blocks.
    pub fn coupled(mass: f64, eps: f64) -> Self {
        let mut p = [[0.0; 4]; 4];
        let mut h = [[0.0; 4]; 4];
        p[0][0] = 1.0;
        h[0][0] = 1.0;
        for a in 1..4 {
            p[a][a] = 1.0;
            h[a][a] = 1.0;
        }
        Self {
            p_coupling: p,
            r_coupling: 1.0,
            h_coupling: h,
            mass,
            eps,
            delta: 1.0 / 64.0,
            n_track: 3,
        }
    }

    /// Frame factor Hbar00 / u at a grid location; the abort monitor
    /// multiplies it by the local u.
    fn hbar00_factor(&self, t: f64, r: f64, x: Option<[f64; 3]>) -> f64 {
        let s2 = t * t - r * r;
        if s2 <= 0.0 {
            return 0.0;
        }
        let h = &self.h_coupling;
        match x {
            None => h[0][0] * t * t / s2 + h[1][1] * r * r / s2,
            Some(x) => {
                let mut out = h[0][0] * t * t / s2;
                for a in 0..3 {
                    out -= 2.0 * h[0][a + 1] * x[a] * t / s2;
                    for b in 0..3 {
                        out += h[a + 1][b + 1] * x[a] * x[b] / s2;
                    }
                }
                out
            }
        }
    }
}

/// Completed run: full histories of both fields plus the wave source (kept
/// for flux-identity checks) and the monitored extremes.
#[derive(Debug)]
pub struct RunOutput {
    pub u: History,
    pub v: History,
    /// P^{ab} d_a v d_b v + R v^2 per level (the source f of d_tt u - lap u = f).
    pub u_source: Option<History>,
    pub hbar00_max: f64,
    pub steps: usize,
}

struct Workspace<'a> {
    grid: GridSpec,
    params: &'a ModelParams,
}

impl Workspace<'_> {
    fn laplacian(&self, level: &[f64], idx: usize) -> f64 {
        let dx = self.grid.dx();
        match self.grid.mode {
            GridMode::Radial1d => {
                let n = self.grid.n;
                if idx == 0 {
                    // even extension: lap f(0) = 3 f''(0) = 6 (f1 - f0) / dx^2
                    6.0 * (level[1] - level[0]) / (dx * dx)
                } else if idx == n - 1 {
                    0.0 // support never reaches here (guarded)
                } else {
                    let r = self.grid.radius(idx);
                    let d2 = (level[idx + 1] - 2.0 * level[idx] + level[idx - 1]) / (dx * dx);
                    let d1 = (level[idx + 1] - level[idx - 1]) / (2.0 * dx);
                    d2 + 2.0 / r * d1
                }
            }
            GridMode::Full3d => {
                let n = self.grid.n;
                let k = idx % n;
                let j = (idx / n) % n;
                let i = idx / (n * n);
                if i == 0 || i == n - 1 || j == 0 || j == n - 1 || k == 0 || k == n - 1 {
                    return 0.0;
                }
                let c = level[idx];
                let nn = n * n;
                (level[idx + nn] + level[idx - nn] + level[idx + n] + level[idx - n]
                    + level[idx + 1]
                    + level[idx - 1]
                    - 6.0 * c)
                    / (dx * dx)
            }
        }
    }

    /// d_a v at a node (3d only).
    fn spatial_grad(&self, level: &[f64], idx: usize) -> [f64; 3] {
        let dx = self.grid.dx();
        let n = self.grid.n;
        let k = idx % n;
        let j = (idx / n) % n;
        let i = idx / (n * n);
        if i == 0 || i == n - 1 || j == 0 || j == n - 1 || k == 0 || k == n - 1 {
            return [0.0; 3];
        }
        let nn = n * n;
        [
            (level[idx + nn] - level[idx - nn]) / (2.0 * dx),
            (level[idx + n] - level[idx - n]) / (2.0 * dx),
            (level[idx + 1] - level[idx - 1]) / (2.0 * dx),
        ]
    }

    /// H^{ab} d_a d_b v at a node (3d only; radial mode reduces to h1 lap).
    fn h_second(&self, level: &[f64], idx: usize) -> f64 {
        let h = &self.params.h_coupling;
        let dx = self.grid.dx();
        let n = self.grid.n;
        let k = idx % n;
        let j = (idx / n) % n;
        let i = idx / (n * n);
        if i == 0 || i == n - 1 || j == 0 || j == n - 1 || k == 0 || k == n - 1 {
            return 0.0;
        }
        let nn = n * n;
        let stride = [nn, n, 1usize];
        let mut acc = 0.0;
        for a in 0..3 {
            let sa = stride[a];
            acc += h[a + 1][a + 1] * (level[idx + sa] - 2.0 * level[idx] + level[idx - sa])
                / (dx * dx);
            for b in (a + 1)..3 {
                let hc = h[a + 1][b + 1];
                if hc == 0.0 {
                    continue;
                }
                let sb = stride[b];
                let mixed = (level[idx + sa + sb] - level[idx + sa - sb] - level[idx - sa + sb]
                    + level[idx - sa - sb])
                    / (4.0 * dx * dx);
                acc += 2.0 * hc * mixed;
            }
        }
        acc
    }

    /// Klein-Gordon acceleration d_tt v at every node, given the wave field
    /// and (for the mixed term) an estimate of d_t d_a v.
    fn kg_acceleration(
        &self,
        v_now: &[f64],
        u_now: &[f64],
        vt_grad_est: Option<&[[f64; 3]]>,
        out: &mut [f64],
    ) {
        let p = self.params;
        let c2 = p.mass * p.mass;
        let h00 = p.h_coupling[0][0];
        let has_mixed = (1..4).any(|a| p.h_coupling[0][a] != 0.0);
        match self.grid.mode {
            GridMode::Radial1d => {
                let h1 = p.h_coupling[1][1];
                out.par_iter_mut().enumerate().for_each(|(i, o)| {
                    let lap = self.laplacian(v_now, i);
                    let u = u_now[i];
                    *o = ((1.0 - u * h1) * lap - c2 * v_now[i]) / (1.0 + u * h00);
                });
            }
            GridMode::Full3d => {
                out.par_iter_mut().enumerate().for_each(|(i, o)| {
                    let lap = self.laplacian(v_now, i);
                    let u = u_now[i];
                    let mut rhs = lap - u * self.h_second(v_now, i) - c2 * v_now[i];
                    if has_mixed {
                        if let Some(vt_grad) = vt_grad_est {
                            for a in 0..3 {
                                rhs -= 2.0 * u * p.h_coupling[0][a + 1] * vt_grad[i][a];
                            }
                        }
                    }
                    *o = rhs / (1.0 + u * h00);
                });
            }
        }
    }

    /// Wave source P^{ab} d_a v d_b v + R v^2 at every node.
    fn wave_source(&self, v_now: &[f64], vt_now: &[f64], out: &mut [f64]) {
        let p = self.params;
        match self.grid.mode {
            GridMode::Radial1d => {
                let dx = self.grid.dx();
                let n = self.grid.n;
                let p00 = p.p_coupling[0][0];
                let p1 = p.p_coupling[1][1];
                out.par_iter_mut().enumerate().for_each(|(i, o)| {
                    let vr = if i == 0 || i == n - 1 {
                        0.0
                    } else {
                        (v_now[i + 1] - v_now[i - 1]) / (2.0 * dx)
                    };
                    *o = p00 * vt_now[i] * vt_now[i]
                        + p1 * vr * vr
                        + p.r_coupling * v_now[i] * v_now[i];
                });
            }
            GridMode::Full3d => {
                out.par_iter_mut().enumerate().for_each(|(i, o)| {
                    let grad = self.spatial_grad(v_now, i);
                    let vt = vt_now[i];
                    let mut acc = p.p_coupling[0][0] * vt * vt;
                    for a in 0..3 {
                        acc += 2.0 * p.p_coupling[0][a + 1] * vt * grad[a];
                        for b in 0..3 {
                            acc += p.p_coupling[a + 1][b + 1] * grad[a] * grad[b];
                        }
                    }
                    *o = acc + p.r_coupling * v_now[i] * v_now[i];
                });
            }
        }
    }
}

/// Evolve the system to `t_end`. `keep_source` stores the wave-source
/// history (needed by the flux-identity diagnostics, costs one extra field).
pub fn evolve(
    params: &ModelParams,
    grid: GridSpec,
    data: &InitialData,
    t_end: f64,
    keep_source: bool,
) -> Result<RunOutput, SolverError> {
    params.validate(grid.mode)?;
    let dx = grid.dx();
    // base CFL: three spatial dimensions, with a 10% allowance for the
    // quasilinear speed factor (1 + |H^{ab} u|)/(1 + H^{00} u); excursions
    // beyond it abort rather than adapt
    const SPEED_MARGIN: f64 = 1.1;
    let dt = grid.cfl * dx / (3.0 * SPEED_MARGIN).sqrt();
    let steps = ((t_end - 2.0) / dt).ceil() as usize;
    let n_nodes = grid.node_count();
    let ws = Workspace { grid, params };

    let mut u_levels: Vec<Vec<f64>> = Vec::with_capacity(steps + 1);
    let mut v_levels: Vec<Vec<f64>> = Vec::with_capacity(steps + 1);
    let mut src_levels: Vec<Vec<f64>> = Vec::new();

    // first level from the data, second by Taylor expansion at t = 2
    u_levels.push(data.u0.clone());
    v_levels.push(data.v0.clone());

    let mut scratch_acc = vec![0.0; n_nodes];
    let mut scratch_src = vec![0.0; n_nodes];

    ws.wave_source(&data.v0, &data.v1, &mut scratch_src);
    if keep_source {
        src_levels.push(scratch_src.clone());
    }
    let vt_grad0 = build_vt_grad(&ws, &data.v1);
    ws.kg_acceleration(&data.v0, &data.u0, vt_grad0.as_deref(), &mut scratch_acc);
    {
        let mut u1_level = vec![0.0; n_nodes];
        let mut v1_level = vec![0.0; n_nodes];
        u1_level.par_iter_mut().enumerate().for_each(|(i, o)| {
            let lap = ws.laplacian(&data.u0, i);
            *o = data.u0[i] + dt * data.u1[i] + 0.5 * dt * dt * (lap + scratch_src[i]);
        });
        v1_level.par_iter_mut().enumerate().for_each(|(i, o)| {
            *o = data.v0[i] + dt * data.v1[i] + 0.5 * dt * dt * scratch_acc[i];
        });
        u_levels.push(u1_level);
        v_levels.push(v1_level);
    }

    let mut hbar00_max: f64 = 0.0;
    let check_interval = 50;
    let has_mixed = (1..4).any(|a| params.h_coupling[0][a] != 0.0);

    for step in 1..steps {
        let t_now = 2.0 + step as f64 * dt;
        {
            let (v_prev, v_now) = last_two(&v_levels);
            let u_now = u_levels.last().unwrap();

            // Klein-Gordon update first (it only needs u at the current level)
            let mut v_next = vec![0.0; n_nodes];
            if has_mixed {
                // predictor with lagged mixed term, then one corrector pass
                let vt_back: Vec<f64> =
                    (0..n_nodes).map(|i| (v_now[i] - v_prev[i]) / dt).collect();
                let grad_est = build_vt_grad(&ws, &vt_back);
                ws.kg_acceleration(v_now, u_now, grad_est.as_deref(), &mut scratch_acc);
                predict(&mut v_next, v_now, v_prev, &scratch_acc, dt);
                let vt_centered: Vec<f64> = (0..n_nodes)
                    .map(|i| (v_next[i] - v_prev[i]) / (2.0 * dt))
                    .collect();
                let grad_est = build_vt_grad(&ws, &vt_centered);
                ws.kg_acceleration(v_now, u_now, grad_est.as_deref(), &mut scratch_acc);
                predict(&mut v_next, v_now, v_prev, &scratch_acc, dt);
            } else {
                ws.kg_acceleration(v_now, u_now, None, &mut scratch_acc);
                predict(&mut v_next, v_now, v_prev, &scratch_acc, dt);
            }

            // wave update with the centered time derivative of v
            let vt_centered: Vec<f64> = (0..n_nodes)
                .map(|i| (v_next[i] - v_prev[i]) / (2.0 * dt))
                .collect();
            ws.wave_source(v_now, &vt_centered, &mut scratch_src);
            let mut u_next = vec![0.0; n_nodes];
            {
                let (u_prev, u_now) = last_two(&u_levels);
                u_next.par_iter_mut().enumerate().for_each(|(i, o)| {
                    let lap = ws.laplacian(u_now, i);
                    *o = 2.0 * u_now[i] - u_prev[i] + dt * dt * (lap + scratch_src[i]);
                });
            }
            if keep_source {
                src_levels.push(scratch_src.clone());
            }
            v_levels.push(v_next);
            u_levels.push(u_next);
        }

        if step % check_interval == 0 || step + 1 == steps {
            let t_next = t_now + dt;
            let u_last = u_levels.last().unwrap();
            let v_last = v_levels.last().unwrap();
            if guard_band_leak(grid, u_last) || guard_band_leak(grid, v_last) {
                return Err(SolverError::BoundaryContamination { t: t_next });
            }
            // quasilinear principal coefficient and effective speed
            let mut max_h: f64 = 0.0;
            let mut max_speed2: f64 = 1.0;
            for idx in 0..n_nodes {
                let u = u_last[idx];
                if u == 0.0 {
                    continue;
                }
                let r = grid.node_radius(idx);
                if r >= t_next - 1.0 {
                    continue;
                }
                let factor = match grid.mode {
                    GridMode::Radial1d => params.hbar00_factor(t_next, r, None),
                    GridMode::Full3d => {
                        params.hbar00_factor(t_next, r, Some(grid.coords3(idx)))
                    }
                };
                max_h = max_h.max((factor * u).abs());
                let h00 = params.h_coupling[0][0];
                let hab_mag = (1..4)
                    .map(|a| params.h_coupling[a][a].abs())
                    .fold(0.0, f64::max);
                let denom = 1.0 + h00 * u;
                if denom > 1e-6 {
                    max_speed2 = max_speed2.max((1.0 + (hab_mag * u).abs()) / denom);
                }
            }
            hbar00_max = hbar00_max.max(max_h);
            if max_h > 1.0 / 3.0 {
                return Err(SolverError::CoefficientDegeneracy { t: t_next, max_h });
            }
            let allowed = grid.cfl * dx / (3.0 * max_speed2).sqrt();
            if dt > allowed {
                return Err(SolverError::CflViolation {
                    t: t_next,
                    dt,
                    allowed,
                });
            }
        }
    }

    let mk_history = |levels: Vec<Vec<f64>>, which: &str| History {
        grid,
        t0: 2.0,
        dt,
        levels,
        which: which.into(),
    };
    Ok(RunOutput {
        u: mk_history(u_levels, "u"),
        v: mk_history(v_levels, "v"),
        u_source: if keep_source {
            Some(mk_history(src_levels, "wave source"))
        } else {
            None
        },
        hbar00_max,
        steps,
    })
}

fn predict(next: &mut [f64], now: &[f64], prev: &[f64], acc: &[f64], dt: f64) {
    next.par_iter_mut().enumerate().for_each(|(i, o)| {
        *o = 2.0 * now[i] - prev[i] + dt * dt * acc[i];
    });
}

fn build_vt_grad(ws: &Workspace<'_>, vt: &[f64]) -> Option<Vec<[f64; 3]>> {
    let has_mixed = (1..4).any(|a| ws.params.h_coupling[0][a] != 0.0);
    if !has_mixed || ws.grid.mode != GridMode::Full3d {
        return None;
    }
    Some(
        (0..ws.grid.node_count())
            .map(|i| ws.spatial_grad(vt, i))
            .collect(),
    )
}

fn last_two(levels: &[Vec<f64>]) -> (&[f64], &[f64]) {
    let m = levels.len();
    (&levels[m - 2], &levels[m - 1])
}

fn guard_band_leak(grid: GridSpec, level: &[f64]) -> bool {
    const GUARD: usize = 4;
    // threshold relative to the field scale: the smeared numerical front and
    // the superluminal stencil dust sit orders below the field sup, and
    // reflections at 1e-4 relative cannot move any tracked diagnostic;
    // anything louder in the band is genuine contamination.
    let sup = level.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let dust = (1e-4 * sup).max(1e-14);
    match grid.mode {
        GridMode::Radial1d => level[grid.n.saturating_sub(GUARD)..]
            .iter()
            .any(|v| v.abs() > dust),
        GridMode::Full3d => {
            let n = grid.n;
            let near = |i: usize| i < GUARD || i >= n - GUARD;
            level.iter().enumerate().any(|(idx, v)| {
                if v.abs() <= dust {
                    return false;
                }
                let k = idx % n;
                let j = (idx / n) % n;
                let i = idx / (n * n);
                near(i) || near(j) || near(k)
            })
        }
    }
}

/// Differentiate a whole history level-by-level with one first-order
/// operator: time derivatives use centered differences across levels
/// (shrinking the level range by one on each side), spatial and boost
/// operators use per-level stencils. Radial mode supports time derivatives
/// only (other operators break the radial representation).
pub fn derive_history(h: &History, op: crate::calculus::FieldOp) -> Result<History, SolverError> {
    use crate::calculus::FieldOp;
    let grid = h.grid;
    let n = grid.n;
    let dx = grid.dx();
    let m = h.levels.len();
    let spatial_partial = |level: &[f64], idx: usize, axis: usize| -> f64 {
        let k = idx % n;
        let j = (idx / n) % n;
        let i = idx / (n * n);
        if i == 0 || i == n - 1 || j == 0 || j == n - 1 || k == 0 || k == n - 1 {
            return 0.0;
        }
        let stride = [n * n, n, 1usize][axis];
        (level[idx + stride] - level[idx - stride]) / (2.0 * dx)
    };
    match op {
        FieldOp::Partial(0) => {
            let levels: Vec<Vec<f64>> = (1..m - 1)
                .map(|j| {
                    (0..grid.node_count())
                        .map(|i| (h.levels[j + 1][i] - h.levels[j - 1][i]) / (2.0 * h.dt))
                        .collect()
                })
                .collect();
            Ok(History {
                grid,
                t0: h.t0 + h.dt,
                dt: h.dt,
                levels,
                which: format!("dt {}", h.which),
            })
        }
        FieldOp::Partial(axis @ 1..=3) if grid.mode == GridMode::Full3d => {
            let levels: Vec<Vec<f64>> = h
                .levels
                .iter()
                .map(|level| {
                    (0..grid.node_count())
                        .map(|i| spatial_partial(level, i, axis - 1))
                        .collect()
                })
                .collect();
            Ok(History {
                grid,
                t0: h.t0,
                dt: h.dt,
                levels,
                which: format!("d{} {}", axis, h.which),
            })
        }
        FieldOp::Boost(a) if grid.mode == GridMode::Full3d => {
            // L_a = x^a d_t + t d_a, centered in both arguments
            let levels: Vec<Vec<f64>> = (1..m - 1)
                .map(|j| {
                    let t = h.time(j);
                    (0..grid.node_count())
                        .map(|i| {
                            let x = grid.coords3(i);
                            let ut = (h.levels[j + 1][i] - h.levels[j - 1][i]) / (2.0 * h.dt);
                            x[a] * ut + t * spatial_partial(&h.levels[j], i, a)
                        })
                        .collect()
                })
                .collect();
            Ok(History {
                grid,
                t0: h.t0 + h.dt,
                dt: h.dt,
                levels,
                which: format!("L{} {}", a + 1, h.which),
            })
        }
        other => Err(SolverError::RadialTracking { op: other }),
    }
}

/// Apply a composite written left-to-right (leftmost acts last) to a stored
/// history, producing the derived history.
pub fn track_derivatives(
    h: &History,
    ops: &[crate::calculus::FieldOp],
) -> Result<History, SolverError> {
    let mut out = h.clone();
    for &op in ops.iter().rev() {
        out = derive_history(&out, op)?;
    }
    Ok(out)
}

/// Run configuration, readable from a line-based `key=value` file.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub mode: GridMode,
    pub n: usize,
    pub extent: f64,
    pub cfl: f64,
    pub eps: f64,
    pub mass: f64,
    pub delta: f64,
    pub p_coupling: Mat4,
    pub r_coupling: f64,
    pub h_coupling: Mat4,
    pub t_end: f64,
    pub outdir: String,
    pub profile: Profile,
    /// Scale factors applied to the wave / Klein-Gordon data (the smallness
    /// study zeroes the wave data so u is sourced purely quadratically).
    pub wave_data_scale: f64,
    pub kg_data_scale: f64,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let coupled = ModelParams::coupled(1.0, 1e-2);
        Self {
            mode: GridMode::Radial1d,
            n: 4096,
            extent: 64.0,
            cfl: 0.8,
            eps: 1e-2,
            mass: 1.0,
            delta: 1.0 / 64.0,
            p_coupling: coupled.p_coupling,
            r_coupling: coupled.r_coupling,
            h_coupling: coupled.h_coupling,
            t_end: 64.0,
            outdir: "out".into(),
            profile: Profile::Bump,
            wave_data_scale: 1.0,
            kg_data_scale: 1.0,
            seed: 0,
        }
    }
}

impl RunConfig {
    /// Defaults for the 3d configuration.
    pub fn full3d_default() -> Self {
        Self {
            mode: GridMode::Full3d,
            n: 160,
            extent: 40.0,
            cfl: 0.9,
            t_end: 40.0,
            ..Self::default()
        }
    }

    pub fn parse(text: &str) -> Result<Self, SolverError> {
        // pick the mode first so mode-specific defaults apply
        let saw_3d = text.lines().any(|line| {
            matches!(
                line.trim().strip_prefix("mode=").map(str::trim),
                Some("full3d") | Some("3d")
            )
        });
        let mut cfg = if saw_3d {
            Self::full3d_default()
        } else {
            Self::default()
        };
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                SolverError::BadParams(format!("line {}: expected key=value", lineno + 1))
            })?;
            let key = key.trim();
            let value = value.trim();
            let fval = || -> Result<f64, SolverError> {
                value
                    .parse::<f64>()
                    .map_err(|_| SolverError::BadParams(format!("bad number for {key}: {value}")))
            };
            match key {
                "mode" => {
                    cfg.mode = match value {
                        "radial" | "radial1d" => GridMode::Radial1d,
                        "full3d" | "3d" => GridMode::Full3d,
                        other => {
                            return Err(SolverError::BadParams(format!("unknown mode {other}")))
                        }
                    }
                }
                "n" => {
                    cfg.n = value
                        .parse()
                        .map_err(|_| SolverError::BadParams(format!("bad integer for n: {value}")))?
                }
                "L" | "extent" => cfg.extent = fval()?,
                "cfl" => cfg.cfl = fval()?,
                "eps" => cfg.eps = fval()?,
                "c" | "mass" => cfg.mass = fval()?,
                "delta" => cfg.delta = fval()?,
                "R" => cfg.r_coupling = fval()?,
                "t_end" => cfg.t_end = fval()?,
                "outdir" => cfg.outdir = value.to_string(),
                "profile" => {
                    cfg.profile = match value {
                        "bump" => Profile::Bump,
                        "gaussian" | "gaussian_truncated" => Profile::GaussianTruncated,
                        other => {
                            return Err(SolverError::BadParams(format!("unknown profile {other}")))
                        }
                    }
                }
                "wave_data_scale" => cfg.wave_data_scale = fval()?,
                "kg_data_scale" => cfg.kg_data_scale = fval()?,
                "seed" => {
                    cfg.seed = value.parse().map_err(|_| {
                        SolverError::BadParams(format!("bad integer for seed: {value}"))
                    })?
                }
                _ if key.starts_with("P.") || key.starts_with("H.") => {
                    let target = if key.starts_with("P.") {
                        &mut cfg.p_coupling
                    } else {
                        &mut cfg.h_coupling
                    };
                    let idx = &key[2..];
                    if idx.len() != 2 {
                        return Err(SolverError::BadParams(format!("bad coupling key {key}")));
                    }
                    let parse_idx = |ch: u8| -> Result<usize, SolverError> {
                        match ch {
                            b'0'..=b'3' => Ok((ch - b'0') as usize),
                            _ => Err(SolverError::BadParams(format!("bad coupling key {key}"))),
                        }
                    };
                    let i = parse_idx(idx.as_bytes()[0])?;
                    let j = parse_idx(idx.as_bytes()[1])?;
                    let v = fval()?;
                    target[i][j] = v;
                    target[j][i] = v;
                }
                other => {
                    return Err(SolverError::BadParams(format!("unknown key {other}")));
                }
            }
        }
        Ok(cfg)
    }

    pub fn grid(&self) -> Result<GridSpec, FieldError> {
        GridSpec::new(self.mode, self.extent, self.n, self.cfl)
    }

    pub fn model(&self) -> ModelParams {
        ModelParams {
            p_coupling: self.p_coupling,
            r_coupling: self.r_coupling,
            h_coupling: self.h_coupling,
            mass: self.mass,
            eps: self.eps,
            delta: self.delta,
            n_track: 3,
        }
    }

    /// Data with the configured profile, amplitude, and per-field scales.
    pub fn data(&self, grid: GridSpec) -> InitialData {
        let mut data = crate::fields::make_initial_data(self.profile, self.eps, grid);
        for v in data.u0.iter_mut().chain(data.u1.iter_mut()) {
            *v *= self.wave_data_scale;
        }
        for v in data.v0.iter_mut().chain(data.v1.iter_mut()) {
            *v *= self.kg_data_scale;
        }
        data
    }
}
