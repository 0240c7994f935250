//! Discrete scalar fields on constant-t planes and on hyperboloids.
//!
//! Evolution happens in Cartesian time; hyperboloids are diagnostic surfaces
//! reached by interpolating the stored time history at t = sqrt(s^2 + r^2)
//! node by node. Fields are spatially compactly supported inside the cone
//! { r < t - 1 }, which on the hyperboloid H_s confines the support to
//! { r < (s^2 - 1) / 2 }.

use std::io::{self, Read, Write};

use thiserror::Error;

use crate::calculus::Sampler;

#[derive(Debug, Error)]
pub enum FieldError {
    #[error("grid too coarse: n={n} (need n >= 16)")]
    GridTooCoarse { n: usize },
    #[error("cfl ratio {cfl} outside (0, 1)")]
    BadCfl { cfl: f64 },
    #[error("history covers t in [{have_lo:.3}, {have_hi:.3}] but sampling s={s:.3} needs t in [{need_lo:.3}, {need_hi:.3}]")]
    InsufficientHistory {
        s: f64,
        need_lo: f64,
        need_hi: f64,
        have_lo: f64,
        have_hi: f64,
    },
    #[error("operation requires {expected:?} mode, grid is {actual:?}")]
    ModeMismatch { expected: GridMode, actual: GridMode },
    #[error("i/o failure: {0}")]
    Io(#[from] io::Error),
    #[error("malformed field slice stream: {0}")]
    Format(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridMode {
    /// Radially symmetric fields stored as profiles of r in [0, extent],
    /// even across r = 0.
    Radial1d,
    /// Full fields on the cube [-extent, extent]^3.
    Full3d,
}

/// Spatial discretization. `extent` is the radius R in radial mode and the
/// half-width L in 3d mode; `cfl` is the dt/dx ratio handed to the solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub mode: GridMode,
    pub extent: f64,
    pub n: usize,
    pub cfl: f64,
}

impl GridSpec {
    pub fn new(mode: GridMode, extent: f64, n: usize, cfl: f64) -> Result<Self, FieldError> {
        if n < 16 {
            return Err(FieldError::GridTooCoarse { n });
        }
        if !(cfl > 0.0 && cfl < 1.0) {
            return Err(FieldError::BadCfl { cfl });
        }
        Ok(Self {
            mode,
            extent,
            n,
            cfl,
        })
    }

    pub fn dx(&self) -> f64 {
        match self.mode {
            GridMode::Radial1d => self.extent / (self.n - 1) as f64,
            GridMode::Full3d => 2.0 * self.extent / (self.n - 1) as f64,
        }
    }

    pub fn node_count(&self) -> usize {
        match self.mode {
            GridMode::Radial1d => self.n,
            GridMode::Full3d => self.n * self.n * self.n,
        }
    }

    /// Radius of node `i` in radial mode.
    pub fn radius(&self, i: usize) -> f64 {
        i as f64 * self.dx()
    }

    /// Coordinates of a flattened 3d index.
    pub fn coords3(&self, idx: usize) -> [f64; 3] {
        let n = self.n;
        let k = idx % n;
        let j = (idx / n) % n;
        let i = idx / (n * n);
        let dx = self.dx();
        [
            -self.extent + i as f64 * dx,
            -self.extent + j as f64 * dx,
            -self.extent + k as f64 * dx,
        ]
    }

    pub fn node_radius(&self, idx: usize) -> f64 {
        match self.mode {
            GridMode::Radial1d => self.radius(idx),
            GridMode::Full3d => {
                let c = self.coords3(idx);
                (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt()
            }
        }
    }
}

/// Support radius of cone-supported fields on the hyperboloid H_s.
pub fn cone_support_radius(s: f64) -> f64 {
    0.5 * (s * s - 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Level {
    /// Constant-t Cartesian slice.
    Time(f64),
    /// Hyperboloid H_s sample.
    Hyper(f64),
}

/// Sampled scalar field on one slice, labelled by which differentiated field
/// it holds.
#[derive(Debug, Clone)]
pub struct FieldSlice {
    pub grid: GridSpec,
    pub level: Level,
    pub values: Vec<f64>,
    pub which: String,
}

impl FieldSlice {
    pub fn zeros(grid: GridSpec, level: Level, which: &str) -> Self {
        Self {
            grid,
            level,
            values: vec![0.0; grid.node_count()],
            which: which.to_string(),
        }
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// True when the field has leaked into the outermost guard band
    /// (4 cells) beyond stencil dust (six orders below the field's sup).
    pub fn boundary_leak(&self) -> bool {
        const GUARD: usize = 4;
        let dust = (1e-4 * self.sup_norm()).max(1e-14);
        match self.grid.mode {
            GridMode::Radial1d => self.values[self.grid.n.saturating_sub(GUARD)..]
                .iter()
                .any(|v| v.abs() > dust),
            GridMode::Full3d => {
                let n = self.grid.n;
                let near_edge = |i: usize| i < GUARD || i >= n - GUARD;
                self.values.iter().enumerate().any(|(idx, v)| {
                    if v.abs() <= dust {
                        return false;
                    }
                    let k = idx % n;
                    let j = (idx / n) % n;
                    let i = idx / (n * n);
                    near_edge(i) || near_edge(j) || near_edge(k)
                })
            }
        }
    }

    /// Flat binary layout: magic, mode, n, extent, level kind + value,
    /// label, then row-major little-endian doubles.
    pub fn write_binary<W: Write>(&self, w: &mut W) -> Result<(), FieldError> {
        w.write_all(b"FSL1")?;
        w.write_all(&[match self.grid.mode {
            GridMode::Radial1d => 0u8,
            GridMode::Full3d => 1u8,
        }])?;
        w.write_all(&(self.grid.n as u32).to_le_bytes())?;
        w.write_all(&self.grid.extent.to_le_bytes())?;
        w.write_all(&self.grid.cfl.to_le_bytes())?;
        let (kind, level) = match self.level {
            Level::Time(t) => (0u8, t),
            Level::Hyper(s) => (1u8, s),
        };
        w.write_all(&[kind])?;
        w.write_all(&level.to_le_bytes())?;
        let label = self.which.as_bytes();
        w.write_all(&(label.len() as u16).to_le_bytes())?;
        w.write_all(label)?;
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(r: &mut R) -> Result<Self, FieldError> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != b"FSL1" {
            return Err(FieldError::Format("bad magic".into()));
        }
        let mut b1 = [0u8; 1];
        r.read_exact(&mut b1)?;
        let mode = match b1[0] {
            0 => GridMode::Radial1d,
            1 => GridMode::Full3d,
            m => return Err(FieldError::Format(format!("unknown mode {m}"))),
        };
        let mut b4 = [0u8; 4];
        r.read_exact(&mut b4)?;
        let n = u32::from_le_bytes(b4) as usize;
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b8)?;
        let extent = f64::from_le_bytes(b8);
        r.read_exact(&mut b8)?;
        let cfl = f64::from_le_bytes(b8);
        r.read_exact(&mut b1)?;
        let kind = b1[0];
        r.read_exact(&mut b8)?;
        let level = match kind {
            0 => Level::Time(f64::from_le_bytes(b8)),
            1 => Level::Hyper(f64::from_le_bytes(b8)),
            k => return Err(FieldError::Format(format!("unknown level kind {k}"))),
        };
        let mut b2 = [0u8; 2];
        r.read_exact(&mut b2)?;
        let label_len = u16::from_le_bytes(b2) as usize;
        let mut label = vec![0u8; label_len];
        r.read_exact(&mut label)?;
        let which = String::from_utf8(label).map_err(|e| FieldError::Format(e.to_string()))?;
        let grid = GridSpec {
            mode,
            extent,
            n,
            cfl,
        };
        let mut values = vec![0.0f64; grid.node_count()];
        for v in values.iter_mut() {
            r.read_exact(&mut b8)?;
            *v = f64::from_le_bytes(b8);
        }
        Ok(Self {
            grid,
            level,
            values,
            which,
        })
    }

    /// CSV dump (node coordinates and value); intended for small slices.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<(), FieldError> {
        match self.grid.mode {
            GridMode::Radial1d => {
                writeln!(w, "r,value")?;
                for (i, v) in self.values.iter().enumerate() {
                    writeln!(w, "{},{v}", self.grid.radius(i))?;
                }
            }
            GridMode::Full3d => {
                writeln!(w, "x,y,z,value")?;
                for (idx, v) in self.values.iter().enumerate() {
                    let c = self.grid.coords3(idx);
                    writeln!(w, "{},{},{},{v}", c[0], c[1], c[2])?;
                }
            }
        }
        Ok(())
    }
}

/// Newton-form interpolation through (ts, vs) evaluated at tau, returning
/// (p, p', p''). Small stencils only; ts need not be uniform.
pub fn newton_interp(ts: &[f64], vs: &[f64], tau: f64) -> (f64, f64, f64) {
    let m = ts.len();
    debug_assert!(m >= 2 && m <= 8);
    let mut coef = vs.to_vec();
    for level in 1..m {
        for i in (level..m).rev() {
            coef[i] = (coef[i] - coef[i - 1]) / (ts[i] - ts[i - level]);
        }
    }
    // Horner with first and second derivative accumulation
    let mut p = coef[m - 1];
    let mut dp = 0.0;
    let mut ddp = 0.0;
    for i in (0..m - 1).rev() {
        let dt = tau - ts[i];
        ddp = ddp * dt + 2.0 * dp;
        dp = dp * dt + p;
        p = p * dt + coef[i];
    }
    (p, dp, ddp)
}

/// Time history of one scalar field: uniformly spaced Cartesian slices.
#[derive(Debug, Clone)]
pub struct History {
    pub grid: GridSpec,
    pub t0: f64,
    pub dt: f64,
    pub levels: Vec<Vec<f64>>,
    pub which: String,
}

impl History {
    pub fn t_final(&self) -> f64 {
        self.t0 + (self.levels.len().saturating_sub(1)) as f64 * self.dt
    }

    pub fn time(&self, j: usize) -> f64 {
        self.t0 + j as f64 * self.dt
    }

    /// Index window of `width` levels bracketing time tau, clamped to the
    /// stored range.
    fn window(&self, tau: f64, width: usize) -> std::ops::Range<usize> {
        let m = self.levels.len();
        let j = ((tau - self.t0) / self.dt).floor() as isize;
        let lo = (j - (width as isize / 2 - 1)).clamp(0, m as isize - width as isize) as usize;
        lo..lo + width
    }

    pub fn covers(&self, tau: f64) -> bool {
        tau >= self.t0 - 1e-9 && tau <= self.t_final() + 1e-9
    }

    /// Interpolating point sampler; `width` = 4 gives cubic interpolation,
    /// 6 quintic (used when several derivatives get stacked on top).
    pub fn sampler(&self, width: usize) -> HistorySampler<'_> {
        HistorySampler {
            history: self,
            width,
        }
    }

    /// Interpolate the field (and its first two time derivatives) at
    /// arbitrary t for one node index.
    fn interp_node(&self, tau: f64, node: usize, width: usize) -> (f64, f64, f64) {
        let win = self.window(tau, width.min(self.levels.len()));
        let ts: Vec<f64> = win.clone().map(|j| self.time(j)).collect();
        let vs: Vec<f64> = win.map(|j| self.levels[j][node]).collect();
        newton_interp(&ts, &vs, tau)
    }
}

/// Point sampler over a history: Lagrange in t, separable Lagrange in space
/// (even reflection across r = 0 in radial mode).
pub struct HistorySampler<'a> {
    history: &'a History,
    width: usize,
}

impl HistorySampler<'_> {
    fn spatial_at(&self, level: &[f64], x: [f64; 3]) -> f64 {
        let g = &self.history.grid;
        let w = self.width;
        match g.mode {
            GridMode::Radial1d => {
                let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
                let dx = g.dx();
                let j = (r / dx).floor() as isize;
                let lo = (j - (w as isize / 2 - 1)).min(g.n as isize - w as isize);
                let mut ts = [0.0f64; 8];
                let mut vs = [0.0f64; 8];
                for (k, (tsl, vsl)) in ts.iter_mut().zip(vs.iter_mut()).enumerate().take(w) {
                    let idx = lo + k as isize;
                    // even extension: value at -r equals value at r
                    *tsl = idx as f64 * dx;
                    let phys = idx.unsigned_abs().min(g.n - 1);
                    *vsl = level[phys];
                }
                newton_interp(&ts[..w], &vs[..w], r).0
            }
            GridMode::Full3d => {
                let dx = g.dx();
                let n = g.n;
                // per-axis windows
                let mut windows = [[0usize; 8]; 3];
                let mut locs = [[0.0f64; 8]; 3];
                for a in 0..3 {
                    let pos = (x[a] + g.extent) / dx;
                    let j = pos.floor() as isize;
                    let lo = (j - (w as isize / 2 - 1)).clamp(0, n as isize - w as isize) as usize;
                    for k in 0..w {
                        windows[a][k] = lo + k;
                        locs[a][k] = -g.extent + (lo + k) as f64 * dx;
                    }
                }
                // interpolate along z for each (i,j), then y, then x
                let mut plane = [0.0f64; 8 * 8];
                for i in 0..w {
                    for j in 0..w {
                        let mut col = [0.0f64; 8];
                        for k in 0..w {
                            col[k] =
                                level[(windows[0][i] * n + windows[1][j]) * n + windows[2][k]];
                        }
                        plane[i * w + j] = newton_interp(&locs[2][..w], &col[..w], x[2]).0;
                    }
                }
                let mut line = [0.0f64; 8];
                for (i, l) in line.iter_mut().enumerate().take(w) {
                    *l = newton_interp(&locs[1][..w], &plane[i * w..i * w + w], x[1]).0;
                }
                newton_interp(&locs[0][..w], &line[..w], x[0]).0
            }
        }
    }
}

impl Sampler for HistorySampler<'_> {
    fn eval(&self, t: f64, x: [f64; 3]) -> f64 {
        let h = self.history;
        let w = self.width.min(h.levels.len());
        let win = h.window(t, w);
        let mut ts = [0.0f64; 8];
        let mut vs = [0.0f64; 8];
        for (k, j) in win.enumerate() {
            ts[k] = h.time(j);
            vs[k] = self.spatial_at(&h.levels[j], x);
        }
        newton_interp(&ts[..w], &vs[..w], t).0
    }
}

/// Sample a field history on the hyperboloid H_s (strict: errors when the
/// needed time range is not stored). Nodes outside the cone are zero by the
/// support guarantee.
pub fn sample_hyperboloid(history: &History, s: f64) -> Result<FieldSlice, FieldError> {
    let (slice, truncated) = sample_hyperboloid_lenient(history, s);
    if truncated {
        let grid = history.grid;
        let support = cone_support_radius(s).min(grid.extent);
        return Err(FieldError::InsufficientHistory {
            s,
            need_lo: s.max(history.t0),
            need_hi: (s * s + support * support).sqrt(),
            have_lo: history.t0,
            have_hi: history.t_final(),
        });
    }
    Ok(slice)
}

/// Like [`sample_hyperboloid`] but zero-fills nodes whose time lies outside
/// the stored history, returning whether truncation happened. Used by the
/// long-time diagnostics where the far portion of the hyperboloid is
/// unreachable by construction.
pub fn sample_hyperboloid_lenient(history: &History, s: f64) -> (FieldSlice, bool) {
    let grid = history.grid;
    let mut slice = FieldSlice::zeros(grid, Level::Hyper(s), &history.which);
    let support = cone_support_radius(s);
    let mut truncated = false;
    for idx in 0..grid.node_count() {
        let r = grid.node_radius(idx);
        if r >= support {
            continue; // outside the cone: identically zero
        }
        let tau = (s * s + r * r).sqrt();
        if !history.covers(tau) {
            truncated = true;
            continue;
        }
        slice.values[idx] = history.interp_node(tau, idx, 4).0;
    }
    (slice, truncated)
}

/// Cartesian derivative stack of one field sampled on H_s: the field, first
/// derivatives, and second derivatives, each as grid arrays over the nodes
/// (t = sqrt(s^2 + r^2) pointwise). Frame quantities downstream (boosts,
/// tangent derivatives, the orthogonal field) are algebraic in these.
#[derive(Debug, Clone)]
pub struct HyperStack {
    pub grid: GridSpec,
    pub s: f64,
    pub truncated: bool,
    pub u: Vec<f64>,
    pub ut: Vec<f64>,
    pub utt: Vec<f64>,
    /// radial mode: [dr]; 3d mode: [d1, d2, d3]
    pub ux: Vec<Vec<f64>>,
    /// radial: [dtdr]; 3d: [dtd1, dtd2, dtd3]
    pub utx: Vec<Vec<f64>>,
    /// radial: [drdr]; 3d: packed symmetric [11, 12, 13, 22, 23, 33]
    pub uxx: Vec<Vec<f64>>,
}

impl HyperStack {
    pub fn t_at(&self, idx: usize) -> f64 {
        let r = self.grid.node_radius(idx);
        (self.s * self.s + r * r).sqrt()
    }
}

/// Build the derivative stack on H_s from a history. Spatial derivatives are
/// centered second-order stencils per stored level; time interpolation is
/// quartic (5-point) so that the interpolant's second time derivative stays
/// second-order accurate.
pub fn hyper_stack(history: &History, s: f64, allow_truncation: bool) -> Result<HyperStack, FieldError> {
    let grid = history.grid;
    let n_nodes = grid.node_count();
    let support = cone_support_radius(s);
    let width = 5usize.min(history.levels.len());
    let dx = grid.dx();
    let nspace = match grid.mode {
        GridMode::Radial1d => 1,
        GridMode::Full3d => 3,
    };
    let nsecond = match grid.mode {
        GridMode::Radial1d => 1,
        GridMode::Full3d => 6,
    };
    let mut st = HyperStack {
        grid,
        s,
        truncated: false,
        u: vec![0.0; n_nodes],
        ut: vec![0.0; n_nodes],
        utt: vec![0.0; n_nodes],
        ux: vec![vec![0.0; n_nodes]; nspace],
        utx: vec![vec![0.0; n_nodes]; nspace],
        uxx: vec![vec![0.0; n_nodes]; nsecond],
    };

    // spatial stencil values of one stored level at one node
    let spatial = |level: &[f64], idx: usize, out: &mut [f64]| {
        match grid.mode {
            GridMode::Radial1d => {
                let n = grid.n;
                let (um, up) = if idx == 0 {
                    (level[1], level[1]) // even reflection
                } else if idx == n - 1 {
                    (level[n - 2], level[n - 2])
                } else {
                    (level[idx - 1], level[idx + 1])
                };
                out[0] = level[idx];
                out[1] = (up - um) / (2.0 * dx); // d_r (zero at r = 0 by parity)
                out[2] = (up - 2.0 * level[idx] + um) / (dx * dx);
            }
            GridMode::Full3d => {
                let n = grid.n;
                let k = idx % n;
                let j = (idx / n) % n;
                let i = idx / (n * n);
                let at = |ii: usize, jj: usize, kk: usize| level[(ii * n + jj) * n + kk];
                let c = at(i, j, k);
                out[0] = c;
                // interior guaranteed by the support guard band
                let (im, ip) = (at(i - 1, j, k), at(i + 1, j, k));
                let (jm, jp) = (at(i, j - 1, k), at(i, j + 1, k));
                let (km, kp) = (at(i, j, k - 1), at(i, j, k + 1));
                out[1] = (ip - im) / (2.0 * dx);
                out[2] = (jp - jm) / (2.0 * dx);
                out[3] = (kp - km) / (2.0 * dx);
                out[4] = (ip - 2.0 * c + im) / (dx * dx);
                out[7] = (jp - 2.0 * c + jm) / (dx * dx);
                out[9] = (kp - 2.0 * c + km) / (dx * dx);
                out[5] = (at(i + 1, j + 1, k) - at(i + 1, j - 1, k) - at(i - 1, j + 1, k)
                    + at(i - 1, j - 1, k))
                    / (4.0 * dx * dx);
                out[6] = (at(i + 1, j, k + 1) - at(i + 1, j, k - 1) - at(i - 1, j, k + 1)
                    + at(i - 1, j, k - 1))
                    / (4.0 * dx * dx);
                out[8] = (at(i, j + 1, k + 1) - at(i, j + 1, k - 1) - at(i, j - 1, k + 1)
                    + at(i, j - 1, k - 1))
                    / (4.0 * dx * dx);
            }
        };
    };

    let nvals = match grid.mode {
        GridMode::Radial1d => 3,
        GridMode::Full3d => 10,
    };

    for idx in 0..n_nodes {
        let r = grid.node_radius(idx);
        if r >= support {
            continue;
        }
        if grid.mode == GridMode::Full3d {
            // skip nodes whose stencil would leave the box (support excludes them)
            let n = grid.n;
            let k = idx % n;
            let j = (idx / n) % n;
            let i = idx / (n * n);
            if i == 0 || i == n - 1 || j == 0 || j == n - 1 || k == 0 || k == n - 1 {
                continue;
            }
        }
        let tau = (s * s + r * r).sqrt();
        if !history.covers(tau) {
            st.truncated = true;
            if allow_truncation {
                continue;
            }
            return Err(FieldError::InsufficientHistory {
                s,
                need_lo: s.max(history.t0),
                need_hi: (s * s + support.min(grid.extent).powi(2)).sqrt(),
                have_lo: history.t0,
                have_hi: history.t_final(),
            });
        }
        let win = history.window(tau, width);
        let mut ts = [0.0f64; 8];
        let mut stash = [[0.0f64; 10]; 8];
        for (k, j) in win.clone().enumerate() {
            ts[k] = history.time(j);
            spatial(&history.levels[j], idx, &mut stash[k]);
        }
        let m = win.len();
        let mut series = [0.0f64; 8];
        for comp in 0..nvals {
            for k in 0..m {
                series[k] = stash[k][comp];
            }
            let (p, dp, ddp) = newton_interp(&ts[..m], &series[..m], tau);
            match (grid.mode, comp) {
                (_, 0) => {
                    st.u[idx] = p;
                    st.ut[idx] = dp;
                    st.utt[idx] = ddp;
                }
                (GridMode::Radial1d, 1) => {
                    st.ux[0][idx] = p;
                    st.utx[0][idx] = dp;
                }
                (GridMode::Radial1d, 2) => st.uxx[0][idx] = p,
                (GridMode::Full3d, c @ 1..=3) => {
                    st.ux[c - 1][idx] = p;
                    st.utx[c - 1][idx] = dp;
                }
                (GridMode::Full3d, 4) => st.uxx[0][idx] = p,
                (GridMode::Full3d, 5) => st.uxx[1][idx] = p,
                (GridMode::Full3d, 6) => st.uxx[2][idx] = p,
                (GridMode::Full3d, 7) => st.uxx[3][idx] = p,
                (GridMode::Full3d, 8) => st.uxx[4][idx] = p,
                (GridMode::Full3d, 9) => st.uxx[5][idx] = p,
                _ => unreachable!(),
            }
        }
    }
    Ok(st)
}

/// Initial-data profile shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Profile {
    /// eps (1 - r^2)^4 inside the unit ball, zero outside.
    Bump,
    /// eps exp(1 - 1/(1 - r^2)) inside the unit ball, zero outside.
    GaussianTruncated,
}

impl Profile {
    pub fn eval(&self, eps: f64, r: f64) -> f64 {
        if r >= 1.0 {
            return 0.0;
        }
        match self {
            Profile::Bump => eps * (1.0 - r * r).powi(4),
            Profile::GaussianTruncated => eps * (1.0 - 1.0 / (1.0 - r * r)).exp(),
        }
    }
}

/// The four data functions at t = 2 and their discrete norm proxies.
#[derive(Debug, Clone)]
pub struct InitialData {
    pub u0: Vec<f64>,
    pub u1: Vec<f64>,
    pub v0: Vec<f64>,
    pub v1: Vec<f64>,
    /// (L2, H1, H2) proxies per function, in the order u0, u1, v0, v1.
    pub sobolev_proxy: [[f64; 3]; 4],
}

/// Build unit-ball-supported data with amplitude eps for all four functions.
pub fn make_initial_data(profile: Profile, eps: f64, grid: GridSpec) -> InitialData {
    let n_nodes = grid.node_count();
    let mut f = vec![0.0; n_nodes];
    for (idx, v) in f.iter_mut().enumerate() {
        *v = profile.eval(eps, grid.node_radius(idx));
    }
    let proxy = sobolev_proxy(&f, grid);
    InitialData {
        u0: f.clone(),
        u1: f.clone(),
        v0: f.clone(),
        v1: f.clone(),
        sobolev_proxy: [proxy, proxy, proxy, proxy],
    }
}

/// Discrete (L2, H1, H2) norms of a data array; the measure is the full
/// 3d one (4 pi r^2 dr in radial mode).
pub fn sobolev_proxy(f: &[f64], grid: GridSpec) -> [f64; 3] {
    let dx = grid.dx();
    let mut l2 = 0.0;
    let mut d1 = 0.0;
    let mut d2 = 0.0;
    match grid.mode {
        GridMode::Radial1d => {
            for i in 0..grid.n {
                let r = grid.radius(i);
                let w = 4.0 * std::f64::consts::PI * r * r * dx;
                let (um, up) = if i == 0 {
                    (f[1], f[1])
                } else if i == grid.n - 1 {
                    (f[grid.n - 2], f[grid.n - 2])
                } else {
                    (f[i - 1], f[i + 1])
                };
                let fr = (up - um) / (2.0 * dx);
                let frr = (up - 2.0 * f[i] + um) / (dx * dx);
                l2 += w * f[i] * f[i];
                d1 += w * fr * fr;
                d2 += w * frr * frr;
            }
        }
        GridMode::Full3d => {
            let n = grid.n;
            let w = dx * dx * dx;
            for idx in 0..f.len() {
                let k = idx % n;
                let j = (idx / n) % n;
                let i = idx / (n * n);
                if i == 0 || i == n - 1 || j == 0 || j == n - 1 || k == 0 || k == n - 1 {
                    continue;
                }
                let at = |ii: usize, jj: usize, kk: usize| f[(ii * n + jj) * n + kk];
                let c = at(i, j, k);
                l2 += w * c * c;
                let mut grad2 = 0.0;
                let mut lap = 0.0;
                for (m, p) in [
                    (at(i - 1, j, k), at(i + 1, j, k)),
                    (at(i, j - 1, k), at(i, j + 1, k)),
                    (at(i, j, k - 1), at(i, j, k + 1)),
                ] {
                    let g = (p - m) / (2.0 * dx);
                    grad2 += g * g;
                    lap += (p - 2.0 * c + m) / (dx * dx);
                }
                d1 += w * grad2;
                d2 += w * lap * lap;
            }
        }
    }
    [l2.sqrt(), d1.sqrt(), d2.sqrt()]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn radial_grid(n: usize, extent: f64) -> GridSpec {
        GridSpec::new(GridMode::Radial1d, extent, n, 0.5).unwrap()
    }

    fn history_from_fn(
        grid: GridSpec,
        t0: f64,
        dt: f64,
        m: usize,
        f: impl Fn(f64, f64) -> f64,
    ) -> History {
        let levels = (0..m)
            .map(|j| {
                let t = t0 + j as f64 * dt;
                (0..grid.node_count())
                    .map(|i| f(t, grid.node_radius(i)))
                    .collect()
            })
            .collect();
        History {
            grid,
            t0,
            dt,
            levels,
            which: "u".into(),
        }
    }

    #[test]
    fn constant_in_time_field_samples_exactly() {
        let grid = radial_grid(128, 8.0);
        let h = history_from_fn(grid, 2.0, 0.05, 200, |_, r| (-r * r).exp());
        let slice = sample_hyperboloid(&h, 3.0).unwrap();
        for i in 0..grid.n {
            let r = grid.radius(i);
            if r < cone_support_radius(3.0) {
                assert!((slice.values[i] - (-r * r).exp()).abs() < 1e-12);
            } else {
                assert_eq!(slice.values[i], 0.0);
            }
        }
    }

    #[test]
    fn linear_in_time_field_gives_t_on_hyperboloid() {
        // F(t,x) = t: the hyperboloid sample is sqrt(s^2 + r^2)
        let grid = radial_grid(128, 8.0);
        let h = history_from_fn(grid, 2.0, 0.05, 200, |t, _| t);
        let slice = sample_hyperboloid(&h, 2.0).unwrap();
        assert!((slice.values[0] - 2.0).abs() < 1e-12);
        let i = (1.5 / grid.dx()).round() as usize;
        let r = grid.radius(i);
        if r < cone_support_radius(2.0) {
            assert!((slice.values[i] - (4.0 + r * r).sqrt()).abs() < 1e-10);
        }
    }

    #[test]
    fn interpolation_error_fourth_order_in_dt() {
        let grid = radial_grid(64, 4.0);
        let f = |t: f64, r: f64| (1.3 * t).sin() * (-0.5 * r * r).exp();
        let s = 2.2;
        let mut errs = Vec::new();
        for &dt in &[0.2, 0.1, 0.05] {
            let m = (4.0 / dt) as usize + 2;
            let h = history_from_fn(grid, 1.8, dt, m, f);
            let slice = sample_hyperboloid(&h, s).unwrap();
            let mut worst = 0.0f64;
            for i in 0..grid.n {
                let r = grid.radius(i);
                if r < cone_support_radius(s).min(grid.extent - 1.0) {
                    let tau = (s * s + r * r).sqrt();
                    worst = worst.max((slice.values[i] - f(tau, r)).abs());
                }
            }
            errs.push(worst);
        }
        let o1 = (errs[0] / errs[1]).log2();
        let o2 = (errs[1] / errs[2]).log2();
        assert!(o1 > 3.3 && o2 > 3.3, "orders {o1:.2}, {o2:.2}");
    }

    #[test]
    fn missing_history_is_reported() {
        let grid = radial_grid(64, 16.0);
        let h = history_from_fn(grid, 2.0, 0.1, 10, |t, _| t);
        let err = sample_hyperboloid(&h, 2.5).unwrap_err();
        match err {
            FieldError::InsufficientHistory { s, .. } => assert_eq!(s, 2.5),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn initial_data_trivia() {
        let grid = radial_grid(512, 4.0);
        let zero = make_initial_data(Profile::Bump, 0.0, grid);
        assert!(zero.v0.iter().all(|&v| v == 0.0));

        let data = make_initial_data(Profile::Bump, 0.01, grid);
        assert!((data.v0[0] - 0.01).abs() < 1e-15);
        for i in 0..grid.n {
            if grid.radius(i) >= 1.0 {
                assert_eq!(data.v0[i], 0.0);
            }
        }
    }

    #[test]
    fn h1_proxy_scales_linearly_in_amplitude() {
        let grid = radial_grid(512, 4.0);
        let norms: Vec<f64> = [1e-3, 1e-2, 1e-1]
            .iter()
            .map(|&eps| make_initial_data(Profile::Bump, eps, grid).sobolev_proxy[0][1])
            .collect();
        assert!((norms[1] / norms[0] - 10.0).abs() < 1e-9);
        assert!((norms[2] / norms[1] - 10.0).abs() < 1e-9);
    }

    #[test]
    fn slice_binary_round_trip() {
        let grid = radial_grid(32, 2.0);
        let mut slice = FieldSlice::zeros(grid, Level::Hyper(3.5), "dt u");
        for (i, v) in slice.values.iter_mut().enumerate() {
            *v = (i as f64 * 0.37).sin();
        }
        let mut buf = Vec::new();
        slice.write_binary(&mut buf).unwrap();
        let back = FieldSlice::read_binary(&mut buf.as_slice()).unwrap();
        assert_eq!(back.which, "dt u");
        assert_eq!(back.level, Level::Hyper(3.5));
        assert_eq!(back.values, slice.values);
    }

    #[test]
    fn hyper_stack_derivatives_match_analytic_field() {
        let grid = radial_grid(256, 8.0);
        let f = |t: f64, r: f64| (0.7 * t).cos() * (-0.3 * r * r).exp();
        let h = history_from_fn(grid, 1.8, 0.02, 400, f);
        let st = hyper_stack(&h, 2.5, false).unwrap();
        let i = (2.0 / grid.dx()).round() as usize;
        let r = grid.radius(i);
        let tau = (2.5f64 * 2.5 + r * r).sqrt();
        let ut_exact = -0.7 * (0.7 * tau).sin() * (-0.3 * r * r).exp();
        let ur_exact = (0.7 * tau).cos() * (-0.6 * r) * (-0.3 * r * r).exp();
        assert!((st.ut[i] - ut_exact).abs() < 1e-6);
        assert!((st.ux[0][i] - ur_exact).abs() < 1e-4);
        let utt_exact = -0.49 * (0.7 * tau).cos() * (-0.3 * r * r).exp();
        assert!((st.utt[i] - utt_exact).abs() < 2e-4);
    }
}
