//! Coordinates, cone membership, and the three frames used throughout:
//! Cartesian `{d_t, d_a}`, semi-hyperboloidal `{d_t, (x^a/t) d_t + d_a}`,
//! and hyperboloidal `{(s/t) d_t, (x^a/t) d_t + d_a}` with `s = sqrt(t^2 - r^2)`.
//!
//! All estimates downstream live in the interior region `K = { r < t - 1 }`,
//! foliated by the hyperboloids `H_s = { t^2 - r^2 = s^2 }`. Signature is
//! fixed to (-,+,+,+) everywhere; no other convention is ever mixed in.

use thiserror::Error;

/// Tolerance band around the cone boundary `r = t - 1`: points that close to
/// the boundary are rejected, since every estimate is interior to the cone.
pub const CONE_BOUNDARY_TOL: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("point (t={t}, r={r}) lies outside the foliated cone r < t - 1")]
    OutsideCone { t: f64, r: f64 },
    #[error("hyperbolic time s={s} too small for a {what} frame")]
    DegenerateFrame { s: f64, what: &'static str },
}

/// A location in Cartesian coordinates (t, x), t >= 2 in all intended uses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpacetimePoint {
    pub t: f64,
    pub x: [f64; 3],
}

impl SpacetimePoint {
    pub fn new(t: f64, x: [f64; 3]) -> Self {
        Self { t, x }
    }

    pub fn r(&self) -> f64 {
        (self.x[0] * self.x[0] + self.x[1] * self.x[1] + self.x[2] * self.x[2]).sqrt()
    }

    /// Hyperbolic time sqrt(t^2 - r^2); only meaningful for t > r.
    pub fn s(&self) -> f64 {
        (self.t * self.t - self.r() * self.r()).max(0.0).sqrt()
    }

    /// Strict interior of the cone K, with the boundary band rejected.
    pub fn inside_cone(&self) -> bool {
        self.t - 1.0 - self.r() > CONE_BOUNDARY_TOL
    }

    fn require_inside(&self) -> Result<(), GeometryError> {
        if self.inside_cone() {
            Ok(())
        } else {
            Err(GeometryError::OutsideCone {
                t: self.t,
                r: self.r(),
            })
        }
    }
}

/// The same location in hyperbolic coordinates (s, xbar), xbar = x.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperboloidalPoint {
    pub s: f64,
    pub xbar: [f64; 3],
}

/// Map a cone point to hyperbolic coordinates; rejects t <= r.
pub fn to_hyperboloidal(p: SpacetimePoint) -> Result<HyperboloidalPoint, GeometryError> {
    p.require_inside()?;
    Ok(HyperboloidalPoint {
        s: p.s(),
        xbar: p.x,
    })
}

/// Inverse of [`to_hyperboloidal`]: t = sqrt(s^2 + |xbar|^2).
pub fn from_hyperboloidal(h: HyperboloidalPoint) -> SpacetimePoint {
    let r2 = h.xbar[0] * h.xbar[0] + h.xbar[1] * h.xbar[1] + h.xbar[2] * h.xbar[2];
    SpacetimePoint {
        t: (h.s * h.s + r2).sqrt(),
        x: h.xbar,
    }
}

/// Which change-of-frame matrix is wanted. Rows expand the named frame's
/// vectors in the other basis: `SemiInCartesian` expands the
/// semi-hyperboloidal frame in Cartesian partials, `CartesianInSemi` is its
/// inverse, and the `Hyper*` pair plays the same role for the hyperboloidal
/// frame (those degenerate as s -> 0 and are rejected near the cone).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrameKind {
    SemiInCartesian,
    CartesianInSemi,
    HyperInCartesian,
    CartesianInHyper,
}

/// Which frame a tensor's components refer to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Frame {
    Cartesian,
    SemiHyperboloidal,
    Hyperboloidal,
}

pub type Mat4 = [[f64; 4]; 4];

/// 4x4 transition matrix between frames at a fixed cone point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameMatrix {
    pub entries: Mat4,
    pub kind: FrameKind,
}

pub const IDENTITY4: Mat4 = [
    [1.0, 0.0, 0.0, 0.0],
    [0.0, 1.0, 0.0, 0.0],
    [0.0, 0.0, 1.0, 0.0],
    [0.0, 0.0, 0.0, 1.0],
];

pub const MINKOWSKI: Mat4 = [
    [-1.0, 0.0, 0.0, 0.0],
    [0.0, 1.0, 0.0, 0.0],
    [0.0, 0.0, 1.0, 0.0],
    [0.0, 0.0, 0.0, 1.0],
];

pub fn mat_mul(a: &Mat4, b: &Mat4) -> Mat4 {
    let mut out = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            let mut acc = 0.0;
            for k in 0..4 {
                acc += a[i][k] * b[k][j];
            }
            out[i][j] = acc;
        }
    }
    out
}

/// Congruence a^T m a. With the row convention used here (row alpha of a
/// frame matrix expands the alpha-th frame vector), this is the component
/// change for twice-contravariant tensors under the inverse matrix.
pub fn congruence(m: &Mat4, a: &Mat4) -> Mat4 {
    let mut am = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            let mut acc = 0.0;
            for k in 0..4 {
                acc += a[k][i] * m[k][j];
            }
            am[i][j] = acc;
        }
    }
    mat_mul(&am, a)
}

/// Congruence a m a^T: the component change for twice-covariant tensors,
/// i.e. lower[alpha][beta] = m(frame vector alpha, frame vector beta).
pub fn congruence_rows(m: &Mat4, a: &Mat4) -> Mat4 {
    let mut am = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            let mut acc = 0.0;
            for k in 0..4 {
                acc += a[i][k] * m[k][j];
            }
            am[i][j] = acc;
        }
    }
    let mut out = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            let mut acc = 0.0;
            for k in 0..4 {
                acc += am[i][k] * a[j][k];
            }
            out[i][j] = acc;
        }
    }
    out
}

pub fn max_abs_diff(a: &Mat4, b: &Mat4) -> f64 {
    let mut m: f64 = 0.0;
    for i in 0..4 {
        for j in 0..4 {
            m = m.max((a[i][j] - b[i][j]).abs());
        }
    }
    m
}

/// The explicit transition matrix of the requested kind at a cone point.
pub fn frame_matrix(kind: FrameKind, p: SpacetimePoint) -> Result<FrameMatrix, GeometryError> {
    p.require_inside()?;
    let t = p.t;
    let mut m = IDENTITY4;
    match kind {
        FrameKind::SemiInCartesian => {
            for a in 0..3 {
                m[a + 1][0] = p.x[a] / t;
            }
        }
        FrameKind::CartesianInSemi => {
            for a in 0..3 {
                m[a + 1][0] = -p.x[a] / t;
            }
        }
        FrameKind::HyperInCartesian => {
            let s = p.s();
            if s <= CONE_BOUNDARY_TOL {
                return Err(GeometryError::DegenerateFrame {
                    s,
                    what: "hyperboloidal",
                });
            }
            m[0][0] = s / t;
            for a in 0..3 {
                m[a + 1][0] = p.x[a] / t;
            }
        }
        FrameKind::CartesianInHyper => {
            let s = p.s();
            if s <= CONE_BOUNDARY_TOL {
                return Err(GeometryError::DegenerateFrame {
                    s,
                    what: "hyperboloidal",
                });
            }
            m[0][0] = t / s;
            for a in 0..3 {
                m[a + 1][0] = -p.x[a] / s;
            }
        }
    }
    Ok(FrameMatrix { entries: m, kind })
}

/// Metric components (both index positions) in the requested frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricComponents {
    pub lower: Mat4,
    pub upper: Mat4,
    pub frame: Frame,
}

/// Minkowski metric expressed in the requested frame at a cone point.
///
/// Lower components transform by congruence with the frame-in-Cartesian
/// matrix, upper components with its inverse.
pub fn metric_components(frame: Frame, p: SpacetimePoint) -> Result<MetricComponents, GeometryError> {
    p.require_inside()?;
    let (fwd, inv) = match frame {
        Frame::Cartesian => {
            return Ok(MetricComponents {
                lower: MINKOWSKI,
                upper: MINKOWSKI,
                frame,
            })
        }
        Frame::SemiHyperboloidal => (
            frame_matrix(FrameKind::SemiInCartesian, p)?,
            frame_matrix(FrameKind::CartesianInSemi, p)?,
        ),
        Frame::Hyperboloidal => (
            frame_matrix(FrameKind::HyperInCartesian, p)?,
            frame_matrix(FrameKind::CartesianInHyper, p)?,
        ),
    };
    Ok(MetricComponents {
        lower: congruence_rows(&MINKOWSKI, &fwd.entries),
        upper: congruence(&MINKOWSKI, &inv.entries),
        frame,
    })
}

/// Change of basis for a twice-contravariant tensor between any two frames.
///
/// Routed through Cartesian components; round-trips are the identity up to
/// rounding, and hyperboloidal components obey the growth bounds
/// |T^{00}| <= C (t/s)^2, |T^{a0}| <= C t/s, |T^{ab}| <= C with
/// C = max |T| in the Cartesian frame.
pub fn tensor_reframe(
    components: &Mat4,
    from: Frame,
    to: Frame,
    p: SpacetimePoint,
) -> Result<Mat4, GeometryError> {
    // Upper-index components transform with the inverse matrix; mapping
    // frame F -> Cartesian therefore uses the F-in-Cartesian matrix.
    let to_cart = |c: &Mat4, f: Frame| -> Result<Mat4, GeometryError> {
        Ok(match f {
            Frame::Cartesian => *c,
            Frame::SemiHyperboloidal => {
                congruence(c, &frame_matrix(FrameKind::SemiInCartesian, p)?.entries)
            }
            Frame::Hyperboloidal => {
                congruence(c, &frame_matrix(FrameKind::HyperInCartesian, p)?.entries)
            }
        })
    };
    let cart = to_cart(components, from)?;
    Ok(match to {
        Frame::Cartesian => cart,
        Frame::SemiHyperboloidal => {
            congruence(&cart, &frame_matrix(FrameKind::CartesianInSemi, p)?.entries)
        }
        Frame::Hyperboloidal => {
            congruence(&cart, &frame_matrix(FrameKind::CartesianInHyper, p)?.entries)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_cone_point(rng: &mut impl Rng) -> SpacetimePoint {
        let t = rng.gen_range(2.0..50.0);
        // keep a definite margin from the boundary
        let r = rng.gen_range(0.0..0.95 * (t - 1.0));
        let costh: f64 = rng.gen_range(-1.0..1.0);
        let phi = rng.gen_range(0.0..std::f64::consts::TAU);
        let sinth = (1.0 - costh * costh).sqrt();
        SpacetimePoint::new(t, [r * sinth * phi.cos(), r * sinth * phi.sin(), r * costh])
    }

    #[test]
    fn hyperbolic_coordinates_trivial_cases() {
        let h = to_hyperboloidal(SpacetimePoint::new(2.0, [0.0; 3])).unwrap();
        assert_eq!(h.s, 2.0);
        assert_eq!(h.xbar, [0.0; 3]);

        // 3-4-5 triple
        let h = to_hyperboloidal(SpacetimePoint::new(5.0, [3.0, 0.0, 0.0])).unwrap();
        assert!((h.s - 4.0).abs() < 1e-14);

        // on the light cone: rejected
        assert!(to_hyperboloidal(SpacetimePoint::new(2.0, [2.0, 0.0, 0.0])).is_err());
        // boundary band around r = t - 1: rejected as well
        assert!(to_hyperboloidal(SpacetimePoint::new(2.0, [1.0, 0.0, 0.0])).is_err());
        assert!(to_hyperboloidal(SpacetimePoint::new(2.0, [1.0 - 5e-10, 0.0, 0.0])).is_err());
    }

    #[test]
    fn round_trip_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let p = random_cone_point(&mut rng);
            let q = from_hyperboloidal(to_hyperboloidal(p).unwrap());
            assert!((q.t - p.t).abs() <= 1e-12 * p.t.abs());
            for a in 0..3 {
                assert_eq!(q.x[a], p.x[a]);
            }
        }
    }

    #[test]
    fn frame_matrices_match_explicit_entries() {
        let p = SpacetimePoint::new(2.0, [1.0 - 1e-6, 0.0, 0.0]);
        let phi = frame_matrix(FrameKind::SemiInCartesian, p).unwrap().entries;
        assert!((phi[1][0] - p.x[0] / 2.0).abs() < 1e-15);
        assert_eq!(phi[0], [1.0, 0.0, 0.0, 0.0]);
        assert_eq!(phi[2][2], 1.0);

        // at x = 0 every frame matrix is the identity except the s/t, t/s entries
        let origin = SpacetimePoint::new(3.0, [0.0; 3]);
        let phi0 = frame_matrix(FrameKind::SemiInCartesian, origin).unwrap().entries;
        assert_eq!(max_abs_diff(&phi0, &IDENTITY4), 0.0);
        let phib = frame_matrix(FrameKind::HyperInCartesian, origin).unwrap().entries;
        assert_eq!(phib[0][0], 1.0); // s = t at x = 0

        let psib = frame_matrix(FrameKind::CartesianInHyper, SpacetimePoint::new(5.0, [3.0, 0.0, 0.0]))
            .unwrap()
            .entries;
        assert!((psib[0][0] - 5.0 / 4.0).abs() < 1e-15);
        assert!((psib[1][0] + 3.0 / 4.0).abs() < 1e-15);
    }

    #[test]
    fn frame_matrix_pairs_invert_each_other() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let p = random_cone_point(&mut rng);
            let phi = frame_matrix(FrameKind::SemiInCartesian, p).unwrap().entries;
            let psi = frame_matrix(FrameKind::CartesianInSemi, p).unwrap().entries;
            assert!(max_abs_diff(&mat_mul(&phi, &psi), &IDENTITY4) < 1e-12);
            let phib = frame_matrix(FrameKind::HyperInCartesian, p).unwrap().entries;
            let psib = frame_matrix(FrameKind::CartesianInHyper, p).unwrap().entries;
            assert!(max_abs_diff(&mat_mul(&phib, &psib), &IDENTITY4) < 1e-12);
        }
    }

    /// Hand-coded metric matrices, written out entry by entry.
    fn semi_metric_explicit(p: SpacetimePoint) -> (Mat4, Mat4) {
        let t = p.t;
        let s2 = p.s() * p.s();
        let mut lower = [[0.0; 4]; 4];
        let mut upper = [[0.0; 4]; 4];
        lower[0][0] = -1.0;
        upper[0][0] = -s2 / (t * t);
        for a in 0..3 {
            lower[0][a + 1] = -p.x[a] / t;
            lower[a + 1][0] = -p.x[a] / t;
            upper[0][a + 1] = -p.x[a] / t;
            upper[a + 1][0] = -p.x[a] / t;
            for b in 0..3 {
                lower[a + 1][b + 1] =
                    if a == b { 1.0 } else { 0.0 } - p.x[a] * p.x[b] / (t * t);
                upper[a + 1][b + 1] = if a == b { 1.0 } else { 0.0 };
            }
        }
        (lower, upper)
    }

    fn hyper_upper_explicit(p: SpacetimePoint) -> Mat4 {
        let s = p.s();
        let mut upper = [[0.0; 4]; 4];
        upper[0][0] = -1.0;
        for a in 0..3 {
            upper[0][a + 1] = -p.x[a] / s;
            upper[a + 1][0] = -p.x[a] / s;
            upper[a + 1][a + 1] = 1.0;
        }
        upper
    }

    #[test]
    fn metric_congruence_matches_explicit_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..50 {
            let p = random_cone_point(&mut rng);
            let semi = metric_components(Frame::SemiHyperboloidal, p).unwrap();
            let (lo, up) = semi_metric_explicit(p);
            assert!(max_abs_diff(&semi.lower, &lo) < 1e-12);
            assert!(max_abs_diff(&semi.upper, &up) < 1e-12);

            let hyp = metric_components(Frame::Hyperboloidal, p).unwrap();
            assert!(max_abs_diff(&hyp.upper, &hyper_upper_explicit(p)) < 1e-12);

            // upper . lower = identity
            assert!(max_abs_diff(&mat_mul(&semi.upper, &semi.lower), &IDENTITY4) < 1e-10);
            assert!(max_abs_diff(&mat_mul(&hyp.upper, &hyp.lower), &IDENTITY4) < 1e-10);
        }
    }

    #[test]
    fn semi_metric_reduces_to_cartesian_at_origin() {
        let p = SpacetimePoint::new(4.0, [0.0; 3]);
        let semi = metric_components(Frame::SemiHyperboloidal, p).unwrap();
        assert!(max_abs_diff(&semi.upper, &MINKOWSKI) < 1e-15);

        let p = SpacetimePoint::new(5.0, [3.0, 0.0, 0.0]);
        let semi = metric_components(Frame::SemiHyperboloidal, p).unwrap();
        assert!((semi.upper[0][0] + 0.64).abs() < 1e-14);
    }

    /// Independent double-sum oracle for the two-index change of basis.
    fn reframe_oracle(c: &Mat4, a: &Mat4) -> Mat4 {
        let mut out = [[0.0; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                let mut acc = 0.0;
                for k in 0..4 {
                    for l in 0..4 {
                        acc += a[k][i] * a[l][j] * c[k][l];
                    }
                }
                out[i][j] = acc;
            }
        }
        out
    }

    #[test]
    fn tensor_reframe_round_trip_and_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..50 {
            let p = random_cone_point(&mut rng);
            let mut tensor = [[0.0; 4]; 4];
            for row in tensor.iter_mut() {
                for entry in row.iter_mut() {
                    *entry = rng.gen_range(-1.0..1.0);
                }
            }
            let bar = tensor_reframe(&tensor, Frame::Cartesian, Frame::Hyperboloidal, p).unwrap();
            let oracle = reframe_oracle(
                &tensor,
                &frame_matrix(FrameKind::CartesianInHyper, p).unwrap().entries,
            );
            assert!(max_abs_diff(&bar, &oracle) < 1e-12);

            let back = tensor_reframe(&bar, Frame::Hyperboloidal, Frame::Cartesian, p).unwrap();
            // near the cone t/s is large, so allow the conditioning factor
            let cond = (p.t / p.s()).powi(2);
            assert!(max_abs_diff(&back, &tensor) < 1e-11 * cond.max(1.0));
        }
    }

    #[test]
    fn hyperboloidal_components_obey_growth_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        for _ in 0..100 {
            let p = random_cone_point(&mut rng);
            let ratio = p.t / p.s();
            let mut tensor = [[0.0f64; 4]; 4];
            let mut cmax: f64 = 0.0;
            for row in tensor.iter_mut() {
                for entry in row.iter_mut() {
                    *entry = rng.gen_range(-1.0..1.0);
                    cmax = cmax.max((*entry).abs());
                }
            }
            let bar = tensor_reframe(&tensor, Frame::Cartesian, Frame::Hyperboloidal, p).unwrap();
            // entry-count factor 16 covers the worst-case double sum
            let c = 16.0 * cmax;
            assert!(bar[0][0].abs() <= c * ratio * ratio + 1e-12);
            for a in 1..4 {
                assert!(bar[a][0].abs() <= c * ratio + 1e-12);
                assert!(bar[0][a].abs() <= c * ratio + 1e-12);
                for b in 1..4 {
                    assert!(bar[a][b].abs() <= c + 1e-12);
                }
            }
        }
    }

    #[test]
    fn constant_diag_tensor_to_hyperboloidal_explicit() {
        // H = diag(1,1,1,1) at (t,x) = (5,(3,0,0)): barred 00-component by the
        // explicit double sum (t/s)^2 * 1 + (x^1/s)^2 * 1 = 25/16 + 9/16.
        let p = SpacetimePoint::new(5.0, [3.0, 0.0, 0.0]);
        let bar = tensor_reframe(&IDENTITY4, Frame::Cartesian, Frame::Hyperboloidal, p).unwrap();
        assert!((bar[0][0] - (25.0 + 9.0) / 16.0).abs() < 1e-13);
    }
}
