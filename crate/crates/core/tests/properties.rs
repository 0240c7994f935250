//! Property tests for the structural invariants that hold on every input,
//! not just on curated examples.

use proptest::prelude::*;

use wavekg::fields::{FieldSlice, GridMode, GridSpec, Level};
use wavekg::geometry::{
    frame_matrix, from_hyperboloidal, mat_mul, max_abs_diff, tensor_reframe, to_hyperboloidal,
    Frame, FrameKind, SpacetimePoint, IDENTITY4,
};
use wavekg::harness::fit_decay;
use wavekg::kg_ode::ray_s0;

fn cone_point() -> impl Strategy<Value = SpacetimePoint> {
    (2.0f64..80.0, 0.0f64..0.95, -1.0f64..1.0, 0.0f64..std::f64::consts::TAU).prop_map(
        |(t, rfrac, costh, phi)| {
            let r = rfrac * (t - 1.0);
            let sinth = (1.0 - costh * costh).sqrt();
            SpacetimePoint::new(t, [r * sinth * phi.cos(), r * sinth * phi.sin(), r * costh])
        },
    )
}

proptest! {
    #[test]
    fn hyperbolic_round_trip(p in cone_point()) {
        let q = from_hyperboloidal(to_hyperboloidal(p).unwrap());
        prop_assert!((q.t - p.t).abs() <= 1e-12 * p.t);
        prop_assert_eq!(q.x, p.x);
    }

    #[test]
    fn frame_pairs_are_inverse(p in cone_point()) {
        for (a, b) in [
            (FrameKind::SemiInCartesian, FrameKind::CartesianInSemi),
            (FrameKind::HyperInCartesian, FrameKind::CartesianInHyper),
        ] {
            let fwd = frame_matrix(a, p).unwrap().entries;
            let inv = frame_matrix(b, p).unwrap().entries;
            // the barred pair conditions like (t/s)^2 near the cone
            let cond = (p.t / p.s()).powi(2).max(1.0);
            prop_assert!(max_abs_diff(&mat_mul(&fwd, &inv), &IDENTITY4) < 1e-12 * cond);
        }
    }

    #[test]
    fn tensor_round_trip_through_any_frame(
        p in cone_point(),
        entries in proptest::array::uniform32(-5.0f64..5.0),
    ) {
        let mut tensor = [[0.0; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                tensor[i][j] = entries[i * 4 + j];
            }
        }
        for frame in [Frame::SemiHyperboloidal, Frame::Hyperboloidal] {
            let there = tensor_reframe(&tensor, Frame::Cartesian, frame, p).unwrap();
            let back = tensor_reframe(&there, frame, Frame::Cartesian, p).unwrap();
            let cond = (p.t / p.s()).powi(2).max(1.0);
            prop_assert!(max_abs_diff(&back, &tensor) < 1e-9 * cond);
        }
    }

    #[test]
    fn ray_entry_parameter_well_defined(p in cone_point()) {
        let s0 = ray_s0(p.t, p.r());
        // entry at or after the first hyperboloid, never beyond the anchor's
        // own hyperbolic time by construction of the cone region
        prop_assert!(s0 >= 2.0 - 1e-12);
        if p.r() / p.t > 0.6 {
            prop_assert!((s0 * s0 - (p.t + p.r()) / (p.t - p.r())).abs() < 1e-9 * s0 * s0);
        }
    }

    #[test]
    fn decay_fit_equivariance(
        amp in 0.1f64..50.0,
        exponent in -3.0f64..1.0,
        scale in 0.1f64..20.0,
        stretch in 0.5f64..4.0,
    ) {
        let samples: Vec<(f64, f64)> = (0..24)
            .map(|i| {
                let s = 4.0 * (1.12f64).powi(i);
                (s, amp * s.powf(exponent))
            })
            .collect();
        let base = fit_decay("base", &samples, 0.0).unwrap();
        prop_assert!((base.exponent - exponent).abs() < 1e-8);

        let scaled: Vec<(f64, f64)> = samples.iter().map(|&(s, v)| (s, scale * v)).collect();
        let f1 = fit_decay("scaled", &scaled, 0.0).unwrap();
        prop_assert!((f1.exponent - base.exponent).abs() < 1e-8);
        prop_assert!((f1.amplitude / base.amplitude / scale - 1.0).abs() < 1e-6);

        let stretched: Vec<(f64, f64)> = samples.iter().map(|&(s, v)| (stretch * s, v)).collect();
        let f2 = fit_decay("stretched", &stretched, 0.0).unwrap();
        prop_assert!((f2.exponent - base.exponent).abs() < 1e-8);
    }

    #[test]
    fn slice_binary_round_trips(
        n in 16usize..64,
        extent in 1.0f64..50.0,
        seedvals in proptest::collection::vec(-1.0f64..1.0, 16),
    ) {
        let grid = GridSpec::new(GridMode::Radial1d, extent, n, 0.5).unwrap();
        let mut slice = FieldSlice::zeros(grid, Level::Time(3.25), "prop");
        for (i, v) in slice.values.iter_mut().enumerate() {
            *v = seedvals[i % seedvals.len()] * (i as f64 * 0.1).sin();
        }
        let mut buf = Vec::new();
        slice.write_binary(&mut buf).unwrap();
        let back = FieldSlice::read_binary(&mut buf.as_slice()).unwrap();
        prop_assert_eq!(back.values, slice.values);
        prop_assert_eq!(back.level, slice.level);
    }
}
