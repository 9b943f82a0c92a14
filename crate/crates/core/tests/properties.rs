//! Property-based tests over randomized waveforms and grid specs.

use proptest::prelude::*;

use gridsim::gridgen::{generate, netlist_text, GridSpec};
use gridsim::netlist::{parse, validate};
use gridsim::oracle;
use gridsim::topology::build_stencils;
use gridsim::waveform::Pwl;

fn pwl_points() -> impl Strategy<Value = Vec<(f64, f64)>> {
    // strictly increasing non-negative times with bounded values
    (1usize..8, 0.0..1e-9_f64).prop_flat_map(|(n, t0)| {
        (
            proptest::collection::vec(1e-13..1e-10_f64, n),
            proptest::collection::vec(-1e-2..1e-2_f64, n + 1),
        )
            .prop_map(move |(gaps, vals)| {
                let mut t = t0;
                let mut pts = vec![(t, vals[0])];
                for (g, v) in gaps.iter().zip(&vals[1..]) {
                    t += g;
                    pts.push((t, *v));
                }
                pts
            })
    })
}

fn grid_spec() -> impl Strategy<Value = GridSpec> {
    (
        2usize..7,
        2usize..7,
        any::<u64>(),
        prop_oneof![Just(0.0), Just(1e-10), Just(5e-10)],
        1usize..5,
        0.0..=1.0_f64,
    )
        .prop_map(|(rows, cols, seed, l_via, via_pitch, load_density)| GridSpec {
            rows,
            cols,
            seed,
            l_via,
            via_pitch,
            load_density,
            ..GridSpec::default()
        })
}

proptest! {
    #[test]
    fn pwl_midpoint_is_average(pts in pwl_points(), seg in 0usize..7) {
        let w = Pwl::new(pts.clone()).unwrap();
        prop_assume!(seg + 1 < pts.len());
        let (t0, v0) = pts[seg];
        let (t1, v1) = pts[seg + 1];
        let mid = w.eval(0.5 * (t0 + t1));
        prop_assert!((mid - 0.5 * (v0 + v1)).abs() <= 1e-12 * (v0.abs() + v1.abs() + 1.0));
    }

    #[test]
    fn pwl_is_continuous_and_clamped(pts in pwl_points(), t in 0.0..2e-9_f64) {
        let w = Pwl::new(pts.clone()).unwrap();
        let eps = 1e-16;
        let (a, b) = (w.eval(t - eps), w.eval(t + eps));
        prop_assert!((a - b).abs() <= 1e-6 * (a.abs() + b.abs() + 1.0));
        // outside the breakpoints the waveform holds the edge values
        prop_assert_eq!(w.eval(-1.0), pts[0].1);
        prop_assert_eq!(w.eval(1e3), pts[pts.len() - 1].1);
    }

    #[test]
    fn generated_grids_validate(spec in grid_spec()) {
        let text = netlist_text(&spec);
        let c = parse::<f64>(&text).unwrap();
        prop_assert!(validate(&c).is_empty());
        prop_assert_eq!(c.trivial.len(), spec.rows * spec.cols);
    }

    #[test]
    fn round_trip_parse_serialize(spec in grid_spec()) {
        let c = generate(&spec).unwrap();
        let again = parse::<f64>(&c.serialize()).unwrap();
        prop_assert_eq!(&c, &again);
    }

    #[test]
    fn stencil_weights_symmetric(spec in grid_spec()) {
        let c = generate(&spec).unwrap();
        let st = build_stencils(&c, 1e-12).unwrap();
        // d_i w_ij = d_j w_ji for every neighbor pair
        for (i, s) in st.stencils.iter().enumerate() {
            for e in s.lower.iter().chain(s.upper.iter()) {
                let back = st.stencils[e.node]
                    .lower
                    .iter()
                    .chain(st.stencils[e.node].upper.iter())
                    .find(|o| o.node == i)
                    .expect("mirror entry");
                let a = s.diag * e.weight;
                let b = st.stencils[e.node].diag * back.weight;
                prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(b.abs()));
            }
        }
    }

    #[test]
    fn stencils_match_dense_assembly(spec in grid_spec()) {
        let c = generate(&spec).unwrap();
        for h in [1e-13, 1e-12, 1e-11] {
            let sys = oracle::assemble(&c, h);
            let st = build_stencils(&c, h).unwrap();
            let diff = oracle::gs_matrix_equivalence(&sys, &st).unwrap();
            prop_assert!(diff < 1e-14, "h {:e}: diff {:e}", h, diff);
        }
    }

    #[test]
    fn system_matrix_positive_definite(spec in grid_spec()) {
        let c = generate(&spec).unwrap();
        for h in [1e-13, 1e-12, 1e-11] {
            let sys = oracle::assemble(&c, h);
            let rep = oracle::check_pd(&sys);
            prop_assert!(rep.verdict(), "h {:e}: {:?}", h, rep);
        }
    }
}
