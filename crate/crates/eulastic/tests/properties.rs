//! Property tests for the algebraic identities the assembly relies on.

use eulastic::algebra::{MatN, VecN};
use eulastic::energy::{DoubleWell, PhaseField};
use eulastic::kinematics::deformation_state;
use eulastic::mesh::{build_box_mesh, read_snapshot, write_snapshot, NodalField};
use proptest::prelude::*;

fn finite_entry() -> impl Strategy<Value = f64> {
    prop_oneof![
        -1e3..1e3f64,
        -1.0..1.0f64,
        Just(0.0),
        Just(-0.0),
        Just(1.0),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    /// (cof A) A^T = det(A) I for every square matrix.
    #[test]
    fn cofactor_transpose_identity(entries in proptest::collection::vec(-10.0..10.0f64, 9), dim in 2usize..=3) {
        let mut a = MatN::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                a[(i, j)] = entries[i * 3 + j];
            }
        }
        let lhs = a.cof().matmul(&a.transpose());
        let det = a.det();
        let scale = a.frobenius_norm().powi(dim as i32).max(1.0);
        for i in 0..dim {
            for j in 0..dim {
                let expect = if i == j { det } else { 0.0 };
                prop_assert!((lhs[(i, j)] - expect).abs() <= 1e-10 * scale);
            }
        }
    }

    /// det(t A) = t^n det A and cof(t A) = t^{n-1} cof A.
    #[test]
    fn minor_scaling_homogeneity(entries in proptest::collection::vec(-5.0..5.0f64, 9), t in 0.1..3.0f64, dim in 2usize..=3) {
        let mut a = MatN::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                a[(i, j)] = entries[i * 3 + j];
            }
        }
        let at = a.scale(t);
        let scale = a.frobenius_norm().powi(dim as i32).max(1.0) * t.powi(dim as i32);
        prop_assert!((at.det() - t.powi(dim as i32) * a.det()).abs() <= 1e-11 * scale);
        let (c, ct) = (a.cof(), at.cof());
        for i in 0..dim {
            for j in 0..dim {
                prop_assert!((ct[(i, j)] - t.powi(dim as i32 - 1) * c[(i, j)]).abs() <= 1e-11 * scale);
            }
        }
    }

    /// Per-element gradients reproduce affine fields exactly, so the
    /// deformation measures of affine maps are spatially constant.
    #[test]
    fn affine_states_are_constant(m in proptest::collection::vec(-2.0..2.0f64, 4)) {
        let a = MatN::from_rows(&[&[m[0], m[1]], &[m[2], m[3]]]);
        let mesh = build_box_mesh(2, &[1.0, 1.0], &[3, 3]).unwrap();
        let y = NodalField::vector(&mesh, |x| a.matvec(x));
        let state = deformation_state(&mesh, &y);
        let d0 = state.element(0);
        for e in 1..mesh.n_elements() {
            let d = state.element(e);
            prop_assert!((d.det - d0.det).abs() <= 1e-12 * d0.det.abs().max(1.0));
            for i in 0..2 {
                for j in 0..2 {
                    prop_assert!((d.f[(i, j)] - d0.f[(i, j)]).abs() <= 1e-12 * d0.f.frobenius_norm().max(1.0));
                }
            }
        }
    }

    /// Snapshot export then import reproduces every byte.
    #[test]
    fn snapshot_roundtrip(values in proptest::collection::vec(finite_entry(), 20)) {
        let mesh = build_box_mesh(2, &[1.0, 1.0], &[2, 2]).unwrap();
        // 9 nodes: use the first 9 values as a scalar field, the rest
        // alternating into a vector field
        let z: Vec<f64> = values.iter().cycle().take(mesh.n_nodes()).copied().collect();
        let yv: Vec<VecN> = (0..mesh.n_nodes())
            .map(|i| VecN::new2(values[(2 * i) % values.len()], values[(2 * i + 1) % values.len()]))
            .collect();
        let zf = NodalField::scalar_from_values(&mesh, z).unwrap();
        let yf = NodalField::vector_from_values(&mesh, yv).unwrap();
        let text = write_snapshot(&mesh, &[("y", &yf), ("z", &zf)]);
        let (mesh2, fields) = read_snapshot(&text).unwrap();
        let text2 = write_snapshot(&mesh2, &[("y", &fields[0].1), ("z", &fields[1].1)]);
        prop_assert_eq!(text, text2);
    }

    /// The double well is nonnegative with zeros exactly at 0 and 1,
    /// and its transition profile integrand integrates to gamma.
    #[test]
    fn double_well_shape(s in -0.5..1.5f64, gamma in 0.1..4.0f64) {
        let well = DoubleWell::new(gamma).unwrap();
        let v = well.phi(s);
        prop_assert!(v >= 0.0);
        if s != 0.0 && s != 1.0 {
            prop_assert!(v > 0.0 || (s - 0.0).abs() < 1e-12 || (s - 1.0).abs() < 1e-12);
        }
        prop_assert!((well.sqrt_two_phi(s).powi(2) - 2.0 * v).abs() <= 1e-10 * (1.0 + v));
    }

    /// Element means of a clamped phase field stay inside [0, 1] and
    /// threshold selections partition monotonically in the threshold.
    #[test]
    fn phase_threshold_monotone(raw in proptest::collection::vec(-0.5..1.5f64, 9), s1 in 0.1..0.45f64, s2 in 0.55..0.9f64) {
        let mesh = build_box_mesh(2, &[1.0, 1.0], &[2, 2]).unwrap();
        let z = PhaseField::new_clamped(&mesh, raw).unwrap();
        for e in 0..mesh.n_elements() {
            let m = z.element_mean(&mesh, e);
            prop_assert!((0.0..=1.0).contains(&m));
        }
        let hi = z.threshold_selection(&mesh, s2);
        let lo = z.threshold_selection(&mesh, s1);
        // {z > s2} is contained in {z > s1} for s1 < s2
        for e in 0..mesh.n_elements() {
            if hi.contains(e) {
                prop_assert!(lo.contains(e));
            }
        }
    }
}
