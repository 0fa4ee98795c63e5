//! Acceptance suite: one test per criterion, each printing a pass line
//! with the measured values. Run with `cargo test --test acceptance`
//! (add `-- --nocapture` to see the lines for passing tests).

use eulastic::algebra::{MatN, VecN};
use eulastic::cli;
use eulastic::config::RunConfig;
use eulastic::energy::{
    sample_gradient, BulkModel, DoubleWell, EnergyModel, PhaseParams,
};
use eulastic::gamma::{coarea_lower_bound, recovery_phase};
use eulastic::kinematics::{ciarlet_necas_check, deformation_state, injectivity_report, wrap_map};
use eulastic::measures::{pairing_p, TestField};
use eulastic::mesh::{build_box_mesh, CellSelection, NodalField, SimplicialMesh};
use eulastic::optimize::{
    minimize_diffuse, noisy_phase_init, DirichletBc, MinimizeConfig, MinimizeResult, Schedule,
};
use eulastic::oracle::adaptive_simpson;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn pass(criterion: usize, name: &str, detail: String) {
    println!("criterion {criterion} ({name}): PASS - {detail}");
}

// ---------------------------------------------------------------- 1

#[test]
fn criterion_1_characterization_matches_geometric_perimeter() {
    let fixtures = cli::builtin_fixture_suite().unwrap();
    assert!(fixtures.len() >= 20, "only {} fixtures", fixtures.len());
    let mut worst: f64 = 0.0;
    for f in &fixtures {
        let report =
            eulastic::measures::characterization_check(&f.mesh, &f.y, &f.selection).unwrap();
        assert!(
            report.discrepancy < 1e-10,
            "criterion 1 ({}): discrepancy {:e}",
            f.name,
            report.discrepancy
        );
        worst = worst.max(report.discrepancy);
    }
    pass(1, "discrete characterization", format!("{} fixtures, worst discrepancy {worst:e}", fixtures.len()));
}

// ---------------------------------------------------------------- 2

/// Piecewise-polynomial bubble supported on an axis box whose faces
/// lie on mesh planes: per-element quadrature is exact, so the
/// pairing collapses to pure roundoff.
struct BoxBubble {
    dim: usize,
    lo: f64,
    hi: f64,
}

impl TestField for BoxBubble {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &VecN) -> VecN {
        let mut v = VecN::zeros(self.dim);
        if (0..self.dim).any(|a| x[a] <= self.lo || x[a] >= self.hi) {
            return v;
        }
        let mut b = 1.0;
        for a in 0..self.dim {
            b *= (x[a] - self.lo) * (self.hi - x[a]);
        }
        v[0] = b;
        if self.dim > 1 {
            v[1] = -2.0 * b;
        }
        if self.dim > 2 {
            v[2] = 0.5 * b;
        }
        v
    }

    fn gradient(&self, x: &VecN) -> MatN {
        let mut g = MatN::zeros(self.dim);
        if (0..self.dim).any(|a| x[a] <= self.lo || x[a] >= self.hi) {
            return g;
        }
        let coef = [1.0, -2.0, 0.5];
        for j in 0..self.dim {
            let mut db = self.lo + self.hi - 2.0 * x[j];
            for a in 0..self.dim {
                if a != j {
                    db *= (x[a] - self.lo) * (self.hi - x[a]);
                }
            }
            for i in 0..self.dim {
                g[(i, j)] = coef[i] * db;
            }
        }
        g
    }
}

fn pairing_scale(
    mesh: &SimplicialMesh,
    y: &NodalField,
    sel: &CellSelection,
    psi: &dyn TestField,
) -> f64 {
    let state = deformation_state(mesh, y);
    let mut scale = 0.0;
    for e in sel.indices() {
        let c = mesh.centroid(e);
        scale += mesh.volume(e)
            * state.element(e).cof.frobenius_norm()
            * psi.gradient(&c).frobenius_norm();
    }
    scale.max(1e-30)
}

#[test]
fn criterion_2_piola_identity_pairings_vanish() {
    let mut worst: f64 = 0.0;
    let mut cases = 0usize;

    // E = Omega with boundary-vanishing bubbles, over every map of the
    // characterization fixture suite
    for f in cli::builtin_fixture_suite().unwrap() {
        let dim = f.mesh.dim();
        let all = CellSelection::all(&f.mesh);
        let bubble = BoxBubble { dim, lo: 0.0, hi: 1.0 };
        let v = pairing_p(&f.mesh, &f.y, &all, &bubble, 7).unwrap();
        let rel = v.abs() / pairing_scale(&f.mesh, &f.y, &all, &bubble);
        assert!(rel < 1e-8, "criterion 2 ({}, E = domain): {rel:e}", f.name);
        worst = worst.max(rel);
        cases += 1;
    }

    // supports strictly inside int E, on mesh-aligned half splits
    let mesh2 = build_box_mesh(2, &[1.0, 1.0], &[8, 8]).unwrap();
    let maps2: Vec<NodalField> = vec![
        NodalField::identity(&mesh2),
        NodalField::vector(&mesh2, |x| VecN::new2(2.0 * x[0] + 0.3 * x[1], 0.9 * x[1])),
        NodalField::vector(&mesh2, |x| {
            VecN::new2(x[0] + 0.05 * (6.0 * x[1]).sin(), x[1] - 0.05 * (4.0 * x[0]).cos())
        }),
    ];
    let half2 = CellSelection::from_predicate(&mesh2, |c| c[0] < 0.5);
    let inner2 = BoxBubble { dim: 2, lo: 1.0 / 8.0, hi: 3.0 / 8.0 };
    for y in &maps2 {
        let v = pairing_p(&mesh2, y, &half2, &inner2, 5).unwrap();
        let rel = v.abs() / pairing_scale(&mesh2, y, &half2, &inner2);
        assert!(rel < 1e-8, "criterion 2 (2D supp inside E): {rel:e}");
        worst = worst.max(rel);
        cases += 1;
    }
    let mesh3 = build_box_mesh(3, &[1.0, 1.0, 1.0], &[8, 8, 8]).unwrap();
    let y3 = NodalField::vector(&mesh3, |x| {
        VecN::new3(1.2 * x[0], 0.9 * x[1] + 0.1 * x[2], x[2] - 0.1 * x[0])
    });
    let half3 = CellSelection::from_predicate(&mesh3, |c| c[0] < 0.5);
    let inner3 = BoxBubble { dim: 3, lo: 1.0 / 8.0, hi: 3.0 / 8.0 };
    let v = pairing_p(&mesh3, &y3, &half3, &inner3, 7).unwrap();
    let rel = v.abs() / pairing_scale(&mesh3, &y3, &half3, &inner3);
    assert!(rel < 1e-8, "criterion 2 (3D supp inside E): {rel:e}");
    worst = worst.max(rel);
    cases += 1;

    pass(2, "weak divergence-free pairing", format!("{cases} cases, worst relative value {worst:e}"));
}

// ---------------------------------------------------------------- 3

fn random_rotation(dim: usize, rng: &mut impl Rng) -> MatN {
    if dim == 2 {
        MatN::rotation2(rng.gen_range(0.0..std::f64::consts::TAU))
    } else {
        let axis = VecN::new3(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        );
        let axis = if axis.norm() > 1e-6 { axis } else { VecN::new3(1.0, 0.0, 0.0) };
        MatN::rotation3(&axis, rng.gen_range(0.0..std::f64::consts::TAU))
    }
}

#[test]
fn criterion_3_frame_indifference_and_coercivity() {
    let mut worst_fi: f64 = 0.0;
    let mut worst_margin = f64::INFINITY;
    for dim in [2usize, 3] {
        let p = 4.0;
        let q = if dim == 3 { 2.5 } else { 2.0 };
        let pp0 = PhaseParams::well_at_identity(dim, p, 1.0, 0.25, 10.0);
        let pp1 = PhaseParams { d: 5.0, well_det: 0.9, ..pp0 };
        let model = BulkModel::new(dim, p, q, [pp0, pp1]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0xFACADE + dim as u64);
        for phase in 0..2 {
            let c = model.coercivity_constant(phase);
            assert!(c > 0.0);
            for _ in 0..1000 {
                let f = sample_gradient(dim, &mut rng);
                let r = random_rotation(dim, &mut rng);
                let w = model.density(phase, &f);
                let wr = model.density(phase, &r.matmul(&f));
                let fi = (w - wr).abs() / w;
                assert!(fi < 1e-10, "criterion 3: frame-indifference error {fi:e}");
                worst_fi = worst_fi.max(fi);

                let s = f.frobenius_norm();
                let den = s.powf(p) + (s.powf(dim as f64) / f.det()).powf(q) - 1.0;
                let margin = w - c * den;
                assert!(margin >= -1e-9, "criterion 3: coercivity margin {margin:e}");
                worst_margin = worst_margin.min(margin);
            }
        }
    }
    pass(
        3,
        "frame indifference and coercivity",
        format!("worst FI error {worst_fi:e}, worst margin {worst_margin:e}"),
    );
}

// ---------------------------------------------------------------- 4

#[test]
fn criterion_4_double_well_normalization() {
    let mut worst: f64 = 0.0;
    for gamma in [0.5, 1.0, 2.0] {
        let well = DoubleWell::new(gamma).unwrap();
        let integral = adaptive_simpson(&|s| (2.0 * well.phi(s)).sqrt(), 0.0, 1.0, 1e-13);
        let err = (integral - gamma).abs();
        assert!(err < 1e-10, "criterion 4: gamma {gamma}, error {err:e}");
        worst = worst.max(err);
    }
    pass(4, "well normalization", format!("worst |integral - gamma| = {worst:e}"));
}

// ---------------------------------------------------------------- 5

#[test]
fn criterion_5_gradient_consistency() {
    let config = RunConfig::parse(
        "[mesh]\ndim = 2\nresolution = 8 8\n[optimize]\neps = 0.15\n[run]\nseed = 12\n",
    )
    .unwrap();
    let dir = std::env::temp_dir().join(format!("eulastic-acc5-{}", std::process::id()));
    let worst = cli::cmd_gradcheck(&config, &dir).unwrap();
    assert!(worst < 1e-5, "criterion 5: max relative error {worst:e}");
    pass(5, "gradient consistency", format!("max relative error {worst:e} over 100 probes"));
}

// ------------------------------------------------------------- 6, 7

struct SweepState {
    eps: f64,
    f_int: f64,
    coarea: f64,
    gamma_per: f64,
}

/// Recovery states at matched discretization: the deformed element
/// size across the interface is eps/8.
fn recovery_states(stretch: bool) -> Vec<SweepState> {
    let well = DoubleWell::new(1.0).unwrap();
    let mut out = Vec::new();
    for eps in [0.2f64, 0.1, 0.05] {
        let ny = (8.0 / eps).round() as usize;
        let nx = if stretch { 2 * ny } else { ny };
        let mesh = build_box_mesh(2, &[1.0, 1.0], &[nx, ny]).unwrap();
        let y = if stretch {
            NodalField::vector(&mesh, |x| VecN::new2(2.0 * x[0], x[1]))
        } else {
            NodalField::identity(&mesh)
        };
        let half = CellSelection::from_predicate(&mesh, |c| c[0] < 0.5);
        let z = recovery_phase(&mesh, &y, &half, eps, &well).unwrap();
        let state = deformation_state(&mesh, &y);
        let f_int = eulastic::energy::diffuse_interface_energy_with_state(
            &mesh, &state, &z, eps, &well,
        )
        .unwrap();
        let coarea = coarea_lower_bound(&mesh, &y, &z, &well, 50).unwrap();
        let gamma_per =
            eulastic::energy::sharp_interface_energy_with_state(&mesh, &state, &half, 1.0);
        out.push(SweepState { eps, f_int, coarea, gamma_per });
    }
    out
}

#[test]
fn criterion_6_recovery_energy_converges_to_interface_measure() {
    for (tag, states) in [("identity", recovery_states(false)), ("stretch", recovery_states(true))]
    {
        let limit = 1.0; // deformed interface length in both cases
        let last = states.last().unwrap();
        let final_err = (last.f_int - limit).abs() / limit;
        assert!(final_err < 0.03, "criterion 6 ({tag}): final error {final_err:e}");
        for w in states.windows(2) {
            let d0 = (w[0].f_int - limit).abs();
            let d1 = (w[1].f_int - limit).abs();
            assert!(
                d1 <= d0 + 0.01 * limit,
                "criterion 6 ({tag}): distance to the limit grew from {d0:e} to {d1:e}"
            );
        }
        pass(
            6,
            "recovery-state convergence",
            format!(
                "{tag}: F_int = {:?}, final relative error {final_err:e}",
                states.iter().map(|s| s.f_int).collect::<Vec<_>>()
            ),
        );
    }
}

#[test]
fn criterion_7_coarea_sandwich() {
    for (tag, states) in [("identity", recovery_states(false)), ("stretch", recovery_states(true))]
    {
        for s in &states {
            assert!(
                s.coarea <= s.f_int * 1.05,
                "criterion 7 ({tag}, eps {}): coarea {} exceeds 1.05 * {}",
                s.eps,
                s.coarea,
                s.f_int
            );
            assert!(
                s.coarea >= 0.8 * s.gamma_per,
                "criterion 7 ({tag}, eps {}): coarea {} below 0.8 * {}",
                s.eps,
                s.coarea,
                s.gamma_per
            );
        }
        pass(
            7,
            "coarea sandwich",
            format!("{tag}: bounds hold for all eps, e.g. {:.6} in [{:.6}, {:.6}]",
                states[2].coarea, 0.8 * states[2].gamma_per, 1.05 * states[2].f_int),
        );
    }
}

// ---------------------------------------------------------------- 8

#[test]
fn criterion_8_admissibility_detection() {
    let pitch = 1.0 / 512.0;
    // identity and affine pass with ratio 1 +- 1e-2
    let mesh = build_box_mesh(2, &[1.0, 1.0], &[16, 16]).unwrap();
    for (name, y) in [
        ("identity", NodalField::identity(&mesh)),
        ("affine", NodalField::vector(&mesh, |x| VecN::new2(2.0 * x[0] + 0.1 * x[1], x[1]))),
    ] {
        let state = deformation_state(&mesh, &y);
        let cn = ciarlet_necas_check(&mesh, &y, &state, pitch, 1e-2).unwrap();
        assert!(cn.satisfied, "criterion 8 ({name}): not satisfied");
        assert!(
            (cn.ratio - 1.0).abs() <= 1e-2,
            "criterion 8 ({name}): ratio {}",
            cn.ratio
        );
    }

    // the angle-doubling wrap is flagged
    let mesh_w = build_box_mesh(2, &[1.0, 1.0], &[12, 96]).unwrap();
    let y_w = NodalField::vector(&mesh_w, wrap_map(0.5, 4.0 * std::f64::consts::PI));
    let state_w = deformation_state(&mesh_w, &y_w);
    assert!(state_w.min_det() > 0.0);
    let cn = ciarlet_necas_check(&mesh_w, &y_w, &state_w, pitch, 1e-3).unwrap();
    assert!(!cn.satisfied, "criterion 8 (wrap): unexpectedly satisfied");
    assert!(
        cn.ratio >= 1.9 && cn.ratio <= 2.1,
        "criterion 8 (wrap): ratio {}",
        cn.ratio
    );
    let inj = injectivity_report(&mesh_w, &y_w, 4000).unwrap();
    assert!(
        inj.injectivity_fraction < 0.05,
        "criterion 8 (wrap): injectivity fraction {}",
        inj.injectivity_fraction
    );
    pass(
        8,
        "admissibility detection",
        format!("wrap ratio {:.4}, injectivity fraction {:.4}", cn.ratio, inj.injectivity_fraction),
    );
}

// ------------------------------------------------------------- 9, 10

fn single_well_model() -> EnergyModel {
    let p = 4.0;
    let pp1 = PhaseParams::well_at_identity(2, p, 1.0, 0.25, 10.0);
    let pp0 = PhaseParams { d: 50.0, well_det: 0.5, ..pp1 };
    EnergyModel {
        bulk: BulkModel::new(2, p, 2.0, [pp0, pp1]).unwrap(),
        well: DoubleWell::new(1.0).unwrap(),
        psi: None,
    }
}

fn run_criterion_9() -> (MinimizeResult, MinimizeConfig, DirichletBc, SimplicialMesh) {
    let mesh = build_box_mesh(2, &[1.0, 1.0], &[32, 32]).unwrap();
    let model = single_well_model();
    let bc = DirichletBc::on_tags(&mesh, None, |x| *x);
    let y0 = NodalField::identity(&mesh);
    let z0 = noisy_phase_init(&mesh, 0.5, 0.01, 2024);
    let mut config = MinimizeConfig::new(0.25);
    config.schedule = Schedule::AlternateYZ;
    config.max_iterations = 30_000;
    config.gradient_tolerance = 1e-6;
    let result = minimize_diffuse(&mesh, &model, &bc, &y0, &z0, &config).unwrap();
    (result, config, bc, mesh)
}

#[test]
fn criterion_9_minimization_sanity() {
    let t0 = std::time::Instant::now();
    let (r, config, bc, _mesh) = run_criterion_9();
    assert!(r.converged, "criterion 9: not converged after {} iterations", r.iterations);
    assert!(r.grad_norm < 1e-6, "criterion 9: projected gradient {}", r.grad_norm);
    assert!(r.energy < 1e-6, "criterion 9: energy {}", r.energy);
    for w in r.log.windows(2) {
        assert!(w[1].energy <= w[0].energy, "criterion 9: energy increased");
    }
    for rec in &r.log {
        assert!(rec.min_det > config.det_floor, "criterion 9: det floor violated");
    }
    for (&node, &val) in bc.nodes.iter().zip(&bc.values) {
        assert_eq!((r.y.vector_at(node) - val).norm(), 0.0, "criterion 9: Dirichlet drift");
    }
    pass(
        9,
        "minimization sanity",
        format!(
            "converged in {} iterations, energy {:e}, grad {:e}, {:.1?}",
            r.iterations,
            r.energy,
            r.grad_norm,
            t0.elapsed()
        ),
    );
}

#[test]
fn criterion_10_determinism() {
    let serialize = |r: &MinimizeResult| -> String {
        let mut s = String::new();
        for rec in &r.log {
            s.push_str(&format!(
                "{},{},{},{},{},{},{:?},{}\n",
                rec.iteration,
                rec.energy,
                rec.bulk,
                rec.interface,
                rec.step,
                rec.min_det,
                rec.cn_ratio,
                rec.grad_norm
            ));
        }
        s
    };
    let (r1, _, _, _) = run_criterion_9();
    let (r2, _, _, _) = run_criterion_9();
    let (s1, s2) = (serialize(&r1), serialize(&r2));
    assert_eq!(s1, s2, "criterion 10: iteration logs differ");
    pass(10, "determinism", format!("bit-identical logs over {} iterations", r1.iterations));
}
