//! Experiment orchestration behind the command-line interface.
//!
//! Each command reads a [`RunConfig`], runs one experiment and writes
//! CSV or key-value text files into the output directory. Every file
//! begins with a comment header echoing the fully resolved
//! configuration, and identical configurations with identical seeds
//! produce bit-identical outputs (all reductions are sequential with
//! fixed order).

use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::algebra::{MatN, VecN};
use crate::config::{PhaseInit, RunConfig};
use crate::energy::{
    bulk_energy_sharp_with_state, bulk_energy_with_state, diffuse_interface_energy_with_state,
    gradient_diffuse, sharp_interface_energy_with_state, EnergyModel, PhaseField,
};
use crate::gamma::{eps_sweep, recovery_phase};
use crate::kinematics::{
    admissibility_report, deformation_state, shared_coverages, DeformationState,
};
use crate::measures::characterization_check;
use crate::mesh::{write_snapshot, CellSelection, NodalField, SimplicialMesh};
use crate::optimize::{
    continuation_eps, minimize_diffuse, noisy_phase_init, DirichletBc, MinimizeResult,
};
use crate::oracle;
use crate::{Error, Result};

fn write_output(out_dir: &Path, name: &str, header: &str, body: &str) -> Result<()> {
    std::fs::create_dir_all(out_dir)?;
    let mut text = String::with_capacity(header.len() + body.len());
    text.push_str(header);
    text.push_str(body);
    std::fs::write(out_dir.join(name), text)?;
    Ok(())
}

/// The analytic state named by the configuration.
struct EvalState {
    mesh: SimplicialMesh,
    model: EnergyModel,
    y: NodalField,
    state: DeformationState,
    selection: CellSelection,
}

fn build_state(config: &RunConfig) -> Result<EvalState> {
    let mesh = config.build_mesh()?;
    let model = config.build_model(mesh.dim())?;
    let map = config.boundary.clone();
    let y = NodalField::vector(&mesh, |x| map.apply(x));
    let state = deformation_state(&mesh, &y);
    let selection = config.set_spec.build(&mesh);
    Ok(EvalState { mesh, model, y, state, selection })
}

fn require_orientation(state: &DeformationState) -> Result<()> {
    for e in 0..state.len() {
        let det = state.element(e).det;
        if !(det > 0.0) {
            return Err(Error::infeasible(format!(
                "violated constraint det: element {e} has det F = {det}"
            )));
        }
    }
    Ok(())
}

fn build_phase_init(
    config: &RunConfig,
    mesh: &SimplicialMesh,
    y: &NodalField,
    selection: &CellSelection,
    model: &EnergyModel,
    eps: f64,
) -> Result<PhaseField> {
    let check_range = |v: f64, what: &str| -> Result<()> {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::infeasible(format!(
                "violated constraint z-range: {what} = {v} is outside [0, 1]"
            )));
        }
        Ok(())
    };
    match &config.phase_init {
        PhaseInit::Constant(v) => {
            check_range(*v, "phase.value")?;
            Ok(PhaseField::constant(mesh, *v))
        }
        PhaseInit::Noisy { mean, amplitude } => {
            check_range(*mean, "phase.value")?;
            Ok(noisy_phase_init(mesh, *mean, *amplitude, config.seed))
        }
        PhaseInit::Band { axis, from, to, amplitude } => {
            let (axis, from, to) = (*axis, *from, *to);
            let base = PhaseField::from_fn(mesh, |x| {
                if x[axis] > from && x[axis] < to {
                    1.0
                } else {
                    0.0
                }
            });
            let noise = noisy_phase_init(mesh, 0.0, *amplitude, config.seed);
            let values = base
                .values()
                .iter()
                .zip(noise.values())
                .map(|(a, b)| a + b)
                .collect();
            PhaseField::new_clamped(mesh, values)
        }
        PhaseInit::Indicator => Ok(PhaseField::indicator(mesh, selection)),
        PhaseInit::Recovery => recovery_phase(mesh, y, selection, eps, &model.well),
    }
}

/// Evaluate the configured analytic state: `energies.csv` plus
/// `admissibility.txt`. Returns `true` when the state failed the
/// Ciarlet-Necas check (reported as a warning, not an error).
pub fn cmd_eval(config: &RunConfig, out_dir: &Path) -> Result<bool> {
    let es = build_state(config)?;
    require_orientation(&es.state)?;
    let header = config.echo();

    let mut body = String::from("quantity,eps,value\n");
    let bulk_sharp =
        bulk_energy_sharp_with_state(&es.mesh, &es.state, &es.selection, &es.model.bulk);
    let sharp_int =
        sharp_interface_energy_with_state(&es.mesh, &es.state, &es.selection, config.gamma);
    writeln!(body, "bulk,,{bulk_sharp}").unwrap();
    writeln!(body, "sharp_interface,,{sharp_int}").unwrap();
    writeln!(body, "total_sharp,,{}", bulk_sharp + sharp_int).unwrap();
    for &eps in &config.sweep_eps {
        let z = build_phase_init(config, &es.mesh, &es.y, &es.selection, &es.model, eps)?;
        let diffuse =
            diffuse_interface_energy_with_state(&es.mesh, &es.state, &z, eps, &es.model.well)?;
        let bulk = bulk_energy_with_state(&es.mesh, &es.state, &z, &es.model.bulk);
        writeln!(body, "bulk_diffuse,{eps},{bulk}").unwrap();
        writeln!(body, "diffuse_interface,{eps},{diffuse}").unwrap();
        writeln!(body, "total_diffuse,{eps},{}", bulk + diffuse).unwrap();
    }
    write_output(out_dir, "energies.csv", &header, &body)?;

    let report = admissibility_report(
        &es.mesh,
        &es.y,
        config.q,
        config.diag_pitch,
        config.diag_samples,
        config.minimize.cn_tol,
    )?;
    let warning = !report.cn_satisfied;
    let mut text = report.to_text();
    writeln!(text, "warning_cn_violated {warning}").unwrap();
    write_output(out_dir, "admissibility.txt", &header, &text)?;
    Ok(warning)
}

fn iteration_log_csv(results: &[(usize, &MinimizeResult)]) -> String {
    let mut body = String::from(
        "stage,iteration,energy,bulk,interface,step,min_det,cn_ratio,grad_norm\n",
    );
    for (stage, result) in results {
        for rec in &result.log {
            let cn = rec.cn_ratio.map(|r| format!("{r}")).unwrap_or_default();
            writeln!(
                body,
                "{stage},{},{},{},{},{},{},{cn},{}",
                rec.iteration,
                rec.energy,
                rec.bulk,
                rec.interface,
                rec.step,
                rec.min_det,
                rec.grad_norm
            )
            .unwrap();
        }
    }
    body
}

fn summary_text(result: &MinimizeResult, eps: f64) -> String {
    let mut s = String::new();
    writeln!(s, "eps {eps}").unwrap();
    writeln!(s, "energy {}", result.energy).unwrap();
    writeln!(s, "bulk_energy {}", result.bulk_energy).unwrap();
    writeln!(s, "interface_energy {}", result.interface_energy).unwrap();
    writeln!(s, "iterations {}", result.iterations).unwrap();
    writeln!(s, "grad_norm {}", result.grad_norm).unwrap();
    writeln!(s, "converged {}", result.converged).unwrap();
    writeln!(s, "stalled {}", result.stalled).unwrap();
    s.push_str(&result.admissibility.to_text());
    s
}

/// Minimize the diffuse energy (single `eps` or a continuation
/// schedule): iteration log, summary, and a final mesh snapshot.
pub fn cmd_minimize(config: &RunConfig, out_dir: &Path) -> Result<()> {
    let es = build_state(config)?;
    let header = config.echo();
    let bc = DirichletBc::on_tags(&es.mesh, config.dirichlet_tags.as_deref(), |x| {
        config.boundary.apply(x)
    });
    let first_eps = config.eps_schedule.first().copied().unwrap_or(config.minimize.eps);
    let z0 = build_phase_init(config, &es.mesh, &es.y, &es.selection, &es.model, first_eps)?;

    let results: Vec<MinimizeResult> = if config.eps_schedule.is_empty() {
        vec![minimize_diffuse(&es.mesh, &es.model, &bc, &es.y, &z0, &config.minimize)?]
    } else {
        continuation_eps(
            &es.mesh,
            &es.model,
            &bc,
            &es.y,
            &z0,
            &config.eps_schedule,
            &config.minimize,
        )?
    };

    let staged: Vec<(usize, &MinimizeResult)> =
        results.iter().enumerate().collect();
    write_output(out_dir, "iterations.csv", &header, &iteration_log_csv(&staged))?;

    let last = results.last().expect("at least one stage");
    let eps_last = if config.eps_schedule.is_empty() {
        config.minimize.eps
    } else {
        config.eps_schedule[results.len() - 1]
    };
    write_output(out_dir, "summary.txt", &header, &summary_text(last, eps_last))?;

    let z_field = NodalField::scalar_from_values(&es.mesh, last.z.values().to_vec())?;
    let snapshot = write_snapshot(&es.mesh, &[("y", &last.y), ("z", &z_field)]);
    write_output(out_dir, "snapshot.txt", &header, &snapshot)?;
    Ok(())
}

/// Recovery-state sweep over the configured `eps` list.
pub fn cmd_sweep(config: &RunConfig, out_dir: &Path) -> Result<()> {
    if config.sweep_eps.is_empty() {
        return Err(Error::Config("sweep.eps_list must be nonempty".into()));
    }
    if config.sweep_eps.iter().any(|&e| !(e > 0.0))
        || config.sweep_eps.windows(2).any(|w| w[1] >= w[0])
    {
        return Err(Error::Config("sweep.eps_list must be positive and strictly decreasing".into()));
    }
    let es = build_state(config)?;
    require_orientation(&es.state)?;
    let header = config.echo();
    let records = eps_sweep(
        &es.mesh,
        &es.y,
        &es.selection,
        &config.sweep_eps,
        &es.model.well,
        config.slice_count,
    )?;
    let mut body = String::from("eps,f_eps_int,gamma_per,coarea_bound,width,ratio\n");
    for r in &records {
        let ratio = if r.gamma_per > 0.0 { r.f_eps_int / r.gamma_per } else { f64::NAN };
        writeln!(
            body,
            "{},{},{},{},{},{}",
            r.eps, r.f_eps_int, r.gamma_per, r.coarea_bound, r.width, ratio
        )
        .unwrap();
    }
    write_output(out_dir, "sweep.csv", &header, &body)?;

    for (i, &eps) in config.sweep_eps.iter().enumerate() {
        let z = recovery_phase(&es.mesh, &es.y, &es.selection, eps, &es.model.well)?;
        let z_field = NodalField::scalar_from_values(&es.mesh, z.values().to_vec())?;
        let snapshot = write_snapshot(&es.mesh, &[("y", &es.y), ("z", &z_field)]);
        write_output(out_dir, &format!("snapshot_eps_{i}.txt"), &header, &snapshot)?;
    }
    Ok(())
}

/// One case of the builtin characterization suite.
pub struct VerifyFixture {
    pub name: String,
    pub mesh: SimplicialMesh,
    pub y: NodalField,
    pub selection: CellSelection,
}

fn grown_selection(mesh: &SimplicialMesh, rng: &mut impl Rng, count: usize) -> CellSelection {
    let mut mask = vec![false; mesh.n_elements()];
    let mut frontier = vec![rng.gen_range(0..mesh.n_elements())];
    mask[frontier[0]] = true;
    let mut added = 1;
    while added < count && !frontier.is_empty() {
        let pick = rng.gen_range(0..frontier.len());
        let e = frontier[pick];
        let free: Vec<usize> = mesh.neighbors(e).iter().copied().filter(|&n| !mask[n]).collect();
        if free.is_empty() {
            frontier.swap_remove(pick);
            continue;
        }
        let n = free[rng.gen_range(0..free.len())];
        mask[n] = true;
        frontier.push(n);
        added += 1;
    }
    CellSelection::from_mask(mesh, mask).expect("mask sized from mesh")
}

/// Random nodal perturbation of an affine map, retried until every
/// element keeps `det F > 0.1`.
fn perturbed_map(
    mesh: &SimplicialMesh,
    base: &MatN,
    amplitude: f64,
    rng: &mut impl Rng,
) -> NodalField {
    let dim = mesh.dim();
    let mut amp = amplitude;
    loop {
        let values: Vec<VecN> = (0..mesh.n_nodes())
            .map(|i| {
                let mut v = base.matvec(&mesh.node(i));
                for a in 0..dim {
                    v[a] += amp * rng.gen_range(-1.0..1.0);
                }
                v
            })
            .collect();
        let y = NodalField::vector_from_values(mesh, values).expect("sized from mesh");
        if deformation_state(mesh, &y).min_det() > 0.1 {
            return y;
        }
        amp *= 0.5;
    }
}

/// The builtin characterization suite: 2D and 3D, identity, affine
/// with moderate condition number, and randomized P1 perturbations,
/// against half, quarter and randomly grown connected selections.
pub fn builtin_fixture_suite() -> Result<Vec<VerifyFixture>> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5EEDED);
    let mut fixtures = Vec::new();

    let mesh2 = crate::mesh::build_box_mesh(2, &[1.0, 1.0], &[8, 8])?;
    let rot = MatN::rotation2(0.5);
    let maps2: Vec<(&str, NodalField)> = vec![
        ("identity", NodalField::identity(&mesh2)),
        ("diag21", NodalField::vector(&mesh2, |x| VecN::new2(2.0 * x[0], x[1]))),
        (
            "rot-diag",
            NodalField::vector(&mesh2, |x| {
                rot.matvec(&VecN::new2(3.0 * x[0], 0.5 * x[1]))
            }),
        ),
        ("shear", NodalField::vector(&mesh2, |x| VecN::new2(x[0] + x[1], x[1]))),
        (
            "perturbed",
            perturbed_map(
                &mesh2,
                &MatN::from_rows(&[&[1.2, 0.3], &[-0.1, 0.9]]),
                0.03,
                &mut rng,
            ),
        ),
    ];
    for (map_name, y) in maps2 {
        let sels: Vec<(&str, CellSelection)> = vec![
            ("half", CellSelection::from_predicate(&mesh2, |c| c[0] < 0.5)),
            ("quarter", CellSelection::from_predicate(&mesh2, |c| c[0] < 0.5 && c[1] < 0.5)),
            ("random", grown_selection(&mesh2, &mut rng, 24)),
        ];
        for (set_name, selection) in sels {
            fixtures.push(VerifyFixture {
                name: format!("2d-{map_name}-{set_name}"),
                mesh: mesh2.clone(),
                y: y.clone(),
                selection,
            });
        }
    }

    let mesh3 = crate::mesh::build_box_mesh(3, &[1.0, 1.0, 1.0], &[4, 4, 4])?;
    let rot3 = MatN::rotation3(&VecN::new3(1.0, 1.0, 0.3), 0.6);
    let maps3: Vec<(&str, NodalField)> = vec![
        ("identity", NodalField::identity(&mesh3)),
        (
            "rot-diag",
            NodalField::vector(&mesh3, |x| {
                rot3.matvec(&VecN::new3(1.5 * x[0], 0.8 * x[1], 1.2 * x[2]))
            }),
        ),
        (
            "perturbed",
            perturbed_map(
                &mesh3,
                &MatN::from_rows(&[&[1.1, 0.1, 0.0], &[0.0, 0.9, 0.1], &[-0.1, 0.0, 1.0]]),
                0.02,
                &mut rng,
            ),
        ),
    ];
    for (map_name, y) in maps3 {
        let sels: Vec<(&str, CellSelection)> = vec![
            ("half", CellSelection::from_predicate(&mesh3, |c| c[0] < 0.5)),
            (
                "quarter",
                CellSelection::from_predicate(&mesh3, |c| c[0] < 0.5 && c[1] < 0.5),
            ),
            ("random", grown_selection(&mesh3, &mut rng, 40)),
        ];
        for (set_name, selection) in sels {
            fixtures.push(VerifyFixture {
                name: format!("3d-{map_name}-{set_name}"),
                mesh: mesh3.clone(),
                y: y.clone(),
                selection,
            });
        }
    }
    Ok(fixtures)
}

/// Run the builtin characterization suite; returns the worst
/// discrepancy. `verify.csv` gets one row per fixture.
pub fn cmd_verify(config: &RunConfig, out_dir: &Path) -> Result<f64> {
    let header = config.echo();
    let fixtures = builtin_fixture_suite()?;
    let mut body = String::from("fixture,total_variation,oracle_perimeter,discrepancy,pass\n");
    let mut worst: f64 = 0.0;
    for f in &fixtures {
        let report = characterization_check(&f.mesh, &f.y, &f.selection)?;
        worst = worst.max(report.discrepancy);
        writeln!(
            body,
            "{},{},{},{},{}",
            f.name, report.total_variation, report.oracle_perimeter, report.discrepancy, report.pass
        )
        .unwrap();
    }
    writeln!(body, "worst,,,{worst},{}", worst < 1e-10).unwrap();
    write_output(out_dir, "verify.csv", &header, &body)?;
    Ok(worst)
}

/// Compare analytic gradients against central finite differences on
/// random feasible states; returns the worst relative error.
pub fn cmd_gradcheck(config: &RunConfig, out_dir: &Path) -> Result<f64> {
    let mesh = config.build_mesh()?;
    let model = config.build_model(mesh.dim())?;
    let header = config.echo();
    let eps = config.minimize.eps;
    let dim = mesh.dim();
    let nn = mesh.n_nodes();

    // keep nodal perturbations well below the element size so random
    // states stay orientation preserving with margin for the stencil
    let h_min = (0..mesh.n_elements())
        .map(|e| mesh.volume(e).powf(1.0 / dim as f64))
        .fold(f64::INFINITY, f64::min);

    let mut body = String::from("state,direction,analytic,fd,rel_err\n");
    let mut worst: f64 = 0.0;
    for state_idx in 0..10 {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ (0xA11CE + state_idx as u64));
        let mut amp = 0.25 * h_min;
        let (y_vals, z_vals, y, z) = loop {
            let y_vals: Vec<VecN> = (0..nn)
                .map(|i| {
                    let mut v = mesh.node(i);
                    for a in 0..dim {
                        v[a] += amp * rng.gen_range(-1.0..1.0);
                    }
                    v
                })
                .collect();
            let z_vals: Vec<f64> = (0..nn).map(|_| rng.gen_range(0.2..0.8)).collect();
            let y = NodalField::vector_from_values(&mesh, y_vals.clone())?;
            let z = PhaseField::new_clamped(&mesh, z_vals.clone())?;
            if deformation_state(&mesh, &y).min_det() > 0.2 {
                break (y_vals, z_vals, y, z);
            }
            amp *= 0.5;
        };
        let grad = gradient_diffuse(&mesh, &y, &z, eps, &model)?;

        let mut flat_state = Vec::with_capacity(nn * (dim + 1));
        for v in &y_vals {
            flat_state.extend_from_slice(v.as_slice());
        }
        flat_state.extend_from_slice(&z_vals);
        let mut flat_grad = Vec::with_capacity(flat_state.len());
        for v in &grad.y {
            flat_grad.extend_from_slice(v.as_slice());
        }
        flat_grad.extend_from_slice(&grad.z);

        let energy = |flat: &[f64]| -> f64 {
            let yv: Vec<VecN> =
                (0..nn).map(|i| VecN::from_slice(&flat[i * dim..(i + 1) * dim])).collect();
            let yf = NodalField::vector_from_values(&mesh, yv).expect("sized");
            let zf = PhaseField::new_clamped(&mesh, flat[nn * dim..].to_vec()).expect("sized");
            crate::energy::total_energy_diffuse(&mesh, &yf, &zf, eps, &model)
                .unwrap_or(f64::INFINITY)
        };

        for dir_idx in 0..10 {
            let mut rngd = ChaCha8Rng::seed_from_u64(config.seed ^ (0xD1 + 97 * dir_idx as u64));
            // keep z perturbations well inside [0.2, 0.8] so clamping
            // cannot kink the finite-difference stencil
            let dir: Vec<f64> =
                (0..flat_state.len()).map(|_| rngd.gen_range(-1.0..1.0)).collect();
            let analytic: f64 = flat_grad.iter().zip(&dir).map(|(g, d)| g * d).sum();
            let fd = oracle::fd_gradient(&energy, &flat_state, &dir, 1e-6)?;
            let rel = (analytic - fd.value).abs() / fd.value.abs().max(1e-10);
            worst = worst.max(rel);
            writeln!(body, "{state_idx},{dir_idx},{analytic},{},{rel}", fd.value).unwrap();
        }
    }
    writeln!(body, "max,,,,{worst}").unwrap();
    write_output(out_dir, "gradcheck.csv", &header, &body)?;
    Ok(worst)
}

/// Symmetric difference of two configured deformed domains.
pub fn cmd_compare(
    config_a: &RunConfig,
    config_b: &RunConfig,
    out_dir: &Path,
) -> Result<f64> {
    let a = build_state(config_a)?;
    let b = build_state(config_b)?;
    let pitch = config_a.diag_pitch;
    let (cov_a, cov_b) = shared_coverages(&a.mesh, &a.y, &b.mesh, &b.y, pitch)?;
    let sym = cov_a.symmetric_difference(&cov_b);
    let tolerance =
        (cov_a.boundary_band_cells() + cov_b.boundary_band_cells()) as f64 * cov_a.cell_volume();
    let mut body = String::new();
    writeln!(body, "symmetric_difference {sym}").unwrap();
    writeln!(body, "pitch {pitch}").unwrap();
    writeln!(body, "grid_tolerance {tolerance}").unwrap();
    let mut header = String::from("# config a\n");
    header.push_str(&config_a.echo());
    header.push_str("# config b\n");
    header.push_str(&config_b.echo());
    write_output(out_dir, "compare.txt", &header, &body)?;
    Ok(sym)
}

/// Tabulate both phase densities over deterministic samples
/// (debugging hook).
pub fn write_density_tables(config: &RunConfig, out_dir: &Path) -> Result<()> {
    let mesh = config.build_mesh()?;
    let model = config.build_model(mesh.dim())?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let samples: Vec<MatN> =
        (0..64).map(|_| crate::energy::sample_gradient(mesh.dim(), &mut rng)).collect();
    for phase in 0..2 {
        let csv = model.bulk.tabulate(phase, &samples);
        write_output(out_dir, &format!("density_phase{phase}.csv"), &config.echo(), &csv)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmpdir(tag: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join(format!("eulastic-cli-{tag}-{}", std::process::id()));
        let _ = std::fs::remove_dir_all(&dir);
        dir
    }

    #[test]
    fn eval_identity_half_split() {
        let cfg = RunConfig::parse(
            "[mesh]\ndim = 2\nresolution = 8 8\n[sweep]\neps_list = 0.125\n[diagnostics]\npitch = 0.0078125\nsamples = 500\n",
        )
        .unwrap();
        let dir = tmpdir("eval");
        let warning = cmd_eval(&cfg, &dir).unwrap();
        assert!(!warning);
        let text = std::fs::read_to_string(dir.join("energies.csv")).unwrap();
        let sharp: f64 = text
            .lines()
            .find(|l| l.starts_with("sharp_interface"))
            .unwrap()
            .rsplit(',')
            .next()
            .unwrap()
            .parse()
            .unwrap();
        assert!((sharp - 1.0).abs() < 1e-12);
        assert!(text.starts_with("# mesh.dim = 2"));
        let adm = std::fs::read_to_string(dir.join("admissibility.txt")).unwrap();
        assert!(adm.contains("cn_satisfied true"));
    }

    #[test]
    fn eval_wrap_reports_cn_warning() {
        let cfg = RunConfig::parse(
            "[mesh]\ndim = 2\nresolution = 12 96\n[boundary]\nmap = wrap\n[sweep]\neps_list =\n[diagnostics]\npitch = 0.00390625\nsamples = 2000\n",
        )
        .unwrap();
        let dir = tmpdir("wrap");
        let warning = cmd_eval(&cfg, &dir).unwrap();
        assert!(warning);
        let adm = std::fs::read_to_string(dir.join("admissibility.txt")).unwrap();
        assert!(adm.contains("cn_satisfied false"));
        assert!(adm.contains("warning_cn_violated true"));
        // empty eps list: no diffuse rows
        let text = std::fs::read_to_string(dir.join("energies.csv")).unwrap();
        assert!(!text.contains("diffuse_interface"));
    }

    #[test]
    fn verify_suite_is_clean() {
        let cfg = RunConfig::parse("[mesh]\ndim = 2\n").unwrap();
        let dir = tmpdir("verify");
        let worst = cmd_verify(&cfg, &dir).unwrap();
        assert!(worst < 1e-10, "worst discrepancy {worst}");
        let text = std::fs::read_to_string(dir.join("verify.csv")).unwrap();
        let rows = text.lines().filter(|l| !l.starts_with('#')).count();
        assert!(rows >= 22, "row count {rows}");
        assert!(!text.contains(",false"));
    }

    #[test]
    fn compare_identity_with_itself() {
        let cfg = RunConfig::parse("[mesh]\ndim = 2\nresolution = 6 6\n[diagnostics]\npitch = 0.01\n").unwrap();
        let dir = tmpdir("compare");
        let sym = cmd_compare(&cfg, &cfg, &dir).unwrap();
        assert_eq!(sym, 0.0);
        let text = std::fs::read_to_string(dir.join("compare.txt")).unwrap();
        assert!(text.contains("symmetric_difference 0"));
    }
}
