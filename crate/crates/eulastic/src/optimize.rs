//! Minimization of the diffuse energy over free nodal unknowns.
//!
//! Projected gradient descent with Armijo backtracking. Feasibility is
//! preserved by step rejection: a trial step is accepted only if every
//! element keeps `det F` above the floor, the energy decreases
//! sufficiently, and (when enabled) the Ciarlet-Necas ratio stays
//! within tolerance. The phase field is clamped to [0, 1] nodewise;
//! Dirichlet nodes never move. There is no projection onto the
//! orientation-preserving set, only rejection.
//!
//! The expensive Ciarlet-Necas rasterization runs only on steps that
//! already passed the determinant and Armijo tests.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::algebra::VecN;
use crate::energy::{
    bulk_energy_with_state, diffuse_interface_energy_with_state, gradient_diffuse_with_state,
    EnergyModel, PhaseField,
};
use crate::kinematics::{
    admissibility_report, ciarlet_necas_check, deformation_state, AdmissibilityReport,
    DeformationState,
};
use crate::mesh::{NodalField, SimplicialMesh};
use crate::{Error, Result};

/// Update pattern of the two unknown fields.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Schedule {
    /// One joint step in `(y, z)` per iteration.
    Simultaneous,
    /// One `y` step with `z` frozen, then one `z` step with `y` frozen.
    AlternateYZ,
}

/// Optimizer parameters.
#[derive(Clone, Debug)]
pub struct MinimizeConfig {
    pub eps: f64,
    pub max_iterations: usize,
    /// Convergence threshold on the projected gradient norm.
    pub gradient_tolerance: f64,
    pub step_init: f64,
    /// Backtracking factor in (0, 1).
    pub backtrack: f64,
    pub armijo_c: f64,
    /// Slack on the Ciarlet-Necas ratio during optimization.
    pub cn_tol: f64,
    /// Rasterization pitch of the Ciarlet-Necas volume estimate.
    pub cn_pitch: f64,
    pub cn_check: bool,
    /// Feasibility floor on every element's `det F`.
    pub det_floor: f64,
    /// Seed for initialization noise.
    pub seed: u64,
    pub noise_amplitude: f64,
    /// Line search gives up below this step.
    pub min_step: f64,
    pub schedule: Schedule,
    pub vary_y: bool,
    pub vary_z: bool,
}

impl MinimizeConfig {
    pub fn new(eps: f64) -> Self {
        MinimizeConfig {
            eps,
            max_iterations: 2000,
            gradient_tolerance: 1e-6,
            step_init: 1.0,
            backtrack: 0.5,
            armijo_c: 1e-4,
            cn_tol: 1e-3,
            cn_pitch: 1.0 / 128.0,
            cn_check: true,
            det_floor: 1e-8,
            seed: 0,
            noise_amplitude: 0.01,
            min_step: 1e-14,
            schedule: Schedule::Simultaneous,
            vary_y: true,
            vary_z: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0) {
            return Err(Error::invalid_argument("eps must be positive".into()));
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return Err(Error::invalid_argument("backtrack factor must be in (0, 1)".into()));
        }
        for (name, v) in [
            ("gradient_tolerance", self.gradient_tolerance),
            ("step_init", self.step_init),
            ("armijo_c", self.armijo_c),
            ("cn_tol", self.cn_tol),
            ("cn_pitch", self.cn_pitch),
            ("det_floor", self.det_floor),
            ("min_step", self.min_step),
        ] {
            if !(v > 0.0) {
                return Err(Error::invalid_argument(format!("{name} must be positive")));
            }
        }
        Ok(())
    }
}

/// Dirichlet data: fixed nodes with their prescribed positions.
#[derive(Clone, Debug)]
pub struct DirichletBc {
    pub nodes: Vec<usize>,
    pub values: Vec<VecN>,
}

impl DirichletBc {
    /// Fix the nodes of the tagged boundary facets (all of the
    /// boundary when `tags` is `None`) at `map(x)`.
    pub fn on_tags(
        mesh: &SimplicialMesh,
        tags: Option<&[u32]>,
        map: impl Fn(&VecN) -> VecN,
    ) -> Self {
        let nodes = mesh.boundary_nodes(tags);
        let values = nodes.iter().map(|&i| map(&mesh.node(i))).collect();
        DirichletBc { nodes, values }
    }

    fn mask(&self, n_nodes: usize) -> Vec<bool> {
        let mut fixed = vec![false; n_nodes];
        for &i in &self.nodes {
            fixed[i] = true;
        }
        fixed
    }
}

/// Phase initialization `mean + uniform(-amplitude, amplitude)`,
/// clamped to [0, 1]; deterministic in the seed.
pub fn noisy_phase_init(
    mesh: &SimplicialMesh,
    mean: f64,
    amplitude: f64,
    seed: u64,
) -> PhaseField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..mesh.n_nodes())
        .map(|_| mean + if amplitude > 0.0 { rng.gen_range(-amplitude..amplitude) } else { 0.0 })
        .collect();
    PhaseField::new_clamped(mesh, values).expect("sized from the mesh")
}

/// One accepted step of the optimizer log.
#[derive(Clone, Debug)]
pub struct IterationRecord {
    pub iteration: usize,
    pub energy: f64,
    pub bulk: f64,
    pub interface: f64,
    pub step: f64,
    pub min_det: f64,
    pub cn_ratio: Option<f64>,
    pub grad_norm: f64,
}

/// Final state and diagnostics of a minimization run.
#[derive(Debug)]
pub struct MinimizeResult {
    pub y: NodalField,
    pub z: PhaseField,
    pub energy: f64,
    pub bulk_energy: f64,
    pub interface_energy: f64,
    pub iterations: usize,
    pub grad_norm: f64,
    pub converged: bool,
    /// Line search failed at the minimum step.
    pub stalled: bool,
    pub log: Vec<IterationRecord>,
    pub admissibility: AdmissibilityReport,
}

impl MinimizeResult {
    /// Elements whose mean phase value exceeds one half: the sharp set
    /// recovered from this state.
    pub fn thresholded(&self, mesh: &SimplicialMesh) -> crate::mesh::CellSelection {
        self.z.threshold_selection(mesh, 0.5)
    }
}

struct WorkState {
    y: Vec<VecN>,
    z: Vec<f64>,
}

fn energies(
    mesh: &SimplicialMesh,
    state: &DeformationState,
    z: &PhaseField,
    eps: f64,
    model: &EnergyModel,
) -> Result<(f64, f64, f64)> {
    let bulk = bulk_energy_with_state(mesh, state, z, &model.bulk);
    if !bulk.is_finite() {
        return Ok((f64::INFINITY, bulk, f64::INFINITY));
    }
    let int = diffuse_interface_energy_with_state(mesh, state, z, eps, &model.well)?;
    Ok((bulk + int, bulk, int))
}

fn feasibility_ok(
    mesh: &SimplicialMesh,
    y: &NodalField,
    state: &DeformationState,
    config: &MinimizeConfig,
) -> Result<(bool, Option<f64>)> {
    if !(state.min_det() > config.det_floor) {
        return Ok((false, None));
    }
    if config.cn_check {
        let cn = ciarlet_necas_check(mesh, y, state, config.cn_pitch, config.cn_tol)?;
        // allow the rasterization's own boundary-band error as slack
        let ok = cn.lhs <= (cn.rhs + cn.raster_error) * (1.0 + config.cn_tol) + config.cn_tol;
        Ok((ok, Some(cn.ratio)))
    } else {
        Ok((true, None))
    }
}

/// Minimize the diffuse energy from the given initial state.
///
/// The initial state must be feasible; Dirichlet nodes are pinned to
/// `bc` throughout. Accepted steps have strictly decreasing energy.
#[allow(clippy::needless_range_loop)]
pub fn minimize_diffuse(
    mesh: &SimplicialMesh,
    model: &EnergyModel,
    bc: &DirichletBc,
    init_y: &NodalField,
    init_z: &PhaseField,
    config: &MinimizeConfig,
) -> Result<MinimizeResult> {
    config.validate()?;
    let nn = mesh.n_nodes();
    let fixed = bc.mask(nn);

    let mut work = WorkState {
        y: (0..nn).map(|i| init_y.vector_at(i)).collect(),
        z: init_z.values().to_vec(),
    };
    // pin Dirichlet nodes exactly
    for (&node, &val) in bc.nodes.iter().zip(&bc.values) {
        work.y[node] = val;
    }

    let field_y = |w: &WorkState| NodalField::vector_from_values(mesh, w.y.clone()).expect("sized");
    let field_z =
        |w: &WorkState| PhaseField::new_clamped(mesh, w.z.clone()).expect("sized from mesh");

    let y0 = field_y(&work);
    let z0 = field_z(&work);
    let state0 = deformation_state(mesh, &y0);
    let (feasible, _) = feasibility_ok(mesh, &y0, &state0, config)?;
    if !feasible {
        return Err(Error::infeasible(
            "initial state violates the determinant floor or the Ciarlet-Necas bound".into(),
        ));
    }
    let (mut energy, _, _) = energies(mesh, &state0, &z0, config.eps, model)?;
    if !energy.is_finite() {
        return Err(Error::infeasible("initial state has infinite energy".into()));
    }

    let mut log: Vec<IterationRecord> = Vec::new();
    // separate step memory per schedule phase: y and z steps live on
    // very different scales
    let mut step_hints = [config.step_init; 2];
    let mut converged = false;
    let mut stalled = false;
    let mut grad_norm = f64::NAN;
    let mut iterations = 0;

    // sub-step masks per schedule phase: (move_y, move_z)
    let phases: &[(bool, bool)] = match config.schedule {
        Schedule::Simultaneous => &[(true, true)],
        Schedule::AlternateYZ => &[(true, false), (false, true)],
    };
    if !config.vary_y && !config.vary_z {
        return Err(Error::invalid_argument("no unknowns left to optimize".into()));
    }

    'outer: while iterations < config.max_iterations {
        // full projected gradient for the termination test
        let yf = field_y(&work);
        let zf = field_z(&work);
        let state = deformation_state(mesh, &yf);
        let grad = gradient_diffuse_with_state(mesh, &state, &zf, config.eps, model)?;
        let mut pg_sq = 0.0;
        for i in 0..nn {
            if config.vary_y && !fixed[i] {
                pg_sq += grad.y[i].dot(&grad.y[i]);
            }
            if config.vary_z {
                let g = grad.z[i];
                let at_lo = work.z[i] <= 0.0 && g > 0.0;
                let at_hi = work.z[i] >= 1.0 && g < 0.0;
                if !(at_lo || at_hi) {
                    pg_sq += g * g;
                }
            }
        }
        grad_norm = pg_sq.sqrt();
        if grad_norm < config.gradient_tolerance {
            converged = true;
            break;
        }

        for (phase_idx, &(phase_y, phase_z)) in phases.iter().enumerate() {
            let move_y = phase_y && config.vary_y;
            let move_z = phase_z && config.vary_z;
            if !move_y && !move_z {
                continue;
            }
            if iterations >= config.max_iterations {
                break 'outer;
            }
            let yf = field_y(&work);
            let zf = field_z(&work);
            let state = deformation_state(mesh, &yf);
            let grad = gradient_diffuse_with_state(mesh, &state, &zf, config.eps, model)?;

            let mut t = step_hints[phase_idx];
            let mut accepted = false;
            let mut empty_step = false;
            while t >= config.min_step {
                let mut trial = WorkState { y: work.y.clone(), z: work.z.clone() };
                let mut dist_sq = 0.0;
                if move_y {
                    for i in 0..nn {
                        if fixed[i] {
                            continue;
                        }
                        let d = grad.y[i].scale(t);
                        trial.y[i] = trial.y[i] - d;
                        dist_sq += d.dot(&d);
                    }
                }
                if move_z {
                    for i in 0..nn {
                        let moved = (trial.z[i] - t * grad.z[i]).clamp(0.0, 1.0);
                        let d = moved - trial.z[i];
                        trial.z[i] = moved;
                        dist_sq += d * d;
                    }
                }
                if dist_sq == 0.0 {
                    // the projection removed the whole step: this
                    // phase's projected gradient vanishes, nothing to do
                    empty_step = true;
                    break;
                }

                let ty = field_y(&trial);
                let tz = field_z(&trial);
                let tstate = deformation_state(mesh, &ty);
                if tstate.min_det() > config.det_floor {
                    let (tenergy, tbulk, tint) = energies(mesh, &tstate, &tz, config.eps, model)?;
                    let decrease_ok =
                        tenergy.is_finite() && tenergy <= energy - config.armijo_c / t * dist_sq;
                    if decrease_ok {
                        let (ok, ratio) = feasibility_ok(mesh, &ty, &tstate, config)?;
                        if ok {
                            work = trial;
                            energy = tenergy;
                            iterations += 1;
                            log.push(IterationRecord {
                                iteration: iterations,
                                energy: tenergy,
                                bulk: tbulk,
                                interface: tint,
                                step: t,
                                min_det: tstate.min_det(),
                                cn_ratio: ratio,
                                grad_norm,
                            });
                            step_hints[phase_idx] = (t * 2.0).min(1e6);
                            accepted = true;
                            break;
                        }
                    }
                }
                t *= config.backtrack;
            }
            if !accepted && !empty_step {
                stalled = true;
                break 'outer;
            }
        }
    }

    let y_final = field_y(&work);
    let z_final = field_z(&work);
    let state = deformation_state(mesh, &y_final);
    let (energy, bulk, interface) = energies(mesh, &state, &z_final, config.eps, model)?;
    let admissibility = admissibility_report(
        mesh,
        &y_final,
        model.bulk.q(),
        config.cn_pitch,
        2000,
        config.cn_tol,
    )?;
    Ok(MinimizeResult {
        y: y_final,
        z: z_final,
        energy,
        bulk_energy: bulk,
        interface_energy: interface,
        iterations,
        grad_norm,
        converged,
        stalled,
        log,
        admissibility,
    })
}

/// Warm-started minimization along a strictly decreasing sequence of
/// interface widths. Halts after a stalled stage.
pub fn continuation_eps(
    mesh: &SimplicialMesh,
    model: &EnergyModel,
    bc: &DirichletBc,
    init_y: &NodalField,
    init_z: &PhaseField,
    eps_schedule: &[f64],
    config: &MinimizeConfig,
) -> Result<Vec<MinimizeResult>> {
    if eps_schedule.is_empty() {
        return Err(Error::invalid_argument("eps schedule must be nonempty".into()));
    }
    if eps_schedule.iter().any(|&e| !(e > 0.0)) {
        return Err(Error::invalid_argument("eps schedule must be positive".into()));
    }
    if eps_schedule.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::invalid_argument("eps schedule must be strictly decreasing".into()));
    }
    let mut results = Vec::with_capacity(eps_schedule.len());
    let mut y = init_y.clone();
    let mut z = init_z.clone();
    for &eps in eps_schedule {
        let stage_config = MinimizeConfig { eps, ..config.clone() };
        let result = minimize_diffuse(mesh, model, bc, &y, &z, &stage_config)?;
        let halt = result.stalled;
        y = result.y.clone();
        z = result.z.clone();
        results.push(result);
        if halt {
            break;
        }
    }
    Ok(results)
}
