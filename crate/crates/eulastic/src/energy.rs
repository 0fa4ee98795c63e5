//! Two-phase bulk energy, double-well potential, and the sharp and
//! diffuse interface energies.
//!
//! The bulk densities are the polyconvex family
//!
//! ```text
//! W_i(F) = a_i |F|^p + b_i (|F|^n / det F)^q + c_i / det F
//!          + d_i (det F - J_i)^2 - e_i            if det F > 0,
//! W_i(F) = +inf                                   otherwise,
//! ```
//!
//! with Frobenius norms throughout. The shift `e_i` is computed at
//! construction so that `min W_i = 0`; the minimizer is conformal with
//! an optimal determinant found by a 1D search.
//!
//! The diffuse interface energy is Eulerian. It is assembled on the
//! reference mesh by pullback: with `z = zeta o y` one has
//! `grad zeta o y = F^{-T} grad z`, and the change of variables brings
//! a `det F` weight, so
//!
//! ```text
//! sum_elems vol * det F * ( eps/2 |F^{-T} grad z|^2 + Phi(zbar)/eps )
//! ```
//!
//! with `zbar` the element mean of nodal `z`. Summation is sequential
//! in ascending element order, so results are reproducible.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::algebra::{MatN, VecN};
use crate::kinematics::{deformation_state, DeformationState};
use crate::mesh::{CellSelection, NodalField, SimplicialMesh};
use crate::{Error, Result};

/// Double-well potential `Phi(s) = 18 gamma^2 s^2 (1-s)^2`.
///
/// This is the unique symmetric quartic with minima exactly at 0 and 1
/// normalized so that `int_0^1 sqrt(2 Phi) ds = gamma`.
#[derive(Clone, Copy, Debug)]
pub struct DoubleWell {
    pub gamma: f64,
}

impl DoubleWell {
    pub fn new(gamma: f64) -> Result<Self> {
        if !(gamma > 0.0) {
            return Err(Error::invalid_argument(format!(
                "surface tension must be positive, got {gamma}"
            )));
        }
        Ok(DoubleWell { gamma })
    }

    /// Evaluated by its quartic formula also outside [0, 1], which
    /// keeps line searches well defined before clamping.
    #[inline]
    pub fn phi(&self, s: f64) -> f64 {
        let w = s * (1.0 - s);
        18.0 * self.gamma * self.gamma * w * w
    }

    #[inline]
    pub fn phi_prime(&self, s: f64) -> f64 {
        36.0 * self.gamma * self.gamma * s * (1.0 - s) * (1.0 - 2.0 * s)
    }

    #[inline]
    pub fn sqrt_two_phi(&self, s: f64) -> f64 {
        6.0 * self.gamma * (s * (1.0 - s)).abs()
    }

    /// Rate of the optimal 1D transition profile at width `eps`:
    /// the logistic `1 / (1 + exp(-rate * t))`.
    pub fn profile_rate(&self, eps: f64) -> f64 {
        6.0 * self.gamma / eps
    }
}

/// Parameters of one phase of the bulk family.
#[derive(Clone, Copy, Debug)]
pub struct PhaseParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    /// Determinant the `d`-term is anchored at.
    pub well_det: f64,
}

impl PhaseParams {
    /// Parameters whose energy minimum sits exactly at `F = I`: the
    /// `c` term is chosen to balance the growth of the `a` term at
    /// determinant one.
    pub fn well_at_identity(dim: usize, p: f64, a: f64, b: f64, d: f64) -> Self {
        let n = dim as f64;
        let c = a * (p / n) * n.powf(p / 2.0);
        PhaseParams { a, b, c, d, well_det: 1.0 }
    }
}

#[derive(Clone, Debug)]
struct PhaseEnergy {
    params: PhaseParams,
    /// Shift making the minimum zero.
    offset: f64,
    /// Determinant of the conformal minimizer.
    optimal_det: f64,
    /// Empirical coercivity constant, see [`BulkModel::coercivity_constant`].
    coercivity: f64,
}

/// Two-phase polyconvex bulk model.
#[derive(Clone, Debug)]
pub struct BulkModel {
    dim: usize,
    p: f64,
    q: f64,
    phases: [PhaseEnergy; 2],
}

impl BulkModel {
    /// Validates exponents (`p > n`; `q > 2` in 3D, `q > 1` in 2D) and
    /// nonnegative coefficients, then computes each phase's zero shift
    /// and empirical coercivity constant.
    pub fn new(dim: usize, p: f64, q: f64, params: [PhaseParams; 2]) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::invalid_argument(format!("dimension must be 2 or 3, got {dim}")));
        }
        let n = dim as f64;
        if !(p > n) {
            return Err(Error::invalid_argument(format!("exponent p must exceed {n}, got {p}")));
        }
        let q_floor = if dim == 3 { 2.0 } else { 1.0 };
        if !(q > q_floor) {
            return Err(Error::invalid_argument(format!(
                "exponent q must exceed {q_floor} in {dim}D, got {q}"
            )));
        }
        for pp in &params {
            if pp.a < 0.0 || pp.b < 0.0 || pp.c < 0.0 || pp.d < 0.0 {
                return Err(Error::invalid_argument(
                    "bulk coefficients must be nonnegative".into(),
                ));
            }
            if !(pp.well_det > 0.0) {
                return Err(Error::invalid_argument("well determinant must be positive".into()));
            }
        }
        let mut phases = Vec::with_capacity(2);
        for pp in params {
            let (optimal_det, offset) = solve_well(dim, p, q, &pp);
            phases.push(PhaseEnergy { params: pp, offset, optimal_det, coercivity: 0.0 });
        }
        let mut model = BulkModel {
            dim,
            p,
            q,
            phases: [phases[0].clone(), phases[1].clone()],
        };
        for phase in 0..2 {
            model.phases[phase].coercivity = model.estimate_coercivity(phase);
        }
        Ok(model)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn params(&self, phase: usize) -> &PhaseParams {
        &self.phases[phase].params
    }

    /// The shift `e_i` that makes the phase minimum zero.
    pub fn offset(&self, phase: usize) -> f64 {
        self.phases[phase].offset
    }

    /// Density from the invariants `s = |F|` and `j = det F`.
    fn density_from_invariants(&self, phase: usize, s: f64, j: f64) -> f64 {
        if !(j > 0.0) {
            return f64::INFINITY;
        }
        let n = self.dim as f64;
        let pp = &self.phases[phase].params;
        let distortion = s.powf(n) / j;
        pp.a * s.powf(self.p) + pp.b * distortion.powf(self.q) + pp.c / j
            + pp.d * (j - pp.well_det) * (j - pp.well_det)
            - self.phases[phase].offset
    }

    /// `W_phase(F)`; `+inf` when `det F <= 0`.
    pub fn density(&self, phase: usize, f: &MatN) -> f64 {
        assert_eq!(f.dim(), self.dim, "deformation gradient dimension mismatch");
        self.density_from_invariants(phase, f.frobenius_norm(), f.det())
    }

    /// `dW/dF`. Requires `det F > 0`.
    pub fn density_gradient(&self, phase: usize, f: &MatN) -> MatN {
        let j = f.det();
        assert!(j > 0.0, "density gradient undefined for det F <= 0");
        let n = self.dim as f64;
        let pp = &self.phases[phase].params;
        let s = f.frobenius_norm();
        let cof = f.cof();
        let distortion = s.powf(n) / j;
        // dW = (a p s^{p-2} + b q n s^{nq-2} / j^q) F
        //    + (-b q s^{nq} / j^{q+1} - c / j^2 + 2 d (j - J)) cof F
        let coef_f = pp.a * self.p * s.powf(self.p - 2.0)
            + pp.b * self.q * n * distortion.powf(self.q - 1.0) * s.powf(n - 2.0) / j;
        let coef_cof = -pp.b * self.q * distortion.powf(self.q) / j - pp.c / (j * j)
            + 2.0 * pp.d * (j - pp.well_det);
        f.scale(coef_f) + cof.scale(coef_cof)
    }

    /// Conformal minimizer of the phase density, `(J*)^{1/n} I`.
    pub fn well_deformation(&self, phase: usize) -> MatN {
        let j = self.phases[phase].optimal_det;
        MatN::identity(self.dim).scale(j.powf(1.0 / self.dim as f64))
    }

    /// Empirically verified constant `C` with
    /// `W(F) >= C (|F|^p + (|F|^n/det F)^q - 1)` over the sampling
    /// distribution of [`sample_gradient`]. The normalization
    /// `min W = 0` rules out a constant valid at the well itself, so
    /// `C` is the sampled infimum of the ratio with a safety factor.
    pub fn coercivity_constant(&self, phase: usize) -> f64 {
        self.phases[phase].coercivity
    }

    fn estimate_coercivity(&self, phase: usize) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(0xC0E2C1);
        let mut min_ratio = f64::INFINITY;
        for _ in 0..50_000 {
            let f = sample_gradient(self.dim, &mut rng);
            let s = f.frobenius_norm();
            let j = f.det();
            let n = self.dim as f64;
            let den = s.powf(self.p) + (s.powf(n) / j).powf(self.q) - 1.0;
            let w = self.density_from_invariants(phase, s, j);
            min_ratio = min_ratio.min(w / den);
        }
        (0.5 * min_ratio).max(0.0)
    }

    /// CSV tabulation of the density over the given samples, for
    /// debugging: one row per sample with entries of `F`, `det F` and
    /// `W`.
    pub fn tabulate(&self, phase: usize, samples: &[MatN]) -> String {
        let mut out = String::new();
        let d = self.dim;
        let header: Vec<String> = (0..d * d).map(|k| format!("f{}{}", k / d, k % d)).collect();
        out.push_str(&header.join(","));
        out.push_str(",det,w\n");
        for f in samples {
            let mut row: Vec<String> = Vec::with_capacity(d * d + 2);
            for i in 0..d {
                for j in 0..d {
                    row.push(format!("{}", f[(i, j)]));
                }
            }
            row.push(format!("{}", f.det()));
            row.push(format!("{}", self.density(phase, f)));
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// Random matrix with entries uniform in [-2, 2] and `det > 0.05`;
/// the distribution the coercivity constant is calibrated on.
pub fn sample_gradient(dim: usize, rng: &mut impl Rng) -> MatN {
    loop {
        let mut f = MatN::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                f[(i, j)] = rng.gen_range(-2.0..2.0);
            }
        }
        if f.det() > 0.05 {
            return f;
        }
    }
}

/// Minimize `phi(J) = a n^{p/2} J^{p/n} + c/J + d (J - Jw)^2` over
/// `J > 0` and return `(argmin, min + b n^{nq/2})`.
///
/// At fixed determinant the conformal gradients minimize both `|F|`
/// and the distortion, so this 1D problem determines the well.
fn solve_well(dim: usize, p: f64, q: f64, pp: &PhaseParams) -> (f64, f64) {
    let n = dim as f64;
    let distortion_floor = n.powf(n / 2.0); // Frobenius distortion of conformal maps
    let b_term = pp.b * distortion_floor.powf(q);
    if pp.a == 0.0 && pp.c == 0.0 && pp.d == 0.0 {
        return (pp.well_det, b_term);
    }
    let phi = |j: f64| -> f64 {
        pp.a * n.powf(p / 2.0) * j.powf(p / n) + pp.c / j + pp.d * (j - pp.well_det) * (j - pp.well_det)
    };
    // coarse log-space scan, then golden-section refinement
    let (lo_exp, hi_exp) = (-8.0, 8.0);
    let scan = 400;
    let mut best_k = 0;
    let mut best = f64::INFINITY;
    for k in 0..=scan {
        let j = 10f64.powf(lo_exp + (hi_exp - lo_exp) * k as f64 / scan as f64);
        let v = phi(j);
        if v < best {
            best = v;
            best_k = k;
        }
    }
    let at = |k: i64| 10f64.powf(lo_exp + (hi_exp - lo_exp) * k as f64 / scan as f64);
    let mut a = at((best_k as i64 - 1).max(0));
    let mut b = at((best_k as i64 + 1).min(scan as i64));
    let inv_golden = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - inv_golden * (b - a);
    let mut x2 = a + inv_golden * (b - a);
    let (mut f1, mut f2) = (phi(x1), phi(x2));
    for _ in 0..200 {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_golden * (b - a);
            f1 = phi(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_golden * (b - a);
            f2 = phi(x2);
        }
    }
    // Value-based search stalls at sqrt(eps) from the flat minimum;
    // polish the root of phi' by Newton.
    let phi_prime = |j: f64| -> f64 {
        pp.a * (p / n) * n.powf(p / 2.0) * j.powf(p / n - 1.0) - pp.c / (j * j)
            + 2.0 * pp.d * (j - pp.well_det)
    };
    let phi_second = |j: f64| -> f64 {
        pp.a * (p / n) * (p / n - 1.0) * n.powf(p / 2.0) * j.powf(p / n - 2.0)
            + 2.0 * pp.c / (j * j * j)
            + 2.0 * pp.d
    };
    let mut j_star = 0.5 * (a + b);
    for _ in 0..8 {
        let d2 = phi_second(j_star);
        if d2 <= 0.0 {
            break;
        }
        let step = phi_prime(j_star) / d2;
        let next = j_star - step;
        if !(next > 0.0) || !next.is_finite() {
            break;
        }
        j_star = next;
        if step.abs() <= 1e-15 * j_star {
            break;
        }
    }
    (j_star, phi(j_star) + b_term)
}

/// Nodal phase fraction in [0, 1] on the reference mesh.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseField {
    values: Vec<f64>,
}

impl PhaseField {
    /// Clamp the given nodal values into [0, 1].
    pub fn new_clamped(mesh: &SimplicialMesh, mut values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.n_nodes() {
            return Err(Error::invalid_argument(format!(
                "phase field has {} values for {} nodes",
                values.len(),
                mesh.n_nodes()
            )));
        }
        for v in &mut values {
            *v = v.clamp(0.0, 1.0);
        }
        Ok(PhaseField { values })
    }

    pub fn constant(mesh: &SimplicialMesh, v: f64) -> Self {
        PhaseField { values: vec![v.clamp(0.0, 1.0); mesh.n_nodes()] }
    }

    pub fn from_fn(mesh: &SimplicialMesh, f: impl Fn(&VecN) -> f64) -> Self {
        let values = (0..mesh.n_nodes()).map(|i| f(&mesh.node(i)).clamp(0.0, 1.0)).collect();
        PhaseField { values }
    }

    /// Nodal indicator of the closure of the selected elements.
    pub fn indicator(mesh: &SimplicialMesh, selection: &CellSelection) -> Self {
        let mut values = vec![0.0; mesh.n_nodes()];
        for e in selection.indices() {
            for &v in mesh.element(e) {
                values[v] = 1.0;
            }
        }
        PhaseField { values }
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn element_mean(&self, mesh: &SimplicialMesh, e: usize) -> f64 {
        let en = mesh.element(e);
        en.iter().map(|&v| self.values[v]).sum::<f64>() / en.len() as f64
    }

    /// Elements with mean value above the threshold.
    pub fn threshold_selection(&self, mesh: &SimplicialMesh, s: f64) -> CellSelection {
        let mask = (0..mesh.n_elements()).map(|e| self.element_mean(mesh, e) > s).collect();
        CellSelection::from_mask(mesh, mask).expect("mask built from the same mesh")
    }
}

type IntegrandFn = Box<dyn Fn(&VecN, &MatN, &VecN) -> f64 + Send + Sync>;

/// One-homogeneous interface integrand `Psi(n, F x n, cof F n)`.
///
/// The second argument is the matrix `a -> F (n x a)`; the structure
/// is three-dimensional.
pub struct InterfaceIntegrand {
    eval: IntegrandFn,
    /// Lower bound constant in `Psi(A) >= C |A|`, when known.
    pub coercivity: Option<f64>,
}

impl InterfaceIntegrand {
    pub fn new(
        eval: impl Fn(&VecN, &MatN, &VecN) -> f64 + Send + Sync + 'static,
        coercivity: Option<f64>,
    ) -> Self {
        InterfaceIntegrand { eval: Box::new(eval), coercivity }
    }

    /// The deformed-area integrand `gamma |cof F n|`, which turns the
    /// referential facet integral into the deformed interface measure.
    pub fn deformed_area(gamma: f64) -> Self {
        InterfaceIntegrand {
            eval: Box::new(move |_n, _g, c| gamma * c.norm()),
            coercivity: None,
        }
    }

    pub fn evaluate(&self, n: &VecN, g: &MatN, c: &VecN) -> f64 {
        (self.eval)(n, g, c)
    }
}

/// Bulk model, double well, and optional general interface integrand.
pub struct EnergyModel {
    pub bulk: BulkModel,
    pub well: DoubleWell,
    pub psi: Option<InterfaceIntegrand>,
}

impl EnergyModel {
    pub fn new(bulk: BulkModel, well: DoubleWell) -> Self {
        EnergyModel { bulk, well, psi: None }
    }
}

/// Bulk energy with the per-element phase weight `zbar`:
/// `sum vol [zbar W1 + (1 - zbar) W0]`. Infinite if any `det F <= 0`.
pub fn bulk_energy_with_state(
    mesh: &SimplicialMesh,
    state: &DeformationState,
    z: &PhaseField,
    bulk: &BulkModel,
) -> f64 {
    let mut total = 0.0;
    for e in 0..mesh.n_elements() {
        let d = state.element(e);
        if !(d.det > 0.0) {
            return f64::INFINITY;
        }
        let zbar = z.element_mean(mesh, e);
        let w1 = bulk.density(1, &d.f);
        let w0 = bulk.density(0, &d.f);
        total += mesh.volume(e) * (zbar * w1 + (1.0 - zbar) * w0);
    }
    total
}

pub fn bulk_energy(mesh: &SimplicialMesh, y: &NodalField, z: &PhaseField, bulk: &BulkModel) -> f64 {
    bulk_energy_with_state(mesh, &deformation_state(mesh, y), z, bulk)
}

/// Sharp bulk energy with exact element indicators from `E`.
pub fn bulk_energy_sharp_with_state(
    mesh: &SimplicialMesh,
    state: &DeformationState,
    selection: &CellSelection,
    bulk: &BulkModel,
) -> f64 {
    let mut total = 0.0;
    for e in 0..mesh.n_elements() {
        let d = state.element(e);
        if !(d.det > 0.0) {
            return f64::INFINITY;
        }
        let phase = usize::from(selection.contains(e));
        total += mesh.volume(e) * bulk.density(phase, &d.f);
    }
    total
}

/// Eulerian diffuse interface energy assembled by pullback.
pub fn diffuse_interface_energy_with_state(
    mesh: &SimplicialMesh,
    state: &DeformationState,
    z: &PhaseField,
    eps: f64,
    well: &DoubleWell,
) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::invalid_argument(format!("eps must be positive, got {eps}")));
    }
    let mut total = 0.0;
    for e in 0..mesh.n_elements() {
        let d = state.element(e);
        if !(d.det > 0.0) {
            return Ok(f64::INFINITY);
        }
        let gz = crate::mesh::element_gradient_scalar(mesh, z.values(), e);
        // grad zeta o y = F^{-T} grad z
        let g = d.f.inverse().matvec_t(&gz);
        let zbar = z.element_mean(mesh, e);
        total += mesh.volume(e)
            * d.det
            * (0.5 * eps * g.dot(&g) + well.phi(zbar) / eps);
    }
    Ok(total)
}

pub fn diffuse_interface_energy(
    mesh: &SimplicialMesh,
    y: &NodalField,
    z: &PhaseField,
    eps: f64,
    well: &DoubleWell,
) -> Result<f64> {
    diffuse_interface_energy_with_state(mesh, &deformation_state(mesh, y), z, eps, well)
}

/// `gamma * Per(E^y, Omega^y)` for P1 data: the interface facets carry
/// the deformed measure `|cof F n|` per unit referential area.
pub fn sharp_interface_energy_with_state(
    mesh: &SimplicialMesh,
    state: &DeformationState,
    selection: &CellSelection,
    gamma: f64,
) -> f64 {
    let mut total = 0.0;
    for facet in mesh.interior_facets() {
        let (inl, inr) = (selection.contains(facet.left), selection.contains(facet.right));
        if inl == inr {
            continue;
        }
        let side = if inl { facet.left } else { facet.right };
        let v = state.element(side).cof.matvec(&facet.normal);
        total += gamma * facet.measure * v.norm();
    }
    total
}

pub fn sharp_interface_energy(
    mesh: &SimplicialMesh,
    y: &NodalField,
    selection: &CellSelection,
    gamma: f64,
) -> f64 {
    sharp_interface_energy_with_state(mesh, &deformation_state(mesh, y), selection, gamma)
}

/// General interfacial energy `sum Psi(n, F x n, cof F n)` over the
/// interface facets, with `F` from the `E`-side element and `n` the
/// outward normal of `E`. Three-dimensional only.
pub fn general_interface_energy_with_state(
    mesh: &SimplicialMesh,
    state: &DeformationState,
    selection: &CellSelection,
    psi: &InterfaceIntegrand,
) -> Result<f64> {
    if mesh.dim() != 3 {
        return Err(Error::unsupported_dimension(
            "the cross-product structure of the general integrand is 3D only".into(),
        ));
    }
    let mut total = 0.0;
    for facet in mesh.interior_facets() {
        let (inl, inr) = (selection.contains(facet.left), selection.contains(facet.right));
        if inl == inr {
            continue;
        }
        let (side, normal) = if inl {
            (facet.left, facet.normal)
        } else {
            (facet.right, -facet.normal)
        };
        let d = state.element(side);
        let g = d.f.matmul(&MatN::cross_matrix(&normal));
        let c = d.cof.matvec(&normal);
        total += facet.measure * psi.evaluate(&normal, &g, &c);
    }
    Ok(total)
}

pub fn general_interface_energy(
    mesh: &SimplicialMesh,
    y: &NodalField,
    selection: &CellSelection,
    psi: &InterfaceIntegrand,
) -> Result<f64> {
    general_interface_energy_with_state(mesh, &deformation_state(mesh, y), selection, psi)
}

/// Sharp total energy: bulk with exact indicators plus
/// `gamma Per(E^y, Omega^y)`.
pub fn total_energy_sharp(
    mesh: &SimplicialMesh,
    y: &NodalField,
    selection: &CellSelection,
    model: &EnergyModel,
) -> f64 {
    let state = deformation_state(mesh, y);
    let bulk = bulk_energy_sharp_with_state(mesh, &state, selection, &model.bulk);
    if !bulk.is_finite() {
        return f64::INFINITY;
    }
    bulk + sharp_interface_energy_with_state(mesh, &state, selection, model.well.gamma)
}

/// Diffuse total energy `F_eps = F_bulk + F_eps_int`.
pub fn total_energy_diffuse(
    mesh: &SimplicialMesh,
    y: &NodalField,
    z: &PhaseField,
    eps: f64,
    model: &EnergyModel,
) -> Result<f64> {
    let state = deformation_state(mesh, y);
    total_diffuse_with_state(mesh, &state, z, eps, model)
}

pub fn total_diffuse_with_state(
    mesh: &SimplicialMesh,
    state: &DeformationState,
    z: &PhaseField,
    eps: f64,
    model: &EnergyModel,
) -> Result<f64> {
    let bulk = bulk_energy_with_state(mesh, state, z, &model.bulk);
    if !bulk.is_finite() {
        return Ok(f64::INFINITY);
    }
    Ok(bulk + diffuse_interface_energy_with_state(mesh, state, z, eps, &model.well)?)
}

/// Exact gradient of the discrete diffuse energy with respect to all
/// nodal unknowns. Boundary conditions are enforced by masking at the
/// call site.
#[derive(Clone, Debug)]
pub struct DiffuseGradient {
    pub y: Vec<VecN>,
    pub z: Vec<f64>,
}

pub fn gradient_diffuse(
    mesh: &SimplicialMesh,
    y: &NodalField,
    z: &PhaseField,
    eps: f64,
    model: &EnergyModel,
) -> Result<DiffuseGradient> {
    let state = deformation_state(mesh, y);
    gradient_diffuse_with_state(mesh, &state, z, eps, model)
}

pub fn gradient_diffuse_with_state(
    mesh: &SimplicialMesh,
    state: &DeformationState,
    z: &PhaseField,
    eps: f64,
    model: &EnergyModel,
) -> Result<DiffuseGradient> {
    if !(eps > 0.0) {
        return Err(Error::invalid_argument(format!("eps must be positive, got {eps}")));
    }
    if !(state.min_det() > 0.0) {
        return Err(Error::infeasible(
            "gradient undefined: some element has det F <= 0".into(),
        ));
    }
    let dim = mesh.dim();
    let nn = mesh.n_nodes();
    let mut gy = vec![VecN::zeros(dim); nn];
    let mut gz = vec![0.0; nn];
    let well = &model.well;
    let bulk = &model.bulk;
    let k = dim + 1;

    for e in 0..mesh.n_elements() {
        let d = state.element(e);
        let vol = mesh.volume(e);
        let en = mesh.element(e);
        let grads = mesh.shape_gradients(e);
        let zbar = z.element_mean(mesh, e);

        let w1 = bulk.density(1, &d.f);
        let w0 = bulk.density(0, &d.f);
        let dw = bulk.density_gradient(1, &d.f).scale(zbar)
            + bulk.density_gradient(0, &d.f).scale(1.0 - zbar);

        let finv = d.f.inverse();
        let grad_z = crate::mesh::element_gradient_scalar(mesh, z.values(), e);
        let g = finv.matvec_t(&grad_z); // F^{-T} grad z
        let h = finv.matvec(&g); // F^{-1} (F^{-T} grad z)
        let g_sq = g.dot(&g);
        let phi = well.phi(zbar);
        let phi_p = well.phi_prime(zbar);

        for (local, &node) in en.iter().enumerate() {
            let gi = grads[local];
            // bulk: vol * (zbar dW1 + (1-zbar) dW0) g_i
            let mut dy = dw.matvec(&gi).scale(vol);
            // gradient term: vol eps/2 [ |G|^2 cof g_i - 2 det G (h . g_i) ]
            let cof_gi = d.cof.matvec(&gi);
            dy = dy + cof_gi.scale(vol * 0.5 * eps * g_sq);
            dy = dy - g.scale(vol * eps * d.det * h.dot(&gi));
            // potential term: vol (phi/eps) cof g_i
            dy = dy + cof_gi.scale(vol * phi / eps);
            gy[node] = gy[node] + dy;

            // z derivatives
            let mut dz = vol * (w1 - w0) / k as f64;
            dz += vol * d.det * eps * h.dot(&gi);
            dz += vol * d.det * phi_p / (eps * k as f64);
            gz[node] += dz;
        }
    }
    Ok(DiffuseGradient { y: gy, z: gz })
}
