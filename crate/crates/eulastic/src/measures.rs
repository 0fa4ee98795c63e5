//! Weak pairings and facet measures linking referential data to the
//! deformed perimeter.
//!
//! For P1 deformations the distributional divergence of
//! `chi_E cof(grad y)` is exactly a measure carried by the interface
//! facets: the facet continuity of `(cof F) n` kills every jump term
//! except across the boundary of `E`. Its atoms are
//! `measure * (cof F) n_E`, and their total variation equals the
//! deformed interface measure, which is checked here against an
//! independent geometric computation.

use std::fmt::Write as _;

use crate::algebra::{MatN, VecN};
use crate::kinematics::{deformation_state, DeformationState};
use crate::mesh::{CellSelection, NodalField, SimplicialMesh};
use crate::oracle;
use crate::quadrature::SimplexRule;
use crate::{Error, Result};

/// Analytic test field with caller-supplied gradient.
pub trait TestField {
    fn dim(&self) -> usize;
    fn value(&self, x: &VecN) -> VecN;
    /// Jacobian with `(i, j)` entry `d psi_i / d x_j`.
    fn gradient(&self, x: &VecN) -> MatN;

    /// Curl from the Jacobian; 3D only.
    fn curl(&self, x: &VecN) -> VecN {
        let g = self.gradient(x);
        VecN::new3(g[(2, 1)] - g[(1, 2)], g[(0, 2)] - g[(2, 0)], g[(1, 0)] - g[(0, 1)])
    }
}

/// Closure-backed [`TestField`].
pub struct AnalyticField<V, G> {
    dim: usize,
    value: V,
    gradient: G,
}

impl<V, G> AnalyticField<V, G>
where
    V: Fn(&VecN) -> VecN,
    G: Fn(&VecN) -> MatN,
{
    pub fn new(dim: usize, value: V, gradient: G) -> Self {
        AnalyticField { dim, value, gradient }
    }
}

impl<V, G> TestField for AnalyticField<V, G>
where
    V: Fn(&VecN) -> VecN,
    G: Fn(&VecN) -> MatN,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &VecN) -> VecN {
        (self.value)(x)
    }

    fn gradient(&self, x: &VecN) -> MatN {
        (self.gradient)(x)
    }
}

fn quadrature_point(mesh: &SimplicialMesh, e: usize, bary: &[f64]) -> VecN {
    let en = mesh.element(e);
    let mut x = VecN::zeros(mesh.dim());
    for (local, &node) in en.iter().enumerate() {
        x = x + mesh.node(node).scale(bary[local]);
    }
    x
}

/// Reject test fields that do not vanish on the domain boundary.
///
/// Checks nodes and centroids of every boundary facet against a
/// tolerance relative to the field's magnitude inside the domain.
fn check_support(mesh: &SimplicialMesh, psi: &dyn TestField) -> Result<()> {
    let dim = mesh.dim();
    let mut scale = 0.0f64;
    for e in 0..mesh.n_elements() {
        scale = scale.max(psi.value(&mesh.centroid(e)).norm());
    }
    if scale == 0.0 {
        return Ok(());
    }
    let tol = 1e-9 * scale;
    for f in mesh.boundary_facets() {
        let mut centroid = VecN::zeros(dim);
        for &v in &f.nodes[..dim] {
            let x = mesh.node(v);
            if psi.value(&x).norm() > tol {
                return Err(Error::InvalidTestFunction(format!(
                    "test field does not vanish at boundary node {v}"
                )));
            }
            centroid = centroid + x;
        }
        centroid = centroid.scale(1.0 / dim as f64);
        if psi.value(&centroid).norm() > tol {
            return Err(Error::InvalidTestFunction(
                "test field does not vanish on a boundary facet".into(),
            ));
        }
    }
    Ok(())
}

/// Weak pairing `int_E cof(grad y) : grad psi dx`.
///
/// `quad_degree` is the polynomial degree the per-element rule must
/// integrate exactly (default in the CLI: 4 and above).
pub fn pairing_p(
    mesh: &SimplicialMesh,
    y: &NodalField,
    selection: &CellSelection,
    psi: &dyn TestField,
    quad_degree: usize,
) -> Result<f64> {
    if psi.dim() != mesh.dim() {
        return Err(Error::invalid_argument("test field dimension mismatch".into()));
    }
    check_support(mesh, psi)?;
    let state = deformation_state(mesh, y);
    let rule = SimplexRule::with_degree(mesh.dim(), quad_degree.max(2));
    let mut total = 0.0;
    for e in selection.indices() {
        let cof = state.element(e).cof;
        let mut avg_grad = MatN::zeros(mesh.dim());
        for (bary, w) in rule.nodes.iter().zip(&rule.weights) {
            let x = quadrature_point(mesh, e, bary);
            avg_grad = avg_grad + psi.gradient(&x).scale(*w);
        }
        total += mesh.volume(e) * cof.ddot(&avg_grad);
    }
    Ok(total)
}

/// Weak pairing `int_E grad y (curl psi) dx`; three-dimensional.
pub fn pairing_h(
    mesh: &SimplicialMesh,
    y: &NodalField,
    selection: &CellSelection,
    psi: &dyn TestField,
    quad_degree: usize,
) -> Result<VecN> {
    if mesh.dim() != 3 {
        return Err(Error::unsupported_dimension(
            "the curl pairing requires a three-dimensional mesh".into(),
        ));
    }
    if psi.dim() != 3 {
        return Err(Error::invalid_argument("test field dimension mismatch".into()));
    }
    check_support(mesh, psi)?;
    let state = deformation_state(mesh, y);
    let rule = SimplexRule::with_degree(3, quad_degree.max(2));
    let mut total = VecN::zeros(3);
    for e in selection.indices() {
        let f = state.element(e).f;
        let mut avg_curl = VecN::zeros(3);
        for (bary, w) in rule.nodes.iter().zip(&rule.weights) {
            let x = quadrature_point(mesh, e, bary);
            avg_curl = avg_curl + psi.curl(&x).scale(*w);
        }
        total = total + f.matvec(&avg_curl).scale(mesh.volume(e));
    }
    Ok(total)
}

/// One interface facet of the discrete reduced boundary of `E`.
#[derive(Clone, Debug)]
pub struct ReducedBoundaryFacet {
    /// Index into `mesh.interior_facets()`.
    pub facet: usize,
    /// Adjacent element on the `E` side.
    pub e_side: usize,
    /// Unit normal pointing out of `E`.
    pub normal: VecN,
    /// Referential (n-1)-measure.
    pub measure: f64,
}

/// The interface facets of a selection, with outward normals.
#[derive(Clone, Debug)]
pub struct ReducedBoundary {
    pub facets: Vec<ReducedBoundaryFacet>,
    /// `Per(E, Omega)` of the discrete set, exactly.
    pub referential_perimeter: f64,
}

pub fn reduced_boundary(mesh: &SimplicialMesh, selection: &CellSelection) -> ReducedBoundary {
    let mut facets = Vec::new();
    let mut perimeter = 0.0;
    for (idx, f) in mesh.interior_facets().iter().enumerate() {
        let (inl, inr) = (selection.contains(f.left), selection.contains(f.right));
        if inl == inr {
            continue;
        }
        let (e_side, normal) = if inl { (f.left, f.normal) } else { (f.right, -f.normal) };
        perimeter += f.measure;
        facets.push(ReducedBoundaryFacet { facet: idx, e_side, normal, measure: f.measure });
    }
    ReducedBoundary { facets, referential_perimeter: perimeter }
}

/// One atom of the discrete interface measure.
#[derive(Clone, Debug)]
pub struct FacetAtom {
    pub facet: usize,
    pub normal: VecN,
    /// `measure * (cof F) n_E` from the `E`-side element.
    pub vector: VecN,
    pub magnitude: f64,
}

/// Facet atoms of the interface measure, their total variation, and
/// the comparison against the independent geometric perimeter.
#[derive(Clone, Debug)]
pub struct SilhavySummary {
    pub atoms: Vec<FacetAtom>,
    pub total_variation: f64,
    /// Deformed interface measure from the geometry oracle.
    pub oracle_perimeter: f64,
    /// `|tv - oracle| / max(oracle, 1e-14)`.
    pub discrepancy: f64,
}

impl SilhavySummary {
    /// One row per facet plus a totals row.
    pub fn to_csv(&self) -> String {
        let dim = if self.atoms.first().map(|a| a.normal.dim()) == Some(3) { 3 } else { 2 };
        let mut s = String::new();
        let coords = ["x", "y", "z"];
        s.push_str("facet");
        for c in &coords[..dim] {
            write!(s, ",n{c}").unwrap();
        }
        for c in &coords[..dim] {
            write!(s, ",atom{c}").unwrap();
        }
        s.push_str(",magnitude\n");
        for a in &self.atoms {
            write!(s, "{}", a.facet).unwrap();
            for i in 0..dim {
                write!(s, ",{}", a.normal[i]).unwrap();
            }
            for i in 0..dim {
                write!(s, ",{}", a.vector[i]).unwrap();
            }
            writeln!(s, ",{}", a.magnitude).unwrap();
        }
        writeln!(s, "total,,,,,{}", self.total_variation).unwrap();
        s
    }
}

/// Total variation of the discrete interface measure of `(y, E)`.
///
/// Errors with `DegenerateGeometry` if an element adjacent to the
/// interface has `det F <= 0`.
pub fn total_variation_p(
    mesh: &SimplicialMesh,
    y: &NodalField,
    selection: &CellSelection,
) -> Result<SilhavySummary> {
    let state = deformation_state(mesh, y);
    total_variation_p_with_state(mesh, y, &state, selection)
}

pub fn total_variation_p_with_state(
    mesh: &SimplicialMesh,
    y: &NodalField,
    state: &DeformationState,
    selection: &CellSelection,
) -> Result<SilhavySummary> {
    let boundary = reduced_boundary(mesh, selection);
    let mut atoms = Vec::with_capacity(boundary.facets.len());
    let mut tv = 0.0;
    for rb in &boundary.facets {
        let f = &mesh.interior_facets()[rb.facet];
        for side in [f.left, f.right] {
            if !(state.element(side).det > 0.0) {
                return Err(Error::degenerate_geometry(format!(
                    "element {side} adjacent to the interface has det F = {}",
                    state.element(side).det
                )));
            }
        }
        let vector = state.element(rb.e_side).cof.matvec(&rb.normal).scale(rb.measure);
        let magnitude = vector.norm();
        tv += magnitude;
        atoms.push(FacetAtom { facet: rb.facet, normal: rb.normal, vector, magnitude });
    }
    let oracle_perimeter = oracle::deformed_interface_measure(mesh, y, selection);
    let discrepancy = (tv - oracle_perimeter).abs() / oracle_perimeter.max(1e-14);
    Ok(SilhavySummary { atoms, total_variation: tv, oracle_perimeter, discrepancy })
}

/// Total variation of the discrete curl-pairing measure; 3D only.
///
/// For continuous P1 deformations the gradient jump across a facet is
/// rank one along the normal, and `(a x n)(n x psi) = 0`, so the
/// measure concentrates on the interface facets with matrix atoms
/// `measure * F (n x .)`. No independent identity pins its total
/// variation, so the value is reported without an oracle comparison.
pub fn total_variation_h(
    mesh: &SimplicialMesh,
    y: &NodalField,
    selection: &CellSelection,
) -> Result<f64> {
    if mesh.dim() != 3 {
        return Err(Error::unsupported_dimension(
            "the curl pairing measure requires a three-dimensional mesh".into(),
        ));
    }
    let state = deformation_state(mesh, y);
    let boundary = reduced_boundary(mesh, selection);
    let mut tv = 0.0;
    for rb in &boundary.facets {
        let g = state.element(rb.e_side).f.matmul(&MatN::cross_matrix(&rb.normal));
        tv += rb.measure * g.frobenius_norm();
    }
    Ok(tv)
}

/// Comparison of the total variation with the independently computed
/// deformed interface measure.
#[derive(Clone, Copy, Debug)]
pub struct CharacterizationReport {
    pub total_variation: f64,
    pub oracle_perimeter: f64,
    pub discrepancy: f64,
    pub pass: bool,
}

pub fn characterization_check(
    mesh: &SimplicialMesh,
    y: &NodalField,
    selection: &CellSelection,
) -> Result<CharacterizationReport> {
    let summary = total_variation_p(mesh, y, selection)?;
    Ok(CharacterizationReport {
        total_variation: summary.total_variation,
        oracle_perimeter: summary.oracle_perimeter,
        discrepancy: summary.discrepancy,
        pass: summary.discrepancy < 1e-10,
    })
}
