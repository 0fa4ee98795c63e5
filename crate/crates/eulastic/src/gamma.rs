//! Instrumentation for the diffuse-to-sharp interface limit.
//!
//! Recovery phase fields follow the optimal 1D profile along the
//! signed distance measured in the deformed configuration; the
//! coarea bound integrates `sqrt(2 Phi(s))` against the deformed
//! perimeters of the level sets `{z > s}`.
//!
//! Level sets are taken from the nodal P1 field, not from element
//! means: thresholding whole elements produces sawtooth interfaces
//! whose perimeter overshoots by an O(1) geometric factor, which
//! would break the coarea comparison it is meant to support. The P1
//! level set inside each element is a segment (2D) or a planar
//! polygon (3D) and its deformed measure is exact.

use crate::algebra::VecN;
use crate::energy::{diffuse_interface_energy_with_state, DoubleWell, PhaseField};
use crate::kinematics::{deformation_state, DeformationState};
use crate::mesh::{CellSelection, NodalField, SimplicialMesh};
use crate::quadrature::SimplexRule;
use crate::Result;

/// Distance from `p` to the segment `[a, b]`.
fn point_segment_distance(p: &VecN, a: &VecN, b: &VecN) -> f64 {
    let ab = *b - *a;
    let len_sq = ab.dot(&ab);
    if len_sq == 0.0 {
        return (*p - *a).norm();
    }
    let t = ((*p - *a).dot(&ab) / len_sq).clamp(0.0, 1.0);
    (*p - (*a + ab.scale(t))).norm()
}

/// Distance from `p` to the triangle `(a, b, c)` in 3D.
fn point_triangle_distance(p: &VecN, a: &VecN, b: &VecN, c: &VecN) -> f64 {
    let ab = *b - *a;
    let ac = *c - *a;
    let n = ab.cross(&ac);
    let n_sq = n.dot(&n);
    if n_sq == 0.0 {
        // degenerate triangle: fall back to its edges
        return point_segment_distance(p, a, b)
            .min(point_segment_distance(p, b, c))
            .min(point_segment_distance(p, a, c));
    }
    // barycentric coordinates of the in-plane projection
    let ap = *p - *a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    let dab = ab.dot(&ab);
    let dac = ac.dot(&ac);
    let dabc = ab.dot(&ac);
    let denom = dab * dac - dabc * dabc;
    let v = (dac * d1 - dabc * d2) / denom;
    let w = (dab * d2 - dabc * d1) / denom;
    if v >= 0.0 && w >= 0.0 && v + w <= 1.0 {
        // projection lands inside: distance along the normal
        let dist = ap.dot(&n) / n_sq.sqrt();
        return dist.abs();
    }
    point_segment_distance(p, a, b)
        .min(point_segment_distance(p, b, c))
        .min(point_segment_distance(p, a, c))
}

/// Signed distances from the deformed nodes to the deformed interface
/// of `E`; positive inside `y(E)`.
fn deformed_signed_distances(
    mesh: &SimplicialMesh,
    y: &NodalField,
    selection: &CellSelection,
) -> Option<Vec<f64>> {
    let dim = mesh.dim();
    // interface facets in deformed coordinates
    let mut facets: Vec<[VecN; 3]> = Vec::new();
    for f in mesh.interior_facets() {
        if selection.contains(f.left) != selection.contains(f.right) {
            let a = y.vector_at(f.nodes[0]);
            let b = y.vector_at(f.nodes[1]);
            let c = if dim == 3 { y.vector_at(f.nodes[2]) } else { a };
            facets.push([a, b, c]);
        }
    }
    if facets.is_empty() {
        return None;
    }
    // sign from element membership: nodes touching both sides sit on
    // the interface
    let mut touches_in = vec![false; mesh.n_nodes()];
    let mut touches_out = vec![false; mesh.n_nodes()];
    for e in 0..mesh.n_elements() {
        let inside = selection.contains(e);
        for &v in mesh.element(e) {
            if inside {
                touches_in[v] = true;
            } else {
                touches_out[v] = true;
            }
        }
    }
    let mut out = Vec::with_capacity(mesh.n_nodes());
    for i in 0..mesh.n_nodes() {
        let p = y.vector_at(i);
        let mut dist = f64::INFINITY;
        for f in &facets {
            let d = if dim == 2 {
                point_segment_distance(&p, &f[0], &f[1])
            } else {
                point_triangle_distance(&p, &f[0], &f[1], &f[2])
            };
            dist = dist.min(d);
        }
        let sign = match (touches_in[i], touches_out[i]) {
            (true, true) => 0.0,
            (true, false) => 1.0,
            (false, true) => -1.0,
            (false, false) => -1.0, // node unused by any element
        };
        out.push(sign * dist);
    }
    Some(out)
}

/// Modica-Mortola recovery phase field for the sharp set `E`.
///
/// `z(x) = 1 / (1 + exp(-rate * d(x)))` with `d` the signed distance
/// in the deformed configuration (positive inside `y(E)`) and `rate`
/// the optimal profile rate `6 gamma / eps` of the quartic well.
pub fn recovery_phase(
    mesh: &SimplicialMesh,
    y: &NodalField,
    selection: &CellSelection,
    eps: f64,
    well: &DoubleWell,
) -> Result<PhaseField> {
    if !(eps > 0.0) {
        return Err(crate::Error::invalid_argument(format!(
            "eps must be positive, got {eps}"
        )));
    }
    match deformed_signed_distances(mesh, y, selection) {
        None => {
            let v = if selection.is_empty() { 0.0 } else { 1.0 };
            Ok(PhaseField::constant(mesh, v))
        }
        Some(distances) => {
            let rate = well.profile_rate(eps);
            let values = distances
                .iter()
                .map(|d| (1.0 / (1.0 + (-rate * d).exp())).clamp(0.0, 1.0))
                .collect();
            PhaseField::new_clamped(mesh, values)
        }
    }
}

/// Deformed (n-1)-measure of the P1 level set `{z = s}`.
///
/// Exact for P1 data: the level set within an element is a segment or
/// a planar convex polygon, mapped affinely by the element's
/// deformation.
pub fn level_set_deformed_measure(
    mesh: &SimplicialMesh,
    y: &NodalField,
    z: &PhaseField,
    s: f64,
) -> f64 {
    let dim = mesh.dim();
    let zv = z.values();
    let mut total = 0.0;
    let mut crossings: Vec<VecN> = Vec::with_capacity(4);
    for e in 0..mesh.n_elements() {
        let en = mesh.element(e);
        crossings.clear();
        for i in 0..en.len() {
            for j in (i + 1)..en.len() {
                let (zi, zj) = (zv[en[i]], zv[en[j]]);
                // half-open: nodes exactly at the level count as below
                let (above_i, above_j) = (zi > s, zj > s);
                if above_i == above_j {
                    continue;
                }
                let t = (s - zi) / (zj - zi);
                let pi = y.vector_at(en[i]);
                let pj = y.vector_at(en[j]);
                crossings.push(pi + (pj - pi).scale(t));
            }
        }
        match (dim, crossings.len()) {
            (2, 2) => total += (crossings[1] - crossings[0]).norm(),
            (3, 3) => {
                let e1 = crossings[1] - crossings[0];
                let e2 = crossings[2] - crossings[0];
                total += 0.5 * e1.cross(&e2).norm();
            }
            (3, 4) => {
                // planar convex quad: fan around the centroid, ordered
                // by angle in the cutting plane
                let mut c = VecN::zeros(3);
                for p in crossings.iter() {
                    c = c + *p;
                }
                c = c.scale(0.25);
                let normal = (crossings[1] - crossings[0]).cross(&(crossings[2] - crossings[0]));
                if normal.norm() == 0.0 {
                    continue;
                }
                let u = (crossings[1] - crossings[0]).normalized();
                let w = normal.normalized().cross(&u);
                let mut pts: Vec<(f64, VecN)> = crossings
                    .iter()
                    .map(|p| {
                        let r = *p - c;
                        (r.dot(&w).atan2(r.dot(&u)), *p)
                    })
                    .collect();
                pts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
                for k in 0..4 {
                    let p1 = pts[k].1 - c;
                    let p2 = pts[(k + 1) % 4].1 - c;
                    total += 0.5 * p1.cross(&p2).norm();
                }
            }
            _ => {}
        }
    }
    total
}

/// Midpoint-rule lower bound `sum_j sqrt(2 Phi(s_j)) Per({z > s_j},
/// deformed) / slice_count` from the coarea decomposition.
pub fn coarea_lower_bound(
    mesh: &SimplicialMesh,
    y: &NodalField,
    z: &PhaseField,
    well: &DoubleWell,
    slice_count: usize,
) -> Result<f64> {
    if slice_count < 2 {
        return Err(crate::Error::invalid_argument(
            "slice_count must be at least 2".into(),
        ));
    }
    let ds = 1.0 / slice_count as f64;
    let mut total = 0.0;
    for j in 0..slice_count {
        let s = (j as f64 + 0.5) * ds;
        let per = level_set_deformed_measure(mesh, y, z, s);
        total += well.sqrt_two_phi(s) * per * ds;
    }
    Ok(total)
}

/// Deformed volume of the transition band `{lo < z < hi}` by
/// per-element quadrature sampling.
fn band_volume(
    mesh: &SimplicialMesh,
    state: &DeformationState,
    z: &PhaseField,
    lo: f64,
    hi: f64,
) -> f64 {
    let rule = SimplexRule::with_degree(mesh.dim(), 7);
    let zv = z.values();
    let mut total = 0.0;
    for e in 0..mesh.n_elements() {
        let en = mesh.element(e);
        let mut frac = 0.0;
        for (bary, w) in rule.nodes.iter().zip(&rule.weights) {
            let mut val = 0.0;
            for (local, &node) in en.iter().enumerate() {
                val += bary[local] * zv[node];
            }
            if val > lo && val < hi {
                frac += w;
            }
        }
        total += mesh.volume(e) * state.element(e).det.max(0.0) * frac;
    }
    total
}

/// One row of an epsilon sweep.
#[derive(Clone, Debug)]
pub struct SweepRecord {
    pub eps: f64,
    /// Diffuse interface energy of the recovery state.
    pub f_eps_int: f64,
    /// `gamma * Per` of the thresholded set `{zbar > 1/2}`.
    pub gamma_per: f64,
    pub coarea_bound: f64,
    /// Estimated transition width between levels 0.1 and 0.9.
    pub width: f64,
}

/// Build recovery states for each `eps` and record the diffuse
/// energy, thresholded sharp energy, coarea bound and width估.
pub fn eps_sweep(
    mesh: &SimplicialMesh,
    y: &NodalField,
    selection: &CellSelection,
    eps_list: &[f64],
    well: &DoubleWell,
    slice_count: usize,
) -> Result<Vec<SweepRecord>> {
    if eps_list.iter().any(|&e| !(e > 0.0)) {
        return Err(crate::Error::invalid_argument("eps list must be positive".into()));
    }
    if eps_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(crate::Error::invalid_argument(
            "eps list must be strictly decreasing".into(),
        ));
    }
    let state = deformation_state(mesh, y);
    let mut out = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let z = recovery_phase(mesh, y, selection, eps, well)?;
        let f_eps_int = diffuse_interface_energy_with_state(mesh, &state, &z, eps, well)?;
        let thresholded = z.threshold_selection(mesh, 0.5);
        let gamma_per = crate::energy::sharp_interface_energy_with_state(
            mesh,
            &state,
            &thresholded,
            well.gamma,
        );
        let coarea = coarea_lower_bound(mesh, y, &z, well, slice_count)?;
        let tv = gamma_per / well.gamma;
        let width = if tv > 0.0 {
            band_volume(mesh, &state, &z, 0.1, 0.9) / tv
        } else {
            0.0
        };
        out.push(SweepRecord { eps, f_eps_int, gamma_per, coarea_bound: coarea, width });
    }
    Ok(out)
}
