//! Per-element deformation measures and admissibility diagnostics.
//!
//! A P1 deformation has a constant gradient `F` per element, so the
//! determinant, cofactor matrix and distortion are exact per-element
//! quantities. Global diagnostics (deformed volume, Banach indicatrix,
//! Ciarlet-Necas ratio) are estimated by rasterizing the deformed
//! elements over a uniform grid of cell centers.

use crate::algebra::{MatN, VecN};
use crate::mesh::{element_gradient_vector, NodalField, SimplicialMesh};
use crate::{Error, Result};

/// Deformation measures of one element.
#[derive(Clone, Copy, Debug)]
pub struct ElementDeformation {
    pub f: MatN,
    pub det: f64,
    pub cof: MatN,
    /// Optimal distortion `|F|^n / det F` (Frobenius norm), or 1 when
    /// `det F = 0`. The Frobenius convention makes the identity map's
    /// distortion `n^{n/2}`, not 1.
    pub distortion: f64,
}

/// Per-element deformation measures for a whole field.
#[derive(Clone, Debug)]
pub struct DeformationState {
    dim: usize,
    elems: Vec<ElementDeformation>,
}

/// Compute `F`, `det F`, `cof F` and the distortion on every element.
///
/// Negative determinants are reported, not rejected.
pub fn deformation_state(mesh: &SimplicialMesh, y: &NodalField) -> DeformationState {
    let dim = mesh.dim();
    let elems = (0..mesh.n_elements())
        .map(|e| {
            let f = element_gradient_vector(mesh, y, e);
            let det = f.det();
            let cof = f.cof();
            let distortion = if det != 0.0 {
                f.frobenius_norm().powi(dim as i32) / det
            } else {
                1.0
            };
            ElementDeformation { f, det, cof, distortion }
        })
        .collect();
    DeformationState { dim, elems }
}

impl DeformationState {
    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn element(&self, e: usize) -> &ElementDeformation {
        &self.elems[e]
    }

    pub fn len(&self) -> usize {
        self.elems.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elems.is_empty()
    }

    pub fn min_det(&self) -> f64 {
        self.elems.iter().map(|d| d.det).fold(f64::INFINITY, f64::min)
    }

    /// `int_Omega det(grad y) dx`, the Ciarlet-Necas left-hand side.
    pub fn jacobian_integral(&self, mesh: &SimplicialMesh) -> f64 {
        (0..self.elems.len()).map(|e| mesh.volume(e) * self.elems[e].det).sum()
    }

    /// `L^q` norm of the distortion over the reference domain.
    pub fn distortion_norm(&self, mesh: &SimplicialMesh, q: f64) -> f64 {
        let s: f64 = (0..self.elems.len())
            .map(|e| mesh.volume(e) * self.elems[e].distortion.abs().powf(q))
            .sum();
        s.powf(1.0 / q)
    }
}

/// Cell-center coverage counts of the deformed domain on a uniform grid.
#[derive(Clone, Debug)]
pub struct Coverage {
    dim: usize,
    origin: VecN,
    pitch: f64,
    cells: [usize; 3],
    counts: Vec<u16>,
}

impl Coverage {
    fn linear(&self, idx: [usize; 3]) -> usize {
        (idx[2] * self.cells[1] + idx[1]) * self.cells[0] + idx[0]
    }

    pub fn cell_volume(&self) -> f64 {
        self.pitch.powi(self.dim as i32)
    }

    pub fn covered_cells(&self) -> usize {
        self.counts.iter().filter(|&&c| c > 0).count()
    }

    /// Estimated Lebesgue measure of the covered set.
    pub fn volume(&self) -> f64 {
        self.covered_cells() as f64 * self.cell_volume()
    }

    /// Volume of cells covered exactly once.
    pub fn single_cover_volume(&self) -> f64 {
        self.counts.iter().filter(|&&c| c == 1).count() as f64 * self.cell_volume()
    }

    /// Covered cells with an uncovered (or out-of-grid) face neighbor.
    /// Their total volume bounds the coverage discretization error for
    /// domains with piecewise smooth boundary.
    pub fn boundary_band_cells(&self) -> usize {
        let mut band = 0;
        let (nx, ny, nz) = (self.cells[0], self.cells[1], self.cells[2]);
        for k in 0..nz {
            for j in 0..ny {
                for i in 0..nx {
                    if self.counts[self.linear([i, j, k])] == 0 {
                        continue;
                    }
                    let mut exposed = false;
                    let mut check = |ii: isize, jj: isize, kk: isize| {
                        let outside = ii < 0
                            || jj < 0
                            || kk < 0
                            || ii as usize >= nx
                            || jj as usize >= ny
                            || kk as usize >= nz;
                        if outside
                            || self.counts[(kk as usize * ny + jj as usize) * nx + ii as usize] == 0
                        {
                            exposed = true;
                        }
                    };
                    let (i, j, k) = (i as isize, j as isize, k as isize);
                    check(i - 1, j, k);
                    check(i + 1, j, k);
                    check(i, j - 1, k);
                    check(i, j + 1, k);
                    if self.dim == 3 {
                        check(i, j, k - 1);
                        check(i, j, k + 1);
                    }
                    if exposed {
                        band += 1;
                    }
                }
            }
        }
        band
    }

    /// Volume of cells covered by `self` xor covered by `other`.
    /// Both coverages must share the same grid.
    pub fn symmetric_difference(&self, other: &Coverage) -> f64 {
        assert_eq!(self.cells, other.cells, "coverages live on different grids");
        let count = self
            .counts
            .iter()
            .zip(&other.counts)
            .filter(|(&a, &b)| (a > 0) != (b > 0))
            .count();
        count as f64 * self.cell_volume()
    }

    pub fn origin(&self) -> VecN {
        self.origin
    }
}

/// Axis-aligned bounding box of the deformed nodes.
fn deformed_bbox(mesh: &SimplicialMesh, y: &NodalField) -> Result<(VecN, VecN)> {
    if mesh.n_nodes() == 0 || mesh.n_elements() == 0 {
        return Err(Error::invalid_argument("mesh has no elements".into()));
    }
    let dim = mesh.dim();
    let mut lo = y.vector_at(0);
    let mut hi = lo;
    for i in 1..mesh.n_nodes() {
        let v = y.vector_at(i);
        for a in 0..dim {
            lo[a] = lo[a].min(v[a]);
            hi[a] = hi[a].max(v[a]);
        }
    }
    Ok((lo, hi))
}

/// Rasterize the deformed mesh on its own bounding-box grid.
pub fn rasterize(mesh: &SimplicialMesh, y: &NodalField, pitch: f64) -> Result<Coverage> {
    let (lo, hi) = deformed_bbox(mesh, y)?;
    rasterize_on(mesh, y, &lo, &hi, pitch)
}

/// Rasterize on an explicit grid covering `[lo, hi]`.
pub fn rasterize_on(
    mesh: &SimplicialMesh,
    y: &NodalField,
    lo: &VecN,
    hi: &VecN,
    pitch: f64,
) -> Result<Coverage> {
    if !(pitch > 0.0) {
        return Err(Error::invalid_argument(format!("pitch must be positive, got {pitch}")));
    }
    let dim = mesh.dim();
    let mut cells = [1usize; 3];
    for a in 0..dim {
        let extent = hi[a] - lo[a];
        cells[a] = ((extent / pitch).ceil() as usize).max(1);
    }
    let total: usize = cells.iter().product();
    if total > 200_000_000 {
        return Err(Error::invalid_argument(format!(
            "rasterization grid of {total} cells exceeds the safety cap; increase the pitch"
        )));
    }

    let mut cov = Coverage {
        dim,
        origin: *lo,
        pitch,
        cells,
        counts: vec![0u16; total],
    };
    // (cell, element) pairs where the cell center lies on the deformed
    // element's boundary within tolerance.
    let mut edge_hits: Vec<(usize, u32)> = Vec::new();
    let bary_tol = 1e-9;

    for e in 0..mesh.n_elements() {
        let en = mesh.element(e);
        let v0 = y.vector_at(en[0]);
        let mut m = MatN::zeros(dim);
        let mut elo = v0;
        let mut ehi = v0;
        for j in 0..dim {
            let vj = y.vector_at(en[j + 1]);
            for i in 0..dim {
                m[(i, j)] = vj[i] - v0[i];
            }
            for a in 0..dim {
                elo[a] = elo[a].min(vj[a]);
                ehi[a] = ehi[a].max(vj[a]);
            }
        }
        let det = m.det();
        let scale = m.frobenius_norm();
        if det.abs() <= 1e-14 * scale.powi(dim as i32).max(f64::MIN_POSITIVE) {
            // deformed element is flat: covers measure zero
            continue;
        }
        let minv = m.inverse();

        // candidate index ranges of cell centers inside the element bbox
        let mut lo_idx = [0usize; 3];
        let mut hi_idx = [0usize; 3];
        let mut empty = false;
        for a in 0..dim {
            let lraw = ((elo[a] - lo[a]) / pitch - 0.5).floor() as i64;
            let hraw = ((ehi[a] - lo[a]) / pitch - 0.5).ceil() as i64;
            if hraw < 0 || lraw >= cells[a] as i64 {
                empty = true;
                break;
            }
            lo_idx[a] = lraw.max(0) as usize;
            hi_idx[a] = (hraw as usize).min(cells[a] - 1);
        }
        if empty {
            continue;
        }

        for k in lo_idx[2]..=hi_idx[2] {
            for j in lo_idx[1]..=hi_idx[1] {
                for i in lo_idx[0]..=hi_idx[0] {
                    let mut xi = VecN::zeros(dim);
                    xi[0] = lo[0] + (i as f64 + 0.5) * pitch;
                    xi[1] = lo[1] + (j as f64 + 0.5) * pitch;
                    if dim == 3 {
                        xi[2] = lo[2] + (k as f64 + 0.5) * pitch;
                    }
                    let lam = minv.matvec(&(xi - v0));
                    let mut lmin: f64 = 1.0;
                    let mut lsum: f64 = 0.0;
                    for a in 0..dim {
                        lmin = lmin.min(lam[a]);
                        lsum += lam[a];
                    }
                    lmin = lmin.min(1.0 - lsum);
                    if lmin > bary_tol {
                        let c = cov.linear([i, j, k]);
                        cov.counts[c] = cov.counts[c].saturating_add(1);
                    } else if lmin >= -bary_tol {
                        edge_hits.push((cov.linear([i, j, k]), e as u32));
                    }
                }
            }
        }
    }

    // Cell centers on shared facet images would be double counted; merge
    // hits from elements that are adjacent in the reference mesh into
    // one count per connected group (attributed to its smallest member).
    edge_hits.sort_unstable();
    edge_hits.dedup();
    let mut i = 0;
    while i < edge_hits.len() {
        let cell = edge_hits[i].0;
        let mut group_elems: Vec<u32> = Vec::new();
        while i < edge_hits.len() && edge_hits[i].0 == cell {
            group_elems.push(edge_hits[i].1);
            i += 1;
        }
        let groups = count_adjacency_groups(mesh, &group_elems);
        cov.counts[cell] = cov.counts[cell].saturating_add(groups as u16);
    }

    Ok(cov)
}

fn count_adjacency_groups(mesh: &SimplicialMesh, elems: &[u32]) -> usize {
    let mut visited = vec![false; elems.len()];
    let mut groups = 0;
    for start in 0..elems.len() {
        if visited[start] {
            continue;
        }
        groups += 1;
        let mut stack = vec![start];
        visited[start] = true;
        while let Some(cur) = stack.pop() {
            let neigh = mesh.neighbors(elems[cur] as usize);
            for (other_idx, &other) in elems.iter().enumerate() {
                if !visited[other_idx] && neigh.contains(&(other as usize)) {
                    visited[other_idx] = true;
                    stack.push(other_idx);
                }
            }
        }
    }
    groups
}

/// Lebesgue measure of the deformed domain `y(Omega)` by rasterization.
pub fn deformed_volume(mesh: &SimplicialMesh, y: &NodalField, pitch: f64) -> Result<f64> {
    Ok(rasterize(mesh, y, pitch)?.volume())
}

/// Rasterize two deformed meshes on one shared grid.
pub fn shared_coverages(
    mesh_a: &SimplicialMesh,
    y_a: &NodalField,
    mesh_b: &SimplicialMesh,
    y_b: &NodalField,
    pitch: f64,
) -> Result<(Coverage, Coverage)> {
    if mesh_a.dim() != mesh_b.dim() {
        return Err(Error::invalid_argument("meshes have different dimensions".into()));
    }
    let (lo_a, hi_a) = deformed_bbox(mesh_a, y_a)?;
    let (lo_b, hi_b) = deformed_bbox(mesh_b, y_b)?;
    let mut lo = lo_a;
    let mut hi = hi_a;
    for a in 0..mesh_a.dim() {
        lo[a] = lo[a].min(lo_b[a]);
        hi[a] = hi[a].max(hi_b[a]);
    }
    let cov_a = rasterize_on(mesh_a, y_a, &lo, &hi, pitch)?;
    let cov_b = rasterize_on(mesh_b, y_b, &lo, &hi, pitch)?;
    Ok((cov_a, cov_b))
}

/// `|y_a(Omega_a) \Delta y_b(Omega_b)|` estimated on a shared grid.
pub fn deformed_symmetric_difference(
    mesh_a: &SimplicialMesh,
    y_a: &NodalField,
    mesh_b: &SimplicialMesh,
    y_b: &NodalField,
    pitch: f64,
) -> Result<f64> {
    let (cov_a, cov_b) = shared_coverages(mesh_a, y_a, mesh_b, y_b, pitch)?;
    Ok(cov_a.symmetric_difference(&cov_b))
}

/// Point-location structure over the deformed elements.
pub struct DeformedMap<'a> {
    mesh: &'a SimplicialMesh,
    verts: Vec<VecN>,
    lo: VecN,
    hi: VecN,
    bucket_size: f64,
    buckets_dims: [usize; 3],
    buckets: Vec<Vec<u32>>,
}

impl<'a> DeformedMap<'a> {
    pub fn new(mesh: &'a SimplicialMesh, y: &NodalField) -> Result<Self> {
        let (lo, hi) = deformed_bbox(mesh, y)?;
        let dim = mesh.dim();
        let verts: Vec<VecN> = (0..mesh.n_nodes()).map(|i| y.vector_at(i)).collect();
        // aim for O(1) elements per bucket
        let target = (mesh.n_elements() as f64).powf(1.0 / dim as f64).ceil() as usize;
        let mut size: f64 = 0.0;
        for a in 0..dim {
            size = size.max((hi[a] - lo[a]) / target.max(1) as f64);
        }
        let size = if size > 0.0 { size } else { 1.0 };
        let mut dims = [1usize; 3];
        for a in 0..dim {
            dims[a] = (((hi[a] - lo[a]) / size).ceil() as usize).max(1);
        }
        let mut buckets = vec![Vec::new(); dims.iter().product()];
        for e in 0..mesh.n_elements() {
            let en = mesh.element(e);
            let mut elo = verts[en[0]];
            let mut ehi = elo;
            for &v in &en[1..] {
                for a in 0..dim {
                    elo[a] = elo[a].min(verts[v][a]);
                    ehi[a] = ehi[a].max(verts[v][a]);
                }
            }
            let mut lo_idx = [0usize; 3];
            let mut hi_idx = [0usize; 3];
            for a in 0..dim {
                lo_idx[a] =
                    (((elo[a] - lo[a]) / size).floor() as i64).clamp(0, dims[a] as i64 - 1) as usize;
                hi_idx[a] =
                    (((ehi[a] - lo[a]) / size).floor() as i64).clamp(0, dims[a] as i64 - 1) as usize;
            }
            for k in lo_idx[2]..=hi_idx[2] {
                for j in lo_idx[1]..=hi_idx[1] {
                    for i in lo_idx[0]..=hi_idx[0] {
                        buckets[(k * dims[1] + j) * dims[0] + i].push(e as u32);
                    }
                }
            }
        }
        Ok(DeformedMap { mesh, verts, lo, hi, bucket_size: size, buckets_dims: dims, buckets })
    }

    pub fn bbox(&self) -> (VecN, VecN) {
        (self.lo, self.hi)
    }

    fn candidates(&self, xi: &VecN) -> &[u32] {
        let dim = self.mesh.dim();
        let mut idx = [0usize; 3];
        for a in 0..dim {
            let raw = ((xi[a] - self.lo[a]) / self.bucket_size).floor() as i64;
            if raw < 0 || raw >= self.buckets_dims[a] as i64 {
                return &[];
            }
            idx[a] = raw as usize;
        }
        &self.buckets[(idx[2] * self.buckets_dims[1] + idx[1]) * self.buckets_dims[0] + idx[0]]
    }

    /// Banach indicatrix: the number of deformed elements containing
    /// `xi`, counting each adjacency-connected group of facet hits once.
    pub fn indicatrix(&self, xi: &VecN) -> usize {
        let dim = self.mesh.dim();
        let tol = 1e-9;
        let mut strict = 0usize;
        let mut boundary: Vec<u32> = Vec::new();
        for &e in self.candidates(xi) {
            let en = self.mesh.element(e as usize);
            let v0 = self.verts[en[0]];
            let mut m = MatN::zeros(dim);
            for j in 0..dim {
                for i in 0..dim {
                    m[(i, j)] = self.verts[en[j + 1]][i] - v0[i];
                }
            }
            let det = m.det();
            if det.abs() <= 1e-14 * m.frobenius_norm().powi(dim as i32).max(f64::MIN_POSITIVE) {
                continue;
            }
            let lam = m.inverse().matvec(&(*xi - v0));
            let mut lmin: f64 = 1.0;
            let mut lsum: f64 = 0.0;
            for a in 0..dim {
                lmin = lmin.min(lam[a]);
                lsum += lam[a];
            }
            lmin = lmin.min(1.0 - lsum);
            if lmin > tol {
                strict += 1;
            } else if lmin >= -tol {
                boundary.push(e);
            }
        }
        strict + count_adjacency_groups(self.mesh, &boundary)
    }
}

/// Number of preimages of `xi` under the P1 deformation.
pub fn banach_indicatrix(mesh: &SimplicialMesh, y: &NodalField, xi: &VecN) -> Result<usize> {
    Ok(DeformedMap::new(mesh, y)?.indicatrix(xi))
}

/// Ciarlet-Necas comparison of `int det(grad y)` with `|y(Omega)|`.
#[derive(Clone, Copy, Debug)]
pub struct CnReport {
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    pub satisfied: bool,
    /// Volume of the rasterization's boundary band; a bound on the
    /// grid error of `rhs`.
    pub raster_error: f64,
}

pub fn ciarlet_necas_check(
    mesh: &SimplicialMesh,
    y: &NodalField,
    state: &DeformationState,
    pitch: f64,
    tol: f64,
) -> Result<CnReport> {
    let lhs = state.jacobian_integral(mesh);
    let cov = rasterize(mesh, y, pitch)?;
    let rhs = cov.volume();
    let raster_error = cov.boundary_band_cells() as f64 * cov.cell_volume();
    let ratio = if rhs > 0.0 { lhs / rhs } else { f64::INFINITY };
    let satisfied = lhs <= rhs * (1.0 + tol) + tol;
    Ok(CnReport { lhs, rhs, ratio, satisfied, raster_error })
}

/// Halton sequence point in `[0,1)^dim`.
fn halton(index: usize, dim: usize) -> VecN {
    const BASES: [u64; 3] = [2, 3, 5];
    let mut out = VecN::zeros(dim);
    for a in 0..dim {
        let b = BASES[a];
        let mut f = 1.0;
        let mut r = 0.0;
        let mut i = index as u64 + 1;
        while i > 0 {
            f /= b as f64;
            r += f * (i % b) as f64;
            i /= b;
        }
        out[a] = r;
    }
    out
}

/// Injectivity diagnostics over quasi-random samples of the deformed
/// bounding box.
#[derive(Clone, Debug)]
pub struct InjectivityReport {
    /// `histogram[n]` counts samples with indicatrix `n`; the last
    /// bucket aggregates everything at or above its index.
    pub histogram: Vec<usize>,
    /// Fraction of covered samples (`N >= 1`) with exactly one preimage.
    pub injectivity_fraction: f64,
    pub sample_count: usize,
}

pub fn injectivity_report(
    mesh: &SimplicialMesh,
    y: &NodalField,
    sample_count: usize,
) -> Result<InjectivityReport> {
    if sample_count == 0 {
        return Err(Error::invalid_argument("sample_count must be at least 1".into()));
    }
    let map = DeformedMap::new(mesh, y)?;
    let (lo, hi) = map.bbox();
    let dim = mesh.dim();
    const MAX_BUCKET: usize = 8;
    let mut histogram = vec![0usize; MAX_BUCKET + 1];
    let mut covered = 0usize;
    let mut single = 0usize;
    for s in 0..sample_count {
        let u = halton(s, dim);
        let mut xi = VecN::zeros(dim);
        for a in 0..dim {
            xi[a] = lo[a] + u[a] * (hi[a] - lo[a]);
        }
        let n = map.indicatrix(&xi);
        histogram[n.min(MAX_BUCKET)] += 1;
        if n >= 1 {
            covered += 1;
            if n == 1 {
                single += 1;
            }
        }
    }
    let injectivity_fraction = if covered > 0 { single as f64 / covered as f64 } else { 0.0 };
    Ok(InjectivityReport { histogram, injectivity_fraction, sample_count })
}

/// Full admissibility diagnostics of a deformation.
#[derive(Clone, Debug)]
pub struct AdmissibilityReport {
    pub min_det: f64,
    pub cn_lhs: f64,
    pub cn_rhs: f64,
    pub cn_ratio: f64,
    pub cn_satisfied: bool,
    pub distortion_q_norm: f64,
    pub distortion_q: f64,
    pub indicatrix_histogram: Vec<usize>,
    pub injectivity_fraction: f64,
    pub sample_count: usize,
    pub pitch: f64,
}

pub fn admissibility_report(
    mesh: &SimplicialMesh,
    y: &NodalField,
    q: f64,
    pitch: f64,
    sample_count: usize,
    cn_tol: f64,
) -> Result<AdmissibilityReport> {
    let state = deformation_state(mesh, y);
    let cn = ciarlet_necas_check(mesh, y, &state, pitch, cn_tol)?;
    let inj = injectivity_report(mesh, y, sample_count)?;
    Ok(AdmissibilityReport {
        min_det: state.min_det(),
        cn_lhs: cn.lhs,
        cn_rhs: cn.rhs,
        cn_ratio: cn.ratio,
        cn_satisfied: cn.satisfied,
        distortion_q_norm: state.distortion_norm(mesh, q),
        distortion_q: q,
        indicatrix_histogram: inj.histogram,
        injectivity_fraction: inj.injectivity_fraction,
        sample_count,
        pitch,
    })
}

impl AdmissibilityReport {
    /// Flat key-value block consumed by the CLI.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("min_det {}\n", self.min_det));
        s.push_str(&format!("cn_lhs {}\n", self.cn_lhs));
        s.push_str(&format!("cn_rhs {}\n", self.cn_rhs));
        s.push_str(&format!("cn_ratio {}\n", self.cn_ratio));
        s.push_str(&format!("cn_satisfied {}\n", self.cn_satisfied));
        s.push_str(&format!("distortion_q {}\n", self.distortion_q));
        s.push_str(&format!("distortion_q_norm {}\n", self.distortion_q_norm));
        s.push_str(&format!("injectivity_fraction {}\n", self.injectivity_fraction));
        s.push_str(&format!("sample_count {}\n", self.sample_count));
        s.push_str(&format!("raster_pitch {}\n", self.pitch));
        let hist: Vec<String> = self.indicatrix_histogram.iter().map(|c| c.to_string()).collect();
        s.push_str(&format!("indicatrix_histogram {}\n", hist.join(" ")));
        s
    }
}

/// Analytic deformation used by fixtures: maps a box `[0,L1] x [0,L2]`
/// onto an annulus winding `rate * L2 / (2 pi)` times around the origin.
pub fn wrap_map(r0: f64, rate: f64) -> impl Fn(&VecN) -> VecN {
    move |x: &VecN| {
        let r = r0 + x[0];
        let phi = rate * x[1];
        VecN::new2(r * phi.cos(), r * phi.sin())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_box_mesh;

    #[test]
    fn identity_state() {
        let mesh = build_box_mesh(2, &[1.0, 1.0], &[4, 4]).unwrap();
        let y = NodalField::identity(&mesh);
        let state = deformation_state(&mesh, &y);
        for e in 0..mesh.n_elements() {
            let d = state.element(e);
            assert!((d.det - 1.0).abs() < 1e-13);
            assert!((d.distortion - 2.0).abs() < 1e-12); // n^{n/2} = 2 in 2D
            for i in 0..2 {
                for j in 0..2 {
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert!((d.cof[(i, j)] - expect).abs() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn diag_state_2d() {
        let mesh = build_box_mesh(2, &[1.0, 1.0], &[2, 2]).unwrap();
        let y = NodalField::vector(&mesh, |x| VecN::new2(2.0 * x[0], x[1]));
        let state = deformation_state(&mesh, &y);
        let d = state.element(0);
        assert!((d.det - 2.0).abs() < 1e-13);
        assert!((d.cof[(0, 0)] - 1.0).abs() < 1e-13);
        assert!((d.cof[(1, 1)] - 2.0).abs() < 1e-13);
        // oracle: (cof F) F^T = det F * I
        let p = d.cof.matmul(&d.f.transpose());
        for i in 0..2 {
            for j in 0..2 {
                let expect = if i == j { d.det } else { 0.0 };
                assert!((p[(i, j)] - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn scaling_3d() {
        let mesh = build_box_mesh(3, &[1.0, 1.0, 1.0], &[1, 1, 1]).unwrap();
        let lam = 1.4;
        let y = NodalField::vector(&mesh, |x| x.scale(lam));
        let state = deformation_state(&mesh, &y);
        for e in 0..mesh.n_elements() {
            let d = state.element(e);
            assert!((d.det - lam.powi(3)).abs() < 1e-12);
            for i in 0..3 {
                assert!((d.cof[(i, i)] - lam * lam).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn homogeneity_under_scaling() {
        let mesh = build_box_mesh(2, &[1.0, 1.0], &[3, 3]).unwrap();
        let base = |x: &VecN| VecN::new2(x[0] + 0.2 * x[1], x[1] - 0.1 * x[0]);
        let lam = 2.3;
        let y = NodalField::vector(&mesh, base);
        let y_scaled = NodalField::vector(&mesh, |x| base(x).scale(lam));
        let s1 = deformation_state(&mesh, &y);
        let s2 = deformation_state(&mesh, &y_scaled);
        for e in 0..mesh.n_elements() {
            assert!((s2.element(e).det - lam * lam * s1.element(e).det).abs() < 1e-12);
            for i in 0..2 {
                for j in 0..2 {
                    assert!(
                        (s2.element(e).cof[(i, j)] - lam * s1.element(e).cof[(i, j)]).abs() < 1e-12
                    );
                }
            }
        }
    }

    #[test]
    fn piola_facet_continuity() {
        // (cof F) n agrees from both sides of every interior facet for
        // continuous P1 deformations.
        let mesh = build_box_mesh(2, &[1.0, 1.0], &[5, 4]).unwrap();
        let y = NodalField::vector(&mesh, |x| {
            VecN::new2(
                x[0] + 0.1 * (x[1] * 3.0).sin(),
                x[1] + 0.1 * (x[0] * 2.0).cos(),
            )
        });
        let state = deformation_state(&mesh, &y);
        for f in mesh.interior_facets() {
            let a = state.element(f.left).cof.matvec(&f.normal);
            let b = state.element(f.right).cof.matvec(&f.normal);
            let scale = a.norm().max(1e-30);
            assert!((a - b).norm() / scale < 1e-12);
        }
    }

    #[test]
    fn identity_volume_and_cn() {
        let mesh = build_box_mesh(2, &[1.0, 1.0], &[8, 8]).unwrap();
        let y = NodalField::identity(&mesh);
        let pitch = 1.0 / 256.0;
        let vol = deformed_volume(&mesh, &y, pitch).unwrap();
        assert!((vol - 1.0).abs() <= 2.0 * 4.0 * pitch, "vol = {vol}");

        let state = deformation_state(&mesh, &y);
        let cn = ciarlet_necas_check(&mesh, &y, &state, pitch, 1e-2).unwrap();
        assert!(cn.satisfied);
        assert!((cn.ratio - 1.0).abs() < 1e-2);
    }

    #[test]
    fn stretched_volume() {
        let mesh = build_box_mesh(2, &[1.0, 1.0], &[8, 8]).unwrap();
        let y = NodalField::vector(&mesh, |x| VecN::new2(2.0 * x[0], x[1]));
        let vol = deformed_volume(&mesh, &y, 1.0 / 256.0).unwrap();
        assert!((vol - 2.0).abs() < 0.03, "vol = {vol}");
    }

    #[test]
    fn indicatrix_identity() {
        let mesh = build_box_mesh(2, &[1.0, 1.0], &[4, 4]).unwrap();
        let y = NodalField::identity(&mesh);
        assert_eq!(banach_indicatrix(&mesh, &y, &VecN::new2(0.33, 0.41)).unwrap(), 1);
        assert_eq!(banach_indicatrix(&mesh, &y, &VecN::new2(5.0, 0.5)).unwrap(), 0);
        // on an interior mesh edge: still one preimage
        assert_eq!(banach_indicatrix(&mesh, &y, &VecN::new2(0.25, 0.41)).unwrap(), 1);
        // on a node shared by several elements
        assert_eq!(banach_indicatrix(&mesh, &y, &VecN::new2(0.25, 0.25)).unwrap(), 1);
    }

    #[test]
    fn wrap_map_doubles() {
        // double cover of an annulus: N = 2 at generic points, CN ratio 2
        let mesh = build_box_mesh(2, &[1.0, 1.0], &[12, 96]).unwrap();
        let y = NodalField::vector(&mesh, wrap_map(0.5, 4.0 * std::f64::consts::PI));
        let state = deformation_state(&mesh, &y);
        assert!(state.min_det() > 0.0);

        // generic interior image point: the wrap has preimages at
        // (r, theta/2) and (r, theta/2 + pi)
        let xi = VecN::new2(0.9, 0.3);
        assert_eq!(banach_indicatrix(&mesh, &y, &xi).unwrap(), 2);

        let cn = ciarlet_necas_check(&mesh, &y, &state, 1.0 / 256.0, 1e-3).unwrap();
        assert!(!cn.satisfied);
        assert!((cn.ratio - 2.0).abs() < 0.1, "ratio = {}", cn.ratio);

        let inj = injectivity_report(&mesh, &y, 4000).unwrap();
        assert!(inj.injectivity_fraction < 0.05, "fraction = {}", inj.injectivity_fraction);
    }

    #[test]
    fn affine_injectivity() {
        let mesh = build_box_mesh(2, &[1.0, 1.0], &[6, 6]).unwrap();
        let y = NodalField::vector(&mesh, |x| VecN::new2(1.2 * x[0] + 0.3 * x[1], 0.9 * x[1]));
        let inj = injectivity_report(&mesh, &y, 2000).unwrap();
        assert!((inj.injectivity_fraction - 1.0).abs() < 1e-12);
        let total: usize = inj.histogram.iter().sum();
        assert_eq!(total, 2000);
    }

    #[test]
    fn symmetric_difference_of_identical_maps_is_zero() {
        let mesh = build_box_mesh(2, &[1.0, 1.0], &[6, 6]).unwrap();
        let y = NodalField::identity(&mesh);
        let d = deformed_symmetric_difference(&mesh, &y, &mesh, &y, 1.0 / 128.0).unwrap();
        assert_eq!(d, 0.0);
        let y2 = NodalField::vector(&mesh, |x| VecN::new2(x[0] + 0.5, x[1]));
        let d2 = deformed_symmetric_difference(&mesh, &y, &mesh, &y2, 1.0 / 128.0).unwrap();
        assert!((d2 - 1.0).abs() < 0.05, "sym diff = {d2}");
    }

    #[test]
    fn rasterized_volume_3d() {
        let mesh = build_box_mesh(3, &[1.0, 1.0, 1.0], &[4, 4, 4]).unwrap();
        let y = NodalField::identity(&mesh);
        let pitch = 1.0 / 64.0;
        let vol = deformed_volume(&mesh, &y, pitch).unwrap();
        assert!((vol - 1.0).abs() <= 2.0 * 6.0 * pitch, "3D vol {vol}");

        let lam = 1.25;
        let y2 = NodalField::vector(&mesh, |x| x.scale(lam));
        let vol2 = deformed_volume(&mesh, &y2, pitch).unwrap();
        assert!((vol2 - lam.powi(3)).abs() < 0.1, "3D scaled vol {vol2}");
    }

    #[test]
    fn empty_inputs_rejected() {
        let mesh = build_box_mesh(2, &[1.0, 1.0], &[2, 2]).unwrap();
        let y = NodalField::identity(&mesh);
        assert!(deformed_volume(&mesh, &y, 0.0).is_err());
        assert!(injectivity_report(&mesh, &y, 0).is_err());
    }
}
