//! Simplicial meshes of polygonal/polyhedral reference domains in
//! dimension 2 or 3.
//!
//! Elements are triangles/tetrahedra with positively oriented node
//! tuples. Construction precomputes per-element volumes and P1 shape
//! gradients, plus the full facet connectivity (interior facets with
//! their two adjacent elements, boundary facets with outward normals
//! and integer tags). Meshes are immutable after construction and all
//! queries are pure.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::algebra::{MatN, VecN};
use crate::{Error, Result};

/// A facet shared by exactly two elements.
///
/// `normal` is the unit normal oriented from `left` into `right`.
#[derive(Clone, Debug)]
pub struct InteriorFacet {
    pub nodes: [usize; 3],
    pub left: usize,
    pub right: usize,
    pub normal: VecN,
    pub measure: f64,
}

/// A facet on the domain boundary, with outward unit normal.
#[derive(Clone, Debug)]
pub struct BoundaryFacet {
    pub nodes: [usize; 3],
    pub element: usize,
    pub normal: VecN,
    pub measure: f64,
    pub tag: u32,
}

/// Conforming simplicial mesh with facet connectivity.
#[derive(Clone, Debug)]
pub struct SimplicialMesh {
    dim: usize,
    nodes: Vec<VecN>,
    elem_nodes: Vec<usize>,
    volumes: Vec<f64>,
    shape_grads: Vec<VecN>,
    interior_facets: Vec<InteriorFacet>,
    boundary_facets: Vec<BoundaryFacet>,
    neighbors: Vec<Vec<usize>>,
}

impl SimplicialMesh {
    /// Build from raw nodes and positively oriented connectivity.
    pub fn from_raw(
        dim: usize,
        nodes: Vec<VecN>,
        connectivity: Vec<usize>,
        boundary_tags: &BTreeMap<Vec<usize>, u32>,
    ) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::invalid_argument(format!(
                "mesh dimension must be 2 or 3, got {dim}"
            )));
        }
        let k = dim + 1;
        if !connectivity.len().is_multiple_of(k) {
            return Err(Error::invalid_argument(format!(
                "connectivity length {} is not a multiple of {k}",
                connectivity.len()
            )));
        }
        let n_elems = connectivity.len() / k;
        if let Some(&bad) = connectivity.iter().find(|&&v| v >= nodes.len()) {
            return Err(Error::invalid_argument(format!(
                "element references node {bad} but the mesh has {} nodes",
                nodes.len()
            )));
        }

        let mut volumes = Vec::with_capacity(n_elems);
        let mut shape_grads = Vec::with_capacity(n_elems * k);
        for e in 0..n_elems {
            let en = &connectivity[e * k..(e + 1) * k];
            let x0 = nodes[en[0]];
            let mut d = MatN::zeros(dim);
            for j in 0..dim {
                let col = nodes[en[j + 1]] - x0;
                for i in 0..dim {
                    d[(i, j)] = col[i];
                }
            }
            let det = d.det();
            let fact = if dim == 2 { 2.0 } else { 6.0 };
            let vol = det / fact;
            if !(vol > 0.0) {
                return Err(Error::degenerate_geometry(format!(
                    "element {e} has non-positive reference volume {vol:e}"
                )));
            }
            volumes.push(vol);
            // Barycentric gradients: rows of D^{-1} for nodes 1..n, and
            // the zeroth gradient closes the partition of unity.
            let dinv = d.inverse();
            let mut g0 = VecN::zeros(dim);
            let mut grads = vec![VecN::zeros(dim); k];
            for i in 0..dim {
                let mut gi = VecN::zeros(dim);
                for j in 0..dim {
                    gi[j] = dinv[(i, j)];
                }
                grads[i + 1] = gi;
                g0 = g0 - gi;
            }
            grads[0] = g0;
            shape_grads.extend_from_slice(&grads);
        }

        // Facet connectivity, keyed by the sorted node tuple. BTreeMap
        // keeps the facet ordering deterministic across runs.
        let mut facet_map: BTreeMap<Vec<usize>, Vec<(usize, usize)>> = BTreeMap::new();
        for e in 0..n_elems {
            let en = &connectivity[e * k..(e + 1) * k];
            for opposite in 0..k {
                let mut fnodes: Vec<usize> = en
                    .iter()
                    .enumerate()
                    .filter(|&(i, _)| i != opposite)
                    .map(|(_, &v)| v)
                    .collect();
                fnodes.sort_unstable();
                facet_map.entry(fnodes).or_default().push((e, opposite));
            }
        }

        let mut interior = Vec::new();
        let mut boundary = Vec::new();
        let mut neighbors = vec![Vec::new(); n_elems];
        for (fnodes, sides) in &facet_map {
            match sides.len() {
                1 => {
                    let (e, opposite) = sides[0];
                    let (normal, measure) =
                        facet_normal(dim, &nodes, &connectivity[e * k..(e + 1) * k], opposite);
                    let tag = match boundary_tags.get(fnodes) {
                        Some(&t) => t,
                        None if boundary_tags.is_empty() => 0,
                        None => {
                            return Err(Error::invalid_argument(format!(
                                "boundary facet {fnodes:?} has no tag record"
                            )))
                        }
                    };
                    boundary.push(BoundaryFacet {
                        nodes: pack3(fnodes),
                        element: e,
                        normal,
                        measure,
                        tag,
                    });
                }
                2 => {
                    let (mut a, mut b) = (sides[0], sides[1]);
                    if a.0 > b.0 {
                        std::mem::swap(&mut a, &mut b);
                    }
                    let (normal, measure) =
                        facet_normal(dim, &nodes, &connectivity[a.0 * k..(a.0 + 1) * k], a.1);
                    interior.push(InteriorFacet {
                        nodes: pack3(fnodes),
                        left: a.0,
                        right: b.0,
                        normal,
                        measure,
                    });
                    neighbors[a.0].push(b.0);
                    neighbors[b.0].push(a.0);
                }
                more => {
                    return Err(Error::invalid_argument(format!(
                        "facet {fnodes:?} is shared by {more} elements; mesh is not manifold"
                    )))
                }
            }
        }

        Ok(SimplicialMesh {
            dim,
            nodes,
            elem_nodes: connectivity,
            volumes,
            shape_grads,
            interior_facets: interior,
            boundary_facets: boundary,
            neighbors,
        })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    #[inline]
    pub fn n_elements(&self) -> usize {
        self.volumes.len()
    }

    #[inline]
    pub fn node(&self, i: usize) -> VecN {
        self.nodes[i]
    }

    #[inline]
    pub fn element(&self, e: usize) -> &[usize] {
        let k = self.dim + 1;
        &self.elem_nodes[e * k..(e + 1) * k]
    }

    #[inline]
    pub fn volume(&self, e: usize) -> f64 {
        self.volumes[e]
    }

    /// P1 shape-function gradients of the element, one per local node.
    #[inline]
    pub fn shape_gradients(&self, e: usize) -> &[VecN] {
        let k = self.dim + 1;
        &self.shape_grads[e * k..(e + 1) * k]
    }

    pub fn interior_facets(&self) -> &[InteriorFacet] {
        &self.interior_facets
    }

    pub fn boundary_facets(&self) -> &[BoundaryFacet] {
        &self.boundary_facets
    }

    /// Elements sharing a facet with `e`.
    pub fn neighbors(&self, e: usize) -> &[usize] {
        &self.neighbors[e]
    }

    pub fn total_volume(&self) -> f64 {
        self.volumes.iter().sum()
    }

    pub fn centroid(&self, e: usize) -> VecN {
        let en = self.element(e);
        let mut c = VecN::zeros(self.dim);
        for &v in en {
            c = c + self.nodes[v];
        }
        c.scale(1.0 / en.len() as f64)
    }

    /// Indices of all nodes lying on tagged boundary facets.
    ///
    /// `tags = None` selects the whole boundary.
    pub fn boundary_nodes(&self, tags: Option<&[u32]>) -> Vec<usize> {
        let mut mask = vec![false; self.n_nodes()];
        for f in &self.boundary_facets {
            let selected = match tags {
                None => true,
                Some(ts) => ts.contains(&f.tag),
            };
            if selected {
                for &v in &f.nodes[..self.dim] {
                    mask[v] = true;
                }
            }
        }
        (0..self.n_nodes()).filter(|&i| mask[i]).collect()
    }
}

fn pack3(nodes: &[usize]) -> [usize; 3] {
    let mut out = [usize::MAX; 3];
    out[..nodes.len()].copy_from_slice(nodes);
    out
}

/// Unit outward normal and measure of the facet opposite local node
/// `opposite` of the given element.
fn facet_normal(dim: usize, nodes: &[VecN], elem: &[usize], opposite: usize) -> (VecN, f64) {
    let fnodes: Vec<usize> = elem
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != opposite)
        .map(|(_, &v)| v)
        .collect();
    let (dir, measure) = match dim {
        2 => {
            let e = nodes[fnodes[1]] - nodes[fnodes[0]];
            (e.perp(), e.norm())
        }
        _ => {
            let e1 = nodes[fnodes[1]] - nodes[fnodes[0]];
            let e2 = nodes[fnodes[2]] - nodes[fnodes[0]];
            let c = e1.cross(&e2);
            (c, 0.5 * c.norm())
        }
    };
    let mut normal = dir.normalized();
    let away = nodes[fnodes[0]] - nodes[elem[opposite]];
    if normal.dot(&away) < 0.0 {
        normal = -normal;
    }
    (normal, measure)
}

/// Structured simplicial mesh of an axis-aligned box.
///
/// 2D cells split into two triangles along the (min, max) diagonal;
/// 3D cells into six tetrahedra (Kuhn triangulation), which is
/// conforming across neighboring cells. Boundary facets are tagged
/// `2*axis` on the low face and `2*axis + 1` on the high face.
pub fn build_box_mesh(dim: usize, lengths: &[f64], resolution: &[usize]) -> Result<SimplicialMesh> {
    if dim != 2 && dim != 3 {
        return Err(Error::invalid_argument(format!(
            "box mesh dimension must be 2 or 3, got {dim}"
        )));
    }
    if lengths.len() != dim || resolution.len() != dim {
        return Err(Error::invalid_argument(
            "lengths and resolution must have one entry per dimension".into(),
        ));
    }
    if lengths.iter().any(|&l| !(l > 0.0)) {
        return Err(Error::invalid_argument("box lengths must be positive".into()));
    }
    if resolution.contains(&0) {
        return Err(Error::invalid_argument("resolution must be at least 1 per axis".into()));
    }

    let h: Vec<f64> = (0..dim).map(|i| lengths[i] / resolution[i] as f64).collect();
    let np: Vec<usize> = resolution.iter().map(|&r| r + 1).collect();

    let mut nodes = Vec::new();
    let mut connectivity = Vec::new();
    if dim == 2 {
        let idx = |i: usize, j: usize| j * np[0] + i;
        for j in 0..np[1] {
            for i in 0..np[0] {
                nodes.push(VecN::new2(i as f64 * h[0], j as f64 * h[1]));
            }
        }
        for j in 0..resolution[1] {
            for i in 0..resolution[0] {
                let (v00, v10) = (idx(i, j), idx(i + 1, j));
                let (v01, v11) = (idx(i, j + 1), idx(i + 1, j + 1));
                connectivity.extend_from_slice(&[v00, v10, v11]);
                connectivity.extend_from_slice(&[v00, v11, v01]);
            }
        }
    } else {
        let idx = |i: usize, j: usize, k: usize| (k * np[1] + j) * np[0] + i;
        for k in 0..np[2] {
            for j in 0..np[1] {
                for i in 0..np[0] {
                    nodes.push(VecN::new3(i as f64 * h[0], j as f64 * h[1], k as f64 * h[2]));
                }
            }
        }
        // Kuhn triangulation: one tet per permutation of the axes,
        // walking from the low corner to the high corner.
        const PERMS: [[usize; 3]; 6] = [
            [0, 1, 2],
            [0, 2, 1],
            [1, 0, 2],
            [1, 2, 0],
            [2, 0, 1],
            [2, 1, 0],
        ];
        for k in 0..resolution[2] {
            for j in 0..resolution[1] {
                for i in 0..resolution[0] {
                    for perm in &PERMS {
                        let mut corner = [i, j, k];
                        let mut tet = [idx(corner[0], corner[1], corner[2]), 0, 0, 0];
                        for (step, &axis) in perm.iter().enumerate() {
                            corner[axis] += 1;
                            tet[step + 1] = idx(corner[0], corner[1], corner[2]);
                        }
                        if perm_sign(perm) < 0 {
                            tet.swap(2, 3);
                        }
                        connectivity.extend_from_slice(&tet);
                    }
                }
            }
        }
    }

    // Tag boundary facets geometrically by the box face they lie on.
    let mut tags = BTreeMap::new();
    collect_box_tags(dim, &nodes, &connectivity, lengths, &mut tags);
    SimplicialMesh::from_raw(dim, nodes, connectivity, &tags)
}

fn perm_sign(p: &[usize; 3]) -> i32 {
    let mut sign = 1;
    for i in 0..3 {
        for j in (i + 1)..3 {
            if p[i] > p[j] {
                sign = -sign;
            }
        }
    }
    sign
}

fn collect_box_tags(
    dim: usize,
    nodes: &[VecN],
    connectivity: &[usize],
    lengths: &[f64],
    tags: &mut BTreeMap<Vec<usize>, u32>,
) {
    let k = dim + 1;
    let tol = 1e-12 * lengths.iter().fold(f64::MIN, |a, &b| a.max(b));
    let mut seen: BTreeMap<Vec<usize>, usize> = BTreeMap::new();
    for e in 0..connectivity.len() / k {
        let en = &connectivity[e * k..(e + 1) * k];
        for opposite in 0..k {
            let mut f: Vec<usize> = en
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != opposite)
                .map(|(_, &v)| v)
                .collect();
            f.sort_unstable();
            *seen.entry(f).or_insert(0) += 1;
        }
    }
    for (f, count) in seen {
        if count != 1 {
            continue;
        }
        for axis in 0..dim {
            if f.iter().all(|&v| nodes[v][axis].abs() <= tol) {
                tags.insert(f.clone(), (2 * axis) as u32);
                break;
            }
            if f.iter().all(|&v| (nodes[v][axis] - lengths[axis]).abs() <= tol) {
                tags.insert(f.clone(), (2 * axis + 1) as u32);
                break;
            }
        }
    }
}

/// Scalar or vector nodal data attached to a mesh.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FieldKind {
    Scalar,
    Vector,
}

/// Per-node values; vectors are stored interleaved.
#[derive(Clone, Debug, PartialEq)]
pub struct NodalField {
    kind: FieldKind,
    dim: usize,
    data: Vec<f64>,
}

impl NodalField {
    pub fn scalar(mesh: &SimplicialMesh, f: impl Fn(&VecN) -> f64) -> Self {
        let data = (0..mesh.n_nodes()).map(|i| f(&mesh.node(i))).collect();
        NodalField { kind: FieldKind::Scalar, dim: mesh.dim(), data }
    }

    pub fn vector(mesh: &SimplicialMesh, f: impl Fn(&VecN) -> VecN) -> Self {
        let dim = mesh.dim();
        let mut data = Vec::with_capacity(mesh.n_nodes() * dim);
        for i in 0..mesh.n_nodes() {
            let v = f(&mesh.node(i));
            data.extend_from_slice(v.as_slice());
        }
        NodalField { kind: FieldKind::Vector, dim, data }
    }

    /// The identity deformation: node coordinates as a vector field.
    pub fn identity(mesh: &SimplicialMesh) -> Self {
        Self::vector(mesh, |x| *x)
    }

    pub fn scalar_from_values(mesh: &SimplicialMesh, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.n_nodes() {
            return Err(Error::invalid_argument(format!(
                "field has {} values for {} nodes",
                values.len(),
                mesh.n_nodes()
            )));
        }
        Ok(NodalField { kind: FieldKind::Scalar, dim: mesh.dim(), data: values })
    }

    pub fn vector_from_values(mesh: &SimplicialMesh, values: Vec<VecN>) -> Result<Self> {
        if values.len() != mesh.n_nodes() {
            return Err(Error::invalid_argument(format!(
                "field has {} values for {} nodes",
                values.len(),
                mesh.n_nodes()
            )));
        }
        let dim = mesh.dim();
        let mut data = Vec::with_capacity(values.len() * dim);
        for v in values {
            data.extend_from_slice(v.as_slice());
        }
        Ok(NodalField { kind: FieldKind::Vector, dim, data })
    }

    #[inline]
    pub fn kind(&self) -> FieldKind {
        self.kind
    }

    pub fn node_count(&self) -> usize {
        match self.kind {
            FieldKind::Scalar => self.data.len(),
            FieldKind::Vector => self.data.len() / self.dim,
        }
    }

    #[inline]
    pub fn scalar_at(&self, i: usize) -> f64 {
        debug_assert_eq!(self.kind, FieldKind::Scalar);
        self.data[i]
    }

    #[inline]
    pub fn vector_at(&self, i: usize) -> VecN {
        debug_assert_eq!(self.kind, FieldKind::Vector);
        VecN::from_slice(&self.data[i * self.dim..(i + 1) * self.dim])
    }

    pub fn values(&self) -> &[f64] {
        &self.data
    }

    /// Deformed positions as a plain vector, one entry per node.
    pub fn vectors(&self) -> Vec<VecN> {
        (0..self.node_count()).map(|i| self.vector_at(i)).collect()
    }
}

/// Gradient of the P1 interpolant on one element.
#[derive(Clone, Copy, Debug)]
pub enum ElementGradient {
    Scalar(VecN),
    Matrix(MatN),
}

/// Exact gradient of the affine interpolant of `field` on element `e`.
///
/// Scalar fields yield the gradient vector; vector fields yield the
/// Jacobian `F` with `F[(a, b)] = d field_a / d x_b`.
pub fn element_gradient(mesh: &SimplicialMesh, field: &NodalField, e: usize) -> ElementGradient {
    match field.kind() {
        FieldKind::Scalar => ElementGradient::Scalar(element_gradient_scalar(mesh, field.values(), e)),
        FieldKind::Vector => ElementGradient::Matrix(element_gradient_vector(mesh, field, e)),
    }
}

pub fn element_gradient_scalar(mesh: &SimplicialMesh, values: &[f64], e: usize) -> VecN {
    let en = mesh.element(e);
    let grads = mesh.shape_gradients(e);
    let mut g = VecN::zeros(mesh.dim());
    for (local, &v) in en.iter().enumerate() {
        g = g + grads[local].scale(values[v]);
    }
    g
}

pub fn element_gradient_vector(mesh: &SimplicialMesh, field: &NodalField, e: usize) -> MatN {
    let en = mesh.element(e);
    let grads = mesh.shape_gradients(e);
    let dim = mesh.dim();
    let mut f = MatN::zeros(dim);
    for (local, &v) in en.iter().enumerate() {
        let y = field.vector_at(v);
        for a in 0..dim {
            for b in 0..dim {
                f[(a, b)] += y[a] * grads[local][b];
            }
        }
    }
    f
}

/// Sum of `value * element_volume`, in ascending element order.
pub fn integrate_cellwise(mesh: &SimplicialMesh, per_element: &[f64]) -> Result<f64> {
    if per_element.len() != mesh.n_elements() {
        return Err(Error::invalid_argument(format!(
            "got {} values for {} elements",
            per_element.len(),
            mesh.n_elements()
        )));
    }
    Ok(per_element
        .iter()
        .zip(&mesh.volumes)
        .map(|(v, vol)| v * vol)
        .sum())
}

/// Subset of elements marking the phase-1 region.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CellSelection {
    mask: Vec<bool>,
}

impl CellSelection {
    pub fn none(mesh: &SimplicialMesh) -> Self {
        CellSelection { mask: vec![false; mesh.n_elements()] }
    }

    pub fn all(mesh: &SimplicialMesh) -> Self {
        CellSelection { mask: vec![true; mesh.n_elements()] }
    }

    pub fn from_mask(mesh: &SimplicialMesh, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != mesh.n_elements() {
            return Err(Error::invalid_argument(format!(
                "selection mask has {} entries for {} elements",
                mask.len(),
                mesh.n_elements()
            )));
        }
        Ok(CellSelection { mask })
    }

    /// Select elements whose centroid satisfies the predicate.
    pub fn from_predicate(mesh: &SimplicialMesh, pred: impl Fn(&VecN) -> bool) -> Self {
        let mask = (0..mesh.n_elements()).map(|e| pred(&mesh.centroid(e))).collect();
        CellSelection { mask }
    }

    #[inline]
    pub fn contains(&self, e: usize) -> bool {
        self.mask[e]
    }

    pub fn len(&self) -> usize {
        self.mask.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mask.iter().all(|&m| !m)
    }

    pub fn is_all(&self) -> bool {
        self.mask.iter().all(|&m| m)
    }

    pub fn count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn complement(&self) -> Self {
        CellSelection { mask: self.mask.iter().map(|&m| !m).collect() }
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.mask.iter().enumerate().filter(|(_, &m)| m).map(|(e, _)| e)
    }
}

/// Serialize a mesh with named nodal fields to the line-oriented
/// snapshot format. Finite values round-trip bit-identically.
pub fn write_snapshot(mesh: &SimplicialMesh, fields: &[(&str, &NodalField)]) -> String {
    let mut s = String::new();
    let dim = mesh.dim();
    writeln!(s, "eulastic-mesh 1").unwrap();
    writeln!(s, "dim {dim}").unwrap();
    writeln!(s, "nodes {}", mesh.n_nodes()).unwrap();
    writeln!(s, "elements {}", mesh.n_elements()).unwrap();
    writeln!(s, "boundary-facets {}", mesh.boundary_facets().len()).unwrap();
    writeln!(s, "fields {}", fields.len()).unwrap();
    for i in 0..mesh.n_nodes() {
        let x = mesh.node(i);
        s.push('n');
        for c in x.as_slice() {
            write!(s, " {c}").unwrap();
        }
        s.push('\n');
    }
    let k = dim + 1;
    for e in 0..mesh.n_elements() {
        s.push('e');
        for &v in mesh.element(e) {
            write!(s, " {v}").unwrap();
        }
        s.push('\n');
        debug_assert_eq!(mesh.element(e).len(), k);
    }
    for f in mesh.boundary_facets() {
        write!(s, "b {}", f.tag).unwrap();
        for &v in &f.nodes[..dim] {
            write!(s, " {v}").unwrap();
        }
        s.push('\n');
    }
    for (name, field) in fields {
        let kind = match field.kind() {
            FieldKind::Scalar => "scalar",
            FieldKind::Vector => "vector",
        };
        writeln!(s, "field {name} {kind}").unwrap();
        for i in 0..field.node_count() {
            s.push('v');
            match field.kind() {
                FieldKind::Scalar => write!(s, " {}", field.scalar_at(i)).unwrap(),
                FieldKind::Vector => {
                    for c in field.vector_at(i).as_slice() {
                        write!(s, " {c}").unwrap();
                    }
                }
            }
            s.push('\n');
        }
    }
    s.push_str("end\n");
    s
}

/// Parse the snapshot format produced by [`write_snapshot`].
pub fn read_snapshot(text: &str) -> Result<(SimplicialMesh, Vec<(String, NodalField)>)> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| {
        let t = l.trim();
        !t.is_empty() && !t.starts_with('#')
    });
    let bad = |line: usize, msg: String| Error::invalid_argument(format!("line {}: {msg}", line + 1));

    let mut next = || lines.next().ok_or_else(|| Error::invalid_argument("unexpected end of snapshot".into()));
    let (ln, header) = next()?;
    if header.trim() != "eulastic-mesh 1" {
        return Err(bad(ln, format!("expected 'eulastic-mesh 1' header, got '{header}'")));
    }
    let mut read_kv = |key: &str| -> Result<usize> {
        let (ln, line) = next()?;
        let mut it = line.split_whitespace();
        let k = it.next().unwrap_or("");
        if k != key {
            return Err(bad(ln, format!("expected '{key} <count>', got '{line}'")));
        }
        it.next()
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| bad(ln, format!("invalid count in '{line}'")))
    };
    let dim = read_kv("dim")?;
    let n_nodes = read_kv("nodes")?;
    let n_elems = read_kv("elements")?;
    let n_bnd = read_kv("boundary-facets")?;
    let n_fields = read_kv("fields")?;

    let mut nodes = Vec::with_capacity(n_nodes);
    for _ in 0..n_nodes {
        let (ln, line) = next()?;
        let mut it = line.split_whitespace();
        if it.next() != Some("n") {
            return Err(bad(ln, format!("expected node line, got '{line}'")));
        }
        let coords: Vec<f64> = it.map(|t| t.parse().unwrap_or(f64::NAN)).collect();
        if coords.len() != dim || coords.iter().any(|c| c.is_nan()) {
            return Err(bad(ln, format!("invalid node coordinates '{line}'")));
        }
        nodes.push(VecN::from_slice(&coords));
    }
    let mut connectivity = Vec::with_capacity(n_elems * (dim + 1));
    for _ in 0..n_elems {
        let (ln, line) = next()?;
        let mut it = line.split_whitespace();
        if it.next() != Some("e") {
            return Err(bad(ln, format!("expected element line, got '{line}'")));
        }
        let verts: Vec<usize> = it.filter_map(|t| t.parse().ok()).collect();
        if verts.len() != dim + 1 {
            return Err(bad(ln, format!("element needs {} nodes: '{line}'", dim + 1)));
        }
        connectivity.extend_from_slice(&verts);
    }
    let mut tags = BTreeMap::new();
    for _ in 0..n_bnd {
        let (ln, line) = next()?;
        let mut it = line.split_whitespace();
        if it.next() != Some("b") {
            return Err(bad(ln, format!("expected boundary line, got '{line}'")));
        }
        let tag: u32 = it
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| bad(ln, format!("invalid boundary tag '{line}'")))?;
        let mut fnodes: Vec<usize> = it.filter_map(|t| t.parse().ok()).collect();
        if fnodes.len() != dim {
            return Err(bad(ln, format!("boundary facet needs {dim} nodes: '{line}'")));
        }
        fnodes.sort_unstable();
        tags.insert(fnodes, tag);
    }
    let mesh = SimplicialMesh::from_raw(dim, nodes, connectivity, &tags)?;

    let mut fields = Vec::new();
    for _ in 0..n_fields {
        let (ln, line) = next()?;
        let mut it = line.split_whitespace();
        if it.next() != Some("field") {
            return Err(bad(ln, format!("expected field header, got '{line}'")));
        }
        let name = it
            .next()
            .ok_or_else(|| bad(ln, "field header needs a name".into()))?
            .to_string();
        let kind = match it.next() {
            Some("scalar") => FieldKind::Scalar,
            Some("vector") => FieldKind::Vector,
            other => return Err(bad(ln, format!("unknown field kind {other:?}"))),
        };
        let mut scalars = Vec::new();
        let mut vectors = Vec::new();
        for _ in 0..n_nodes {
            let (ln, line) = next()?;
            let mut it = line.split_whitespace();
            if it.next() != Some("v") {
                return Err(bad(ln, format!("expected value line, got '{line}'")));
            }
            let vals: Vec<f64> = it.map(|t| t.parse().unwrap_or(f64::NAN)).collect();
            match kind {
                FieldKind::Scalar if vals.len() == 1 && !vals[0].is_nan() => scalars.push(vals[0]),
                FieldKind::Vector if vals.len() == dim && !vals.iter().any(|v| v.is_nan()) => {
                    vectors.push(VecN::from_slice(&vals))
                }
                _ => return Err(bad(ln, format!("invalid value line '{line}'"))),
            }
        }
        let field = match kind {
            FieldKind::Scalar => NodalField::scalar_from_values(&mesh, scalars)?,
            FieldKind::Vector => NodalField::vector_from_values(&mesh, vectors)?,
        };
        fields.push((name, field));
    }
    let (ln, tail) = next()?;
    if tail.trim() != "end" {
        return Err(bad(ln, format!("expected 'end', got '{tail}'")));
    }
    Ok((mesh, fields))
}
