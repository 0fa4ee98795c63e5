//! Run configuration: a flat, line-oriented key-value format with
//! sections.
//!
//! ```text
//! [mesh]
//! dim = 2
//! lengths = 1 1
//! resolution = 32 32
//!
//! [model]
//! gamma = 1.0
//! p = 4
//! q = 2
//! phase0.d = 10
//!
//! [boundary]
//! map = stretch
//! lambda = 2.0
//! ```
//!
//! Unknown keys are rejected with the offending line number, so typos
//! cannot silently fall back to defaults. [`RunConfig::echo`] renders
//! the fully resolved configuration; every output file starts with it.

use std::collections::BTreeMap;

use crate::algebra::{MatN, VecN};
use crate::energy::{BulkModel, DoubleWell, EnergyModel, PhaseParams};
use crate::mesh::{build_box_mesh, read_snapshot, CellSelection, SimplicialMesh};
use crate::optimize::{MinimizeConfig, Schedule};
use crate::{Error, Result};

/// Mesh source: structured box builder or snapshot file.
#[derive(Clone, Debug)]
pub enum MeshSpec {
    Box { dim: usize, lengths: Vec<f64>, resolution: Vec<usize> },
    File(String),
}

/// Named analytic deformation family for boundary data and states.
#[derive(Clone, Debug)]
pub enum BoundaryMap {
    Identity,
    /// `diag(lambda, 1, ...)`.
    Stretch(f64),
    Affine { matrix: MatN, offset: VecN },
    /// Annulus wrap `x -> (r0 + x_1)(cos(rate x_2), sin(rate x_2))`; 2D.
    Wrap { r0: f64, rate: f64 },
}

impl BoundaryMap {
    pub fn apply(&self, x: &VecN) -> VecN {
        match self {
            BoundaryMap::Identity => *x,
            BoundaryMap::Stretch(lam) => {
                let mut v = *x;
                v[0] *= *lam;
                v
            }
            BoundaryMap::Affine { matrix, offset } => matrix.matvec(x) + *offset,
            BoundaryMap::Wrap { r0, rate } => {
                let r = r0 + x[0];
                let phi = rate * x[1];
                VecN::new2(r * phi.cos(), r * phi.sin())
            }
        }
    }
}

/// Initialization of the nodal phase field.
#[derive(Clone, Debug)]
pub enum PhaseInit {
    Constant(f64),
    Noisy { mean: f64, amplitude: f64 },
    /// 1 inside the slab `from < x_axis < to`, 0 outside, plus noise.
    Band { axis: usize, from: f64, to: f64, amplitude: f64 },
    /// Nodal indicator of the sharp set.
    Indicator,
    /// Optimal transition profile around the sharp set's interface.
    Recovery,
}

/// Sharp phase region as a union of elements.
#[derive(Clone, Debug)]
pub enum SetSpec {
    None,
    All,
    /// Elements with centroid `x_axis < at`.
    Half { axis: usize, at: f64 },
    /// Intersection of two half constraints.
    Quarter { at: [f64; 2] },
    Band { axis: usize, from: f64, to: f64 },
}

impl SetSpec {
    pub fn build(&self, mesh: &SimplicialMesh) -> CellSelection {
        match self {
            SetSpec::None => CellSelection::none(mesh),
            SetSpec::All => CellSelection::all(mesh),
            SetSpec::Half { axis, at } => {
                CellSelection::from_predicate(mesh, |c| c[*axis] < *at)
            }
            SetSpec::Quarter { at } => {
                let at = *at;
                CellSelection::from_predicate(mesh, move |c| c[0] < at[0] && c[1] < at[1])
            }
            SetSpec::Band { axis, from, to } => {
                let (axis, from, to) = (*axis, *from, *to);
                CellSelection::from_predicate(mesh, move |c| c[axis] > from && c[axis] < to)
            }
        }
    }
}

/// Fully resolved run configuration.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub mesh: MeshSpec,
    pub gamma: f64,
    pub p: f64,
    pub q: f64,
    pub phase_params: [Option<PhaseParams>; 2],
    pub boundary: BoundaryMap,
    /// Dirichlet boundary tags; `None` fixes the whole boundary.
    pub dirichlet_tags: Option<Vec<u32>>,
    pub phase_init: PhaseInit,
    pub set_spec: SetSpec,
    pub minimize: MinimizeConfig,
    /// Strictly decreasing continuation schedule; empty for a single
    /// solve at `minimize.eps`.
    pub eps_schedule: Vec<f64>,
    pub sweep_eps: Vec<f64>,
    pub slice_count: usize,
    /// Rasterization pitch for admissibility diagnostics.
    pub diag_pitch: f64,
    pub diag_samples: usize,
    pub quad_degree: usize,
    pub out_dir: String,
    pub seed: u64,
    pub threads: usize,
}

struct RawConfig {
    entries: BTreeMap<String, (usize, String)>,
    used: std::cell::RefCell<std::collections::BTreeSet<String>>,
}

impl RawConfig {
    fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        let mut section = String::new();
        for (idx, raw_line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = match raw_line.find('#') {
                Some(p) => &raw_line[..p],
                None => raw_line,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name.strip_suffix(']').ok_or_else(|| {
                    Error::Config(format!("line {line_no}: malformed section header '{line}'"))
                })?;
                section = name.trim().to_string();
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {line_no}: expected 'key = value', got '{line}'"))
            })?;
            let key = key.trim();
            if key.is_empty() {
                return Err(Error::Config(format!("line {line_no}: empty key")));
            }
            let full = if section.is_empty() {
                key.to_string()
            } else {
                format!("{section}.{key}")
            };
            if entries.contains_key(&full) {
                return Err(Error::Config(format!("line {line_no}: duplicate key '{full}'")));
            }
            entries.insert(full, (line_no, value.trim().to_string()));
        }
        Ok(RawConfig { entries, used: Default::default() })
    }

    fn mark(&self, key: &str) {
        self.used.borrow_mut().insert(key.to_string());
    }

    fn raw(&self, key: &str) -> Option<&(usize, String)> {
        let v = self.entries.get(key);
        if v.is_some() {
            self.mark(key);
        }
        v
    }

    fn str_or(&self, key: &str, default: &str) -> String {
        self.raw(key).map(|(_, v)| v.clone()).unwrap_or_else(|| default.to_string())
    }

    fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        match self.raw(key) {
            None => Ok(default),
            Some((line, v)) => v.parse().map_err(|_| {
                Error::Config(format!("line {line}: {key}: expected a number, got '{v}'"))
            }),
        }
    }

    fn usize_or(&self, key: &str, default: usize) -> Result<usize> {
        match self.raw(key) {
            None => Ok(default),
            Some((line, v)) => v.parse().map_err(|_| {
                Error::Config(format!("line {line}: {key}: expected a nonnegative integer, got '{v}'"))
            }),
        }
    }

    fn u64_or(&self, key: &str, default: u64) -> Result<u64> {
        match self.raw(key) {
            None => Ok(default),
            Some((line, v)) => v.parse().map_err(|_| {
                Error::Config(format!("line {line}: {key}: expected an integer, got '{v}'"))
            }),
        }
    }

    fn bool_or(&self, key: &str, default: bool) -> Result<bool> {
        match self.raw(key) {
            None => Ok(default),
            Some((line, v)) => match v.as_str() {
                "true" | "yes" | "1" => Ok(true),
                "false" | "no" | "0" => Ok(false),
                other => Err(Error::Config(format!(
                    "line {line}: {key}: expected true/false, got '{other}'"
                ))),
            },
        }
    }

    fn f64_list(&self, key: &str) -> Result<Option<Vec<f64>>> {
        match self.raw(key) {
            None => Ok(None),
            Some((line, v)) => {
                let mut out = Vec::new();
                for tok in v.split_whitespace() {
                    out.push(tok.parse().map_err(|_| {
                        Error::Config(format!(
                            "line {line}: {key}: expected numbers, got '{tok}'"
                        ))
                    })?);
                }
                Ok(Some(out))
            }
        }
    }

    fn usize_list(&self, key: &str) -> Result<Option<Vec<usize>>> {
        match self.raw(key) {
            None => Ok(None),
            Some((line, v)) => {
                let mut out = Vec::new();
                for tok in v.split_whitespace() {
                    out.push(tok.parse().map_err(|_| {
                        Error::Config(format!(
                            "line {line}: {key}: expected integers, got '{tok}'"
                        ))
                    })?);
                }
                Ok(Some(out))
            }
        }
    }

    fn reject_unknown(&self) -> Result<()> {
        let used = self.used.borrow();
        for (key, (line, _)) in &self.entries {
            if !used.contains(key) {
                return Err(Error::Config(format!("line {line}: unknown key '{key}'")));
            }
        }
        Ok(())
    }
}

fn phase_params(
    raw: &RawConfig,
    which: usize,
    dim: usize,
    p: f64,
) -> Result<Option<PhaseParams>> {
    let prefix = format!("model.phase{which}");
    let default = PhaseParams::well_at_identity(dim, p, 1.0, 0.25, 10.0);
    let keys = ["a", "b", "c", "d", "well_det"];
    let any = keys.iter().any(|k| raw.entries.contains_key(&format!("{prefix}.{k}")));
    let a = raw.f64_or(&format!("{prefix}.a"), default.a)?;
    let b = raw.f64_or(&format!("{prefix}.b"), default.b)?;
    let c = raw.f64_or(&format!("{prefix}.c"), default.c)?;
    let d = raw.f64_or(&format!("{prefix}.d"), default.d)?;
    let well_det = raw.f64_or(&format!("{prefix}.well_det"), default.well_det)?;
    if any {
        Ok(Some(PhaseParams { a, b, c, d, well_det }))
    } else {
        Ok(None)
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<RunConfig> {
        let raw = RawConfig::parse(text)?;

        // mesh
        let mesh = if raw.entries.contains_key("mesh.file") {
            let file = raw.str_or("mesh.file", "");
            MeshSpec::File(file)
        } else {
            let dim = raw.usize_or("mesh.dim", 2)?;
            if dim != 2 && dim != 3 {
                return Err(Error::Config(format!("mesh.dim must be 2 or 3, got {dim}")));
            }
            let lengths = raw.f64_list("mesh.lengths")?.unwrap_or_else(|| vec![1.0; dim]);
            let resolution = raw.usize_list("mesh.resolution")?.unwrap_or_else(|| vec![16; dim]);
            if lengths.len() != dim || resolution.len() != dim {
                return Err(Error::Config(
                    "mesh.lengths and mesh.resolution must have one entry per dimension".into(),
                ));
            }
            MeshSpec::Box { dim, lengths, resolution }
        };
        let dim_hint = match &mesh {
            MeshSpec::Box { dim, .. } => *dim,
            MeshSpec::File(_) => raw.usize_or("mesh.dim", 2)?,
        };

        // model
        let gamma = raw.f64_or("model.gamma", 1.0)?;
        let p = raw.f64_or("model.p", 4.0)?;
        let q = raw.f64_or("model.q", if dim_hint == 3 { 2.5 } else { 2.0 })?;
        let phase0 = phase_params(&raw, 0, dim_hint, p)?;
        let phase1 = phase_params(&raw, 1, dim_hint, p)?;

        // boundary map
        let map_name = raw.str_or("boundary.map", "identity");
        let boundary = match map_name.as_str() {
            "identity" => BoundaryMap::Identity,
            "stretch" => BoundaryMap::Stretch(raw.f64_or("boundary.lambda", 2.0)?),
            "affine" => {
                let m = raw.f64_list("boundary.matrix")?.ok_or_else(|| {
                    Error::Config("boundary.matrix is required for the affine map".into())
                })?;
                if m.len() != dim_hint * dim_hint {
                    return Err(Error::Config(format!(
                        "boundary.matrix needs {} entries for dim {dim_hint}",
                        dim_hint * dim_hint
                    )));
                }
                let mut matrix = MatN::zeros(dim_hint);
                for i in 0..dim_hint {
                    for j in 0..dim_hint {
                        matrix[(i, j)] = m[i * dim_hint + j];
                    }
                }
                let off =
                    raw.f64_list("boundary.offset")?.unwrap_or_else(|| vec![0.0; dim_hint]);
                if off.len() != dim_hint {
                    return Err(Error::Config("boundary.offset has the wrong length".into()));
                }
                BoundaryMap::Affine { matrix, offset: VecN::from_slice(&off) }
            }
            "wrap" => {
                if dim_hint != 2 {
                    return Err(Error::Config("the wrap map is two-dimensional".into()));
                }
                BoundaryMap::Wrap {
                    r0: raw.f64_or("boundary.r0", 0.5)?,
                    rate: raw.f64_or("boundary.rate", 4.0 * std::f64::consts::PI)?,
                }
            }
            other => {
                return Err(Error::Config(format!(
                    "boundary.map must be identity|stretch|affine|wrap, got '{other}'"
                )))
            }
        };
        let dirichlet_tags = match raw.str_or("boundary.dirichlet", "all").as_str() {
            "all" => None,
            list => Some(
                list.split_whitespace()
                    .map(|t| {
                        t.parse::<u32>().map_err(|_| {
                            Error::Config(format!(
                                "boundary.dirichlet must be 'all' or tag numbers, got '{t}'"
                            ))
                        })
                    })
                    .collect::<Result<Vec<u32>>>()?,
            ),
        };

        // phase init and sharp set
        let set_spec = match raw.str_or("phase.set", "half").as_str() {
            "none" => SetSpec::None,
            "all" => SetSpec::All,
            "half" => SetSpec::Half {
                axis: raw.usize_or("phase.set_axis", 0)?,
                at: raw.f64_or("phase.set_at", 0.5)?,
            },
            "quarter" => {
                let at = raw.f64_list("phase.set_at2")?.unwrap_or_else(|| vec![0.5, 0.5]);
                if at.len() != 2 {
                    return Err(Error::Config("phase.set_at2 needs two thresholds".into()));
                }
                SetSpec::Quarter { at: [at[0], at[1]] }
            }
            "band" => SetSpec::Band {
                axis: raw.usize_or("phase.set_axis", 0)?,
                from: raw.f64_or("phase.set_from", 0.25)?,
                to: raw.f64_or("phase.set_to", 0.75)?,
            },
            other => {
                return Err(Error::Config(format!(
                    "phase.set must be none|all|half|quarter|band, got '{other}'"
                )))
            }
        };
        let phase_init = match raw.str_or("phase.init", "recovery").as_str() {
            "constant" => PhaseInit::Constant(raw.f64_or("phase.value", 0.5)?),
            "noisy" => PhaseInit::Noisy {
                mean: raw.f64_or("phase.value", 0.5)?,
                amplitude: raw.f64_or("phase.amplitude", 0.01)?,
            },
            "band" => PhaseInit::Band {
                axis: raw.usize_or("phase.init_axis", 0)?,
                from: raw.f64_or("phase.init_from", 0.0)?,
                to: raw.f64_or("phase.init_to", 0.5)?,
                amplitude: raw.f64_or("phase.amplitude", 0.01)?,
            },
            "indicator" => PhaseInit::Indicator,
            "recovery" => PhaseInit::Recovery,
            other => {
                return Err(Error::Config(format!(
                    "phase.init must be constant|noisy|band|indicator|recovery, got '{other}'"
                )))
            }
        };

        // optimizer
        let mut minimize = MinimizeConfig::new(raw.f64_or("optimize.eps", 0.1)?);
        minimize.max_iterations = raw.usize_or("optimize.max_iterations", 2000)?;
        minimize.gradient_tolerance =
            raw.f64_or("optimize.gradient_tolerance", minimize.gradient_tolerance)?;
        minimize.step_init = raw.f64_or("optimize.step_init", minimize.step_init)?;
        minimize.backtrack = raw.f64_or("optimize.backtrack", minimize.backtrack)?;
        minimize.armijo_c = raw.f64_or("optimize.armijo_c", minimize.armijo_c)?;
        minimize.cn_tol = raw.f64_or("optimize.cn_tol", minimize.cn_tol)?;
        minimize.cn_pitch = raw.f64_or("optimize.cn_pitch", minimize.cn_pitch)?;
        minimize.cn_check = raw.bool_or("optimize.cn_check", minimize.cn_check)?;
        minimize.det_floor = raw.f64_or("optimize.det_floor", minimize.det_floor)?;
        minimize.noise_amplitude =
            raw.f64_or("optimize.noise_amplitude", minimize.noise_amplitude)?;
        minimize.min_step = raw.f64_or("optimize.min_step", minimize.min_step)?;
        minimize.vary_y = raw.bool_or("optimize.vary_y", true)?;
        minimize.vary_z = raw.bool_or("optimize.vary_z", true)?;
        minimize.schedule = match raw.str_or("optimize.schedule", "alternate").as_str() {
            "simultaneous" => Schedule::Simultaneous,
            "alternate" => Schedule::AlternateYZ,
            other => {
                return Err(Error::Config(format!(
                    "optimize.schedule must be simultaneous|alternate, got '{other}'"
                )))
            }
        };
        let eps_schedule = raw.f64_list("optimize.eps_schedule")?.unwrap_or_default();

        // sweep and diagnostics
        let sweep_eps = raw.f64_list("sweep.eps_list")?.unwrap_or_else(|| vec![0.2, 0.1, 0.05]);
        let slice_count = raw.usize_or("sweep.slice_count", 50)?;
        let diag_pitch = raw.f64_or("diagnostics.pitch", 1.0 / 512.0)?;
        let diag_samples = raw.usize_or("diagnostics.samples", 4000)?;
        let quad_degree = raw.usize_or("diagnostics.quad_degree", 4)?;

        let out_dir = raw.str_or("output.dir", "out");
        let seed = raw.u64_or("run.seed", 0)?;
        let threads = raw.usize_or("run.threads", 1)?;

        raw.reject_unknown()?;

        minimize.seed = seed;
        let config = RunConfig {
            mesh,
            gamma,
            p,
            q,
            phase_params: [phase0, phase1],
            boundary,
            dirichlet_tags,
            phase_init,
            set_spec,
            minimize,
            eps_schedule,
            sweep_eps,
            slice_count,
            diag_pitch,
            diag_samples,
            quad_degree,
            out_dir,
            seed,
            threads,
        };
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0) {
            return Err(Error::Config("model.gamma must be positive".into()));
        }
        if self.threads == 0 {
            return Err(Error::Config("run.threads must be at least 1".into()));
        }
        if !(self.diag_pitch > 0.0) {
            return Err(Error::Config("diagnostics.pitch must be positive".into()));
        }
        if self.slice_count < 2 {
            return Err(Error::Config("sweep.slice_count must be at least 2".into()));
        }
        Ok(())
    }

    /// Build the reference mesh.
    pub fn build_mesh(&self) -> Result<SimplicialMesh> {
        match &self.mesh {
            MeshSpec::Box { dim, lengths, resolution } => {
                build_box_mesh(*dim, lengths, resolution)
            }
            MeshSpec::File(path) => {
                let text = std::fs::read_to_string(path)?;
                let (mesh, _fields) = read_snapshot(&text)?;
                Ok(mesh)
            }
        }
    }

    /// Build the energy model for the mesh dimension.
    pub fn build_model(&self, dim: usize) -> Result<EnergyModel> {
        let default = PhaseParams::well_at_identity(dim, self.p, 1.0, 0.25, 10.0);
        let pp0 = self.phase_params[0].unwrap_or(default);
        let pp1 = self.phase_params[1].unwrap_or(default);
        let bulk = BulkModel::new(dim, self.p, self.q, [pp0, pp1])?;
        Ok(EnergyModel { bulk, well: DoubleWell::new(self.gamma)?, psi: None })
    }

    /// Resolved configuration as `# key = value` comment lines.
    pub fn echo(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            s.push_str(&format!("# {k} = {v}\n"));
        };
        match &self.mesh {
            MeshSpec::Box { dim, lengths, resolution } => {
                kv("mesh.dim", dim.to_string());
                kv("mesh.lengths", join_f64(lengths));
                kv(
                    "mesh.resolution",
                    resolution.iter().map(|r| r.to_string()).collect::<Vec<_>>().join(" "),
                );
            }
            MeshSpec::File(path) => kv("mesh.file", path.clone()),
        }
        kv("model.gamma", format!("{}", self.gamma));
        kv("model.p", format!("{}", self.p));
        kv("model.q", format!("{}", self.q));
        for (i, pp) in self.phase_params.iter().enumerate() {
            if let Some(pp) = pp {
                kv(&format!("model.phase{i}.a"), format!("{}", pp.a));
                kv(&format!("model.phase{i}.b"), format!("{}", pp.b));
                kv(&format!("model.phase{i}.c"), format!("{}", pp.c));
                kv(&format!("model.phase{i}.d"), format!("{}", pp.d));
                kv(&format!("model.phase{i}.well_det"), format!("{}", pp.well_det));
            } else {
                kv(&format!("model.phase{i}"), "default".into());
            }
        }
        match &self.boundary {
            BoundaryMap::Identity => kv("boundary.map", "identity".into()),
            BoundaryMap::Stretch(l) => {
                kv("boundary.map", "stretch".into());
                kv("boundary.lambda", format!("{l}"));
            }
            BoundaryMap::Affine { matrix, offset } => {
                kv("boundary.map", "affine".into());
                let d = matrix.dim();
                let mut entries = Vec::new();
                for i in 0..d {
                    for j in 0..d {
                        entries.push(format!("{}", matrix[(i, j)]));
                    }
                }
                kv("boundary.matrix", entries.join(" "));
                kv("boundary.offset", join_f64(offset.as_slice()));
            }
            BoundaryMap::Wrap { r0, rate } => {
                kv("boundary.map", "wrap".into());
                kv("boundary.r0", format!("{r0}"));
                kv("boundary.rate", format!("{rate}"));
            }
        }
        match &self.dirichlet_tags {
            None => kv("boundary.dirichlet", "all".into()),
            Some(tags) => kv(
                "boundary.dirichlet",
                tags.iter().map(|t| t.to_string()).collect::<Vec<_>>().join(" "),
            ),
        }
        match &self.set_spec {
            SetSpec::None => kv("phase.set", "none".into()),
            SetSpec::All => kv("phase.set", "all".into()),
            SetSpec::Half { axis, at } => {
                kv("phase.set", "half".into());
                kv("phase.set_axis", axis.to_string());
                kv("phase.set_at", format!("{at}"));
            }
            SetSpec::Quarter { at } => {
                kv("phase.set", "quarter".into());
                kv("phase.set_at2", format!("{} {}", at[0], at[1]));
            }
            SetSpec::Band { axis, from, to } => {
                kv("phase.set", "band".into());
                kv("phase.set_axis", axis.to_string());
                kv("phase.set_from", format!("{from}"));
                kv("phase.set_to", format!("{to}"));
            }
        }
        match &self.phase_init {
            PhaseInit::Constant(v) => {
                kv("phase.init", "constant".into());
                kv("phase.value", format!("{v}"));
            }
            PhaseInit::Noisy { mean, amplitude } => {
                kv("phase.init", "noisy".into());
                kv("phase.value", format!("{mean}"));
                kv("phase.amplitude", format!("{amplitude}"));
            }
            PhaseInit::Band { axis, from, to, amplitude } => {
                kv("phase.init", "band".into());
                kv("phase.init_axis", axis.to_string());
                kv("phase.init_from", format!("{from}"));
                kv("phase.init_to", format!("{to}"));
                kv("phase.amplitude", format!("{amplitude}"));
            }
            PhaseInit::Indicator => kv("phase.init", "indicator".into()),
            PhaseInit::Recovery => kv("phase.init", "recovery".into()),
        }
        kv("optimize.eps", format!("{}", self.minimize.eps));
        kv("optimize.max_iterations", self.minimize.max_iterations.to_string());
        kv("optimize.gradient_tolerance", format!("{}", self.minimize.gradient_tolerance));
        kv("optimize.step_init", format!("{}", self.minimize.step_init));
        kv("optimize.backtrack", format!("{}", self.minimize.backtrack));
        kv("optimize.armijo_c", format!("{}", self.minimize.armijo_c));
        kv("optimize.cn_tol", format!("{}", self.minimize.cn_tol));
        kv("optimize.cn_pitch", format!("{}", self.minimize.cn_pitch));
        kv("optimize.cn_check", self.minimize.cn_check.to_string());
        kv("optimize.det_floor", format!("{}", self.minimize.det_floor));
        kv("optimize.noise_amplitude", format!("{}", self.minimize.noise_amplitude));
        kv("optimize.min_step", format!("{}", self.minimize.min_step));
        kv(
            "optimize.schedule",
            match self.minimize.schedule {
                Schedule::Simultaneous => "simultaneous".into(),
                Schedule::AlternateYZ => "alternate".to_string(),
            },
        );
        kv("optimize.vary_y", self.minimize.vary_y.to_string());
        kv("optimize.vary_z", self.minimize.vary_z.to_string());
        if !self.eps_schedule.is_empty() {
            kv("optimize.eps_schedule", join_f64(&self.eps_schedule));
        }
        kv("sweep.eps_list", join_f64(&self.sweep_eps));
        kv("sweep.slice_count", self.slice_count.to_string());
        kv("diagnostics.pitch", format!("{}", self.diag_pitch));
        kv("diagnostics.samples", self.diag_samples.to_string());
        kv("diagnostics.quad_degree", self.quad_degree.to_string());
        kv("output.dir", self.out_dir.clone());
        kv("run.seed", self.seed.to_string());
        kv("run.threads", self.threads.to_string());
        s
    }
}

fn join_f64(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_resolves_with_defaults() {
        let cfg = RunConfig::parse("[mesh]\ndim = 2\n").unwrap();
        let mesh = cfg.build_mesh().unwrap();
        assert_eq!(mesh.dim(), 2);
        let model = cfg.build_model(2).unwrap();
        assert_eq!(model.bulk.dim(), 2);
        assert!(cfg.echo().contains("# model.gamma = 1"));
    }

    #[test]
    fn full_config_roundtrip() {
        let text = "\
[mesh]
dim = 2
lengths = 1 1
resolution = 8 8

[model]
gamma = 2.0
p = 4
q = 2
phase0.d = 20

[boundary]
map = stretch
lambda = 1.5

[phase]
set = half
set_axis = 0
set_at = 0.5
init = noisy
value = 0.4
amplitude = 0.02

[optimize]
eps = 0.2
max_iterations = 100

[sweep]
eps_list = 0.2 0.1
slice_count = 25

[run]
seed = 42
";
        let cfg = RunConfig::parse(text).unwrap();
        assert_eq!(cfg.gamma, 2.0);
        assert_eq!(cfg.seed, 42);
        assert_eq!(cfg.minimize.max_iterations, 100);
        assert_eq!(cfg.sweep_eps, vec![0.2, 0.1]);
        assert!(matches!(cfg.boundary, BoundaryMap::Stretch(l) if l == 1.5));
        assert!(cfg.phase_params[0].is_some());
        assert!(cfg.phase_params[1].is_none());
        let echo = cfg.echo();
        assert!(echo.contains("# boundary.lambda = 1.5"));
        assert!(echo.contains("# run.seed = 42"));
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = RunConfig::parse("[mesh]\ndim = 2\nbogus_line\n").unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");

        let err = RunConfig::parse("[mesh]\ndim = 2\n[optimize]\neps = fast\n").unwrap_err();
        assert!(err.to_string().contains("line 4"), "{err}");
        assert!(err.to_string().contains("optimize.eps"), "{err}");

        let err = RunConfig::parse("[mesh]\ndim = 2\nnot_a_key = 1\n").unwrap_err();
        assert!(err.to_string().contains("unknown key"), "{err}");
        assert!(err.to_string().contains("line 3"), "{err}");
    }

    #[test]
    fn wrap_map_requires_2d() {
        let err = RunConfig::parse("[mesh]\ndim = 3\n[boundary]\nmap = wrap\n").unwrap_err();
        assert!(err.to_string().contains("two-dimensional"), "{err}");
    }

    #[test]
    fn duplicate_keys_rejected() {
        let err = RunConfig::parse("[mesh]\ndim = 2\ndim = 3\n").unwrap_err();
        assert!(err.to_string().contains("duplicate"), "{err}");
    }
}
