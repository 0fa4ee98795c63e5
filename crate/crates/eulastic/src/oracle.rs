//! Independent brute-force references for tests and verification.
//!
//! Nothing here shares kinematics code with the assembly paths it is
//! used to check: interface measures come from node positions and
//! plain segment/triangle geometry, derivatives from central
//! differences, and 1D profile energies from adaptive quadrature.

use crate::mesh::{CellSelection, NodalField, SimplicialMesh};
use crate::{Error, Result};

/// Value produced by a brute-force reference computation.
#[derive(Clone, Debug)]
pub struct OracleReport {
    pub value: f64,
    pub method: &'static str,
    /// Resolution or step the method ran at.
    pub resolution: f64,
    /// Estimated bound on the error of `value`.
    pub error_bound: f64,
}

/// Direct geometric measure of the deformed interface of `E`.
///
/// Sums the (n-1)-measures of the affine images of the interface
/// facets: deformed segment lengths in 2D, deformed triangle areas in
/// 3D. No cofactors are involved.
pub fn deformed_interface_measure(
    mesh: &SimplicialMesh,
    y: &NodalField,
    selection: &CellSelection,
) -> f64 {
    let dim = mesh.dim();
    let mut total = 0.0;
    for facet in mesh.interior_facets() {
        if selection.contains(facet.left) == selection.contains(facet.right) {
            continue;
        }
        let a = y.vector_at(facet.nodes[0]);
        let b = y.vector_at(facet.nodes[1]);
        total += match dim {
            2 => (b - a).norm(),
            _ => {
                let c = y.vector_at(facet.nodes[2]);
                0.5 * (b - a).cross(&(c - a)).norm()
            }
        };
    }
    total
}

/// Central-difference directional derivative with Richardson
/// extrapolation.
///
/// `energy` must return `+inf` (or NaN) on infeasible states; the step
/// is then halved up to four times before giving up.
pub fn fd_gradient(
    energy: &dyn Fn(&[f64]) -> f64,
    state: &[f64],
    direction: &[f64],
    step: f64,
) -> Result<OracleReport> {
    if state.len() != direction.len() {
        return Err(Error::invalid_argument(
            "state and direction must have the same length".into(),
        ));
    }
    if !(step > 0.0) {
        return Err(Error::invalid_argument(format!("step must be positive, got {step}")));
    }
    let dir_norm: f64 = direction.iter().map(|d| d * d).sum::<f64>().sqrt();
    if dir_norm == 0.0 {
        return Ok(OracleReport {
            value: 0.0,
            method: "central-difference",
            resolution: step,
            error_bound: 0.0,
        });
    }

    let probe = |h: f64| -> Option<f64> {
        let mut plus = state.to_vec();
        let mut minus = state.to_vec();
        for i in 0..state.len() {
            plus[i] += h * direction[i];
            minus[i] -= h * direction[i];
        }
        let (fp, fm) = (energy(&plus), energy(&minus));
        if fp.is_finite() && fm.is_finite() {
            Some((fp - fm) / (2.0 * h))
        } else {
            None
        }
    };

    let mut h = step;
    for _ in 0..=4 {
        if let (Some(d1), Some(d2)) = (probe(h), probe(h / 2.0)) {
            // Richardson: eliminate the O(h^2) term of the central stencil.
            let value = (4.0 * d2 - d1) / 3.0;
            return Ok(OracleReport {
                value,
                method: "central-difference-richardson",
                resolution: h,
                error_bound: (d2 - d1).abs() / 3.0,
            });
        }
        h *= 0.5;
    }
    Err(Error::infeasible(
        "finite-difference probe left the feasible set even at the smallest step".into(),
    ))
}

/// Adaptive Simpson quadrature on `[a, b]`.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(f: &dyn Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        ((b - a) / 6.0 * (fa + 4.0 * fm + fb), m, fm)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        whole: f64,
        m: f64,
        fm: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let (left, lm, flm) = simpson(f, a, fa, m, fm);
        let (right, rm, frm) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        recurse(f, a, fa, m, fm, left, lm, flm, 0.5 * tol, depth - 1)
            + recurse(f, m, fm, b, fb, right, rm, frm, 0.5 * tol, depth - 1)
    }
    let (fa, fb) = (f(a), f(b));
    let (whole, m, fm) = simpson(f, a, fa, b, fb);
    recurse(f, a, fa, b, fb, whole, m, fm, tol, 48)
}

/// 1D energy of the optimal transition profile on `[-half_width,
/// half_width]`.
///
/// The profile is the logistic solving `eps * dz/dt = sqrt(2 Phi(z))`
/// for the normalized quartic well, i.e. rate `6 gamma / eps`; its
/// continuum energy over the whole line is exactly `gamma`. `phi` is
/// evaluated as passed, so a mismatched potential shows up in the
/// value.
pub fn profile_energy_1d(
    phi: &dyn Fn(f64) -> f64,
    gamma: f64,
    eps: f64,
    half_width: f64,
) -> Result<OracleReport> {
    if !(eps > 0.0) || !(gamma > 0.0) {
        return Err(Error::invalid_argument("gamma and eps must be positive".into()));
    }
    if half_width < 4.0 * eps {
        return Err(Error::invalid_argument(
            "half_width should exceed a few multiples of eps".into(),
        ));
    }
    let k = 6.0 * gamma / eps;
    let profile = move |t: f64| 1.0 / (1.0 + (-k * t).exp());
    let integrand = move |t: f64| {
        let z = profile(t);
        let dz = k * z * (1.0 - z);
        0.5 * eps * dz * dz + phi(z) / eps
    };
    let quad_tol = 1e-12;
    let value = adaptive_simpson(&integrand, -half_width, half_width, quad_tol);
    // both tails: integrand <= (eps k^2/2 + 18 gamma^2/eps) e^{-2k t}
    let amp = 0.5 * eps * k * k + 18.0 * gamma * gamma / eps;
    let truncation = amp * (-2.0 * k * half_width).exp() / k;
    Ok(OracleReport {
        value,
        method: "adaptive-simpson",
        resolution: quad_tol,
        error_bound: quad_tol + truncation,
    })
}
