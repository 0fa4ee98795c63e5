//! Quadrature on reference simplices of dimension 2 and 3.
//!
//! Grundmann-Moller rules: the rule of index `s` integrates polynomials
//! of degree `2s + 1` exactly on any simplex. Points are strictly
//! interior, weights are signed and sum to one (they are returned
//! normalized so that the weighted sum times the simplex measure is the
//! integral).

/// One quadrature node in barycentric coordinates plus its weight.
///
/// Weights are relative: `integral = volume * sum_i w_i f(x_i)`.
#[derive(Clone, Debug)]
pub struct SimplexRule {
    pub dim: usize,
    /// Barycentric coordinates, `dim + 1` entries per node.
    pub nodes: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl SimplexRule {
    /// Grundmann-Moller rule of the given index on a `dim`-simplex.
    ///
    /// Exact for polynomial degree `2 * index + 1`.
    pub fn grundmann_moller(dim: usize, index: usize) -> SimplexRule {
        assert!(dim == 2 || dim == 3);
        let s = index as i64;
        let d = 2 * s + 1;
        let n = dim as i64;
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        let mut total = 0.0;
        for i in 0..=s {
            let denom = (d + n - 2 * i) as f64;
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            let w = sign * 2f64.powi(-2 * s as i32) * denom.powi(d as i32)
                / (factorial(i as u64) * factorial((d + n - i) as u64));
            for beta in compositions((s - i) as usize, dim + 1) {
                let bary: Vec<f64> = beta.iter().map(|&b| (2.0 * b as f64 + 1.0) / denom).collect();
                nodes.push(bary);
                weights.push(w);
                total += w;
            }
        }
        // Normalize so relative weights sum to 1 (the raw rule integrates
        // against the unit-volume reference measure 1/n!).
        for w in &mut weights {
            *w /= total;
        }
        SimplexRule { dim, nodes, weights }
    }

    /// A rule exact at least for the requested polynomial degree.
    pub fn with_degree(dim: usize, degree: usize) -> SimplexRule {
        let index = degree / 2; // 2*index + 1 >= degree
        Self::grundmann_moller(dim, index)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

fn factorial(k: u64) -> f64 {
    (1..=k).map(|v| v as f64).product::<f64>().max(1.0)
}

/// All vectors of `parts` nonnegative integers summing to `total`.
fn compositions(total: usize, parts: usize) -> Vec<Vec<u64>> {
    let mut out = Vec::new();
    let mut cur = vec![0u64; parts];
    fn rec(out: &mut Vec<Vec<u64>>, cur: &mut Vec<u64>, pos: usize, left: u64) {
        if pos + 1 == cur.len() {
            cur[pos] = left;
            out.push(cur.clone());
            return;
        }
        for v in 0..=left {
            cur[pos] = v;
            rec(out, cur, pos + 1, left - v);
        }
    }
    rec(&mut out, &mut cur, 0, total as u64);
    out
}
