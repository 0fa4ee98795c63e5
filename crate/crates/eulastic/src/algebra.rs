//! Fixed-capacity vectors and square matrices for runtime dimension 2 or 3.
//!
//! All per-element kinematics (deformation gradients, cofactors,
//! determinants) happens on these types. Storage is a flat `[f64; 9]`
//! with only the leading `n*n` block in use, so values are `Copy` and
//! assembly loops never allocate.

use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

/// A vector in `R^n` with `n` in `{2, 3}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VecN {
    n: usize,
    a: [f64; 3],
}

impl VecN {
    pub fn zeros(n: usize) -> Self {
        assert!(n == 2 || n == 3, "dimension must be 2 or 3, got {n}");
        VecN { n, a: [0.0; 3] }
    }

    pub fn from_slice(v: &[f64]) -> Self {
        let mut out = Self::zeros(v.len());
        out.a[..v.len()].copy_from_slice(v);
        out
    }

    pub fn new2(x: f64, y: f64) -> Self {
        VecN { n: 2, a: [x, y, 0.0] }
    }

    pub fn new3(x: f64, y: f64, z: f64) -> Self {
        VecN { n: 3, a: [x, y, z] }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.a[..self.n]
    }

    #[inline]
    pub fn dot(&self, other: &VecN) -> f64 {
        debug_assert_eq!(self.n, other.n);
        let mut s = 0.0;
        for i in 0..self.n {
            s += self.a[i] * other.a[i];
        }
        s
    }

    #[inline]
    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn scale(&self, t: f64) -> VecN {
        let mut out = *self;
        for i in 0..self.n {
            out.a[i] *= t;
        }
        out
    }

    pub fn normalized(&self) -> VecN {
        let l = self.norm();
        assert!(l > 0.0, "cannot normalize the zero vector");
        self.scale(1.0 / l)
    }

    /// Cross product; both operands must be 3-vectors.
    pub fn cross(&self, other: &VecN) -> VecN {
        assert_eq!(self.n, 3, "cross product requires dimension 3");
        let (a, b) = (&self.a, &other.a);
        VecN::new3(
            a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0],
        )
    }

    /// 2D analogue of the cross product: the scalar `a_x b_y - a_y b_x`.
    pub fn cross2(&self, other: &VecN) -> f64 {
        debug_assert_eq!(self.n, 2);
        self.a[0] * other.a[1] - self.a[1] * other.a[0]
    }

    /// Rotate 90 degrees counterclockwise (2D).
    pub fn perp(&self) -> VecN {
        debug_assert_eq!(self.n, 2);
        VecN::new2(-self.a[1], self.a[0])
    }
}

impl Index<usize> for VecN {
    type Output = f64;
    #[inline]
    fn index(&self, i: usize) -> &f64 {
        debug_assert!(i < self.n);
        &self.a[i]
    }
}

impl IndexMut<usize> for VecN {
    #[inline]
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        debug_assert!(i < self.n);
        &mut self.a[i]
    }
}

impl Add for VecN {
    type Output = VecN;
    fn add(self, o: VecN) -> VecN {
        let mut r = self;
        for i in 0..self.n {
            r.a[i] += o.a[i];
        }
        r
    }
}

impl Sub for VecN {
    type Output = VecN;
    fn sub(self, o: VecN) -> VecN {
        let mut r = self;
        for i in 0..self.n {
            r.a[i] -= o.a[i];
        }
        r
    }
}

impl Neg for VecN {
    type Output = VecN;
    fn neg(self) -> VecN {
        self.scale(-1.0)
    }
}

impl Mul<f64> for VecN {
    type Output = VecN;
    fn mul(self, t: f64) -> VecN {
        self.scale(t)
    }
}

/// A square matrix in `R^{n x n}` with `n` in `{2, 3}`, row-major.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MatN {
    n: usize,
    a: [f64; 9],
}

impl MatN {
    pub fn zeros(n: usize) -> Self {
        assert!(n == 2 || n == 3, "dimension must be 2 or 3, got {n}");
        MatN { n, a: [0.0; 9] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let n = rows.len();
        let mut m = Self::zeros(n);
        for (i, r) in rows.iter().enumerate() {
            assert_eq!(r.len(), n);
            for j in 0..n {
                m[(i, j)] = r[j];
            }
        }
        m
    }

    pub fn diag(v: &[f64]) -> Self {
        let mut m = Self::zeros(v.len());
        for (i, &d) in v.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    /// Rank-one product `u v^T`.
    pub fn outer(u: &VecN, v: &VecN) -> Self {
        debug_assert_eq!(u.n, v.n);
        let mut m = Self::zeros(u.n);
        for i in 0..u.n {
            for j in 0..u.n {
                m[(i, j)] = u[i] * v[j];
            }
        }
        m
    }

    /// Skew matrix of a 3-vector: `cross_matrix(n) * a = n x a`.
    pub fn cross_matrix(v: &VecN) -> Self {
        assert_eq!(v.n, 3);
        MatN::from_rows(&[
            &[0.0, -v[2], v[1]],
            &[v[2], 0.0, -v[0]],
            &[-v[1], v[0], 0.0],
        ])
    }

    /// Counterclockwise rotation by `theta`.
    pub fn rotation2(theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        MatN::from_rows(&[&[c, -s], &[s, c]])
    }

    /// Rotation by `theta` around `axis` (Rodrigues formula).
    pub fn rotation3(axis: &VecN, theta: f64) -> Self {
        let k = MatN::cross_matrix(&axis.normalized());
        let (s, c) = theta.sin_cos();
        MatN::identity(3) + k.scale(s) + k.matmul(&k).scale(1.0 - c)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn transpose(&self) -> MatN {
        let mut m = Self::zeros(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                m[(i, j)] = self[(j, i)];
            }
        }
        m
    }

    pub fn det(&self) -> f64 {
        match self.n {
            2 => self[(0, 0)] * self[(1, 1)] - self[(0, 1)] * self[(1, 0)],
            _ => {
                self[(0, 0)] * (self[(1, 1)] * self[(2, 2)] - self[(1, 2)] * self[(2, 1)])
                    - self[(0, 1)] * (self[(1, 0)] * self[(2, 2)] - self[(1, 2)] * self[(2, 0)])
                    + self[(0, 2)] * (self[(1, 0)] * self[(2, 1)] - self[(1, 1)] * self[(2, 0)])
            }
        }
    }

    /// Cofactor matrix: `cof(A) A^T = det(A) I`.
    ///
    /// 2D: `cof [[a,b],[c,d]] = [[d,-c],[-b,a]]`; 3D: signed 2x2 minors.
    pub fn cof(&self) -> MatN {
        let mut m = Self::zeros(self.n);
        match self.n {
            2 => {
                m[(0, 0)] = self[(1, 1)];
                m[(0, 1)] = -self[(1, 0)];
                m[(1, 0)] = -self[(0, 1)];
                m[(1, 1)] = self[(0, 0)];
            }
            _ => {
                for i in 0..3 {
                    for j in 0..3 {
                        let (r0, r1) = ((i + 1) % 3, (i + 2) % 3);
                        let (c0, c1) = ((j + 1) % 3, (j + 2) % 3);
                        // cyclic index choice absorbs the (-1)^{i+j} sign
                        m[(i, j)] = self[(r0, c0)] * self[(r1, c1)] - self[(r0, c1)] * self[(r1, c0)];
                    }
                }
            }
        }
        m
    }

    /// Inverse; panics on exact zero determinant.
    pub fn inverse(&self) -> MatN {
        let d = self.det();
        assert!(d != 0.0, "singular matrix");
        // A^{-1} = cof(A)^T / det
        self.cof().transpose().scale(1.0 / d)
    }

    pub fn frobenius_norm(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                s += self[(i, j)] * self[(i, j)];
            }
        }
        s.sqrt()
    }

    /// Frobenius inner product `A : B`.
    pub fn ddot(&self, other: &MatN) -> f64 {
        debug_assert_eq!(self.n, other.n);
        let mut s = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                s += self[(i, j)] * other[(i, j)];
            }
        }
        s
    }

    pub fn scale(&self, t: f64) -> MatN {
        let mut m = *self;
        for i in 0..self.n {
            for j in 0..self.n {
                m[(i, j)] *= t;
            }
        }
        m
    }

    pub fn matvec(&self, v: &VecN) -> VecN {
        debug_assert_eq!(self.n, v.n);
        let mut out = VecN::zeros(self.n);
        for i in 0..self.n {
            let mut s = 0.0;
            for j in 0..self.n {
                s += self[(i, j)] * v[j];
            }
            out[i] = s;
        }
        out
    }

    /// `A^T v` without forming the transpose.
    pub fn matvec_t(&self, v: &VecN) -> VecN {
        debug_assert_eq!(self.n, v.n);
        let mut out = VecN::zeros(self.n);
        for j in 0..self.n {
            let mut s = 0.0;
            for i in 0..self.n {
                s += self[(i, j)] * v[i];
            }
            out[j] = s;
        }
        out
    }

    pub fn matmul(&self, other: &MatN) -> MatN {
        debug_assert_eq!(self.n, other.n);
        let mut m = Self::zeros(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                let mut s = 0.0;
                for k in 0..self.n {
                    s += self[(i, k)] * other[(k, j)];
                }
                m[(i, j)] = s;
            }
        }
        m
    }
}

impl Index<(usize, usize)> for MatN {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.n && j < self.n);
        &self.a[3 * i + j]
    }
}

impl IndexMut<(usize, usize)> for MatN {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.n && j < self.n);
        &mut self.a[3 * i + j]
    }
}

impl Add for MatN {
    type Output = MatN;
    fn add(self, o: MatN) -> MatN {
        let mut m = self;
        for i in 0..self.n {
            for j in 0..self.n {
                m[(i, j)] += o[(i, j)];
            }
        }
        m
    }
}

impl Sub for MatN {
    type Output = MatN;
    fn sub(self, o: MatN) -> MatN {
        let mut m = self;
        for i in 0..self.n {
            for j in 0..self.n {
                m[(i, j)] -= o[(i, j)];
            }
        }
        m
    }
}
