//! Dense linear algebra for the small symmetric systems this crate meets
//! (manifold dimensions ≤ 8). Self-contained on purpose: a Cholesky solve,
//! a Jacobi eigenvalue sweep and a Newton inverse for jet-valued matrices
//! cover everything the tensor engine needs.

use crate::jets::{DerivSpec, Jet};

/// Row-major square matrix of f64.
#[derive(Clone, Debug, PartialEq)]
pub struct SqMat {
    dim: usize,
    data: Vec<f64>,
}

impl SqMat {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, data: vec![0.0; dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn matmul(&self, other: &SqMat) -> SqMat {
        assert_eq!(self.dim, other.dim);
        let n = self.dim;
        let mut out = SqMat::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn sub(&self, other: &SqMat) -> SqMat {
        assert_eq!(self.dim, other.dim);
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(&other.data) {
            *a -= b;
        }
        out
    }

    pub fn max_norm(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.dim);
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self[(i, j)] * v[j]).sum())
            .collect()
    }

    /// ‖A·B − I‖_max, the standard inverse-quality residual.
    pub fn inverse_residual(&self, inv: &SqMat) -> f64 {
        self.matmul(inv).sub(&SqMat::identity(self.dim)).max_norm()
    }
}

impl std::ops::Index<(usize, usize)> for SqMat {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.dim + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for SqMat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.dim + j]
    }
}

#[derive(Debug, thiserror::Error)]
#[error("matrix is singular or not positive definite (pivot {pivot:.3e} at {index})")]
pub struct SingularMatrix {
    pub pivot: f64,
    pub index: usize,
}

/// Inverse of a symmetric positive-definite matrix via Cholesky, polished
/// with one Newton step `X ← X(2I − AX)` to push the residual toward
/// machine precision even for moderately conditioned inputs.
pub fn spd_inverse(a: &SqMat) -> Result<SqMat, SingularMatrix> {
    let n = a.dim;
    // Cholesky factor L with A = L Lᵀ.
    let mut l = SqMat::zeros(n);
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            if i == j {
                if s <= 0.0 {
                    return Err(SingularMatrix { pivot: s, index: i });
                }
                l[(i, j)] = s.sqrt();
            } else {
                l[(i, j)] = s / l[(j, j)];
            }
        }
    }
    // Solve A X = I column by column.
    let mut inv = SqMat::zeros(n);
    let mut col = vec![0.0; n];
    for c in 0..n {
        for (i, v) in col.iter_mut().enumerate() {
            *v = if i == c { 1.0 } else { 0.0 };
        }
        for i in 0..n {
            let mut s = col[i];
            for k in 0..i {
                s -= l[(i, k)] * col[k];
            }
            col[i] = s / l[(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = col[i];
            for k in i + 1..n {
                s -= l[(k, i)] * col[k];
            }
            col[i] = s / l[(i, i)];
        }
        for i in 0..n {
            inv[(i, c)] = col[i];
        }
    }
    // One refinement step.
    let mut two_i_minus_ax = inv.matmul(a);
    for v in &mut two_i_minus_ax.data {
        *v = -*v;
    }
    for i in 0..n {
        two_i_minus_ax[(i, i)] += 2.0;
    }
    Ok(inv.matmul(&two_i_minus_ax).transpose_symmetrize())
}

impl SqMat {
    /// Average with the transpose; inverses of symmetric matrices are
    /// symmetric, so this removes the rounding skew.
    fn transpose_symmetrize(mut self) -> SqMat {
        let n = self.dim;
        for i in 0..n {
            for j in 0..i {
                let m = 0.5 * (self[(i, j)] + self[(j, i)]);
                self[(i, j)] = m;
                self[(j, i)] = m;
            }
        }
        self
    }
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
pub fn symmetric_eigenvalues(a: &SqMat) -> Vec<f64> {
    let n = a.dim;
    let mut m = a.clone();
    let scale = m.max_norm().max(1e-300);
    for _sweep in 0..100 {
        let mut off = 0.0f64;
        for i in 0..n {
            for j in i + 1..n {
                off = off.max(m[(i, j)].abs());
            }
        }
        if off <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq.abs() <= 1e-18 * scale {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
            }
        }
    }
    let mut eig: Vec<f64> = (0..n).map(|i| m[(i, i)]).collect();
    eig.sort_by(|a, b| a.partial_cmp(b).unwrap());
    eig
}

/// Square matrix of jets sharing one spec.
pub struct JetMat {
    dim: usize,
    entries: Vec<Jet>,
}

impl JetMat {
    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> Jet) -> Self {
        let mut entries = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                entries.push(f(i, j));
            }
        }
        Self { dim, entries }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn at(&self, i: usize, j: usize) -> &Jet {
        &self.entries[i * self.dim + j]
    }

    pub fn spec(&self) -> DerivSpec {
        self.entries[0].spec()
    }

    fn matmul(&self, other: &JetMat) -> JetMat {
        assert_eq!(self.dim, other.dim);
        let n = self.dim;
        JetMat::from_fn(n, |i, j| {
            let mut acc = self.at(i, 0) * other.at(0, j);
            for k in 1..n {
                acc = &acc + &(self.at(i, k) * other.at(k, j));
            }
            acc
        })
    }

    /// Inverse of a jet-valued matrix whose value part has the given numeric
    /// inverse, by Newton iteration `X ← X(2I − MX)`. Each step doubles the
    /// Taylor order to which X is exact, so ⌈log₂(order+1)⌉ steps suffice.
    pub fn inverse_from(&self, value_inverse: &SqMat) -> JetMat {
        let spec = self.spec();
        let n = self.dim;
        let mut x =
            JetMat::from_fn(n, |i, j| Jet::constant(spec, value_inverse[(i, j)]));
        let total_order = spec.order_x() + spec.order_y();
        let steps = usize::BITS - total_order.leading_zeros(); // ceil(log2(order+1))
        for _ in 0..steps.max(1) {
            let mx = self.matmul(&x);
            let two_i_minus = JetMat::from_fn(n, |i, j| {
                let e = -mx.at(i, j);
                if i == j {
                    e.add_scalar(2.0)
                } else {
                    e
                }
            });
            x = x.matmul(&two_i_minus);
        }
        x
    }
}

/// Dense 3-index tensor, row-major over equal index ranges.
#[derive(Clone, Debug)]
pub struct Tensor3 {
    dim: usize,
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, data: vec![0.0; dim * dim * dim] }
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut t = Self::zeros(dim);
        for a in 0..dim {
            for b in 0..dim {
                for c in 0..dim {
                    t[(a, b, c)] = f(a, b, c);
                }
            }
        }
        t
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn max_norm(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl std::ops::Index<(usize, usize, usize)> for Tensor3 {
    type Output = f64;
    fn index(&self, (a, b, c): (usize, usize, usize)) -> &f64 {
        &self.data[(a * self.dim + b) * self.dim + c]
    }
}

impl std::ops::IndexMut<(usize, usize, usize)> for Tensor3 {
    fn index_mut(&mut self, (a, b, c): (usize, usize, usize)) -> &mut f64 {
        &mut self.data[(a * self.dim + b) * self.dim + c]
    }
}

/// Dense 4-index tensor, row-major over equal index ranges.
#[derive(Clone, Debug)]
pub struct Tensor4 {
    dim: usize,
    data: Vec<f64>,
}

impl Tensor4 {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, data: vec![0.0; dim * dim * dim * dim] }
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize, usize, usize) -> f64) -> Self {
        let mut t = Self::zeros(dim);
        for a in 0..dim {
            for b in 0..dim {
                for c in 0..dim {
                    for d in 0..dim {
                        t[(a, b, c, d)] = f(a, b, c, d);
                    }
                }
            }
        }
        t
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn max_norm(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl std::ops::Index<(usize, usize, usize, usize)> for Tensor4 {
    type Output = f64;
    fn index(&self, (a, b, c, d): (usize, usize, usize, usize)) -> &f64 {
        &self.data[((a * self.dim + b) * self.dim + c) * self.dim + d]
    }
}

impl std::ops::IndexMut<(usize, usize, usize, usize)> for Tensor4 {
    fn index_mut(&mut self, (a, b, c, d): (usize, usize, usize, usize)) -> &mut f64 {
        &mut self.data[((a * self.dim + b) * self.dim + c) * self.dim + d]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn spd_inverse_diagonal() {
        let a = SqMat::from_fn(2, |i, j| if i == j { [2.0, 1.0][i] } else { 0.0 });
        let inv = spd_inverse(&a).unwrap();
        assert_relative_eq!(inv[(0, 0)], 0.5, epsilon = 1e-15);
        assert_relative_eq!(inv[(1, 1)], 1.0, epsilon = 1e-15);
        assert_eq!(inv[(0, 1)], 0.0);
    }

    #[test]
    fn spd_inverse_random_residual() {
        // Seeded SPD matrix: B Bᵀ + n I.
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let n = 4;
        let b = SqMat::from_fn(n, |_, _| next());
        let mut a = SqMat::zeros(n);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    a[(i, j)] += b[(i, k)] * b[(j, k)];
                }
            }
            a[(i, i)] += n as f64;
        }
        let inv = spd_inverse(&a).unwrap();
        assert!(a.inverse_residual(&inv) <= 1e-10);
    }

    #[test]
    fn spd_inverse_rejects_indefinite() {
        let a = SqMat::from_fn(2, |i, j| if i == j { [1.0, -1.0][i] } else { 0.0 });
        assert!(spd_inverse(&a).is_err());
    }

    #[test]
    fn jacobi_known_spectrum() {
        // [[2, 1], [1, 2]] has eigenvalues 1 and 3.
        let a = SqMat::from_fn(2, |i, j| if i == j { 2.0 } else { 1.0 });
        let eig = symmetric_eigenvalues(&a);
        assert_relative_eq!(eig[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(eig[1], 3.0, epsilon = 1e-12);
    }

    #[test]
    fn jet_matrix_inverse_matches_hand_expansion() {
        // M = [[1 + y, 0], [0, 2]] over a 1+1 spec; inverse entry (0,0) is
        // 1/(1+y) with Taylor coefficients (-1)^k at y=0.
        let spec = DerivSpec::new(1, 1, 0, 3).unwrap();
        let y = Jet::variable(spec, 1, 0.0).unwrap();
        let m = JetMat::from_fn(2, |i, j| match (i, j) {
            (0, 0) => y.add_scalar(1.0),
            (1, 1) => Jet::constant(spec, 2.0),
            _ => Jet::constant(spec, 0.0),
        });
        let v0 = SqMat::from_fn(2, |i, j| if i == j { [1.0, 0.5][i] } else { 0.0 });
        let inv = m.inverse_from(&v0);
        for k in 0..=3u8 {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            assert_relative_eq!(inv.at(0, 0).extract(&[0, k]).unwrap(),
                sign * multi_fact(k), epsilon = 1e-13);
        }
        assert_relative_eq!(inv.at(1, 1).value(), 0.5, epsilon = 1e-15);
        assert_eq!(inv.at(0, 1).value(), 0.0);

        fn multi_fact(k: u8) -> f64 {
            (1..=k as u64).product::<u64>() as f64
        }
    }
}
