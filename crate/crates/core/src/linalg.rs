//! Small dense helpers on top of nalgebra.

use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// SVD with singular values sorted in decreasing order, columns of `v` matching.
pub fn sorted_svd(a: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = a.ncols();
    if a.nrows() < n {
        // pad so that v_t is square
        let mut padded = DMatrix::zeros(n, n);
        padded.view_mut((0, 0), (a.nrows(), n)).copy_from(a);
        return sorted_svd(&padded);
    }
    let svd = a.clone().svd(false, true);
    let vt = svd.v_t.expect("v_t requested");
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let vals = order.iter().map(|&i| svd.singular_values[i]).collect();
    let mut v = DMatrix::zeros(n, n);
    for (c, &i) in order.iter().enumerate() {
        v.set_column(c, &vt.row(i).transpose());
    }
    (vals, v)
}

/// Orthonormal basis of the `dim` least significant right singular vectors.
pub fn trailing_singular_space(a: &DMatrix<f64>, dim: usize) -> (DMatrix<f64>, f64) {
    let (vals, v) = sorted_svd(a);
    let n = a.ncols();
    let basis = v.columns(n - dim, dim).into_owned();
    let worst = if dim == 0 { 0.0 } else { vals[n - dim] };
    (basis, worst)
}

/// Numerical null space with relative threshold on the singular values.
pub fn null_space(a: &DMatrix<f64>, rel: f64) -> DMatrix<f64> {
    let (vals, v) = sorted_svd(a);
    let scale = vals.first().copied().unwrap_or(0.0).max(1.0);
    let dim = vals.iter().filter(|&&s| s <= rel * scale).count();
    let n = a.ncols();
    v.columns(n - dim, dim).into_owned()
}

pub fn numerical_rank(a: &DMatrix<f64>, rel: f64) -> usize {
    let (vals, _) = sorted_svd(a);
    let scale = vals.first().copied().unwrap_or(0.0);
    vals.iter().filter(|&&s| s > rel * scale).count()
}

pub fn inverse(a: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    a.clone()
        .try_inverse()
        .filter(|inv| inv.iter().all(|x| x.is_finite()))
        .ok_or_else(|| Error::Structural(alloc::format!("{what} is singular")))
}

/// Moore-Penrose pseudo-inverse for full column rank input.
pub fn left_inverse(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let gram = a.transpose() * a;
    Ok(inverse(&gram, "normal equations")? * a.transpose())
}

pub fn max_abs(a: &DMatrix<f64>) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn max_abs_vec(a: &DVector<f64>) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Disjoint-set forest with path halving.
#[derive(Debug, Clone)]
pub struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect(), rank: alloc::vec![0; n] }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            core::cmp::Ordering::Less => self.parent[ra] = rb,
            core::cmp::Ordering::Greater => self.parent[rb] = ra,
            core::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
        true
    }
}
