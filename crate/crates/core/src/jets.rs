//! Exact calculus on the multiharmonic spaces `H_k`.
//!
//! A function `h ∈ H_k` is stored by its boundary jet: the values
//! `Δ^j h(p)` for `0 <= j <= k` and `p ∈ V_0`, flattened as `j·|V_0| + p`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::energy::LevelOne;
use crate::error::{Error, Result};
use crate::fractal::{FractalSpec, VertexTable, Word};
use crate::linalg::{max_abs, sorted_svd};

/// Boundary jet of a multiharmonic function, row `j` holding `Δ^j h` on `V_0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    pub rows: Vec<Vec<f64>>,
}

impl Jet {
    pub fn zero(k: usize, nb: usize) -> Self {
        Jet { rows: vec![vec![0.0; nb]; k + 1] }
    }

    pub fn order(&self) -> usize {
        self.rows.len() - 1
    }

    pub fn to_vector(&self) -> DVector<f64> {
        DVector::from_iterator(self.rows.iter().map(Vec::len).sum(), self.rows.iter().flatten().copied())
    }

    pub fn from_vector(v: &DVector<f64>, nb: usize) -> Self {
        Jet { rows: v.as_slice().chunks(nb).map(<[f64]>::to_vec).collect() }
    }
}

/// `A_w : H_k -> H_k`, `f ↦ f ∘ F_w`, in jet coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositionMatrix {
    pub word: Word,
    pub k: usize,
    pub nb: usize,
    /// `r_w μ_w`, the ratio between consecutive diagonal blocks.
    pub scale: f64,
    /// `r_w` and `μ_w`.
    pub r: f64,
    pub mu: f64,
    pub matrix: DMatrix<f64>,
}

impl CompositionMatrix {
    /// The diagonal block `Ψ_w` acting on the value row.
    pub fn psi(&self) -> DMatrix<f64> {
        self.matrix.view((0, 0), (self.nb, self.nb)).into_owned()
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GramReport {
    /// Largest entry of `G - Σ μ_i A_i^T G A_i`.
    pub residual: f64,
    /// Dimension of the numerical fixed-point space.
    pub nullity: usize,
    /// Whether power iteration replaced the null-space solve.
    pub fallback: bool,
}

/// Transfer maps, composition matrices and Gram matrices for `H_0 ⊂ ... ⊂ H_k`.
#[derive(Debug, Clone)]
pub struct JetSpace {
    spec: FractalSpec,
    k: usize,
    l1: LevelOne,
    values: Vec<DMatrix<f64>>,
    letters: Vec<Vec<DMatrix<f64>>>,
    gram: Vec<DMatrix<f64>>,
    reports: Vec<GramReport>,
}

impl JetSpace {
    pub fn new(spec: &FractalSpec, k: usize) -> Result<Self> {
        let l1 = LevelOne::new(spec)?;
        let mut space = JetSpace {
            spec: spec.clone(),
            k,
            l1,
            values: Vec::with_capacity(k + 1),
            letters: Vec::with_capacity(k + 1),
            gram: Vec::with_capacity(k + 1),
            reports: Vec::with_capacity(k + 1),
        };
        for j in 0..=k {
            let e = if j == 0 { space.l1.ext.clone() } else { space.next_values(j)? };
            space.values.push(e);
            let letters = (0..spec.n_letters()).map(|i| space.letter_matrix(j, i)).collect();
            space.letters.push(letters);
            let (g, report) = space.solve_gram(j)?;
            space.gram.push(g);
            space.reports.push(report);
        }
        Ok(space)
    }

    pub fn spec(&self) -> &FractalSpec {
        &self.spec
    }

    pub fn order(&self) -> usize {
        self.k
    }

    pub fn nb(&self) -> usize {
        self.spec.nb()
    }

    pub fn dim(&self) -> usize {
        (self.k + 1) * self.nb()
    }

    pub fn level_one(&self) -> &LevelOne {
        &self.l1
    }

    /// `A_i` on `H_j`, `j <= k`.
    pub fn letter_at(&self, j: usize, i: usize) -> &DMatrix<f64> {
        &self.letters[j][i]
    }

    pub fn letter(&self, i: usize) -> &DMatrix<f64> {
        &self.letters[self.k][i]
    }

    pub fn gram_at(&self, j: usize) -> &DMatrix<f64> {
        &self.gram[j]
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram[self.k]
    }

    pub fn gram_report(&self, j: usize) -> GramReport {
        self.reports[j]
    }

    /// Values of `h` on `V_1` for `h ∈ H_j` given by its jet (`|V_1| × (j+1)|V_0|`).
    pub fn values_at(&self, j: usize) -> &DMatrix<f64> {
        &self.values[j]
    }

    /// All of `Δ^j h` on `V_1`, `0 <= j <= k`, stacked by `j`.
    pub fn transfer(&self) -> DMatrix<f64> {
        let nb = self.nb();
        let nv = self.l1.table.len();
        let mut t = DMatrix::zeros((self.k + 1) * nv, self.dim());
        for j in 0..=self.k {
            let e = &self.values[self.k - j];
            t.view_mut((j * nv, j * nb), (nv, e.ncols())).copy_from(e);
        }
        t
    }

    fn letter_matrix(&self, j: usize, i: usize) -> DMatrix<f64> {
        let nb = self.nb();
        let s = self.spec.r()[i] * self.spec.mu()[i];
        let n = (j + 1) * nb;
        let mut a = DMatrix::zeros(n, n);
        for p in 0..=j {
            let e = &self.values[j - p];
            let scale = libm::pow(s, p as f64);
            for b in 0..nb {
                let row = self.l1.local(i, b);
                for c in 0..e.ncols() {
                    a[(p * nb + b, p * nb + c)] = scale * e[(row, c)];
                }
            }
        }
        a
    }

    // Weak form at each interior vertex y of V_1 against the piecewise
    // harmonic tent ψ_y: (Q_1 h)_y = -Σ_{F_i p_a = y} μ_i ∫ (Δh ∘ F_i) h_a dμ.
    fn next_values(&self, j: usize) -> Result<DMatrix<f64>> {
        let nb = self.nb();
        let ni = self.l1.n_interior();
        let nv = nb + ni;
        let lower = j * nb;
        let g = &self.gram[j - 1];
        let mut load = DMatrix::zeros(ni, lower);
        for i in 0..self.spec.n_letters() {
            let moments = g * &self.letters[j - 1][i];
            for a in 0..nb {
                let y = self.l1.local(i, a);
                if y >= nb {
                    let mut row = load.row_mut(y - nb);
                    row += moments.row(a) * self.spec.mu()[i];
                }
            }
        }
        let mut e = DMatrix::zeros(nv, (j + 1) * nb);
        e.view_mut((0, 0), (nb, nb)).fill_with_identity();
        if ni > 0 {
            e.view_mut((nb, 0), (ni, nb)).copy_from(&self.l1.ext_interior());
            e.view_mut((nb, nb), (ni, lower)).copy_from(&(-(&self.l1.q_ii_inv * load)));
        }
        if e.iter().any(|x| !x.is_finite()) {
            return Err(Error::Structural(format!("order-{j} transfer system is singular")));
        }
        Ok(e)
    }

    fn apply_fixed_point(&self, j: usize, g: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(g.nrows(), g.ncols());
        for (i, a) in self.letters[j].iter().enumerate() {
            out += a.transpose() * g * a * self.spec.mu()[i];
        }
        out
    }

    fn solve_gram(&self, j: usize) -> Result<(DMatrix<f64>, GramReport)> {
        let n = (j + 1) * self.nb();
        let c = self.constant_at(j);
        let mut t = DMatrix::<f64>::identity(n * n, n * n);
        for (i, a) in self.letters[j].iter().enumerate() {
            let at = a.transpose();
            t -= at.kronecker(&at) * self.spec.mu()[i];
        }
        let (vals, v) = sorted_svd(&t);
        let scale = vals[0].max(1.0);
        let nullity = vals.iter().filter(|&&s| s <= 1e-9 * scale).count();
        let normalize = |g: DMatrix<f64>| -> Option<DMatrix<f64>> {
            let g = (&g + g.transpose()) * 0.5;
            let cc = (c.transpose() * &g * &c)[(0, 0)];
            (cc.abs() > 1e-300).then(|| g / cc)
        };
        let mut fallback = false;
        let mut g = if nullity == 1 {
            normalize(DMatrix::from_column_slice(n, n, v.column(n * n - 1).as_slice()))
        } else {
            None
        };
        if g.is_none() {
            fallback = true;
            g = Some(self.power_gram(j, &c)?);
        }
        let g = g.unwrap();
        let residual = max_abs(&(&g - self.apply_fixed_point(j, &g)));
        let min_eig = g.clone().symmetric_eigenvalues().iter().fold(f64::INFINITY, |m, &x| m.min(x));
        if min_eig < -1e-9 * max_abs(&g) {
            return Err(Error::diag(format!("order-{j} Gram matrix is not positive semidefinite"), vec![min_eig]));
        }
        Ok((g, GramReport { residual, nullity, fallback }))
    }

    fn power_gram(&self, j: usize, c: &DVector<f64>) -> Result<DMatrix<f64>> {
        let n = (j + 1) * self.nb();
        let mut g = DMatrix::<f64>::identity(n, n);
        if j > 0 {
            let prev = &self.gram[j - 1];
            g.view_mut((0, 0), (prev.nrows(), prev.ncols())).copy_from(prev);
        }
        for _ in 0..5000 {
            let mut next = self.apply_fixed_point(j, &g);
            next = (&next + next.transpose()) * 0.5;
            let cc = (c.transpose() * &next * c)[(0, 0)];
            next /= cc;
            let change = max_abs(&(&next - &g));
            g = next;
            if change < 1e-15 {
                return Ok(g);
            }
        }
        let residual = max_abs(&(&g - self.apply_fixed_point(j, &g)));
        if residual < 1e-10 {
            Ok(g)
        } else {
            Err(Error::diag(format!("order-{j} Gram iteration did not converge"), vec![residual]))
        }
    }

    fn constant_at(&self, j: usize) -> DVector<f64> {
        let nb = self.nb();
        DVector::from_fn((j + 1) * nb, |r, _| if r < nb { 1.0 } else { 0.0 })
    }

    /// Jet of the constant function 1.
    pub fn constant(&self) -> DVector<f64> {
        self.constant_at(self.k)
    }

    /// Jet of `Δh`.
    pub fn laplacian(&self, jet: &DVector<f64>) -> DVector<f64> {
        let nb = self.nb();
        let n = self.dim();
        DVector::from_fn(n, |r, _| if r + nb < n { jet[r + nb] } else { 0.0 })
    }

    /// `A_w = A_{w_m} ⋯ A_{w_1}` on `H_k`.
    pub fn composition(&self, w: &Word) -> CompositionMatrix {
        self.composition_at(self.k, w)
    }

    pub fn composition_at(&self, j: usize, w: &Word) -> CompositionMatrix {
        let n = (j + 1) * self.nb();
        let mut m = DMatrix::identity(n, n);
        for &i in &w.0 {
            m = &self.letters[j][i] * m;
        }
        let r = self.spec.r_word(w);
        let mu = self.spec.mu_word(w);
        CompositionMatrix { word: w.clone(), k: j, nb: self.nb(), scale: r * mu, r, mu, matrix: m }
    }

    /// Exact values on `V_m` of the function with jet `jet ∈ H_j`.
    pub fn eval(&self, jet: &DVector<f64>, table: &VertexTable) -> Result<Vec<f64>> {
        let nb = self.nb();
        let j = jet.len() / nb - 1;
        if jet.len() % nb != 0 || j > self.k {
            return Err(Error::InvalidInput(format!("jet of length {} does not fit H_{}", jet.len(), self.k)));
        }
        let n = self.spec.n_letters();
        let m = table.level();
        let mut jets = vec![jet.clone()];
        for _ in 0..m {
            let mut next = Vec::with_capacity(jets.len() * n);
            for parent in &jets {
                for i in 0..n {
                    next.push(&self.letters[j][i] * parent);
                }
            }
            jets = next;
        }
        let mut out = vec![0.0; table.len()];
        for (w, x) in jets.iter().enumerate() {
            for (a, &v) in table.cell(m, w).iter().enumerate() {
                out[v] = x[a];
            }
        }
        Ok(out)
    }

    /// `∫ h dμ`.
    pub fn integrate(&self, jet: &DVector<f64>) -> f64 {
        let j = jet.len() / self.nb() - 1;
        (self.constant_at(j).transpose() * &self.gram[j] * jet)[(0, 0)]
    }

    /// `∫ u v dμ` for jets of the same order.
    pub fn inner(&self, u: &DVector<f64>, v: &DVector<f64>) -> f64 {
        let j = u.len() / self.nb() - 1;
        (u.transpose() * &self.gram[j] * v)[(0, 0)]
    }

    /// Zero-pad a jet of lower order to order `j`.
    pub fn lift(&self, jet: &DVector<f64>, j: usize) -> DVector<f64> {
        let n = (j + 1) * self.nb();
        DVector::from_fn(n, |r, _| if r < jet.len() { jet[r] } else { 0.0 })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fractal::builtin;

    #[test]
    fn interval_quadratic_midpoint() {
        let s = builtin("interval").unwrap();
        let js = JetSpace::new(&s, 1).unwrap();
        let jet = DVector::from_vec(vec![0.0, 0.0, 2.0, 2.0]);
        let t = js.transfer();
        let mid = js.level_one().table.cell(1, 0)[1];
        let v = &t * &jet;
        assert!((v[mid] + 0.25).abs() < 1e-14);
        assert!((v[3 + mid] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn interval_gram_moments() {
        let s = builtin("interval").unwrap();
        let js = JetSpace::new(&s, 0).unwrap();
        let g = js.gram();
        // basis {h_0 = 1 - x, h_1 = x}
        assert!((g[(0, 0)] - 1.0 / 3.0).abs() < 1e-12);
        assert!((g[(0, 1)] - 1.0 / 6.0).abs() < 1e-12);
    }
}
