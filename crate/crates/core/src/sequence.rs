//! Truncated weighted sequence spaces `l²(X;α)` and `l²(X,A;α)` over `X = ℝ^d`.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::left_inverse;
use crate::spectral::{orbit_series, SpectrumLadder};
use crate::tol::Tol;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormKind {
    Plain,
    Operator,
}

/// `s_0..s_N` with weight `α` and operator `A`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedSeq {
    pub elements: Vec<DVector<f64>>,
    pub alpha: f64,
    pub a: DMatrix<f64>,
    pub kind: NormKind,
}

impl WeightedSeq {
    pub fn new(elements: Vec<DVector<f64>>, alpha: f64, a: DMatrix<f64>) -> Result<Self> {
        if !(alpha > 0.0) {
            return Err(Error::InvalidInput(format!("weight {alpha} must be positive")));
        }
        if a.nrows() != a.ncols() || elements.iter().any(|s| s.len() != a.nrows()) {
            return Err(Error::InvalidInput("sequence elements must match the operator".into()));
        }
        Ok(WeightedSeq { elements, alpha, a, kind: NormKind::Operator })
    }

    /// The first `len` terms of `S_A(s) = {A^n s}`.
    pub fn orbit(a: &DMatrix<f64>, s: &DVector<f64>, len: usize, alpha: f64) -> Result<Self> {
        let mut elements = Vec::with_capacity(len);
        let mut x = s.clone();
        for _ in 0..len {
            elements.push(x.clone());
            x = a * x;
        }
        Self::new(elements, alpha, a.clone())
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// `{s_{n+1} - A s_n}` for `n = 0..N-1`.
    pub fn increments(&self) -> Vec<DVector<f64>> {
        self.elements.windows(2).map(|w| &w[1] - &self.a * &w[0]).collect()
    }

    pub fn norm(&self) -> f64 {
        let (plain, op) = seq_norms(self);
        match self.kind {
            NormKind::Plain => plain,
            NormKind::Operator => op,
        }
    }
}

/// `(sqrt Σ α^{-2n} ‖x_n‖²)` for a truncated sequence.
pub fn plain_norm(xs: &[DVector<f64>], alpha: f64) -> f64 {
    // weights in log scale so that long sequences neither overflow nor underflow
    let la = libm::log(alpha);
    let mut total = 0.0;
    for (n, x) in xs.iter().enumerate() {
        let v = x.norm();
        if v > 0.0 {
            total += libm::exp(2.0 * (libm::log(v) - n as f64 * la));
        }
    }
    libm::sqrt(total)
}

/// `(‖s‖_{l²(X;α)}, ‖s‖_{l²(X,A;α)})` on the truncation.
pub fn seq_norms(seq: &WeightedSeq) -> (f64, f64) {
    if seq.elements.is_empty() {
        return (0.0, 0.0);
    }
    let plain = plain_norm(&seq.elements, seq.alpha);
    let op = plain_norm(&seq.increments(), seq.alpha) + seq.elements[0].norm();
    (plain, op)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    /// Index of the last class of `A` above `α`; `-1` when none is.
    pub l: i64,
    pub s_lim: DVector<f64>,
    /// `s_n - A^n s_lim`.
    pub remainder: Vec<DVector<f64>>,
    pub remainder_norm: f64,
    pub reconstruction_error: f64,
}

/// `s = S_A(s_lim) + remainder` with `s_lim ∈ Ẽ_l` and `remainder ∈ l²(X;α)`.
pub fn decompose(seq: &WeightedSeq, tol: &Tol) -> Result<Decomposition> {
    if seq.elements.is_empty() {
        return Err(Error::InvalidInput("empty sequence".into()));
    }
    let ladder = SpectrumLadder::from_matrix(&seq.a, tol)?;
    let report = closure_test_with(&ladder, seq.alpha, tol);
    if let Some(&class) = report.classes.first() {
        return Err(Error::Critical { alpha: seq.alpha, class });
    }
    let l = ladder.classes.iter().take_while(|c| c.magnitude > seq.alpha).count() as i64 - 1;
    let n = seq.a.nrows();
    let s_lim = if l < 0 { DVector::zeros(n) } else { orbit_series(&seq.elements, &seq.a, &ladder, l, tol)?.0 };
    let mut remainder = Vec::with_capacity(seq.len());
    let mut orbit = s_lim.clone();
    let mut err: f64 = 0.0;
    for s in &seq.elements {
        let r = s - &orbit;
        err = err.max((&orbit + &r - s).amax());
        remainder.push(r);
        orbit = &seq.a * orbit;
    }
    let remainder_norm = plain_norm(&remainder, seq.alpha);
    Ok(Decomposition { l, s_lim, remainder, remainder_norm, reconstruction_error: err })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClosureReport {
    pub critical: bool,
    pub classes: Vec<usize>,
}

/// Whether `α` is one of the eigenvalue magnitudes of `A`.
pub fn closure_test(a: &DMatrix<f64>, alpha: f64, tol: &Tol) -> Result<ClosureReport> {
    Ok(closure_test_with(&SpectrumLadder::from_matrix(a, tol)?, alpha, tol))
}

pub fn closure_test_with(ladder: &SpectrumLadder, alpha: f64, tol: &Tol) -> ClosureReport {
    let classes: Vec<usize> = ladder
        .classes
        .iter()
        .enumerate()
        .filter(|(_, c)| (c.magnitude - alpha).abs() <= tol.critical * c.magnitude)
        .map(|(i, _)| i)
        .collect();
    ClosureReport { critical: !classes.is_empty(), classes }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApproxOrbit {
    pub seq: WeightedSeq,
    /// `‖S_A(s) - seq‖_{l²(X,A;α)}`.
    pub distance: f64,
}

/// Finitely supported sequence approximating `S_A(s)` in `l²(X,A;|λ|)`.
///
/// Normalized by `u_n = λ^{-n} s_n`, stage `k` runs over `m_k` steps of
/// `u_n = (A/λ) u_{n-1} - a_k s^{(k)} / m_k` where `s^{(k)} = (A-λ)^k s` and
/// `a_k` is the leading chain coefficient at the start of the stage.
pub fn approx_orbit(a: &DMatrix<f64>, lambda: f64, s: &DVector<f64>, schedule: &[usize]) -> Result<ApproxOrbit> {
    let n = a.nrows();
    if !(lambda.abs() > 0.0) || s.len() != n {
        return Err(Error::InvalidInput("need a nonzero real eigenvalue and a seed in X".into()));
    }
    let alpha = lambda.abs();
    let scale = s.amax().max(f64::MIN_POSITIVE);
    let shifted = a - DMatrix::identity(n, n) * lambda;
    let mut chain = Vec::new();
    let mut x = s.clone();
    while x.amax() > 1e-10 * scale * (1.0 + a.amax()) {
        if chain.len() == n {
            return Err(Error::InvalidInput(format!("seed is not in the generalized eigenspace of {lambda}")));
        }
        chain.push(x.clone());
        x = &shifted * x;
    }
    if chain.is_empty() {
        let seq = WeightedSeq::new(alloc::vec![DVector::zeros(n)], alpha, a.clone())?;
        return Ok(ApproxOrbit { seq, distance: 0.0 });
    }
    let d = chain.len() - 1;
    if schedule.len() != d + 1 || schedule.contains(&0) {
        return Err(Error::InvalidInput(format!("schedule needs {} positive stage lengths", d + 1)));
    }
    let mut basis = DMatrix::zeros(n, d + 1);
    for (c, v) in chain.iter().enumerate() {
        basis.set_column(c, v);
    }
    let coords = left_inverse(&basis)?;
    let step = a / lambda;
    let mut elements = alloc::vec![s.clone()];
    let mut u = s.clone();
    let mut power = 1.0;
    // increments s_{n+1} - A s_n = λ^{n+1} (u_{n+1} - (A/λ) u_n), weighted by α^{-n}
    let mut dist2 = 0.0;
    for (k, &m) in schedule.iter().enumerate() {
        let a_k = (&coords * &u)[k];
        let kick = &chain[k] * (a_k / m as f64);
        for _ in 0..m {
            u = &step * &u - &kick;
            dist2 += kick.norm_squared();
            power *= lambda;
            elements.push(&u * power);
        }
    }
    dist2 += (&step * &u).norm_squared();
    elements.push(DVector::zeros(n));
    let seq = WeightedSeq::new(elements, alpha, a.clone())?;
    let distance = alpha * libm::sqrt(dist2);
    Ok(ApproxOrbit { seq, distance })
}

/// `α^{1-θ} β^θ`.
pub fn interp_weight(alpha: f64, beta: f64, theta: f64) -> f64 {
    libm::pow(alpha, 1.0 - theta) * libm::pow(beta, theta)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_sequence_norms() {
        let a = DMatrix::from_element(1, 1, 1.0);
        let s = WeightedSeq::new((0..10).map(|_| DVector::from_element(1, 1.0)).collect(), 0.5, a).unwrap();
        let (plain, op) = seq_norms(&s);
        assert!((op - 1.0).abs() < 1e-15);
        assert!(plain > 500.0);
    }

    #[test]
    fn eigenvector_damping_rate() {
        let a = DMatrix::from_element(1, 1, 0.5);
        let s = DVector::from_element(1, 1.0);
        let d1 = approx_orbit(&a, 0.5, &s, &[100]).unwrap().distance;
        let d4 = approx_orbit(&a, 0.5, &s, &[400]).unwrap().distance;
        assert!((d1 / d4 - 2.0).abs() < 1e-9);
    }
}
