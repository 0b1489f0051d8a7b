//! Self-similar measure, dimensions, discrete Laplacian and boundary derivatives.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::energy::{apply_level_matrix, Boundary, Network};
use crate::error::{Error, Result};
use crate::fractal::{FractalSpec, VertexTable, Word};
use crate::symmetry::D3;
use crate::tol::Tol;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dims {
    pub d_h: f64,
    pub d_s: f64,
    pub a2_holds: bool,
    pub a2_residual: f64,
}

/// `d_H` from `μ_i = r_i^{d_H}` and `d_S = 2 d_H / (1 + d_H)`.
pub fn dims(spec: &FractalSpec) -> Dims {
    let (r, mu) = (spec.r(), spec.mu());
    let d_h = libm::log(mu[0]) / libm::log(r[0]);
    let a2_residual = r.iter().zip(mu).map(|(&ri, &mi)| (mi - libm::pow(ri, d_h)).abs()).fold(0.0, f64::max);
    Dims { d_h, d_s: 2.0 * d_h / (1.0 + d_h), a2_holds: a2_residual < 1e-12, a2_residual }
}

/// `Λ(t) = {u : r_u <= t < r_{u*}}` in lexicographic order.
pub fn partition(spec: &FractalSpec, t: f64) -> Result<Vec<Word>> {
    if !(t > 0.0 && t <= 1.0) {
        return Err(Error::InvalidInput(format!("scale {t} is not in (0,1]")));
    }
    let mut out = Vec::new();
    let mut stack = vec![(Word::empty(), 1.0)];
    while let Some((w, rw)) = stack.pop() {
        if rw <= t && !w.is_empty() {
            out.push(w);
            continue;
        }
        for i in (0..spec.n_letters()).rev() {
            let mut child = w.0.clone();
            child.push(i);
            stack.push((Word(child), rw * spec.r()[i]));
        }
    }
    Ok(out)
}

/// `Σ_{w ∋ x} μ_w / |V_0|` for every vertex of `V_m`.
pub fn vertex_masses(spec: &FractalSpec, table: &VertexTable) -> Vec<f64> {
    let m = table.level();
    let nb = spec.nb() as f64;
    let mut mass = vec![0.0; table.len()];
    for (w, mw) in FractalSpec::word_products(spec.mu(), m).into_iter().enumerate() {
        for &v in table.cell(m, w) {
            mass[v] += mw / nb;
        }
    }
    mass
}

/// `Σ_w μ_w · mean(f on F_w V_0)`.
pub fn quadrature(spec: &FractalSpec, table: &VertexTable, f: &[f64]) -> Result<f64> {
    check_len(table, f)?;
    let m = table.level();
    let nb = spec.nb() as f64;
    Ok(FractalSpec::word_products(spec.mu(), m)
        .into_iter()
        .enumerate()
        .map(|(w, mw)| mw * table.cell(m, w).iter().map(|&v| f[v]).sum::<f64>() / nb)
        .sum())
}

fn check_len(table: &VertexTable, f: &[f64]) -> Result<()> {
    if f.len() != table.len() {
        return Err(Error::InvalidInput(format!(
            "expected {} values on V_{}, got {}",
            table.len(),
            table.level(),
            f.len()
        )));
    }
    Ok(())
}

/// `Δ_m f(x) = -(Q_m f)(x) / mass(x)` on `V_m \ V_0`, indexed by `id - |V_0|`.
pub fn graph_laplacian(spec: &FractalSpec, table: &VertexTable, f: &[f64]) -> Result<Vec<f64>> {
    check_len(table, f)?;
    if table.level() == 0 {
        return Err(Error::InvalidInput("the discrete Laplacian needs m >= 1".into()));
    }
    let qf = apply_level_matrix(spec, table, f);
    let mass = vertex_masses(spec, table);
    let nb = spec.nb();
    Ok((nb..table.len()).map(|x| -qf[x] / mass[x]).collect())
}

/// Solve `Δ_m u = rhs` on `V_m \ V_0` with `u = 0` on `V_0`.
pub fn dirichlet_solve(spec: &FractalSpec, table: &VertexTable, rhs: &[f64]) -> Result<Vec<f64>> {
    let nb = spec.nb();
    if rhs.len() != table.len() - nb {
        return Err(Error::InvalidInput(format!("expected {} interior values", table.len() - nb)));
    }
    let mass = vertex_masses(spec, table);
    let mut load = vec![0.0; table.len()];
    for (i, &g) in rhs.iter().enumerate() {
        load[nb + i] = -mass[nb + i] * g;
    }
    let net = Network::new(spec, table)?;
    let zero = vec![0.0; nb];
    net.solve(Boundary::Dirichlet(&zero), &load)
}

/// Accept `seq.last()` once two successive terms agree; otherwise try an Aitken transform.
pub(crate) fn settle(seq: &[f64], tol: f64) -> Option<f64> {
    let close = |a: f64, b: f64| (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0);
    if seq.len() >= 2 && close(seq[seq.len() - 1], seq[seq.len() - 2]) {
        return Some(seq[seq.len() - 1]);
    }
    if seq.len() >= 4 {
        let aitken: Vec<f64> = seq
            .windows(3)
            .map(|w| {
                let d2 = w[2] - 2.0 * w[1] + w[0];
                if d2.abs() < f64::MIN_POSITIVE {
                    w[2]
                } else {
                    w[2] - (w[2] - w[1]) * (w[2] - w[1]) / d2
                }
            })
            .collect();
        if close(aitken[aitken.len() - 1], aitken[aitken.len() - 2]) {
            return Some(aitken[aitken.len() - 1]);
        }
    }
    None
}

/// Scaled boundary-form rows `Σ_ω r_{[ω]_n}^{-1} (-H f∘F_{[ω]_n})_{b(σ^n ω)}`, `n = 0..=depth`.
pub fn normal_derivative_sequence(spec: &FractalSpec, table: &VertexTable, f: &[f64], p: usize) -> Result<Vec<f64>> {
    check_len(table, f)?;
    if p >= spec.nb() {
        return Err(Error::InvalidInput(format!("boundary index {} out of range", p + 1)));
    }
    let h = spec.h();
    let nb = spec.nb();
    let depth = table.level().min(20);
    let mut seq = Vec::with_capacity(depth + 1);
    for n in 0..=depth {
        let mut total = 0.0;
        let mut seen: Vec<Word> = Vec::new();
        for omega in &spec.addresses()[p] {
            let w = omega.truncate(n);
            if seen.contains(&w) {
                continue;
            }
            let mut rest = omega.clone();
            for _ in 0..n {
                rest = rest.shift();
            }
            let b = spec.boundary_of(&rest).expect("shift-closed");
            let cell = table.cell(n, w.index(spec.n_letters()));
            let row: f64 = (0..nb).map(|c| -h[(b, c)] * f[cell[c]]).sum();
            total += row / spec.r_word(&w);
            seen.push(w);
        }
        seq.push(total);
    }
    Ok(seq)
}

/// Limit of [`normal_derivative_sequence`]; harmonic data give `-(Hf)(p)` at once.
pub fn normal_derivative(spec: &FractalSpec, table: &VertexTable, f: &[f64], p: usize, tol: &Tol) -> Result<f64> {
    let seq = normal_derivative_sequence(spec, table, f, p)?;
    settle(&seq, tol.limit).ok_or_else(|| Error::diag("normal derivative did not settle", seq))
}

/// `ι^{-n} (f(F_i^n p_{i+1}) - f(F_i^n p_{i+2}))` for a D3-symmetric spec.
pub fn tangential_derivative(spec: &FractalSpec, table: &VertexTable, f: &[f64], p: usize, tol: &Tol) -> Result<f64> {
    check_len(table, f)?;
    let d3 = D3::detect(spec).ok_or_else(|| Error::Unsupported("tangential derivatives need a D3-symmetric spec".into()))?;
    let letter = d3.letters[p];
    let iota = d3.iota[p];
    let depth = table.level().min(40);
    let mut seq = Vec::with_capacity(depth + 1);
    for n in 0..=depth {
        let w = Word(vec![letter; n]);
        let cell = table.cell(n, w.index(spec.n_letters()));
        let d = f[cell[(p + 1) % 3]] - f[cell[(p + 2) % 3]];
        seq.push(d / libm::pow(iota, n as f64));
    }
    settle(&seq, tol.limit).ok_or_else(|| Error::diag("tangential derivative did not settle", seq))
}

/// `ι_i` with `A_i h_T = ι_i h_T`.
pub fn iota(spec: &FractalSpec, p: usize) -> Result<f64> {
    let d3 = D3::detect(spec).ok_or_else(|| Error::Unsupported("ι is only defined for D3-symmetric specs".into()))?;
    d3.iota.get(p).copied().ok_or_else(|| Error::InvalidInput(format!("boundary index {} out of range", p + 1)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fractal::builtin;

    #[test]
    fn mixed_partition() {
        let base = builtin("interval").unwrap();
        let s = base.with_resistances(vec![0.5, 0.25]).unwrap();
        let p = partition(&s, 0.25).unwrap();
        let names: Vec<_> = p.iter().map(|w| alloc::format!("{w}")).collect();
        assert_eq!(names, ["11", "12", "2"]);
    }

    #[test]
    fn aitken_accelerates_geometric_tail() {
        let seq: Vec<f64> = (0..8).map(|n| 2.0 + libm::pow(1.0 / 3.0, n as f64)).collect();
        let v = settle(&seq, 1e-8).unwrap();
        assert!((v - 2.0).abs() < 1e-10);
    }
}
