//! Detection of D3 symmetry by brute-force search over letter permutations.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DVector;

use crate::energy::harmonic_extension;
use crate::fractal::{FractalSpec, VertexTable};

/// A spec with three boundary points `p_i = F_{letters[i]} p_i` on which the
/// full permutation group of `V_0` acts by automorphisms of the structure.
#[derive(Debug, Clone, PartialEq)]
pub struct D3 {
    pub letters: [usize; 3],
    pub iota: [f64; 3],
}

const PERMS3: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];

impl D3 {
    pub fn detect(spec: &FractalSpec) -> Option<D3> {
        if spec.nb() != 3 || !spec.check_a1().0 {
            return None;
        }
        let mut letters = [0; 3];
        for (p, list) in spec.addresses().iter().enumerate() {
            let a = &list[0];
            if !a.is_purely_periodic() || a.period().len() != 1 {
                return None;
            }
            letters[p] = a.period().0[0];
        }
        let table = VertexTable::build(spec, 1);
        let n = spec.n_letters();
        for pi in PERMS3 {
            if !form_invariant(spec, &pi) {
                return None;
            }
            let mut phi = vec![usize::MAX; n];
            let mut used = vec![false; n];
            for p in 0..3 {
                phi[letters[p]] = letters[pi[p]];
                used[letters[pi[p]]] = true;
            }
            if !search(spec, &table, &pi, &mut phi, &mut used, 0) {
                return None;
            }
        }
        let psi = harmonic_extension(spec).ok()?.psi;
        let mut iota = [0.0; 3];
        for p in 0..3 {
            let mut h = DVector::zeros(3);
            h[(p + 1) % 3] = 1.0;
            h[(p + 2) % 3] = -1.0;
            let image = &psi[letters[p]] * &h;
            iota[p] = image[(p + 1) % 3];
            if (image - &h * iota[p]).amax() > 1e-10 {
                return None;
            }
        }
        Some(D3 { letters, iota })
    }
}

fn form_invariant(spec: &FractalSpec, pi: &[usize; 3]) -> bool {
    let h = spec.h();
    let scale = h.amax();
    (0..3).all(|a| (0..3).all(|b| (h[(pi[a], pi[b])] - h[(a, b)]).abs() <= 1e-12 * scale))
}

fn search(spec: &FractalSpec, table: &VertexTable, pi: &[usize; 3], phi: &mut Vec<usize>, used: &mut Vec<bool>, i: usize) -> bool {
    let n = spec.n_letters();
    if i == n {
        return consistent(spec, table, pi, phi);
    }
    if phi[i] != usize::MAX {
        return search(spec, table, pi, phi, used, i + 1);
    }
    for j in 0..n {
        if used[j] {
            continue;
        }
        phi[i] = j;
        used[j] = true;
        if search(spec, table, pi, phi, used, i + 1) {
            return true;
        }
        used[j] = false;
        phi[i] = usize::MAX;
    }
    false
}

fn consistent(spec: &FractalSpec, table: &VertexTable, pi: &[usize; 3], phi: &[usize]) -> bool {
    let n = spec.n_letters();
    let same = |x: f64, y: f64| (x - y).abs() <= 1e-12 * x.abs().max(y.abs());
    if (0..n).any(|i| !same(spec.r()[phi[i]], spec.r()[i]) || !same(spec.mu()[phi[i]], spec.mu()[i])) {
        return false;
    }
    // (i, a) -> (phi i, pi a) must induce a well-defined map on V_1
    let mut image = vec![usize::MAX; table.len()];
    for i in 0..n {
        for a in 0..3 {
            let v = table.cell(1, i)[a];
            let g = table.cell(1, phi[i])[pi[a]];
            if image[v] == usize::MAX {
                image[v] = g;
            } else if image[v] != g {
                return false;
            }
        }
    }
    let mut hit = vec![false; table.len()];
    image.iter().all(|&g| !core::mem::replace(&mut hit[g], true))
}
