//! Discrete Dirichlet forms, harmonic extension and effective resistance.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::fractal::{FractalSpec, VertexTable};
use crate::linalg::{inverse, max_abs};

/// The level-1 network of a spec: the pattern every cell refines into.
#[derive(Debug, Clone)]
pub struct LevelOne {
    pub table: VertexTable,
    /// Positive semidefinite graph Laplacian `Σ r_i^{-1} P_i^T (-H) P_i` on `V_1`.
    pub q: DMatrix<f64>,
    /// Harmonic extension `V_0 -> V_1` (rows for `V_0` are the identity).
    pub ext: DMatrix<f64>,
    /// Inverse of the interior block of `q`.
    pub q_ii_inv: DMatrix<f64>,
    /// For each interior vertex, one (letter, boundary index) pair reaching it.
    pub reps: Vec<(usize, usize)>,
}

impl LevelOne {
    pub fn new(spec: &FractalSpec) -> Result<Self> {
        let nb = spec.nb();
        let table = VertexTable::build(spec, 1);
        let q = level_matrix(spec, &table);
        let nv = table.len();
        let ni = nv - nb;
        let q_ii = q.view((nb, nb), (ni, ni)).into_owned();
        let q_ii_inv = if ni == 0 {
            DMatrix::zeros(0, 0)
        } else {
            q_ii.clone()
                .cholesky()
                .map(|c| c.inverse())
                .ok_or_else(|| Error::Structural("interior block of the level-1 Laplacian is singular".into()))?
        };
        let q_ib = q.view((nb, 0), (ni, nb)).into_owned();
        let mut ext = DMatrix::zeros(nv, nb);
        ext.view_mut((0, 0), (nb, nb)).fill_with_identity();
        if ni > 0 {
            ext.view_mut((nb, 0), (ni, nb)).copy_from(&(-(&q_ii_inv * q_ib)));
        }
        let mut reps = vec![(usize::MAX, 0); ni];
        for i in 0..spec.n_letters() {
            for a in 0..nb {
                let v = table.cell(1, i)[a];
                if v >= nb && reps[v - nb].0 == usize::MAX {
                    reps[v - nb] = (i, a);
                }
            }
        }
        Ok(LevelOne { table, q, ext, q_ii_inv, reps })
    }

    pub fn nb(&self) -> usize {
        self.ext.ncols()
    }

    pub fn n_interior(&self) -> usize {
        self.reps.len()
    }

    /// Local `V_1` id of `F_i p_a`.
    pub fn local(&self, i: usize, a: usize) -> usize {
        self.table.cell(1, i)[a]
    }

    /// Interior rows of the extension operator.
    pub fn ext_interior(&self) -> DMatrix<f64> {
        let nb = self.nb();
        self.ext.view((nb, 0), (self.n_interior(), nb)).into_owned()
    }

    /// Schur complement of `q` onto `V_0` (positive semidefinite).
    pub fn trace_form(&self) -> DMatrix<f64> {
        let nb = self.nb();
        let q_bb = self.q.view((0, 0), (nb, nb)).into_owned();
        let q_bi = self.q.view((0, nb), (nb, self.n_interior())).into_owned();
        q_bb + q_bi * self.ext_interior()
    }
}

/// Per-letter harmonic extension matrices `Ψ_i`.
#[derive(Debug, Clone)]
pub struct ExtensionMatrices {
    pub psi: Vec<DMatrix<f64>>,
}

/// `Ψ_i` maps `V_0` values of a harmonic function to its values on `F_i V_0`.
pub fn harmonic_extension(spec: &FractalSpec) -> Result<ExtensionMatrices> {
    let l1 = LevelOne::new(spec)?;
    Ok(extension_from(spec, &l1))
}

pub(crate) fn extension_from(spec: &FractalSpec, l1: &LevelOne) -> ExtensionMatrices {
    let nb = spec.nb();
    let psi = (0..spec.n_letters())
        .map(|i| DMatrix::from_fn(nb, nb, |a, b| l1.ext[(l1.local(i, a), b)]))
        .collect();
    ExtensionMatrices { psi }
}

/// Largest entry of `S - (-H)` where `S` is the trace of `ℰ_1` on `V_0`.
///
/// This bounds `|min ℰ_1(g) - ℰ_0(f)|` over all unit boundary data and all
/// polarized pairs; it vanishes exactly when `(H, r)` is a harmonic structure.
pub fn verify_harmonic_structure(spec: &FractalSpec) -> Result<f64> {
    let l1 = LevelOne::new(spec)?;
    Ok(max_abs(&(l1.trace_form() + spec.h())))
}

/// `ℰ_0(u, v) = -(u, H v)`.
pub fn energy0(spec: &FractalSpec, u: &[f64], v: &[f64]) -> f64 {
    let h = spec.h();
    let nb = spec.nb();
    let mut s = 0.0;
    for p in 0..nb {
        for q in 0..nb {
            s -= u[p] * h[(p, q)] * v[q];
        }
    }
    s
}

/// `ℰ_m(f) = Σ_{w ∈ W_m} r_w^{-1} ℰ_0(f ∘ F_w)`.
pub fn energy_m(spec: &FractalSpec, table: &VertexTable, values: &[f64]) -> Result<f64> {
    if values.len() != table.len() {
        return Err(Error::InvalidInput(format!(
            "expected {} values on V_{}, got {}",
            table.len(),
            table.level(),
            values.len()
        )));
    }
    let m = table.level();
    let rw = FractalSpec::word_products(spec.r(), m);
    let h = spec.h();
    let nb = spec.nb();
    let mut total = 0.0;
    for (w, &r) in rw.iter().enumerate() {
        let cell = table.cell(m, w);
        let mut e = 0.0;
        for p in 0..nb {
            for q in (p + 1)..nb {
                let d = values[cell[p]] - values[cell[q]];
                e += h[(p, q)] * d * d;
            }
        }
        total += e / r;
    }
    Ok(total)
}

/// Dense level-`m` Laplacian `Q_m` (positive semidefinite, `ℰ_m(f) = f^T Q_m f`).
pub fn level_matrix(spec: &FractalSpec, table: &VertexTable) -> DMatrix<f64> {
    let m = table.level();
    let rw = FractalSpec::word_products(spec.r(), m);
    let h = spec.h();
    let nb = spec.nb();
    let mut q = DMatrix::zeros(table.len(), table.len());
    for (w, &r) in rw.iter().enumerate() {
        let cell = table.cell(m, w);
        for a in 0..nb {
            for b in 0..nb {
                q[(cell[a], cell[b])] -= h[(a, b)] / r;
            }
        }
    }
    q
}

/// `(Q_m f)` evaluated cell by cell.
pub fn apply_level_matrix(spec: &FractalSpec, table: &VertexTable, f: &[f64]) -> Vec<f64> {
    let m = table.level();
    let rw = FractalSpec::word_products(spec.r(), m);
    let h = spec.h();
    let nb = spec.nb();
    let mut out = vec![0.0; table.len()];
    for (w, &r) in rw.iter().enumerate() {
        let cell = table.cell(m, w);
        for a in 0..nb {
            let mut s = 0.0;
            for b in 0..nb {
                s -= h[(a, b)] * f[cell[b]];
            }
            out[cell[a]] += s / r;
        }
    }
    out
}

/// Boundary treatment for [`Network::solve`].
#[derive(Debug, Clone, Copy)]
pub enum Boundary<'a> {
    /// Prescribed values on `V_0`.
    Dirichlet(&'a [f64]),
    /// No constraint; loads must balance, and the solution is grounded at `p_1`.
    Free,
}

/// Linear-cost solver for `Q_m u = b` by static condensation cell by cell.
///
/// Relies on `(H, r)` being a harmonic structure: the condensed stiffness of
/// every cell `F_w` is then `r_w^{-1}(-H)`, so only loads travel up the tree.
#[derive(Debug, Clone)]
pub struct Network<'a> {
    spec: &'a FractalSpec,
    table: &'a VertexTable,
    l1: LevelOne,
    x_int: DMatrix<f64>,
}

impl<'a> Network<'a> {
    pub fn new(spec: &'a FractalSpec, table: &'a VertexTable) -> Result<Self> {
        let l1 = LevelOne::new(spec)?;
        let x_int = l1.ext_interior();
        Ok(Network { spec, table, l1, x_int })
    }

    pub fn table(&self) -> &VertexTable {
        self.table
    }

    pub fn solve(&self, boundary: Boundary<'_>, load: &[f64]) -> Result<Vec<f64>> {
        let t = self.table;
        let m = t.level();
        let n = self.spec.n_letters();
        let nb = self.spec.nb();
        let ni = self.l1.n_interior();
        let nv1 = nb + ni;
        if load.len() != t.len() {
            return Err(Error::InvalidInput(format!("load has {} entries, V_{m} has {}", load.len(), t.len())));
        }
        // upward pass: condensed loads per cell, levels m..0
        let mut g: Vec<Vec<f64>> = vec![Vec::new(); m + 1];
        g[m] = vec![0.0; t.n_cells(m) * nb];
        let assemble = |k: usize, u: usize, child: &[f64]| -> DVector<f64> {
            let mut loc = DVector::zeros(nv1);
            for i in 0..n {
                for a in 0..nb {
                    loc[self.l1.local(i, a)] += child[(u * n + i) * nb + a];
                }
            }
            for (y, &(i, a)) in self.l1.reps.iter().enumerate() {
                loc[nb + y] += load[t.cell(k + 1, u * n + i)[a]];
            }
            loc
        };
        for k in (0..m).rev() {
            let mut level = vec![0.0; t.n_cells(k) * nb];
            for u in 0..t.n_cells(k) {
                let loc = assemble(k, u, &g[k + 1]);
                let gi = loc.rows(nb, ni);
                let gb = loc.rows(0, nb) + self.x_int.transpose() * gi;
                level[u * nb..(u + 1) * nb].copy_from_slice(gb.as_slice());
            }
            g[k] = level;
        }
        let mut u = vec![0.0; t.len()];
        match boundary {
            Boundary::Dirichlet(vals) => {
                if vals.len() != nb {
                    return Err(Error::InvalidInput(format!("expected {nb} boundary values")));
                }
                u[..nb].copy_from_slice(vals);
            }
            Boundary::Free => {
                let total: f64 = load.iter().sum();
                let scale = load.iter().fold(0.0f64, |s, x| s + x.abs()).max(1.0);
                if total.abs() > 1e-9 * scale {
                    return Err(Error::InvalidInput(format!("free solve needs balanced loads, total {total}")));
                }
                let rhs = DVector::from_fn(nb, |a, _| g[0][a] + load[a]);
                let s = -self.spec.h();
                let grounded = s.view((1, 1), (nb - 1, nb - 1)).into_owned();
                let sol = inverse(&grounded, "grounded boundary form")? * rhs.rows(1, nb - 1);
                for a in 1..nb {
                    u[a] = sol[a - 1];
                }
            }
        }
        // downward pass
        let rw = |k: usize, w: usize| -> f64 {
            let mut r = 1.0;
            let mut idx = w;
            for _ in 0..k {
                r *= self.spec.r()[idx % n];
                idx /= n;
            }
            r
        };
        for k in 0..m {
            for w in 0..t.n_cells(k) {
                let loc = assemble(k, w, &g[k + 1]);
                let ub = DVector::from_fn(nb, |a, _| u[t.cell(k, w)[a]]);
                let ui = &self.x_int * ub + (&self.l1.q_ii_inv * loc.rows(nb, ni)) * rw(k, w);
                for (y, &(i, a)) in self.l1.reps.iter().enumerate() {
                    u[t.cell(k + 1, w * n + i)[a]] = ui[y];
                }
            }
        }
        Ok(u)
    }
}

impl Network<'_> {
    /// `R(x, V_0)` at every vertex (zero on `V_0`), in one pass down the cell tree.
    ///
    /// The grounded Green matrix on the corners of a child cell is the parent's
    /// lifted by the harmonic extension plus `r_w` times the level-one interior
    /// Green matrix.
    pub fn boundary_resistances(&self) -> Vec<f64> {
        let t = self.table;
        let n = self.spec.n_letters();
        let nb = self.spec.nb();
        let ni = self.l1.n_interior();
        let mut lift = DMatrix::zeros(nb + ni, nb);
        lift.view_mut((0, 0), (nb, nb)).fill_with_identity();
        lift.view_mut((nb, 0), (ni, nb)).copy_from(&self.x_int);
        let mut out = vec![0.0; t.len()];
        let mut cells = vec![(DMatrix::<f64>::zeros(nb, nb), 1.0)];
        for k in 0..t.level() {
            let mut next = Vec::with_capacity(cells.len() * n);
            for (w, (g, r)) in cells.iter().enumerate() {
                let mut full = &lift * g * lift.transpose();
                let mut inner = full.view_mut((nb, nb), (ni, ni));
                inner += &self.l1.q_ii_inv * *r;
                for (y, &(i, a)) in self.l1.reps.iter().enumerate() {
                    out[t.cell(k + 1, w * n + i)[a]] = full[(nb + y, nb + y)];
                }
                for i in 0..n {
                    let child = DMatrix::from_fn(nb, nb, |a, b| full[(self.l1.local(i, a), self.l1.local(i, b))]);
                    next.push((child, r * self.spec.r()[i]));
                }
            }
            cells = next;
        }
        out
    }
}

/// Target of a resistance computation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    Vertex(usize),
    Boundary,
}

/// Effective resistance between `x` and a vertex or the whole `V_0`, from `ℰ_m`.
pub fn resistance(net: &Network<'_>, x: usize, y: Target) -> Result<f64> {
    let t = net.table();
    let nv = t.len();
    if x >= nv {
        return Err(Error::InvalidInput(format!("vertex {x} is not in V_{}", t.level())));
    }
    match y {
        Target::Vertex(y) => {
            if y >= nv {
                return Err(Error::InvalidInput(format!("vertex {y} is not in V_{}", t.level())));
            }
            if x == y {
                return Err(Error::InvalidInput("resistance needs two distinct vertices".into()));
            }
            let mut load = vec![0.0; nv];
            load[x] = 1.0;
            load[y] = -1.0;
            let u = net.solve(Boundary::Free, &load)?;
            Ok(u[x] - u[y])
        }
        Target::Boundary => {
            if t.is_boundary(x) {
                return Err(Error::InvalidInput("vertex lies in V_0".into()));
            }
            let mut load = vec![0.0; nv];
            load[x] = 1.0;
            let zero = vec![0.0; t.nb()];
            let u = net.solve(Boundary::Dirichlet(&zero), &load)?;
            Ok(u[x])
        }
    }
}
