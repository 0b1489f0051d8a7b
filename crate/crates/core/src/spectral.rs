//! Eigen-ladders of composition operators, Sobolev scales, critical orders
//! and boundary tangents.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::fractal::{Address, FractalSpec, VertexTable, Word};
use crate::jets::{CompositionMatrix, JetSpace};
use crate::linalg::{inverse, left_inverse, max_abs, numerical_rank, sorted_svd, UnionFind};
use crate::measure::Dims;
use crate::tol::Tol;

/// A generalized eigenspace for one eigenvalue, or for a conjugate pair.
#[derive(Debug, Clone)]
pub struct EigenCluster {
    /// Representative with nonnegative imaginary part.
    pub value: Complex<f64>,
    /// Whether `value` stands for the pair `value, conj(value)`.
    pub paired: bool,
    pub basis: DMatrix<f64>,
    pub projector: DMatrix<f64>,
}

impl EigenCluster {
    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }
}

/// All eigenvalues of one absolute value.
#[derive(Debug, Clone)]
pub struct MagnitudeClass {
    pub magnitude: f64,
    /// Clusters ordered by argument in `[0, 2π)`.
    pub clusters: Vec<EigenCluster>,
    pub projector: DMatrix<f64>,
}

impl MagnitudeClass {
    pub fn dim(&self) -> usize {
        self.clusters.iter().map(EigenCluster::dim).sum()
    }

    pub fn eigenvalues(&self) -> Vec<Complex<f64>> {
        let mut out = Vec::new();
        for c in &self.clusters {
            out.push(c.value);
            if c.paired {
                out.push(c.value.conj());
            }
        }
        out
    }

    /// The real eigenvalue of the class, when it has exactly one.
    pub fn real_value(&self) -> Option<f64> {
        match self.clusters.as_slice() {
            [c] if !c.paired => Some(c.value.re),
            _ => None,
        }
    }
}

/// Nonzero eigenvalues in decreasing absolute value with their generalized
/// eigenspaces, plus the generalized null space.
#[derive(Debug, Clone)]
pub struct SpectrumLadder {
    pub matrix: DMatrix<f64>,
    pub classes: Vec<MagnitudeClass>,
    pub null_basis: DMatrix<f64>,
    pub null_projector: DMatrix<f64>,
}

impl SpectrumLadder {
    /// Ladder of `A_w`, with eigenvalues read off the diagonal blocks `(r_w μ_w)^p Ψ_w`.
    pub fn new(cm: &CompositionMatrix, tol: &Tol) -> Result<Self> {
        let psi_eigs = cm.psi().complex_eigenvalues();
        let mut eigs = Vec::with_capacity(cm.dim());
        for p in 0..=cm.k {
            let s = libm::pow(cm.scale, p as f64);
            eigs.extend(psi_eigs.iter().map(|z| z * s));
        }
        Self::build(&cm.matrix, eigs, tol)
    }

    /// Ladder of an arbitrary square matrix.
    pub fn from_matrix(a: &DMatrix<f64>, tol: &Tol) -> Result<Self> {
        if a.nrows() != a.ncols() || a.nrows() == 0 {
            return Err(Error::InvalidInput("ladder needs a nonempty square matrix".into()));
        }
        let eigs: Vec<Complex<f64>> = a.complex_eigenvalues().iter().copied().collect();
        Self::build(a, eigs, tol)
    }

    fn build(a: &DMatrix<f64>, eigs: Vec<Complex<f64>>, tol: &Tol) -> Result<Self> {
        let n = a.nrows();
        if eigs.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::diag("eigensolver returned non-finite values", Vec::new()));
        }
        let top = eigs.iter().fold(1.0f64, |m, z| m.max(cabs(*z)));
        // a nilpotent block splits the zero eigenvalue as well, so try the
        // coarse radius first and keep only true zeros if that fails
        let coarse = libm::sqrt(tol.null) * top;
        let small = eigs.iter().filter(|z| cabs(**z) <= coarse).count();
        let (null_radius, null_basis) = match generalized_kernel(a, small, Complex::new(0.0, 0.0)) {
            Ok(b) => (coarse, b),
            Err(_) => {
                let fine = eigs.iter().filter(|z| cabs(**z) <= tol.null * top).count();
                (tol.null * top, generalized_kernel(a, fine, Complex::new(0.0, 0.0))?)
            }
        };
        let mut kept = Vec::new();
        for z in eigs {
            if cabs(z) > null_radius && z.im >= -tol.cluster * cabs(z) {
                // conjugates are counted through the upper half plane
                let paired = z.im > tol.cluster * cabs(z);
                kept.push((if paired { z } else { Complex::new(z.re, 0.0) }, paired));
            }
        }
        // A defective eigenvalue of index d comes back split by about eps^{1/d};
        // group coarsely first and fall back to the fine tolerance if that fails.
        let mut groups = Vec::new();
        let mut bases: Vec<DMatrix<f64>> = Vec::new();
        for coarse in cluster_eigs(&kept, libm::sqrt(tol.cluster)) {
            match eigenspace(a, &coarse) {
                Ok(b) => {
                    groups.push(coarse);
                    bases.push(b);
                }
                Err(_) => {
                    for fine in cluster_eigs(&coarse.members, tol.cluster) {
                        bases.push(eigenspace(a, &fine)?);
                        groups.push(fine);
                    }
                }
            }
        }
        let mut full = DMatrix::zeros(n, n);
        let mut col = 0;
        for b in bases.iter().chain(core::iter::once(&null_basis)) {
            full.view_mut((0, col), (n, b.ncols())).copy_from(b);
            col += b.ncols();
        }
        if col != n {
            return Err(Error::diag("generalized eigenspaces do not span the space", vec![col as f64, n as f64]));
        }
        let inv = inverse(&full, "generalized eigenbasis")?;
        let project = |start: usize, dim: usize| -> DMatrix<f64> {
            full.columns(start, dim) * inv.rows(start, dim)
        };
        let mut clusters = Vec::with_capacity(groups.len());
        let mut start = 0;
        for (g, b) in groups.iter().zip(&bases) {
            clusters.push(EigenCluster { value: g.center, paired: g.paired, basis: b.clone(), projector: project(start, b.ncols()) });
            start += b.ncols();
        }
        let null_projector = project(start, null_basis.ncols());
        clusters.sort_by(|x, y| cabs(y.value).total_cmp(&cabs(x.value)));
        let mut classes: Vec<MagnitudeClass> = Vec::new();
        for c in clusters {
            let mag = cabs(c.value);
            match classes.last_mut() {
                Some(cls) if (cls.magnitude - mag).abs() <= tol.cluster * cls.magnitude => {
                    cls.projector += &c.projector;
                    cls.clusters.push(c);
                }
                _ => classes.push(MagnitudeClass { magnitude: mag, projector: c.projector.clone(), clusters: vec![c] }),
            }
        }
        for cls in &mut classes {
            cls.clusters.sort_by(|x, y| angle(x.value).total_cmp(&angle(y.value)));
        }
        Ok(SpectrumLadder { matrix: a.clone(), classes, null_basis, null_projector })
    }

    pub fn magnitudes(&self) -> Vec<f64> {
        self.classes.iter().map(|c| c.magnitude).collect()
    }

    pub fn null_dim(&self) -> usize {
        self.null_basis.ncols()
    }

    /// Projector onto `Ẽ_l = ⊕_{i<=l} E_i`; zero for `l < 0`.
    pub fn tilde_projector(&self, l: i64) -> DMatrix<f64> {
        let n = self.matrix.nrows();
        let mut p = DMatrix::zeros(n, n);
        for cls in self.classes.iter().take((l + 1).max(0) as usize) {
            p += &cls.projector;
        }
        p
    }

    /// Projector onto `Ê_l = E_l`.
    pub fn hat_projector(&self, l: usize) -> DMatrix<f64> {
        self.classes[l].projector.clone()
    }

    /// `(max ‖P² - P‖, max ‖PA - AP‖)` over all `Ẽ_l`.
    pub fn sanity(&self) -> (f64, f64) {
        let mut idem: f64 = 0.0;
        let mut comm: f64 = 0.0;
        for l in 0..self.classes.len() {
            let p = self.tilde_projector(l as i64);
            idem = idem.max(max_abs(&(&p * &p - &p)));
            comm = comm.max(max_abs(&(&p * &self.matrix - &self.matrix * &p)));
        }
        (idem, comm)
    }
}

struct EigGroup {
    center: Complex<f64>,
    paired: bool,
    members: Vec<(Complex<f64>, bool)>,
}

/// Single-linkage groups at relative distance `rel`, centred on the mean.
fn cluster_eigs(eigs: &[(Complex<f64>, bool)], rel: f64) -> Vec<EigGroup> {
    let n = eigs.len();
    let mut uf = UnionFind::new(n);
    for i in 0..n {
        for j in 0..i {
            let (a, pa) = eigs[i];
            let (b, pb) = eigs[j];
            if pa == pb && cabs(a - b) <= rel * cabs(a).max(cabs(b)) {
                uf.union(i, j);
            }
        }
    }
    let mut groups: Vec<(usize, EigGroup)> = Vec::new();
    for (i, &(z, paired)) in eigs.iter().enumerate() {
        let root = uf.find(i);
        match groups.iter_mut().find(|g| g.0 == root) {
            Some(g) => g.1.members.push((z, paired)),
            None => groups.push((root, EigGroup { center: z, paired, members: vec![(z, paired)] })),
        }
    }
    groups
        .into_iter()
        .map(|(_, mut g)| {
            let sum = g.members.iter().fold(Complex::new(0.0, 0.0), |acc, m| acc + m.0);
            g.center = sum / g.members.len() as f64;
            if !g.paired {
                g.center.im = 0.0;
            }
            g
        })
        .collect()
}

fn eigenspace(a: &DMatrix<f64>, g: &EigGroup) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let z = g.center;
    let mult = g.members.len();
    if g.paired {
        let eye = DMatrix::<f64>::identity(n, n);
        generalized_kernel(&(a * a - a * (2.0 * z.re) + eye * z.norm_sqr()), 2 * mult, z)
    } else {
        generalized_kernel(&(a - DMatrix::<f64>::identity(n, n) * z.re), mult, z)
    }
}

fn cabs(z: Complex<f64>) -> f64 {
    libm::hypot(z.re, z.im)
}

fn angle(z: Complex<f64>) -> f64 {
    let a = libm::atan2(z.im, z.re);
    if a < -1e-12 {
        a + 2.0 * PI
    } else {
        a.max(0.0)
    }
}

/// Orthonormal basis of `ker B^∞` of the given dimension, grown one Jordan level at a time.
///
/// Forming `B^m` directly would fold small nonzero eigenvalues into the
/// kernel, so each step solves `B x ∈ span(found)` for `x ⊥ found`.
fn generalized_kernel(b: &DMatrix<f64>, dim: usize, what: Complex<f64>) -> Result<DMatrix<f64>> {
    let n = b.nrows();
    let scale = sorted_svd(b).0[0].max(f64::MIN_POSITIVE);
    let mut basis: DMatrix<f64> = DMatrix::zeros(n, 0);
    while basis.ncols() < dim {
        let c = basis.ncols();
        let comp = if c == 0 {
            DMatrix::identity(n, n)
        } else {
            sorted_svd(&basis.transpose()).1.columns(c, n - c).into_owned()
        };
        let reduced = (b - &basis * (basis.transpose() * b)) * &comp;
        let (vals, v) = sorted_svd(&reduced);
        let m = vals.len();
        let mut take = vals.iter().filter(|&&s| s <= 1e-8 * scale).count().min(dim - c);
        if take == 0 {
            if vals[m - 1] > 1e-5 * scale {
                return Err(Error::diag(
                    format!("generalized eigenspace of {} + {}i is not resolved", what.re, what.im),
                    vec![vals[m - 1] / scale],
                ));
            }
            take = 1;
        }
        let fresh = &comp * v.columns(m - take, take);
        let mut grown = DMatrix::zeros(n, c + take);
        grown.view_mut((0, 0), (n, c)).copy_from(&basis);
        grown.view_mut((0, c), (n, take)).copy_from(&fresh);
        basis = grown;
    }
    Ok(basis)
}

/// `q_ω(σ) = r_w^{σ/2} μ_w^{(σ-1)/2}` for the periodic block `w` of `ω`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SobolevScale {
    pub r: f64,
    pub mu: f64,
}

impl SobolevScale {
    pub fn of(space: &JetSpace, omega: &Address) -> Self {
        let w = omega.period();
        SobolevScale { r: space.spec().r_word(&w), mu: space.spec().mu_word(&w) }
    }

    pub fn q(&self, sigma: f64) -> f64 {
        libm::pow(self.r, sigma / 2.0) * libm::pow(self.mu, (sigma - 1.0) / 2.0)
    }

    /// The `σ` with `q(σ) = magnitude`.
    pub fn critical(&self, magnitude: f64) -> f64 {
        (2.0 * libm::log(magnitude) + libm::log(self.mu)) / (libm::log(self.r) + libm::log(self.mu))
    }
}

/// `l_ω(σ)`: the class index with `|λ_{l+1}| <= q < |λ_l|`, or `-1` when `σ <= d_S/2`.
///
/// `q` within the criticality tolerance of a magnitude counts as equal to it.
pub fn l_omega(scale: &SobolevScale, magnitudes: &[f64], sigma: f64, dims: &Dims, tol: &Tol) -> Result<i64> {
    if dims.a2_holds && sigma <= dims.d_s / 2.0 {
        return Ok(-1);
    }
    let q = scale.q(sigma);
    let above = magnitudes
        .iter()
        .take_while(|&&m| q < m && !((q - m).abs() <= tol.critical * m))
        .count();
    if above == magnitudes.len() {
        return Err(Error::NeedsLargerK { sigma, order: magnitudes.len() });
    }
    Ok(above as i64 - 1)
}

/// Critical orders for `H^σ`, `σ < 2k`: the inversions `σ(|λ|) >= 0` of every
/// class of the tangent ladder of `A_w` on `H_{k-1}`. Empty for `k = 0`.
pub fn critical_orders(spec: &FractalSpec, omega: &Address, k: usize, tol: &Tol) -> Result<Vec<f64>> {
    if k == 0 {
        return Ok(Vec::new());
    }
    let space = JetSpace::new(spec, k - 1)?;
    let ladder = SpectrumLadder::new(&space.composition(&omega.period()), tol)?;
    Ok(ladder_criticals(&ladder, &SobolevScale::of(&space, omega)))
}

/// `σ(|λ_l|)` for every class of `ladder`, nonnegative, ascending and deduplicated.
pub fn ladder_criticals(ladder: &SpectrumLadder, scale: &SobolevScale) -> Vec<f64> {
    let mut out: Vec<f64> = ladder
        .magnitudes()
        .iter()
        .map(|&m| scale.critical(m))
        .filter(|&s| s >= -1e-12)
        .map(|s| s.max(0.0))
        .collect();
    out.sort_by(f64::total_cmp);
    out.dedup_by(|a, b| (*a - *b).abs() <= 1e-10);
    out
}

/// Sampled inner products against `H_j`, exact on piecewise multiharmonic data.
///
/// On each cell at depth `fit_level` above the samples, the data are fitted
/// by the unique element of `H_j` through the cell's `V_fit` values, then
/// integrated against the jet basis with the Gram matrix.
#[derive(Debug, Clone)]
pub struct Sampler<'a> {
    space: &'a JetSpace,
    fit_level: usize,
    fit: DMatrix<f64>,
    reps: Vec<(usize, usize)>,
    gram_inv: DMatrix<f64>,
}

impl<'a> Sampler<'a> {
    pub fn new(space: &'a JetSpace) -> Result<Self> {
        let dim = space.dim();
        for level in 0..8 {
            let t = VertexTable::build(space.spec(), level);
            let mut e = DMatrix::zeros(t.len(), dim);
            for c in 0..dim {
                let mut basis = DVector::zeros(dim);
                basis[c] = 1.0;
                let vals = space.eval(&basis, &t)?;
                e.set_column(c, &DVector::from_vec(vals));
            }
            if numerical_rank(&e, 1e-10) == dim {
                let mut reps = vec![(usize::MAX, 0); t.len()];
                for w in 0..t.n_cells(level) {
                    for (a, &v) in t.cell(level, w).iter().enumerate() {
                        if reps[v].0 == usize::MAX {
                            reps[v] = (w, a);
                        }
                    }
                }
                let gram_inv = inverse(space.gram(), "Gram matrix")?;
                return Ok(Sampler { space, fit_level: level, fit: left_inverse(&e)?, reps, gram_inv });
            }
        }
        Err(Error::Structural("no level determines multiharmonic data".into()))
    }

    pub fn fit_level(&self) -> usize {
        self.fit_level
    }

    /// Jet coordinates of the `L²` projection of `f ∘ F_u` onto `H_j`.
    pub fn project(&self, table: &VertexTable, f: &[f64], u: &Word) -> Result<DVector<f64>> {
        let m = table.level();
        let need = u.len() + self.fit_level;
        if need > m {
            return Err(Error::InsufficientDepth { need, have: m });
        }
        let spec = self.space.spec();
        let n = spec.n_letters();
        let d = m - need;
        let dim = self.space.dim();
        let g = self.space.gram();
        let span_fit = n.pow(self.fit_level as u32);
        let base = u.index(n) * n.pow(d as u32);
        // DFS over v ∈ W_d carrying μ_v A_v^T
        let mut rhs = DVector::zeros(dim);
        let mut stack: Vec<(usize, usize, DMatrix<f64>, f64)> = vec![(0, 0, DMatrix::identity(dim, dim), 1.0)];
        let mut samples = DVector::zeros(self.reps.len());
        while let Some((depth, v, a_v, mu_v)) = stack.pop() {
            if depth == d {
                for (y, &(t, a)) in self.reps.iter().enumerate() {
                    samples[y] = f[table.cell(m, (base + v) * span_fit + t)[a]];
                }
                let local = &self.fit * &samples;
                rhs += a_v.transpose() * (g * local) * mu_v;
                continue;
            }
            for i in 0..n {
                stack.push((depth + 1, v * n + i, self.space.letter(i) * &a_v, mu_v * spec.mu()[i]));
            }
        }
        Ok(&self.gram_inv * rhs)
    }
}

/// `s_n = P_{H_{k-1}} A_w^n A_τ f` for `n < count`, where `sampler` works on `H_{k-1}`.
pub fn pretangent_sequence(
    sampler: &Sampler<'_>,
    table: &VertexTable,
    f: &[f64],
    omega: &Address,
    count: usize,
) -> Result<Vec<DVector<f64>>> {
    let tau = omega.prefix();
    let w = omega.period();
    let need = tau.len() + count.saturating_sub(1) * w.len() + sampler.fit_level();
    if need > table.level() {
        return Err(Error::InsufficientDepth { need, have: table.level() });
    }
    (0..count).map(|n| sampler.project(table, f, &tau.concat(&w.repeat(n)))).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TangentResult {
    pub l: i64,
    pub jet: DVector<f64>,
    /// Number of series terms summed.
    pub terms: usize,
    /// Norms of the summed increments `A^{-m} t_m`.
    pub increments: Vec<f64>,
}

/// `s_lim = Σ_m A^{-m} t_m` on `Ẽ_l`, `t_0 = s_0`, `t_m = s_m - A s_{m-1}`.
pub fn extract_tangent(seq: &[DVector<f64>], ladder: &SpectrumLadder, l: i64, tol: &Tol) -> Result<TangentResult> {
    if l < 0 {
        return Err(Error::InvalidInput("tangents need l >= 0; below d_S/2 the tangent space is trivial".into()));
    }
    if l as usize >= ladder.classes.len() {
        return Err(Error::InvalidInput(format!("ladder has only {} classes", ladder.classes.len())));
    }
    if seq.is_empty() {
        return Err(Error::InvalidInput("empty pretangent sequence".into()));
    }
    let (jet, terms, increments) = orbit_series(seq, &ladder.matrix, ladder, l, tol)?;
    Ok(TangentResult { l, jet, terms, increments })
}

/// `Σ_m A^{-m} Ê_i t_m` summed class by class for `i <= l`.
///
/// A term is dropped when it sits below the rounding level of `t_m` pushed
/// through `A^{-m} Ê_i`; such terms carry no information and would otherwise
/// grow without bound. For the same reason a class stops at the first rise
/// after its terms have dropped below `1e-6` of the partial sum, and once they
/// fall below `tol.series`. If the last three kept terms close the sequence
/// while still rising, the series is reported as divergent.
pub fn orbit_series(
    seq: &[DVector<f64>],
    a: &DMatrix<f64>,
    ladder: &SpectrumLadder,
    l: i64,
    tol: &Tol,
) -> Result<(DVector<f64>, usize, Vec<f64>)> {
    let n = a.nrows();
    let p = ladder.tilde_projector(l);
    let b = inverse(&(a + DMatrix::identity(n, n) - &p), "A on the orbit block")?;
    let a_norm = max_abs(a) * n as f64;
    let t: Vec<(DVector<f64>, f64)> = (0..seq.len())
        .map(|m| {
            if m == 0 {
                (seq[0].clone(), seq[0].amax())
            } else {
                (&seq[m] - a * &seq[m - 1], seq[m].amax() + a_norm * seq[m - 1].amax())
            }
        })
        .collect();
    let mut total = DVector::zeros(n);
    let mut increments = vec![0.0; t.len()];
    let mut terms = 0;
    for cls in ladder.classes.iter().take((l + 1).max(0) as usize) {
        let mut power = cls.projector.clone();
        let mut sum: DVector<f64> = DVector::zeros(n);
        let mut kept: Vec<(usize, f64)> = Vec::new();
        let mut used = t.len();
        for (m, (tm, level)) in t.iter().enumerate() {
            let inc = &power * tm;
            let size = inc.amax();
            let floor = 4.0 * f64::EPSILON * level * max_abs(&power);
            if size > floor {
                // once the terms have dropped below 1e-6 a rise is amplified rounding
                let dipped = kept.iter().any(|k| k.1 < 1e-6 * sum.amax().max(1.0));
                if dipped && kept.last().is_some_and(|k| size > k.1) {
                    used = m;
                    break;
                }
                sum += &inc;
                increments[m] += size;
                kept.push((m, size));
            }
            if m > 0 && size < tol.series * sum.amax().max(1.0) {
                used = m + 1;
                break;
            }
            power = &b * power;
        }
        if used == t.len() && kept.len() >= 3 {
            let tail = &kept[kept.len() - 3..];
            let closing = tail[2].0 == t.len() - 1 && tail[1].0 == t.len() - 2 && tail[0].0 == t.len() - 3;
            if closing && tail[0].1 < tail[1].1 && tail[1].1 < tail[2].1 && tail[2].1 > 1e-6 * sum.amax().max(1.0) {
                return Err(Error::diag("orbit series diverges", increments));
            }
        }
        terms = terms.max(used);
        total += sum;
    }
    increments.truncate(terms);
    Ok((total, terms, increments))
}


#[derive(Debug, Clone, PartialEq)]
pub struct DecayReport {
    /// `‖A_τ f - A_w^n h‖_∞` over sampled vertices of `F_w^n K`, `n = 0..=n_max`.
    pub residuals: Vec<f64>,
    /// Least-squares slope of `log residual` over `n >= 1`; `-∞` when residuals vanish.
    pub slope: f64,
}

pub fn decay_diagnostic(
    space: &JetSpace,
    table: &VertexTable,
    f: &[f64],
    tangent: &DVector<f64>,
    omega: &Address,
    n_max: usize,
) -> Result<DecayReport> {
    let spec = space.spec();
    let n = spec.n_letters();
    let m = table.level();
    let tau = omega.prefix();
    let w = omega.period();
    let need = tau.len() + n_max * w.len();
    if need > m {
        return Err(Error::InsufficientDepth { need, have: m });
    }
    let a_w = space.composition(&w).matrix;
    let mut jet = tangent.clone();
    let mut residuals = Vec::with_capacity(n_max + 1);
    for k in 0..=n_max {
        let u = tau.concat(&w.repeat(k));
        let d = m - u.len();
        let base = u.index(n) * n.pow(d as u32);
        let mut worst: f64 = 0.0;
        let mut stack = vec![(0usize, 0usize, jet.clone())];
        while let Some((depth, v, x)) = stack.pop() {
            if depth == d {
                for (a, &id) in table.cell(m, base + v).iter().enumerate() {
                    worst = worst.max((f[id] - x[a]).abs());
                }
                continue;
            }
            for i in 0..n {
                stack.push((depth + 1, v * n + i, space.letter(i) * &x));
            }
        }
        residuals.push(worst);
        jet = &a_w * jet;
    }
    let floor = 1e-13 * f.iter().fold(1.0f64, |s, x| s.max(x.abs()));
    let pts: Vec<(f64, f64)> = residuals
        .iter()
        .enumerate()
        .skip(1)
        .filter(|(_, &r)| r > floor)
        .map(|(k, &r)| (k as f64, libm::log(r)))
        .collect();
    let slope = if pts.len() < 2 {
        f64::NEG_INFINITY
    } else {
        let np = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / np;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / np;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
        sxy / sxx
    };
    Ok(DecayReport { residuals, slope })
}

/// `∂_n h(p) = Σ_ω r_τ^{-1} lim_n r_w^{-n} (-H (A_w^n A_τ x)_0)_b` for a jet `x`.
///
/// Eigencomponents of `A_w` with `|λ| > r_w` must be annihilated by the
/// boundary form, the `r_w` component contributes exactly, smaller ones vanish.
pub fn jet_normal_derivative(space: &JetSpace, jet: &DVector<f64>, p: usize, tol: &Tol) -> Result<f64> {
    let spec = space.spec();
    let nb = spec.nb();
    if p >= nb {
        return Err(Error::InvalidInput(format!("boundary index {} out of range", p + 1)));
    }
    let x = space.lift(jet, space.order());
    let h = spec.h();
    let form = |y: &DVector<f64>, b: usize| -> f64 { -(0..nb).map(|c| h[(b, c)] * y[c]).sum::<f64>() };
    let size = x.amax().max(1.0);
    let mut total = 0.0;
    for omega in &spec.addresses()[p] {
        let tau = omega.prefix();
        let w = omega.period();
        let y = space.composition(&tau).matrix * &x;
        let b = spec
            .boundary_of(&Address::new(Vec::new(), w.0.clone())?)
            .ok_or_else(|| Error::Structural(format!("address {omega} has no periodic tail point")))?;
        let ladder = SpectrumLadder::new(&space.composition(&w), tol)?;
        let r_w = spec.r_word(&w);
        let mut value = 0.0;
        for cls in &ladder.classes {
            let part = &cls.projector * &y;
            if cls.magnitude > r_w * (1.0 + tol.cluster) {
                let mut z = part;
                for _ in 0..=cls.dim() {
                    if form(&z, b).abs() > 1e-9 * size {
                        return Err(Error::diag(format!("normal derivative at p{} does not exist", p + 1), vec![form(&z, b)]));
                    }
                    z = &ladder.matrix * z;
                }
            } else if (cls.magnitude - r_w).abs() <= tol.cluster * r_w {
                let moved = &ladder.matrix * &part - &part * r_w;
                if form(&part, b).abs() > 1e-12 * size && (cls.real_value().is_none() || moved.amax() > 1e-9 * size) {
                    return Err(Error::diag(format!("normal derivative at p{} oscillates", p + 1), vec![moved.amax()]));
                }
                value = form(&part, b);
            }
        }
        total += value / spec.r_word(&tau);
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fractal::builtin;

    #[test]
    fn sg_ladder() {
        let s = builtin("sg").unwrap();
        let js = JetSpace::new(&s, 0).unwrap();
        let lad = SpectrumLadder::new(&js.composition(&Word(vec![0])), &Tol::default()).unwrap();
        let m = lad.magnitudes();
        assert_eq!(m.len(), 3);
        for (x, y) in m.iter().zip([1.0, 0.6, 0.2]) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn jordan_matrix_ladder() {
        let a = DMatrix::from_row_slice(3, 3, &[0.5, 1.0, 0.0, 0.0, 0.5, 0.0, 0.0, 0.0, -0.25]);
        let lad = SpectrumLadder::from_matrix(&a, &Tol::default()).unwrap();
        assert_eq!(lad.classes.len(), 2);
        assert_eq!(lad.classes[0].dim(), 2);
        let (idem, comm) = lad.sanity();
        assert!(idem < 1e-10 && comm < 1e-10);
    }

    #[test]
    fn rotation_pairs_stay_real() {
        let c = libm::cos(0.7) * 0.5;
        let s = libm::sin(0.7) * 0.5;
        let a = DMatrix::from_row_slice(3, 3, &[c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0]);
        let lad = SpectrumLadder::from_matrix(&a, &Tol::default()).unwrap();
        assert_eq!(lad.classes.len(), 2);
        assert!(lad.classes[1].clusters[0].paired);
        assert_eq!(lad.classes[1].dim(), 2);
    }
}
