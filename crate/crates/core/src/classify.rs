//! Vanishing conditions for `H^σ_0`, the `H^σ_00` weight, interpolation labels
//! and the Vicsek Dirichlet/Neumann identity.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DVector;

use crate::energy::{resistance, Network, Target};
use crate::error::{Error, Result};
use crate::fractal::{builtin, Address, FractalSpec, VertexTable, Word};
use crate::jets::JetSpace;
use crate::measure::{dims, Dims};
use crate::spectral::{jet_normal_derivative, l_omega, SobolevScale, SpectrumLadder};
use crate::symmetry::D3;
use crate::tol::Tol;

/// A boundary functional in derivative coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Coordinate {
    /// `Δ^n f(p)`
    Value(usize),
    /// `∂_n Δ^n f(p)`
    Normal(usize),
    /// `∂_T Δ^n f(p)`
    Tangential(usize),
}

impl core::fmt::Display for Coordinate {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            Coordinate::Value(0) => write!(f, "f(p)"),
            Coordinate::Value(n) => write!(f, "Δ^{n} f(p)"),
            Coordinate::Normal(0) => write!(f, "∂_n f(p)"),
            Coordinate::Normal(n) => write!(f, "∂_n Δ^{n} f(p)"),
            Coordinate::Tangential(0) => write!(f, "∂_T f(p)"),
            Coordinate::Tangential(n) => write!(f, "∂_T Δ^{n} f(p)"),
        }
    }
}

/// The component of the tangent at `omega` in ladder class `class` must vanish.
#[derive(Debug, Clone, PartialEq)]
pub struct Condition {
    pub boundary: usize,
    pub omega: Address,
    pub class: usize,
    pub magnitude: f64,
    pub dim: usize,
    /// The `σ` above which the condition is required.
    pub threshold: f64,
    /// Derivative coordinates spanning the class, when the structure admits them.
    pub coordinates: Vec<Coordinate>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryConditionSet {
    pub sigma: f64,
    pub k: usize,
    pub conditions: Vec<Condition>,
}

struct AddressLadder {
    boundary: usize,
    omega: Address,
    ladder: SpectrumLadder,
    scale: SobolevScale,
    chains: Option<Vec<Vec<Coordinate>>>,
}

fn address_ladders(space: &JetSpace, tol: &Tol) -> Result<Vec<AddressLadder>> {
    let spec = space.spec();
    let d3 = D3::detect(spec);
    let mut out = Vec::new();
    for (p, omega) in spec.all_addresses() {
        let cm = space.composition(&omega.period());
        let ladder = SpectrumLadder::new(&cm, tol)?;
        let chains = render(spec, omega, &ladder, d3.as_ref(), space.order(), tol);
        out.push(AddressLadder { boundary: p, omega: omega.clone(), ladder, scale: SobolevScale::of(space, omega), chains });
    }
    Ok(out)
}

/// Derivative coordinates of each class at a fixed point `p = F_i p`.
///
/// Block `n` of `A_i` is `(r_i μ_i)^n Ψ_i`; when the nonzero spectrum of `Ψ_i`
/// is `{1, r_i}` (plus `ι_i` under D3 symmetry) the eigenvalues
/// `(r_iμ_i)^n`, `r_i (r_iμ_i)^n`, `ι_i (r_iμ_i)^n` belong to `Δ^n f(p)`,
/// `∂_n Δ^n f(p)` and `∂_T Δ^n f(p)`.
fn render(
    spec: &FractalSpec,
    omega: &Address,
    ladder: &SpectrumLadder,
    d3: Option<&D3>,
    k: usize,
    tol: &Tol,
) -> Option<Vec<Vec<Coordinate>>> {
    if !omega.is_purely_periodic() || omega.period().len() != 1 {
        return None;
    }
    let i = omega.period().0[0];
    let p = spec.boundary_of(omega)?;
    let r = spec.r()[i];
    let mut chains: Vec<(f64, fn(usize) -> Coordinate)> = vec![(1.0, Coordinate::Value), (r, Coordinate::Normal)];
    if let Some(d) = d3 {
        if d.letters[p] != i {
            return None;
        }
        chains.push((d.iota[p], Coordinate::Tangential));
    }
    let psi = crate::energy::harmonic_extension(spec).ok()?.psi[i].clone();
    let top = psi.complex_eigenvalues();
    let mut nonzero: Vec<f64> = top.iter().filter(|z| libm::hypot(z.re, z.im) > tol.null).map(|z| z.re).collect();
    let mut expect: Vec<f64> = chains.iter().map(|c| c.0).collect();
    nonzero.sort_by(f64::total_cmp);
    expect.sort_by(f64::total_cmp);
    if top.iter().any(|z| z.im.abs() > tol.null)
        || nonzero.len() != expect.len()
        || nonzero.iter().zip(&expect).any(|(a, b)| (a - b).abs() > tol.cluster * b)
    {
        return None;
    }
    let base = r * spec.mu()[i];
    let mut out = Vec::with_capacity(ladder.classes.len());
    for cls in &ladder.classes {
        let mut coords = Vec::new();
        for n in 0..=k {
            for &(c, make) in &chains {
                let target = c * libm::pow(base, n as f64);
                if (cls.magnitude - target).abs() <= tol.cluster * target {
                    coords.push(make(n));
                }
            }
        }
        if coords.len() != cls.dim() {
            return None;
        }
        out.push(coords);
    }
    Some(out)
}

fn check_sigma(sigma: f64, k: usize) -> Result<()> {
    if !(sigma >= 0.0 && sigma <= 2.0 * k as f64) {
        return Err(Error::InvalidInput(format!("σ = {sigma} is outside [0, {}]", 2 * k)));
    }
    Ok(())
}

/// Required vanishing tangent components for `H^σ_0` at every boundary address.
pub fn h0_conditions(spec: &FractalSpec, sigma: f64, k: usize, tol: &Tol) -> Result<BoundaryConditionSet> {
    check_sigma(sigma, k)?;
    let space = JetSpace::new(spec, k)?;
    let ladders = address_ladders(&space, tol)?;
    conditions_from(&ladders, &dims(spec), sigma, k, tol)
}

fn conditions_from(ladders: &[AddressLadder], dims: &Dims, sigma: f64, k: usize, tol: &Tol) -> Result<BoundaryConditionSet> {
    let mut conditions = Vec::new();
    for al in ladders {
        let l = l_omega(&al.scale, &al.ladder.magnitudes(), sigma, dims, tol)?;
        for class in 0..(l + 1).max(0) as usize {
            let cls = &al.ladder.classes[class];
            conditions.push(Condition {
                boundary: al.boundary,
                omega: al.omega.clone(),
                class,
                magnitude: cls.magnitude,
                dim: cls.dim(),
                threshold: al.scale.critical(cls.magnitude),
                coordinates: al.chains.as_ref().map(|c| c[class].clone()).unwrap_or_default(),
            });
        }
    }
    Ok(BoundaryConditionSet { sigma, k, conditions })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub omega: Address,
    pub class: usize,
    pub size: f64,
    pub coordinates: Vec<Coordinate>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Membership {
    pub member: bool,
    pub violations: Vec<Violation>,
}

/// Jets of `f ∘ F_τ` for every boundary address `τẇ`, from the jet of `f`.
pub fn boundary_data(space: &JetSpace, jet: &DVector<f64>) -> Vec<(Address, DVector<f64>)> {
    let x = space.lift(jet, space.order());
    space
        .spec()
        .all_addresses()
        .map(|(_, omega)| (omega.clone(), space.composition(&omega.prefix()).matrix * &x))
        .collect()
}

/// Whether the data satisfy every condition of [`h0_conditions`] at `σ`.
///
/// `data` holds, per address `τẇ`, a jet of `f ∘ F_τ` (or of its tangent) in `H_j`, `j <= k`.
pub fn h0_membership(
    spec: &FractalSpec,
    data: &[(Address, DVector<f64>)],
    sigma: f64,
    k: usize,
    tol: &Tol,
) -> Result<Membership> {
    let set = h0_conditions(spec, sigma, k, tol)?;
    let space = JetSpace::new(spec, k)?;
    let mut violations = Vec::new();
    let mut ladders: Vec<(Word, SpectrumLadder)> = Vec::new();
    for c in &set.conditions {
        let jet = data
            .iter()
            .find(|(a, _)| *a == c.omega)
            .map(|(_, j)| j)
            .ok_or_else(|| Error::IncompleteData(format!("no tangent data at ω = {}", c.omega)))?;
        if jet.len() > space.dim() || jet.len() % spec.nb() != 0 {
            return Err(Error::InvalidInput(format!("jet at ω = {} does not fit H_{k}", c.omega)));
        }
        let w = c.omega.period();
        if !ladders.iter().any(|(v, _)| *v == w) {
            ladders.push((w.clone(), SpectrumLadder::new(&space.composition(&w), tol)?));
        }
        let ladder = &ladders.iter().find(|(v, _)| *v == w).expect("cached").1;
        let x = space.lift(jet, k);
        let size = (&ladder.classes[c.class].projector * &x).amax();
        if size > tol.structural * x.amax().max(1.0) {
            violations.push(Violation { omega: c.omega.clone(), class: c.class, size, coordinates: c.coordinates.clone() });
        }
    }
    Ok(Membership { member: violations.is_empty(), violations })
}

/// `ρ(x) = R(x, V_0)^{(1+d_H)/2}` at every vertex of `V_m` (zero on `V_0`).
pub fn rho_weights(spec: &FractalSpec, table: &VertexTable) -> Result<Vec<f64>> {
    let net = Network::new(spec, table)?;
    let e = (1.0 + dims(spec).d_h) / 2.0;
    Ok(net.boundary_resistances().into_iter().map(|r| if r > 0.0 { libm::pow(r, e) } else { 0.0 }).collect())
}

pub fn rho_weight(spec: &FractalSpec, table: &VertexTable, x: usize) -> Result<f64> {
    if x < spec.nb() || x >= table.len() {
        return Err(Error::InvalidInput(format!("vertex {x} is not in V_m minus V_0")));
    }
    let net = Network::new(spec, table)?;
    Ok(libm::pow(resistance(&net, x, Target::Boundary)?, (1.0 + dims(spec).d_h) / 2.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Convergent,
    Divergent,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq)]
pub struct H00Report {
    pub verdict: Verdict,
    /// Quadrature of `|f|² ρ^{-2σ}` over the cells whose deepest ancestor touching `V_0` has level `j`.
    pub collars: Vec<f64>,
    /// Geometric mean ratio of successive tail collars.
    pub tail_ratio: f64,
    /// `sqrt(Σ collars)`, the truncated weighted norm.
    pub estimate: f64,
}

/// Numerical verdict on `f ρ^{-σ} ∈ L²` from collar sums at level `m`.
pub fn h00_test(spec: &FractalSpec, table: &VertexTable, f: &[f64], sigma: f64) -> Result<H00Report> {
    let m = table.level();
    if f.len() != table.len() {
        return Err(Error::InvalidInput(format!("expected {} values", table.len())));
    }
    if m < 4 {
        return Err(Error::InsufficientDepth { need: 4, have: m });
    }
    let rho = rho_weights(spec, table)?;
    let nb = spec.nb();
    let n = spec.n_letters();
    let mut collars = vec![0.0; m + 1];
    let weights = FractalSpec::word_products(spec.mu(), m);
    for (w, mu_w) in weights.iter().enumerate() {
        let cell = table.cell(m, w);
        let inner: Vec<usize> = cell.iter().copied().filter(|&v| v >= nb).collect();
        let mean = inner.iter().map(|&v| f[v] * f[v] * libm::pow(rho[v], -2.0 * sigma)).sum::<f64>() / nb as f64;
        let mut depth = 0;
        for j in (0..=m).rev() {
            let anc = w / n.pow((m - j) as u32);
            if table.cell(j, anc).iter().any(|&v| v < nb) {
                depth = j;
                break;
            }
        }
        collars[depth] += mu_w * mean;
    }
    let estimate = libm::sqrt(collars.iter().sum());
    let (lo, hi) = (m / 2, m - 2);
    let tail_ratio = if collars[hi] == 0.0 {
        0.0
    } else if collars[lo] == 0.0 {
        f64::INFINITY
    } else {
        libm::pow(collars[hi] / collars[lo], 1.0 / (hi - lo) as f64)
    };
    let verdict = if tail_ratio < 0.9 {
        Verdict::Convergent
    } else if tail_ratio >= 0.97 {
        Verdict::Divergent
    } else {
        Verdict::Inconclusive
    };
    Ok(H00Report { verdict, collars, tail_ratio, estimate })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpaceKind {
    H,
    H0,
    H00,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpaceName {
    H,
    H0,
    H00,
    DualH00,
    L2,
}

impl SpaceName {
    pub fn as_str(&self) -> &'static str {
        match self {
            SpaceName::H => "H",
            SpaceName::H0 => "H0",
            SpaceName::H00 => "H00",
            SpaceName::DualH00 => "dual_H00",
            SpaceName::L2 => "L2",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpaceLabel {
    pub name: SpaceName,
    /// The order of the labelled space; for `DualH00` the space is `(H^σ_00)'`.
    pub sigma: f64,
    /// `σ_θ = (1-θ)σ + θσ'`.
    pub sigma_theta: f64,
    pub critical: bool,
    /// `(ω, ladder class)` pairs where the scale hits a magnitude.
    pub witnesses: Vec<(Address, usize)>,
}

/// Label of `[X^σ, Y^{σ'}]_θ`.
pub fn interpolate_spaces(
    spec: &FractalSpec,
    a: (SpaceKind, f64),
    b: (SpaceKind, f64),
    theta: f64,
    tol: &Tol,
) -> Result<SpaceLabel> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::InvalidInput(format!("θ = {theta} is not in (0,1)")));
    }
    for (kind, s) in [a, b] {
        if kind != SpaceKind::H && s < 0.0 {
            return Err(Error::InvalidInput(format!("{kind:?} needs σ >= 0, got {s}")));
        }
        if !s.is_finite() {
            return Err(Error::InvalidInput("σ must be finite".into()));
        }
    }
    let st = (1.0 - theta) * a.1 + theta * b.1;
    let (name, sigma) = match (a.0, b.0) {
        (SpaceKind::H, SpaceKind::H) if st.abs() <= 1e-12 => (SpaceName::L2, 0.0),
        (SpaceKind::H, SpaceKind::H) if st > 0.0 => (SpaceName::H, st),
        (SpaceKind::H, SpaceKind::H) => (SpaceName::DualH00, -st),
        (SpaceKind::H0, SpaceKind::H0) | (SpaceKind::H00, SpaceKind::H00) => (SpaceName::H00, st),
        (x, y) => {
            return Err(Error::OutOfScope(format!(
                "interpolation between {x:?} and {y:?} endpoints is not covered by the available theorems"
            )))
        }
    };
    // the dual branch tests r_w^{-σ_θ/2} μ_w^{-(σ_θ+1)/2}, which is q_ω(-σ_θ)
    let s_eval = st.abs();
    let k = (s_eval / 2.0) as usize + 1;
    let space = JetSpace::new(spec, k)?;
    let mut witnesses = Vec::new();
    for (_, omega) in spec.all_addresses() {
        let ladder = SpectrumLadder::new(&space.composition(&omega.period()), tol)?;
        let q = SobolevScale::of(&space, omega).q(s_eval);
        for (i, cls) in ladder.classes.iter().enumerate() {
            if (cls.magnitude - q).abs() <= tol.critical * cls.magnitude {
                witnesses.push((omega.clone(), i));
            }
        }
    }
    Ok(SpaceLabel { name, sigma, sigma_theta: st, critical: !witnesses.is_empty(), witnesses })
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdentityFailure {
    pub sigma: f64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdentityReport {
    pub holds: bool,
    pub checked: usize,
    pub failures: Vec<IdentityFailure>,
}

/// Checks `H^σ_00 = H^σ_D ∩ H^σ_N` on the Vicsek set for every `σ` in `grid`.
///
/// Each active ladder class is classified intrinsically from its eigenvector:
/// the least `n` with `Δ^n x(p) ≠ 0` or `∂_n Δ^n x(p) ≠ 0`. Dirichlet-side
/// classes must be exactly `Δ^n f(p)` for `n < σ/2 - d_S/4`, Neumann-side ones
/// `∂_nΔ^n f(p)` for `n < σ/2 + d_S/4 - 1`, and together they must exhaust
/// the `H^σ_00` conditions.
pub fn vicsek_identity_check(grid: &[f64], tol: &Tol) -> Result<IdentityReport> {
    let spec = builtin("vicsek")?;
    let top = grid.iter().fold(0.0f64, |m, &s| m.max(s));
    let k = (top / 2.0) as usize + 1;
    let space = JetSpace::new(&spec, k)?;
    let ladders = address_ladders(&space, tol)?;
    let d = dims(&spec);
    // intrinsic kind of every class, per boundary point
    let mut kinds: Vec<Vec<Option<Coordinate>>> = Vec::new();
    for al in &ladders {
        let p = al.boundary;
        let mut row = Vec::new();
        for cls in &al.ladder.classes {
            if cls.dim() != 1 {
                row.push(None);
                continue;
            }
            let x: DVector<f64> = cls.clusters[0].basis.column(0).into_owned();
            let scale = x.amax();
            let mut kind = None;
            let mut shifted = x.clone();
            for n in 0..=k {
                if shifted[p].abs() > 1e-8 * scale {
                    kind = Some(Coordinate::Value(n));
                    break;
                }
                if jet_normal_derivative(&space, &shifted, p, tol)?.abs() > 1e-8 * scale {
                    kind = Some(Coordinate::Normal(n));
                    break;
                }
                shifted = space.laplacian(&shifted);
            }
            row.push(kind);
        }
        kinds.push(row);
    }
    let mut failures = Vec::new();
    for &sigma in grid {
        let set = conditions_from(&ladders, &d, sigma, k, tol)?;
        for (idx, al) in ladders.iter().enumerate() {
            let mut dir = Vec::new();
            let mut neu = Vec::new();
            for c in set.conditions.iter().filter(|c| c.omega == al.omega) {
                match kinds[idx][c.class] {
                    Some(Coordinate::Value(n)) => dir.push(n),
                    Some(Coordinate::Normal(n)) => neu.push(n),
                    _ => failures.push(IdentityFailure {
                        sigma,
                        reason: format!("class {} at ω = {} is neither a value nor a normal component", c.class, al.omega),
                    }),
                }
            }
            dir.sort_unstable();
            neu.sort_unstable();
            let want_dir: Vec<usize> = (0..=k).filter(|&n| (n as f64) < sigma / 2.0 - d.d_s / 4.0).collect();
            let want_neu: Vec<usize> = (0..=k).filter(|&n| (n as f64) < sigma / 2.0 + d.d_s / 4.0 - 1.0).collect();
            if dir != want_dir || neu != want_neu {
                failures.push(IdentityFailure {
                    sigma,
                    reason: format!(
                        "at ω = {}: Dirichlet {dir:?} vs {want_dir:?}, Neumann {neu:?} vs {want_neu:?}",
                        al.omega
                    ),
                });
            }
        }
    }
    Ok(IdentityReport { holds: failures.is_empty(), checked: grid.len(), failures })
}
