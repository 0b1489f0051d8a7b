use approx::assert_abs_diff_eq;
use fractalyze_core::jets::JetSpace;
use fractalyze_core::measure::{dims, quadrature};
use fractalyze_core::spectral::{
    critical_orders, decay_diagnostic, extract_tangent, jet_normal_derivative, l_omega, pretangent_sequence, Sampler,
    SobolevScale, SpectrumLadder,
};
use fractalyze_core::{builtin, Address, Error, Tol, VertexTable, Word, BUILTINS};
use nalgebra::{DMatrix, DVector};

fn positions(table: &VertexTable) -> Vec<f64> {
    let m = table.level();
    let mut x = vec![f64::NAN; table.len()];
    for c in 0..table.n_cells(m) {
        for (a, &v) in table.cell(m, c).iter().enumerate() {
            x[v] = (c + a) as f64 / (1u64 << m) as f64;
        }
    }
    x
}

/// Interval jets `(f(0), f(1), f''(0), f''(1))` of the monomials `1, x, x², x³`.
fn monomial_jets() -> [DVector<f64>; 4] {
    [
        DVector::from_vec(vec![1.0, 1.0, 0.0, 0.0]),
        DVector::from_vec(vec![0.0, 1.0, 0.0, 0.0]),
        DVector::from_vec(vec![0.0, 1.0, 2.0, 2.0]),
        DVector::from_vec(vec![0.0, 1.0, 0.0, 6.0]),
    ]
}

fn origin() -> Address {
    Address::parse("|1", 2).unwrap()
}

#[test]
fn interval_jets_are_polynomials() {
    let iv = builtin("interval").unwrap();
    let space = JetSpace::new(&iv, 1).unwrap();
    let t = VertexTable::build(&iv, 8);
    let x = positions(&t);
    for (a, jet) in monomial_jets().iter().enumerate() {
        let f = space.eval(jet, &t).unwrap();
        for (v, xi) in f.iter().zip(&x) {
            assert_abs_diff_eq!(*v, xi.powi(a as i32), epsilon = 1e-12);
        }
    }
    // x² - x: midpoint value -1/4, Laplacian 2 everywhere
    let q = DVector::from_vec(vec![0.0, 0.0, 2.0, 2.0]);
    let t1 = VertexTable::build(&iv, 1);
    let mid = space.eval(&q, &t1).unwrap()[2];
    assert_abs_diff_eq!(mid, -0.25, epsilon = 1e-14);
    let lap = space.laplacian(&q);
    assert!(space.eval(&lap, &t1).unwrap().iter().all(|v| (v - 2.0).abs() < 1e-14));
    assert_abs_diff_eq!(space.integrate(&q), -1.0 / 6.0, epsilon = 1e-14);
    assert_abs_diff_eq!(space.integrate(&monomial_jets()[1]), 0.5, epsilon = 1e-14);
}

#[test]
fn interval_gram_is_the_moment_matrix() {
    let iv = builtin("interval").unwrap();
    let space = JetSpace::new(&iv, 1).unwrap();
    let jets = monomial_jets();
    for a in 0..4 {
        for b in 0..4 {
            let want = 1.0 / (a + b + 1) as f64;
            assert_abs_diff_eq!(space.inner(&jets[a], &jets[b]), want, epsilon = 1e-12);
        }
    }
}

#[test]
fn gram_fixed_points_on_builtins() {
    for name in BUILTINS {
        let spec = builtin(name).unwrap();
        let space = JetSpace::new(&spec, 2).unwrap();
        for j in 0..=2 {
            let rep = space.gram_report(j);
            assert!(rep.residual < 1e-10, "{name} j={j}: {}", rep.residual);
            assert_eq!(rep.nullity, 1);
            // a probability measure: ∫ 1 = 1
            let one = space.lift(&space.constant(), j);
            let g = space.gram_at(j);
            assert_abs_diff_eq!((one.transpose() * g * &one)[(0, 0)], 1.0, epsilon = 1e-12);
        }
    }
}

#[test]
fn sg_harmonic_integral_and_quadrature() {
    let sg = builtin("sg").unwrap();
    let space = JetSpace::new(&sg, 1).unwrap();
    let h = DVector::from_vec(vec![1.0, 0.0, 0.0]);
    assert_abs_diff_eq!(space.integrate(&h), 1.0 / 3.0, epsilon = 1e-12);
    let t = VertexTable::build(&sg, 10);
    assert_abs_diff_eq!(quadrature(&sg, &t, &space.eval(&h, &t).unwrap()).unwrap(), 1.0 / 3.0, epsilon = 1e-6);
}

#[test]
fn sg_eval_matches_extension_matrices() {
    let sg = builtin("sg").unwrap();
    let space = JetSpace::new(&sg, 0).unwrap();
    let h = DVector::from_vec(vec![1.0, 0.0, 0.0]);
    let t1 = VertexTable::build(&sg, 1);
    let v1 = space.eval(&h, &t1).unwrap();
    let mut interior: Vec<f64> = v1[3..].to_vec();
    interior.sort_by(f64::total_cmp);
    assert_abs_diff_eq!(interior[0], 0.2, epsilon = 1e-14);
    assert_abs_diff_eq!(interior[2], 0.4, epsilon = 1e-14);
    // F_1F_1 p_2 = value 2 of Ψ_1 (1, 2/5, 2/5)
    let t2 = VertexTable::build(&sg, 2);
    let v2 = space.eval(&h, &t2).unwrap();
    let psi1 = space.letter(0);
    let inner = psi1 * &h;
    let want = (psi1 * &inner)[1];
    assert_abs_diff_eq!(v2[t2.id_of(&Word(vec![0, 0]), 1)], want, epsilon = 1e-14);
    assert_abs_diff_eq!(inner[1], 0.4, epsilon = 1e-14);
}

#[test]
fn ladders() {
    let tol = Tol::default();
    let iv = builtin("interval").unwrap();
    let space = JetSpace::new(&iv, 1).unwrap();
    let lad = SpectrumLadder::new(&space.composition(&Word(vec![0])), &tol).unwrap();
    let mags = lad.magnitudes();
    for (j, m) in mags.iter().enumerate() {
        assert_abs_diff_eq!(*m, 0.5f64.powi(j as i32), epsilon = 1e-12);
    }
    assert!(lad.classes.iter().all(|c| c.dim() == 1));
    // the eigenvectors are the monomials at 0
    for (j, jet) in monomial_jets().iter().enumerate() {
        let p = lad.hat_projector(j);
        assert!((&p * jet - jet).amax() < 1e-10, "monomial {j}");
    }
    let space0 = JetSpace::new(&iv, 0).unwrap();
    let lad0 = SpectrumLadder::new(&space0.composition(&Word(vec![0])), &tol).unwrap();
    let c = &lad0.classes[0];
    // E_0 is spanned by the constants
    assert!((&c.projector * space0.constant() - space0.constant()).amax() < 1e-12);

    let sg = builtin("sg").unwrap();
    let s0 = JetSpace::new(&sg, 0).unwrap();
    let lad = SpectrumLadder::new(&s0.composition(&Word(vec![0])), &tol).unwrap();
    let mags = lad.magnitudes();
    assert_eq!(mags.len(), 3);
    for (m, want) in mags.iter().zip([1.0, 0.6, 0.2]) {
        assert_abs_diff_eq!(*m, want, epsilon = 1e-10);
    }
    // against a direct eigensolve of Ψ_1
    let mut direct: Vec<f64> = s0.letter(0).complex_eigenvalues().iter().map(|z| z.re).collect();
    direct.sort_by(|a, b| b.total_cmp(a));
    for (m, d) in mags.iter().zip(&direct) {
        assert_abs_diff_eq!(m, d, epsilon = 1e-12);
    }
}

#[test]
fn vicsek_ladder_set() {
    let tol = Tol::default();
    let vs = builtin("vicsek").unwrap();
    let space = JetSpace::new(&vs, 2).unwrap();
    let lad = SpectrumLadder::new(&space.composition(&Word(vec![0])), &tol).unwrap();
    let allowed: Vec<f64> = (0..6).flat_map(|n| [15f64.powi(-n), 15f64.powi(-n) / 3.0]).collect();
    for m in lad.magnitudes() {
        assert!(allowed.iter().any(|a| (a - m).abs() < 1e-8), "{m}");
    }
    assert_abs_diff_eq!(lad.magnitudes()[0], 1.0, epsilon = 1e-12);
    assert_abs_diff_eq!(lad.magnitudes()[1], 1.0 / 3.0, epsilon = 1e-12);
}

#[test]
fn ladder_of_a_jordan_matrix() {
    let tol = Tol::default();
    let v = DMatrix::from_row_slice(3, 3, &[1.0, 0.3, -0.2, 0.1, 1.0, 0.4, -0.3, 0.2, 1.0]);
    let j = DMatrix::from_row_slice(3, 3, &[0.5, 1.0, 0.0, 0.0, 0.5, 0.0, 0.0, 0.0, 0.1]);
    let a = &v * j * v.clone().try_inverse().unwrap();
    let lad = SpectrumLadder::from_matrix(&a, &tol).unwrap();
    assert_eq!(lad.classes.len(), 2);
    assert_eq!(lad.classes[0].dim(), 2);
    let (idem, comm) = lad.sanity();
    assert!(idem < 1e-10 && comm < 1e-10);
}

#[test]
fn l_omega_examples() {
    let tol = Tol::default();
    let iv = builtin("interval").unwrap();
    let space = JetSpace::new(&iv, 1).unwrap();
    let lad = SpectrumLadder::new(&space.composition(&Word(vec![0])), &tol).unwrap();
    let scale = SobolevScale::of(&space, &origin());
    let d = dims(&iv);
    assert_abs_diff_eq!(scale.q(1.0), 0.5f64.sqrt(), epsilon = 1e-15);
    assert_eq!(l_omega(&scale, &lad.magnitudes(), 1.0, &d, &tol).unwrap(), 0);
    assert_eq!(l_omega(&scale, &lad.magnitudes(), 2.0, &d, &tol).unwrap(), 1);
    assert_eq!(l_omega(&scale, &lad.magnitudes(), 0.4, &d, &tol).unwrap(), -1);
    assert_eq!(l_omega(&scale, &lad.magnitudes(), 0.5, &d, &tol).unwrap(), -1);
    // the tie q = |λ_{l+1}| selects l
    assert_eq!(l_omega(&scale, &lad.magnitudes(), 1.5, &d, &tol).unwrap(), 0);
    assert!(matches!(l_omega(&scale, &lad.magnitudes(), 9.0, &d, &tol), Err(Error::NeedsLargerK { .. })));
}

#[test]
fn critical_order_tables() {
    let tol = Tol::default();
    let iv = builtin("interval").unwrap();
    let c = critical_orders(&iv, &origin(), 2, &tol).unwrap();
    assert_eq!(c.len(), 4);
    for (j, s) in c.iter().enumerate() {
        assert_abs_diff_eq!(*s, j as f64 + 0.5, epsilon = 1e-10);
    }
    let sg = builtin("sg").unwrap();
    let r = 3f64.ln() / 5f64.ln();
    let c = critical_orders(&sg, &Address::parse("|2", 3).unwrap(), 1, &tol).unwrap();
    for (s, want) in c.iter().zip([r, 2.0 - r, 2.0 + r]) {
        assert_abs_diff_eq!(*s, want, epsilon = 1e-10);
    }
    let vs = builtin("vicsek").unwrap();
    let r = 5f64.ln() / 15f64.ln();
    let c = critical_orders(&vs, &Address::parse("|1", 5).unwrap(), 1, &tol).unwrap();
    assert_abs_diff_eq!(c[0], r, epsilon = 1e-10);
    assert_abs_diff_eq!(c[1], 2.0 - r, epsilon = 1e-10);
}

#[test]
fn jet_normal_derivatives() {
    let tol = Tol::default();
    let sg = builtin("sg").unwrap();
    let space = JetSpace::new(&sg, 1).unwrap();
    let h = space.lift(&DVector::from_vec(vec![1.0, 0.0, 0.0]), 1);
    let got: Vec<f64> = (0..3).map(|p| jet_normal_derivative(&space, &h, p, &tol).unwrap()).collect();
    for (g, w) in got.iter().zip([2.0, -1.0, -1.0]) {
        assert_abs_diff_eq!(*g, w, epsilon = 1e-12);
    }
    // interval, x² - x: f'(0) = -1 and the inward-flux sign gives ∂_n f(0) = +1 ... = -f'(0)
    let iv = builtin("interval").unwrap();
    let space = JetSpace::new(&iv, 1).unwrap();
    let q = DVector::from_vec(vec![0.0, 0.0, 2.0, 2.0]);
    assert_abs_diff_eq!(jet_normal_derivative(&space, &q, 0, &tol).unwrap(), 1.0, epsilon = 1e-12);
    assert_abs_diff_eq!(jet_normal_derivative(&space, &q, 1, &tol).unwrap(), 1.0, epsilon = 1e-12);
    let x3 = &monomial_jets()[3];
    assert_abs_diff_eq!(jet_normal_derivative(&space, x3, 0, &tol).unwrap(), 0.0, epsilon = 1e-12);
    assert_abs_diff_eq!(jet_normal_derivative(&space, x3, 1, &tol).unwrap(), 3.0, epsilon = 1e-12);
}

/// Sampled `1 + 2x + 3x² + x³`, tangents at 0.
#[test]
fn cubic_tangents_on_the_interval() {
    let tol = Tol::default();
    let iv = builtin("interval").unwrap();
    let t = VertexTable::build(&iv, 12);
    let x = positions(&t);
    let f: Vec<f64> = x.iter().map(|x| 1.0 + 2.0 * x + 3.0 * x * x + x * x * x).collect();
    let jets = monomial_jets();
    let space = JetSpace::new(&iv, 1).unwrap();
    let sampler = Sampler::new(&space).unwrap();
    let omega = origin();
    let lad = SpectrumLadder::new(&space.composition(&omega.period()), &tol).unwrap();
    let count = 12 - sampler.fit_level() + 1;
    let seq = pretangent_sequence(&sampler, &t, &f, &omega, count).unwrap();
    // the sample is itself in H_1, so s_n are the exact jets of f(2^{-n} x)
    for (n, s) in seq.iter().enumerate().take(6) {
        let h = 0.5f64.powi(n as i32);
        let want = &jets[0] + &jets[1] * (2.0 * h) + &jets[2] * (3.0 * h * h) + &jets[3] * h.powi(3);
        assert!((s - want).amax() < 1e-6, "n = {n}");
    }
    let taylor = [&jets[0] * 1.0, &jets[0] + &jets[1] * 2.0, &jets[0] + &jets[1] * 2.0 + &jets[2] * 3.0];
    for (l, want) in taylor.iter().enumerate() {
        let tan = extract_tangent(&seq, &lad, l as i64, &tol).unwrap();
        assert!((&tan.jet - want).amax() < 1e-6, "l = {l}: {}", tan.jet);
    }
    // σ = 3 picks l = 2; the remainder x³ on [0, 2^{-n}] decays like 8^{-n}
    let scale = SobolevScale::of(&space, &omega);
    let l = l_omega(&scale, &lad.magnitudes(), 3.0, &dims(&iv), &tol).unwrap();
    assert_eq!(l, 2);
    let tan = extract_tangent(&seq, &lad, l, &tol).unwrap();
    let rep = decay_diagnostic(&space, &t, &f, &tan.jet, &omega, 8).unwrap();
    assert_abs_diff_eq!(rep.slope, (1.0f64 / 8.0).ln(), epsilon = 1e-3);
    assert!(rep.slope < scale.q(3.0).ln());
}

#[test]
fn taylor_tangent_of_a_pure_cubic() {
    let tol = Tol::default();
    let iv = builtin("interval").unwrap();
    let t = VertexTable::build(&iv, 12);
    let f: Vec<f64> = positions(&t).iter().map(|x| x * x * x).collect();
    let space = JetSpace::new(&iv, 1).unwrap();
    let sampler = Sampler::new(&space).unwrap();
    let omega = origin();
    let lad = SpectrumLadder::new(&space.composition(&omega.period()), &tol).unwrap();
    let seq = pretangent_sequence(&sampler, &t, &f, &omega, 12 - sampler.fit_level() + 1).unwrap();
    let tan = extract_tangent(&seq, &lad, 1, &tol).unwrap();
    assert!(tan.jet.amax() < 1e-8);
    let rep = decay_diagnostic(&space, &t, &f, &tan.jet, &omega, 8).unwrap();
    assert_abs_diff_eq!(rep.slope, (1.0f64 / 8.0).ln(), epsilon = 1e-3);
}

#[test]
fn multiharmonic_samples_give_their_ladder_components() {
    let tol = Tol::default();
    let sg = builtin("sg").unwrap();
    let space = JetSpace::new(&sg, 1).unwrap();
    let t = VertexTable::build(&sg, 8);
    let h = DVector::from_vec(vec![0.3, -1.0, 0.7, 2.0, 0.5, -0.4]);
    let f = space.eval(&h, &t).unwrap();
    let sampler = Sampler::new(&space).unwrap();
    let omega = Address::parse("|3", 3).unwrap();
    let lad = SpectrumLadder::new(&space.composition(&omega.period()), &tol).unwrap();
    let seq = pretangent_sequence(&sampler, &t, &f, &omega, 8 - sampler.fit_level() + 1).unwrap();
    assert!((&seq[0] - &h).amax() < 1e-9);
    for l in 0..lad.classes.len() as i64 {
        let tan = extract_tangent(&seq, &lad, l, &tol).unwrap();
        assert!((&tan.jet - lad.tilde_projector(l) * &h).amax() < 1e-8, "l = {l}");
    }
    let zero = vec![0.0; t.len()];
    let seq0 = pretangent_sequence(&sampler, &t, &zero, &omega, 3).unwrap();
    assert!(seq0.iter().all(|s| s.amax() == 0.0));
    let rep = decay_diagnostic(&space, &t, &f, &h, &omega, 6).unwrap();
    assert!(rep.residuals.iter().all(|r| *r < 1e-10));
    assert!(matches!(
        pretangent_sequence(&sampler, &t, &f, &omega, 40),
        Err(Error::InsufficientDepth { .. })
    ));
}

#[test]
fn rough_sample_decays_at_its_hoelder_rate() {
    let tol = Tol::default();
    let iv = builtin("interval").unwrap();
    let t = VertexTable::build(&iv, 14);
    let f: Vec<f64> = positions(&t).iter().map(|x| x.powf(0.8)).collect();
    let space = JetSpace::new(&iv, 0).unwrap();
    let sampler = Sampler::new(&space).unwrap();
    let omega = origin();
    let lad = SpectrumLadder::new(&space.composition(&omega.period()), &tol).unwrap();
    let seq = pretangent_sequence(&sampler, &t, &f, &omega, 14 - sampler.fit_level() + 1).unwrap();
    let tan = extract_tangent(&seq, &lad, 0, &tol).unwrap();
    assert!(tan.jet.amax() < 1e-3);
    let rep = decay_diagnostic(&space, &t, &f, &tan.jet, &omega, 10).unwrap();
    assert_abs_diff_eq!(rep.slope, 0.8 * 0.5f64.ln(), epsilon = 0.02);
    assert!(rep.slope <= SobolevScale::of(&space, &omega).q(1.0).ln() + 0.05);
}
