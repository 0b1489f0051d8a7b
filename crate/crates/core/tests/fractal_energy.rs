use approx::assert_abs_diff_eq;
use fractalyze_core::energy::{energy0, energy_m, harmonic_extension, resistance, Boundary, LevelOne, Network, Target};
use fractalyze_core::measure::{
    dirichlet_solve, dims, graph_laplacian, iota, normal_derivative, partition, quadrature, tangential_derivative,
};
use fractalyze_core::{builtin, Address, Error, FractalSpec, Tol, VertexTable, Word, BUILTINS};

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

fn harmonic_values(spec: &FractalSpec, table: &VertexTable, boundary: &[f64]) -> Vec<f64> {
    let net = Network::new(spec, table).unwrap();
    net.solve(Boundary::Dirichlet(boundary), &vec![0.0; table.len()]).unwrap()
}

#[test]
fn builtin_shapes() {
    let v = builtin("vicsek").unwrap();
    assert_eq!((v.n_letters(), v.nb()), (5, 4));
    assert!(v.r().iter().all(|&r| r == 1.0 / 3.0));
    let i = builtin("interval").unwrap();
    assert_eq!((i.n_letters(), i.nb()), (2, 2));
    assert_eq!(i.mu(), &[0.5, 0.5]);
    let f = builtin("filled_sg").unwrap();
    assert_eq!((f.n_letters(), f.nb()), (4, 6));
    assert!(matches!(builtin("koch"), Err(Error::UnknownBuiltin(_))));
}

#[test]
fn vertex_counts_follow_the_gluing_recurrence() {
    // every contact identifies one pair of vertices: |V_{m+1}| = N |V_m| - #contacts
    for name in BUILTINS {
        let spec = builtin(name).unwrap();
        let mut expect = spec.nb();
        for m in 0..=4 {
            assert_eq!(VertexTable::build(&spec, m).len(), expect, "{name} level {m}");
            expect = spec.n_letters() * expect - spec.contacts().len();
        }
    }
    let sg = builtin("sg").unwrap();
    assert_eq!(VertexTable::build(&sg, 1).len(), 6);
    assert_eq!(VertexTable::build(&sg, 2).len(), 15);
    let iv = builtin("interval").unwrap();
    let t = VertexTable::build(&iv, 1);
    assert_eq!(t.len(), 3);
    assert_eq!(t.id_of(&Word(vec![0]), 1), t.id_of(&Word(vec![1]), 0));
}

#[test]
fn vertex_ids_nest() {
    let sg = builtin("sg").unwrap();
    let t3 = VertexTable::build(&sg, 3);
    let t2 = VertexTable::build(&sg, 2);
    for w in 0..t2.n_cells(2) {
        assert_eq!(t2.cell(2, w), t3.cell(2, w));
    }
    assert_eq!(t3.len_at(2), t2.len());
}

#[test]
fn a1_flags() {
    for name in BUILTINS {
        let (a1, witness) = builtin(name).unwrap().check_a1();
        assert_eq!(a1, name != "filled_sg", "{name}");
        if name == "filled_sg" {
            let (_, list) = witness.unwrap();
            let want: Vec<Address> = ["1|2", "2|1"].iter().map(|s| Address::parse(s, 4).unwrap()).collect();
            assert_eq!(list.len(), 2);
            assert!(want.iter().all(|a| list.contains(a)));
        }
    }
}

#[test]
fn level_one_extensions() {
    let iv = builtin("interval").unwrap();
    let l1 = LevelOne::new(&iv).unwrap();
    let mid = l1.ext_interior();
    assert_abs_diff_eq!(mid[(0, 0)], 0.5, epsilon = 1e-15);
    assert_abs_diff_eq!(mid[(0, 1)], 0.5, epsilon = 1e-15);

    let sg = builtin("sg").unwrap();
    let l1 = LevelOne::new(&sg).unwrap();
    let f1p2 = l1.table.id_of(&Word(vec![0]), 1);
    let f1p3 = l1.table.id_of(&Word(vec![0]), 2);
    let f2p3 = l1.table.id_of(&Word(vec![1]), 2);
    assert_abs_diff_eq!(l1.ext[(f1p2, 0)], 0.4, epsilon = 1e-14);
    assert_abs_diff_eq!(l1.ext[(f1p3, 0)], 0.4, epsilon = 1e-14);
    assert_abs_diff_eq!(l1.ext[(f2p3, 0)], 0.2, epsilon = 1e-14);

    // Vicsek: the centre is the fixed point of the middle cell, a corner of no boundary cell
    let vs = builtin("vicsek").unwrap();
    let t = VertexTable::build(&vs, 2);
    let h = harmonic_values(&vs, &t, &[1.0, 0.0, 0.0, 0.0]);
    let psi = harmonic_extension(&vs).unwrap().psi;
    // the centre of K is the average of the four centre-cell corners, by the S4 symmetry
    let centre = l1_centre(&vs, &t, &h);
    assert_abs_diff_eq!(centre, 0.25, epsilon = 1e-12);
    assert_eq!(psi.len(), 5);
}

fn l1_centre(spec: &FractalSpec, table: &VertexTable, h: &[f64]) -> f64 {
    // the middle cell is the letter whose corners are all interior at level 1
    let l1 = VertexTable::build(spec, 1);
    let middle = (0..spec.n_letters()).find(|&i| l1.cell(1, i).iter().all(|&v| !l1.is_boundary(v))).unwrap();
    let corners = table.cell(1, middle);
    corners.iter().map(|&v| h[v]).sum::<f64>() / corners.len() as f64
}

#[test]
fn harmonic_energy_is_level_independent() {
    for name in BUILTINS {
        let spec = builtin(name).unwrap();
        let ub: Vec<f64> = (0..spec.nb()).map(|p| (p as f64 * 0.7).sin()).collect();
        let e0 = energy0(&spec, &ub, &ub);
        for m in 1..=3 {
            let t = VertexTable::build(&spec, m);
            let h = harmonic_values(&spec, &t, &ub);
            assert_abs_diff_eq!(energy_m(&spec, &t, &h).unwrap(), e0, epsilon = 1e-10 * e0.max(1.0));
        }
    }
    let sg = builtin("sg").unwrap();
    let t = VertexTable::build(&sg, 4);
    let h = harmonic_values(&sg, &t, &[1.0, 0.0, 0.0]);
    assert_abs_diff_eq!(energy_m(&sg, &t, &h).unwrap(), 2.0, epsilon = 1e-12);
}

#[test]
fn interval_energy_of_identity() {
    let iv = builtin("interval").unwrap();
    for m in 0..=8 {
        let t = VertexTable::build(&iv, m);
        assert_abs_diff_eq!(energy_m(&iv, &t, &positions(&t)).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(energy_m(&iv, &t, &vec![3.0; t.len()]).unwrap(), 0.0, epsilon = 1e-12);
    }
}

#[test]
fn resistances() {
    let iv = builtin("interval").unwrap();
    let t = VertexTable::build(&iv, 4);
    let net = Network::new(&iv, &t).unwrap();
    assert_abs_diff_eq!(resistance(&net, 0, Target::Vertex(1)).unwrap(), 1.0, epsilon = 1e-12);
    let x = positions(&t);
    let half = x.iter().position(|&v| v == 0.5).unwrap();
    assert_abs_diff_eq!(resistance(&net, half, Target::Boundary).unwrap(), 0.25, epsilon = 1e-12);
    for (id, &xi) in x.iter().enumerate().skip(1) {
        // a chain of resistors from 0
        assert_abs_diff_eq!(resistance(&net, 0, Target::Vertex(id)).unwrap(), xi, epsilon = 1e-12);
    }

    let sg = builtin("sg").unwrap();
    for m in 0..=4 {
        let t = VertexTable::build(&sg, m);
        let net = Network::new(&sg, &t).unwrap();
        assert_abs_diff_eq!(resistance(&net, 0, Target::Vertex(1)).unwrap(), 2.0 / 3.0, epsilon = 1e-12);
    }
}

#[test]
fn resistance_matches_dense_pseudo_inverse() {
    let sg = builtin("sg").unwrap();
    let t = VertexTable::build(&sg, 3);
    let q = fractalyze_core::energy::level_matrix(&sg, &t);
    let n = q.nrows();
    // R(x,y) = g_xx + g_yy - 2 g_xy for the inverse of Q grounded at vertex 0
    let mut grounded = q.clone();
    for j in 0..n {
        grounded[(0, j)] = 0.0;
        grounded[(j, 0)] = 0.0;
    }
    grounded[(0, 0)] = 1.0;
    let g = grounded.try_inverse().unwrap();
    let net = Network::new(&sg, &t).unwrap();
    for &(x, y) in &[(3, 7), (5, 14), (1, 10)] {
        let want = g[(x, x)] + g[(y, y)] - 2.0 * g[(x, y)];
        assert_abs_diff_eq!(resistance(&net, x, Target::Vertex(y)).unwrap(), want, epsilon = 1e-10);
    }
}

#[test]
fn dimensions() {
    let d = dims(&builtin("interval").unwrap());
    assert_eq!((d.d_h, d.d_s), (1.0, 1.0));
    let d = dims(&builtin("sg").unwrap());
    assert_abs_diff_eq!(d.d_h, 3f64.ln() / (5.0f64 / 3.0).ln(), epsilon = 1e-12);
    assert_abs_diff_eq!(d.d_s, 1.365212, epsilon = 1e-6);
    let d = dims(&builtin("vicsek").unwrap());
    assert_abs_diff_eq!(d.d_h, 5f64.ln() / 3f64.ln(), epsilon = 1e-12);
    assert_abs_diff_eq!(d.d_s, 2.0 * 5f64.ln() / 15f64.ln(), epsilon = 1e-12);
    for name in BUILTINS {
        let spec = builtin(name).unwrap();
        let d = dims(&spec);
        assert!(d.a2_holds);
        // d_S/2 solves r^{σ/2} μ^{(σ-1)/2} = 1
        let s = d.d_s / 2.0;
        for (r, mu) in spec.r().iter().zip(spec.mu()) {
            assert_abs_diff_eq!(r.powf(s / 2.0) * mu.powf((s - 1.0) / 2.0), 1.0, epsilon = 1e-12);
        }
    }
}

#[test]
fn partitions() {
    let iv = builtin("interval").unwrap();
    let p = partition(&iv, 0.25).unwrap();
    assert_eq!(p, vec![Word(vec![0, 0]), Word(vec![0, 1]), Word(vec![1, 0]), Word(vec![1, 1])]);
    assert_eq!(partition(&builtin("vicsek").unwrap(), 1.0 / 3.0).unwrap().len(), 5);
    let mixed = iv.with_resistances(vec![0.5, 0.25]);
    // with r = (1/2, 1/4) the product structure is not harmonic, but the partition is combinatorial
    if let Ok(spec) = mixed {
        assert_eq!(partition(&spec, 0.25).unwrap(), vec![Word(vec![0, 0]), Word(vec![0, 1]), Word(vec![1])]);
    }
    assert!(partition(&iv, 0.0).is_err());
}

#[test]
fn quadrature_rule() {
    let iv = builtin("interval").unwrap();
    for m in [1, 5, 9] {
        let t = VertexTable::build(&iv, m);
        assert_abs_diff_eq!(quadrature(&iv, &t, &positions(&t)).unwrap(), 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(quadrature(&iv, &t, &vec![1.0; t.len()]).unwrap(), 1.0, epsilon = 1e-14);
    }
    let sg = builtin("sg").unwrap();
    let t = VertexTable::build(&sg, 10);
    let h = harmonic_values(&sg, &t, &[1.0, 0.0, 0.0]);
    assert_abs_diff_eq!(quadrature(&sg, &t, &h).unwrap(), 1.0 / 3.0, epsilon = 1e-6);
}

#[test]
fn graph_laplacian_of_quadratics() {
    let iv = builtin("interval").unwrap();
    let t = VertexTable::build(&iv, 6);
    let x = positions(&t);
    let f: Vec<f64> = x.iter().map(|x| x * x).collect();
    for v in graph_laplacian(&iv, &t, &f).unwrap() {
        assert_abs_diff_eq!(v, 2.0, epsilon = 1e-9);
    }
    for name in BUILTINS {
        let spec = builtin(name).unwrap();
        let t = VertexTable::build(&spec, 3);
        let ub: Vec<f64> = (0..spec.nb()).map(|p| p as f64).collect();
        let h = harmonic_values(&spec, &t, &ub);
        for v in graph_laplacian(&spec, &t, &h).unwrap() {
            assert!(v.abs() < 1e-8, "{name}: {v}");
        }
    }
}

#[test]
fn dirichlet_problems() {
    let iv = builtin("interval").unwrap();
    let t = VertexTable::build(&iv, 6);
    let x = positions(&t);
    let n_int = t.len() - t.nb();
    let u = dirichlet_solve(&iv, &t, &vec![-1.0; n_int]).unwrap();
    let full = |u: &[f64], id: usize| if u.len() == t.len() { u[id] } else if id < t.nb() { 0.0 } else { u[id - t.nb()] };
    for (id, &xi) in x.iter().enumerate() {
        assert_abs_diff_eq!(full(&u, id), xi * (1.0 - xi) / 2.0, epsilon = 1e-12);
    }
    let zero = dirichlet_solve(&iv, &t, &vec![0.0; n_int]).unwrap();
    assert!(zero.iter().all(|v| v.abs() < 1e-15));

    let sg = builtin("sg").unwrap();
    let at = |m: usize| {
        let t = VertexTable::build(&sg, m);
        let u = dirichlet_solve(&sg, &t, &vec![-1.0; t.len() - 3]).unwrap();
        let id = t.id_of(&Word(vec![0]), 1);
        if u.len() == t.len() {
            u[id]
        } else {
            u[id - 3]
        }
    };
    assert!((at(8) - at(9)).abs() < 1e-6);
}

#[test]
fn boundary_derivatives() {
    let tol = Tol::default();
    let iv = builtin("interval").unwrap();
    let t = VertexTable::build(&iv, 6);
    let x = positions(&t);
    assert_abs_diff_eq!(normal_derivative(&iv, &t, &x, 0, &tol).unwrap(), -1.0, epsilon = 1e-12);
    assert_abs_diff_eq!(normal_derivative(&iv, &t, &vec![2.0; t.len()], 1, &tol).unwrap(), 0.0, epsilon = 1e-12);

    let sg = builtin("sg").unwrap();
    let t = VertexTable::build(&sg, 7);
    let h = harmonic_values(&sg, &t, &[1.0, 0.0, 0.0]);
    assert_abs_diff_eq!(normal_derivative(&sg, &t, &h, 0, &tol).unwrap(), 2.0, epsilon = 1e-10);
    assert_abs_diff_eq!(normal_derivative(&sg, &t, &h, 1, &tol).unwrap(), -1.0, epsilon = 1e-10);
    // tangential: h_T = (0, 1, -1) at p_1 gives 2, the symmetric (1, 0, 0) gives 0
    let ht = harmonic_values(&sg, &t, &[0.0, 1.0, -1.0]);
    assert_abs_diff_eq!(tangential_derivative(&sg, &t, &ht, 0, &tol).unwrap(), 2.0, epsilon = 1e-9);
    assert_abs_diff_eq!(tangential_derivative(&sg, &t, &h, 0, &tol).unwrap(), 0.0, epsilon = 1e-9);
    assert_abs_diff_eq!(iota(&sg, 0).unwrap(), 0.2, epsilon = 1e-12);
}

#[test]
fn wrong_weights_break_the_structure() {
    let sg = builtin("sg").unwrap();
    let bad = sg.with_resistances(vec![0.5; 3]).unwrap();
    assert!(fractalyze_core::energy::verify_harmonic_structure(&bad).unwrap() > 1e-2);
    for name in BUILTINS {
        assert!(fractalyze_core::energy::verify_harmonic_structure(&builtin(name).unwrap()).unwrap() < 1e-12);
    }
}

#[test]
fn boundary_resistances_match_single_solves() {
    for name in BUILTINS {
        let spec = builtin(name).unwrap();
        let t = VertexTable::build(&spec, 3);
        let net = Network::new(&spec, &t).unwrap();
        let all = net.boundary_resistances();
        for x in 0..t.len() {
            if t.is_boundary(x) {
                assert_eq!(all[x], 0.0);
            } else {
                let one = resistance(&net, x, Target::Boundary).unwrap();
                assert!((all[x] - one).abs() < 1e-12 * one.max(1.0), "{name} {x}: {} vs {one}", all[x]);
            }
        }
    }
}
