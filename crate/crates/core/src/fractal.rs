//! Combinatorial description of p.c.f. self-similar sets.
//!
//! Letters and boundary indices are 0-based internally. Text forms
//! (addresses, words) use 1-based letters in the usual notation.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::UnionFind;

/// A finite word `w_1 w_2 ... w_m` over the alphabet `0..N`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Word(pub Vec<usize>);

impl Word {
    pub fn empty() -> Self {
        Word(Vec::new())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Position of the word among `W_m` in lexicographic order.
    pub fn index(&self, n: usize) -> usize {
        self.0.iter().fold(0, |acc, &l| acc * n + l)
    }

    pub fn from_index(mut idx: usize, len: usize, n: usize) -> Self {
        let mut letters = vec![0; len];
        for slot in letters.iter_mut().rev() {
            *slot = idx % n;
            idx /= n;
        }
        Word(letters)
    }

    pub fn concat(&self, other: &Word) -> Word {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        Word(v)
    }

    pub fn repeat(&self, times: usize) -> Word {
        let mut v = Vec::with_capacity(self.0.len() * times);
        for _ in 0..times {
            v.extend_from_slice(&self.0);
        }
        Word(v)
    }

    /// Parse 1-based letters, either as a digit string (`"121"`) or comma separated (`"1,12,3"`).
    pub fn parse(s: &str, n: usize) -> Result<Self> {
        let s = s.trim();
        let raw: Vec<usize> = if s.is_empty() {
            Vec::new()
        } else if s.contains(',') {
            s.split(',')
                .map(|t| t.trim().parse::<usize>().map_err(|_| Error::InvalidInput(format!("bad letter `{t}`"))))
                .collect::<Result<_>>()?
        } else {
            s.chars()
                .map(|c| c.to_digit(10).map(|d| d as usize).ok_or_else(|| Error::InvalidInput(format!("bad letter `{c}`"))))
                .collect::<Result<_>>()?
        };
        let mut out = Vec::with_capacity(raw.len());
        for l in raw {
            if l == 0 || l > n {
                return Err(Error::InvalidInput(format!("letter {l} outside 1..={n}")));
            }
            out.push(l - 1);
        }
        Ok(Word(out))
    }

    pub(crate) fn fmt_letters(letters: &[usize], f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let wide = letters.iter().any(|&l| l >= 9);
        for (k, l) in letters.iter().enumerate() {
            if wide && k > 0 {
                f.write_str(",")?;
            }
            write!(f, "{}", l + 1)?;
        }
        Ok(())
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        Word::fmt_letters(&self.0, f)
    }
}

/// An eventually periodic address `τ ẇ`, kept in canonical form:
/// `w` has minimal period and `τ` does not end with the last letter of `w`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Address {
    prefix: Vec<usize>,
    period: Vec<usize>,
}

impl Address {
    pub fn new(prefix: Vec<usize>, period: Vec<usize>) -> Result<Self> {
        if period.is_empty() {
            return Err(Error::InvalidSpec("address with empty periodic block".into()));
        }
        let mut a = Address { prefix, period };
        a.canonicalize();
        Ok(a)
    }

    /// Parse `"tau|w"` with 1-based letters; `"|1"` or `"1"` both denote `1̇`.
    pub fn parse(s: &str, n: usize) -> Result<Self> {
        let (tau, w) = match s.split_once('|') {
            Some((t, w)) => (t, w),
            None => ("", s),
        };
        let prefix = Word::parse(tau, n)?.0;
        let period = Word::parse(w, n)?.0;
        Address::new(prefix, period).map_err(|_| Error::InvalidInput(format!("address `{s}` has no periodic block")))
    }

    fn canonicalize(&mut self) {
        let len = self.period.len();
        for d in 1..=len {
            if len % d == 0 && (d..len).all(|i| self.period[i] == self.period[i - d]) {
                self.period.truncate(d);
                break;
            }
        }
        while let Some(&last) = self.prefix.last() {
            if last != *self.period.last().unwrap() {
                break;
            }
            self.prefix.pop();
            self.period.rotate_right(1);
        }
    }

    pub fn prefix(&self) -> Word {
        Word(self.prefix.clone())
    }

    pub fn period(&self) -> Word {
        Word(self.period.clone())
    }

    pub fn is_purely_periodic(&self) -> bool {
        self.prefix.is_empty()
    }

    pub fn first_letter(&self) -> usize {
        self.prefix.first().copied().unwrap_or(self.period[0])
    }

    /// The address with its first letter removed.
    pub fn shift(&self) -> Address {
        let mut a = if self.prefix.is_empty() {
            let mut p = self.period.clone();
            p.rotate_left(1);
            Address { prefix: Vec::new(), period: p }
        } else {
            Address { prefix: self.prefix[1..].to_vec(), period: self.period.clone() }
        };
        a.canonicalize();
        a
    }

    /// The purely periodic tail `ẇ`.
    pub fn tail(&self) -> Address {
        Address { prefix: Vec::new(), period: self.period.clone() }
    }

    /// First `n` letters.
    pub fn truncate(&self, n: usize) -> Word {
        let mut out = Vec::with_capacity(n);
        let mut k = 0;
        while out.len() < n {
            if k < self.prefix.len() {
                out.push(self.prefix[k]);
            } else {
                out.push(self.period[(k - self.prefix.len()) % self.period.len()]);
            }
            k += 1;
        }
        Word(out)
    }
}

impl fmt::Display for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        Word::fmt_letters(&self.prefix, f)?;
        f.write_str("|")?;
        Word::fmt_letters(&self.period, f)
    }
}

/// `F_i p_a = F_j p_b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Contact {
    pub i: usize,
    pub a: usize,
    pub j: usize,
    pub b: usize,
}

/// A validated p.c.f. self-similar structure with harmonic structure and measure.
#[derive(Debug, Clone, PartialEq)]
pub struct FractalSpec {
    name: String,
    n: usize,
    contacts: Vec<Contact>,
    addresses: Vec<Vec<Address>>,
    r: Vec<f64>,
    mu: Vec<f64>,
    h: DMatrix<f64>,
    // p_a = F_{refine[a].0} p_{refine[a].1}
    refine: Vec<(usize, usize)>,
}

impl FractalSpec {
    pub fn new(
        name: impl Into<String>,
        n: usize,
        contacts: Vec<Contact>,
        addresses: Vec<Vec<Address>>,
        r: Vec<f64>,
        mu: Vec<f64>,
        h: DMatrix<f64>,
    ) -> Result<Self> {
        let bad = |m: String| Err(Error::InvalidSpec(m));
        let nb = addresses.len();
        if n < 2 {
            return bad(format!("need at least two letters, got {n}"));
        }
        if nb < 2 {
            return bad("need at least two boundary points".into());
        }
        if r.len() != n || mu.len() != n {
            return bad(format!("expected {n} weights, got r: {}, mu: {}", r.len(), mu.len()));
        }
        if let Some((i, x)) = r.iter().enumerate().find(|(_, x)| !(**x > 0.0 && **x < 1.0)) {
            return bad(format!("r[{i}] = {x} is not in (0,1)"));
        }
        if let Some((i, x)) = mu.iter().enumerate().find(|(_, x)| !(**x > 0.0 && **x < 1.0)) {
            return bad(format!("mu[{i}] = {x} is not in (0,1)"));
        }
        let total: f64 = mu.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return bad(format!("measure weights sum to {total}, not 1"));
        }
        check_boundary_form(&h, nb)?;
        for (k, c) in contacts.iter().enumerate() {
            if c.i >= n || c.j >= n || c.a >= nb || c.b >= nb {
                return bad(format!("contact #{k} has an index out of range"));
            }
            if c.i == c.j {
                return bad(format!("contact #{k} identifies two points of the same cell"));
            }
        }
        for (p, list) in addresses.iter().enumerate() {
            if list.is_empty() {
                return bad(format!("boundary point {} has no address", p + 1));
            }
            for a in list {
                if a.prefix.iter().chain(a.period.iter()).any(|&l| l >= n) {
                    return bad(format!("address {a} uses a letter outside 1..={n}"));
                }
            }
        }
        let locate = |a: &Address| addresses.iter().position(|l| l.contains(a));
        for list in &addresses {
            for a in list {
                if locate(&a.shift()).is_none() {
                    return bad(format!("shift of address {a} is not a boundary address"));
                }
            }
        }
        let refine = addresses
            .iter()
            .map(|list| (list[0].first_letter(), locate(&list[0].shift()).unwrap()))
            .collect();
        // level-1 cell graph connectivity
        let mut uf = UnionFind::new(n);
        for c in &contacts {
            uf.union(c.i, c.j);
        }
        let root = uf.find(0);
        if (1..n).any(|i| uf.find(i) != root) {
            return bad("level-1 cell graph is disconnected".into());
        }
        let spec = FractalSpec { name: name.into(), n, contacts, addresses, r, mu, h, refine };
        spec.check_addresses()?;
        Ok(spec)
    }

    /// Every address `τẇ` of `p` must land on `p` at levels `|τ|+|w|` and `|τ|+2|w|`.
    fn check_addresses(&self) -> Result<()> {
        let deepest = self
            .addresses
            .iter()
            .flatten()
            .map(|a| a.prefix.len() + 2 * a.period.len())
            .max()
            .unwrap_or(1);
        if self.n.checked_pow(deepest as u32).map_or(true, |c| c * self.nb() > 4_000_000) {
            return Ok(());
        }
        let table = VertexTable::build(self, deepest);
        for (p, list) in self.addresses.iter().enumerate() {
            for a in list {
                let tail = self.boundary_of(&a.tail()).unwrap();
                for reps in 1..=2 {
                    let w = a.prefix().concat(&a.period().repeat(reps));
                    let deep = table.id_of(&w, tail);
                    if deep != p {
                        return Err(Error::InvalidSpec(format!(
                            "address {a} does not denote boundary point {} under the contact pairs",
                            p + 1
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &str {
        &self.name
    }
    pub fn n_letters(&self) -> usize {
        self.n
    }
    pub fn nb(&self) -> usize {
        self.addresses.len()
    }
    pub fn contacts(&self) -> &[Contact] {
        &self.contacts
    }
    pub fn addresses(&self) -> &[Vec<Address>] {
        &self.addresses
    }
    pub fn r(&self) -> &[f64] {
        &self.r
    }
    pub fn mu(&self) -> &[f64] {
        &self.mu
    }
    pub fn h(&self) -> &DMatrix<f64> {
        &self.h
    }
    pub fn refine(&self) -> &[(usize, usize)] {
        &self.refine
    }

    /// Boundary index whose address list contains `a`.
    pub fn boundary_of(&self, a: &Address) -> Option<usize> {
        self.addresses.iter().position(|l| l.contains(a))
    }

    pub fn all_addresses(&self) -> impl Iterator<Item = (usize, &Address)> {
        self.addresses.iter().enumerate().flat_map(|(p, l)| l.iter().map(move |a| (p, a)))
    }

    pub fn r_word(&self, w: &Word) -> f64 {
        w.0.iter().map(|&i| self.r[i]).product()
    }

    pub fn mu_word(&self, w: &Word) -> f64 {
        w.0.iter().map(|&i| self.mu[i]).product()
    }

    /// Same combinatorics, different resistance weights (for probing wrong renormalizations).
    pub fn with_resistances(&self, r: Vec<f64>) -> Result<Self> {
        FractalSpec::new(
            self.name.clone(),
            self.n,
            self.contacts.clone(),
            self.addresses.clone(),
            r,
            self.mu.clone(),
            self.h.clone(),
        )
    }

    /// Products `x_w` over all words of length `m`, in lexicographic order.
    pub fn word_products(weights: &[f64], m: usize) -> Vec<f64> {
        let mut cur = vec![1.0];
        for _ in 0..m {
            let mut next = Vec::with_capacity(cur.len() * weights.len());
            for &x in &cur {
                next.extend(weights.iter().map(|&y| x * y));
            }
            cur = next;
        }
        cur
    }

    /// A1: every boundary point carries exactly one address.
    pub fn check_a1(&self) -> (bool, Option<(usize, Vec<Address>)>) {
        match self.addresses.iter().position(|l| l.len() != 1) {
            None => (true, None),
            Some(p) => (false, Some((p, self.addresses[p].clone()))),
        }
    }
}

fn check_boundary_form(h: &DMatrix<f64>, nb: usize) -> Result<()> {
    let bad = |m: String| Err(Error::InvalidSpec(m));
    if h.nrows() != nb || h.ncols() != nb {
        return bad(format!("H must be {nb}x{nb}, got {}x{}", h.nrows(), h.ncols()));
    }
    let scale = h.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(f64::MIN_POSITIVE);
    for p in 0..nb {
        let row: f64 = h.row(p).iter().sum();
        if row.abs() > 1e-12 * scale {
            return bad(format!("row {} of H sums to {row}", p + 1));
        }
        for q in 0..nb {
            if (h[(p, q)] - h[(q, p)]).abs() > 1e-12 * scale {
                return bad("H is not symmetric".into());
            }
            if p != q && h[(p, q)] < 0.0 {
                return bad(format!("H[{},{}] is negative", p + 1, q + 1));
            }
        }
    }
    // kernel = constants iff the conductance graph is connected
    let mut uf = UnionFind::new(nb);
    for p in 0..nb {
        for q in 0..nb {
            if p != q && h[(p, q)] > 0.0 {
                uf.union(p, q);
            }
        }
    }
    let root = uf.find(0);
    if (1..nb).any(|p| uf.find(p) != root) {
        return bad("kernel of H is larger than the constants".into());
    }
    Ok(())
}

/// Canonical vertex ids of `V_m`, with the cell structure of every level `0..=m`.
///
/// Ids are assigned level by level: `V_0` gets `0..|V_0|`, then new vertices of
/// `V_1`, and so on, each level in lexicographic order of the first
/// (word, boundary index) pair that reaches it. Hence the ids of `V_k` form
/// the prefix `0..|V_k|` for every `k <= m`.
#[derive(Debug, Clone)]
pub struct VertexTable {
    n: usize,
    nb: usize,
    level: usize,
    counts: Vec<usize>,
    cells: Vec<Vec<usize>>,
}

impl VertexTable {
    pub fn build(spec: &FractalSpec, m: usize) -> Self {
        let n = spec.n;
        let nb = spec.nb();
        let refine = &spec.refine;
        // path[s][a] = (suffix index of length s, final boundary index)
        let mut path = vec![(0..nb).map(|a| (0usize, a)).collect::<Vec<_>>()];
        for s in 1..=m {
            let prev = &path[s - 1];
            let row = (0..nb)
                .map(|a| {
                    let (l, c) = refine[a];
                    let (suf, last) = prev[c];
                    (l * n.pow((s - 1) as u32) + suf, last)
                })
                .collect();
            path.push(row);
        }
        let pow: Vec<usize> = (0..=m).map(|s| n.pow(s as u32)).collect();
        let embed = |k: usize, u: usize, a: usize| -> usize {
            let (suf, last) = path[m - k][a];
            (u * pow[m - k] + suf) * nb + last
        };
        let mut uf = UnionFind::new(pow[m] * nb);
        for k in 1..=m {
            for u in 0..pow[k - 1] {
                for c in &spec.contacts {
                    uf.union(embed(k, u * n + c.i, c.a), embed(k, u * n + c.j, c.b));
                }
            }
        }
        let mut id = vec![usize::MAX; pow[m] * nb];
        let mut next = 0;
        let mut counts = Vec::with_capacity(m + 1);
        let mut cells = Vec::with_capacity(m + 1);
        for k in 0..=m {
            let mut level = Vec::with_capacity(pow[k] * nb);
            for u in 0..pow[k] {
                for a in 0..nb {
                    let root = uf.find(embed(k, u, a));
                    if id[root] == usize::MAX {
                        id[root] = next;
                        next += 1;
                    }
                    level.push(id[root]);
                }
            }
            counts.push(next);
            cells.push(level);
        }
        VertexTable { n, nb, level: m, counts, cells }
    }

    pub fn level(&self) -> usize {
        self.level
    }

    /// `|V_m|`.
    pub fn len(&self) -> usize {
        self.counts[self.level]
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `|V_k|` for `k <= m`.
    pub fn len_at(&self, k: usize) -> usize {
        self.counts[k]
    }

    pub fn n_letters(&self) -> usize {
        self.n
    }

    pub fn nb(&self) -> usize {
        self.nb
    }

    pub fn n_cells(&self, k: usize) -> usize {
        self.cells[k].len() / self.nb
    }

    /// Ids of `F_w V_0` for the word with lexicographic index `w` in `W_k`.
    pub fn cell(&self, k: usize, w: usize) -> &[usize] {
        &self.cells[k][w * self.nb..(w + 1) * self.nb]
    }

    pub fn id_of(&self, w: &Word, a: usize) -> usize {
        self.cell(w.len(), w.index(self.n))[a]
    }

    pub fn is_boundary(&self, id: usize) -> bool {
        id < self.nb
    }

    /// Cells of level `m` containing each vertex, as (cell index, local boundary index).
    pub fn incidence(&self) -> Vec<Vec<(usize, usize)>> {
        let mut inc = vec![Vec::new(); self.len()];
        for w in 0..self.n_cells(self.level) {
            for (a, &v) in self.cell(self.level, w).iter().enumerate() {
                inc[v].push((w, a));
            }
        }
        inc
    }

    /// Sorted vertex ids of `F_u K ∩ V_m` for a word `u` with `|u| <= m`.
    pub fn vertices_in(&self, u: &Word) -> Vec<usize> {
        let depth = self.level - u.len();
        let span = self.n.pow(depth as u32);
        let base = u.index(self.n) * span;
        let mut out: Vec<usize> = (base..base + span).flat_map(|w| self.cell(self.level, w).iter().copied()).collect();
        out.sort_unstable();
        out.dedup();
        out
    }
}

/// Names accepted by [`builtin`].
pub const BUILTINS: [&str; 6] = ["interval", "sg", "sg3", "hexagasket", "vicsek", "filled_sg"];

fn contacts1(list: &[(usize, usize, usize, usize)]) -> Vec<Contact> {
    list.iter().map(|&(i, a, j, b)| Contact { i: i - 1, a: a - 1, j: j - 1, b: b - 1 }).collect()
}

fn addr(s: &str, n: usize) -> Address {
    Address::parse(s, n).expect("builtin address")
}

fn fixed_points(k: usize, n: usize) -> Vec<Vec<Address>> {
    (1..=k).map(|i| vec![addr(&format!("|{i}"), n)]).collect()
}

fn triangle_form() -> DMatrix<f64> {
    DMatrix::from_row_slice(3, 3, &[-2.0, 1.0, 1.0, 1.0, -2.0, 1.0, 1.0, 1.0, -2.0])
}

// D3-symmetric conductances on {p1, p2, p3, F1p2, F2p3, F3p1}, found as the
// fixed point of the level-1 renormalization with uniform weight r.
const FILLED_SG_CORNER: f64 = 0.035022921224360321;
const FILLED_SG_ADJACENT: f64 = 1.0;
const FILLED_SG_OPPOSITE: f64 = 0.11838129147053864;
const FILLED_SG_MIDDLE: f64 = 1.1592260631156237;
const FILLED_SG_R: f64 = 0.65602209593072769;

fn filled_sg_form() -> DMatrix<f64> {
    let mut c = DMatrix::zeros(6, 6);
    let adjacent = [[3, 5], [3, 4], [4, 5]];
    let opposite = [4, 5, 3];
    for i in 0..3 {
        for j in 0..3 {
            if i != j {
                c[(i, j)] = FILLED_SG_CORNER;
            }
        }
        for &m in &adjacent[i] {
            c[(i, m)] = FILLED_SG_ADJACENT;
            c[(m, i)] = FILLED_SG_ADJACENT;
        }
        c[(i, opposite[i])] = FILLED_SG_OPPOSITE;
        c[(opposite[i], i)] = FILLED_SG_OPPOSITE;
    }
    for m in 3..6 {
        for q in 3..6 {
            if m != q {
                c[(m, q)] = FILLED_SG_MIDDLE;
            }
        }
    }
    for p in 0..6 {
        let s: f64 = c.row(p).iter().sum();
        c[(p, p)] = -s;
    }
    c
}

/// One of the reference examples.
pub fn builtin(name: &str) -> Result<FractalSpec> {
    let spec = match name {
        "interval" => FractalSpec::new(
            name,
            2,
            contacts1(&[(1, 2, 2, 1)]),
            fixed_points(2, 2),
            vec![0.5; 2],
            vec![0.5; 2],
            DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 1.0, -1.0]),
        ),
        "sg" => FractalSpec::new(
            name,
            3,
            contacts1(&[(1, 2, 2, 1), (2, 3, 3, 2), (3, 1, 1, 3)]),
            fixed_points(3, 3),
            vec![0.6; 3],
            vec![1.0 / 3.0; 3],
            triangle_form(),
        ),
        // corners 1..3, edge cells 4 (p1p2), 5 (p2p3), 6 (p3p1), all translates
        "sg3" => FractalSpec::new(
            name,
            6,
            contacts1(&[
                (1, 2, 4, 1),
                (2, 1, 4, 2),
                (5, 2, 2, 3),
                (5, 3, 3, 2),
                (6, 1, 1, 3),
                (6, 3, 3, 1),
                (4, 3, 5, 1),
                (5, 1, 6, 2),
            ]),
            fixed_points(3, 6),
            vec![7.0 / 15.0; 6],
            vec![1.0 / 6.0; 6],
            triangle_form(),
        ),
        // a ring of six triangles; each edge cell keeps one vertex free
        "hexagasket" => FractalSpec::new(
            name,
            6,
            contacts1(&[(1, 2, 4, 1), (4, 2, 2, 1), (2, 3, 5, 2), (5, 3, 3, 2), (3, 1, 6, 3), (6, 1, 1, 3)]),
            fixed_points(3, 6),
            vec![3.0 / 7.0; 6],
            vec![1.0 / 6.0; 6],
            triangle_form(),
        ),
        // corners in cyclic order, letter 5 is the centre
        "vicsek" => {
            let mut h = DMatrix::from_element(4, 4, 2.0);
            h.fill_diagonal(-6.0);
            FractalSpec::new(
                name,
                5,
                contacts1(&[(1, 3, 5, 1), (2, 4, 5, 2), (3, 1, 5, 3), (4, 2, 5, 4)]),
                fixed_points(4, 5),
                vec![1.0 / 3.0; 5],
                vec![0.2; 5],
                h,
            )
        }
        // boundary order: p1, p2, p3, F1p2, F2p3, F3p1
        "filled_sg" => {
            let mut addresses = fixed_points(3, 4);
            addresses.push(vec![addr("1|2", 4), addr("2|1", 4)]);
            addresses.push(vec![addr("2|3", 4), addr("3|2", 4)]);
            addresses.push(vec![addr("3|1", 4), addr("1|3", 4)]);
            FractalSpec::new(
                name,
                4,
                contacts1(&[(1, 2, 2, 1), (2, 3, 3, 2), (3, 1, 1, 3), (4, 1, 1, 5), (4, 2, 2, 6), (4, 3, 3, 4)]),
                addresses,
                vec![FILLED_SG_R; 4],
                vec![0.25; 4],
                filled_sg_form(),
            )
        }
        other => return Err(Error::UnknownBuiltin(other.to_string())),
    };
    spec
}
