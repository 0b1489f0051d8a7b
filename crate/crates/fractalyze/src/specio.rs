//! The `fractalyze-spec/1` JSON document.
//!
//! ```json
//! {
//!   "schema": "fractalyze-spec/1",
//!   "name": "sg",
//!   "n_letters": 3,
//!   "contact_pairs": [[1, 2, 2, 1], [2, 3, 3, 2], [3, 1, 1, 3]],
//!   "boundary_addresses": ["|1", "|2", "|3"],
//!   "r": [0.6, 0.6, 0.6],
//!   "mu": [0.333333333333, 0.333333333333, 0.333333333334],
//!   "H": [-2, 1, 1, 1, -2, 1, 1, 1, -2]
//! }
//! ```
//!
//! Letters and boundary indices are 1-based. `[i, a, j, b]` states
//! `F_i p_a = F_j p_b`. A boundary entry is either one address or an array
//! of addresses naming the same point; `"tau|w"` is `τ w w w ⋯`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use fractalyze_core::{Address, Contact, FractalSpec};

use crate::error::{AppError, AppResult};

pub const SCHEMA: &str = "fractalyze-spec/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AddressEntry {
    One(String),
    Many(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecDoc {
    pub schema: String,
    #[serde(default)]
    pub name: Option<String>,
    pub n_letters: usize,
    pub contact_pairs: Vec<[usize; 4]>,
    pub boundary_addresses: Vec<AddressEntry>,
    pub r: Vec<f64>,
    pub mu: Vec<f64>,
    #[serde(rename = "H")]
    pub h: Vec<f64>,
}

pub fn parse_spec(json: &str) -> AppResult<FractalSpec> {
    let de = &mut serde_json::Deserializer::from_str(json);
    let doc: SpecDoc = serde_path_to_error::deserialize(de)
        .map_err(|e| AppError::Format(format!("spec schema error at `{}`: {}", e.path(), e.inner())))?;
    doc.build()
}

impl SpecDoc {
    pub fn build(&self) -> AppResult<FractalSpec> {
        let fail = |path: &str, msg: String| AppError::Format(format!("spec schema error at `{path}`: {msg}"));
        if self.schema != SCHEMA {
            return Err(fail("schema", format!("expected \"{SCHEMA}\", got \"{}\"", self.schema)));
        }
        let n = self.n_letters;
        let nb = self.boundary_addresses.len();
        let mut contacts = Vec::with_capacity(self.contact_pairs.len());
        for (c, &[i, a, j, b]) in self.contact_pairs.iter().enumerate() {
            if [i, j].iter().any(|&x| x == 0 || x > n) || [a, b].iter().any(|&x| x == 0 || x > nb) {
                return Err(fail(&format!("contact_pairs[{c}]"), format!("[{i},{a},{j},{b}] is out of range")));
            }
            contacts.push(Contact { i: i - 1, a: a - 1, j: j - 1, b: b - 1 });
        }
        let mut addresses = Vec::with_capacity(nb);
        for (p, entry) in self.boundary_addresses.iter().enumerate() {
            let list: Vec<&String> = match entry {
                AddressEntry::One(s) => vec![s],
                AddressEntry::Many(v) => v.iter().collect(),
            };
            let mut parsed = Vec::with_capacity(list.len());
            for (q, s) in list.into_iter().enumerate() {
                let a = Address::parse(s, n)
                    .map_err(|e| fail(&format!("boundary_addresses[{p}][{q}]"), e.to_string()))?;
                parsed.push(a);
            }
            addresses.push(parsed);
        }
        if self.h.len() != nb * nb {
            return Err(fail("H", format!("expected {} entries, got {}", nb * nb, self.h.len())));
        }
        let h = DMatrix::from_row_slice(nb, nb, &self.h);
        let name = self.name.clone().unwrap_or_else(|| "custom".into());
        Ok(FractalSpec::new(name, n, contacts, addresses, self.r.clone(), self.mu.clone(), h)?)
    }

    pub fn from_spec(spec: &FractalSpec) -> Self {
        let nb = spec.nb();
        SpecDoc {
            schema: SCHEMA.into(),
            name: Some(spec.name().into()),
            n_letters: spec.n_letters(),
            contact_pairs: spec.contacts().iter().map(|c| [c.i + 1, c.a + 1, c.j + 1, c.b + 1]).collect(),
            boundary_addresses: spec
                .addresses()
                .iter()
                .map(|l| match l.as_slice() {
                    [a] => AddressEntry::One(a.to_string()),
                    many => AddressEntry::Many(many.iter().map(|a| a.to_string()).collect()),
                })
                .collect(),
            r: spec.r().to_vec(),
            mu: spec.mu().to_vec(),
            h: (0..nb * nb).map(|x| spec.h()[(x / nb, x % nb)]).collect(),
        }
    }
}

pub fn spec_to_json(spec: &FractalSpec) -> String {
    serde_json::to_string_pretty(&SpecDoc::from_spec(spec)).expect("plain data serializes")
}
