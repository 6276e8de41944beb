//! JSON file formats.
//!
//! Goods and agents are 1-based in every file. Rationals are `"p/q"` strings.
//!
//! Instance:
//!
//! ```json
//! { "n": 2, "m": 2, "budgets": [1, 1],
//!   "values": [[2, 1], [2, 1]], "sizes": [[1, 1], [1, 8]] }
//! ```
//!
//! An optional `value_scale` array records per-agent factors applied to make
//! values integral. Allocation files name their instance by path and by the
//! SHA-256 of its canonical form, so a verifier cannot silently check the wrong one.

use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::instance::{FractionalAllocation, GoodSet, Instance, IntegralAllocation};
use crate::rational::{self, Rational};
use crate::reductions::KnapsackProblem;

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    /// Malformed JSON or a value of the wrong type.
    #[error("line {line}, column {column}{}: {message}", path_suffix(.path))]
    Syntax {
        line: usize,
        column: usize,
        path: String,
        message: String,
    },
    /// Well-formed JSON whose contents are inconsistent.
    #[error("field `{field}`: {message}")]
    Field { field: String, message: String },
}

fn path_suffix(path: &str) -> String {
    if path.is_empty() || path == "." || path == "?" {
        String::new()
    } else {
        format!(" (field `{path}`)")
    }
}

fn field(field: impl Into<String>, message: impl Into<String>) -> FormatError {
    FormatError::Field {
        field: field.into(),
        message: message.into(),
    }
}

fn parse_json<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T, FormatError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        FormatError::Syntax {
            line: inner.line(),
            column: inner.column(),
            path,
            message: strip_position(&inner.to_string()),
        }
    })
}

fn strip_position(msg: &str) -> String {
    match msg.rfind(" at line ") {
        Some(i) => msg[..i].to_string(),
        None => msg.to_string(),
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub n: usize,
    pub m: usize,
    pub budgets: Vec<u64>,
    pub values: Vec<Vec<u64>>,
    pub sizes: Vec<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value_scale: Option<Vec<u64>>,
}

impl InstanceFile {
    pub fn from_instance(instance: &Instance) -> Self {
        Self {
            n: instance.agents(),
            m: instance.goods(),
            budgets: instance.budgets().to_vec(),
            values: instance.values().to_vec(),
            sizes: instance.sizes().to_vec(),
            value_scale: None,
        }
    }

    pub fn parse(text: &str) -> Result<Self, FormatError> {
        parse_json(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("instance serializes") + "\n"
    }

    /// Checks the declared dimensions before building the instance.
    pub fn to_instance(&self) -> Result<Instance, FormatError> {
        let (n, m) = (self.n, self.m);
        if n == 0 {
            return Err(field("n", "must be at least 1"));
        }
        if m == 0 {
            return Err(field("m", "must be at least 1"));
        }
        if self.budgets.len() != n {
            return Err(field("budgets", format!("expected {n} entries, found {}", self.budgets.len())));
        }
        if let Some(a) = self.budgets.iter().position(|&b| b == 0) {
            return Err(field(format!("budgets[{a}]"), "must be at least 1"));
        }
        for (name, matrix) in [("values", &self.values), ("sizes", &self.sizes)] {
            if matrix.len() != n {
                return Err(field(name, format!("expected {n} rows, found {}", matrix.len())));
            }
            if let Some(a) = matrix.iter().position(|row| row.len() != m) {
                return Err(field(
                    format!("{name}[{a}]"),
                    format!("expected {m} entries, found {}", matrix[a].len()),
                ));
            }
        }
        if let Some(scale) = &self.value_scale {
            if scale.len() != n || scale.contains(&0) {
                return Err(field("value_scale", format!("expected {n} positive entries")));
            }
        }
        Instance::new(self.values.clone(), self.sizes.clone(), self.budgets.clone())
            .map_err(|e| field("instance", e.to_string()))
    }
}

pub fn parse_instance(text: &str) -> Result<Instance, FormatError> {
    InstanceFile::parse(text)?.to_instance()
}

/// SHA-256 (hex) of the compact JSON of `n`, `m`, `budgets`, `values`, `sizes`.
pub fn instance_hash(instance: &Instance) -> String {
    let canonical = serde_json::to_string(&InstanceFile::from_instance(instance)).expect("serializes");
    hex::encode(Sha256::digest(canonical.as_bytes()))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum AllocationBody {
    Fractional {
        x: Vec<Vec<String>>,
        charity: Vec<String>,
    },
    Integral {
        bundles: Vec<Vec<usize>>,
        charity: Vec<usize>,
    },
}

/// Verification outcome stored next to a solver's output.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Report {
    pub mode: String,
    pub verdict: Verdict,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Pass,
    Fail,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AllocationFile {
    pub instance: String,
    pub instance_hash: String,
    #[serde(flatten)]
    pub body: AllocationBody,
    /// Terminating thresholds of the divisible solver, 1-based.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<Report>,
}

fn pq_strings(v: &[Rational]) -> Vec<String> {
    v.iter().map(rational::to_pq).collect()
}

fn one_based(set: &GoodSet) -> Vec<usize> {
    set.iter().map(|g| g + 1).collect()
}

impl AllocationFile {
    pub fn fractional(instance_path: &str, instance: &Instance, x: &FractionalAllocation) -> Self {
        Self::with_body(
            instance_path,
            instance,
            AllocationBody::Fractional {
                x: x.rows().iter().map(|r| pq_strings(r)).collect(),
                charity: pq_strings(&x.charity()),
            },
        )
    }

    pub fn integral(instance_path: &str, instance: &Instance, a: &IntegralAllocation) -> Self {
        Self::with_body(
            instance_path,
            instance,
            AllocationBody::Integral {
                bundles: a.bundles().iter().map(one_based).collect(),
                charity: one_based(&a.charity()),
            },
        )
    }

    fn with_body(instance_path: &str, instance: &Instance, body: AllocationBody) -> Self {
        Self {
            instance: instance_path.to_string(),
            instance_hash: instance_hash(instance),
            body,
            tau: None,
            epsilon: None,
            report: None,
        }
    }

    pub fn parse(text: &str) -> Result<Self, FormatError> {
        parse_json(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("allocation serializes") + "\n"
    }

    pub fn check_hash(&self, instance: &Instance) -> Result<(), FormatError> {
        let actual = instance_hash(instance);
        if actual == self.instance_hash {
            Ok(())
        } else {
            Err(field(
                "instance_hash",
                format!("file records {}, instance hashes to {actual}", self.instance_hash),
            ))
        }
    }

    pub fn kind(&self) -> &'static str {
        match self.body {
            AllocationBody::Fractional { .. } => "fractional",
            AllocationBody::Integral { .. } => "integral",
        }
    }

    /// Parses the matrix and checks the stored charity against it.
    pub fn to_fractional(&self) -> Result<FractionalAllocation, FormatError> {
        let AllocationBody::Fractional { x, charity } = &self.body else {
            return Err(field("kind", "expected a fractional allocation"));
        };
        let mut rows = Vec::with_capacity(x.len());
        for (a, row) in x.iter().enumerate() {
            let mut parsed = Vec::with_capacity(row.len());
            for (g, s) in row.iter().enumerate() {
                parsed.push(
                    rational::parse_pq(s)
                        .ok_or_else(|| field(format!("x[{a}][{g}]"), format!("`{s}` is not p/q")))?,
                );
            }
            rows.push(parsed);
        }
        let alloc = FractionalAllocation::new(rows).map_err(|e| field("x", e.to_string()))?;
        let derived = alloc.charity();
        if charity.len() != derived.len() {
            return Err(field("charity", format!("expected {} entries", derived.len())));
        }
        for (g, (s, d)) in charity.iter().zip(&derived).enumerate() {
            if rational::parse_pq(s).as_ref() != Some(d) {
                return Err(field(
                    format!("charity[{g}]"),
                    format!("`{s}` disagrees with x, which leaves {}", rational::to_pq(d)),
                ));
            }
        }
        Ok(alloc)
    }

    /// Converts 1-based bundles and checks the stored charity against them.
    pub fn to_integral(&self, m: usize) -> Result<IntegralAllocation, FormatError> {
        let AllocationBody::Integral { bundles, charity } = &self.body else {
            return Err(field("kind", "expected an integral allocation"));
        };
        let mut sets = Vec::with_capacity(bundles.len());
        for (a, b) in bundles.iter().enumerate() {
            let mut set = GoodSet::new();
            for &g in b {
                if g == 0 || g > m {
                    return Err(field(format!("bundles[{a}]"), format!("good {g} outside 1..={m}")));
                }
                set.insert(g - 1);
            }
            sets.push(set);
        }
        let alloc = IntegralAllocation::new(m, sets).map_err(|e| field("bundles", e.to_string()))?;
        let stored: GoodSet = charity.iter().map(|g| g.wrapping_sub(1)).collect();
        if stored != alloc.charity() {
            return Err(field("charity", "disagrees with the bundles"));
        }
        Ok(alloc)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KnapsackFile {
    pub m: usize,
    pub capacity: u64,
    pub weights: Vec<u64>,
    pub values: Vec<u64>,
}

impl KnapsackFile {
    pub fn parse(text: &str) -> Result<Self, FormatError> {
        parse_json(text)
    }

    pub fn to_problem(&self) -> Result<KnapsackProblem, FormatError> {
        for (name, v) in [("weights", &self.weights), ("values", &self.values)] {
            if v.len() != self.m {
                return Err(field(name, format!("expected {} entries, found {}", self.m, v.len())));
            }
        }
        KnapsackProblem::new(self.weights.clone(), self.values.clone(), self.capacity)
            .map_err(|e| field("capacity", e.to_string()))
    }

    pub fn from_problem(kp: &KnapsackProblem) -> Self {
        Self {
            m: kp.items(),
            capacity: kp.capacity(),
            weights: kp.weights().to_vec(),
            values: kp.values().to_vec(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("knapsack serializes") + "\n"
    }
}
