//! Domain types and the shared metric functions: makespan, load profiles,
//! prediction error, and approximation ratios.
//!
//! Conventions for extended reals, used everywhere downstream:
//! - `x + inf = inf`, `inf * c = inf` for `c > 0`;
//! - ratio `x/0 = inf` for `x > 0`, `inf/inf = 1`, `inf/finite = inf`;
//! - the scaled time of a zero job under a finite scalar is `0`.

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::{Error, Result};

/// Serialize an extended real as a JSON number, or the string `"inf"`.
pub fn serialize_ext<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_infinite() {
        s.serialize_str("inf")
    } else {
        s.serialize_f64(*v)
    }
}

/// Deserialize an extended real: a JSON number or `"inf"` (case-insensitive).
pub fn deserialize_ext<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Word(String),
    }
    match Repr::deserialize(d)? {
        Repr::Num(x) => Ok(x),
        Repr::Word(w) if w.eq_ignore_ascii_case("inf") => Ok(f64::INFINITY),
        Repr::Word(w) => Err(D::Error::custom(format!(
            "expected a number or \"inf\", got {w:?}"
        ))),
    }
}

#[derive(Serialize, Deserialize)]
struct MatrixFile {
    n: usize,
    m: usize,
    p: Vec<Vec<MatrixEntry>>,
}

#[derive(Serialize, Deserialize)]
struct MatrixEntry(
    #[serde(serialize_with = "serialize_ext", deserialize_with = "deserialize_ext")] f64,
);

/// An `n x m` matrix of processing times: row `i` is machine `i`, column `j`
/// is job `j`. Entries are finite nonnegative or `+inf`; every job has at
/// least one finite machine.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    n: usize,
    m: usize,
    p: Vec<f64>,
}

impl Instance {
    pub fn new(n: usize, m: usize, rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.len() != n || rows.iter().any(|r| r.len() != m) {
            return Err(Error::ShapeMismatch {
                expected: format!("{n}x{m}"),
                got: format!("{}x{}", rows.len(), rows.first().map_or(0, Vec::len)),
            });
        }
        Self::from_flat(n, m, rows.into_iter().flatten().collect())
    }

    pub fn from_flat(n: usize, m: usize, p: Vec<f64>) -> Result<Self> {
        if n == 0 || m == 0 || p.len() != n * m {
            return Err(Error::ShapeMismatch {
                expected: format!("{n}x{m} with n,m >= 1"),
                got: format!("{} entries", p.len()),
            });
        }
        for (k, &v) in p.iter().enumerate() {
            if v.is_nan() || v < 0.0 {
                return Err(Error::InvalidEntry {
                    i: k / m,
                    j: k % m,
                    reason: format!("entry must be >= 0 or inf, got {v}"),
                });
            }
        }
        let inst = Instance { n, m, p };
        for j in 0..m {
            if (0..n).all(|i| inst.at(i, j).is_infinite()) {
                return Err(Error::InfeasibleJob { job: j });
            }
        }
        Ok(inst)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Processing time of job `j` on machine `i`.
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.p[i * self.m + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.p[i * self.m..(i + 1) * self.m]
    }

    /// Copy of the instance with row `machine` replaced.
    pub fn with_row(&self, machine: usize, row: Vec<f64>) -> Result<Instance> {
        if machine >= self.n {
            return Err(Error::MachineOutOfRange { machine, n: self.n });
        }
        if row.len() != self.m {
            return Err(Error::ShapeMismatch {
                expected: format!("row of length {}", self.m),
                got: format!("length {}", row.len()),
            });
        }
        let mut p = self.p.clone();
        p[machine * self.m..(machine + 1) * self.m].copy_from_slice(&row);
        Instance::from_flat(self.n, self.m, p)
    }

    pub fn same_shape(&self, other: &Instance) -> bool {
        self.n == other.n && self.m == other.m
    }

    pub fn to_json(&self) -> String {
        let file = MatrixFile {
            n: self.n,
            m: self.m,
            p: (0..self.n)
                .map(|i| self.row(i).iter().map(|&v| MatrixEntry(v)).collect())
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("matrix serialization cannot fail")
    }

    pub fn from_json(s: &str) -> Result<Instance> {
        let file: MatrixFile = serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        Instance::new(
            file.n,
            file.m,
            file.p
                .into_iter()
                .map(|r| r.into_iter().map(|e| e.0).collect())
                .collect(),
        )
    }
}

/// A predicted instance. Same shape and conventions as [`Instance`], but
/// entries must be strictly positive (possibly `+inf`) so that every scalar
/// ratio built from predictions is well-defined.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    inner: Instance,
}

impl Prediction {
    pub fn new(inner: Instance) -> Result<Self> {
        for i in 0..inner.n() {
            for j in 0..inner.m() {
                if inner.at(i, j) == 0.0 {
                    return Err(Error::InvalidEntry {
                        i,
                        j,
                        reason: "predicted times must be strictly positive".into(),
                    });
                }
            }
        }
        Ok(Prediction { inner })
    }

    pub fn n(&self) -> usize {
        self.inner.n()
    }

    pub fn m(&self) -> usize {
        self.inner.m()
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.inner.at(i, j)
    }

    pub fn as_instance(&self) -> &Instance {
        &self.inner
    }

    pub fn to_json(&self) -> String {
        self.inner.to_json()
    }

    pub fn from_json(s: &str) -> Result<Prediction> {
        Prediction::new(Instance::from_json(s)?)
    }
}

/// A total map from jobs to machines.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Allocation {
    assign: Vec<usize>,
}

impl Allocation {
    pub fn new(assign: Vec<usize>, n: usize) -> Result<Self> {
        if let Some(&bad) = assign.iter().find(|&&i| i >= n) {
            return Err(Error::MachineOutOfRange { machine: bad, n });
        }
        Ok(Allocation { assign })
    }

    pub fn machine_of(&self, job: usize) -> usize {
        self.assign[job]
    }

    pub fn jobs(&self) -> usize {
        self.assign.len()
    }

    /// Jobs assigned to machine `i` (the preimage `M_i`).
    pub fn jobs_on(&self, machine: usize) -> impl Iterator<Item = usize> + '_ {
        self.assign
            .iter()
            .enumerate()
            .filter(move |&(_, &i)| i == machine)
            .map(|(j, _)| j)
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.assign
    }
}

/// The report-independent multipliers `r(i,j)` a mechanism applies before
/// the per-job scaled-min assignment.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarMatrix {
    n: usize,
    m: usize,
    r: Vec<f64>,
}

impl ScalarMatrix {
    pub fn filled(n: usize, m: usize, value: f64) -> Self {
        ScalarMatrix {
            n,
            m,
            r: vec![value; n * m],
        }
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.r[i * self.m + j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        debug_assert!(value > 0.0);
        self.r[i * self.m + j] = value;
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Largest scalar on machine `i`.
    pub fn row_max(&self, i: usize) -> f64 {
        self.r[i * self.m..(i + 1) * self.m]
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// An approximation or error ratio: an extended real `>= 1`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Ratio(f64);

impl Ratio {
    pub fn new(value: f64) -> Result<Self> {
        if value.is_nan() || value < 1.0 {
            return Err(Error::Precondition(format!(
                "ratio must be >= 1, got {value}"
            )));
        }
        Ok(Ratio(value))
    }

    pub fn value(&self) -> f64 {
        self.0
    }

    pub fn is_infinite(&self) -> bool {
        self.0.is_infinite()
    }
}

/// Maximum over machines of the total assigned processing time.
pub fn makespan(inst: &Instance, alloc: &Allocation) -> Result<f64> {
    Ok(load_profile(inst, alloc)?.into_iter().fold(0.0, f64::max))
}

/// Per-machine loads; the max of the profile equals the makespan.
pub fn load_profile(inst: &Instance, alloc: &Allocation) -> Result<Vec<f64>> {
    if alloc.jobs() != inst.m() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} jobs", inst.m()),
            got: format!("{} assignments", alloc.jobs()),
        });
    }
    let mut loads = vec![0.0; inst.n()];
    for (j, &i) in alloc.as_slice().iter().enumerate() {
        if i >= inst.n() {
            return Err(Error::MachineOutOfRange {
                machine: i,
                n: inst.n(),
            });
        }
        loads[i] += inst.at(i, j);
    }
    Ok(loads)
}

fn entry_error(p: f64, p_hat: f64) -> f64 {
    if p.is_infinite() && p_hat.is_infinite() {
        1.0
    } else if p.is_infinite() || p_hat.is_infinite() || p == 0.0 {
        // 0 vs 0 is excluded by the Prediction invariant.
        f64::INFINITY
    } else {
        (p_hat / p).max(p / p_hat)
    }
}

/// Prediction error: the largest entry-wise ratio between predicted and
/// actual times, in either direction.
pub fn prediction_error(inst: &Instance, pred: &Prediction) -> Result<Ratio> {
    if !inst.same_shape(pred.as_instance()) {
        return Err(Error::ShapeMismatch {
            expected: format!("{}x{}", inst.n(), inst.m()),
            got: format!("{}x{}", pred.n(), pred.m()),
        });
    }
    let mut eta = 1.0f64;
    for i in 0..inst.n() {
        for j in 0..inst.m() {
            eta = eta.max(entry_error(inst.at(i, j), pred.at(i, j)));
        }
    }
    Ratio::new(eta)
}

/// Makespan of `alloc` divided by `opt`. An `opt` of zero against a nonzero
/// makespan yields an infinite ratio; zero against zero yields 1.
pub fn approximation_ratio(inst: &Instance, alloc: &Allocation, opt: f64) -> Result<Ratio> {
    if opt < 0.0 || opt.is_nan() {
        return Err(Error::Precondition(format!("opt must be >= 0, got {opt}")));
    }
    let ms = makespan(inst, alloc)?;
    if opt == 0.0 {
        return Ratio::new(if ms == 0.0 { 1.0 } else { f64::INFINITY });
    }
    if ms.is_infinite() {
        return Ratio::new(f64::INFINITY);
    }
    Ratio::new((ms / opt).max(1.0))
}
