//! Instance and prediction generators: random families, controlled-error
//! perturbations, and the two named extremal constructions used as
//! verification fixtures.
//!
//! All randomness flows through a caller-provided seed; the same seed
//! always yields the same matrices. Infinite entries are encoded as the
//! native infinity, never as a large sentinel, so an allocation onto one is
//! detectable as pathological rather than silently costly.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::core::{Instance, Prediction};
use crate::{Error, Result};

const INF: f64 = f64::INFINITY;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Uniform,
    Correlated,
    Figure1,
    Figure2,
    Perturbed,
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(Family::Uniform),
            "correlated" => Ok(Family::Correlated),
            "figure1" => Ok(Family::Figure1),
            "figure2" => Ok(Family::Figure2),
            "perturbed" => Ok(Family::Perturbed),
            other => Err(Error::Parse(format!(
                "unknown family {other:?}; accepted: uniform, correlated, figure1, figure2, perturbed"
            ))),
        }
    }
}

/// Parameters for one generation request.
#[derive(Debug, Clone)]
pub struct GeneratorSpec {
    pub family: Family,
    pub n: usize,
    pub m: usize,
    pub lo: f64,
    pub hi: f64,
    pub seed: u64,
    /// figure1 big entry.
    pub k: f64,
    /// figure1/figure2 epsilon.
    pub eps: f64,
    /// perturbed target error.
    pub eta: f64,
}

impl Default for GeneratorSpec {
    fn default() -> Self {
        GeneratorSpec {
            family: Family::Uniform,
            n: 2,
            m: 2,
            lo: 1.0,
            hi: 10.0,
            seed: 0,
            k: 100.0,
            eps: 0.01,
            eta: 1.0,
        }
    }
}

impl GeneratorSpec {
    /// Produce the instance, and the prediction for families that define one.
    pub fn generate(&self) -> Result<(Instance, Option<Prediction>)> {
        match self.family {
            Family::Uniform => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                Ok((
                    gen_uniform(self.n, self.m, self.lo, self.hi, &mut rng)?,
                    None,
                ))
            }
            Family::Correlated => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                Ok((
                    gen_correlated(self.n, self.m, self.lo, self.hi, &mut rng)?,
                    None,
                ))
            }
            Family::Figure1 => {
                if self.n != 2 || self.m != 2 {
                    return Err(Error::Precondition("figure1 requires n = 2, m = 2".into()));
                }
                let (pred, inst) = gen_figure1(self.k, self.eps)?;
                Ok((inst, Some(pred)))
            }
            Family::Figure2 => {
                if self.m != 2 * self.n - 2 {
                    return Err(Error::Precondition(format!(
                        "figure2 requires m = 2n - 2 = {}, got m = {}",
                        2 * self.n - 2,
                        self.m
                    )));
                }
                let (pred, inst) = gen_figure2(self.n, self.eps)?;
                Ok((inst, Some(pred)))
            }
            Family::Perturbed => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                let base = gen_uniform(self.n, self.m, self.lo, self.hi, &mut rng)?;
                let pred = gen_perturbed_rng(&base, self.eta, &mut rng)?;
                Ok((base, Some(pred)))
            }
        }
    }
}

/// I.i.d. entries uniform on `[lo, hi]`.
pub fn gen_uniform(n: usize, m: usize, lo: f64, hi: f64, rng: &mut ChaCha8Rng) -> Result<Instance> {
    if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
        return Err(Error::Precondition(format!(
            "need 0 < lo <= hi finite, got [{lo}, {hi}]"
        )));
    }
    let p = (0..n * m).map(|_| rng.gen_range(lo..=hi)).collect();
    Instance::from_flat(n, m, p)
}

/// Machine-speed times job-size structure with +/-10% noise.
pub fn gen_correlated(
    n: usize,
    m: usize,
    lo: f64,
    hi: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Instance> {
    if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
        return Err(Error::Precondition(format!(
            "need 0 < lo <= hi finite, got [{lo}, {hi}]"
        )));
    }
    let speeds: Vec<f64> = (0..n).map(|_| rng.gen_range(1.0..=2.0)).collect();
    let sizes: Vec<f64> = (0..m).map(|_| rng.gen_range(lo..=hi)).collect();
    let mut p = Vec::with_capacity(n * m);
    for &speed in &speeds {
        for &size in &sizes {
            let noise = rng.gen_range(0.9..=1.1);
            p.push(speed * size * noise);
        }
    }
    Instance::from_flat(n, m, p)
}

/// The 2x2 pair demonstrating that perfect consistency forces unbounded
/// robustness: predicted `[[K, 1], [inf, K]]`, actual `[[0, 1+eps], [inf, K]]`.
pub fn gen_figure1(k: f64, eps: f64) -> Result<(Prediction, Instance)> {
    if !(eps > 0.0 && k > 1.0 + eps) {
        return Err(Error::Precondition(format!(
            "need eps > 0 and K > 1 + eps, got K={k}, eps={eps}"
        )));
    }
    let pred = Prediction::new(Instance::new(2, 2, vec![vec![k, 1.0], vec![INF, k]])?)?;
    let inst = Instance::new(2, 2, vec![vec![0.0, 1.0 + eps], vec![INF, k]])?;
    Ok((pred, inst))
}

/// The n-machine, (2n-2)-job family on which the capped-scalar mechanism is
/// quadratically worse than optimal: small jobs 1..n-1 diagonal, big jobs
/// n..2n-2 that cost n(n-1) where predicted and 0 in reality.
pub fn gen_figure2(n: usize, eps: f64) -> Result<(Prediction, Instance)> {
    if n < 2 || eps <= 0.0 {
        return Err(Error::Precondition(format!(
            "need n >= 2 and eps > 0, got n={n}, eps={eps}"
        )));
    }
    let m = 2 * n - 2;
    let big = (n * (n - 1)) as f64;
    let mut pred = vec![vec![INF; m]; n];
    let mut inst = vec![vec![INF; m]; n];
    for i in 0..n - 1 {
        pred[i][i] = 1.0;
        pred[i][n - 1 + i] = big;
        pred[n - 1][i] = n as f64;
        inst[i][i] = 1.0 + eps;
        inst[i][n - 1..m].fill(0.0);
        inst[n - 1][i] = n as f64;
    }
    let pred = Prediction::new(Instance::new(n, m, pred)?)?;
    let inst = Instance::new(n, m, inst)?;
    Ok((pred, inst))
}

/// Multiplicative log-uniform perturbation of a positive finite base, with
/// one entry forced to the extreme factor so the realized error hits
/// `target_eta`. Infinite base entries are copied verbatim; zero entries are
/// rejected (a positive prediction of a zero time has infinite error).
pub fn gen_perturbed(base: &Instance, target_eta: f64, seed: u64) -> Result<Prediction> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    gen_perturbed_rng(base, target_eta, &mut rng)
}

pub fn gen_perturbed_rng(
    base: &Instance,
    target_eta: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Prediction> {
    if target_eta.is_nan() || target_eta < 1.0 {
        return Err(Error::Precondition(format!(
            "target_eta must be >= 1, got {target_eta}"
        )));
    }
    let mut finite = Vec::new();
    for i in 0..base.n() {
        for j in 0..base.m() {
            let v = base.at(i, j);
            if v == 0.0 {
                return Err(Error::InvalidEntry {
                    i,
                    j,
                    reason: "cannot perturb a zero entry into a positive prediction".into(),
                });
            }
            if v.is_finite() {
                finite.push((i, j));
            }
        }
    }
    if target_eta == 1.0 {
        return Prediction::new(base.clone());
    }
    let forced = finite[rng.gen_range(0..finite.len())];
    let forced_up = rng.gen_bool(0.5);
    let ln_eta = target_eta.ln();
    let mut rows = Vec::with_capacity(base.n());
    for i in 0..base.n() {
        let mut row = Vec::with_capacity(base.m());
        for j in 0..base.m() {
            let v = base.at(i, j);
            let factor = if !v.is_finite() {
                1.0
            } else if (i, j) == forced {
                if forced_up {
                    target_eta
                } else {
                    1.0 / target_eta
                }
            } else {
                (rng.gen_range(-1.0..1.0) * ln_eta).exp()
            };
            row.push(v * factor);
        }
        rows.push(row);
    }
    Prediction::new(Instance::new(base.n(), base.m(), rows)?)
}
