//! Species families: the laws of the independent `Z_j` whose conditioned
//! weighted sum defines a random component spectrum.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::pmf::{Pmf, DEFAULT_TAU};
use crate::trees::{big_ln, otter_constants, OtterConstants, TreeCounts};

pub const DEFAULT_HORIZON: usize = 400;

/// Tree counts are always computed at least this far so that the growth
/// constant is pinned to double precision.
const MIN_COUNT_HORIZON: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    PoissonPower,
    ForestUnlabelledUnrooted,
    ForestUnlabelledRooted,
    ForestLabelledUnrooted,
    ForestLabelledRooted,
    CustomTable,
}

impl Family {
    pub const ALL: [Family; 6] = [
        Family::PoissonPower,
        Family::ForestUnlabelledUnrooted,
        Family::ForestUnlabelledRooted,
        Family::ForestLabelledUnrooted,
        Family::ForestLabelledRooted,
        Family::CustomTable,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::PoissonPower => "poisson-power",
            Family::ForestUnlabelledUnrooted => "forest-unlabelled-unrooted",
            Family::ForestUnlabelledRooted => "forest-unlabelled-rooted",
            Family::ForestLabelledUnrooted => "forest-labelled-unrooted",
            Family::ForestLabelledRooted => "forest-labelled-rooted",
            Family::CustomTable => "custom-table",
        }
    }

    /// The convergence exponent imposed by the family, if any.
    pub fn fixed_q(self) -> Option<f64> {
        match self {
            Family::ForestUnlabelledUnrooted | Family::ForestLabelledUnrooted => Some(1.5),
            Family::ForestUnlabelledRooted | Family::ForestLabelledRooted => Some(0.5),
            _ => None,
        }
    }

    /// Families whose species are Poisson distributed.
    pub fn is_poisson(self) -> bool {
        matches!(
            self,
            Family::PoissonPower | Family::ForestLabelledUnrooted | Family::ForestLabelledRooted
        )
    }

    fn uses_tree_counts(self) -> bool {
        matches!(self, Family::ForestUnlabelledUnrooted | Family::ForestUnlabelledRooted)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::domain(format!("unknown model family '{s}'")))
    }
}

/// The slowly varying factor `lambda(j)` of a power-law Poisson family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LambdaSpec {
    Constant(f64),
    /// `values[j-1] = lambda(j)`; `sup_beyond` bounds `lambda` past the table
    /// and makes the family usable for limit laws.
    Table { values: Vec<f64>, sup_beyond: Option<f64> },
}

impl LambdaSpec {
    fn value(&self, j: usize) -> Result<f64> {
        match self {
            LambdaSpec::Constant(c) => Ok(*c),
            LambdaSpec::Table { values, .. } => values
                .get(j - 1)
                .copied()
                .ok_or(Error::Horizon { j, horizon: values.len() }),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match self {
            LambdaSpec::Constant(c) => *c > 0.0 && c.is_finite(),
            LambdaSpec::Table { values, sup_beyond } => {
                !values.is_empty()
                    && values.iter().all(|v| *v > 0.0 && v.is_finite())
                    && sup_beyond.is_none_or(|s| s > 0.0)
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::domain("lambda values must be finite and > 0"))
        }
    }
}

/// Explicit species laws for `j = 1..=laws.len()`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CustomTable {
    pub laws: Vec<Pmf>,
    /// Species past the table are identically zero.
    pub zero_beyond: bool,
    /// Declared bound on `sum_{j > len} E Z_j`, needed for limit laws when
    /// `zero_beyond` is false.
    pub tail_bound: Option<f64>,
}

/// Declarative description of a model; resolve it with [`Model::new`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelSpec {
    pub family: Family,
    pub q: f64,
    /// Amplitude `A` of `a_j = A j^{-q-1} lambda(j)` (power-law family).
    pub amplitude: f64,
    pub lambda: LambdaSpec,
    /// Largest component size for which tree-count families are defined.
    pub horizon: usize,
    pub tau: f64,
    /// Tilting parameter `x`; 1 leaves the model untouched.
    pub tilt: f64,
    pub custom: Option<CustomTable>,
}

impl ModelSpec {
    /// `a_j = A j^{-q-1}` with constant lambda.
    pub fn poisson_power(q: f64, amplitude: f64) -> Self {
        ModelSpec {
            family: Family::PoissonPower,
            q,
            amplitude,
            lambda: LambdaSpec::Constant(1.0),
            horizon: DEFAULT_HORIZON,
            tau: DEFAULT_TAU,
            tilt: 1.0,
            custom: None,
        }
    }

    /// One of the four forest families, with its fixed exponent.
    pub fn forest(family: Family) -> Self {
        let q = family.fixed_q().expect("forest family");
        ModelSpec {
            family,
            q,
            amplitude: 1.0,
            lambda: LambdaSpec::Constant(1.0),
            horizon: DEFAULT_HORIZON,
            tau: DEFAULT_TAU,
            tilt: 1.0,
            custom: None,
        }
    }

    pub fn custom(q: f64, table: CustomTable) -> Self {
        ModelSpec {
            family: Family::CustomTable,
            q,
            amplitude: 1.0,
            lambda: LambdaSpec::Constant(1.0),
            horizon: table.laws.len(),
            tau: DEFAULT_TAU,
            tilt: 1.0,
            custom: Some(table),
        }
    }

    pub fn with_tau(mut self, tau: f64) -> Self {
        self.tau = tau;
        self
    }

    pub fn with_horizon(mut self, horizon: usize) -> Self {
        self.horizon = horizon;
        self
    }

    pub fn with_lambda(mut self, lambda: LambdaSpec) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn with_tilt(mut self, x: f64) -> Self {
        self.tilt = x;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.q > 0.0) || !self.q.is_finite() {
            return Err(Error::domain(format!("q must be > 0, got {}", self.q)));
        }
        if let Some(q) = self.family.fixed_q() {
            if self.q != q {
                return Err(Error::domain(format!(
                    "family {} fixes q = {q}; it cannot be overridden",
                    self.family
                )));
            }
        }
        if !(self.tau > 0.0 && self.tau <= 1e-6) {
            return Err(Error::domain(format!("tau must lie in (0, 1e-6], got {}", self.tau)));
        }
        if !(self.tilt > 0.0) || !self.tilt.is_finite() {
            return Err(Error::domain(format!("tilt must be > 0, got {}", self.tilt)));
        }
        if !(self.amplitude > 0.0) || !self.amplitude.is_finite() {
            return Err(Error::domain(format!("A must be > 0, got {}", self.amplitude)));
        }
        if self.horizon == 0 {
            return Err(Error::domain("horizon must be >= 1"));
        }
        self.lambda.validate()?;
        if self.family == Family::CustomTable && self.custom.is_none() {
            return Err(Error::domain("custom-table family needs a table"));
        }
        Ok(())
    }

    /// Stable hash of the resolved specification.
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_vec(self).expect("spec serializes");
        let digest = Sha256::digest(&json);
        hex::encode(&digest[..8])
    }
}

/// Running maximum `lambda^+(l) = max_{s <= l} lambda(s)` over a sampled range.
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaFn {
    values: Vec<f64>,
    running_max: Vec<f64>,
}

impl LambdaFn {
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::domain("lambda must be positive on the queried range"));
        }
        let running_max = values
            .iter()
            .scan(0.0f64, |m, &v| {
                *m = m.max(v);
                Some(*m)
            })
            .collect();
        Ok(LambdaFn { values, running_max })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn value(&self, j: usize) -> f64 {
        self.values[j - 1]
    }

    pub fn running_max(&self, l: usize) -> f64 {
        self.running_max[l - 1]
    }
}

/// A resolved model: tree counts and growth constants computed, species laws
/// memoized on first use.
pub struct Model {
    spec: ModelSpec,
    trees: Option<Arc<TreeCounts>>,
    otter: Option<OtterConstants>,
    ln_factorials: Vec<f64>,
    overrides: BTreeMap<usize, Arc<Pmf>>,
    cache: RwLock<Vec<Option<Arc<Pmf>>>>,
    fingerprint: String,
}

impl fmt::Debug for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Model")
            .field("spec", &self.spec)
            .field("fingerprint", &self.fingerprint)
            .finish_non_exhaustive()
    }
}

impl Clone for Model {
    fn clone(&self) -> Self {
        Model {
            spec: self.spec.clone(),
            trees: self.trees.clone(),
            otter: self.otter.clone(),
            ln_factorials: self.ln_factorials.clone(),
            overrides: self.overrides.clone(),
            cache: RwLock::new(self.cache.read().expect("cache lock").clone()),
            fingerprint: self.fingerprint.clone(),
        }
    }
}

impl Model {
    pub fn new(spec: ModelSpec) -> Result<Self> {
        spec.validate()?;
        let (trees, otter) = if spec.family.uses_tree_counts() {
            let counts = Arc::new(TreeCounts::compute(spec.horizon.max(MIN_COUNT_HORIZON))?);
            let consts = otter_constants(&counts, 1e-12)?;
            if spec.tilt * consts.rho >= 1.0 {
                return Err(Error::TiltDivergence { j: 1, x: spec.tilt });
            }
            (Some(counts), Some(consts))
        } else {
            (None, None)
        };
        let ln_factorials = if matches!(
            spec.family,
            Family::ForestLabelledUnrooted | Family::ForestLabelledRooted
        ) {
            let mut v = Vec::with_capacity(spec.horizon + 1);
            v.push(0.0);
            for k in 1..=spec.horizon {
                let prev = v[k - 1];
                v.push(prev + (k as f64).ln());
            }
            v
        } else {
            Vec::new()
        };
        let fingerprint = spec.fingerprint();
        Ok(Model {
            spec,
            trees,
            otter,
            ln_factorials,
            overrides: BTreeMap::new(),
            cache: RwLock::new(Vec::new()),
            fingerprint,
        })
    }

    /// The same family tilted by a further factor `x`.
    pub fn tilted(&self, x: f64) -> Result<Model> {
        let spec = self.spec.clone().with_tilt(self.spec.tilt * x);
        let mut m = Model::new(spec)?;
        for (&j, law) in &self.overrides {
            m.overrides.insert(j, Arc::new(law.tilt(j, x)?));
        }
        m.refresh_fingerprint();
        Ok(m)
    }

    /// Replaces the law of `Z_j` while keeping the family's nominal means.
    /// Used to check that identities detect a corrupted species.
    pub fn with_override(mut self, j: usize, law: Pmf) -> Self {
        self.overrides.insert(j, Arc::new(law));
        self.cache = RwLock::new(Vec::new());
        self.refresh_fingerprint();
        self
    }

    fn refresh_fingerprint(&mut self) {
        if self.overrides.is_empty() {
            self.fingerprint = self.spec.fingerprint();
            return;
        }
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(&self.spec).expect("spec serializes"));
        for (j, law) in &self.overrides {
            h.update(j.to_le_bytes());
            h.update(serde_json::to_vec(law.as_ref()).expect("pmf serializes"));
        }
        self.fingerprint = hex::encode(&h.finalize()[..8]);
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn family(&self) -> Family {
        self.spec.family
    }

    pub fn q(&self) -> f64 {
        self.spec.q
    }

    pub fn tau(&self) -> f64 {
        self.spec.tau
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    pub fn tree_counts(&self) -> Option<&TreeCounts> {
        self.trees.as_deref()
    }

    pub fn otter(&self) -> Option<&OtterConstants> {
        self.otter.as_ref()
    }

    /// Largest `j` for which the species law is defined, if bounded.
    pub fn horizon(&self) -> Option<usize> {
        match self.spec.family {
            Family::PoissonPower => match &self.spec.lambda {
                LambdaSpec::Constant(_) => None,
                LambdaSpec::Table { values, .. } => Some(values.len()),
            },
            Family::CustomTable => {
                let t = self.spec.custom.as_ref().expect("validated");
                if t.zero_beyond {
                    None
                } else {
                    Some(t.laws.len())
                }
            }
            _ => Some(self.spec.horizon),
        }
    }

    fn check_j(&self, j: usize) -> Result<()> {
        if j == 0 {
            return Err(Error::domain("component sizes start at 1"));
        }
        match self.horizon() {
            Some(h) if j > h => Err(Error::Horizon { j, horizon: h }),
            _ => Ok(()),
        }
    }

    fn ln_tilt(&self, j: usize) -> f64 {
        j as f64 * self.spec.tilt.ln()
    }

    fn forest_parts(&self, j: usize) -> (f64, f64) {
        // (ln of the shape m_j or r_j, p = (rho x)^j)
        let counts = self.trees.as_ref().expect("forest family has counts");
        let rho = self.otter.as_ref().expect("forest family has constants").rho;
        let shape = match self.spec.family {
            Family::ForestUnlabelledUnrooted => counts.unrooted(j),
            _ => counts.rooted(j),
        };
        let p = (j as f64 * (rho * self.spec.tilt).ln()).exp();
        (big_ln(shape), p)
    }

    fn labelled_ln_mean(&self, j: usize) -> f64 {
        let jf = j as f64;
        let power = match self.spec.family {
            Family::ForestLabelledUnrooted => jf - 2.0,
            _ => jf - 1.0,
        };
        power * jf.ln() - self.ln_factorials[j] - jf
    }

    /// `a_j = E Z_j` from the family's closed form (the table mean for custom
    /// models). Species overrides do not change it.
    pub fn nominal_mean(&self, j: usize) -> Result<f64> {
        self.check_j(j)?;
        let jf = j as f64;
        Ok(match self.spec.family {
            Family::PoissonPower => {
                let lam = self.spec.lambda.value(j)?;
                self.spec.amplitude * lam * (-(self.spec.q + 1.0) * jf.ln() + self.ln_tilt(j)).exp()
            }
            Family::ForestUnlabelledUnrooted | Family::ForestUnlabelledRooted => {
                let (ln_m, p) = self.forest_parts(j);
                (ln_m + p.ln()).exp() / (1.0 - p)
            }
            Family::ForestLabelledUnrooted | Family::ForestLabelledRooted => {
                (self.labelled_ln_mean(j) + self.ln_tilt(j)).exp()
            }
            Family::CustomTable => self.species_pmf(j)?.mean(),
        })
    }

    /// `lambda(j) = a_j j^{q+1}`.
    pub fn lambda(&self, j: usize) -> Result<f64> {
        if self.spec.family == Family::PoissonPower {
            self.check_j(j)?;
            let base = self.spec.amplitude * self.spec.lambda.value(j)?;
            return Ok(if self.spec.tilt == 1.0 { base } else { base * self.ln_tilt(j).exp() });
        }
        Ok(self.nominal_mean(j)? * (j as f64).powf(self.spec.q + 1.0))
    }

    pub fn lambda_fn(&self, upto: usize) -> Result<LambdaFn> {
        LambdaFn::from_values((1..=upto).map(|j| self.lambda(j)).collect::<Result<_>>()?)
    }

    /// Law of `Z_j`.
    pub fn species_pmf(&self, j: usize) -> Result<Arc<Pmf>> {
        self.check_j(j)?;
        if let Some(law) = self.overrides.get(&j) {
            return Ok(law.clone());
        }
        if let Some(Some(law)) = self.cache.read().expect("cache lock").get(j - 1) {
            return Ok(law.clone());
        }
        let law = Arc::new(self.build_species(j)?);
        let mut cache = self.cache.write().expect("cache lock");
        if cache.len() < j {
            cache.resize(j, None);
        }
        Ok(cache[j - 1].get_or_insert(law).clone())
    }

    /// Laws of `Z_1..Z_n`, index `j-1`.
    pub fn species_laws(&self, n: usize) -> Result<Vec<Arc<Pmf>>> {
        (1..=n).map(|j| self.species_pmf(j)).collect()
    }

    fn build_species(&self, j: usize) -> Result<Pmf> {
        let tau = self.spec.tau;
        match self.spec.family {
            Family::PoissonPower | Family::ForestLabelledUnrooted | Family::ForestLabelledRooted => {
                Pmf::poisson(self.nominal_mean(j)?, tau)
            }
            Family::ForestUnlabelledUnrooted | Family::ForestUnlabelledRooted => {
                let (ln_m, p) = self.forest_parts(j);
                Pmf::negbinom_ln_shape(ln_m, p, tau)
            }
            Family::CustomTable => {
                let table = self.spec.custom.as_ref().expect("validated");
                let base = match table.laws.get(j - 1) {
                    Some(law) => law.clone(),
                    None => Pmf::point(0),
                };
                base.tilt(j, self.spec.tilt)
            }
        }
    }

    /// Upper bound on `sum_{j > big_j} a_j`, which also bounds the chance that
    /// any species beyond `big_j` is non-zero.
    pub fn tail_mean_bound(&self, big_j: usize) -> Result<f64> {
        if self.spec.tilt > 1.0 {
            return Err(Error::TailUnknown("tilted model with x > 1".into()));
        }
        let q = self.spec.q;
        let power_tail = |sup: f64| sup * (big_j as f64).powf(-q) / q;
        match self.spec.family {
            Family::PoissonPower => {
                let sup = match &self.spec.lambda {
                    LambdaSpec::Constant(c) => *c,
                    LambdaSpec::Table { values, sup_beyond } => {
                        let sup = sup_beyond.ok_or_else(|| {
                            Error::TailUnknown("lambda table has no declared bound past its end".into())
                        })?;
                        values.iter().skip(big_j).copied().fold(sup, f64::max)
                    }
                };
                Ok(self.spec.amplitude * power_tail(sup))
            }
            // j^{j-2}/(j! e^j) <= (2 pi)^{-1/2} j^{-5/2} by Stirling's lower bound.
            Family::ForestLabelledUnrooted | Family::ForestLabelledRooted => {
                Ok(power_tail((2.0 * std::f64::consts::PI).powf(-0.5)))
            }
            Family::ForestUnlabelledUnrooted | Family::ForestUnlabelledRooted => {
                // lambda(j) decreases to its limit for j past the first few
                // dozen, so the largest value past J within the counts horizon
                // (or the last one computed) bounds the rest.
                let otter = self.otter.as_ref().expect("forest family has constants");
                let c = match self.spec.family {
                    Family::ForestUnlabelledUnrooted => otter.c_unrooted,
                    _ => otter.c_rooted,
                };
                let h = self.spec.horizon;
                let from = (big_j + 1).min(h);
                let observed = (from..=h)
                    .map(|j| self.lambda(j))
                    .collect::<Result<Vec<_>>>()?
                    .into_iter()
                    .fold(c, f64::max);
                Ok(power_tail(observed * (1.0 + 1e-6)))
            }
            Family::CustomTable => {
                let table = self.spec.custom.as_ref().expect("validated");
                if table.zero_beyond && big_j >= table.laws.len() {
                    return Ok(0.0);
                }
                if big_j < table.laws.len() {
                    let inside: f64 = table.laws[big_j..].iter().map(|l| l.mean()).sum();
                    return match (table.zero_beyond, table.tail_bound) {
                        (true, _) => Ok(inside),
                        (false, Some(b)) => Ok(inside + b),
                        (false, None) => Err(Error::TailUnknown("custom table declares no tail bound".into())),
                    };
                }
                table
                    .tail_bound
                    .ok_or_else(|| Error::TailUnknown("custom table declares no tail bound".into()))
            }
        }
    }

    /// Smallest truncation index `J` whose tail mean bound is below `delta`,
    /// within the model's horizon.
    pub fn truncation_index(&self, delta: f64) -> Result<usize> {
        if !(delta > 0.0) {
            return Err(Error::domain("delta must be > 0"));
        }
        let q = self.spec.q;
        if let Family::CustomTable = self.spec.family {
            let len = self.spec.custom.as_ref().expect("validated").laws.len();
            let mut jj = 0;
            while self.tail_mean_bound(jj)? >= delta {
                jj += 1;
                if jj > len {
                    return Err(Error::TailUnknown(format!(
                        "declared custom-table tail bound exceeds delta = {delta}"
                    )));
                }
            }
            return Ok(jj);
        }
        // Closed-form bounds are C J^{-q}/q; solve then step to the first valid J.
        let c = self.tail_mean_bound(1)?;
        let mut jj = ((c / delta).powf(1.0 / q).ceil() as usize).max(1);
        while jj > 1 && self.tail_mean_bound(jj - 1)? < delta {
            jj -= 1;
        }
        while self.tail_mean_bound(jj)? >= delta {
            jj += 1;
        }
        if let Some(h) = self.horizon() {
            if jj > h {
                return Err(Error::Horizon { j: jj, horizon: h });
            }
        }
        Ok(jj)
    }
}
