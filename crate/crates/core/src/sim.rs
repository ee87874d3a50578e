//! Locally spiky sparse (LSS) models: the regression function is an
//! intercept plus a sparse sum of Boolean threshold-interaction terms.
//! The simulator draws data from such a model and reports which signed
//! interactions are active at a given point.

use std::collections::BTreeSet;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::signed::{Sign, SignedFeature, SignedInteraction};

/// One Boolean term `coefficient * prod_k 1(x_k <= gamma_k)` (or `>` for
/// positively signed members).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasicInteraction {
    pub signed: SignedInteraction,
    /// One threshold per member, in the member order of `signed`.
    pub thresholds: Vec<f64>,
    pub coefficient: f64,
}

impl BasicInteraction {
    /// Indicator value of the term at `x`.
    pub fn is_active(&self, x: &[f64]) -> bool {
        self.signed
            .members()
            .iter()
            .zip(&self.thresholds)
            .all(|(m, &gamma)| side_matches(m.sign, x[m.feature], gamma))
    }

    /// Probability that the term is 1 under uniform features.
    pub fn activation_probability(&self) -> f64 {
        self.signed
            .members()
            .iter()
            .zip(&self.thresholds)
            .map(|(m, &gamma)| match m.sign {
                Sign::Negative => gamma,
                Sign::Positive => 1.0 - gamma,
            })
            .product()
    }
}

fn side_matches(sign: Sign, value: f64, gamma: f64) -> bool {
    match sign {
        Sign::Negative => value <= gamma,
        Sign::Positive => value > gamma,
    }
}

/// Ground-truth generative model. Features are uniform on `[0,1]^p` and
/// noise is Gaussian with standard deviation `noise_sd`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LssModelSpec {
    pub p: usize,
    pub interactions: Vec<BasicInteraction>,
    pub intercept: f64,
    pub noise_sd: f64,
}

/// Benchmark threshold `0.5^(1/L)`: a product of `L` such indicators is 1
/// with probability one half.
pub fn benchmark_tau(l: usize) -> f64 {
    0.5f64.powf(1.0 / l as f64)
}

pub const BENCHMARK_P: usize = 20;

/// Benchmark model with `j` all-negative interactions of `l` consecutive
/// features each, threshold `benchmark_tau(l)`, unit coefficients, zero
/// intercept, and noise calibrated so that `Var(signal) / sigma^2 = snr`.
pub fn build_benchmark_spec(j: usize, l: usize, snr: f64) -> Result<LssModelSpec> {
    build_benchmark_spec_with_p(j, l, snr, BENCHMARK_P)
}

pub fn build_benchmark_spec_with_p(j: usize, l: usize, snr: f64, p: usize) -> Result<LssModelSpec> {
    if j < 1 || l < 1 {
        return Err(Error::InvalidParameter("J and L must be at least 1".into()));
    }
    if j * l > p {
        return Err(Error::InvalidParameter(format!("J*L = {} exceeds p = {p}", j * l)));
    }
    if !(snr > 0.0) || !snr.is_finite() {
        return Err(Error::InvalidParameter(format!("SNR must be positive, got {snr}")));
    }
    let tau = benchmark_tau(l);
    let interactions = (0..j)
        .map(|term| BasicInteraction {
            signed: SignedInteraction::new((term * l..(term + 1) * l).map(SignedFeature::neg).collect())
                .expect("distinct features"),
            thresholds: vec![tau; l],
            coefficient: 1.0,
        })
        .collect();
    let mut spec = LssModelSpec {
        p,
        interactions,
        intercept: 0.0,
        noise_sd: 0.0,
    };
    spec.noise_sd = (spec.signal_variance() / snr).sqrt();
    Ok(spec)
}

impl LssModelSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.p < 1 {
            return bad("p must be at least 1".into());
        }
        if !(self.noise_sd >= 0.0) || !self.noise_sd.is_finite() {
            return bad(format!("noise_sd must be finite and >= 0, got {}", self.noise_sd));
        }
        if !self.intercept.is_finite() {
            return bad("intercept must be finite".into());
        }
        let mut seen = BTreeSet::new();
        for (j, term) in self.interactions.iter().enumerate() {
            if term.signed.is_empty() {
                return bad(format!("interaction {} is empty", j + 1));
            }
            if term.thresholds.len() != term.signed.len() {
                return bad(format!("interaction {} needs one threshold per feature", j + 1));
            }
            if !(term.coefficient.abs() > 0.0) || !term.coefficient.is_finite() {
                return bad(format!("interaction {} needs a nonzero finite coefficient", j + 1));
            }
            for (m, &gamma) in term.signed.members().iter().zip(&term.thresholds) {
                if m.feature >= self.p {
                    return bad(format!("feature {} exceeds p = {}", m.feature + 1, self.p));
                }
                if !(gamma > 0.0 && gamma < 1.0) {
                    return bad(format!("threshold {gamma} of feature {} not in (0,1)", m.feature + 1));
                }
                if !seen.insert(m.feature) {
                    return bad(format!("feature {} appears in two interactions", m.feature + 1));
                }
            }
        }
        Ok(())
    }

    /// `E[Y | X = x]`.
    pub fn regression(&self, x: &[f64]) -> f64 {
        self.intercept
            + self
                .interactions
                .iter()
                .filter(|t| t.is_active(x))
                .map(|t| t.coefficient)
                .sum::<f64>()
    }

    /// Variance of the regression function under uniform features. Terms
    /// involve disjoint features, so they are independent Bernoulli
    /// variables scaled by their coefficients.
    pub fn signal_variance(&self) -> f64 {
        self.interactions
            .iter()
            .map(|t| {
                let q = t.activation_probability();
                t.coefficient * t.coefficient * q * (1.0 - q)
            })
            .sum()
    }

    /// `Var(signal) / sigma^2`; infinite for noiseless models.
    pub fn snr(&self) -> f64 {
        self.signal_variance() / (self.noise_sd * self.noise_sd)
    }

    /// Signed interactions of the model. A single-feature term counts with
    /// both signs, since `1(x <= g) = 1 - 1(x > g)`.
    pub fn model_bsis(&self) -> BTreeSet<SignedInteraction> {
        let mut out = BTreeSet::new();
        for term in &self.interactions {
            out.insert(term.signed.clone());
            if let [only] = term.signed.members() {
                out.insert(SignedInteraction::singleton(SignedFeature::new(only.feature, only.sign.flipped())));
            }
        }
        out
    }

    /// Signed interactions active at `x`: multi-feature terms whose
    /// indicator is 1 at `x`, and for each single-feature term the signed
    /// version on `x`'s side of the threshold.
    pub fn bsis_for_point(&self, x: &[f64]) -> Result<BTreeSet<SignedInteraction>> {
        if x.len() != self.p {
            return Err(Error::DimensionMismatch {
                expected: self.p,
                got: x.len(),
            });
        }
        let mut out = BTreeSet::new();
        for term in &self.interactions {
            for (m, &gamma) in term.signed.members().iter().zip(&term.thresholds) {
                if x[m.feature] == gamma {
                    return Err(Error::AmbiguousTestPoint { feature: m.feature + 1 });
                }
            }
            match term.signed.members() {
                [only] => {
                    let sign = if x[only.feature] <= term.thresholds[0] {
                        Sign::Negative
                    } else {
                        Sign::Positive
                    };
                    out.insert(SignedInteraction::singleton(SignedFeature::new(only.feature, sign)));
                }
                _ if term.is_active(x) => {
                    out.insert(term.signed.clone());
                }
                _ => {}
            }
        }
        Ok(out)
    }

    /// Signed features belonging to some interaction active at `x`.
    pub fn bsi_features_for_point(&self, x: &[f64]) -> Result<BTreeSet<SignedFeature>> {
        Ok(self
            .bsis_for_point(x)?
            .iter()
            .flat_map(|s| s.members().iter().copied())
            .collect())
    }

    /// Draws `n` rows with i.i.d. uniform features and Gaussian noise.
    pub fn generate<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Dataset> {
        self.validate()?;
        if n < 1 {
            return Err(Error::InvalidParameter("n must be at least 1".into()));
        }
        let mut columns = vec![Vec::with_capacity(n); self.p];
        let mut labels = Vec::with_capacity(n);
        let mut x = vec![0.0; self.p];
        for _ in 0..n {
            for (k, v) in x.iter_mut().enumerate() {
                *v = rng.random::<f64>();
                columns[k].push(*v);
            }
            let z: f64 = StandardNormal.sample(rng);
            labels.push(self.regression(&x) + self.noise_sd * z);
        }
        Dataset::from_columns(columns, labels)
    }
}

/// `n` test points drawn uniformly from `[0,1]^p`.
pub fn sample_test_points<R: Rng + ?Sized>(p: usize, n: usize, rng: &mut R) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..p).map(|_| rng.random::<f64>()).collect()).collect()
}

/// Ground truth written next to a simulated dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub spec: LssModelSpec,
    pub model_bsis: Vec<SignedInteraction>,
    /// Benchmark threshold, when the model came from the benchmark family.
    pub tau: Option<f64>,
    pub sigma: f64,
    pub sigma2: f64,
    pub signal_variance: f64,
}

impl GroundTruth {
    pub fn new(spec: &LssModelSpec, tau: Option<f64>) -> Self {
        GroundTruth {
            spec: spec.clone(),
            model_bsis: spec.model_bsis().into_iter().collect(),
            tau,
            sigma: spec.noise_sd,
            sigma2: spec.noise_sd * spec.noise_sd,
            signal_variance: spec.signal_variance(),
        }
    }
}

/// Axes of a simulation grid over the benchmark family. Defaults cover
/// the published design with p = 20.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimGrid {
    pub js: Vec<usize>,
    pub ls: Vec<usize>,
    pub snrs: Vec<f64>,
    pub ns: Vec<usize>,
    pub p: usize,
}

impl Default for SimGrid {
    fn default() -> Self {
        SimGrid {
            js: vec![1, 2],
            ls: vec![2, 3, 4],
            snrs: vec![0.5, 1.0, 2.0, 5.0],
            ns: vec![1000, 10000],
            p: BENCHMARK_P,
        }
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn si(s: &str) -> SignedInteraction {
        s.parse().unwrap()
    }

    fn single_feature_model() -> LssModelSpec {
        LssModelSpec {
            p: 6,
            interactions: vec![BasicInteraction {
                signed: si("5-"),
                thresholds: vec![0.4],
                coefficient: 2.0,
            }],
            intercept: 0.5,
            noise_sd: 0.0,
        }
    }

    #[test]
    fn benchmark_constants() {
        let spec = build_benchmark_spec(1, 2, 1.0).unwrap();
        assert!((benchmark_tau(2) - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert!((spec.noise_sd.powi(2) - 0.25).abs() < 1e-12);
        let spec = build_benchmark_spec(2, 2, 0.5).unwrap();
        assert!((spec.noise_sd.powi(2) - 1.0).abs() < 1e-12);
        assert!((benchmark_tau(4) - 0.84090).abs() < 1e-5);
        assert!(build_benchmark_spec(3, 7, 1.0).is_err());
    }

    #[test]
    fn benchmark_layout() {
        let spec = build_benchmark_spec(2, 3, 2.0).unwrap();
        assert_eq!(spec.interactions[0].signed, si("1-,2-,3-"));
        assert_eq!(spec.interactions[1].signed, si("4-,5-,6-"));
        assert_eq!(spec.intercept, 0.0);
        spec.validate().unwrap();
    }

    #[test]
    fn noiseless_labels_hit_extremes() {
        let mut spec = build_benchmark_spec(2, 2, 1.0).unwrap();
        spec.noise_sd = 0.0;
        let mut x = vec![0.5; 20];
        x[0] = 0.1;
        x[1] = 0.1;
        x[2] = 0.2;
        x[3] = 0.2;
        assert_eq!(spec.regression(&x), 2.0);
        x[0] = 0.9;
        x[3] = 0.9;
        assert_eq!(spec.regression(&x), 0.0);
    }

    #[test]
    fn monte_carlo_signal_variance_matches() {
        let spec = build_benchmark_spec(1, 2, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pts = sample_test_points(20, 200_000, &mut rng);
        let vals: Vec<f64> = pts.iter().map(|x| spec.regression(x)).collect();
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / vals.len() as f64;
        assert!((var - 0.25).abs() < 0.005, "var {var}");
    }

    #[test]
    fn bsis_of_models() {
        let spec = build_benchmark_spec(1, 2, 1.0).unwrap();
        assert_eq!(spec.model_bsis(), BTreeSet::from([si("1-,2-")]));
        assert_eq!(single_feature_model().model_bsis(), BTreeSet::from([si("5-"), si("5+")]));
        let spec = build_benchmark_spec(2, 3, 1.0).unwrap();
        assert_eq!(spec.model_bsis(), BTreeSet::from([si("1-,2-,3-"), si("4-,5-,6-")]));
    }

    #[test]
    fn bsis_for_points() {
        let spec = build_benchmark_spec(1, 2, 1.0).unwrap();
        let mut x = vec![0.5; 20];
        x[0] = 0.1;
        x[1] = 0.1;
        assert_eq!(spec.bsis_for_point(&x).unwrap(), BTreeSet::from([si("1-,2-")]));
        x[0] = 0.9;
        assert!(spec.bsis_for_point(&x).unwrap().is_empty());
        x[0] = benchmark_tau(2);
        assert!(matches!(spec.bsis_for_point(&x), Err(Error::AmbiguousTestPoint { feature: 1 })));

        let single = single_feature_model();
        let mut x = vec![0.0; 6];
        x[4] = 0.9;
        assert_eq!(single.bsis_for_point(&x).unwrap(), BTreeSet::from([si("5+")]));
        x[4] = 0.1;
        assert_eq!(single.bsis_for_point(&x).unwrap(), BTreeSet::from([si("5-")]));
        assert!(single.bsis_for_point(&[0.0; 3]).is_err());
    }

    #[test]
    fn generation_is_seeded() {
        let spec = build_benchmark_spec(1, 2, 2.0).unwrap();
        let a = spec.generate(50, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let b = spec.generate(50, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let c = spec.generate(50, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.n_features(), 20);
        assert!(a.column(3).iter().all(|&v| (0.0..1.0).contains(&v)));
    }

    #[test]
    fn validation_catches_overlap_and_bad_thresholds() {
        let mut spec = build_benchmark_spec(2, 2, 1.0).unwrap();
        spec.interactions[1].signed = si("2-,3-");
        assert!(spec.validate().is_err());
        let mut spec = build_benchmark_spec(1, 2, 1.0).unwrap();
        spec.interactions[0].thresholds[0] = 1.0;
        assert!(spec.validate().is_err());
        let mut spec = build_benchmark_spec(1, 2, 1.0).unwrap();
        spec.interactions[0].coefficient = 0.0;
        assert!(spec.validate().is_err());
    }

    #[test]
    fn spec_json_round_trip() {
        let spec = build_benchmark_spec(2, 3, 0.5).unwrap();
        let text = serde_json::to_string(&spec).unwrap();
        assert!(text.contains("\"1-,2-,3-\""));
        assert_eq!(serde_json::from_str::<LssModelSpec>(&text).unwrap(), spec);
    }
}
