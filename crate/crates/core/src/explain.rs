//! Local selection and scoring of signed interactions and signed features.
//!
//! Interaction selection keeps interactions that are frequent on random
//! paths of the forest (scaled DWP), minimal among those, and frequent on
//! the test point's own paths (PP). Feature selection does the same per
//! signed feature, with fDWP (the best scaled DWP of any interaction
//! containing the feature) as the global score.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prevalence::{compute_dwp, compute_pp, PrevalenceTable};
use crate::rf::Forest;
use crate::signed::{SignedFeature, SignedInteraction};

/// Thresholds for local selection. `epsilon` is on the sample-weighted
/// impurity-decrease scale used by the trees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExplainConfig {
    pub epsilon: f64,
    pub eta_dwp: f64,
    pub eta_pp: f64,
    pub s_max: usize,
}

impl Default for ExplainConfig {
    fn default() -> Self {
        ExplainConfig {
            epsilon: 0.01,
            eta_dwp: 0.01,
            eta_pp: 0.01,
            s_max: 3,
        }
    }
}

impl ExplainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return Err(Error::InvalidParameter(format!("epsilon must be > 0, got {}", self.epsilon)));
        }
        for (name, eta) in [("eta_dwp", self.eta_dwp), ("eta_pp", self.eta_pp)] {
            if !(eta > 0.0 && eta < 1.0) {
                return Err(Error::InvalidParameter(format!("{name} must lie in (0,1), got {eta}")));
            }
        }
        if self.s_max < 1 {
            return Err(Error::InvalidParameter("s_max must be at least 1".into()));
        }
        Ok(())
    }
}

/// Drops every interaction that has a proper subset in the input.
pub fn minimality_filter<'a, I>(candidates: I) -> BTreeSet<SignedInteraction>
where
    I: IntoIterator<Item = &'a SignedInteraction>,
{
    let mut by_size: Vec<&SignedInteraction> = candidates.into_iter().collect();
    by_size.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    by_size.dedup();
    let mut kept: Vec<&SignedInteraction> = Vec::new();
    for s in by_size {
        // anything kept so far is no larger than s
        if !kept.iter().any(|k| k.is_proper_subset_of(s)) {
            kept.push(s);
        }
    }
    kept.into_iter().cloned().collect()
}

/// Prevalence-based interaction importance `2^|S| * DWP(S) * PP(S)`.
/// Can exceed 1 because of the size factor.
pub fn pii(interaction: &SignedInteraction, dwp: &PrevalenceTable, pp: &PrevalenceTable) -> f64 {
    dwp.scaled(interaction) * pp.lookup(interaction)
}

/// Best scaled DWP over stored interactions of at most `s_max` members
/// that contain `feature`; 0 if there are none.
pub fn fdwp(feature: SignedFeature, dwp: &PrevalenceTable, s_max: usize) -> f64 {
    dwp.iter()
        .filter(|(s, _)| s.len() <= s_max && s.contains(&feature))
        .map(|(s, v)| s.size_scale() * v)
        .fold(0.0, f64::max)
}

/// [`fdwp`] for every signed feature that occurs in the table, in one pass.
pub fn fdwp_all(dwp: &PrevalenceTable, s_max: usize) -> BTreeMap<SignedFeature, f64> {
    let mut out: BTreeMap<SignedFeature, f64> = BTreeMap::new();
    for (s, v) in dwp.iter().filter(|(s, _)| s.len() <= s_max) {
        let scaled = s.size_scale() * v;
        for &m in s.members() {
            let e = out.entry(m).or_insert(0.0);
            *e = e.max(scaled);
        }
    }
    out
}

/// Prevalence-based feature importance `PP({(k,b)}) * fDWP(k,b)`.
pub fn pfi(feature: SignedFeature, dwp: &PrevalenceTable, pp: &PrevalenceTable, s_max: usize) -> f64 {
    pp.lookup_feature(feature) * fdwp(feature, dwp, s_max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankScore {
    /// `2^|S| * DWP(S)`, independent of the test point.
    ScaledDwp,
    Pii,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionScores {
    pub interaction: SignedInteraction,
    pub size: usize,
    pub dwp: f64,
    pub scaled_dwp: f64,
    pub pp: f64,
    pub pii: f64,
}

impl InteractionScores {
    pub fn new(interaction: &SignedInteraction, dwp: &PrevalenceTable, pp: &PrevalenceTable) -> Self {
        let d = dwp.lookup(interaction);
        let p = pp.lookup(interaction);
        let scale = interaction.size_scale();
        InteractionScores {
            interaction: interaction.clone(),
            size: interaction.len(),
            dwp: d,
            scaled_dwp: scale * d,
            pp: p,
            pii: scale * d * p,
        }
    }

    pub fn score(&self, by: RankScore) -> f64 {
        match by {
            RankScore::ScaledDwp => self.scaled_dwp,
            RankScore::Pii => self.pii,
        }
    }
}

/// Orders by score descending, then size ascending, then canonical order.
fn ranking_order(a: &InteractionScores, b: &InteractionScores, by: RankScore) -> Ordering {
    b.score(by)
        .total_cmp(&a.score(by))
        .then(a.size.cmp(&b.size))
        .then_with(|| a.interaction.cmp(&b.interaction))
}

/// Ranks every interaction with nonzero DWP. Interactions absent from the
/// DWP table score zero under both rules and are left out.
pub fn rank_interactions(dwp: &PrevalenceTable, pp: &PrevalenceTable, by: RankScore) -> Vec<InteractionScores> {
    let mut ranked: Vec<InteractionScores> = dwp.iter().map(|(s, _)| InteractionScores::new(s, dwp, pp)).collect();
    ranked.sort_by(|a, b| ranking_order(a, b, by));
    ranked
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureScores {
    pub feature: SignedFeature,
    pub fdwp: f64,
    pub pp: f64,
    pub pfi: f64,
}

/// PFI for every signed feature with nonzero fDWP, highest first (ties by
/// feature order).
pub fn rank_features(dwp: &PrevalenceTable, pp: &PrevalenceTable, s_max: usize) -> Vec<FeatureScores> {
    let mut out: Vec<FeatureScores> = fdwp_all(dwp, s_max)
        .into_iter()
        .map(|(feature, f)| {
            let p = pp.lookup_feature(feature);
            FeatureScores {
                feature,
                fdwp: f,
                pp: p,
                pfi: p * f,
            }
        })
        .collect();
    out.sort_by(|a, b| b.pfi.total_cmp(&a.pfi).then(a.feature.cmp(&b.feature)));
    out
}

/// Interaction selection for one test point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionExplanation {
    pub test_point: Vec<f64>,
    pub config: ExplainConfig,
    pub selected: Vec<InteractionScores>,
    /// Top of the PII ranking.
    pub ranking: Vec<InteractionScores>,
}

impl InteractionExplanation {
    pub fn selected_set(&self) -> BTreeSet<SignedInteraction> {
        self.selected.iter().map(|s| s.interaction.clone()).collect()
    }
}

/// Feature selection for one test point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureExplanation {
    pub test_point: Vec<f64>,
    pub config: ExplainConfig,
    pub selected: Vec<FeatureScores>,
}

impl FeatureExplanation {
    pub fn selected_set(&self) -> BTreeSet<SignedFeature> {
        self.selected.iter().map(|s| s.feature).collect()
    }
}

/// Global candidates: interactions of at most `s_max` members with
/// `2^|S| * DWP(S) >= 1 - eta_dwp`, reduced to the minimal ones.
pub fn global_candidates(dwp: &PrevalenceTable, config: &ExplainConfig) -> BTreeSet<SignedInteraction> {
    let cutoff = 1.0 - config.eta_dwp;
    let passing: Vec<&SignedInteraction> = dwp
        .iter()
        .filter(|(s, v)| s.len() <= config.s_max && s.size_scale() * v >= cutoff)
        .map(|(s, _)| s)
        .collect();
    minimality_filter(passing)
}

/// Global signed features: `fDWP(k,b) >= 1 - eta_dwp`.
pub fn global_features(dwp: &PrevalenceTable, config: &ExplainConfig) -> BTreeSet<SignedFeature> {
    let cutoff = 1.0 - config.eta_dwp;
    fdwp_all(dwp, config.s_max)
        .into_iter()
        .filter(|&(_, f)| f >= cutoff)
        .map(|(k, _)| k)
        .collect()
}

/// Keeps the candidates whose path prevalence at the test point reaches
/// `1 - eta_pp`.
pub fn select_local(
    candidates: &BTreeSet<SignedInteraction>,
    dwp: &PrevalenceTable,
    pp: &PrevalenceTable,
    eta_pp: f64,
) -> Vec<InteractionScores> {
    let cutoff = 1.0 - eta_pp;
    candidates
        .iter()
        .filter(|s| pp.lookup(s) >= cutoff)
        .map(|s| InteractionScores::new(s, dwp, pp))
        .collect()
}

/// Precomputes the DWP table and global candidates of a forest so that
/// many test points can be explained against them.
#[derive(Debug, Clone)]
pub struct Explainer<'a> {
    forest: &'a Forest,
    config: ExplainConfig,
    dwp: PrevalenceTable,
    candidates: BTreeSet<SignedInteraction>,
    features: BTreeMap<SignedFeature, f64>,
}

impl<'a> Explainer<'a> {
    pub fn new(forest: &'a Forest, config: ExplainConfig) -> Result<Self> {
        config.validate()?;
        let dwp = compute_dwp(forest, config.epsilon, config.s_max)?;
        let candidates = global_candidates(&dwp, &config);
        let cutoff = 1.0 - config.eta_dwp;
        let features = fdwp_all(&dwp, config.s_max)
            .into_iter()
            .filter(|&(_, f)| f >= cutoff)
            .collect();
        Ok(Explainer {
            forest,
            config,
            dwp,
            candidates,
            features,
        })
    }

    pub fn config(&self) -> &ExplainConfig {
        &self.config
    }

    pub fn dwp(&self) -> &PrevalenceTable {
        &self.dwp
    }

    pub fn forest(&self) -> &Forest {
        self.forest
    }

    pub fn global_candidates(&self) -> &BTreeSet<SignedInteraction> {
        &self.candidates
    }

    pub fn pp(&self, x: &[f64]) -> Result<PrevalenceTable> {
        compute_pp(self.forest, x, self.config.epsilon, self.config.s_max)
    }

    /// Interaction selection at `x`, with the top `top_k` of the PII
    /// ranking attached.
    pub fn interactions(&self, x: &[f64], top_k: usize) -> Result<InteractionExplanation> {
        let pp = self.pp(x)?;
        let selected = select_local(&self.candidates, &self.dwp, &pp, self.config.eta_pp);
        let mut ranking = rank_interactions(&self.dwp, &pp, RankScore::Pii);
        ranking.truncate(top_k);
        Ok(InteractionExplanation {
            test_point: x.to_vec(),
            config: self.config,
            selected,
            ranking,
        })
    }

    /// Signed feature selection at `x`.
    pub fn features(&self, x: &[f64]) -> Result<FeatureExplanation> {
        let pp = self.pp(x)?;
        let cutoff = 1.0 - self.config.eta_pp;
        let selected = self
            .features
            .iter()
            .filter_map(|(&feature, &f)| {
                let p = pp.lookup_feature(feature);
                (p >= cutoff).then_some(FeatureScores {
                    feature,
                    fdwp: f,
                    pp: p,
                    pfi: p * f,
                })
            })
            .collect();
        Ok(FeatureExplanation {
            test_point: x.to_vec(),
            config: self.config,
            selected,
        })
    }
}

/// Interaction selection for a single test point.
pub fn local_lss_find(forest: &Forest, x: &[f64], config: &ExplainConfig) -> Result<InteractionExplanation> {
    forest.check_dimension(x)?;
    Explainer::new(forest, *config)?.interactions(x, 10)
}

/// Signed feature selection for a single test point.
pub fn local_feature_lss_find(forest: &Forest, x: &[f64], config: &ExplainConfig) -> Result<FeatureExplanation> {
    forest.check_dimension(x)?;
    Explainer::new(forest, *config)?.features(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prevalence::fixtures::*;

    fn si(s: &str) -> SignedInteraction {
        s.parse().unwrap()
    }

    fn set(items: &[&str]) -> BTreeSet<SignedInteraction> {
        items.iter().map(|s| si(s)).collect()
    }

    /// Tables with hand-picked values, built from a forest whose paths
    /// produce exactly the requested signed sets.
    fn tables() -> (PrevalenceTable, PrevalenceTable) {
        let forest = forest_of(vec![three_leaf_tree()], 2);
        let dwp = compute_dwp(&forest, 0.01, 2).unwrap();
        let pp = compute_pp(&forest, &[0.9, 0.1], 0.01, 2).unwrap();
        (dwp, pp)
    }

    #[test]
    fn minimality_examples() {
        assert_eq!(minimality_filter(&set(&["1-", "1-,2+"])), set(&["1-"]));
        assert_eq!(minimality_filter(&set(&["1-,2+", "3-,4-"])), set(&["1-,2+", "3-,4-"]));
        assert_eq!(
            minimality_filter(&set(&["1-", "2-", "1-,2-", "1-,3-"])),
            set(&["1-", "2-"])
        );
        assert!(minimality_filter(&BTreeSet::new()).is_empty());
    }

    #[test]
    fn pii_examples() {
        let (dwp, pp) = tables();
        // 1+,2- : DWP 0.25, PP 1 at x = (0.9, 0.1)
        assert_eq!(pii(&si("1+,2-"), &dwp, &pp), 1.0);
        assert_eq!(pii(&si("2-"), &dwp, &pp), 0.5);
        assert_eq!(pii(&si("1-"), &dwp, &pp), 0.0);
        assert_eq!(pii(&si("2+,1-"), &dwp, &pp), 0.0);
        // singleton with DWP 0.5 and PP 1
        assert_eq!(pii(&si("1+"), &dwp, &pp), 1.0);
    }

    #[test]
    fn fdwp_and_pfi_examples() {
        let (dwp, pp) = tables();
        // (1,+) sits in {1+} (0.5 -> 1.0) and {1+,2±} (0.25 -> 1.0)
        assert_eq!(fdwp(SignedFeature::pos(0), &dwp, 2), 1.0);
        assert_eq!(fdwp(SignedFeature::pos(2), &dwp, 2), 0.0);
        assert_eq!(fdwp(SignedFeature::neg(1), &dwp, 2), 1.0);
        assert_eq!(fdwp(SignedFeature::neg(1), &dwp, 1), 0.5);
        assert_eq!(pfi(SignedFeature::pos(0), &dwp, &pp, 2), 1.0);
        assert_eq!(pfi(SignedFeature::neg(0), &dwp, &pp, 2), 0.0);
        let all = fdwp_all(&dwp, 2);
        for (&k, &v) in &all {
            assert_eq!(v, fdwp(k, &dwp, 2));
        }
    }

    #[test]
    fn ranking_ties_and_order() {
        let (dwp, pp) = tables();
        let ranked = rank_interactions(&dwp, &pp, RankScore::ScaledDwp);
        // scaled values 1.0 tie across sizes: shorter first, then canonical order
        let names: Vec<String> = ranked.iter().map(|r| r.interaction.to_string()).collect();
        assert_eq!(names, ["1-", "1+", "1+,2-", "1+,2+", "2-", "2+"]);
        let ranked = rank_interactions(&dwp, &pp, RankScore::Pii);
        assert_eq!(ranked[0].interaction, si("1+"));
        assert_eq!(ranked[1].interaction, si("1+,2-"));
        assert_eq!(ranked[2].interaction, si("2-"));
        assert_eq!(ranked[2].pii, 0.5);
        assert!(ranked[3..].iter().all(|r| r.pii == 0.0));
    }

    #[test]
    fn empty_tables_rank_empty() {
        let forest = forest_of(vec![tree_from_preorder(&[None])], 2);
        let dwp = compute_dwp(&forest, 0.01, 2).unwrap();
        let pp = compute_pp(&forest, &[0.1, 0.1], 0.01, 2).unwrap();
        assert!(rank_interactions(&dwp, &pp, RankScore::Pii).is_empty());
        assert!(rank_features(&dwp, &pp, 2).is_empty());
    }

    #[test]
    fn algorithm_on_three_leaf_tree() {
        let forest = forest_of(vec![three_leaf_tree()], 2);
        let config = ExplainConfig {
            s_max: 2,
            ..Default::default()
        };
        // 1- and 1+ pass; the pairs pass too but contain 1+
        let exp = local_lss_find(&forest, &[0.9, 0.1], &config).unwrap();
        assert_eq!(exp.selected_set(), set(&["1+"]));
        let exp = local_lss_find(&forest, &[0.1, 0.1], &config).unwrap();
        assert_eq!(exp.selected_set(), set(&["1-"]));
        let feats = local_feature_lss_find(&forest, &[0.9, 0.1], &config).unwrap();
        assert_eq!(
            feats.selected_set(),
            BTreeSet::from([SignedFeature::pos(0), SignedFeature::neg(1)])
        );
        assert!(local_lss_find(&forest, &[0.9], &config).is_err());
    }

    #[test]
    fn tight_thresholds_select_nothing() {
        let forest = forest_of(vec![three_leaf_tree(), tree_from_preorder(&[None])], 2);
        // with a second, empty tree every scaled DWP is at most 0.5
        let config = ExplainConfig {
            s_max: 2,
            ..Default::default()
        };
        assert!(local_lss_find(&forest, &[0.9, 0.1], &config).unwrap().selected.is_empty());
    }

    #[test]
    fn config_validation() {
        assert!(ExplainConfig::default().validate().is_ok());
        for bad in [
            ExplainConfig { epsilon: 0.0, ..Default::default() },
            ExplainConfig { eta_dwp: 1.0, ..Default::default() },
            ExplainConfig { eta_pp: 0.0, ..Default::default() },
            ExplainConfig { s_max: 0, ..Default::default() },
        ] {
            assert!(bad.validate().is_err());
        }
    }
}
