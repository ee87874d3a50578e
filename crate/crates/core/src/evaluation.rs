//! Ranking metrics against simulated ground truth and the experiment grid
//! runner.

use std::collections::BTreeSet;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::explain::{rank_interactions, InteractionScores, RankScore};
use crate::prevalence::{compute_dwp, compute_pp};
use crate::rf::{default_mtry, fit_forest, ConstraintFlags, ForestParams};
use crate::signed::SignedInteraction;
use crate::sim::{build_benchmark_spec_with_p, sample_test_points, LssModelSpec, SimGrid};

/// Number of top-ranked interactions the metrics look at.
pub const TOP_K: usize = 10;

/// True when every truth element sits among the first `k` ranked items.
pub fn top_k_inclusion(ranking: &[SignedInteraction], truth: &BTreeSet<SignedInteraction>, k: usize) -> Result<bool> {
    if truth.is_empty() {
        return Err(Error::NoQualifyingBsis);
    }
    let top = &ranking[..k.min(ranking.len())];
    Ok(truth.iter().all(|t| top.contains(t)))
}

/// ROC-AUC of truth against non-truth inside a top-10 list, as the
/// Mann-Whitney fraction of (truth, non-truth) pairs in which the truth
/// item scores higher. Equal scores earn half credit. Returns 0 if any truth
/// item is missing from the list and 1 if the list holds no non-truth item.
///
/// `top` must be in ranking order; scores are only used to detect ties.
pub fn adjusted_roc_auc(top: &[(SignedInteraction, f64)], truth: &BTreeSet<SignedInteraction>) -> Result<f64> {
    if truth.is_empty() {
        return Err(Error::NoQualifyingBsis);
    }
    if top.len() > TOP_K {
        return Err(Error::InvalidParameter(format!(
            "adjusted AUC takes at most {TOP_K} items, got {}",
            top.len()
        )));
    }
    if !truth.iter().all(|t| top.iter().any(|(s, _)| s == t)) {
        return Ok(0.0);
    }
    let (pos, neg): (Vec<_>, Vec<_>) = top.iter().enumerate().partition(|(_, (s, _))| truth.contains(s));
    if neg.is_empty() {
        return Ok(1.0);
    }
    let mut won = 0.0;
    for &(i, (_, si)) in &pos {
        for &(j, (_, sj)) in &neg {
            if si == sj {
                won += 0.5;
            } else if i < j {
                won += 1.0;
            }
        }
    }
    Ok(won / (pos.len() * neg.len()) as f64)
}

/// One method's verdict on one test point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankingEvaluation {
    pub method: RankScore,
    pub included_all: bool,
    pub adjusted_auc: f64,
}

/// Scores a full ranking (best first) against the test point's BSIs.
pub fn evaluate_ranking(
    ranking: &[InteractionScores],
    method: RankScore,
    truth: &BTreeSet<SignedInteraction>,
) -> Result<RankingEvaluation> {
    let top: Vec<(SignedInteraction, f64)> = ranking
        .iter()
        .take(TOP_K)
        .map(|r| (r.interaction.clone(), r.score(method)))
        .collect();
    let names: Vec<SignedInteraction> = top.iter().map(|(s, _)| s.clone()).collect();
    Ok(RankingEvaluation {
        method,
        included_all: top_k_inclusion(&names, truth, TOP_K)?,
        adjusted_auc: adjusted_roc_auc(&top, truth)?,
    })
}

/// One grid cell. `spec` replaces the benchmark model built from
/// `(j, l, snr)` when present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub n: usize,
    pub j: usize,
    pub l: usize,
    pub snr: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec: Option<LssModelSpec>,
}

impl GridCell {
    pub fn benchmark(n: usize, j: usize, l: usize, snr: f64) -> Self {
        GridCell { n, j, l, snr, spec: None }
    }

    pub fn model(&self, p: usize) -> Result<LssModelSpec> {
        match &self.spec {
            Some(spec) => {
                spec.validate()?;
                Ok(spec.clone())
            }
            None => build_benchmark_spec_with_p(self.j, self.l, self.snr, p),
        }
    }
}

/// Cells of a grid in `n`, `J`, `L`, `SNR` order.
pub fn grid_cells(grid: &SimGrid) -> Vec<GridCell> {
    let mut cells = Vec::new();
    for &n in &grid.ns {
        for &j in &grid.js {
            for &l in &grid.ls {
                for &snr in &grid.snrs {
                    cells.push(GridCell::benchmark(n, j, l, snr));
                }
            }
        }
    }
    cells
}

/// How each cell is run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalSettings {
    pub p: usize,
    pub n_trees: usize,
    /// `None` means `ceil(p / 2)`.
    pub mtry: Option<usize>,
    pub n_test: usize,
    pub replicates: usize,
    pub epsilon: f64,
    pub constraints: ConstraintFlags,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self::desk()
    }
}

impl EvalSettings {
    /// Small enough for a laptop: 200 trees, 30 test points, 3 replicates.
    pub fn desk() -> Self {
        EvalSettings {
            p: crate::sim::BENCHMARK_P,
            n_trees: 200,
            mtry: None,
            n_test: 30,
            replicates: 3,
            epsilon: 0.01,
            constraints: ConstraintFlags::default(),
        }
    }

    /// Published scale: 500 trees and 100 test points per replicate.
    pub fn full() -> Self {
        EvalSettings {
            n_trees: 500,
            n_test: 100,
            replicates: 50,
            ..Self::desk()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_trees < 1 || self.n_test < 1 || self.replicates < 1 || self.p < 1 {
            return Err(Error::InvalidParameter(
                "p, n_trees, n_test and replicates must all be at least 1".into(),
            ));
        }
        if !(self.epsilon >= 0.0) || !self.epsilon.is_finite() {
            return Err(Error::InvalidParameter(format!("epsilon must be >= 0, got {}", self.epsilon)));
        }
        Ok(())
    }
}

/// Aggregates of one grid cell over replicates and qualifying test points.
/// Rates are `None` when no test point had a BSI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub n: usize,
    pub j: usize,
    pub l: usize,
    pub snr: f64,
    pub dwp_inclusion: Option<f64>,
    pub pii_inclusion: Option<f64>,
    pub roc_dwp: Option<f64>,
    pub roc_pii: Option<f64>,
    pub n_qualifying: usize,
    pub seed: u64,
}

impl ExperimentResult {
    pub fn is_skipped(&self) -> bool {
        self.n_qualifying == 0
    }
}

#[derive(Debug, Default, Clone, Copy)]
struct Tally {
    count: usize,
    dwp_included: usize,
    pii_included: usize,
    dwp_auc: f64,
    pii_auc: f64,
}

impl Tally {
    fn merge(mut self, other: Tally) -> Tally {
        self.count += other.count;
        self.dwp_included += other.dwp_included;
        self.pii_included += other.pii_included;
        self.dwp_auc += other.dwp_auc;
        self.pii_auc += other.pii_auc;
        self
    }
}

/// Seeds stream `2 * replicate` for data and forest and `2 * replicate + 1`
/// for test points, keyed by the run seed and cell index.
fn replicate_rngs(seed: u64, cell: usize, replicate: usize) -> (ChaCha8Rng, ChaCha8Rng) {
    let key = seed ^ (cell as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    let mut data = ChaCha8Rng::seed_from_u64(key);
    data.set_stream(2 * replicate as u64);
    let mut test = ChaCha8Rng::seed_from_u64(key);
    test.set_stream(2 * replicate as u64 + 1);
    (data, test)
}

fn run_replicate(cell: &GridCell, idx: usize, replicate: usize, settings: &EvalSettings, seed: u64) -> Result<Tally> {
    let spec = cell.model(settings.p)?;
    let (mut rng, mut test_rng) = replicate_rngs(seed, idx, replicate);
    let data = spec.generate(cell.n, &mut rng)?;
    let params = ForestParams {
        n_trees: settings.n_trees,
        mtry: Some(settings.mtry.unwrap_or_else(|| default_mtry(spec.p))),
        seed: rng.random(),
        min_node_size: 1,
        constraints: settings.constraints,
    };
    let forest = fit_forest(&data, &params)?;
    let s_max = spec.interactions.iter().map(|t| t.signed.len()).max().unwrap_or(cell.l) + 1;
    let dwp = compute_dwp(&forest, settings.epsilon, s_max)?;
    let dwp_ranking = rank_interactions(&dwp, &dwp, RankScore::ScaledDwp);
    let points = sample_test_points(spec.p, settings.n_test, &mut test_rng);
    let tallies = points
        .par_iter()
        .map(|x| -> Result<Tally> {
            let truth = spec.bsis_for_point(x)?;
            if truth.is_empty() {
                return Ok(Tally::default());
            }
            let pp = compute_pp(&forest, x, settings.epsilon, s_max)?;
            let by_dwp = evaluate_ranking(&dwp_ranking, RankScore::ScaledDwp, &truth)?;
            let by_pii = evaluate_ranking(&rank_interactions(&dwp, &pp, RankScore::Pii), RankScore::Pii, &truth)?;
            Ok(Tally {
                count: 1,
                dwp_included: by_dwp.included_all as usize,
                pii_included: by_pii.included_all as usize,
                dwp_auc: by_dwp.adjusted_auc,
                pii_auc: by_pii.adjusted_auc,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    // ordered fold keeps the floating-point sums thread-count independent
    Ok(tallies.into_iter().fold(Tally::default(), Tally::merge))
}

/// Runs every cell `settings.replicates` times. Output depends only on the
/// arguments, not on the number of worker threads.
pub fn run_grid(cells: &[GridCell], settings: &EvalSettings, seed: u64) -> Result<Vec<ExperimentResult>> {
    settings.validate()?;
    let jobs: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..settings.replicates).map(move |r| (c, r)))
        .collect();
    let tallies = jobs
        .par_iter()
        .map(|&(c, r)| run_replicate(&cells[c], c, r, settings, seed))
        .collect::<Result<Vec<_>>>()?;
    let results = cells
        .iter()
        .enumerate()
        .map(|(c, cell)| {
            let t = tallies[c * settings.replicates..(c + 1) * settings.replicates]
                .iter()
                .fold(Tally::default(), |a, &b| a.merge(b));
            let rate = |v: f64| (t.count > 0).then(|| v / t.count as f64);
            ExperimentResult {
                n: cell.n,
                j: cell.j,
                l: cell.l,
                snr: cell.snr,
                dwp_inclusion: rate(t.dwp_included as f64),
                pii_inclusion: rate(t.pii_included as f64),
                roc_dwp: rate(t.dwp_auc),
                roc_pii: rate(t.pii_auc),
                n_qualifying: t.count,
                seed,
            }
        })
        .collect();
    Ok(results)
}

pub const RESULTS_HEADER: [&str; 10] = [
    "n",
    "J",
    "L",
    "SNR",
    "dwp_inclusion",
    "pii_inclusion",
    "roc_dwp",
    "roc_pii",
    "n_qualifying",
    "seed",
];

/// Writes results with full precision; skipped cells show `NA`.
pub fn write_results_csv<W: Write>(writer: W, results: &[ExperimentResult]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(RESULTS_HEADER)?;
    let opt = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |v| v.to_string());
    for r in results {
        wtr.write_record([
            r.n.to_string(),
            r.j.to_string(),
            r.l.to_string(),
            r.snr.to_string(),
            opt(r.dwp_inclusion),
            opt(r.pii_inclusion),
            opt(r.roc_dwp),
            opt(r.roc_pii),
            r.n_qualifying.to_string(),
            r.seed.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn si(s: &str) -> SignedInteraction {
        s.parse().unwrap()
    }

    /// Truth items are named `t*`, others `n*`, mapped to distinct signed sets.
    fn items(pattern: &str) -> (Vec<SignedInteraction>, BTreeSet<SignedInteraction>) {
        let mut ranking = Vec::new();
        let mut truth = BTreeSet::new();
        for (i, c) in pattern.chars().enumerate() {
            let s = SignedInteraction::singleton(crate::signed::SignedFeature::neg(i));
            if c == 'T' {
                truth.insert(s.clone());
            }
            ranking.push(s);
        }
        (ranking, truth)
    }

    fn strictly_scored(ranking: &[SignedInteraction]) -> Vec<(SignedInteraction, f64)> {
        ranking.iter().enumerate().map(|(i, s)| (s.clone(), -(i as f64))).collect()
    }

    #[test]
    fn inclusion_examples() {
        let (r, t) = items("TTnnnnnnnnn");
        assert!(top_k_inclusion(&r, &t, 10).unwrap());
        let (r, t) = items("TnnnnnnnnnT");
        assert!(!top_k_inclusion(&r, &t, 10).unwrap());
        let (r, t) = items("TnnnnnnnnT");
        assert!(top_k_inclusion(&r, &t, 10).unwrap());
        assert!(top_k_inclusion(&r, &BTreeSet::new(), 10).is_err());
    }

    #[test]
    fn auc_examples() {
        let (r, t) = items("TTnnnnnnnn");
        assert_eq!(adjusted_roc_auc(&strictly_scored(&r), &t).unwrap(), 1.0);
        let (r, t) = items("TnTnnnnnnn");
        assert_eq!(adjusted_roc_auc(&strictly_scored(&r), &t).unwrap(), 0.9375);
        let (r, mut t) = items("Tnnnnnnnnn");
        t.insert(si("20-"));
        assert_eq!(adjusted_roc_auc(&strictly_scored(&r), &t).unwrap(), 0.0);
        let (r, t) = items("TTT");
        assert_eq!(adjusted_roc_auc(&strictly_scored(&r), &t).unwrap(), 1.0);
        let (r, t) = items("TnnnnnnnnnT");
        assert!(adjusted_roc_auc(&strictly_scored(&r), &t).is_err());
        assert!(adjusted_roc_auc(&[], &BTreeSet::new()).is_err());
    }

    #[test]
    fn auc_ties_get_half_credit() {
        let (r, t) = items("nT");
        let tied: Vec<_> = r.iter().map(|s| (s.clone(), 1.0)).collect();
        assert_eq!(adjusted_roc_auc(&tied, &t).unwrap(), 0.5);
        assert_eq!(adjusted_roc_auc(&strictly_scored(&r), &t).unwrap(), 0.0);
    }

    #[test]
    fn cells_follow_grid_order() {
        let grid = SimGrid {
            js: vec![1, 2],
            ls: vec![2],
            snrs: vec![1.0, 5.0],
            ns: vec![1000],
            ..Default::default()
        };
        let cells = grid_cells(&grid);
        let keys: Vec<_> = cells.iter().map(|c| (c.j, c.snr)).collect();
        assert_eq!(keys, [(1, 1.0), (1, 5.0), (2, 1.0), (2, 5.0)]);
    }

    fn tiny() -> EvalSettings {
        EvalSettings {
            n_trees: 20,
            n_test: 12,
            replicates: 2,
            p: 6,
            ..EvalSettings::desk()
        }
    }

    #[test]
    fn grid_is_deterministic_and_in_range() {
        let cells = [GridCell::benchmark(300, 1, 2, 5.0), GridCell::benchmark(200, 2, 2, 1.0)];
        let a = run_grid(&cells, &tiny(), 3).unwrap();
        let b = run_grid(&cells, &tiny(), 3).unwrap();
        assert_eq!(a, b);
        for r in &a {
            for v in [r.dwp_inclusion, r.pii_inclusion, r.roc_dwp, r.roc_pii].into_iter().flatten() {
                assert!((0.0..=1.0).contains(&v));
            }
        }
        assert!(a[0].n_qualifying > 0);
    }

    #[test]
    fn noise_only_cell_is_skipped() {
        let spec = LssModelSpec {
            p: 6,
            interactions: vec![],
            intercept: 0.0,
            noise_sd: 1.0,
        };
        let cell = GridCell {
            n: 100,
            j: 0,
            l: 2,
            snr: 0.0,
            spec: Some(spec),
        };
        let res = run_grid(&[cell], &tiny(), 0).unwrap();
        assert!(res[0].is_skipped());
        assert_eq!(res[0].pii_inclusion, None);
        let mut buf = Vec::new();
        write_results_csv(&mut buf, &res).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "n,J,L,SNR,dwp_inclusion,pii_inclusion,roc_dwp,roc_pii,n_qualifying,seed\n100,0,2,0,NA,NA,NA,NA,0,0\n"
        );
    }

    #[test]
    fn empty_grid_writes_header_only() {
        let res = run_grid(&[], &tiny(), 0).unwrap();
        let mut buf = Vec::new();
        write_results_csv(&mut buf, &res).unwrap();
        assert_eq!(buf.iter().filter(|&&b| b == b'\n').count(), 1);
    }
}
