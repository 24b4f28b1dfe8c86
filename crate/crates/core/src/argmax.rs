//! Candidate-set construction and the sampled approximate argmax.
//!
//! A candidate set is the union of uniform draws, draws from each argmax
//! predictor in the ensemble, and (when one exists) the stored best-so-far
//! prior action. The approximate argmax scans Q over the candidates; because
//! the prior is always a candidate, the returned value can never fall below
//! the prior's value, which is what makes repeated refinement monotone.

use crate::error::{Error, Result};
use crate::mat::Mat;
use crate::nn::ParamStore;
use crate::predictor::ArgmaxPredictor;
use crate::space::ActionSpace;
use crate::RunRng;

/// Sampling budgets and per-source allocation ratios.
///
/// `ratios[0]` is the uniform share; `ratios[1..]` line up with the predictor
/// ensemble. Ratios must be non-negative and sum to 1 within 1e-9.
#[derive(Clone, Debug, PartialEq)]
pub struct SamplingPlan {
    pub m_target: usize,
    pub m_greedy: usize,
    pub ratios: Vec<f64>,
}

impl SamplingPlan {
    pub fn new(m_target: usize, m_greedy: usize, ratios: Vec<f64>) -> Result<Self> {
        if m_target < 1 || m_greedy < 1 {
            return Err(Error::Config(format!(
                "sampling budgets must be at least 1, got target {m_target}, greedy {m_greedy}"
            )));
        }
        if ratios.is_empty() {
            return Err(Error::Config("sampling plan needs at least the uniform ratio".into()));
        }
        if ratios.iter().any(|r| *r < 0.0) {
            return Err(Error::Config(format!("negative sampling ratio in {ratios:?}")));
        }
        let sum: f64 = ratios.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "sampling ratios must sum to 1 (got {sum}): {ratios:?}"
            )));
        }
        Ok(SamplingPlan {
            m_target,
            m_greedy,
            ratios,
        })
    }

    pub fn budget(&self, kind: BudgetKind) -> usize {
        match kind {
            BudgetKind::Target => self.m_target,
            BudgetKind::Greedy => self.m_greedy,
        }
    }

    /// Per-source sample counts for a budget of `m`: each predictor source
    /// gets `floor(ratio * m)` (with a tiny epsilon so exact products are not
    /// lost to rounding); the remainder goes to uniform.
    pub fn allocate(&self, m: usize) -> Vec<usize> {
        let mut counts = vec![0usize; self.ratios.len()];
        let mut used = 0usize;
        for (i, &rho) in self.ratios.iter().enumerate().skip(1) {
            let c = ((rho * m as f64) + 1e-9).floor() as usize;
            let c = c.min(m - used);
            counts[i] = c;
            used += c;
        }
        counts[0] = m - used;
        counts
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BudgetKind {
    Target,
    Greedy,
}

/// Provenance tag for each candidate action.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CandidateSource {
    Uniform,
    Predictor(usize),
    Prior,
}

/// Actions assembled for one state, tagged with their source.
#[derive(Clone, Debug)]
pub struct CandidateSet {
    pub actions: Mat,
    pub sources: Vec<CandidateSource>,
}

impl CandidateSet {
    pub fn len(&self) -> usize {
        self.sources.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sources.is_empty()
    }
}

/// Assembles the ensemble candidate set for one state.
///
/// `feat` is the observation embedding the predictors condition on. The
/// prior, when given, is appended as one extra candidate on top of the
/// budget, so the total is `m` or `m + 1`.
pub fn build_candidates(
    plan: &SamplingPlan,
    kind: BudgetKind,
    predictors: &[ArgmaxPredictor],
    store: &ParamStore,
    space: &ActionSpace,
    feat: &[f64],
    prior: Option<&[f64]>,
    rng: &mut RunRng,
) -> Result<CandidateSet> {
    assert_eq!(
        predictors.len() + 1,
        plan.ratios.len(),
        "plan has {} ratios but {} predictors",
        plan.ratios.len(),
        predictors.len()
    );
    let m = plan.budget(kind);
    let counts = plan.allocate(m);
    let total = counts.iter().sum::<usize>() + usize::from(prior.is_some());
    if total == 0 {
        return Err(Error::EmptyCandidates);
    }

    let dims = space.dims();
    let mut actions = Mat::zeros(total, dims);
    let mut sources = Vec::with_capacity(total);
    let mut row = 0usize;

    for _ in 0..counts[0] {
        space.sample_uniform_into(rng, actions.row_mut(row));
        sources.push(CandidateSource::Uniform);
        row += 1;
    }
    for (k, pred) in predictors.iter().enumerate() {
        let n = counts[k + 1];
        if n == 0 {
            continue;
        }
        let draws = pred.sample(store, feat, n, space, rng);
        for r in 0..n {
            actions.row_mut(row).copy_from_slice(draws.row(r));
            sources.push(CandidateSource::Predictor(k));
            row += 1;
        }
    }
    if let Some(p) = prior {
        actions.row_mut(row).copy_from_slice(p);
        sources.push(CandidateSource::Prior);
    }

    Ok(CandidateSet { actions, sources })
}

/// Scans Q over the candidates and returns `(index, value)` of the best one.
///
/// `q_eval` scores the whole candidate batch in one call. Ties break toward
/// the lowest candidate index. Non-finite values are excluded with a warning;
/// if every value is non-finite, an error is returned.
pub fn approx_argmax<F>(q_eval: F, candidates: &CandidateSet) -> Result<(usize, f64)>
where
    F: FnOnce(&Mat) -> Vec<f64>,
{
    if candidates.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    let values = q_eval(&candidates.actions);
    assert_eq!(values.len(), candidates.len(), "Q evaluator returned wrong count");
    let mut best: Option<(usize, f64)> = None;
    for (i, &v) in values.iter().enumerate() {
        if !v.is_finite() {
            log::warn!("non-finite Q value {v} for candidate {i}; excluded");
            continue;
        }
        match best {
            Some((_, bv)) if v <= bv => {}
            _ => best = Some((i, v)),
        }
    }
    best.ok_or(Error::AllCandidatesNonFinite)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predictor::PerturbSigma;
    use crate::rng_from_seed;

    #[test]
    fn benchmark_plan_allocation_splits_900_10_90() {
        let plan = SamplingPlan::new(100, 1000, vec![0.9, 0.01, 0.09]).unwrap();
        assert_eq!(plan.allocate(1000), vec![900, 10, 90]);
        // Epsilon floor keeps exact products intact for awkward ratios too.
        let plan = SamplingPlan::new(10, 10, vec![0.4, 0.3, 0.3]).unwrap();
        assert_eq!(plan.allocate(10), vec![4, 3, 3]);
    }

    #[test]
    fn ratio_validation() {
        assert!(SamplingPlan::new(1, 1, vec![0.5, 0.4]).is_err());
        assert!(SamplingPlan::new(1, 1, vec![1.1, -0.1]).is_err());
        assert!(SamplingPlan::new(0, 1, vec![1.0]).is_err());
        assert!(SamplingPlan::new(1, 1, vec![1.0]).is_ok());
    }

    fn ensemble() -> (ParamStore, Vec<ArgmaxPredictor>, ActionSpace) {
        let mut store = ParamStore::new();
        let mut rng = rng_from_seed(0);
        let space = ActionSpace::symmetric(2, 1.0);
        let delta = ArgmaxPredictor::delta(
            &mut store,
            &mut rng,
            "d",
            3,
            8,
            &space,
            PerturbSigma::HalfWidthFraction(0.01),
        );
        let cat = ArgmaxPredictor::categorical(&mut store, &mut rng, "c", 3, 8, &space, 3).unwrap();
        (store, vec![delta, cat], space)
    }

    #[test]
    fn candidate_counts_match_plan_with_and_without_prior() {
        let (store, preds, space) = ensemble();
        let plan = SamplingPlan::new(100, 1000, vec![0.9, 0.01, 0.09]).unwrap();
        let mut rng = rng_from_seed(1);
        let feat = [0.0, 0.5, -0.5];

        let set = build_candidates(
            &plan,
            BudgetKind::Greedy,
            &preds,
            &store,
            &space,
            &feat,
            None,
            &mut rng,
        )
        .unwrap();
        assert_eq!(set.len(), 1000);
        let uniform = set.sources.iter().filter(|s| **s == CandidateSource::Uniform).count();
        let d = set.sources.iter().filter(|s| **s == CandidateSource::Predictor(0)).count();
        let c = set.sources.iter().filter(|s| **s == CandidateSource::Predictor(1)).count();
        assert_eq!((uniform, d, c), (900, 10, 90));

        let prior = [0.25, -0.75];
        let set = build_candidates(
            &plan,
            BudgetKind::Target,
            &preds,
            &store,
            &space,
            &feat,
            Some(&prior),
            &mut rng,
        )
        .unwrap();
        assert_eq!(set.len(), 101);
        assert_eq!(*set.sources.last().unwrap(), CandidateSource::Prior);
        assert_eq!(set.actions.row(100), &prior);
        for row in set.actions.iter_rows() {
            assert!(space.contains(row));
        }
    }

    #[test]
    fn single_uniform_candidate_plan() {
        let (store, _, space) = ensemble();
        let plan = SamplingPlan::new(1, 1, vec![1.0]).unwrap();
        let mut rng = rng_from_seed(2);
        let set = build_candidates(
            &plan,
            BudgetKind::Greedy,
            &[],
            &store,
            &space,
            &[],
            None,
            &mut rng,
        )
        .unwrap();
        assert_eq!(set.len(), 1);
        assert_eq!(set.sources[0], CandidateSource::Uniform);
    }

    #[test]
    fn argmax_picks_highest_and_breaks_ties_low() {
        let set = CandidateSet {
            actions: Mat::from_vec(3, 1, vec![0.1, 0.2, 0.3]),
            sources: vec![CandidateSource::Uniform; 3],
        };
        let (i, v) = approx_argmax(|_| vec![0.2, 0.7, 0.7], &set).unwrap();
        assert_eq!((i, v), (1, 0.7));

        let (i, v) = approx_argmax(|_| vec![0.5], &CandidateSet {
            actions: Mat::from_vec(1, 1, vec![0.0]),
            sources: vec![CandidateSource::Uniform],
        })
        .unwrap();
        assert_eq!((i, v), (0, 0.5));
    }

    #[test]
    fn argmax_skips_non_finite_and_errors_when_all_bad() {
        let set = CandidateSet {
            actions: Mat::from_vec(3, 1, vec![0.1, 0.2, 0.3]),
            sources: vec![CandidateSource::Uniform; 3],
        };
        let (i, _) = approx_argmax(|_| vec![f64::NAN, 0.4, f64::INFINITY], &set).unwrap();
        assert_eq!(i, 1);
        let err = approx_argmax(|_| vec![f64::NAN, f64::NAN, f64::NAN], &set).unwrap_err();
        assert!(matches!(err, Error::AllCandidatesNonFinite));
    }

    #[test]
    fn prior_dominance_on_a_fixed_surface() {
        // With the prior always in the set, the returned value never drops
        // below the prior's own value.
        let (store, preds, space) = ensemble();
        let plan = SamplingPlan::new(8, 8, vec![0.5, 0.25, 0.25]).unwrap();
        let mut rng = rng_from_seed(3);
        let q = |m: &Mat| -> Vec<f64> {
            m.iter_rows()
                .map(|a| -(a[0] - 0.3) * (a[0] - 0.3) - (a[1] + 0.2) * (a[1] + 0.2))
                .collect()
        };
        let mut prior = vec![-1.0, 1.0];
        let mut last = f64::NEG_INFINITY;
        for _ in 0..50 {
            let set = build_candidates(
                &plan,
                BudgetKind::Target,
                &preds,
                &store,
                &space,
                &[0.1, 0.1, 0.1],
                Some(&prior),
                &mut rng,
            )
            .unwrap();
            let (idx, val) = approx_argmax(q, &set).unwrap();
            assert!(val >= last, "value dropped: {last} -> {val}");
            last = val;
            prior = set.actions.row(idx).to_vec();
        }
    }
}
