//! Hypothesize-and-test localization against a reference index.
//!
//! Query tuples are visited rarest key first. Each visited tuple retrieves
//! its candidate reference tuples, draws a bounded number of them without
//! replacement, turns each into a homography from the matched lines and
//! scores it by the fraction of query intersections that land next to a
//! reference intersection of the same type. Both draw counts come from
//! closed-form budgets, so an unsuccessful search ends with a stated
//! confidence that the query is not in the map.

use crate::features::{build_tuple, tuple_match_check, Intersection, Orientation, TupleFeature, DELTA_SEP};
use crate::geometry::{homography_from_lines, HomogPoint, Homography, Tolerances};
use crate::kdtree::KdTree;
use crate::refindex::{candidate_pairs, MatchKind, ReferenceIndex};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::HashSet;
use std::time::{Duration, Instant};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MatcherError {
    #[error("invalid matcher configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("query has {got} intersections, need at least {need}")]
    NotEnoughIntersections { got: usize, need: usize },
    #[error("reference index holds no tuples")]
    EmptyIndex,
    #[error("prior makes every query sample fail; no finite budget exists")]
    DegeneratePrior,
}

/// Missing fields in a serialized config take their defaults.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MatcherConfig {
    /// Accepted probability of missing a query that is in the map.
    pub lambda: f64,
    /// Accepted probability of missing the true candidate of one query tuple.
    pub lambda1: f64,
    /// Prior that a query tuple has a true counterpart in the map.
    pub p_query: f64,
    pub delta_inlier: f64,
    /// Inlier radius, map meters.
    pub delta_dist: f64,
    pub delta_cr: f64,
    /// Query-side tuple length limit, query units.
    pub d_max: f64,
    pub delta_sep: f64,
    pub min_intersections: usize,
    /// Query tuples with more candidates than this are skipped.
    pub max_candidates: usize,
    pub rng_seed: u64,
}

impl Default for MatcherConfig {
    fn default() -> Self {
        MatcherConfig {
            lambda: 0.01,
            lambda1: 0.05,
            p_query: 0.7,
            delta_inlier: 0.5,
            delta_dist: 20.0,
            delta_cr: 0.3,
            d_max: 3000.0,
            delta_sep: DELTA_SEP,
            min_intersections: 30,
            max_candidates: 100_000,
            rng_seed: 0,
        }
    }
}

impl MatcherConfig {
    pub fn validate(&self) -> Result<(), MatcherError> {
        let prob = |v: f64| v > 0.0 && v < 1.0;
        if !prob(self.lambda) || !prob(self.lambda1) {
            return Err(MatcherError::InvalidConfig("lambda and lambda1 must lie in (0, 1)"));
        }
        if !(self.p_query > 0.0 && self.p_query <= 1.0) {
            return Err(MatcherError::InvalidConfig("p_query must lie in (0, 1]"));
        }
        if !(self.delta_inlier > 0.0 && self.delta_inlier <= 1.0) {
            return Err(MatcherError::InvalidConfig("delta_inlier must lie in (0, 1]"));
        }
        if !(self.delta_dist > 0.0 && self.delta_cr >= 0.0 && self.d_max > 0.0 && self.delta_sep >= 0.0) {
            return Err(MatcherError::InvalidConfig("distances and tolerances must be positive"));
        }
        if self.min_intersections < 4 {
            return Err(MatcherError::InvalidConfig("min_intersections must be at least 4"));
        }
        Ok(())
    }
}

/// Draws needed among `n_match` candidates so that a designated one is
/// missed with probability below `lambda1`, drawing with replacement.
pub fn budget_reference(n_match: usize, lambda1: f64) -> usize {
    assert!(n_match >= 1, "budget needs at least one candidate");
    if n_match == 1 {
        return 1;
    }
    let q = 1.0 - 1.0 / n_match as f64;
    smallest_power_below(q, lambda1)
}

/// Query tuples to visit so that a query that is in the map is missed
/// with probability below `lambda`.
pub fn budget_query(lambda: f64, lambda1: f64, p_query: f64) -> Result<usize, MatcherError> {
    if p_query * (1.0 - lambda1) <= 0.0 {
        return Err(MatcherError::DegeneratePrior);
    }
    Ok(smallest_power_below(1.0 - p_query + p_query * lambda1, lambda))
}

/// Smallest `k ≥ 1` with `q^k < target`, for `q ∈ [0, 1)`.
fn smallest_power_below(q: f64, target: f64) -> usize {
    if q < target {
        return 1;
    }
    let mut k = (target.ln() / q.ln()).ceil().max(1.0) as usize;
    while q.powi(k as i32) >= target {
        k += 1;
    }
    while k > 1 && q.powi(k as i32 - 1) < target {
        k -= 1;
    }
    k
}

/// Probability that one query sample yields no correct hypothesis, given
/// its candidate count and the number of draws (with replacement).
pub fn sample_miss_probability(n_match: usize, k: usize, p_query: f64) -> f64 {
    let miss = if n_match == 0 {
        1.0
    } else {
        (1.0 - 1.0 / n_match as f64).powi(k as i32)
    };
    1.0 - p_query + p_query * miss
}

/// Probability that every listed `(n_match, k)` sample misses.
pub fn search_failure_probability(samples: &[(usize, usize)], p_query: f64) -> f64 {
    samples.iter().map(|&(n, k)| sample_miss_probability(n, k, p_query)).product()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub theta: f64,
    /// `(query id, reference id)` per inlier, in query order.
    pub matches: Vec<(u32, u32)>,
}

/// Fraction of `query` intersections that `h` maps within `delta_dist` of
/// a reference intersection with the same `(N_B, N_q)`.
///
/// Each reference intersection absorbs at most one query intersection;
/// pairs are assigned greedily by increasing distance. Without this a
/// hypothesis that squeezes the scene onto a few junctions scores high.
pub fn evaluate_hypothesis(
    h: &Homography,
    query: &[Intersection],
    index: &ReferenceIndex,
    delta_dist: f64,
) -> Evaluation {
    let mut scratch = Vec::new();
    let mut pairs: Vec<(f64, usize, u32)> = Vec::new();
    let refs = index.intersections();
    for (qi, p) in query.iter().enumerate() {
        let Some(xy) = h.map_point(&HomogPoint::from_xy(p.center)).to_xy_with(Tolerances::DEFAULT.eps_h) else {
            continue;
        };
        scratch.clear();
        index.within(xy, delta_dist, &mut scratch);
        pairs.extend(
            scratch
                .iter()
                .filter(|&&(j, _)| refs[j as usize].kind() == p.kind())
                .map(|&(j, d2)| (d2, qi, j)),
        );
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut taken_q = vec![false; query.len()];
    let mut taken_r = HashSet::new();
    let mut assigned: Vec<(usize, u32)> = Vec::new();
    for (_, qi, j) in pairs {
        if !taken_q[qi] && taken_r.insert(j) {
            taken_q[qi] = true;
            assigned.push((qi, j));
        }
    }
    assigned.sort_unstable();
    let matches: Vec<(u32, u32)> = assigned
        .into_iter()
        .map(|(qi, j)| (query[qi].id, refs[j as usize].id))
        .collect();
    let theta = if query.is_empty() {
        0.0
    } else {
        matches.len() as f64 / query.len() as f64
    };
    Evaluation { theta, matches }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Located,
    /// Full budget spent without success.
    NotInMap,
    /// Ran out of usable query tuples before the budget was spent.
    BudgetExhausted,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Located => "located",
            Verdict::NotInMap => "not_in_map",
            Verdict::BudgetExhausted => "budget_exhausted",
        }
    }
}

/// Where a hypothesis came from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HypothesisSource {
    /// Query intersection ids, canonical order.
    pub query: (u32, u32),
    /// Reference intersection ids, canonical order.
    pub reference: (u32, u32),
    pub swapped: bool,
    pub combo: [Orientation; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis {
    pub h: Homography,
    pub source: HypothesisSource,
}

/// What happened to one visited query tuple.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleTrace {
    pub query: (u32, u32),
    pub n_match: usize,
    /// Budget `k_i`; 0 for skipped samples.
    pub k_budget: usize,
    /// Hypotheses actually tested.
    pub k_used: usize,
    /// Candidate count above the cap; not counted against the query budget.
    pub skipped: bool,
    /// Best inlier ratio after this sample.
    pub best_theta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalizationResult {
    pub verdict: Verdict,
    pub best: Option<Hypothesis>,
    pub theta: f64,
    pub matches: Vec<(u32, u32)>,
    /// Query samples counted against the budget.
    pub l_used: usize,
    pub l_budget: usize,
    pub k_used_total: usize,
    pub trace: Vec<SampleTrace>,
    pub query_tuples: usize,
    pub elapsed: Duration,
}

impl LocalizationResult {
    pub fn best_h(&self) -> Option<&Homography> {
        self.best.as_ref().map(|b| &b.h)
    }
}

/// Admissible tuples among the query intersections.
pub fn query_tuples(query: &[Intersection], d_max: f64, delta_sep: f64) -> Vec<TupleFeature> {
    if query.len() < 2 {
        return Vec::new();
    }
    let centers: Vec<[f64; 2]> = query.iter().map(|p| p.center).collect();
    let coords: Vec<f64> = centers.iter().flatten().copied().collect();
    let ids: Vec<u32> = (0..query.len() as u32).collect();
    let tree = KdTree::build(2, &coords, &ids);
    candidate_pairs(&tree, &centers, d_max)
        .into_iter()
        .filter_map(|(i, j)| build_tuple(&query[i as usize], &query[j as usize], d_max, delta_sep).ok())
        .collect()
}

fn hypothesis(q: &TupleFeature, r: &TupleFeature, kind: MatchKind, delta_cr: f64) -> Option<Hypothesis> {
    let m = tuple_match_check(q, r, delta_cr)
        .into_iter()
        .find(|m| m.swapped == kind.swapped && m.combo == kind.combo)?;
    let h = homography_from_lines(&m.correspondence.pairs).ok()?;
    Some(Hypothesis {
        h,
        source: HypothesisSource {
            query: q.ids(),
            reference: r.ids(),
            swapped: kind.swapped,
            combo: kind.combo,
        },
    })
}

pub fn localize(query: &[Intersection], index: &ReferenceIndex, cfg: &MatcherConfig) -> Result<LocalizationResult, MatcherError> {
    let start = Instant::now();
    cfg.validate()?;
    if query.len() < cfg.min_intersections {
        return Err(MatcherError::NotEnoughIntersections {
            got: query.len(),
            need: cfg.min_intersections,
        });
    }
    if index.tuple_count() == 0 {
        return Err(MatcherError::EmptyIndex);
    }
    let l_budget = budget_query(cfg.lambda, cfg.lambda1, cfg.p_query)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);

    // keys absent from the map cannot produce a hypothesis
    let mut tuples: Vec<TupleFeature> = query_tuples(query, cfg.d_max, cfg.delta_sep)
        .into_iter()
        .filter(|t| index.rarity(&t.d_b) > 0)
        .collect();
    let n_tuples = tuples.len();
    tuples.shuffle(&mut rng);
    tuples.sort_by_key(|t| index.rarity(&t.d_b));

    let mut out = LocalizationResult {
        verdict: Verdict::BudgetExhausted,
        best: None,
        theta: 0.0,
        matches: Vec::new(),
        l_used: 0,
        l_budget,
        k_used_total: 0,
        trace: Vec::new(),
        query_tuples: n_tuples,
        elapsed: Duration::ZERO,
    };
    for q in &tuples {
        if out.l_used >= l_budget {
            out.verdict = Verdict::NotInMap;
            break;
        }
        let candidates = index.query_candidates(q, cfg.delta_cr);
        let pool: Vec<(u32, MatchKind)> = candidates
            .iter()
            .flat_map(|c| c.kinds.iter().map(move |k| (c.record, *k)))
            .collect();
        let n_match = pool.len();
        let mut trace = SampleTrace {
            query: q.ids(),
            n_match,
            k_budget: 0,
            k_used: 0,
            skipped: n_match > cfg.max_candidates,
            best_theta: out.theta,
        };
        if trace.skipped {
            out.trace.push(trace);
            continue;
        }
        out.l_used += 1;
        if n_match > 0 {
            trace.k_budget = budget_reference(n_match, cfg.lambda1);
            let draws = trace.k_budget.min(n_match);
            for pos in rand::seq::index::sample(&mut rng, n_match, draws) {
                let (record, kind) = pool[pos];
                trace.k_used += 1;
                let r = index.tuple(&q.d_b, record).expect("candidate records exist");
                let Some(hyp) = hypothesis(q, &r, kind, cfg.delta_cr) else {
                    continue;
                };
                let e = evaluate_hypothesis(&hyp.h, query, index, cfg.delta_dist);
                if e.theta > out.theta || out.best.is_none() {
                    out.theta = e.theta;
                    out.matches = e.matches;
                    out.best = Some(hyp);
                }
                if out.theta > cfg.delta_inlier {
                    out.verdict = Verdict::Located;
                    break;
                }
            }
        }
        out.k_used_total += trace.k_used;
        trace.best_theta = out.theta;
        out.trace.push(trace);
        if out.verdict == Verdict::Located {
            break;
        }
    }
    if out.verdict != Verdict::Located && out.l_used >= l_budget {
        out.verdict = Verdict::NotInMap;
    }
    out.elapsed = start.elapsed();
    Ok(out)
}
