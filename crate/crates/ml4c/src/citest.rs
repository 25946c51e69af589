//! Conditional-independence engine: the G² test on categorical data, the
//! p-value→severity transform, dependency scalars, and within-vicinity
//! sepset search. Two interchangeable backends: `G2Tester` runs on a
//! dataset, `OracleTester` answers from d-separation in a known DAG, which
//! makes every downstream decision exact on canonical instances.

use std::collections::{BTreeSet, HashMap};

use dashmap::DashMap;
use statrs::function::erf::{erfc, erfc_inv};
use statrs::function::gamma::gamma_ur;
use thiserror::Error;

use crate::graph::{d_separated, Dag, GraphError, NodeId, Skeleton, UnshieldedTriple};
use crate::synth::DiscreteDataset;

#[derive(Debug, Error)]
pub enum CiError {
    #[error("invalid test arguments: x={x}, y={y}, z={z:?}")]
    InvalidArguments {
        x: NodeId,
        y: NodeId,
        z: Vec<NodeId>,
    },
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Severity values are capped here once the p-value underflows to zero.
pub const SEVERITY_CAP: f64 = 37.5;

/// Two-sided normal-quantile transform of a p-value: sqrt(2)·erfc⁻¹(p).
/// p = 0.0455 maps to 2.0 (the 2-sigma tail), p = 1 to 0.
pub fn severity(p: f64) -> f64 {
    let p = p.clamp(0.0, 1.0);
    if p <= 0.0 {
        return SEVERITY_CAP;
    }
    (std::f64::consts::SQRT_2 * erfc_inv(p)).clamp(0.0, SEVERITY_CAP)
}

/// Inverse of `severity` for round-trip checks: erfc(s / sqrt(2)).
pub fn severity_to_p(s: f64) -> f64 {
    erfc(s / std::f64::consts::SQRT_2)
}

/// Outcome of one conditional-independence test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CiResult {
    pub statistic: f64,
    /// Degrees of freedom after the sparse-table adjustment; 0 marks a
    /// degenerate test, reported as the independent verdict.
    pub dof: u64,
    pub p_value: f64,
    pub severity: f64,
}

impl CiResult {
    fn independent_verdict(statistic: f64, dof: u64) -> Self {
        Self {
            statistic,
            dof,
            p_value: 1.0,
            severity: 0.0,
        }
    }
}

/// Tuning for the data-backed test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct G2Config {
    /// Significance level for the dependent/independent decision.
    pub alpha: f64,
    /// The test degenerates to the independent verdict when
    /// n < samples_per_dof · (|x|−1)(|y|−1)·Π|z|.
    pub samples_per_dof: f64,
}

impl Default for G2Config {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            samples_per_dof: 5.0,
        }
    }
}

fn check_args(n_vars: usize, x: NodeId, y: NodeId, z: &[NodeId]) -> Result<(), CiError> {
    let bad =
        x == y || x >= n_vars || y >= n_vars || z.iter().any(|&v| v >= n_vars || v == x || v == y);
    if bad {
        return Err(CiError::InvalidArguments {
            x,
            y,
            z: z.to_vec(),
        });
    }
    Ok(())
}

/// G² test of X ⊥ Y | Z on a categorical dataset.
///
/// The statistic is 2·Σ O·ln(O/E) over the (x, y) contingency table within
/// each stratum of z; zero-observation cells contribute nothing. Degrees of
/// freedom sum (nonzero rows − 1)(nonzero columns − 1) over populated
/// strata, so empty strata and all-zero rows or columns do not count. The
/// p-value is the chi-square upper tail at the adjusted dof. When the
/// adjusted dof reaches zero, or fewer than `samples_per_dof` rows back each
/// theoretical dof, the result is the independent verdict (p = 1).
pub fn g2_test(
    data: &DiscreteDataset,
    x: NodeId,
    y: NodeId,
    z: &[NodeId],
    config: &G2Config,
) -> Result<CiResult, CiError> {
    check_args(data.n_cols(), x, y, z)?;
    let cx = data.cardinalities()[x] as usize;
    let cy = data.cardinalities()[y] as usize;
    let n = data.n_rows();

    let mut full_dof = ((cx - 1) * (cy - 1)) as f64;
    for &w in z {
        full_dof *= data.cardinalities()[w] as f64;
    }
    if (n as f64) < config.samples_per_dof * full_dof {
        return Ok(CiResult::independent_verdict(0.0, 0));
    }

    // stratum index: mixed radix over z values
    let mut radix_ok = true;
    let mut stride = 1u128;
    for &w in z {
        match stride.checked_mul(data.cardinalities()[w] as u128) {
            Some(s) => stride = s,
            None => {
                radix_ok = false;
                break;
            }
        }
    }
    if !radix_ok {
        return Ok(CiResult::independent_verdict(0.0, 0));
    }

    let mut strata: HashMap<u128, Vec<u64>> = HashMap::new();
    for r in 0..n {
        let mut key = 0u128;
        for &w in z {
            key = key * data.cardinalities()[w] as u128 + data.value(r, w) as u128;
        }
        let table = strata.entry(key).or_insert_with(|| vec![0u64; cx * cy]);
        table[data.value(r, x) as usize * cy + data.value(r, y) as usize] += 1;
    }

    // accumulate in sorted stratum order: float addition order must not
    // depend on the per-process hash seed or results stop replaying
    let mut keys: Vec<u128> = strata.keys().copied().collect();
    keys.sort_unstable();

    let mut statistic = 0.0f64;
    let mut dof = 0u64;
    let mut row_sums = vec![0u64; cx];
    let mut col_sums = vec![0u64; cy];
    for key in keys {
        let table = &strata[&key];
        row_sums.iter_mut().for_each(|s| *s = 0);
        col_sums.iter_mut().for_each(|s| *s = 0);
        let mut total = 0u64;
        for i in 0..cx {
            for j in 0..cy {
                let o = table[i * cy + j];
                row_sums[i] += o;
                col_sums[j] += o;
                total += o;
            }
        }
        if total == 0 {
            continue;
        }
        let nonzero_rows = row_sums.iter().filter(|&&s| s > 0).count();
        let nonzero_cols = col_sums.iter().filter(|&&s| s > 0).count();
        dof += (nonzero_rows.saturating_sub(1) * nonzero_cols.saturating_sub(1)) as u64;
        let total_f = total as f64;
        for i in 0..cx {
            for j in 0..cy {
                let o = table[i * cy + j];
                if o > 0 {
                    let e = row_sums[i] as f64 * col_sums[j] as f64 / total_f;
                    statistic += 2.0 * o as f64 * (o as f64 / e).ln();
                }
            }
        }
    }
    statistic = statistic.max(0.0);

    if dof == 0 {
        return Ok(CiResult::independent_verdict(statistic, 0));
    }
    let p_value = if statistic <= 0.0 {
        1.0
    } else {
        gamma_ur(dof as f64 / 2.0, statistic / 2.0).clamp(0.0, 1.0)
    };
    Ok(CiResult {
        statistic,
        dof,
        p_value,
        severity: severity(p_value),
    })
}

type CacheKey = (NodeId, NodeId, Vec<NodeId>);

fn cache_key(x: NodeId, y: NodeId, z: &[NodeId]) -> CacheKey {
    let (a, b) = if x < y { (x, y) } else { (y, x) };
    let mut zs = z.to_vec();
    zs.sort_unstable();
    (a, b, zs)
}

/// Data-backed tester with a concurrent result cache keyed by
/// (x, y, sorted z). Results are deterministic, so racing inserts of the
/// same key are benign.
pub struct G2Tester<'a> {
    data: &'a DiscreteDataset,
    config: G2Config,
    cache: DashMap<CacheKey, CiResult>,
}

impl<'a> G2Tester<'a> {
    pub fn new(data: &'a DiscreteDataset, config: G2Config) -> Self {
        Self {
            data,
            config,
            cache: DashMap::new(),
        }
    }

    pub fn config(&self) -> &G2Config {
        &self.config
    }

    pub fn test(&self, x: NodeId, y: NodeId, z: &[NodeId]) -> Result<CiResult, CiError> {
        let key = cache_key(x, y, z);
        if let Some(hit) = self.cache.get(&key) {
            return Ok(*hit);
        }
        let result = g2_test(self.data, x, y, z, &self.config)?;
        self.cache.insert(key, result);
        Ok(result)
    }
}

/// Exact tester backed by d-separation in a known DAG.
pub struct OracleTester<'a> {
    dag: &'a Dag,
    cache: DashMap<CacheKey, bool>,
}

impl<'a> OracleTester<'a> {
    pub fn new(dag: &'a Dag) -> Self {
        Self {
            dag,
            cache: DashMap::new(),
        }
    }

    pub fn separated(&self, x: NodeId, y: NodeId, z: &[NodeId]) -> Result<bool, CiError> {
        let key = cache_key(x, y, z);
        if let Some(hit) = self.cache.get(&key) {
            return Ok(*hit);
        }
        let zset: BTreeSet<NodeId> = z.iter().copied().collect();
        let sep = d_separated(self.dag, x, y, &zset)?;
        self.cache.insert(key, sep);
        Ok(sep)
    }
}

/// A conditional-dependency source: either finite-sample G² or the
/// d-separation oracle.
pub enum CiTester<'a> {
    Data(G2Tester<'a>),
    Oracle(OracleTester<'a>),
}

impl<'a> CiTester<'a> {
    pub fn from_data(data: &'a DiscreteDataset, config: G2Config) -> Self {
        CiTester::Data(G2Tester::new(data, config))
    }

    pub fn from_dag(dag: &'a Dag) -> Self {
        CiTester::Oracle(OracleTester::new(dag))
    }

    /// Non-negative dependency scalar: severity when the test rejects at
    /// alpha (0 otherwise) on data; 1/0 from the oracle.
    pub fn dependency(&self, x: NodeId, y: NodeId, z: &[NodeId]) -> Result<f64, CiError> {
        match self {
            CiTester::Data(t) => {
                let r = t.test(x, y, z)?;
                Ok(if r.p_value < t.config.alpha {
                    r.severity
                } else {
                    0.0
                })
            }
            CiTester::Oracle(t) => Ok(if t.separated(x, y, z)? { 0.0 } else { 1.0 }),
        }
    }

    /// The two feature channels for one dependency: (1 − p, severity) on
    /// data so that larger means more dependent in both; the oracle maps its
    /// 1/0 verdict into both channels.
    pub fn channels(&self, x: NodeId, y: NodeId, z: &[NodeId]) -> Result<(f64, f64), CiError> {
        match self {
            CiTester::Data(t) => {
                let r = t.test(x, y, z)?;
                Ok((1.0 - r.p_value, r.severity))
            }
            CiTester::Oracle(t) => {
                let dep = if t.separated(x, y, z)? { 0.0 } else { 1.0 };
                Ok((dep, dep))
            }
        }
    }

    pub fn independent(&self, x: NodeId, y: NodeId, z: &[NodeId]) -> Result<bool, CiError> {
        Ok(self.dependency(x, y, z)? == 0.0)
    }
}

/// Bounds for the sepset search.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SepsetConfig {
    /// Largest candidate set size; `None` enumerates every subset.
    pub max_size: Option<usize>,
    /// Pools up to this size are searched exhaustively even when `max_size`
    /// would cut deeper.
    pub exhaustive_limit: usize,
}

impl Default for SepsetConfig {
    fn default() -> Self {
        Self {
            max_size: Some(4),
            exhaustive_limit: 8,
        }
    }
}

impl SepsetConfig {
    pub fn unbounded() -> Self {
        Self {
            max_size: None,
            exhaustive_limit: usize::MAX,
        }
    }

    fn depth_for(&self, pool_len: usize) -> usize {
        if pool_len <= self.exhaustive_limit {
            pool_len
        } else {
            self.max_size.unwrap_or(pool_len).min(pool_len)
        }
    }
}

/// Which endpoint neighborhoods produced a sepset.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SepsetSide {
    pub from_x: bool,
    pub from_y: bool,
}

/// The within-vicinity separating sets of one unshielded triple: every
/// tested subset S of nbrs(X) or nbrs(Y) with X ⊥ Y | S, deduplicated and
/// ordered by size then lexicographically.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Sepsets {
    pub sets: Vec<BTreeSet<NodeId>>,
    pub provenance: Vec<SepsetSide>,
}

impl Sepsets {
    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    /// Fraction of sepsets containing `t` (empty sets never do); this is
    /// the overlap coefficient of {t} with the ensemble.
    pub fn fraction_containing(&self, t: NodeId) -> f64 {
        if self.sets.is_empty() {
            return 0.0;
        }
        let hits = self.sets.iter().filter(|s| s.contains(&t)).count();
        hits as f64 / self.sets.len() as f64
    }
}

fn enumerate_side(
    tester: &CiTester,
    ut: &UnshieldedTriple,
    pool: &[NodeId],
    depth: usize,
    found: &mut HashMap<Vec<NodeId>, SepsetSide>,
    mark: impl Fn(&mut SepsetSide),
) -> Result<(), CiError> {
    let mut current: Vec<NodeId> = Vec::new();
    // combinations by size, lexicographic within a size
    #[allow(clippy::too_many_arguments)]
    fn rec(
        tester: &CiTester,
        ut: &UnshieldedTriple,
        pool: &[NodeId],
        start: usize,
        left: usize,
        current: &mut Vec<NodeId>,
        found: &mut HashMap<Vec<NodeId>, SepsetSide>,
        mark: &impl Fn(&mut SepsetSide),
    ) -> Result<(), CiError> {
        if left == 0 {
            if let Some(side) = found.get_mut(current.as_slice()) {
                mark(side);
            } else if tester.independent(ut.x, ut.y, current)? {
                let mut side = SepsetSide::default();
                mark(&mut side);
                found.insert(current.clone(), side);
            }
            return Ok(());
        }
        for i in start..pool.len() {
            current.push(pool[i]);
            rec(tester, ut, pool, i + 1, left - 1, current, found, mark)?;
            current.pop();
        }
        Ok(())
    }
    for k in 0..=depth {
        rec(tester, ut, pool, 0, k, &mut current, found, &mark)?;
    }
    Ok(())
}

/// Searches subsets of nbrs(X) and nbrs(Y) (the triple's PC sets plus T)
/// and keeps those that render X and Y independent.
pub fn find_sepsets(
    tester: &CiTester,
    skel: &Skeleton,
    ut: &UnshieldedTriple,
    config: &SepsetConfig,
) -> Result<Sepsets, CiError> {
    // PC_X excludes T by definition; the candidate pool PC_X ∪ {T} is then
    // exactly the skeleton neighborhood of X. Y is never adjacent to X.
    let pool_x: Vec<NodeId> = skel.neighbors(ut.x).iter().copied().collect();
    let pool_y: Vec<NodeId> = skel.neighbors(ut.y).iter().copied().collect();
    let mut found: HashMap<Vec<NodeId>, SepsetSide> = HashMap::new();
    enumerate_side(
        tester,
        ut,
        &pool_x,
        config.depth_for(pool_x.len()),
        &mut found,
        |s| s.from_x = true,
    )?;
    enumerate_side(
        tester,
        ut,
        &pool_y,
        config.depth_for(pool_y.len()),
        &mut found,
        |s| s.from_y = true,
    )?;
    let mut entries: Vec<(Vec<NodeId>, SepsetSide)> = found.into_iter().collect();
    entries.sort_by(|a, b| (a.0.len(), &a.0).cmp(&(b.0.len(), &b.0)));
    Ok(Sepsets {
        sets: entries
            .iter()
            .map(|(s, _)| s.iter().copied().collect())
            .collect(),
        provenance: entries.iter().map(|&(_, side)| side).collect(),
    })
}
