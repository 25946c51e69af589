//! Turns one unshielded triple plus skeleton plus CI tester into a
//! fixed-length 755-float feature vector.
//!
//! Layout, in order:
//!   - 5 scaling scalars: |PC_X|, |PC_Y|, |PC_T|, |S|, mean |S_i|
//!   - 7 overlap coefficients: the six unordered pairs over
//!     {PC_X, PC_Y, PC_T, S} plus olp({T}, S)
//!   - 2 unitary dependency channels of X ~ Y | {T}
//!   - 19 pair blocks of 39 floats each: every (bivariable, conditional)
//!     combination except the unitary one, embedded as
//!     [set size, per-channel mean/std/max/min, per-channel 15
//!     random-feature means]
//!
//! Bivariables iterate X~Y, X~PC_Y, PC_X~Y, PC_X~PC_Y; conditionals iterate
//! {∅}, {T}, PC_T-as-singletons, S, S∨T. Every dependency carries two
//! channels, (1 − p, severity) on data and the 1/0 oracle verdict in both.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

use crate::citest::{find_sepsets, CiError, CiTester, SepsetConfig, Sepsets};
use crate::graph::{NodeId, Skeleton, UnshieldedTriple};

/// Random-feature count per channel.
pub const EMBEDDING_DIM: usize = 15;
/// Floats per non-unitary (bivariable, conditional) pair.
pub const PAIR_BLOCK: usize = 1 + 2 * 4 + 2 * EMBEDDING_DIM;
/// Non-unitary pairs: 4 bivariables × 5 conditionals − 1.
pub const PAIR_COUNT: usize = 19;
/// Total feature dimensionality.
pub const FEATURE_DIM: usize = 5 + 7 + 2 + PAIR_COUNT * PAIR_BLOCK;
/// Identifies the feature layout; persisted with models and matrices.
pub const SCHEMA_VERSION: &str = "ut-features-755-v1";

/// An unshielded triple with the neighborhood sets its features are
/// computed from. PC sets exclude the triple's other members.
#[derive(Debug, Clone, PartialEq)]
pub struct VicinityContext {
    pub ut: UnshieldedTriple,
    pub pc_x: BTreeSet<NodeId>,
    pub pc_y: BTreeSet<NodeId>,
    pub pc_t: BTreeSet<NodeId>,
    pub vicinity: BTreeSet<NodeId>,
    pub sepsets: Sepsets,
}

/// Computes the PC sets and within-vicinity sepsets of a triple.
pub fn build_vicinity(
    skel: &Skeleton,
    ut: &UnshieldedTriple,
    tester: &CiTester,
    config: &SepsetConfig,
) -> Result<VicinityContext, CiError> {
    let mut pc_x: BTreeSet<NodeId> = skel.neighbors(ut.x).iter().copied().collect();
    pc_x.remove(&ut.t);
    let mut pc_y: BTreeSet<NodeId> = skel.neighbors(ut.y).iter().copied().collect();
    pc_y.remove(&ut.t);
    let mut pc_t: BTreeSet<NodeId> = skel.neighbors(ut.t).iter().copied().collect();
    pc_t.remove(&ut.x);
    pc_t.remove(&ut.y);
    let mut vicinity: BTreeSet<NodeId> = [ut.x, ut.t, ut.y].into_iter().collect();
    vicinity.extend(pc_x.iter().copied());
    vicinity.extend(pc_y.iter().copied());
    vicinity.extend(pc_t.iter().copied());
    let sepsets = find_sepsets(tester, skel, ut, config)?;
    Ok(VicinityContext {
        ut: *ut,
        pc_x,
        pc_y,
        pc_t,
        vicinity,
        sepsets,
    })
}

/// Overlap coefficient |A∩B| / min(|A|,|B|), 0 when either set is empty.
pub fn overlap(a: &BTreeSet<NodeId>, b: &BTreeSet<NodeId>) -> f64 {
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let inter = a.intersection(b).count() as f64;
    inter / a.len().min(b.len()) as f64
}

/// Ensemble extension: the mean of per-element overlap coefficients, 0 for
/// an empty ensemble.
pub fn overlap_ensemble(a: &BTreeSet<NodeId>, sets: &[BTreeSet<NodeId>]) -> f64 {
    if sets.is_empty() {
        return 0.0;
    }
    sets.iter().map(|s| overlap(a, s)).sum::<f64>() / sets.len() as f64
}

/// One dependency sample per valid (a, b, z) combination, as
/// (channel 1, channel 2) pairs. Combinations with a = b or an endpoint
/// inside the conditioning set are skipped.
pub fn extended_dependency(
    tester: &CiTester,
    a_set: &BTreeSet<NodeId>,
    b_set: &BTreeSet<NodeId>,
    ensemble: &[BTreeSet<NodeId>],
) -> Result<Vec<(f64, f64)>, CiError> {
    let mut out = Vec::new();
    for &a in a_set {
        for &b in b_set {
            if a == b {
                continue;
            }
            for z in ensemble {
                if z.contains(&a) || z.contains(&b) {
                    continue;
                }
                let zs: Vec<NodeId> = z.iter().copied().collect();
                out.push(tester.channels(a, b, &zs)?);
            }
        }
    }
    Ok(out)
}

/// The five conditional ensembles paired with each bivariable:
/// {∅}, {{T}}, PC_T as singletons, S, and S∨T (element-wise union with T).
pub fn conditional_domain(ctx: &VicinityContext) -> [Vec<BTreeSet<NodeId>>; 5] {
    let empty = vec![BTreeSet::new()];
    let t_only = vec![BTreeSet::from([ctx.ut.t])];
    let pc_t: Vec<BTreeSet<NodeId>> = ctx.pc_t.iter().map(|&p| BTreeSet::from([p])).collect();
    let seps: Vec<BTreeSet<NodeId>> = ctx.sepsets.sets.clone();
    let mut seps_t_set: BTreeSet<BTreeSet<NodeId>> = BTreeSet::new();
    for s in &ctx.sepsets.sets {
        let mut with_t = s.clone();
        with_t.insert(ctx.ut.t);
        seps_t_set.insert(with_t);
    }
    let seps_t: Vec<BTreeSet<NodeId>> = seps_t_set.into_iter().collect();
    [empty, t_only, pc_t, seps, seps_t]
}

/// The 12 entanglement scalars: 5 scalings then 7 overlaps.
pub fn entanglement_features(ctx: &VicinityContext) -> [f64; 12] {
    let s = &ctx.sepsets.sets;
    let mean_sep_size = if s.is_empty() {
        0.0
    } else {
        s.iter().map(|x| x.len() as f64).sum::<f64>() / s.len() as f64
    };
    let t_set = BTreeSet::from([ctx.ut.t]);
    [
        ctx.pc_x.len() as f64,
        ctx.pc_y.len() as f64,
        ctx.pc_t.len() as f64,
        s.len() as f64,
        mean_sep_size,
        overlap(&ctx.pc_x, &ctx.pc_y),
        overlap(&ctx.pc_x, &ctx.pc_t),
        overlap_ensemble(&ctx.pc_x, s),
        overlap(&ctx.pc_y, &ctx.pc_t),
        overlap_ensemble(&ctx.pc_y, s),
        overlap_ensemble(&ctx.pc_t, s),
        overlap_ensemble(&t_set, s),
    ]
}

/// Fifteen random frequency/phase pairs shared by every embedded pair and
/// both channels; fixed per model lifetime and persisted with it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingBasis {
    pub seed: u64,
    pub frequencies: Vec<f64>,
    pub phases: Vec<f64>,
}

impl EmbeddingBasis {
    /// Standard-normal frequencies and uniform [0, 2π) phases from a seed.
    pub fn from_seed(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let frequencies = (0..EMBEDDING_DIM)
            .map(|_| rng.sample(StandardNormal))
            .collect();
        let phases = (0..EMBEDDING_DIM)
            .map(|_| rng.random_range(0.0..std::f64::consts::TAU))
            .collect();
        Self {
            seed,
            frequencies,
            phases,
        }
    }

    pub fn validate(&self) -> bool {
        self.frequencies.len() == EMBEDDING_DIM && self.phases.len() == EMBEDDING_DIM
    }
}

fn channel_stats(values: impl Iterator<Item = f64> + Clone, count: usize) -> [f64; 4] {
    let mean = values.clone().sum::<f64>() / count as f64;
    let var = values.clone().map(|v| (v - mean).powi(2)).sum::<f64>() / count as f64;
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    let min = values.fold(f64::INFINITY, f64::min);
    [mean, var.max(0.0).sqrt(), max, min]
}

/// Embeds one dependency sample multiset into `PAIR_BLOCK` floats:
/// [size, ch1 mean/std/max/min, ch2 mean/std/max/min, ch1 cos-features,
/// ch2 cos-features]. An empty input embeds to all zeros.
pub fn embed(values: &[(f64, f64)], basis: &EmbeddingBasis) -> Vec<f64> {
    let mut out = vec![0.0; PAIR_BLOCK];
    if values.is_empty() {
        return out;
    }
    let count = values.len();
    out[0] = count as f64;
    out[1..5].copy_from_slice(&channel_stats(values.iter().map(|v| v.0), count));
    out[5..9].copy_from_slice(&channel_stats(values.iter().map(|v| v.1), count));
    for j in 0..EMBEDDING_DIM {
        let (w, b) = (basis.frequencies[j], basis.phases[j]);
        let mut acc1 = 0.0;
        let mut acc2 = 0.0;
        for &(v1, v2) in values {
            acc1 += (w * v1 + b).cos();
            acc2 += (w * v2 + b).cos();
        }
        out[9 + j] = acc1 / count as f64;
        out[9 + EMBEDDING_DIM + j] = acc2 / count as f64;
    }
    out
}

/// A UT feature vector; length is always `FEATURE_DIM`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

const BIVARIABLE_TAGS: [&str; 4] = ["x_y", "x_pcy", "pcx_y", "pcx_pcy"];
const CONDITIONAL_TAGS: [&str; 5] = ["none", "t", "pct", "seps", "sepst"];

/// Column names for the persisted feature matrix, aligned with the vector.
pub fn feature_names() -> Vec<String> {
    let mut names = vec![
        "scale_pcx_size".into(),
        "scale_pcy_size".into(),
        "scale_pct_size".into(),
        "scale_seps_count".into(),
        "scale_seps_mean_size".into(),
        "olp_pcx_pcy".into(),
        "olp_pcx_pct".into(),
        "olp_pcx_seps".into(),
        "olp_pcy_pct".into(),
        "olp_pcy_seps".into(),
        "olp_pct_seps".into(),
        "olp_t_seps".into(),
        "dep_x_y_t_c1".into(),
        "dep_x_y_t_c2".into(),
    ];
    for biv in BIVARIABLE_TAGS {
        for cond in CONDITIONAL_TAGS {
            if biv == "x_y" && cond == "t" {
                continue;
            }
            let prefix = format!("pair_{biv}_{cond}");
            names.push(format!("{prefix}_size"));
            for ch in ["c1", "c2"] {
                for stat in ["mean", "std", "max", "min"] {
                    names.push(format!("{prefix}_{ch}_{stat}"));
                }
            }
            for ch in ["c1", "c2"] {
                for j in 0..EMBEDDING_DIM {
                    names.push(format!("{prefix}_{ch}_rff{j:02}"));
                }
            }
        }
    }
    debug_assert_eq!(names.len(), FEATURE_DIM);
    names
}

/// Featurizes a prebuilt vicinity context.
pub fn featurize_with_context(
    ctx: &VicinityContext,
    tester: &CiTester,
    basis: &EmbeddingBasis,
) -> Result<FeatureVector, CiError> {
    let mut values = Vec::with_capacity(FEATURE_DIM);
    values.extend_from_slice(&entanglement_features(ctx));

    let x_set = BTreeSet::from([ctx.ut.x]);
    let y_set = BTreeSet::from([ctx.ut.y]);
    let (c1, c2) = tester.channels(ctx.ut.x, ctx.ut.y, &[ctx.ut.t])?;
    values.push(c1);
    values.push(c2);

    let bivariables: [(&BTreeSet<NodeId>, &BTreeSet<NodeId>); 4] = [
        (&x_set, &y_set),
        (&x_set, &ctx.pc_y),
        (&ctx.pc_x, &y_set),
        (&ctx.pc_x, &ctx.pc_y),
    ];
    let conditionals = conditional_domain(ctx);
    for (bi, (a_set, b_set)) in bivariables.iter().enumerate() {
        for (ci, ensemble) in conditionals.iter().enumerate() {
            if bi == 0 && ci == 1 {
                continue; // the unitary pair, stored above as two scalars
            }
            let samples = extended_dependency(tester, a_set, b_set, ensemble)?;
            values.extend_from_slice(&embed(&samples, basis));
        }
    }
    debug_assert_eq!(values.len(), FEATURE_DIM);
    debug_assert!(values.iter().all(|v| v.is_finite()));
    Ok(FeatureVector { values })
}

/// Builds the vicinity and featurizes in one step.
pub fn featurize_ut(
    skel: &Skeleton,
    ut: &UnshieldedTriple,
    tester: &CiTester,
    basis: &EmbeddingBasis,
    config: &SepsetConfig,
) -> Result<FeatureVector, CiError> {
    let ctx = build_vicinity(skel, ut, tester, config)?;
    featurize_with_context(&ctx, tester, basis)
}
