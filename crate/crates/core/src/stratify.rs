//! Task-type stratification and heterogeneity tests over per-dataset lift.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::data::TaskType;
use crate::error::{Error, Result};
use crate::metrics::AuditMetrics;
use crate::num::Scalar;
use crate::special::{f_sf, t_two_sided};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskTypeSummary<T> {
    pub task_type: TaskType,
    pub n_datasets: usize,
    pub mean_lift: T,
    pub median_lift: T,
    /// Percentage of datasets with lift ≤ 0.
    pub pct_at_or_below_baseline: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestKind {
    Anova,
    WelchT,
    /// Equal-variance two-sample t.
    PooledT,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatTestResult<T> {
    pub test_kind: TestKind,
    pub statistic: T,
    pub p_value: T,
    /// One entry for t tests, `(between, within)` for ANOVA.
    pub degrees_of_freedom: Vec<T>,
}

pub fn mean<T: Scalar>(values: &[T]) -> T {
    values.iter().fold(T::zero(), |acc, &v| acc + v) / T::of_usize(values.len())
}

/// Median; even-sized inputs average the two central values.
pub fn median<T: Scalar>(values: &[T]) -> T {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("lift values are finite"));
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / T::of(2.0)
    }
}

// Checked on the values themselves: the mean of a constant group can round
// away from the value and leave a tiny nonzero sum of squares.
fn is_constant<T: Scalar>(values: &[T]) -> bool {
    values.iter().all(|&v| v == values[0])
}

fn sample_variance<T: Scalar>(values: &[T]) -> T {
    let m = mean(values);
    let ss = values.iter().fold(T::zero(), |acc, &v| acc + (v - m) * (v - m));
    ss / T::of_usize(values.len() - 1)
}

/// One summary per task type present, ordered by task type.
pub fn summarize_by_task<T: Scalar>(
    metrics: &[AuditMetrics<T>],
    tasks: &HashMap<String, TaskType>,
) -> Result<Vec<TaskTypeSummary<T>>> {
    let groups = lifts_by_task(metrics, tasks)?;
    Ok(groups
        .into_iter()
        .map(|(task_type, lifts)| {
            let at_or_below = lifts.iter().filter(|&&l| l <= T::zero()).count();
            TaskTypeSummary {
                task_type,
                n_datasets: lifts.len(),
                mean_lift: mean(&lifts),
                median_lift: median(&lifts),
                pct_at_or_below_baseline: T::of(100.0) * T::of_usize(at_or_below) / T::of_usize(lifts.len()),
            }
        })
        .collect())
}

/// Lift values grouped by task type.
pub fn lifts_by_task<T: Scalar>(
    metrics: &[AuditMetrics<T>],
    tasks: &HashMap<String, TaskType>,
) -> Result<BTreeMap<TaskType, Vec<T>>> {
    let mut groups: BTreeMap<TaskType, Vec<T>> = BTreeMap::new();
    for m in metrics {
        let t = tasks.get(&m.dataset_id).ok_or_else(|| Error::UnknownTaskType(m.dataset_id.clone()))?;
        groups.entry(*t).or_default().push(m.lift);
    }
    Ok(groups)
}

/// One-way ANOVA, `F = (SSB/df1) / (SSW/df2)` with the upper-tail p-value.
pub fn one_way_anova<T: Scalar, G: AsRef<[T]>>(groups: &[G]) -> Result<StatTestResult<T>> {
    if groups.len() < 2 {
        return Err(Error::InsufficientData(format!("ANOVA needs at least 2 groups, got {}", groups.len())));
    }
    if let Some(g) = groups.iter().find(|g| g.as_ref().len() < 2) {
        return Err(Error::InsufficientData(format!(
            "ANOVA needs at least 2 values per group, got {}",
            g.as_ref().len()
        )));
    }
    if groups.iter().all(|g| is_constant(g.as_ref())) {
        return Err(Error::ZeroWithinGroupVariance);
    }
    let all: Vec<T> = groups.iter().flat_map(|g| g.as_ref().iter().copied()).collect();
    let grand = mean(&all);
    let mut ssb = T::zero();
    let mut ssw = T::zero();
    for g in groups {
        let g = g.as_ref();
        let m = mean(g);
        ssb = ssb + T::of_usize(g.len()) * (m - grand) * (m - grand);
        ssw = g.iter().fold(ssw, |acc, &v| acc + (v - m) * (v - m));
    }
    if ssw == T::zero() {
        return Err(Error::ZeroWithinGroupVariance);
    }
    let df1 = T::of_usize(groups.len() - 1);
    let df2 = T::of_usize(all.len() - groups.len());
    let f = (ssb / df1) / (ssw / df2);
    Ok(StatTestResult {
        test_kind: TestKind::Anova,
        statistic: f,
        p_value: clamp_p(f_sf(f, df1, df2)),
        degrees_of_freedom: vec![df1, df2],
    })
}

fn two_sample_checks<T: Scalar>(a: &[T], b: &[T]) -> Result<(T, T)> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::InsufficientData("t test needs at least 2 values per group".into()));
    }
    if is_constant(a) && is_constant(b) {
        return Err(Error::DegenerateVariance);
    }
    Ok((sample_variance(a), sample_variance(b)))
}

/// Welch's unequal-variance t with Welch–Satterthwaite degrees of freedom
/// and a two-sided p-value.
pub fn pairwise_t<T: Scalar>(group_a: &[T], group_b: &[T]) -> Result<StatTestResult<T>> {
    let (va, vb) = two_sample_checks(group_a, group_b)?;
    let one = T::one();
    let (na, nb) = (T::of_usize(group_a.len()), T::of_usize(group_b.len()));
    let (sa, sb) = (va / na, vb / nb);
    let t = (mean(group_a) - mean(group_b)) / (sa + sb).sqrt();
    let df = (sa + sb) * (sa + sb) / (sa * sa / (na - one) + sb * sb / (nb - one));
    Ok(StatTestResult {
        test_kind: TestKind::WelchT,
        statistic: t,
        p_value: clamp_p(t_two_sided(t, df)),
        degrees_of_freedom: vec![df],
    })
}

/// Student's two-sample t with pooled variance.
pub fn pooled_t<T: Scalar>(group_a: &[T], group_b: &[T]) -> Result<StatTestResult<T>> {
    let (va, vb) = two_sample_checks(group_a, group_b)?;
    let one = T::one();
    let (na, nb) = (T::of_usize(group_a.len()), T::of_usize(group_b.len()));
    let df = na + nb - T::of(2.0);
    let pooled = ((na - one) * va + (nb - one) * vb) / df;
    let t = (mean(group_a) - mean(group_b)) / (pooled * (one / na + one / nb)).sqrt();
    Ok(StatTestResult {
        test_kind: TestKind::PooledT,
        statistic: t,
        p_value: clamp_p(t_two_sided(t, df)),
        degrees_of_freedom: vec![df],
    })
}

fn clamp_p<T: Scalar>(p: T) -> T {
    p.max(T::zero()).min(T::one())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiderThresholds<T> {
    pub min_majority: T,
    pub max_lift: T,
}

impl<T: Scalar> Default for RiderThresholds<T> {
    fn default() -> Self {
        RiderThresholds { min_majority: T::of(0.85), max_lift: T::of(0.01) }
    }
}

/// Datasets whose majority baseline is at least `min_majority` while lift is
/// at most `max_lift`, highest baseline first.
pub fn flag_imbalance_riders<T: Scalar>(
    metrics: &[AuditMetrics<T>],
    thresholds: RiderThresholds<T>,
) -> Vec<AuditMetrics<T>> {
    let mut out: Vec<AuditMetrics<T>> = metrics
        .iter()
        .filter(|m| m.majority_baseline >= thresholds.min_majority && m.lift <= thresholds.max_lift)
        .cloned()
        .collect();
    out.sort_by(|a, b| {
        b.majority_baseline
            .partial_cmp(&a.majority_baseline)
            .expect("finite")
            .then_with(|| a.dataset_id.cmp(&b.dataset_id))
            .then_with(|| a.model_id.cmp(&b.model_id))
    });
    out
}

/// Datasets with κ < 0, most negative first.
pub fn flag_negative_kappa<T: Scalar>(metrics: &[AuditMetrics<T>]) -> Vec<AuditMetrics<T>> {
    let mut out: Vec<AuditMetrics<T>> = metrics.iter().filter(|m| m.kappa < T::zero()).cloned().collect();
    out.sort_by(|a, b| {
        a.kappa
            .partial_cmp(&b.kappa)
            .expect("finite")
            .then_with(|| a.dataset_id.cmp(&b.dataset_id))
            .then_with(|| a.model_id.cmp(&b.model_id))
    });
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapRow<T> {
    pub group: String,
    pub n: usize,
    pub mean_lift_a: T,
    pub mean_lift_b: T,
    /// `mean_lift_a − mean_lift_b`
    pub gap: T,
}

/// Label of the pooled row appended by [`partition_gap`].
pub const ALL_GROUPS: &str = "All";

/// Mean lift of two models per dataset group, plus a pooled row.
pub fn partition_gap<T: Scalar>(
    model_a: &[AuditMetrics<T>],
    model_b: &[AuditMetrics<T>],
    partition: &HashMap<String, String>,
) -> Result<Vec<GapRow<T>>> {
    let ids_a: HashSet<&str> = model_a.iter().map(|m| m.dataset_id.as_str()).collect();
    let ids_b: HashSet<&str> = model_b.iter().map(|m| m.dataset_id.as_str()).collect();
    if ids_a != ids_b || ids_a.len() != model_a.len() || ids_b.len() != model_b.len() {
        let mut only: Vec<&str> = ids_a.symmetric_difference(&ids_b).copied().collect();
        only.sort_unstable();
        return Err(Error::CoverageMismatch(format!(
            "models must cover the same datasets exactly once; differing: {only:?}"
        )));
    }
    if ids_a.is_empty() {
        return Err(Error::Empty("partition gap over no datasets"));
    }
    let b_by_id: HashMap<&str, T> = model_b.iter().map(|m| (m.dataset_id.as_str(), m.lift)).collect();
    let mut groups: BTreeMap<&str, (Vec<T>, Vec<T>)> = BTreeMap::new();
    for m in model_a {
        let g = partition
            .get(&m.dataset_id)
            .ok_or_else(|| Error::CoverageMismatch(format!("dataset `{}` has no partition group", m.dataset_id)))?;
        let entry = groups.entry(g.as_str()).or_default();
        entry.0.push(m.lift);
        entry.1.push(b_by_id[m.dataset_id.as_str()]);
    }
    let row = |group: &str, a: &[T], b: &[T]| {
        let (ma, mb) = (mean(a), mean(b));
        GapRow { group: group.to_string(), n: a.len(), mean_lift_a: ma, mean_lift_b: mb, gap: ma - mb }
    };
    let mut rows: Vec<GapRow<T>> = groups.iter().map(|(g, (a, b))| row(g, a, b)).collect();
    let all_a: Vec<T> = groups.values().flat_map(|(a, _)| a.iter().copied()).collect();
    let all_b: Vec<T> = groups.values().flat_map(|(_, b)| b.iter().copied()).collect();
    rows.push(row(ALL_GROUPS, &all_a, &all_b));
    Ok(rows)
}
