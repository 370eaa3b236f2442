use serde::{Deserialize, Serialize};

use crate::attributes::ChunkPartition;
use crate::dataset::CheckinDataset;
use crate::diffscan::{ZEntry, ZScoreTable};
use crate::error::{Error, Result};

/// Time intervals whose z-score exceeds this are treated as noise.
pub const DEFAULT_NOISE_THRESHOLD: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepKind {
    /// Every check-in whose hour falls in `[start_hour, end_hour)`.
    Interval { start_hour: u32, end_hour: u32 },
    /// One chunk of the attribute partition, by label.
    Chunk,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionStep {
    pub kind: StepKind,
    pub attribute: String,
    pub label: String,
    pub z: f64,
    /// Estimated share of the data removed once this step is applied.
    pub cumulative_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionPlan {
    pub target_fraction: f64,
    pub noise_threshold: f64,
    pub steps: Vec<ReductionStep>,
}

fn parse_interval(label: &str) -> Result<(u32, u32)> {
    let bad = || Error::invalid(format!("time interval label `{label}` is not HH-HH"));
    let (a, b) = label.split_once('-').ok_or_else(bad)?;
    let a: u32 = a.parse().map_err(|_| bad())?;
    let b: u32 = b.parse().map_err(|_| bad())?;
    if a > 23 || b > 24 {
        return Err(bad());
    }
    Ok((a, b % 24))
}

fn in_interval(hour: u32, start: u32, end: u32) -> bool {
    if start < end {
        (start..end).contains(&hour)
    } else {
        hour >= start || hour < end
    }
}

/// Every candidate step in removal order: intervals with z above
/// `noise_threshold` by descending z, then all chunks by descending z.
/// `cumulative_fraction` is the running sum of the z-tables' shares and the
/// target is the total.
pub fn full_reduction_plan(
    time: Option<&ZScoreTable>,
    chunks: &ZScoreTable,
    noise_threshold: f64,
) -> Result<ReductionPlan> {
    let mut steps = Vec::new();
    let mut cum = 0.0;
    let mut push = |kind, attribute: &str, e: &ZEntry| {
        cum += e.fraction;
        steps.push(ReductionStep {
            kind,
            attribute: attribute.to_string(),
            label: e.label.clone(),
            z: e.z,
            cumulative_fraction: cum,
        });
    };
    if let Some(t) = time {
        let mut noisy: Vec<_> = t.entries.iter().filter(|e| e.z > noise_threshold).collect();
        noisy.sort_by(|a, b| b.z.total_cmp(&a.z));
        for e in noisy {
            let (start_hour, end_hour) = parse_interval(&e.label)?;
            push(
                StepKind::Interval {
                    start_hour,
                    end_hour,
                },
                &t.attribute,
                e,
            );
        }
    }
    let mut order: Vec<_> = chunks.entries.iter().collect();
    order.sort_by(|a, b| b.z.total_cmp(&a.z));
    for e in order {
        push(StepKind::Chunk, &chunks.attribute, e);
    }
    Ok(ReductionPlan {
        target_fraction: cum,
        noise_threshold,
        steps,
    })
}

/// Removal order learned on one population, stopping at the step count
/// whose estimated removed share is nearest to `target_fraction`.
///
/// Chunk shares come from the z-tables; overlap between an interval and the
/// chunks is not subtracted, so the estimate can exceed the realized share.
pub fn build_reduction_plan(
    time: Option<&ZScoreTable>,
    chunks: &ZScoreTable,
    target_fraction: f64,
    noise_threshold: f64,
) -> Result<ReductionPlan> {
    if !(0.0..=1.0).contains(&target_fraction) {
        return Err(Error::invalid(format!(
            "target fraction {target_fraction} not in [0, 1]"
        )));
    }
    let order = full_reduction_plan(time, chunks, noise_threshold)?.steps;
    let available = order.last().map_or(0.0, |s| s.cumulative_fraction);
    if target_fraction > available.min(1.0) + 1e-9 {
        return Err(Error::invalid(format!(
            "target fraction {target_fraction} exceeds removable share {available:.4}"
        )));
    }
    let mut steps = Vec::new();
    let mut prev = 0.0;
    for mut step in order {
        // Stop once another step would land further from the target.
        if (step.cumulative_fraction - target_fraction).abs() >= (prev - target_fraction).abs() {
            break;
        }
        prev = step.cumulative_fraction;
        step.cumulative_fraction = prev.min(1.0);
        steps.push(step);
    }
    Ok(ReductionPlan {
        target_fraction,
        noise_threshold,
        steps,
    })
}

/// Cuts a removal order against the data it will be applied to: keeps the
/// prefix of the plan's steps whose realized share of removed points on `train` is
/// nearest to `target_fraction`, and records the realized shares.
///
/// Pass [`full_reduction_plan`] to search every prefix; the estimated shares
/// overstate what is removed when intervals and chunks overlap.
pub fn calibrate_reduction_plan(
    plan: &ReductionPlan,
    train: &CheckinDataset,
    partition: &ChunkPartition,
    target_fraction: f64,
) -> Result<ReductionPlan> {
    if !(0.0..=1.0).contains(&target_fraction) {
        return Err(Error::invalid(format!(
            "target fraction {target_fraction} not in [0, 1]"
        )));
    }
    let mut best = ReductionPlan {
        target_fraction,
        steps: Vec::new(),
        ..plan.clone()
    };
    let mut best_gap = target_fraction;
    let mut prefix = best.clone();
    for step in &plan.steps {
        prefix.steps.push(step.clone());
        let (_, realized) = apply_reduction(train, &prefix, partition)?;
        prefix
            .steps
            .last_mut()
            .expect("just pushed")
            .cumulative_fraction = realized;
        let gap = (realized - target_fraction).abs();
        if gap < best_gap {
            best = prefix.clone();
            best_gap = gap;
        }
        if realized >= target_fraction {
            break;
        }
    }
    Ok(best)
}

/// Applies `plan` to `train`; chunk steps are looked up by label in
/// `partition`, which must have been built on `train`. Returns the reduced
/// data and the realized share of points removed.
pub fn apply_reduction(
    train: &CheckinDataset,
    plan: &ReductionPlan,
    partition: &ChunkPartition,
) -> Result<(CheckinDataset, f64)> {
    if partition.n_records != train.len() {
        return Err(Error::invalid("partition does not belong to this dataset"));
    }
    let mut mask = vec![false; train.len()];
    for step in &plan.steps {
        match step.kind {
            StepKind::Interval {
                start_hour,
                end_hour,
            } => {
                for (i, r) in train.records().iter().enumerate() {
                    if in_interval(r.hour(), start_hour, end_hour) {
                        mask[i] = true;
                    }
                }
            }
            StepKind::Chunk => {
                let c = partition.position(&step.label).ok_or_else(|| {
                    Error::invalid(format!("chunk {} not in partition", step.label))
                })?;
                for &i in &partition.chunks[c].records {
                    mask[i] = true;
                }
            }
        }
    }
    let reduced = train.without_mask(&mask);
    let total = train.n_points();
    let fraction = if total == 0 {
        0.0
    } else {
        1.0 - reduced.n_points() as f64 / total as f64
    };
    Ok((reduced, fraction))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attributes::{Attribute, AttributeConfig, Partitionable};
    use crate::dataset::{generate_city, Checkin, CityConfig};
    use crate::diffscan::zscores_from;
    use crate::metrics::Metric;
    use crate::seed::Seed;

    fn table(attr: &str, labels: &[&str], acc: &[f64], frac: f64) -> ZScoreTable {
        let labels: Vec<String> = labels.iter().map(|s| s.to_string()).collect();
        zscores_from(
            attr,
            Metric::Precision,
            &labels,
            acc,
            &vec![frac; acc.len()],
        )
        .unwrap()
    }

    fn hardship() -> ZScoreTable {
        let labels = ["1", "2", "3", "4", "5", "6", "7", "8", "9", "10"];
        table(
            "hardship-density",
            &labels,
            &[0.1, 0.2, 0.3, 0.5, 0.6, 0.55, 0.7, 0.8, 0.9, 0.0],
            0.1,
        )
    }

    #[test]
    fn truncated_plan_is_prefix_of_full_order() {
        let full = full_reduction_plan(None, &hardship(), 1.0).unwrap();
        assert_eq!(full.steps.len(), 10);
        assert!((full.target_fraction - 1.0).abs() < 1e-12);
        for target in [0.1, 0.25, 0.42, 0.9] {
            let plan = build_reduction_plan(None, &hardship(), target, 1.0).unwrap();
            assert_eq!(plan.steps[..], full.steps[..plan.steps.len()]);
        }
    }

    #[test]
    fn zero_target_is_empty() {
        let plan = build_reduction_plan(None, &hardship(), 0.0, 1.0).unwrap();
        assert!(plan.steps.is_empty());
    }

    #[test]
    fn noise_first_then_descending_z() {
        let time = table(
            "time",
            &["00-03", "03-06", "06-12", "12-24"],
            &[0.1, 0.9, 0.1, 0.1],
            0.25,
        );
        let plan = build_reduction_plan(Some(&time), &hardship(), 0.42, 1.0).unwrap();
        assert_eq!(
            plan.steps[0].kind,
            StepKind::Interval {
                start_hour: 3,
                end_hour: 6
            }
        );
        let z: Vec<f64> = plan.steps[1..].iter().map(|s| s.z).collect();
        assert!(z.windows(2).all(|w| w[0] >= w[1]));
        let labels: Vec<&str> = plan.steps[1..].iter().map(|s| s.label.as_str()).collect();
        assert_eq!(labels, vec!["9", "8"]);
        assert!(build_reduction_plan(None, &hardship(), 1.5, 1.0).is_err());
    }

    #[test]
    fn wrapping_interval() {
        assert!(in_interval(23, 22, 2));
        assert!(in_interval(1, 22, 2));
        assert!(!in_interval(2, 22, 2));
        assert_eq!(parse_interval("22-02").unwrap(), (22, 2));
        assert_eq!(parse_interval("21-24").unwrap(), (21, 0));
        assert!(in_interval(23, 21, 0));
        assert!(parse_interval("x").is_err());
    }

    #[test]
    fn apply_is_set_arithmetic_and_idempotent() {
        let cfg = CityConfig {
            n_users: 15,
            n_locations: 300,
            ..CityConfig::default()
        };
        let ds = generate_city(&cfg, Seed(2)).unwrap();
        let part = Checkin::partition(
            &ds,
            &AttributeConfig::new(Attribute::HardshipDensity, Seed(1)),
        )
        .unwrap();
        let empty = ReductionPlan {
            target_fraction: 0.0,
            noise_threshold: 1.0,
            steps: vec![],
        };
        let (same, f) = apply_reduction(&ds, &empty, &part).unwrap();
        assert_eq!(same.records(), ds.records());
        assert_eq!(f, 0.0);

        let plan = build_reduction_plan(None, &hardship(), 0.3, 1.0).unwrap();
        let (reduced, _) = apply_reduction(&ds, &plan, &part).unwrap();
        let removed: usize = plan
            .steps
            .iter()
            .map(|s| part.chunks[part.position(&s.label).unwrap()].records.len())
            .sum();
        assert_eq!(reduced.len(), ds.len() - removed);

        let calibrated = calibrate_reduction_plan(&plan, &ds, &part, 0.2).unwrap();
        let (_, f) = apply_reduction(&ds, &calibrated, &part).unwrap();
        assert_eq!(f, calibrated.steps.last().unwrap().cumulative_fraction);
        assert!((f - 0.2).abs() < 0.06, "{f}");

        let mut twice = plan.clone();
        twice.steps.extend(plan.steps.clone());
        let (again, _) = apply_reduction(&ds, &twice, &part).unwrap();
        assert_eq!(again.records(), reduced.records());
    }
}
