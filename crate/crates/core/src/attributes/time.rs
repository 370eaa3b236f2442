//! Hour-of-day intervals holding roughly equal shares of the check-ins.

use serde::{Deserialize, Serialize};

use super::{Chunk, ChunkPartition};
use crate::dataset::CheckinDataset;
use crate::error::{Error, Result};

const EPS: f64 = 1e-12;

/// Half-open span of hours `[start_hour, end_hour)` that may wrap midnight.
/// `end_hour` is in `1..=24`, or below `start_hour` for a wrapping interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeInterval {
    pub start_hour: u32,
    pub end_hour: u32,
    /// Share of all check-ins falling inside.
    pub fraction: f64,
    /// Fraction outside the requested band.
    pub out_of_band: bool,
}

impl TimeInterval {
    pub fn len_hours(&self) -> u32 {
        if self.end_hour > self.start_hour {
            self.end_hour - self.start_hour
        } else {
            self.end_hour + 24 - self.start_hour
        }
    }

    pub fn contains(&self, hour: u32) -> bool {
        (hour + 24 - self.start_hour) % 24 < self.len_hours()
    }

    pub fn label(&self) -> String {
        format!("{:02}-{:02}", self.start_hour, self.end_hour)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeIntervals {
    pub intervals: Vec<TimeInterval>,
    /// One chunk per interval, over check-in records.
    pub partition: ChunkPartition,
    /// Whether the plain greedy pass produced the tiling.
    pub greedy: bool,
}

/// (offset, length) pieces of the 24 hours following `anchor`.
type Tiling = Vec<(usize, usize)>;

fn greedy_tiling(mass: &[f64; 24], min_frac: f64) -> Tiling {
    let mut out: Tiling = Vec::new();
    let (mut start, mut acc) = (0, 0.0);
    for (off, &m) in mass.iter().enumerate() {
        acc += m;
        if acc >= min_frac - EPS {
            out.push((start, off + 1 - start));
            start = off + 1;
            acc = 0.0;
        }
    }
    if start < 24 {
        match out.last_mut() {
            Some(last) => last.1 += 24 - start,
            None => out.push((0, 24)),
        }
    }
    out
}

/// A tiling with every piece inside `[min_frac, max_frac]`, taking the
/// earliest admissible cut at each step, if one exists.
fn banded_tiling(mass: &[f64; 24], min_frac: f64, max_frac: f64) -> Option<Tiling> {
    let span = |i: usize, j: usize| mass[i..j].iter().sum::<f64>();
    let ok = |f: f64| f >= min_frac - EPS && f <= max_frac + EPS;
    let mut finish = [false; 25];
    finish[24] = true;
    for i in (0..24).rev() {
        finish[i] = (i + 1..=24).any(|j| finish[j] && ok(span(i, j)));
    }
    if !finish[0] {
        return None;
    }
    let mut out = Vec::new();
    let mut i = 0;
    while i < 24 {
        let j = (i + 1..=24).find(|&j| finish[j] && ok(span(i, j)))?;
        out.push((i, j - i));
        i = j;
    }
    Some(out)
}

/// Tiles the day into hour intervals of roughly `min_frac`..`max_frac` of
/// the check-ins each.
///
/// A greedy pass from midnight closes an interval as soon as it reaches
/// `min_frac`; trailing hours that never reach it join the last interval.
/// When that leaves some interval outside the band, every anchor hour is
/// searched for a tiling whose intervals all fall inside the band; if none
/// exists the greedy tiling is kept and its offending intervals are flagged.
pub fn build_time_intervals(
    ds: &CheckinDataset,
    min_frac: f64,
    max_frac: f64,
) -> Result<TimeIntervals> {
    if ds.is_empty() {
        return Err(Error::Empty("check-in dataset"));
    }
    if !(min_frac > 0.0 && min_frac < max_frac) {
        return Err(Error::invalid(format!(
            "interval bounds ({min_frac}, {max_frac}) need 0 < min < max"
        )));
    }
    let mut counts = [0usize; 24];
    for c in ds.records() {
        counts[c.hour() as usize] += 1;
    }
    let total = ds.len() as f64;
    let mass_from = |anchor: usize| {
        let mut m = [0.0; 24];
        for (off, slot) in m.iter_mut().enumerate() {
            *slot = counts[(anchor + off) % 24] as f64 / total;
        }
        m
    };

    let in_band = |t: &Tiling, m: &[f64; 24]| {
        t.iter().all(|&(s, l)| {
            let f: f64 = m[s..s + l].iter().sum();
            f >= min_frac - EPS && f <= max_frac + EPS
        })
    };
    let base = mass_from(0);
    let mut tiling = greedy_tiling(&base, min_frac);
    let mut anchor = 0;
    let mut greedy = true;
    if !in_band(&tiling, &base) {
        if let Some((a, t)) =
            (0..24).find_map(|a| banded_tiling(&mass_from(a), min_frac, max_frac).map(|t| (a, t)))
        {
            anchor = a;
            tiling = t;
            greedy = false;
        }
    }

    let intervals: Vec<TimeInterval> = tiling
        .iter()
        .map(|&(off, len)| {
            let start = ((anchor + off) % 24) as u32;
            let end = ((anchor + off + len - 1) % 24 + 1) as u32;
            let mut iv = TimeInterval {
                start_hour: start,
                end_hour: end,
                fraction: 0.0,
                out_of_band: false,
            };
            let n: usize = (0..24u32)
                .filter(|&h| iv.contains(h))
                .map(|h| counts[h as usize])
                .sum();
            iv.fraction = n as f64 / total;
            iv.out_of_band = iv.fraction < min_frac - EPS || iv.fraction > max_frac + EPS;
            iv
        })
        .collect();
    for iv in intervals.iter().filter(|iv| iv.out_of_band) {
        log::warn!(
            "time interval {} holds {:.3} of check-ins",
            iv.label(),
            iv.fraction
        );
    }

    let chunks = intervals
        .iter()
        .map(|iv| Chunk {
            label: iv.label(),
            records: ds
                .records()
                .iter()
                .enumerate()
                .filter(|(_, c)| iv.contains(c.hour()))
                .map(|(i, _)| i)
                .collect(),
        })
        .collect();
    Ok(TimeIntervals {
        intervals,
        partition: ChunkPartition {
            attribute: "time".into(),
            chunks,
            n_records: ds.len(),
        },
        greedy,
    })
}
