//! Segmentation scores for binary grids and navigation run statistics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::BinaryGrid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn swapped(&self) -> Self {
        Self {
            tp: self.tp,
            fp: self.fn_,
            fn_: self.fp,
            tn: self.tn,
        }
    }
}

impl std::ops::Add for ConfusionCounts {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self {
            tp: self.tp + o.tp,
            fp: self.fp + o.fp,
            fn_: self.fn_ + o.fn_,
            tn: self.tn + o.tn,
        }
    }
}

impl std::iter::Sum for ConfusionCounts {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::default(), |a, b| a + b)
    }
}

pub fn confusion(pred: &BinaryGrid, gt: &BinaryGrid) -> Result<ConfusionCounts> {
    confusion_where(pred, gt, None)
}

/// Counts restricted to cells where `region` is set, or all cells.
pub fn confusion_where(pred: &BinaryGrid, gt: &BinaryGrid, region: Option<&BinaryGrid>) -> Result<ConfusionCounts> {
    if pred.size() != gt.size() {
        return Err(Error::DimensionMismatch(pred.size(), gt.size()));
    }
    if let Some(r) = region {
        if r.size() != gt.size() {
            return Err(Error::DimensionMismatch(r.size(), gt.size()));
        }
    }
    let mut c = ConfusionCounts::default();
    for (i, (&p, &g)) in pred.as_slice().iter().zip(gt.as_slice()).enumerate() {
        if region.is_some_and(|r| r.as_slice()[i] == 0) {
            continue;
        }
        match (p != 0, g != 0) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            (false, false) => c.tn += 1,
        }
    }
    Ok(c)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub miou: f64,
    pub pa: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub mae: f64,
}

fn ratio(num: u64, den: u64, empty: f64) -> f64 {
    if den == 0 {
        empty
    } else {
        num as f64 / den as f64
    }
}

/// Class IoUs are 1 for an empty class predicted empty; precision and recall
/// follow the same convention, and F1 is 0 when both are 0.
pub fn scores(c: &ConfusionCounts) -> Result<Scores> {
    let total = c.total();
    if total == 0 {
        return Err(Error::InvalidConfig("no cells to score".into()));
    }
    let iou_fg = ratio(c.tp, c.tp + c.fp + c.fn_, 1.0);
    let iou_bg = ratio(c.tn, c.tn + c.fp + c.fn_, 1.0);
    let precision = ratio(c.tp, c.tp + c.fp, 1.0);
    let recall = ratio(c.tp, c.tp + c.fn_, 1.0);
    Ok(Scores {
        miou: 0.5 * (iou_fg + iou_bg),
        pa: (c.tp + c.tn) as f64 / total as f64,
        precision,
        recall,
        f1: f1(precision, recall),
        mae: (c.fp + c.fn_) as f64 / total as f64,
    })
}

pub fn f1(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Success,
    Collision,
    Frozen,
    Timeout,
}

impl Outcome {
    pub fn as_str(&self) -> &'static str {
        match self {
            Outcome::Success => "success",
            Outcome::Collision => "collision",
            Outcome::Frozen => "frozen",
            Outcome::Timeout => "timeout",
        }
    }
}

impl std::fmt::Display for Outcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub outcome: Outcome,
    /// Simulated seconds until the run ended.
    pub time_to_goal: f64,
    /// Smallest distance in meters between the robot disc and any obstacle.
    pub min_clearance: f64,
    pub freeze_duration: f64,
    /// Whether the collision, if any, was with a transparent obstacle.
    pub glass_collision: bool,
    /// Executed motions that crossed an extrapolated segment of the frame
    /// that selected them.
    pub segment_crossings: u64,
    pub seed: u64,
}

pub fn aggregate_runs(records: &[RunRecord]) -> f64 {
    if records.is_empty() {
        return 0.0;
    }
    let ok = records.iter().filter(|r| r.outcome == Outcome::Success).count();
    100.0 * ok as f64 / records.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Cell;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn grid(n: usize, ones: impl IntoIterator<Item = (i32, i32)>) -> BinaryGrid {
        let mut g = BinaryGrid::new(n);
        for (r, c) in ones {
            g.set(Cell::new(r, c), 1);
        }
        g
    }

    #[test]
    fn confusion_examples() {
        let g = grid(10, [(1, 1), (2, 5)]);
        let c = confusion(&g, &g).unwrap();
        assert_eq!((c.fp, c.fn_), (0, 0));

        let ones = BinaryGrid::filled(10, 1);
        assert_eq!(confusion(&ones, &BinaryGrid::new(10)).unwrap().fp, 100);

        let gt = grid(12, (0..10).map(|c| (3, c)));
        let pred = grid(12, (2..10).map(|c| (3, c)).chain([(4, 4)]));
        let c = confusion(&pred, &gt).unwrap();
        assert_eq!((c.tp, c.fn_, c.fp), (8, 2, 1));

        assert_eq!(confusion(&grid(3, []), &grid(4, [])), Err(Error::DimensionMismatch(3, 4)));
    }

    #[test]
    fn score_examples() {
        let perfect = scores(&ConfusionCounts { tp: 5, fp: 0, fn_: 0, tn: 95 }).unwrap();
        assert_eq!((perfect.miou, perfect.pa, perfect.f1, perfect.mae), (1.0, 1.0, 1.0, 0.0));

        // P = 0.8, R = 0.6.
        let s = scores(&ConfusionCounts { tp: 12, fp: 3, fn_: 8, tn: 77 }).unwrap();
        assert_abs_diff_eq!(s.precision, 0.8, epsilon = 1e-12);
        assert_abs_diff_eq!(s.recall, 0.6, epsilon = 1e-12);
        assert_abs_diff_eq!(s.f1, 0.96 / 1.4, epsilon = 1e-12);
        assert!((s.f1 - 0.6857).abs() < 5e-5);

        let ten = scores(&ConfusionCounts { tp: 3, fp: 1, fn_: 1, tn: 5 }).unwrap();
        assert_abs_diff_eq!(ten.mae, 0.2, epsilon = 1e-12);

        assert_eq!(f1(0.0, 0.0), 0.0);
        assert!(scores(&ConfusionCounts::default()).is_err());
    }

    fn record(outcome: Outcome) -> RunRecord {
        RunRecord {
            outcome,
            time_to_goal: 1.0,
            min_clearance: 0.1,
            freeze_duration: 0.0,
            glass_collision: false,
            segment_crossings: 0,
            seed: 0,
        }
    }

    #[test]
    fn success_rate_examples() {
        let runs: Vec<RunRecord> = (0..10)
            .map(|i| record(if i < 7 { Outcome::Success } else { Outcome::Collision }))
            .collect();
        assert_abs_diff_eq!(aggregate_runs(&runs), 70.0);
        assert_eq!(aggregate_runs(&[record(Outcome::Success); 3]), 100.0);
        assert_eq!(aggregate_runs(&[record(Outcome::Collision); 3]), 0.0);
    }

    fn arb_grid() -> impl Strategy<Value = BinaryGrid> {
        prop::collection::vec(prop::bool::weighted(0.3), 64)
            .prop_map(|b| BinaryGrid::from_vec(8, b.into_iter().map(u8::from).collect()).unwrap())
    }

    proptest! {
        #[test]
        fn swap_symmetry(a in arb_grid(), b in arb_grid()) {
            let ab = scores(&confusion(&a, &b).unwrap()).unwrap();
            let ba = scores(&confusion(&b, &a).unwrap()).unwrap();
            prop_assert_eq!(ab.pa, ba.pa);
            prop_assert_eq!(ab.mae, ba.mae);
            prop_assert!((ab.miou - ba.miou).abs() < 1e-12);
            prop_assert_eq!(ab.precision, ba.recall);
            prop_assert!((ab.f1 - ba.f1).abs() < 1e-12);
            for v in [ab.miou, ab.pa, ab.f1, ab.mae, ab.precision, ab.recall] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }

        #[test]
        fn self_scores_perfect(a in arb_grid()) {
            let s = scores(&confusion(&a, &a).unwrap()).unwrap();
            prop_assert_eq!((s.miou, s.pa, s.f1, s.mae), (1.0, 1.0, 1.0, 0.0));
        }

        #[test]
        fn mae_is_hamming(a in arb_grid(), b in arb_grid()) {
            let s = scores(&confusion(&a, &b).unwrap()).unwrap();
            let diff = a.as_slice().iter().zip(b.as_slice()).filter(|(x, y)| x != y).count();
            prop_assert_eq!(s.mae, diff as f64 / 64.0);
        }

        #[test]
        fn rate_in_range(outcomes in prop::collection::vec(0u8..4, 1..20)) {
            let runs: Vec<RunRecord> = outcomes.iter().map(|&o| record(match o {
                0 => Outcome::Success, 1 => Outcome::Collision, 2 => Outcome::Frozen, _ => Outcome::Timeout,
            })).collect();
            let rate = aggregate_runs(&runs);
            prop_assert!((0.0..=100.0).contains(&rate));
        }
    }
}
