//! Label-quality evaluation: IoU, occlusion detection from ranging series,
//! label filtering, the log-average miss rate and the label quality report.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labeling::{Frame, Label, Provenance};
use crate::localization::LocalizationFix;
use crate::projection::BoundingBox;
use crate::ranging::RangingSample;
use crate::scene::TimeWindow;
use crate::stats::{median, Summary};

/// Intersection over union of two boxes; 0 when either is empty.
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let w = (a.right().min(b.right()) - a.x.max(b.x)).max(0.0);
    let h = (a.bottom().min(b.bottom()) - a.y.max(b.y)).max(0.0);
    let inter = w * h;
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        (inter / union).clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OcclusionThresholds {
    /// Drop below the baseline RSS that counts as blockage (dB).
    pub rss_threshold: f64,
    /// Range excess over the baseline that counts as blockage (m).
    pub range_threshold: f64,
    /// Shortest flagged stretch reported as an event (s).
    pub min_duration: f64,
    /// Longest look-back or look-ahead of the local trend fit (s); also the
    /// shortest series that can be analysed.
    pub window: f64,
    /// Clear-path RSS law of the links, when known. Lets a link that is blocked
    /// for its whole duration be recognised.
    #[serde(default)]
    pub link_budget: Option<LinkBudget>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkBudget {
    pub ref_rss_1m: f64,
    pub pathloss_exponent: f64,
}

impl LinkBudget {
    pub fn clear_rss(&self, distance: f64) -> f64 {
        self.ref_rss_1m - 10.0 * self.pathloss_exponent * libm::log10(distance.max(1e-3))
    }
}

impl Default for OcclusionThresholds {
    fn default() -> Self {
        OcclusionThresholds {
            rss_threshold: 8.0,
            range_threshold: 1.5,
            min_duration: 0.5,
            window: 3.0,
            link_budget: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Evidence {
    RssDrop,
    RangeJump,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OcclusionEvent {
    pub tx_id: String,
    pub target_id: String,
    pub interval: TimeWindow,
    pub evidence: BTreeSet<Evidence>,
}

#[derive(Debug, Clone, Copy)]
struct Point {
    t: f64,
    range: f64,
    rss: f64,
}

/// Beacons sharing a timestamp collapse to their mean.
fn aggregate(mut samples: Vec<&RangingSample>) -> Vec<Point> {
    samples.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp));
    let mut out: Vec<(Point, usize)> = Vec::new();
    for s in samples {
        match out.last_mut() {
            Some((p, n)) if p.t == s.timestamp => {
                p.range += s.measured_distance;
                p.rss += s.rss;
                *n += 1;
            }
            _ => out.push((
                Point {
                    t: s.timestamp,
                    range: s.measured_distance,
                    rss: s.rss,
                },
                1,
            )),
        }
    }
    out.into_iter()
        .map(|(p, n)| Point {
            t: p.t,
            range: p.range / n as f64,
            rss: p.rss / n as f64,
        })
        .collect()
}

/// Samples used to extrapolate the local trend one step ahead.
const TREND_POINTS: usize = 3;

/// Linear extrapolation of the last few `(t, v)` points to `at` (median of the
/// pairwise slopes, median of the implied intercepts).
fn extrapolate(history: &[(f64, f64)], at: f64) -> f64 {
    let mut slopes = Vec::new();
    for (i, a) in history.iter().enumerate() {
        for b in &history[i + 1..] {
            if b.0 != a.0 {
                slopes.push((b.1 - a.1) / (b.0 - a.0));
            }
        }
    }
    let slope = if slopes.is_empty() {
        0.0
    } else {
        median(&mut slopes)
    };
    let mut level: Vec<f64> = history.iter().map(|&(t, v)| v + slope * (at - t)).collect();
    median(&mut level)
}

/// Splits a link series into segments separated by abrupt steps.
///
/// At each boundary the trend of the samples on the left (at most `window`
/// seconds back) is extrapolated to the first sample on the right and vice
/// versa. A step shows up as opposite misses of similar size on both sides,
/// while a change of slope leaves one side consistent. Returns the per-sample
/// cumulative (rss offset, range offset).
fn step_offsets(points: &[Point], th: &OcclusionThresholds) -> Vec<(f64, f64)> {
    let n = points.len();
    let mut offsets: Vec<(f64, f64)> = Vec::with_capacity(n);
    let (mut rss_off, mut range_off) = (0.0, 0.0);
    for i in 0..n {
        if i > 0 {
            let left: Vec<usize> = (i.saturating_sub(TREND_POINTS)..i)
                .filter(|&j| points[i].t - points[j].t <= th.window)
                .collect();
            let right: Vec<usize> = (i..n.min(i + TREND_POINTS))
                .filter(|&j| points[j].t - points[i - 1].t <= th.window)
                .collect();
            let miss = |value: fn(&Point) -> f64| {
                let l: Vec<(f64, f64)> = left
                    .iter()
                    .map(|&j| (points[j].t, value(&points[j])))
                    .collect();
                let r: Vec<(f64, f64)> = right
                    .iter()
                    .map(|&j| (points[j].t, value(&points[j])))
                    .collect();
                let forward = value(&points[i]) - extrapolate(&l, points[i].t);
                let backward = extrapolate(&r, points[i - 1].t) - value(&points[i - 1]);
                (forward, backward)
            };
            let stepped = |(f, b): (f64, f64), threshold: f64| {
                f * b > 0.0 && f.abs().min(b.abs()) > threshold
            };
            let d_rss = miss(|p| p.rss);
            let d_range = miss(|p| p.range);
            if stepped(d_rss, th.rss_threshold) || stepped(d_range, th.range_threshold) {
                rss_off += 0.5 * (d_rss.0 + d_rss.1);
                range_off += 0.5 * (d_range.0 + d_range.1);
            }
        }
        offsets.push((rss_off, range_off));
    }
    offsets
}

/// Per-sample blockage evidence: the sample's level sits below the clear-path
/// level of its link by more than a threshold. The clear-path level is the
/// highest RSS offset (and lowest range offset) held for at least
/// `min_duration`; with a link budget, a segment whose RSS sits below the
/// budget at its measured range is flagged as well.
fn blockage_flags(points: &[Point], th: &OcclusionThresholds) -> Vec<BTreeSet<Evidence>> {
    let offsets = step_offsets(points, th);
    let mut runs: Vec<(usize, usize)> = Vec::new();
    for i in 0..points.len() {
        match runs.last_mut() {
            Some(r) if offsets[r.0] == offsets[i] => r.1 = i,
            _ => runs.push((i, i)),
        }
    }
    let held = |r: &(usize, usize)| points[r.1].t - points[r.0].t >= th.min_duration;
    let reference: Vec<&(usize, usize)> = if runs.iter().any(held) {
        runs.iter().filter(|r| held(r)).collect()
    } else {
        runs.iter().collect()
    };
    let clear_rss = reference
        .iter()
        .map(|r| offsets[r.0].0)
        .fold(f64::NEG_INFINITY, f64::max);
    let clear_range = reference
        .iter()
        .map(|r| offsets[r.0].1)
        .fold(f64::INFINITY, f64::min);
    let mut below_budget = alloc::vec![false; points.len()];
    if let Some(budget) = th.link_budget {
        for r in &runs {
            let mut excess: Vec<f64> = points[r.0..=r.1]
                .iter()
                .map(|p| p.rss - budget.clear_rss(p.range))
                .collect();
            if median(&mut excess) < -th.rss_threshold {
                below_budget[r.0..=r.1].iter_mut().for_each(|b| *b = true);
            }
        }
    }
    offsets
        .iter()
        .zip(below_budget)
        .map(|(&(rss, range), below)| {
            let mut e = BTreeSet::new();
            if rss < clear_rss - th.rss_threshold || below {
                e.insert(Evidence::RssDrop);
            }
            if range > clear_range + th.range_threshold {
                e.insert(Evidence::RangeJump);
            }
            e
        })
        .collect()
}

/// Finds intervals where a link shows the blockage signature: RSS well below or
/// range well above the link's clear-path level.
///
/// Samples are grouped by (transmitter, target) and beacons at one timestamp are
/// averaged. Blockage enters and leaves a link as an abrupt step against the
/// smooth trend of a moving target, so each series is cut into segments at such
/// steps and every segment is compared with the clear-path level. Maximal
/// flagged runs lasting at least `min_duration` become events; each sample owns
/// the half-gaps to its neighbours, which keeps events of one link disjoint.
pub fn detect_occlusion(
    series: &[RangingSample],
    th: &OcclusionThresholds,
) -> Result<Vec<OcclusionEvent>> {
    if !(th.window > 0.0
        && th.min_duration >= 0.0
        && th.rss_threshold > 0.0
        && th.range_threshold > 0.0)
    {
        return Err(Error::InvalidParameter {
            entity: "occlusion thresholds".into(),
            reason: "window and thresholds must be positive",
        });
    }
    let mut links: BTreeMap<(&str, &str), Vec<&RangingSample>> = BTreeMap::new();
    for s in series {
        links
            .entry((s.tx_id.as_str(), s.target_id.as_str()))
            .or_default()
            .push(s);
    }
    let mut events = Vec::new();
    for ((tx, target), samples) in links {
        let points = aggregate(samples);
        let span = points[points.len() - 1].t - points[0].t;
        if points.len() < 2 || span < th.window {
            return Err(Error::SeriesTooShort {
                len: points.len(),
                span,
                window: th.window,
            });
        }
        let flags = blockage_flags(&points, th);

        let mut gaps: Vec<f64> = points.windows(2).map(|w| w[1].t - w[0].t).collect();
        let dt = median(&mut gaps);
        let lower = |i: usize| {
            if i == 0 {
                points[0].t - 0.5 * dt
            } else {
                0.5 * (points[i - 1].t + points[i].t)
            }
        };
        let upper = |i: usize| {
            if i + 1 == points.len() {
                points[i].t + 0.5 * dt
            } else {
                0.5 * (points[i].t + points[i + 1].t)
            }
        };
        let mut i = 0;
        while i < points.len() {
            if flags[i].is_empty() {
                i += 1;
                continue;
            }
            let start = i;
            let mut evidence = BTreeSet::new();
            while i < points.len() && !flags[i].is_empty() {
                evidence.extend(flags[i].iter().copied());
                i += 1;
            }
            let interval = TimeWindow::new(lower(start), upper(i - 1));
            if interval.end - interval.start >= th.min_duration - 1e-9 {
                events.push(OcclusionEvent {
                    tx_id: tx.into(),
                    target_id: target.into(),
                    interval,
                    evidence,
                });
            }
        }
    }
    Ok(events)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterCriteria {
    /// Labels below this fix confidence are removed.
    pub min_confidence: f64,
    /// Physical speed cap between consecutive accepted fixes (m/s).
    pub max_speed: f64,
    /// Largest gap between a label's frame time and the fix it is attributed to (s).
    pub fix_tolerance: f64,
    #[serde(default)]
    pub events: Vec<OcclusionEvent>,
}

impl Default for FilterCriteria {
    fn default() -> Self {
        FilterCriteria {
            min_confidence: 0.05,
            max_speed: 12.0,
            fix_tolerance: 0.5,
            events: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FilterReport {
    pub input_labels: usize,
    pub removed_low_confidence: usize,
    pub removed_occlusion: usize,
    pub removed_speed: usize,
    pub kept: usize,
}

impl FilterReport {
    pub fn removed(&self) -> usize {
        self.removed_low_confidence + self.removed_occlusion + self.removed_speed
    }
}

/// Fixes whose implied speed from the last accepted fix of the same target
/// exceeds `max_speed`, as (target, timestamp bits) keys.
pub fn speed_violations(fixes: &[LocalizationFix], max_speed: f64) -> BTreeSet<(String, u64)> {
    let mut by_target: BTreeMap<&str, Vec<&LocalizationFix>> = BTreeMap::new();
    for f in fixes {
        by_target.entry(f.target_id.as_str()).or_default().push(f);
    }
    let mut out = BTreeSet::new();
    for (target, mut track) in by_target {
        track.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp));
        let mut last: Option<&LocalizationFix> = None;
        for f in track {
            let ok = last.is_none_or(|prev| {
                let dt = f.timestamp - prev.timestamp;
                dt > 0.0 && f.position.distance(prev.position) <= max_speed * dt
            });
            if ok {
                last = Some(f);
            } else {
                out.insert((target.into(), f.timestamp.to_bits()));
            }
        }
    }
    out
}

/// Drops RF-derived labels that fail the quality rules: low fix confidence, an
/// occlusion event covering the frame for that identity, or a fix that implies
/// a physically impossible speed. Each removal is credited to the first rule
/// that fires, in that order. Ground-truth labels are never removed.
pub fn filter_labels(
    frames: Vec<Frame>,
    fixes: &[LocalizationFix],
    criteria: &FilterCriteria,
) -> (Vec<Frame>, FilterReport) {
    let spikes = speed_violations(fixes, criteria.max_speed);
    let mut by_target: BTreeMap<&str, Vec<&LocalizationFix>> = BTreeMap::new();
    for f in fixes {
        by_target.entry(f.target_id.as_str()).or_default().push(f);
    }
    for track in by_target.values_mut() {
        track.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp));
    }
    let nearest_fix = |id: &str, t: f64| -> Option<&LocalizationFix> {
        let track = by_target.get(id)?;
        let i = track.partition_point(|f| f.timestamp < t);
        [i.checked_sub(1), Some(i)]
            .into_iter()
            .flatten()
            .filter_map(|j| track.get(j).copied())
            .filter(|f| (f.timestamp - t).abs() <= criteria.fix_tolerance)
            .min_by(|a, b| (a.timestamp - t).abs().total_cmp(&(b.timestamp - t).abs()))
    };

    let mut report = FilterReport::default();
    let out = frames
        .into_iter()
        .map(|mut frame| {
            let t = frame.timestamp;
            frame.labels.retain(|label| {
                report.input_labels += 1;
                if label.provenance == Provenance::GroundTruth {
                    report.kept += 1;
                    return true;
                }
                if label.confidence < criteria.min_confidence {
                    report.removed_low_confidence += 1;
                    return false;
                }
                let Some(id) = label.identity.as_deref() else {
                    report.kept += 1;
                    return true;
                };
                if criteria
                    .events
                    .iter()
                    .any(|e| e.target_id == id && e.interval.contains(t))
                {
                    report.removed_occlusion += 1;
                    return false;
                }
                if let Some(f) = nearest_fix(id, t) {
                    if spikes.contains(&(f.target_id.clone(), f.timestamp.to_bits())) {
                        report.removed_speed += 1;
                        return false;
                    }
                }
                report.kept += 1;
                true
            });
            frame
        })
        .collect();
    (out, report)
}

/// FPPI reference points of the log-average miss rate: nine values log-spaced
/// over [10⁻², 10⁰].
pub fn fppi_reference_points() -> [f64; 9] {
    core::array::from_fn(|i| libm::pow(10.0, -2.0 + 2.0 * i as f64 / 8.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Outcome {
    Hit,
    FalsePositive,
    Ignored,
}

fn frame_key(f: &Frame) -> (&str, u64) {
    (f.camera_id.as_str(), f.frame_id)
}

fn align<'a>(
    predicted: &'a [Frame],
    truth: &'a [Frame],
) -> Result<BTreeMap<(&'a str, u64), &'a Frame>> {
    let keys: BTreeMap<(&str, u64), &Frame> = truth.iter().map(|f| (frame_key(f), f)).collect();
    for f in predicted {
        match keys.get(&frame_key(f)) {
            Some(g) if (g.timestamp - f.timestamp).abs() <= 1e-6 => {}
            _ => {
                return Err(Error::MisalignedFrames {
                    camera_id: f.camera_id.clone(),
                    frame_id: f.frame_id,
                });
            }
        }
    }
    Ok(keys)
}

/// Greedy score-ordered matching of one frame's detections.
fn match_detections(dets: &[Label], truth: &[Label], match_iou: f64) -> Vec<(f64, Outcome)> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| {
        dets[b]
            .confidence
            .total_cmp(&dets[a].confidence)
            .then(a.cmp(&b))
    });
    let mut taken = alloc::vec![false; truth.len()];
    let mut out = Vec::with_capacity(dets.len());
    for i in order {
        let d = &dets[i].bbox;
        let mut best: Option<(usize, f64)> = None;
        for (j, g) in truth.iter().enumerate() {
            if g.occluded || taken[j] {
                continue;
            }
            let v = iou(d, &g.bbox);
            if v >= match_iou && best.is_none_or(|(_, b)| v > b) {
                best = Some((j, v));
            }
        }
        let outcome = match best {
            Some((j, _)) => {
                taken[j] = true;
                Outcome::Hit
            }
            None if truth
                .iter()
                .any(|g| g.occluded && iou(d, &g.bbox) >= match_iou) =>
            {
                Outcome::Ignored
            }
            None => Outcome::FalsePositive,
        };
        out.push((dets[i].confidence, outcome));
    }
    out
}

/// Log-average miss rate of scored detections (`confidence` is the score).
///
/// Occluded ground-truth labels are ignore regions: detections matching them
/// count neither as hits nor as false positives. The miss-rate/FPPI curve is
/// swept over all score thresholds; at each reference FPPI the lowest miss rate
/// achieved at or below it is taken, and the nine values are averaged.
pub fn log_average_miss_rate(
    detections: &[Frame],
    ground_truth: &[Frame],
    match_iou: f64,
) -> Result<f64> {
    let truth = align(detections, ground_truth)?;
    let positives: usize = ground_truth
        .iter()
        .map(|f| f.labels.iter().filter(|l| !l.occluded).count())
        .sum();
    if positives == 0 {
        return Err(Error::EmptyGroundTruth);
    }
    let images = ground_truth.len() as f64;
    let mut scored: Vec<(f64, Outcome)> = detections
        .iter()
        .flat_map(|f| match_detections(&f.labels, &truth[&frame_key(f)].labels, match_iou))
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));

    // (fppi, miss) after admitting every detection scoring at least each distinct score
    let mut curve = alloc::vec![(0.0, 1.0)];
    let (mut hits, mut false_pos) = (0usize, 0usize);
    for (i, (score, outcome)) in scored.iter().enumerate() {
        match outcome {
            Outcome::Hit => hits += 1,
            Outcome::FalsePositive => false_pos += 1,
            Outcome::Ignored => {}
        }
        if scored.get(i + 1).is_none_or(|next| next.0 != *score) {
            curve.push((
                false_pos as f64 / images,
                1.0 - hits as f64 / positives as f64,
            ));
        }
    }
    let refs = fppi_reference_points();
    let total: f64 = refs
        .iter()
        .map(|&r| {
            curve
                .iter()
                .filter(|p| p.0 <= r)
                .map(|p| p.1)
                .fold(1.0, f64::min)
        })
        .sum();
    Ok(total / refs.len() as f64)
}

/// Share of matched-box IoUs in each tenth of [0, 1].
pub const IOU_BINS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ConfigBreakdown {
    pub mean_iou: f64,
    pub label_precision: f64,
    pub label_recall: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct QualityReport {
    pub match_iou: f64,
    /// Mean IoU of each scored RF label with its matched (or best) ground-truth box.
    pub mean_iou: f64,
    pub iou_histogram: [usize; IOU_BINS],
    pub label_precision: f64,
    pub label_recall: f64,
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    /// RF labels that overlap only occluded ground truth.
    pub ignored_labels: usize,
    /// |Δ centre column| of matched pairs (px); the angular-error proxy.
    pub angular_error_stats: Summary,
    /// |Δ box height| of matched pairs (px); the depth-error proxy.
    pub size_error_stats: Summary,
    pub dropped_label_count: usize,
    #[serde(default)]
    pub per_config: BTreeMap<String, ConfigBreakdown>,
}

impl QualityReport {
    pub fn breakdown(&self) -> ConfigBreakdown {
        ConfigBreakdown {
            mean_iou: self.mean_iou,
            label_precision: self.label_precision,
            label_recall: self.label_recall,
        }
    }
}

/// Per-label errors of one matched pair, for detailed export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairError {
    pub camera_id: String,
    pub frame_id: u64,
    pub identity: Option<String>,
    pub iou: f64,
    pub center_error: f64,
    pub height_error: f64,
}

/// Matches RF labels to visible ground truth in one frame by descending IoU.
/// Returns (rf index, gt index, IoU) for every assigned pair with positive overlap.
fn match_by_iou(rf: &[Label], gt: &[Label]) -> Vec<(usize, usize, f64)> {
    let mut pairs: Vec<(usize, usize, f64)> = Vec::new();
    for (i, a) in rf.iter().enumerate() {
        for (j, b) in gt.iter().enumerate() {
            if b.occluded {
                continue;
            }
            let v = iou(&a.bbox, &b.bbox);
            if v > 0.0 {
                pairs.push((i, j, v));
            }
        }
    }
    pairs.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(&b.0)).then(a.1.cmp(&b.1)));
    let (mut used_rf, mut used_gt) = (alloc::vec![false; rf.len()], alloc::vec![false; gt.len()]);
    pairs.retain(|&(i, j, _)| {
        if used_rf[i] || used_gt[j] {
            return false;
        }
        used_rf[i] = true;
        used_gt[j] = true;
        true
    });
    pairs
}

/// Compares RF labels to ground truth frame by frame.
///
/// Pairs with IoU ≥ `match_iou` are true positives. Occluded ground truth is
/// excluded: it neither counts as missed nor penalises RF labels that land on
/// it. Empty denominators give precision or recall 1.
pub fn quality_report(
    rf_frames: &[Frame],
    gt_frames: &[Frame],
    match_iou: f64,
) -> Result<QualityReport> {
    Ok(quality_report_detailed(rf_frames, gt_frames, match_iou)?.0)
}

/// [`quality_report`] together with the per-pair errors of the true positives.
pub fn quality_report_detailed(
    rf_frames: &[Frame],
    gt_frames: &[Frame],
    match_iou: f64,
) -> Result<(QualityReport, Vec<PairError>)> {
    let truth = align(rf_frames, gt_frames)?;
    let mut report = QualityReport {
        match_iou,
        ..QualityReport::default()
    };
    let mut scores = Vec::new();
    let (mut centre, mut size, mut pairs_out) = (Vec::new(), Vec::new(), Vec::new());
    let visible: usize = gt_frames
        .iter()
        .map(|f| f.labels.iter().filter(|l| !l.occluded).count())
        .sum();

    for frame in rf_frames {
        let gt = &truth[&frame_key(frame)].labels;
        let pairs = match_by_iou(&frame.labels, gt);
        let mut matched = alloc::vec![None; frame.labels.len()];
        for &(i, j, v) in &pairs {
            matched[i] = Some((j, v));
        }
        for (i, label) in frame.labels.iter().enumerate() {
            match matched[i] {
                Some((j, v)) if v >= match_iou => {
                    report.true_positives += 1;
                    scores.push(v);
                    let g = &gt[j];
                    let (dc, dh) = (
                        (label.bbox.center_x() - g.bbox.center_x()).abs(),
                        (label.bbox.h - g.bbox.h).abs(),
                    );
                    centre.push(dc);
                    size.push(dh);
                    pairs_out.push(PairError {
                        camera_id: frame.camera_id.clone(),
                        frame_id: frame.frame_id,
                        identity: label.identity.clone(),
                        iou: v,
                        center_error: dc,
                        height_error: dh,
                    });
                }
                m => {
                    if gt
                        .iter()
                        .any(|g| g.occluded && iou(&label.bbox, &g.bbox) >= match_iou)
                    {
                        report.ignored_labels += 1;
                        continue;
                    }
                    report.false_positives += 1;
                    scores.push(m.map_or(0.0, |(_, v)| v));
                }
            }
        }
    }
    report.false_negatives = visible - report.true_positives;
    let scored = report.true_positives + report.false_positives;
    report.label_precision = if scored == 0 {
        1.0
    } else {
        report.true_positives as f64 / scored as f64
    };
    report.label_recall = if visible == 0 {
        1.0
    } else {
        report.true_positives as f64 / visible as f64
    };
    report.mean_iou = if scores.is_empty() {
        0.0
    } else {
        scores.iter().sum::<f64>() / scores.len() as f64
    };
    for v in &scores {
        let bin = ((v * IOU_BINS as f64) as usize).min(IOU_BINS - 1);
        report.iou_histogram[bin] += 1;
    }
    report.angular_error_stats = Summary::of(&centre);
    report.size_error_stats = Summary::of(&size);
    Ok((report, pairs_out))
}
