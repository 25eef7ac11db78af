//! Page-level scoring: kernel-box grouping, detection precision/recall/F,
//! corpus CR/AR, and ground-truth box perturbation.
//!
//! Predicted boxes are sorted left to right and each joins the ground-truth
//! line it overlaps most. Boxes overlapping no line are parked in group 0 and
//! reported as unmatched: they count against precision and are left out of the
//! transcript concatenation.

use std::cmp::Ordering;
use std::fmt;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{align, normalize_symbols, EditCounts};
use crate::point::Point;
use crate::polygon::{polygon_iou, Polygon};

/// A line counts as detected when its grouped transcript reaches
/// `DETECTED_NUM / DETECTED_DEN` (90%) of the reference length.
pub const DETECTED_NUM: usize = 9;
pub const DETECTED_DEN: usize = 10;

/// Page identifier as found in page files: a number or a string.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PageId {
    Number(i64),
    Text(String),
}

impl fmt::Display for PageId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PageId::Number(n) => write!(f, "{n}"),
            PageId::Text(s) => f.write_str(s),
        }
    }
}

/// One box with its transcript.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TextBox {
    pub poly: Polygon,
    #[serde(default)]
    pub text: String,
}

impl TextBox {
    pub fn new(poly: Polygon, text: impl Into<String>) -> Self {
        Self { poly, text: text.into() }
    }
}

/// Ground truth and predictions for one page.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PageRecord {
    pub page: PageId,
    pub gt: Vec<TextBox>,
    #[serde(default)]
    pub pred: Vec<TextBox>,
}

/// Reads a page file holding either one page object or an array of them.
pub fn read_pages(path: &Path) -> Result<Vec<PageRecord>> {
    let value: serde_json::Value = serde_json::from_slice(&fs::read(path)?)?;
    if value.is_array() {
        Ok(serde_json::from_value(value)?)
    } else {
        Ok(vec![serde_json::from_value(value)?])
    }
}

/// Pred indices per ground-truth line, left to right, plus the indices that
/// overlap no line. Unmatched indices also sit in group 0.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grouping {
    pub groups: Vec<Vec<usize>>,
    pub unmatched: Vec<usize>,
}

fn reading_order(a: &Polygon, b: &Polygon) -> Ordering {
    a.min_x()
        .total_cmp(&b.min_x())
        .then(a.min_y().total_cmp(&b.min_y()))
        .then_with(|| {
            a.vertices()
                .iter()
                .zip(b.vertices())
                .map(|(p, q)| p.x.total_cmp(&q.x).then(p.y.total_cmp(&q.y)))
                .find(|o| o.is_ne())
                .unwrap_or(a.vertices().len().cmp(&b.vertices().len()))
        })
}

/// Sorts `pred` by leftmost x (then top y) and assigns each box to the
/// ground-truth line of highest IOU; ties go to the lower line index.
pub fn group_kernel_boxes(pred: &[Polygon], gt: &[Polygon], grid: f64) -> Result<Grouping> {
    if gt.is_empty() {
        return Err(Error::NoGroundTruth);
    }
    let mut order: Vec<usize> = (0..pred.len()).collect();
    order.sort_by(|&i, &j| reading_order(&pred[i], &pred[j]).then(i.cmp(&j)));
    let mut grouping = Grouping { groups: vec![Vec::new(); gt.len()], unmatched: Vec::new() };
    for i in order {
        let mut best = (0usize, 0.0f64);
        for (j, g) in gt.iter().enumerate() {
            let iou = polygon_iou(&pred[i], g, grid)?;
            if iou > best.1 {
                best = (j, iou);
            }
        }
        if best.1 == 0.0 {
            grouping.unmatched.push(i);
        }
        grouping.groups[best.0].push(i);
    }
    Ok(grouping)
}

/// Scoring options.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    /// Sampling pitch of the rasterized IOU.
    pub iou_grid: f64,
    /// Map full-width punctuation to ASCII before comparing transcripts.
    pub normalize_symbols: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { iou_grid: 1.0, normalize_symbols: false }
    }
}

/// Per-page tallies.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PageReport {
    pub page: PageId,
    pub lines: usize,
    pub lines_with_boxes: usize,
    pub detected: usize,
    pub pred_boxes: usize,
    pub unmatched: usize,
    pub edits: EditCounts,
    pub grouping: Grouping,
}

impl PageReport {
    pub fn precision(&self) -> f64 {
        ratio(self.detected, self.lines_with_boxes + self.unmatched)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.detected, self.lines)
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn f_measure(p: f64, r: f64) -> f64 {
    if p + r > 0.0 {
        2.0 * p * r / (p + r)
    } else {
        0.0
    }
}

fn symbols(text: &str, cfg: &EvalConfig) -> Vec<char> {
    if cfg.normalize_symbols {
        normalize_symbols(text).chars().collect()
    } else {
        text.chars().collect()
    }
}

/// Groups one page and tallies detection and edit counts.
pub fn evaluate_page(page: &PageRecord, cfg: &EvalConfig) -> Result<PageReport> {
    let pred_polys: Vec<Polygon> = page.pred.iter().map(|b| b.poly.clone()).collect();
    let grouping = if page.gt.is_empty() {
        Grouping { groups: Vec::new(), unmatched: (0..pred_polys.len()).collect() }
    } else {
        let gt_polys: Vec<Polygon> = page.gt.iter().map(|b| b.poly.clone()).collect();
        group_kernel_boxes(&pred_polys, &gt_polys, cfg.iou_grid)?
    };
    let mut report = PageReport {
        page: page.page.clone(),
        lines: page.gt.len(),
        lines_with_boxes: 0,
        detected: 0,
        pred_boxes: page.pred.len(),
        unmatched: grouping.unmatched.len(),
        edits: EditCounts::default(),
        grouping: Grouping::default(),
    };
    for (line, members) in page.gt.iter().zip(&grouping.groups) {
        let matched: Vec<usize> =
            members.iter().copied().filter(|i| !grouping.unmatched.contains(i)).collect();
        let hyp: Vec<char> = matched.iter().flat_map(|&i| symbols(&page.pred[i].text, cfg)).collect();
        let reference = symbols(&line.text, cfg);
        if !matched.is_empty() {
            report.lines_with_boxes += 1;
            if DETECTED_DEN * hyp.len() >= DETECTED_NUM * reference.len() {
                report.detected += 1;
            }
        }
        report.edits = report.edits + align(&reference, &hyp);
    }
    report.grouping = grouping;
    Ok(report)
}

/// Detection scores over a corpus.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionScores {
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
}

/// Corpus scores plus the per-page breakdown.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
    pub cr: f64,
    pub ar: f64,
    pub pages: Vec<PageReport>,
}

impl EvalReport {
    /// Aligned plain-text table: one row per page and a total row.
    pub fn to_table(&self) -> String {
        let pct = |v: f64| format!("{:.2}", 100.0 * v);
        let mut rows = vec![[
            "page".to_string(),
            "lines".into(),
            "boxes".into(),
            "unmatched".into(),
            "P(%)".into(),
            "R(%)".into(),
            "CR(%)".into(),
            "AR(%)".into(),
        ]];
        for p in &self.pages {
            let (cr, ar) = p.edits.rates().map_or(("-".into(), "-".into()), |(c, a)| (pct(c), pct(a)));
            rows.push([
                p.page.to_string(),
                p.lines.to_string(),
                p.pred_boxes.to_string(),
                p.unmatched.to_string(),
                pct(p.precision()),
                pct(p.recall()),
                cr,
                ar,
            ]);
        }
        rows.push([
            "total".into(),
            self.pages.iter().map(|p| p.lines).sum::<usize>().to_string(),
            self.pages.iter().map(|p| p.pred_boxes).sum::<usize>().to_string(),
            self.pages.iter().map(|p| p.unmatched).sum::<usize>().to_string(),
            pct(self.precision),
            pct(self.recall),
            pct(self.cr),
            pct(self.ar),
        ]);
        let widths: Vec<usize> =
            (0..8).map(|c| rows.iter().map(|r| r[c].chars().count()).max().unwrap_or(0)).collect();
        let mut out = String::new();
        for row in &rows {
            let cells: Vec<String> = row
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(c, (s, &w))| if c == 0 { format!("{s:<w$}") } else { format!("{s:>w$}") })
                .collect();
            out.push_str(cells.join("  ").trim_end());
            out.push('\n');
        }
        out
    }
}

fn page_reports(pages: &[PageRecord], cfg: &EvalConfig) -> Result<Vec<PageReport>> {
    pages.par_iter().map(|p| evaluate_page(p, cfg)).collect()
}

fn detection_from(reports: &[PageReport]) -> DetectionScores {
    let detected = reports.iter().map(|r| r.detected).sum();
    let claimed = reports.iter().map(|r| r.lines_with_boxes + r.unmatched).sum();
    let lines = reports.iter().map(|r| r.lines).sum();
    let precision = ratio(detected, claimed);
    let recall = ratio(detected, lines);
    DetectionScores { precision, recall, f_measure: f_measure(precision, recall) }
}

/// Precision, recall and F-measure of the grouped detections.
pub fn detection_scores(pages: &[PageRecord], cfg: &EvalConfig) -> Result<DetectionScores> {
    Ok(detection_from(&page_reports(pages, cfg)?))
}

/// Corpus CR/AR with `N` = total ground-truth symbols.
pub fn page_cr_ar(pages: &[PageRecord], cfg: &EvalConfig) -> Result<(f64, f64)> {
    page_reports(pages, cfg)?.iter().map(|r| r.edits).sum::<EditCounts>().rates()
}

/// Scores a corpus; pages are evaluated in parallel and reported in input order.
pub fn evaluate(pages: &[PageRecord], cfg: &EvalConfig) -> Result<EvalReport> {
    let reports = page_reports(pages, cfg)?;
    let det = detection_from(&reports);
    let (cr, ar) = reports.iter().map(|r| r.edits).sum::<EditCounts>().rates()?;
    Ok(EvalReport {
        precision: det.precision,
        recall: det.recall,
        f_measure: det.f_measure,
        cr,
        ar,
        pages: reports,
    })
}

/// Moves each vertex of a 4-point box by uniform offsets within
/// `±amp_v·s` vertically and `±amp_h·s` horizontally, `s` being the box's
/// short side. Deterministic for a given seed.
pub fn perturb_box(quad: &Polygon, amp_v: f64, amp_h: f64, seed: u64) -> Result<Polygon> {
    let v = quad.vertices();
    if v.len() != 4 {
        return Err(Error::InvalidParameter(format!("expected a 4-vertex box, got {}", v.len())));
    }
    if !(amp_v >= 0.0 && amp_h >= 0.0 && amp_v.is_finite() && amp_h.is_finite()) {
        return Err(Error::InvalidParameter("perturbation amplitudes must be finite and >= 0".into()));
    }
    let short = v[0].distance(v[1]).min(v[1].distance(v[2]));
    let (bv, bh) = (amp_v * short, amp_h * short);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |bound: f64| if bound > 0.0 { rng.random_range(-bound..=bound) } else { 0.0 };
    let moved = v
        .iter()
        .map(|p| {
            let dx = draw(bh);
            let dy = draw(bv);
            *p + Point::new(dx, dy)
        })
        .collect();
    Polygon::new(moved)
}
