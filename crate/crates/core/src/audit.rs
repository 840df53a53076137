//! Findings-oriented audit drivers.
//!
//! Each driver walks a materialized structure and turns every failed check
//! into a [`Finding`]. An empty finding list means the run is clean.

use std::collections::BTreeMap;
use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::arith::{self, Rational};
use crate::cantor::{sample_point_with, CantorSchedule, Construction, ConstructionError, LevelTree};
use crate::classify::{inclusion_audit, PsiSpec};
use crate::dimension::{four_interval_check, holder_audit_intervals, DimensionError};
use crate::cf::CfWord;
use crate::geometry::{gap_exact, GapReport, GeometryError, LevelCase};
use crate::pressure::{normalization_audit, MeasureTree};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FindingKind {
    Overlap,
    Nesting,
    Gap,
    LengthBracket,
    Inclusion,
    Normalization,
    Holder,
    FourInterval,
    Error,
}

impl fmt::Display for FindingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).expect("unit variant");
        f.write_str(s.as_str().expect("string tag"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Finding {
    pub kind: FindingKind,
    pub level: Option<usize>,
    /// Word or object the check was about.
    pub subject: String,
    pub detail: String,
}

impl Finding {
    fn new(kind: FindingKind, level: Option<usize>, subject: impl Into<String>, detail: impl Into<String>) -> Self {
        Finding {
            kind,
            level,
            subject: subject.into(),
            detail: detail.into(),
        }
    }

    /// One JSON object, no trailing newline.
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("finding serializes")
    }
}

/// Deliberate corruption used to check that the audits actually fire.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Fault {
    /// Raise the promised lower bound of the first audited gap above the
    /// measured gap.
    FlipGapBound,
}

/// Smallest observed `g_n / |J_n|` per case next to the promised factor.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapStat {
    pub case: LevelCase,
    pub checked: usize,
    pub min_ratio: f64,
    pub promised: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeometryAudit {
    pub depth: usize,
    pub nodes: usize,
    pub gaps: Vec<GapStat>,
    pub brackets_checked: usize,
    pub findings: Vec<Finding>,
}

/// Disjointness, nesting, gap and length-bracket checks on every level of a
/// materialized tree.
pub fn geometry_audit<C: Construction + ?Sized>(
    construction: &C,
    tree: &LevelTree,
    fault: Option<Fault>,
) -> GeometryAudit {
    let mut findings = Vec::new();
    let mut gaps: BTreeMap<LevelCase, (usize, Option<Rational>, Option<Rational>)> = BTreeMap::new();
    let mut brackets_checked = 0usize;
    let mut fault_pending = fault == Some(Fault::FlipGapBound);
    for n in 1..=tree.depth() {
        let level = tree.level(n);
        for (idx, pair) in level.windows(2).enumerate() {
            if !pair[0].interval.is_disjoint(&pair[1].interval) || pair[0].interval.left >= pair[1].interval.left {
                findings.push(Finding::new(
                    FindingKind::Overlap,
                    Some(n),
                    tree.word(n, idx).to_string(),
                    format!("{} meets or follows {}", pair[0].interval, pair[1].interval),
                ));
            }
        }
        for (idx, node) in level.iter().enumerate() {
            let parent = tree.node(n - 1, node.parent);
            let word = tree.word(n, idx);
            if !parent.interval.closure_contains(&node.interval) {
                findings.push(Finding::new(
                    FindingKind::Nesting,
                    Some(n),
                    word.to_string(),
                    format!("{} not inside parent {}", node.interval, parent.interval),
                ));
            }
            let length = node.interval.length();
            for bracket in construction.length_brackets(&word, node.case()) {
                brackets_checked += 1;
                if !bracket.holds(&length) {
                    findings.push(Finding::new(
                        FindingKind::LengthBracket,
                        Some(n),
                        word.to_string(),
                        format!(
                            "{}: length {:.6e} outside [{:.6e}, {:.6e}]",
                            bracket.label,
                            arith::to_f64(&length),
                            bracket.lower.to_f64(),
                            bracket.upper.to_f64()
                        ),
                    ));
                }
            }
            let mut report = match sibling_gap(construction, tree, n, idx, &word) {
                Ok(r) => r,
                Err(GeometryError::NoSibling(_)) => continue,
                Err(e) => {
                    findings.push(Finding::new(FindingKind::Error, Some(n), word.to_string(), e.to_string()));
                    continue;
                }
            };
            if fault_pending && report.promised_lower_bound.is_some() {
                report.promised_lower_bound = Some(&report.min_gap * arith::int(2) + &report.length);
                fault_pending = false;
            }
            let entry = gaps.entry(report.case_tag).or_insert((0, None, None));
            entry.0 += 1;
            if entry.1.as_ref().is_none_or(|m| &report.ratio_to_length < m) {
                entry.1 = Some(report.ratio_to_length.clone());
            }
            entry.2 = construction.gap_factor(report.case_tag);
            if !report.bound_holds() {
                findings.push(Finding::new(
                    FindingKind::Gap,
                    Some(n),
                    word.to_string(),
                    format!(
                        "case {}: gap {:.6e} below bound {:.6e}",
                        report.case_tag,
                        arith::to_f64(&report.min_gap),
                        report.promised_lower_bound.as_ref().map_or(f64::NAN, arith::to_f64)
                    ),
                ));
            }
        }
    }
    GeometryAudit {
        depth: tree.depth(),
        nodes: tree.node_count(),
        gaps: gaps
            .into_iter()
            .map(|(case, (checked, min, promised))| GapStat {
                case,
                checked,
                min_ratio: min.as_ref().map_or(f64::NAN, arith::to_f64),
                promised: promised.as_ref().map(arith::to_f64),
            })
            .collect(),
        brackets_checked,
        findings,
    }
}

/// Gap report of node `idx` at level `n`. Siblings admitted by the parent
/// are adjacent in the tree, so their intervals are read from there; forced
/// parents fall back to [`gap_exact`] and its virtual siblings.
fn sibling_gap<C: Construction + ?Sized>(
    construction: &C,
    tree: &LevelTree,
    n: usize,
    idx: usize,
    word: &CfWord,
) -> Result<GapReport, GeometryError> {
    let node = tree.node(n, idx);
    let parent = tree.node(n - 1, node.parent);
    if parent.rule.lo == parent.rule.hi {
        return gap_exact(word, construction);
    }
    let own = &node.interval;
    let mut left_gap = None;
    let mut right_gap = None;
    let range = parent.children.clone();
    for j in [idx.wrapping_sub(1), idx + 1] {
        if !range.contains(&j) {
            continue;
        }
        let sib = &tree.node(n, j).interval;
        if sib.left >= own.right {
            right_gap = Some(&sib.left - &own.right);
        } else if sib.right <= own.left {
            left_gap = Some(&own.left - &sib.right);
        } else {
            return Err(GeometryError::Overlap(word.to_string()));
        }
    }
    let min_gap = match (&left_gap, &right_gap) {
        (Some(l), Some(r)) => arith::min_rational(l, r).clone(),
        (Some(g), None) | (None, Some(g)) => g.clone(),
        (None, None) => return Err(GeometryError::NoSibling(word.to_string())),
    };
    let length = own.length();
    let promised_lower_bound = construction.gap_factor(node.case()).map(|f| f * &length);
    let ratio_to_length = &min_gap / &length;
    Ok(GapReport {
        word: word.clone(),
        case_tag: node.case(),
        left_gap,
        right_gap,
        min_gap,
        length,
        promised_lower_bound,
        ratio_to_length,
        virtual_neighbours: false,
    })
}

/// Mass conservation at every level of the measure tree.
pub fn normalization_findings(measure: &MeasureTree) -> Vec<Finding> {
    (0..=measure.depth())
        .map(|n| normalization_audit(measure, n))
        .filter(|r| !r.passed)
        .map(|r| {
            Finding::new(
                FindingKind::Normalization,
                Some(r.level),
                format!("level {} ({})", r.level, r.role),
                format!(
                    "total error {:.3e}, parent error {:.3e}, min mass {:.3e}",
                    r.total_error, r.max_parent_error, r.min_mass
                ),
            )
        })
        .collect()
}

/// Sampled words of the schedule checked against the inclusion chain for
/// `Ψ(q) = q^τ`.
pub fn inclusion_findings(
    schedule: &CantorSchedule,
    depth: usize,
    samples: usize,
    seed: u64,
) -> Result<Vec<Finding>, ConstructionError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let words = (0..samples)
        .map(|_| sample_point_with(schedule, depth, &mut rng))
        .collect::<Result<Vec<_>, _>>()?;
    let spec = PsiSpec::power(schedule.tau().clone());
    Ok(inclusion_audit(&words, &spec)
        .violations
        .into_iter()
        .map(|v| {
            Finding::new(
                FindingKind::Inclusion,
                v.index,
                v.word.to_string(),
                v.rule,
            )
        })
        .collect())
}

/// Interval Hölder slope over the block levels and the four-interval bound.
pub fn holder_findings(measure: &MeasureTree, margin: f64, seed: u64) -> Vec<Finding> {
    let mut findings = Vec::new();
    let target = measure.solution().holder_target();
    let levels: Vec<usize> = (1..=measure.depth()).collect();
    match holder_audit_intervals(measure, &levels, target, margin) {
        Ok(audit) if !audit.slope_ok => findings.push(Finding::new(
            FindingKind::Holder,
            None,
            "interval audit",
            format!("slope {:.4} below target {:.4} - {margin}", audit.fitted_slope, target),
        )),
        Ok(_) | Err(DimensionError::InsufficientData(_)) => {}
        Err(e) => findings.push(Finding::new(FindingKind::Error, None, "interval audit", e.to_string())),
    }
    let report = four_interval_check(measure, 32, seed);
    for v in report.violations {
        findings.push(Finding::new(
            FindingKind::FourInterval,
            Some(v.level),
            v.word,
            format!("ball of radius {:.3e} meets {} basic intervals", v.radius, v.count),
        ));
    }
    findings
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditOptions {
    pub depth: usize,
    pub node_budget: usize,
    pub inclusion_samples: usize,
    pub margin: f64,
    pub seed: u64,
    pub fault: Option<Fault>,
}

impl Default for AuditOptions {
    fn default() -> Self {
        AuditOptions {
            depth: 6,
            node_budget: 2_000_000,
            inclusion_samples: 200,
            margin: crate::dimension::DEFAULT_MARGIN,
            seed: 0,
            fault: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditRun {
    pub geometry: GeometryAudit,
    pub findings: Vec<Finding>,
}

/// Every audit on one schedule and its measure.
pub fn full_audit(measure: &MeasureTree, options: &AuditOptions) -> Result<AuditRun, ConstructionError> {
    let geometry = geometry_audit(measure.schedule(), measure.tree(), options.fault);
    let mut findings = geometry.findings.clone();
    findings.extend(normalization_findings(measure));
    findings.extend(inclusion_findings(
        measure.schedule(),
        measure.depth().max(1),
        options.inclusion_samples,
        options.seed,
    )?);
    findings.extend(holder_findings(measure, options.margin, options.seed));
    Ok(AuditRun { geometry, findings })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::int;
    use crate::cantor::BoundedType;
    use crate::pressure::{assign_measure, solve_s};

    fn small_measure() -> MeasureTree {
        let schedule = CantorSchedule::new(3, 2, int(1), vec![1]).unwrap();
        let sol = solve_s(2, 3, &int(1), 1e-10).unwrap();
        assign_measure(&schedule, &sol, 5, 1_000_000).unwrap()
    }

    #[test]
    fn bounded_type_geometry_is_clean() {
        let c = BoundedType::new(3).unwrap();
        let tree = LevelTree::build(&c, 5, 100_000).unwrap();
        let audit = geometry_audit(&c, &tree, None);
        assert!(audit.findings.is_empty(), "{:?}", audit.findings);
    }

    #[test]
    fn sibling_gaps_match_exact_gaps() {
        let s = CantorSchedule::new(3, 2, int(1), vec![1]).unwrap();
        let tree = LevelTree::build(&s, 5, 100_000).unwrap();
        for n in 1..=5 {
            for idx in 0..tree.level(n).len() {
                let word = tree.word(n, idx);
                let fast = sibling_gap(&s, &tree, n, idx, &word);
                let exact = gap_exact(&word, &s);
                match (fast, exact) {
                    (Ok(a), Ok(b)) => assert_eq!(a.min_gap, b.min_gap, "{word}"),
                    (Err(_), Err(_)) => {}
                    (a, b) => panic!("{word}: {a:?} vs {b:?}"),
                }
            }
        }
    }

    #[test]
    fn injected_fault_yields_one_finding() {
        let c = BoundedType::new(3).unwrap();
        let tree = LevelTree::build(&c, 4, 100_000).unwrap();
        let audit = geometry_audit(&c, &tree, Some(Fault::FlipGapBound));
        assert_eq!(audit.findings.len(), 1);
        assert_eq!(audit.findings[0].kind, FindingKind::Gap);
    }

    #[test]
    fn small_schedule_has_no_findings() {
        let run = full_audit(&small_measure(), &AuditOptions::default()).unwrap();
        assert!(run.findings.is_empty(), "{:#?}", run.findings);
        let line = Finding::new(FindingKind::Gap, Some(2), "[1,2]", "x").to_json_line();
        assert!(line.starts_with("{\"kind\":\"gap\""));
    }
}
