//! Conjugate `V(y) = sup_x [U(x) − y·x]` and its maximizer set, read off the
//! envelope's touch segments.

use std::io::Write;

use serde::Serialize;

use crate::envelope::{ConcaveEnvelope, Segment, SegmentKind};
use crate::error::{Error, Result};
use crate::numeric::ext_serde;
use crate::utility::Curvature;

const SLOPE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConjugateSolution {
    #[serde(with = "ext_serde")]
    pub y: f64,
    #[serde(with = "ext_serde")]
    pub value: f64,
    #[serde(with = "ext_serde")]
    pub x_min: f64,
    #[serde(with = "ext_serde")]
    pub x_max: f64,
    pub singleton: bool,
    #[serde(with = "ext_serde::vec")]
    pub interior_touches: Vec<f64>,
    /// The maximizers fill all of `[x_min, x_max]`.
    pub contiguous: bool,
}

fn slope_tol(y: f64) -> f64 {
    SLOPE_TOL * y.abs().max(1.0)
}

/// Calls `visit(lo, hi)` for every touch stretch maximizing `U − y·x`;
/// returns `true` if the maximizer set also reaches `+∞` through a flat
/// tail at `y = α`.
fn visit_maximizers(e: &ConcaveEnvelope, y: f64, mut visit: impl FnMut(f64, f64)) -> bool {
    let tol = slope_tol(y);
    let pieces = e.source().pieces();
    let segs = e.segments();
    for s in segs {
        let SegmentKind::Touch { piece } = s.kind else { continue };
        if y < s.slope_lo - tol || y > s.slope_hi + tol {
            continue;
        }
        let form = pieces[piece].form;
        if s.x_lo == s.x_hi {
            visit(s.x_lo, s.x_lo);
            continue;
        }
        match form.curvature() {
            Curvature::Linear => {
                let m = form.deriv(0.0);
                if (y - m).abs() <= tol {
                    visit(s.x_lo, s.x_hi);
                } else if y > m {
                    visit(s.x_lo, s.x_lo);
                } else {
                    visit(s.x_hi, s.x_hi);
                }
            }
            _ => {
                let x = if y >= s.slope_hi {
                    s.x_lo
                } else if y <= s.slope_lo {
                    s.x_hi
                } else {
                    form.inverse_deriv(y).clamp(s.x_lo, s.x_hi)
                };
                visit(x, x);
            }
        }
    }
    matches!(
        segs.last(),
        Some(Segment { kind: SegmentKind::Bridge { .. }, x_hi, slope_lo, .. })
            if *x_hi == f64::INFINITY && (y - slope_lo).abs() <= tol
    )
}

fn check_dual(y: f64) -> Result<()> {
    if y.is_nan() || y < 0.0 {
        return Err(Error::NegativeDual(y));
    }
    Ok(())
}

/// `(X̲(y), X̄(y))` without building the full solution.
pub fn selection(e: &ConcaveEnvelope, y: f64) -> Result<(f64, f64)> {
    check_dual(y)?;
    if let Some(r) = outside(e, y) {
        return Ok((r.0, r.1));
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let open_tail = visit_maximizers(e, y, |a, b| {
        lo = lo.min(a);
        hi = hi.max(b);
    });
    if open_tail {
        hi = f64::INFINITY;
    }
    if lo > hi {
        return Err(Error::NoConcavification(format!("no maximizer at slope {y}")));
    }
    Ok((lo, hi))
}

/// Maximizers of `U − y·x` as sorted disjoint closed stretches, `+∞`
/// included when the supremum is approached along an unreached tail.
pub fn maximizer_set(e: &ConcaveEnvelope, y: f64) -> Result<Vec<(f64, f64)>> {
    check_dual(y)?;
    if let Some((a, b, _)) = outside(e, y) {
        return Ok(vec![(a, b)]);
    }
    let mut parts: Vec<(f64, f64)> = Vec::new();
    let open_tail = visit_maximizers(e, y, |a, b| parts.push((a, b)));
    if parts.is_empty() {
        return Err(Error::NoConcavification(format!("no maximizer at slope {y}")));
    }
    parts.sort_by(|p, q| p.0.total_cmp(&q.0));
    let mut merged: Vec<(f64, f64)> = Vec::with_capacity(parts.len());
    for (a, b) in parts {
        match merged.last_mut() {
            Some(last) if a <= last.1 => last.1 = last.1.max(b),
            _ => merged.push((a, b)),
        }
    }
    if open_tail && merged.last().is_some_and(|l| l.1 < f64::INFINITY) {
        merged.push((f64::INFINITY, f64::INFINITY));
    }
    Ok(merged)
}

/// `X̲(y)`.
pub fn lower_selection(e: &ConcaveEnvelope, y: f64) -> Result<f64> {
    selection(e, y).map(|s| s.0)
}

/// `X̄(y)`.
pub fn upper_selection(e: &ConcaveEnvelope, y: f64) -> Result<f64> {
    selection(e, y).map(|s| s.1)
}

fn outside(e: &ConcaveEnvelope, y: f64) -> Option<(f64, f64, f64)> {
    let lower = e.source().lower_bound();
    if y == f64::INFINITY {
        let v = if lower.is_finite() { e.source().eval(lower) } else { f64::INFINITY };
        return Some((lower, lower, v));
    }
    if y > e.top_slope() + slope_tol(y) {
        return Some((f64::NEG_INFINITY, f64::NEG_INFINITY, f64::INFINITY));
    }
    if y < e.floor_slope() - slope_tol(y) {
        return Some((f64::INFINITY, f64::INFINITY, f64::INFINITY));
    }
    None
}

pub fn conjugate_at(e: &ConcaveEnvelope, y: f64) -> Result<ConjugateSolution> {
    check_dual(y)?;
    if let Some((a, b, v)) = outside(e, y) {
        return Ok(ConjugateSolution {
            y,
            value: v,
            x_min: a,
            x_max: b,
            singleton: a == b,
            interior_touches: Vec::new(),
            contiguous: true,
        });
    }
    let mut parts: Vec<(f64, f64)> = Vec::new();
    let open_tail = visit_maximizers(e, y, |a, b| parts.push((a, b)));
    if parts.is_empty() {
        return Err(Error::NoConcavification(format!("no maximizer at slope {y}")));
    }
    parts.sort_by(|p, q| p.0.total_cmp(&q.0));
    let x_min = parts[0].0;
    let mut x_max = parts.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let mut contiguous = true;
    let mut reach = parts[0].1;
    for p in &parts[1..] {
        if p.0 > reach {
            contiguous = false;
        }
        reach = reach.max(p.1);
    }
    if open_tail {
        if x_max < f64::INFINITY {
            contiguous = false;
        }
        x_max = f64::INFINITY;
    }
    let mut interior: Vec<f64> = parts
        .iter()
        .flat_map(|p| [p.0, p.1])
        .filter(|x| *x > x_min && *x < x_max)
        .collect();
    interior.sort_by(f64::total_cmp);
    interior.dedup();
    let u = e.source();
    let value = if y == 0.0 {
        u.sup()
    } else if x_min.is_finite() {
        u.eval(x_min) - y * x_min
    } else if x_max.is_finite() {
        u.eval(x_max) - y * x_max
    } else {
        f64::INFINITY
    };
    Ok(ConjugateSolution {
        y,
        value,
        x_min,
        x_max,
        singleton: x_min == x_max,
        interior_touches: interior,
        contiguous,
    })
}

/// One stretch of the selection curves `y ↦ (X̲(y), X̄(y))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CurvePart {
    /// `X` constant at `x` for `y` in `[y_lo, y_hi]`.
    Flat { x: f64, y_lo: f64, y_hi: f64 },
    /// `X(y) = (U')⁻¹(y)` along touch piece `piece`.
    Smooth { piece: usize, y_lo: f64, y_hi: f64 },
    /// Vertical jump at `y`: `X̲(y) = x_lo`, `X̄(y) = x_hi`.
    Jump { y: f64, x_lo: f64, x_hi: f64 },
}

#[derive(Debug, Clone)]
pub struct SelectionCurves {
    env: ConcaveEnvelope,
    parts: Vec<CurvePart>,
}

pub fn selection_curves(e: &ConcaveEnvelope) -> SelectionCurves {
    let pieces = e.source().pieces();
    let mut parts = Vec::new();
    for s in e.segments() {
        match s.kind {
            SegmentKind::Bridge { .. } => parts.push(CurvePart::Jump {
                y: s.slope_lo,
                x_lo: s.x_lo,
                x_hi: s.x_hi,
            }),
            SegmentKind::Touch { piece } => {
                let form = pieces[piece].form;
                if s.x_lo == s.x_hi {
                    parts.push(CurvePart::Flat { x: s.x_lo, y_lo: s.slope_lo, y_hi: s.slope_hi });
                } else if form.curvature() == Curvature::Linear {
                    let m = form.deriv(0.0);
                    if s.slope_hi > m {
                        parts.push(CurvePart::Flat { x: s.x_lo, y_lo: m, y_hi: s.slope_hi });
                    }
                    parts.push(CurvePart::Jump { y: m, x_lo: s.x_lo, x_hi: s.x_hi });
                    if s.slope_lo < m {
                        parts.push(CurvePart::Flat { x: s.x_hi, y_lo: s.slope_lo, y_hi: m });
                    }
                } else {
                    parts.push(CurvePart::Smooth { piece, y_lo: s.slope_lo, y_hi: s.slope_hi });
                }
            }
        }
    }
    SelectionCurves { env: e.clone(), parts }
}

impl SelectionCurves {
    pub fn parts(&self) -> &[CurvePart] {
        &self.parts
    }

    /// Slopes where `X̲ ≠ X̄`.
    pub fn jumps(&self) -> Vec<f64> {
        self.env.jump_slopes()
    }

    pub fn lower(&self, y: f64) -> Result<f64> {
        lower_selection(&self.env, y)
    }

    pub fn upper(&self, y: f64) -> Result<f64> {
        upper_selection(&self.env, y)
    }

    /// CSV with columns `y,x_lower,x_upper`.
    pub fn write_csv<W: Write>(&self, out: W, ys: &[f64]) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Scenario(e.to_string());
        w.write_record(["y", "x_lower", "x_upper"]).map_err(io)?;
        for &y in ys {
            let (a, b) = selection(&self.env, y)?;
            w.write_record([ext_serde::format(y), ext_serde::format(a), ext_serde::format(b)])
                .map_err(io)?;
        }
        w.flush().map_err(|e| Error::Scenario(e.to_string()))?;
        Ok(())
    }
}
