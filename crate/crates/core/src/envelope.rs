//! Concave envelope `Ũ` of a piecewise utility, built by sweeping the dual
//! slope from steep to flat and tracking which piece maximizes `U(x) − s·x`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::utility::{Curvature, LowerBoundType, PieceForm, PiecewiseUtility};

const SLOPE_TOL: f64 = 1e-12;
const BIG: f64 = 1e200;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SegmentKind {
    /// `Ũ = U` along piece `piece`.
    Touch { piece: usize },
    /// `Ũ(x) = slope·x + intercept`, strictly above `U` inside.
    Bridge { intercept: f64 },
}

/// A maximal stretch of the envelope. On a touch segment the envelope
/// slopes run from `slope_hi` at `x_lo` down to `slope_lo` at `x_hi`; on a
/// bridge both are the bridge slope.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Segment {
    pub kind: SegmentKind,
    pub x_lo: f64,
    pub x_hi: f64,
    pub slope_hi: f64,
    pub slope_lo: f64,
}

impl Segment {
    pub fn is_bridge(&self) -> bool {
        matches!(self.kind, SegmentKind::Bridge { .. })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConcaveEnvelope {
    source: PiecewiseUtility,
    segments: Vec<Segment>,
    top_slope: f64,
    floor_slope: f64,
    residual: f64,
}

#[derive(Debug, Clone, Copy)]
struct Prim {
    piece: usize,
    a: f64,
    e: f64,
    form: PieceForm,
    point: bool,
}

impl Prim {
    fn argmax(&self, s: f64) -> (f64, f64) {
        if self.point {
            return (self.a, self.a);
        }
        match self.form.curvature() {
            Curvature::Linear => {
                let m = self.form.deriv(0.0);
                let tol = SLOPE_TOL * m.abs().max(1.0);
                if s > m + tol {
                    (self.a, self.a)
                } else if s < m - tol {
                    (self.e, self.e)
                } else {
                    (self.a, self.e)
                }
            }
            _ => {
                let x = self.form.inverse_deriv(s).clamp(self.a, self.e);
                (x, x)
            }
        }
    }

    fn value(&self, s: f64) -> f64 {
        let (lo, hi) = self.argmax(s);
        let x = if lo.is_finite() { lo } else { hi };
        if x.is_finite() {
            return self.form.eval(x) - s * x;
        }
        if let PieceForm::Affine { intercept, .. } = self.form {
            if lo == f64::NEG_INFINITY && hi == f64::INFINITY {
                return intercept;
            }
        }
        if let PieceForm::Constant { value } = self.form {
            if lo == f64::NEG_INFINITY && hi == f64::INFINITY {
                return value;
            }
        }
        f64::INFINITY
    }

    fn slope_breaks(&self) -> Vec<f64> {
        if self.point {
            return Vec::new();
        }
        let mut v = match self.form.curvature() {
            Curvature::Linear => vec![self.form.deriv(0.0)],
            _ => {
                let da = if self.a.is_finite() { self.form.deriv(self.a) } else { f64::INFINITY };
                let de = if self.e.is_finite() { self.form.deriv(self.e) } else { 0.0 };
                vec![da, de]
            }
        };
        v.retain(|s| s.is_finite() && *s > 0.0);
        v
    }
}

fn primitives(u: &PiecewiseUtility) -> Vec<Prim> {
    let mut out = Vec::new();
    for (i, p) in u.pieces().iter().enumerate() {
        let e = u.end(i);
        match p.form {
            PieceForm::PowerDown { .. } => {
                if p.start.is_finite() {
                    out.push(Prim { piece: i, a: p.start, e: p.start, form: p.form, point: true });
                }
            }
            _ => out.push(Prim { piece: i, a: p.start, e, form: p.form, point: false }),
        }
    }
    out
}

fn left_tail_slope(u: &PiecewiseUtility) -> f64 {
    let p = u.pieces()[0];
    match p.form {
        PieceForm::Affine { slope, .. } => slope,
        PieceForm::Constant { .. } | PieceForm::PowerDown { .. } => 0.0,
        _ => f64::INFINITY,
    }
}

fn vtol(v: f64) -> f64 {
    1e-12 * v.abs().max(1.0)
}

/// Largest `s ≤ s_hi` (and `≥ s_floor`) at which primitive `j` catches up
/// with the active primitive `c`; `None` if it never does.
fn handover(c: &Prim, j: &Prim, s_hi: f64, s_floor: f64, residual: &mut f64) -> Option<f64> {
    let d = |s: f64| {
        let vc = c.value(s);
        let vj = j.value(s);
        if vj == f64::INFINITY && vc.is_finite() {
            f64::INFINITY
        } else {
            vj - vc
        }
    };
    let tol_at = |s: f64| vtol(c.value(s));
    let mut hi = s_hi;
    if hi == f64::INFINITY {
        let mut t = c
            .slope_breaks()
            .into_iter()
            .chain(j.slope_breaks())
            .fold(1.0f64, f64::max)
            .max(s_floor * 2.0 + 1.0);
        let mut k = 0;
        while d(t) >= 0.0 && k < 2000 {
            t *= 2.0;
            k += 1;
        }
        if d(t) >= 0.0 {
            return Some(f64::INFINITY);
        }
        hi = t;
    } else {
        let dh = d(hi);
        if dh >= -tol_at(hi) {
            return Some(s_hi);
        }
    }
    let df = d(s_floor);
    if df < 0.0 {
        if df >= -tol_at(s_floor) {
            return Some(s_floor);
        }
        return None;
    }
    let mut lo = s_floor;
    let mut breaks: Vec<f64> = c
        .slope_breaks()
        .into_iter()
        .chain(j.slope_breaks())
        .filter(|s| *s > lo && *s < hi)
        .collect();
    breaks.sort_by(f64::total_cmp);
    for b in breaks {
        let v = d(b);
        if v >= 0.0 {
            lo = b;
        } else {
            hi = b;
            break;
        }
    }
    if lo == 0.0 && d(0.0) > tol_at(0.0) {
        let mut t = hi * 0.5;
        let mut k = 0;
        while d(t) < 0.0 && k < 4000 {
            hi = t;
            t *= 0.5;
            k += 1;
        }
        lo = t;
    }
    if d(lo) <= tol_at(lo) {
        let exact = d(lo) >= 0.0;
        let (mut l2, mut h2) = (lo, hi);
        for _ in 0..200 {
            let m = 0.5 * (l2 + h2);
            if m <= l2 || m >= h2 {
                break;
            }
            let v = d(m);
            if (exact && v >= 0.0) || (!exact && v >= -tol_at(m)) {
                l2 = m;
            } else {
                h2 = m;
            }
        }
        return Some(l2);
    }
    let s = safeguarded_newton(c, j, lo, hi, &d);
    let r = d(s).abs();
    if r.is_finite() {
        *residual = residual.max(r / c.value(s).abs().max(1.0));
    }
    Some(s)
}

fn safeguarded_newton(c: &Prim, j: &Prim, mut lo: f64, mut hi: f64, d: &impl Fn(f64) -> f64) -> f64 {
    let mut s = if lo > 0.0 && hi / lo > 4.0 { (lo * hi).sqrt() } else { 0.5 * (lo + hi) };
    for _ in 0..400 {
        let v = d(s);
        if v.abs() <= 1e-13 * c.value(s).abs().max(1.0) {
            return s;
        }
        if v >= 0.0 {
            lo = s;
        } else {
            hi = s;
        }
        let xc = c.argmax(s).1;
        let xj = j.argmax(s).0;
        let slope = xc - xj;
        let step = s - v / slope;
        s = if slope < 0.0 && step.is_finite() && step > lo && step < hi {
            step
        } else if lo > 0.0 && hi / lo > 4.0 {
            (lo * hi).sqrt()
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= 4.0 * f64::EPSILON * hi {
            break;
        }
    }
    if d(hi).abs() < d(lo).abs() {
        hi
    } else {
        lo
    }
}

/// Concave envelope of `u`.
pub fn concavify(u: &PiecewiseUtility) -> Result<ConcaveEnvelope> {
    let prims = primitives(u);
    if prims.is_empty() {
        return Err(Error::NoConcavification("no piece carries a finite value".into()));
    }
    let floor = u.asymptotic_slope();
    let lower = u.lower_bound();
    let top = if lower.is_finite() { f64::INFINITY } else { left_tail_slope(u) };
    if top < floor {
        return Err(Error::NoConcavification(format!(
            "left slope {top} is below the tail slope {floor}"
        )));
    }
    let mut segments = Vec::new();
    let mut residual = 0.0f64;
    let mut active;
    let mut seg_x;
    if lower.is_finite() {
        active = 0;
        seg_x = prims[0].argmax(f64::INFINITY).0;
    } else {
        let vals: Vec<f64> = prims.iter().map(|p| p.value(top)).collect();
        if vals.iter().any(|v| *v == f64::INFINITY) {
            return Err(Error::NoConcavification(
                "no line with the left-tail slope dominates the utility".into(),
            ));
        }
        let vmax = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        active = vals.iter().position(|v| *v >= vmax - vtol(vmax)).unwrap_or(0);
        seg_x = prims[active].argmax(top).0;
        if seg_x > f64::NEG_INFINITY {
            segments.push(Segment {
                kind: SegmentKind::Bridge { intercept: vmax },
                x_lo: f64::NEG_INFINITY,
                x_hi: seg_x,
                slope_hi: top,
                slope_lo: top,
            });
        }
    }
    let mut s_cur = top;
    let mut seg_slope = top;
    loop {
        let c = prims[active];
        let mut cands: Vec<(usize, f64)> = Vec::new();
        for (k, pj) in prims.iter().enumerate().skip(active + 1) {
            if let Some(s) = handover(&c, pj, s_cur, floor, &mut residual) {
                cands.push((k, s));
            }
        }
        if cands.is_empty() {
            break;
        }
        let smax = cands.iter().map(|c| c.1).fold(f64::NEG_INFINITY, f64::max);
        if smax == f64::INFINITY {
            return Err(Error::NoConcavification("unbounded envelope slope".into()));
        }
        let tie = SLOPE_TOL * smax.abs().max(1.0);
        let ties: Vec<usize> = cands.iter().filter(|c| c.1 >= smax - tie).map(|c| c.0).collect();
        let hi_x = c.argmax(smax).1;
        segments.push(Segment {
            kind: SegmentKind::Touch { piece: c.piece },
            x_lo: seg_x,
            x_hi: hi_x,
            slope_hi: seg_slope,
            slope_lo: smax,
        });
        let mut prev_x = hi_x;
        let line_v = c.value(smax);
        let last = *ties.last().unwrap();
        for &k in &ties {
            let (lo_k, hi_k) = prims[k].argmax(smax);
            if lo_k > prev_x {
                segments.push(Segment {
                    kind: SegmentKind::Bridge { intercept: line_v },
                    x_lo: prev_x,
                    x_hi: lo_k,
                    slope_hi: smax,
                    slope_lo: smax,
                });
            }
            if k != last {
                if hi_k > prev_x || lo_k > prev_x {
                    segments.push(Segment {
                        kind: SegmentKind::Touch { piece: prims[k].piece },
                        x_lo: lo_k,
                        x_hi: hi_k,
                        slope_hi: smax,
                        slope_lo: smax,
                    });
                }
                prev_x = prev_x.max(hi_k);
            } else {
                seg_x = lo_k;
            }
        }
        active = last;
        s_cur = smax;
        seg_slope = smax;
    }
    let c = prims[active];
    let hi_x = c.argmax(floor).1;
    segments.push(Segment {
        kind: SegmentKind::Touch { piece: c.piece },
        x_lo: seg_x,
        x_hi: hi_x,
        slope_hi: seg_slope,
        slope_lo: floor,
    });
    if hi_x < f64::INFINITY {
        segments.push(Segment {
            kind: SegmentKind::Bridge { intercept: c.value(floor) },
            x_lo: hi_x,
            x_hi: f64::INFINITY,
            slope_hi: floor,
            slope_lo: floor,
        });
    }
    Ok(ConcaveEnvelope {
        source: u.clone(),
        segments,
        top_slope: top,
        floor_slope: floor,
        residual,
    })
}

impl ConcaveEnvelope {
    pub fn source(&self) -> &PiecewiseUtility {
        &self.source
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    /// Steepest envelope slope (`+∞` when the lower bound is finite).
    pub fn top_slope(&self) -> f64 {
        self.top_slope
    }

    /// Asymptotic slope `α`.
    pub fn floor_slope(&self) -> f64 {
        self.floor_slope
    }

    /// Largest relative tangency residual met while building the envelope.
    pub fn tangency_residual(&self) -> f64 {
        self.residual
    }

    pub fn bridges(&self) -> impl Iterator<Item = &Segment> {
        self.segments.iter().filter(|s| s.is_bridge())
    }

    /// Segment containing `x`, preferring touch segments at shared ends.
    pub fn segment_at(&self, x: f64) -> Option<&Segment> {
        let mut found: Option<&Segment> = None;
        for s in &self.segments {
            if x >= s.x_lo && x <= s.x_hi {
                let interior = x > s.x_lo && x < s.x_hi;
                if interior || !s.is_bridge() {
                    return Some(s);
                }
                found.get_or_insert(s);
            }
        }
        found
    }

    pub fn eval(&self, x: f64) -> f64 {
        let lo = self.source.lower_bound();
        if x.is_nan() {
            return f64::NAN;
        }
        if x < lo || (x == lo && self.source.lower_type() == LowerBoundType::Open) {
            return f64::NEG_INFINITY;
        }
        if x == f64::INFINITY {
            return match self.segments.last() {
                Some(Segment { kind: SegmentKind::Bridge { intercept }, slope_lo, .. }) => {
                    if *slope_lo > 0.0 {
                        f64::INFINITY
                    } else {
                        *intercept
                    }
                }
                _ => self.source.sup(),
            };
        }
        match self.segment_at(x) {
            Some(Segment { kind: SegmentKind::Bridge { intercept }, slope_lo, .. }) => {
                intercept + slope_lo * x
            }
            Some(Segment { kind: SegmentKind::Touch { piece }, .. }) => {
                self.source.pieces()[*piece].form.eval(x)
            }
            None => self.source.eval(x),
        }
    }

    /// Sorted distinct positive finite slopes at which the envelope changes
    /// regime (segment slope boundaries).
    pub fn critical_slopes(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self
            .segments
            .iter()
            .flat_map(|s| [s.slope_hi, s.slope_lo])
            .filter(|s| s.is_finite() && *s > 0.0)
            .collect();
        v.sort_by(f64::total_cmp);
        v.dedup_by(|a, b| (*a - *b).abs() <= SLOPE_TOL * a.abs().max(1.0));
        v
    }

    /// Slopes `y` at which the maximizer set of `U − y·x` is not a single
    /// point.
    pub fn jump_slopes(&self) -> Vec<f64> {
        let pieces = self.source.pieces();
        let mut v: Vec<f64> = self
            .segments
            .iter()
            .filter(|s| s.x_hi > s.x_lo)
            .filter_map(|s| match s.kind {
                SegmentKind::Bridge { .. } => Some(s.slope_lo),
                SegmentKind::Touch { piece } => {
                    let f = pieces[piece].form;
                    (f.curvature() == Curvature::Linear).then(|| f.deriv(0.0))
                }
            })
            .filter(|s| s.is_finite() && *s > 0.0)
            .collect();
        v.sort_by(f64::total_cmp);
        v.dedup_by(|a, b| (*a - *b).abs() <= SLOPE_TOL * a.abs().max(1.0));
        v
    }

    /// Gap functions relaxed by `1/n`; `None` gives the exact `H`, `G`.
    pub fn gap_functions(&self, n: Option<u32>) -> GapFunctions<'_> {
        GapFunctions {
            env: self,
            eps: match n {
                Some(k) => 1.0 / k.max(1) as f64,
                None => 0.0,
            },
        }
    }
}

/// `H_n`, `G_n` and `Ĥ^{(n)}` on a fixed envelope.
#[derive(Debug, Clone, Copy)]
pub struct GapFunctions<'a> {
    env: &'a ConcaveEnvelope,
    eps: f64,
}

#[derive(Clone, Copy)]
struct GapPiece {
    form: PieceForm,
    slope: f64,
    intercept: f64,
}

impl GapPiece {
    fn gap(&self, x: f64) -> f64 {
        self.slope * x + self.intercept - self.form.eval(x)
    }

    /// Monotone sub-intervals of the gap on `[lo, hi]`.
    fn monotone_parts(&self, lo: f64, hi: f64) -> Vec<(f64, f64)> {
        let split = match self.form.curvature() {
            Curvature::Linear => None,
            _ => Some(self.form.inverse_deriv(self.slope)),
        };
        match split {
            Some(m) if m > lo && m < hi => vec![(lo, m), (m, hi)],
            _ => vec![(lo, hi)],
        }
    }

    fn crossing(&self, u: f64, v: f64, c: f64, want_low_side: bool) -> f64 {
        let below_u = self.gap(u) <= c;
        let (mut a, mut b) = (u, v);
        for _ in 0..300 {
            let m = 0.5 * (a + b);
            if m <= a || m >= b {
                break;
            }
            if (self.gap(m) <= c) == below_u {
                a = m;
            } else {
                b = m;
            }
        }
        if want_low_side == below_u {
            a
        } else {
            b
        }
    }

    fn last_within(&self, lo: f64, hi: f64, c: f64) -> Option<f64> {
        for (u, v) in self.monotone_parts(lo, hi).into_iter().rev() {
            let (gu, gv) = (self.gap(u), self.gap(v));
            if gv <= c {
                return Some(v);
            }
            if gu <= c {
                return Some(self.crossing(u, v, c, true));
            }
        }
        None
    }

    fn first_within(&self, lo: f64, hi: f64, c: f64) -> Option<f64> {
        for (u, v) in self.monotone_parts(lo, hi) {
            let (gu, gv) = (self.gap(u), self.gap(v));
            if gu <= c {
                return Some(u);
            }
            if gv <= c {
                return Some(self.crossing(u, v, c, true));
            }
        }
        None
    }

    fn first_above(&self, lo: f64, hi: f64, c: f64) -> Option<f64> {
        for (u, v) in self.monotone_parts(lo, hi) {
            let (gu, gv) = (self.gap(u), self.gap(v));
            if gu > c {
                return Some(u);
            }
            if gv > c {
                return Some(self.crossing(u, v, c, true));
            }
        }
        None
    }
}

fn finite(x: f64) -> f64 {
    x.clamp(-BIG, BIG)
}

fn unfinite(x: f64) -> f64 {
    if x <= -BIG {
        f64::NEG_INFINITY
    } else if x >= BIG {
        f64::INFINITY
    } else {
        x
    }
}

impl GapFunctions<'_> {
    fn bridge_at(&self, t: f64) -> Option<(f64, f64, f64, f64)> {
        match self.env.segment_at(t) {
            Some(Segment { kind: SegmentKind::Bridge { intercept }, x_lo, x_hi, slope_lo, .. })
                if t > *x_lo && t < *x_hi =>
            {
                Some((*x_lo, *x_hi, *slope_lo, *intercept))
            }
            _ => None,
        }
    }

    fn pieces_in(&self, lo: f64, hi: f64, slope: f64, intercept: f64) -> Vec<(f64, f64, GapPiece)> {
        let u = self.env.source();
        u.pieces()
            .iter()
            .enumerate()
            .filter_map(|(i, p)| {
                let a = p.start.max(lo);
                let b = u.end(i).min(hi);
                (b >= a).then(|| {
                    (finite(a), finite(b), GapPiece { form: p.form, slope, intercept })
                })
            })
            .collect()
    }

    /// `sup{x ≤ t: Ũ(x) ≤ U(x) + 1/n}`.
    pub fn h(&self, t: f64) -> f64 {
        let Some((xl, _, s, c)) = self.bridge_at(t) else {
            return t;
        };
        if self.eps == 0.0 {
            return xl;
        }
        for (a, b, gp) in self.pieces_in(xl, t, s, c).into_iter().rev() {
            if let Some(x) = gp.last_within(a, b, self.eps) {
                return unfinite(x);
            }
        }
        xl
    }

    /// `inf{x ≥ t: Ũ(x) ≤ U(x) + 1/n}`.
    pub fn g(&self, t: f64) -> f64 {
        let Some((_, xr, s, c)) = self.bridge_at(t) else {
            return t;
        };
        if self.eps == 0.0 {
            return xr;
        }
        for (a, b, gp) in self.pieces_in(t, xr, s, c) {
            if let Some(x) = gp.first_within(a, b, self.eps) {
                return unfinite(x);
            }
        }
        xr
    }

    /// `inf{t: H_n(t) < t}`, the first point where the gap exceeds `1/n`.
    pub fn h_hat(&self) -> f64 {
        for seg in self.env.segments() {
            if let SegmentKind::Bridge { intercept } = seg.kind {
                for (a, b, gp) in self.pieces_in(seg.x_lo, seg.x_hi, seg.slope_lo, intercept) {
                    if let Some(x) = gp.first_above(a, b, self.eps) {
                        return unfinite(x);
                    }
                }
            }
        }
        f64::INFINITY
    }
}

/// True when every relaxed gap function stays finite on a probe grid.
pub fn check_good_concavification(e: &ConcaveEnvelope) -> bool {
    let mut probes = Vec::new();
    for s in e.segments() {
        if s.is_bridge() {
            let (a, b) = (s.x_lo, s.x_hi);
            match (a.is_finite(), b.is_finite()) {
                (true, true) => {
                    for k in 1..8 {
                        probes.push(a + (b - a) * k as f64 / 8.0);
                    }
                }
                (false, true) => probes.extend([b - 1e-3, b - 1.0, b - 10.0, b - 1e3, b - 1e6]),
                (true, false) => probes.extend([a + 1e-3, a + 1.0, a + 10.0, a + 1e3, a + 1e6]),
                _ => probes.push(0.0),
            }
        }
    }
    let ns = [Some(1), Some(2), Some(8), Some(64), Some(1024), None];
    probes.iter().all(|&t| {
        ns.iter().all(|&n| {
            let gf = e.gap_functions(n);
            gf.h(t).is_finite() && gf.g(t).is_finite()
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::utility::{Digital, Piece, SShaped, TwoPiece, UtilityFamily};

    fn identity_with_hole() -> PiecewiseUtility {
        PiecewiseUtility::new(vec![
            Piece { start: f64::NEG_INFINITY, form: PieceForm::Affine { slope: 1.0, intercept: 0.0 } },
            Piece { start: 0.0, form: PieceForm::Constant { value: 0.0 } },
            Piece { start: 2.0, form: PieceForm::Affine { slope: 1.0, intercept: 0.0 } },
        ])
        .unwrap()
    }

    #[test]
    fn concave_input_has_no_bridge() {
        let u = TwoPiece.utility(&[]).unwrap();
        let e = concavify(&u).unwrap();
        assert_eq!(e.bridges().count(), 0);
        for x in [0.0, 0.3, 1.0, 2.5, 10.0] {
            assert_eq!(e.eval(x), u.eval(x));
        }
        assert_eq!(e.jump_slopes(), vec![1.0, 2.0]);
    }

    #[test]
    fn hole_is_bridged_by_identity() {
        let e = concavify(&identity_with_hole()).unwrap();
        let b: Vec<_> = e.bridges().collect();
        assert_eq!(b.len(), 1);
        assert_eq!((b[0].x_lo, b[0].x_hi, b[0].slope_lo), (0.0, 2.0, 1.0));
        for x in [-3.0, 0.5, 1.7, 4.0] {
            assert!((e.eval(x) - x).abs() < 1e-12);
        }
    }

    #[test]
    fn s_shaped_tangent_bridge() {
        let u = SShaped::new(2.25, 0.5).unwrap().utility(&[60.0]).unwrap();
        let e = concavify(&u).unwrap();
        let b: Vec<_> = e.bridges().collect();
        assert_eq!(b.len(), 1);
        assert_eq!(b[0].x_lo, 0.0);
        let xr = b[0].x_hi;
        let s = b[0].slope_lo;
        assert!((s * xr + u.eval(0.0) - u.eval(xr)).abs() < 1e-9);
        assert!((0.5 / (xr - 60.0).sqrt() - s).abs() < 1e-9);
        assert!(e.tangency_residual() < 1e-12);
    }

    #[test]
    fn gap_functions_on_hole() {
        let e = concavify(&identity_with_hole()).unwrap();
        let g4 = e.gap_functions(Some(4));
        assert!((g4.h(1.0) - 0.25).abs() < 1e-12);
        assert_eq!(g4.g(1.0), 2.0);
        let exact = e.gap_functions(None);
        assert_eq!((exact.h(1.0), exact.g(1.0)), (0.0, 2.0));
        assert_eq!(g4.h(3.0), 3.0);
        assert!((g4.h_hat() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn good_concavification_flags() {
        let s = concavify(&SShaped::new(2.25, 0.5).unwrap().utility(&[60.0]).unwrap()).unwrap();
        assert!(check_good_concavification(&s));
        let d = concavify(&Digital::default().utility(&[1.0]).unwrap()).unwrap();
        assert!(check_good_concavification(&d));
        let bad = PiecewiseUtility::new(vec![
            Piece {
                start: f64::NEG_INFINITY,
                form: PieceForm::PowerDown { coef: 1.0, shift: 0.0, exponent: 0.5, offset: 0.0 },
            },
            Piece { start: 0.0, form: PieceForm::Constant { value: 2.0 } },
        ])
        .unwrap();
        let e = concavify(&bad).unwrap();
        assert!((e.eval(-5.0) - 2.0).abs() < 1e-12);
        assert_eq!(e.gap_functions(Some(3)).h(-1.0), f64::NEG_INFINITY);
        assert!(!check_good_concavification(&e));
    }

    #[test]
    fn digital_bridge() {
        let e = concavify(&Digital::default().utility(&[1.0]).unwrap()).unwrap();
        let b: Vec<_> = e.bridges().collect();
        assert_eq!(b.len(), 1);
        assert!((b[0].slope_lo - 1.0).abs() < 1e-12);
        assert_eq!((b[0].x_lo, b[0].x_hi), (0.0, 1.0));
    }

    #[test]
    fn affine_tail_not_reached() {
        let u = PiecewiseUtility::new(vec![
            Piece { start: 0.0, form: PieceForm::Constant { value: 0.0 } },
            Piece { start: 10.0, form: PieceForm::Affine { slope: 1.0, intercept: -10.0 } },
        ])
        .unwrap();
        let e = concavify(&u).unwrap();
        let last = e.segments().last().unwrap();
        assert!(last.is_bridge() && last.x_hi == f64::INFINITY && last.slope_lo == 1.0);
        assert!((e.eval(20.0) - 20.0).abs() < 1e-12);
        assert!(!check_good_concavification(&e));
    }
}
