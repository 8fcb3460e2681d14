//! Piecewise-analytic utilities `U(·, b)` and the parametric families built
//! from them.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// One analytic form of a utility piece.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "kebab-case")]
pub enum PieceForm {
    Constant { value: f64 },
    Affine { slope: f64, intercept: f64 },
    /// `coef·(x − shift)^exponent + offset`
    PowerUp { coef: f64, shift: f64, exponent: f64, offset: f64 },
    /// `−coef·(shift − x)^exponent + offset`
    PowerDown { coef: f64, shift: f64, exponent: f64, offset: f64 },
    /// `coef·ln(x − shift) + offset`
    Log { coef: f64, shift: f64, offset: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Curvature {
    Linear,
    Concave,
    Convex,
}

impl PieceForm {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            PieceForm::Constant { value } => value,
            PieceForm::Affine { slope, intercept } => {
                if slope == 0.0 {
                    intercept
                } else {
                    slope * x + intercept
                }
            }
            PieceForm::PowerUp { coef, shift, exponent, offset } => {
                if x == f64::INFINITY {
                    f64::INFINITY
                } else {
                    coef * (x - shift).max(0.0).powf(exponent) + offset
                }
            }
            PieceForm::PowerDown { coef, shift, exponent, offset } => {
                if x == f64::NEG_INFINITY {
                    f64::NEG_INFINITY
                } else {
                    -coef * (shift - x).max(0.0).powf(exponent) + offset
                }
            }
            PieceForm::Log { coef, shift, offset } => {
                let d = x - shift;
                if d <= 0.0 {
                    f64::NEG_INFINITY
                } else {
                    coef * d.ln() + offset
                }
            }
        }
    }

    pub fn deriv(&self, x: f64) -> f64 {
        match *self {
            PieceForm::Constant { .. } => 0.0,
            PieceForm::Affine { slope, .. } => slope,
            PieceForm::PowerUp { coef, shift, exponent, .. } => {
                let d = x - shift;
                if d <= 0.0 {
                    f64::INFINITY
                } else if d == f64::INFINITY {
                    0.0
                } else {
                    coef * exponent * d.powf(exponent - 1.0)
                }
            }
            PieceForm::PowerDown { coef, shift, exponent, .. } => {
                let d = shift - x;
                if d <= 0.0 {
                    f64::INFINITY
                } else if d == f64::INFINITY {
                    0.0
                } else {
                    coef * exponent * d.powf(exponent - 1.0)
                }
            }
            PieceForm::Log { coef, shift, .. } => {
                let d = x - shift;
                if d <= 0.0 {
                    f64::INFINITY
                } else {
                    coef / d
                }
            }
        }
    }

    pub fn curvature(&self) -> Curvature {
        match self {
            PieceForm::Constant { .. } | PieceForm::Affine { .. } => Curvature::Linear,
            PieceForm::PowerUp { .. } | PieceForm::Log { .. } => Curvature::Concave,
            PieceForm::PowerDown { .. } => Curvature::Convex,
        }
    }

    /// Point where the derivative equals `y` on a strictly concave form.
    pub fn inverse_deriv(&self, y: f64) -> f64 {
        match *self {
            PieceForm::PowerUp { coef, shift, exponent, .. } => {
                if y <= 0.0 {
                    f64::INFINITY
                } else if y == f64::INFINITY {
                    shift
                } else {
                    shift + (coef * exponent / y).powf(1.0 / (1.0 - exponent))
                }
            }
            PieceForm::Log { coef, shift, .. } => {
                if y <= 0.0 {
                    f64::INFINITY
                } else {
                    shift + coef / y
                }
            }
            PieceForm::PowerDown { coef, shift, exponent, .. } => {
                if y <= 0.0 {
                    f64::NEG_INFINITY
                } else {
                    shift - (coef * exponent / y).powf(1.0 / (1.0 - exponent))
                }
            }
            _ => f64::NAN,
        }
    }

    /// Limit of the form as `x → +∞`.
    pub fn sup(&self) -> f64 {
        match *self {
            PieceForm::Constant { value } => value,
            PieceForm::Affine { slope, intercept } => {
                if slope > 0.0 {
                    f64::INFINITY
                } else {
                    intercept
                }
            }
            PieceForm::PowerUp { .. } | PieceForm::Log { .. } => f64::INFINITY,
            PieceForm::PowerDown { offset, .. } => offset,
        }
    }

    /// Limit of the derivative as `x → +∞`.
    pub fn tail_slope(&self) -> f64 {
        match *self {
            PieceForm::Affine { slope, .. } => slope,
            _ => 0.0,
        }
    }

    pub fn is_constant(&self) -> bool {
        match *self {
            PieceForm::Constant { .. } => true,
            PieceForm::Affine { slope, .. } => slope == 0.0,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Piece {
    pub start: f64,
    #[serde(flatten)]
    pub form: PieceForm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LowerBoundType {
    Attained,
    Open,
}

/// Nondecreasing right-continuous utility. Piece `i` covers
/// `[start_i, start_{i+1})`, the last piece extends to `+∞`, and the
/// utility is `−∞` left of the first start.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseUtility {
    pieces: Vec<Piece>,
    lower_type: LowerBoundType,
}

impl PiecewiseUtility {
    pub fn new(pieces: Vec<Piece>) -> Result<Self> {
        let lower_type = match pieces.first() {
            Some(Piece { start, form: PieceForm::Log { shift, .. } }) if shift == start => {
                LowerBoundType::Open
            }
            _ => LowerBoundType::Attained,
        };
        let u = Self { pieces, lower_type };
        u.validate()?;
        Ok(u)
    }

    fn validate(&self) -> Result<()> {
        let what = "piecewise utility";
        let n = self.pieces.len();
        if n == 0 {
            return Err(invalid(what, "no pieces"));
        }
        for i in 0..n {
            let p = self.pieces[i];
            let end = self.end(i);
            if p.start.is_nan() || (i > 0 && !p.start.is_finite()) || p.start == f64::INFINITY {
                return Err(invalid(what, format!("piece {i} has an invalid start {}", p.start)));
            }
            if i + 1 < n && !(p.start < end) {
                return Err(invalid(what, "piece starts must be strictly increasing"));
            }
            match p.form {
                PieceForm::Constant { value } => {
                    if !value.is_finite() {
                        return Err(invalid(what, format!("piece {i}: constant must be finite")));
                    }
                }
                PieceForm::Affine { slope, intercept } => {
                    if !(slope >= 0.0 && slope.is_finite() && intercept.is_finite()) {
                        return Err(invalid(what, format!("piece {i}: affine slope must be >= 0")));
                    }
                }
                PieceForm::PowerUp { coef, shift, exponent, offset } => {
                    check_power(i, coef, exponent, offset)?;
                    if !(shift <= p.start) {
                        return Err(invalid(what, format!("piece {i}: power-up shift must be <= start")));
                    }
                }
                PieceForm::PowerDown { coef, shift, exponent, offset } => {
                    check_power(i, coef, exponent, offset)?;
                    if !(shift >= end) || !end.is_finite() {
                        return Err(invalid(what, format!("piece {i}: power-down shift must be >= end")));
                    }
                }
                PieceForm::Log { coef, shift, offset } => {
                    if !(coef > 0.0 && coef.is_finite() && offset.is_finite() && shift.is_finite()) {
                        return Err(invalid(what, format!("piece {i}: log needs coef > 0")));
                    }
                    if !(shift <= p.start) || (shift == p.start && i > 0) {
                        return Err(invalid(what, format!("piece {i}: log shift must be below start")));
                    }
                }
            }
            if i + 1 < n {
                let left = p.form.eval(end);
                let right = self.pieces[i + 1].form.eval(end);
                if left > right + 1e-12 * left.abs().max(1.0) {
                    return Err(invalid(what, format!("decreasing jump at x={end}")));
                }
            }
        }
        if self.lower_type == LowerBoundType::Open && !self.pieces[0].start.is_finite() {
            return Err(invalid(what, "open lower bound must be finite"));
        }
        Ok(())
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    pub fn lower_type(&self) -> LowerBoundType {
        self.lower_type
    }

    /// `x̲ = inf{x: U(x) > −∞}`.
    pub fn lower_bound(&self) -> f64 {
        self.pieces[0].start
    }

    /// Right end of piece `i`.
    pub fn end(&self, i: usize) -> f64 {
        if i + 1 < self.pieces.len() {
            self.pieces[i + 1].start
        } else {
            f64::INFINITY
        }
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        self.pieces.iter().map(|p| p.start).filter(|s| s.is_finite()).collect()
    }

    pub fn piece_index(&self, x: f64) -> Option<usize> {
        if x < self.lower_bound() {
            return None;
        }
        Some(self.pieces.iter().rposition(|p| p.start <= x).unwrap_or(0))
    }

    pub fn eval(&self, x: f64) -> f64 {
        if x.is_nan() {
            return f64::NAN;
        }
        if x == f64::INFINITY {
            return self.sup();
        }
        let lo = self.lower_bound();
        if x < lo || (x == lo && self.lower_type == LowerBoundType::Open) {
            return f64::NEG_INFINITY;
        }
        match self.piece_index(x) {
            Some(i) => self.pieces[i].form.eval(x),
            None => f64::NEG_INFINITY,
        }
    }

    /// `lim_{h↓0} U(x − h)`.
    pub fn left_limit(&self, x: f64) -> f64 {
        if x <= self.lower_bound() {
            return f64::NEG_INFINITY;
        }
        if x == f64::INFINITY {
            return self.sup();
        }
        let i = self.pieces.iter().rposition(|p| p.start < x).unwrap_or(0);
        self.pieces[i].form.eval(x)
    }

    /// `U(+∞)`.
    pub fn sup(&self) -> f64 {
        self.pieces[self.pieces.len() - 1].form.sup()
    }

    /// `α = lim_{x→∞} U'(x)`.
    pub fn asymptotic_slope(&self) -> f64 {
        self.pieces[self.pieces.len() - 1].form.tail_slope()
    }

    /// Bliss point `x̄ = inf{x: U(x) = U(+∞)}`.
    pub fn bliss(&self) -> f64 {
        let sup = self.sup();
        if !sup.is_finite() {
            return f64::INFINITY;
        }
        let mut k = self.pieces.len();
        while k > 0 {
            let p = self.pieces[k - 1];
            if p.form.is_constant() && (p.form.eval(p.start) - sup).abs() <= 1e-15 * sup.abs().max(1.0) {
                k -= 1;
            } else {
                break;
            }
        }
        if k == self.pieces.len() {
            f64::INFINITY
        } else {
            self.pieces[k].start
        }
    }

    pub fn is_concave(&self) -> bool {
        let n = self.pieces.len();
        let mut prev_slope = f64::INFINITY;
        for i in 0..n {
            let p = self.pieces[i];
            if p.form.curvature() == Curvature::Convex {
                return false;
            }
            if i > 0 {
                let jump = p.form.eval(p.start) - self.pieces[i - 1].form.eval(p.start);
                if jump > 1e-12 * p.form.eval(p.start).abs().max(1.0) {
                    return false;
                }
            }
            let d_start = if p.start.is_finite() { p.form.deriv(p.start) } else { p.form.deriv(-1e300) };
            if d_start > prev_slope * (1.0 + 1e-12) + 1e-12 {
                return false;
            }
            let end = self.end(i);
            prev_slope = if end.is_finite() {
                match p.form {
                    PieceForm::PowerUp { .. } | PieceForm::Log { .. } => p.form.deriv(end),
                    _ => p.form.deriv(end),
                }
            } else {
                0.0
            };
        }
        true
    }
}

fn check_power(i: usize, coef: f64, exponent: f64, offset: f64) -> Result<()> {
    if !(coef > 0.0 && coef.is_finite() && exponent > 0.0 && exponent < 1.0 && offset.is_finite()) {
        return Err(invalid(
            "piecewise utility",
            format!("piece {i}: power form needs coef > 0 and 0 < exponent < 1"),
        ));
    }
    Ok(())
}

/// Bound witnesses for the moment conditions that make Case 1 hold:
/// `U(x, b) ≤ u1 + u2·x^δ` for `x > K`, and `γ = U(x̲ + θ, b)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Case1Witness {
    pub u1: f64,
    pub u2: f64,
    pub k: f64,
    pub delta: f64,
    pub theta: f64,
    pub gamma: f64,
}

pub trait UtilityFamily: fmt::Debug + Send + Sync {
    fn name(&self) -> String;

    /// Number of benchmark components the family reads.
    fn benchmark_dim(&self) -> usize;

    fn utility(&self, b: &[f64]) -> Result<PiecewiseUtility>;

    fn asymptotic_slope(&self, b: &[f64]) -> Result<f64> {
        Ok(self.utility(b)?.asymptotic_slope())
    }

    fn bliss(&self, b: &[f64]) -> Result<f64> {
        Ok(self.utility(b)?.bliss())
    }

    fn lower_bound(&self, b: &[f64]) -> Result<f64> {
        Ok(self.utility(b)?.lower_bound())
    }

    fn case1_witness(&self, _b: &[f64]) -> Option<Case1Witness> {
        None
    }
}

fn bench(b: &[f64], i: usize, family: &str) -> Result<f64> {
    b.get(i)
        .copied()
        .filter(|v| v.is_finite())
        .ok_or_else(|| invalid("benchmark", format!("{family} needs a finite component {i}")))
}

/// `(x − b)^p` above the benchmark, `−k(b − x)^p` between 0 and `b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SShaped {
    pub loss_aversion: f64,
    pub exponent: f64,
}

impl SShaped {
    pub fn new(loss_aversion: f64, exponent: f64) -> Result<Self> {
        if !(loss_aversion > 0.0 && exponent > 0.0 && exponent < 1.0) {
            return Err(invalid("s-shaped family", "need k > 0 and 0 < p < 1"));
        }
        Ok(Self { loss_aversion, exponent })
    }

    pub fn pieces(&self, b: f64, bonus_at: Option<(f64, f64)>) -> Vec<Piece> {
        let (k, p) = (self.loss_aversion, self.exponent);
        let mut cuts: Vec<(f64, f64)> = Vec::new();
        if let Some((at, mu)) = bonus_at {
            if mu > 0.0 {
                cuts.push((at.max(0.0), mu));
            }
        }
        let mut starts = vec![0.0];
        if b > 0.0 {
            starts.push(b);
        }
        for (at, _) in &cuts {
            if !starts.contains(at) {
                starts.push(*at);
            }
        }
        starts.sort_by(f64::total_cmp);
        starts
            .into_iter()
            .map(|s| {
                let bonus: f64 = cuts.iter().filter(|(at, _)| *at <= s).map(|(_, m)| m).sum();
                let form = if s < b {
                    PieceForm::PowerDown { coef: k, shift: b, exponent: p, offset: bonus }
                } else {
                    PieceForm::PowerUp { coef: 1.0, shift: b, exponent: p, offset: bonus }
                };
                Piece { start: s, form }
            })
            .collect()
    }
}

impl UtilityFamily for SShaped {
    fn name(&self) -> String {
        "s-shaped".into()
    }

    fn benchmark_dim(&self) -> usize {
        1
    }

    fn utility(&self, b: &[f64]) -> Result<PiecewiseUtility> {
        PiecewiseUtility::new(self.pieces(bench(b, 0, "s-shaped")?, None))
    }

    fn case1_witness(&self, b: &[f64]) -> Option<Case1Witness> {
        let b = b.first().copied()?.max(0.0);
        Some(Case1Witness {
            u1: 0.0,
            u2: 1.0,
            k: 0.0,
            delta: self.exponent,
            theta: b,
            gamma: 0.0,
        })
    }
}

/// S-shaped utility in `b₁` plus a reward `μ` for reaching `b₂`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModifiedSShaped {
    pub base: SShaped,
    pub mu: f64,
}

impl UtilityFamily for ModifiedSShaped {
    fn name(&self) -> String {
        "modified-s-shaped".into()
    }

    fn benchmark_dim(&self) -> usize {
        2
    }

    fn utility(&self, b: &[f64]) -> Result<PiecewiseUtility> {
        let b1 = bench(b, 0, "modified-s-shaped")?;
        let b2 = bench(b, 1, "modified-s-shaped")?;
        PiecewiseUtility::new(self.base.pieces(b1, Some((b2, self.mu))))
    }

    fn case1_witness(&self, b: &[f64]) -> Option<Case1Witness> {
        let b1 = b.first().copied()?.max(0.0);
        let u = self.utility(b).ok()?;
        Some(Case1Witness {
            u1: self.mu,
            u2: 1.0,
            k: 0.0,
            delta: self.base.exponent,
            theta: b1,
            gamma: u.eval(b1),
        })
    }
}

/// `height·1{x ≥ b}` on `[floor, ∞)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Digital {
    pub height: f64,
    pub floor: f64,
}

impl Default for Digital {
    fn default() -> Self {
        Self { height: 1.0, floor: 0.0 }
    }
}

impl UtilityFamily for Digital {
    fn name(&self) -> String {
        "digital".into()
    }

    fn benchmark_dim(&self) -> usize {
        1
    }

    fn utility(&self, b: &[f64]) -> Result<PiecewiseUtility> {
        if !(self.height > 0.0) {
            return Err(invalid("digital family", "height must be positive"));
        }
        let b = bench(b, 0, "digital")?;
        let mut pieces = Vec::new();
        if b > self.floor {
            pieces.push(Piece { start: self.floor, form: PieceForm::Constant { value: 0.0 } });
            pieces.push(Piece { start: b, form: PieceForm::Constant { value: self.height } });
        } else {
            pieces.push(Piece { start: self.floor, form: PieceForm::Constant { value: self.height } });
        }
        PiecewiseUtility::new(pieces)
    }

    fn case1_witness(&self, b: &[f64]) -> Option<Case1Witness> {
        let b = b.first().copied()?;
        Some(Case1Witness {
            u1: self.height,
            u2: 0.0,
            k: 0.0,
            delta: 0.5,
            theta: (b - self.floor).max(0.0),
            gamma: self.height,
        })
    }
}

/// `slope·x` on `[floor, ∞)`; the benchmark is ignored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineFamily {
    pub slope: f64,
    pub floor: f64,
}

impl UtilityFamily for AffineFamily {
    fn name(&self) -> String {
        "affine".into()
    }

    fn benchmark_dim(&self) -> usize {
        0
    }

    fn utility(&self, _b: &[f64]) -> Result<PiecewiseUtility> {
        PiecewiseUtility::new(vec![Piece {
            start: self.floor,
            form: PieceForm::Affine { slope: self.slope, intercept: 0.0 },
        }])
    }
}

/// `2x` on `[0, 1)`, `x + 1` on `[1, ∞)`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TwoPiece;

impl UtilityFamily for TwoPiece {
    fn name(&self) -> String {
        "two-piece".into()
    }

    fn benchmark_dim(&self) -> usize {
        0
    }

    fn utility(&self, _b: &[f64]) -> Result<PiecewiseUtility> {
        PiecewiseUtility::new(vec![
            Piece { start: 0.0, form: PieceForm::Affine { slope: 2.0, intercept: 0.0 } },
            Piece { start: 1.0, form: PieceForm::Affine { slope: 1.0, intercept: 1.0 } },
        ])
    }
}

/// A fixed utility that ignores the benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Custom(pub PiecewiseUtility);

impl UtilityFamily for Custom {
    fn name(&self) -> String {
        "custom-piecewise".into()
    }

    fn benchmark_dim(&self) -> usize {
        0
    }

    fn utility(&self, _b: &[f64]) -> Result<PiecewiseUtility> {
        Ok(self.0.clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverPath {
    /// Power or constant tail: `g` is finite for every `λ > 0`.
    Standard,
    /// Affine tail: the case split depends on `λ₀ = ess-sup α(B)/ξ`.
    AlphaAware,
    /// No finite lower bound: envelope and conjugate only.
    DiagnosticsOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityReport {
    pub lower_bound_finite: bool,
    #[serde(with = "crate::numeric::ext_serde")]
    pub lower_bound: f64,
    pub inada: bool,
    pub alpha: f64,
    #[serde(with = "crate::numeric::ext_serde")]
    pub bliss: f64,
    pub concave: bool,
    pub solver_path: SolverPath,
}

pub fn check_admissibility(u: &PiecewiseUtility) -> Result<AdmissibilityReport> {
    let lower = u.lower_bound();
    let alpha = u.asymptotic_slope();
    if !lower.is_finite() {
        let first = u.pieces()[0];
        let left_slope = match first.form {
            PieceForm::Affine { slope, .. } => slope,
            PieceForm::Constant { .. } => 0.0,
            PieceForm::PowerDown { .. } => f64::INFINITY,
            _ => f64::NAN,
        };
        if left_slope == f64::INFINITY && u.sup() == f64::INFINITY && alpha == 0.0 {
            return Err(Error::RejectUnbounded(
                "power-down left tail with an unbounded right tail".into(),
            ));
        }
        if left_slope < alpha {
            return Err(Error::RejectUnbounded(format!(
                "left tail slope {left_slope} below the right tail slope {alpha}"
            )));
        }
    }
    Ok(AdmissibilityReport {
        lower_bound_finite: lower.is_finite(),
        lower_bound: lower,
        inada: alpha == 0.0,
        alpha,
        bliss: u.bliss(),
        concave: u.is_concave(),
        solver_path: if !lower.is_finite() {
            SolverPath::DiagnosticsOnly
        } else if alpha > 0.0 {
            SolverPath::AlphaAware
        } else {
            SolverPath::Standard
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s60() -> PiecewiseUtility {
        SShaped::new(2.25, 0.5).unwrap().utility(&[60.0]).unwrap()
    }

    #[test]
    fn s_shaped_values() {
        let u = s60();
        assert_eq!(u.eval(60.0), 0.0);
        assert_eq!(u.eval(-1.0), f64::NEG_INFINITY);
        assert!((u.eval(0.0) + 2.25 * 60f64.sqrt()).abs() < 1e-12);
        assert!((u.eval(64.0) - 2.0).abs() < 1e-12);
        assert_eq!(u.eval(f64::INFINITY), f64::INFINITY);
    }

    #[test]
    fn two_piece_right_continuous() {
        let u = TwoPiece.utility(&[]).unwrap();
        assert_eq!(u.eval(1.0), 2.0);
        assert_eq!(u.left_limit(1.0), 2.0);
        assert!(u.is_concave());
    }

    #[test]
    fn admissibility_reports() {
        let r = check_admissibility(&s60()).unwrap();
        assert!(r.lower_bound_finite && r.inada && r.alpha == 0.0);
        assert_eq!(r.solver_path, SolverPath::Standard);
        let a = AffineFamily { slope: 2.0, floor: 1.0 }.utility(&[]).unwrap();
        let r = check_admissibility(&a).unwrap();
        assert!(!r.inada && r.alpha == 2.0);
        assert_eq!(r.solver_path, SolverPath::AlphaAware);
        let d = Digital::default().utility(&[1.0]).unwrap();
        let r = check_admissibility(&d).unwrap();
        assert!(r.inada && r.alpha == 0.0 && r.bliss == 1.0);
    }

    #[test]
    fn rejects_unbounded_left_tail() {
        let u = PiecewiseUtility::new(vec![
            Piece { start: f64::NEG_INFINITY, form: PieceForm::Affine { slope: 0.5, intercept: 0.0 } },
            Piece { start: 0.0, form: PieceForm::Affine { slope: 1.0, intercept: 0.0 } },
        ])
        .unwrap();
        assert!(matches!(check_admissibility(&u), Err(Error::RejectUnbounded(_))));
    }

    #[test]
    fn modified_jump() {
        let f = ModifiedSShaped { base: SShaped::new(2.25, 0.5).unwrap(), mu: 1.0 };
        let u = f.utility(&[60.0, 40.0]).unwrap();
        assert!((u.eval(40.0) - (1.0 - 2.25 * 20f64.sqrt())).abs() < 1e-12);
        assert!((u.left_limit(40.0) + 2.25 * 20f64.sqrt()).abs() < 1e-12);
        assert!((u.eval(39.999) + 2.25 * 20.001f64.sqrt()).abs() < 1e-12);
        let z = ModifiedSShaped { base: SShaped::new(2.25, 0.5).unwrap(), mu: 0.0 };
        assert_eq!(z.utility(&[60.0, 40.0]).unwrap(), s60());
    }

    #[test]
    fn open_lower_bound() {
        let u = PiecewiseUtility::new(vec![Piece {
            start: 0.0,
            form: PieceForm::Log { coef: 1.0, shift: 0.0, offset: 0.0 },
        }])
        .unwrap();
        assert_eq!(u.lower_type(), LowerBoundType::Open);
        assert_eq!(u.eval(0.0), f64::NEG_INFINITY);
        assert!((u.eval(1.0)).abs() < 1e-15);
    }

    #[test]
    fn bliss_merges_equal_constants() {
        let u = PiecewiseUtility::new(vec![
            Piece { start: 0.0, form: PieceForm::Constant { value: 0.0 } },
            Piece { start: 1.0, form: PieceForm::Constant { value: 1.0 } },
            Piece { start: 2.0, form: PieceForm::Constant { value: 1.0 } },
        ])
        .unwrap();
        assert_eq!(u.bliss(), 1.0);
    }

    #[test]
    fn rejects_decreasing() {
        let r = PiecewiseUtility::new(vec![
            Piece { start: 0.0, form: PieceForm::Constant { value: 1.0 } },
            Piece { start: 1.0, form: PieceForm::Constant { value: 0.0 } },
        ]);
        assert!(r.is_err());
    }
}
