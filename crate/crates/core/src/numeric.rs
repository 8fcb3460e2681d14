//! Quadrature rules, bracketed root finders and extended-real helpers.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};

/// Nodes and weights of a quadrature rule.
#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Gauss–Legendre rule on [-1, 1].
pub fn gauss_legendre(n: usize) -> Rule {
    assert!(n > 0);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = 1.0;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = ((2 * j + 1) as f64 * z * p2 - j as f64 * p3) / (j + 1) as f64;
            }
            pp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
            let dz = p1 / pp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        let w = 2.0 / ((1.0 - z * z) * pp * pp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    Rule { nodes, weights }
}

/// Gauss–Hermite rule for expectations of a standard normal variable:
/// `E[f(Z)] ≈ Σ wᵢ f(xᵢ)`. Nodes come from the Jacobi matrix eigenvalues,
/// polished by Newton steps; weights from the Christoffel sum.
pub fn gauss_hermite_normal(n: usize) -> Rule {
    assert!(n > 0);
    let jacobi = DMatrix::from_fn(n, n, |i, j| {
        if i + 1 == j || j + 1 == i {
            (i.max(j) as f64).sqrt()
        } else {
            0.0
        }
    });
    let mut nodes: Vec<f64> = SymmetricEigen::new(jacobi).eigenvalues.iter().copied().collect();
    nodes.sort_by(f64::total_cmp);
    let mut weights = Vec::with_capacity(n);
    for x in nodes.iter_mut() {
        for _ in 0..3 {
            let (p, dp, _) = hermite_normalized(n, *x);
            if dp != 0.0 && dp.is_finite() {
                *x -= p / dp;
            }
        }
        let (_, _, sum) = hermite_normalized(n, *x);
        weights.push(1.0 / sum);
    }
    let mid = n / 2;
    for i in 0..mid {
        let x = 0.5 * (nodes[n - 1 - i] - nodes[i]);
        let w = 0.5 * (weights[i] + weights[n - 1 - i]);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[mid] = 0.0;
    }
    Rule { nodes, weights }
}

/// Orthonormal probabilists' Hermite value `p_n(x)`, its derivative, and
/// `Σ_{k<n} p_k(x)²`.
fn hermite_normalized(n: usize, x: f64) -> (f64, f64, f64) {
    let mut p_prev = 0.0;
    let mut p = 1.0;
    let mut sum = 0.0;
    for k in 0..n {
        sum += p * p;
        let next = (x * p - (k as f64).sqrt() * p_prev) / ((k + 1) as f64).sqrt();
        p_prev = p;
        p = next;
    }
    (p, (n as f64).sqrt() * p_prev, sum)
}

/// Root of `f` on a bracket `[a, b]` whose endpoint values have opposite
/// signs (or one is zero). Modified regula falsi with a bisection fallback.
pub fn bracketed_root<F: FnMut(f64) -> f64>(
    mut f: F,
    mut a: f64,
    mut b: f64,
    xtol: f64,
    ftol: f64,
) -> f64 {
    let mut fa = f(a);
    let mut fb = f(b);
    if fa == 0.0 {
        return a;
    }
    if fb == 0.0 {
        return b;
    }
    let mut side = 0i8;
    for it in 0..400 {
        let width = (b - a).abs();
        if width <= xtol.max(4.0 * f64::EPSILON * a.abs().max(b.abs())) {
            break;
        }
        let mut c = if it % 4 == 3 || !fa.is_finite() || !fb.is_finite() {
            0.5 * (a + b)
        } else {
            (a * fb - b * fa) / (fb - fa)
        };
        if !c.is_finite() || c <= a.min(b) || c >= a.max(b) {
            c = 0.5 * (a + b);
        }
        let fc = f(c);
        if fc == 0.0 || fc.abs() <= ftol {
            return c;
        }
        if (fc > 0.0) == (fb > 0.0) {
            b = c;
            fb = fc;
            if side == 1 {
                fa *= 0.5;
            }
            side = 1;
        } else {
            a = c;
            fa = fc;
            if side == -1 {
                fb *= 0.5;
            }
            side = -1;
        }
    }
    if fa.abs() < fb.abs() {
        a
    } else {
        b
    }
}

/// Newton's method kept inside the bracket `[a, b]`; `fdf` returns the value
/// and derivative. The endpoint values must have opposite signs.
pub fn newton_bracketed<F: FnMut(f64) -> (f64, f64)>(
    mut fdf: F,
    mut a: f64,
    mut b: f64,
    ftol: f64,
) -> f64 {
    let (fa, _) = fdf(a);
    let (fb, _) = fdf(b);
    if fa == 0.0 {
        return a;
    }
    if fb == 0.0 {
        return b;
    }
    let rising = fb > fa;
    let mut x = 0.5 * (a + b);
    for _ in 0..300 {
        let (fx, dfx) = fdf(x);
        if fx.abs() <= ftol {
            return x;
        }
        if (fx > 0.0) == rising {
            b = x;
        } else {
            a = x;
        }
        let step = x - fx / dfx;
        x = if dfx != 0.0 && step.is_finite() && step > a && step < b {
            step
        } else {
            0.5 * (a + b)
        };
        if (b - a).abs() <= 2.0 * f64::EPSILON * x.abs().max(1e-300) {
            return x;
        }
    }
    x
}

/// Relative-and-absolute closeness check.
pub fn close(a: f64, b: f64, tol: f64) -> bool {
    if a == b {
        return true;
    }
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

/// Serde adapters that write infinite values as `"+inf"` / `"-inf"`.
pub mod ext_serde {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn format(v: f64) -> String {
        if v == f64::INFINITY {
            "+inf".to_string()
        } else if v == f64::NEG_INFINITY {
            "-inf".to_string()
        } else if v.is_nan() {
            "nan".to_string()
        } else {
            format!("{v}")
        }
    }

    pub fn parse(s: &str) -> Option<f64> {
        match s.trim() {
            "+inf" | "inf" | "infinity" | "+infinity" => Some(f64::INFINITY),
            "-inf" | "-infinity" => Some(f64::NEG_INFINITY),
            t => t.parse().ok(),
        }
    }

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_str(&format(*v))
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) => parse(&t)
                .ok_or_else(|| serde::de::Error::custom(format!("not an extended real: {t}"))),
        }
    }

    pub mod option {
        use serde::{Deserialize, Deserializer, Serializer};

        pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
            match v {
                Some(x) => super::serialize(x, s),
                None => s.serialize_none(),
            }
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
            let raw: Option<super::Repr> = Option::deserialize(d)?;
            match raw {
                None => Ok(None),
                Some(super::Repr::Num(v)) => Ok(Some(v)),
                Some(super::Repr::Text(t)) => super::parse(&t).map(Some).ok_or_else(|| {
                    serde::de::Error::custom(format!("not an extended real: {t}"))
                }),
            }
        }
    }

    pub mod vec {
        use serde::ser::SerializeSeq;
        use serde::{Deserialize, Deserializer, Serializer};

        pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
            let mut seq = s.serialize_seq(Some(v.len()))?;
            for x in v {
                if x.is_finite() {
                    seq.serialize_element(x)?;
                } else {
                    seq.serialize_element(&super::format(*x))?;
                }
            }
            seq.end()
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
            let raw: Vec<super::Repr> = Vec::deserialize(d)?;
            raw.into_iter()
                .map(|r| match r {
                    super::Repr::Num(v) => Ok(v),
                    super::Repr::Text(t) => super::parse(&t).ok_or_else(|| {
                        serde::de::Error::custom(format!("not an extended real: {t}"))
                    }),
                })
                .collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_integrates_polynomials() {
        let r = gauss_legendre(7);
        let s: f64 = r.weights.iter().sum();
        assert!((s - 2.0).abs() < 1e-14);
        let m4: f64 = r.nodes.iter().zip(&r.weights).map(|(x, w)| w * x.powi(4)).sum();
        assert!((m4 - 0.4).abs() < 1e-14);
    }

    #[test]
    fn legendre_large_rule() {
        let r = gauss_legendre(256);
        let s: f64 = r.nodes.iter().zip(&r.weights).map(|(x, w)| w * x.exp()).sum();
        assert!((s - (1f64.exp() - (-1f64).exp())).abs() < 1e-13);
    }

    #[test]
    fn hermite_normal_moments() {
        for n in [16, 64, 256] {
            let r = gauss_hermite_normal(n);
            let m0: f64 = r.weights.iter().sum();
            let m2: f64 = r.nodes.iter().zip(&r.weights).map(|(x, w)| w * x * x).sum();
            let e: f64 = r.nodes.iter().zip(&r.weights).map(|(x, w)| w * (0.9 * x).exp()).sum();
            assert!((m0 - 1.0).abs() < 1e-12, "n={n} m0={m0}");
            assert!((m2 - 1.0).abs() < 1e-12, "n={n} m2={m2}");
            assert!((e - (0.405f64).exp()).abs() < 1e-12, "n={n} e={e}");
            assert!(r.nodes.windows(2).all(|p| p[0] < p[1]));
        }
    }

    #[test]
    fn roots() {
        let r = bracketed_root(|x| x * x - 2.0, 0.0, 2.0, 1e-15, 0.0);
        assert!((r - 2f64.sqrt()).abs() < 1e-14);
        let r = newton_bracketed(|x| (x.powi(3) - 5.0, 3.0 * x * x), 0.0, 4.0, 1e-14);
        assert!((r - 5f64.cbrt()).abs() < 1e-13);
    }

    #[test]
    fn ext_format_round_trip() {
        for v in [1.5, f64::INFINITY, f64::NEG_INFINITY] {
            assert_eq!(ext_serde::parse(&ext_serde::format(v)), Some(v));
        }
    }
}
