//! Polynomials on `[0,1]` and the closure of pointwise operations needed by
//! the function backend: sums, products, and square roots of nonnegative
//! polynomials. Square roots are kept as structural nodes so that products
//! like `sqrt(p) * sqrt(p)` can collapse back to the polynomial `p` exactly.

use num_complex::Complex64;

const COEFF_EPS: f64 = 1e-12;

/// Polynomial with complex coefficients in ascending order of degree.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly {
    coeffs: Vec<Complex64>,
}

impl Poly {
    pub fn new(mut coeffs: Vec<Complex64>) -> Self {
        while coeffs.last().is_some_and(|c| c.norm() <= COEFF_EPS) {
            coeffs.pop();
        }
        Poly { coeffs }
    }

    pub fn zero() -> Self {
        Poly { coeffs: Vec::new() }
    }

    pub fn constant(c: Complex64) -> Self {
        Poly::new(vec![c])
    }

    pub fn one() -> Self {
        Poly::constant(Complex64::new(1.0, 0.0))
    }

    /// The coordinate function `t`.
    pub fn x() -> Self {
        Poly::new(vec![Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)])
    }

    /// Ascending coefficients; empty for the zero polynomial.
    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree, or `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn eval(&self, t: f64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for c in self.coeffs.iter().rev() {
            acc = acc * t + c;
        }
        acc
    }

    /// Coefficient-wise conjugate; equals the pointwise conjugate on the
    /// real axis.
    pub fn conj(&self) -> Poly {
        Poly { coeffs: self.coeffs.iter().map(|c| c.conj()).collect() }
    }

    pub fn derivative(&self) -> Poly {
        if self.coeffs.len() <= 1 {
            return Poly::zero();
        }
        Poly::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, c)| c * Complex64::new(k as f64, 0.0))
                .collect(),
        )
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let n = self.coeffs.len().max(other.coeffs.len());
        let mut out = vec![Complex64::new(0.0, 0.0); n];
        for (i, c) in self.coeffs.iter().enumerate() {
            out[i] += c;
        }
        for (i, c) in other.coeffs.iter().enumerate() {
            out[i] += c;
        }
        Poly::new(out)
    }

    pub fn neg(&self) -> Poly {
        Poly { coeffs: self.coeffs.iter().map(|c| -c).collect() }
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        if self.is_zero() || other.is_zero() {
            return Poly::zero();
        }
        let mut out =
            vec![Complex64::new(0.0, 0.0); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly::new(out)
    }

    pub fn scale(&self, c: Complex64) -> Poly {
        Poly::new(self.coeffs.iter().map(|a| a * c).collect())
    }

    /// Coefficient-wise distance to another polynomial.
    pub fn distance(&self, other: &Poly) -> f64 {
        let n = self.coeffs.len().max(other.coeffs.len());
        let mut worst = 0.0f64;
        for i in 0..n {
            let a = self.coeffs.get(i).copied().unwrap_or_default();
            let b = other.coeffs.get(i).copied().unwrap_or_default();
            worst = worst.max((a - b).norm());
        }
        worst
    }

    fn approx_eq(&self, other: &Poly) -> bool {
        let scale = self
            .coeffs
            .iter()
            .chain(&other.coeffs)
            .map(|c| c.norm())
            .fold(1.0, f64::max);
        self.distance(other) <= COEFF_EPS * scale
    }
}

/// A function on `[0,1]` built from polynomials, closed under the pointwise
/// operations the backend performs: conjugation, sums, products, and square
/// roots of nonnegative polynomials.
#[derive(Debug, Clone, PartialEq)]
pub enum PolyFunction {
    Poly(Poly),
    /// Pointwise square root of a polynomial that is nonnegative on `[0,1]`.
    Sqrt(Poly),
    Sum(Box<PolyFunction>, Box<PolyFunction>),
    Product(Box<PolyFunction>, Box<PolyFunction>),
}

impl PolyFunction {
    pub fn poly(p: Poly) -> Self {
        PolyFunction::Poly(p)
    }

    pub fn constant(c: Complex64) -> Self {
        PolyFunction::Poly(Poly::constant(c))
    }

    pub fn zero() -> Self {
        PolyFunction::Poly(Poly::zero())
    }

    pub fn one() -> Self {
        PolyFunction::Poly(Poly::one())
    }

    /// Square root node; `p` must be nonnegative on `[0,1]` for the
    /// evaluation to be meaningful (small negative dips from rounding are
    /// clamped at zero).
    pub fn sqrt(p: Poly) -> Self {
        PolyFunction::Sqrt(p)
    }

    pub fn eval(&self, t: f64) -> Complex64 {
        match self {
            PolyFunction::Poly(p) => p.eval(t),
            PolyFunction::Sqrt(p) => {
                let v = p.eval(t);
                Complex64::new(v.re.max(0.0).sqrt(), 0.0)
            }
            PolyFunction::Sum(a, b) => a.eval(t) + b.eval(t),
            PolyFunction::Product(a, b) => a.eval(t) * b.eval(t),
        }
    }

    /// Pointwise conjugate. Square roots of nonnegative polynomials are
    /// real-valued, hence self-conjugate.
    pub fn conj(&self) -> PolyFunction {
        match self {
            PolyFunction::Poly(p) => PolyFunction::Poly(p.conj()),
            PolyFunction::Sqrt(p) => PolyFunction::Sqrt(p.clone()),
            PolyFunction::Sum(a, b) => {
                PolyFunction::Sum(Box::new(a.conj()), Box::new(b.conj()))
            }
            PolyFunction::Product(a, b) => {
                PolyFunction::Product(Box::new(a.conj()), Box::new(b.conj()))
            }
        }
    }

    pub fn add(&self, other: &PolyFunction) -> PolyFunction {
        match (self, other) {
            (PolyFunction::Poly(a), PolyFunction::Poly(b)) => PolyFunction::Poly(a.add(b)),
            (PolyFunction::Poly(z), other) if z.is_zero() => other.clone(),
            (other, PolyFunction::Poly(z)) if z.is_zero() => other.clone(),
            _ => PolyFunction::Sum(Box::new(self.clone()), Box::new(other.clone())),
        }
    }

    pub fn mul(&self, other: &PolyFunction) -> PolyFunction {
        match (self, other) {
            (PolyFunction::Poly(a), PolyFunction::Poly(b)) => PolyFunction::Poly(a.mul(b)),
            // sqrt(p) * sqrt(p) collapses to p exactly; this is what keeps
            // Gram maps of square-root multipliers polynomial.
            (PolyFunction::Sqrt(a), PolyFunction::Sqrt(b)) if a.approx_eq(b) => {
                PolyFunction::Poly(a.clone())
            }
            (PolyFunction::Poly(z), _) | (_, PolyFunction::Poly(z)) if z.is_zero() => {
                PolyFunction::zero()
            }
            _ => PolyFunction::Product(Box::new(self.clone()), Box::new(other.clone())),
        }
    }

    pub fn as_poly(&self) -> Option<&Poly> {
        match self {
            PolyFunction::Poly(p) => Some(p),
            _ => None,
        }
    }

    /// A polynomial with the same zero set on `[0,1]`, when one is evident
    /// from the structure: the polynomial itself, or the radicand of a
    /// square root.
    pub fn zero_set_poly(&self) -> Option<Poly> {
        match self {
            PolyFunction::Poly(p) => Some(p.clone()),
            PolyFunction::Sqrt(p) => Some(p.clone()),
            _ => None,
        }
    }

    /// Structural zero test (numeric fallback on a coarse grid for composite
    /// nodes).
    pub fn is_zero(&self) -> bool {
        match self {
            PolyFunction::Poly(p) => p.is_zero(),
            PolyFunction::Sqrt(p) => p.is_zero(),
            _ => (0..=32).all(|j| self.eval(j as f64 / 32.0).norm() <= 1e-12),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn horner_evaluation() {
        // 1 - 2t + t^2 = (1-t)^2
        let p = Poly::new(vec![c(1.0), c(-2.0), c(1.0)]);
        for t in [0.0, 0.25, 0.5, 1.0] {
            assert!((p.eval(t) - c((1.0 - t) * (1.0 - t))).norm() < 1e-14);
        }
    }

    #[test]
    fn arithmetic_matches_pointwise() {
        let p = Poly::new(vec![c(1.0), c(2.0)]);
        let q = Poly::new(vec![c(-1.0), c(0.0), c(3.0)]);
        let sum = p.add(&q);
        let prod = p.mul(&q);
        for j in 0..=10 {
            let t = j as f64 / 10.0;
            assert!((sum.eval(t) - (p.eval(t) + q.eval(t))).norm() < 1e-12);
            assert!((prod.eval(t) - p.eval(t) * q.eval(t)).norm() < 1e-12);
        }
    }

    #[test]
    fn trailing_zeros_are_trimmed() {
        let p = Poly::new(vec![c(1.0), c(0.0), c(0.0)]);
        assert_eq!(p.degree(), Some(0));
        let z = Poly::new(vec![c(0.0)]);
        assert!(z.is_zero());
        assert_eq!(z.degree(), None);
    }

    #[test]
    fn derivative_of_cubic() {
        let p = Poly::new(vec![c(1.0), c(1.0), c(1.0), c(1.0)]);
        let d = p.derivative();
        assert_eq!(d.coeffs(), &[c(1.0), c(2.0), c(3.0)]);
    }

    #[test]
    fn sqrt_square_collapses_to_radicand() {
        let t = Poly::x();
        let s = PolyFunction::sqrt(t.clone());
        let prod = s.mul(&s.conj());
        assert_eq!(prod, PolyFunction::Poly(t.clone()));
        for j in 0..=16 {
            let x = j as f64 / 16.0;
            assert!((prod.eval(x) - c(x)).norm() < 1e-14);
        }
    }

    #[test]
    fn sqrt_evaluates_pointwise() {
        let s = PolyFunction::sqrt(Poly::x());
        assert!((s.eval(0.25) - c(0.5)).norm() < 1e-14);
        assert!((s.eval(0.0)).norm() < 1e-14);
    }

    #[test]
    fn composite_nodes_evaluate() {
        let s = PolyFunction::sqrt(Poly::x());
        let p = PolyFunction::poly(Poly::new(vec![c(1.0), c(-1.0)]));
        let mix = s.add(&p).mul(&s);
        for j in 0..=8 {
            let t = j as f64 / 8.0;
            let expected = (t.sqrt() + (1.0 - t)) * t.sqrt();
            assert!((mix.eval(t) - c(expected)).norm() < 1e-12);
        }
    }

    #[test]
    fn conjugate_on_real_axis() {
        let p = Poly::new(vec![Complex64::new(1.0, 2.0), Complex64::new(0.0, -1.0)]);
        let f = PolyFunction::poly(p);
        for j in 0..=8 {
            let t = j as f64 / 8.0;
            assert!((f.conj().eval(t) - f.eval(t).conj()).norm() < 1e-14);
        }
    }
}
