//! Root isolation for polynomials on `[0,1]`.
//!
//! Durand-Kerner iteration over the complex plane finds all roots at once;
//! exact zero roots are deflated first (they are common and must come out
//! exactly), every root is polished with a few Newton steps, and the result
//! is filtered to the real interval and clustered so that multiple roots
//! report once.

use num_complex::Complex64;

use super::poly::Poly;

/// Distance under which two computed roots are treated as the same point.
pub const ROOT_CLUSTER_EPS: f64 = 1e-8;

/// Real roots of `p` in `[0,1]`, ascending and deduplicated. The zero
/// polynomial has no isolated roots and returns an empty list; callers must
/// treat it separately.
pub fn real_roots_in_unit_interval(p: &Poly) -> Vec<f64> {
    if p.is_zero() || p.degree() == Some(0) {
        return Vec::new();
    }
    // Deflate exact roots at zero: strip leading (low-order) zero
    // coefficients.
    let coeffs = p.coeffs();
    let low_zeros = coeffs.iter().take_while(|c| c.norm() <= 1e-14).count();
    let mut roots: Vec<f64> = Vec::new();
    if low_zeros > 0 {
        roots.push(0.0);
    }
    let deflated = Poly::new(coeffs[low_zeros..].to_vec());
    if deflated.degree().map_or(false, |d| d >= 1) {
        for r in durand_kerner(&deflated) {
            let polished = newton_polish(&deflated, r);
            // Accept roots on the closed interval, with a little slack for
            // rounding, and only when they are genuinely real.
            if polished.im.abs() <= ROOT_CLUSTER_EPS
                && polished.re >= -ROOT_CLUSTER_EPS
                && polished.re <= 1.0 + ROOT_CLUSTER_EPS
            {
                roots.push(polished.re.clamp(0.0, 1.0));
            }
        }
    }
    roots.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cluster(roots)
}

fn cluster(sorted: Vec<f64>) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::new();
    for r in sorted {
        match out.last() {
            Some(&last) if (r - last).abs() <= ROOT_CLUSTER_EPS => {}
            _ => out.push(r),
        }
    }
    out
}

/// All complex roots of a nonconstant polynomial by simultaneous iteration.
fn durand_kerner(p: &Poly) -> Vec<Complex64> {
    let coeffs = p.coeffs();
    let n = coeffs.len() - 1;
    let lead = coeffs[n];
    let monic: Vec<Complex64> = coeffs.iter().map(|c| c / lead).collect();
    // Standard starting points: powers of a non-real point spread on a
    // circle sized by the coefficients.
    let radius = 1.0
        + monic
            .iter()
            .take(n)
            .map(|c| c.norm())
            .fold(0.0, f64::max);
    let seed = Complex64::new(0.4, 0.9);
    let mut z: Vec<Complex64> = (0..n)
        .map(|k| seed.powu(k as u32 + 1) / seed.norm() * radius.min(4.0))
        .collect();
    let eval_monic = |x: Complex64| {
        let mut acc = Complex64::new(0.0, 0.0);
        for c in monic.iter().rev() {
            acc = acc * x + c;
        }
        acc
    };
    for _ in 0..200 {
        let mut moved: f64 = 0.0;
        for i in 0..n {
            let mut denom = Complex64::new(1.0, 0.0);
            for j in 0..n {
                if j != i {
                    denom *= z[i] - z[j];
                }
            }
            if denom.norm() < 1e-300 {
                // Collided iterates; nudge apart instead of dividing by zero.
                z[i] += Complex64::new(1e-6, 1e-6);
                continue;
            }
            let step = eval_monic(z[i]) / denom;
            z[i] -= step;
            moved = moved.max(step.norm());
        }
        if moved < 1e-14 {
            break;
        }
    }
    z
}

fn newton_polish(p: &Poly, mut z: Complex64) -> Complex64 {
    let d = p.derivative();
    for _ in 0..8 {
        let dv = d.eval_complex(z);
        if dv.norm() < 1e-300 {
            break;
        }
        let step = p.eval_complex(z) / dv;
        z -= step;
        if step.norm() < 1e-15 {
            break;
        }
    }
    z
}

impl Poly {
    pub(crate) fn eval_complex(&self, z: Complex64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for c in self.coeffs().iter().rev() {
            acc = acc * z + c;
        }
        acc
    }
}
