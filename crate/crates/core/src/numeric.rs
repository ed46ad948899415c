//! Numerical building blocks: adaptive quadrature, the scaled exponential
//! integral, a small two-parameter maximizer and a slice-wise exponential
//! for the bootstrap inner loops.

use crate::error::{Error, Result};

/// Adaptive Simpson quadrature of `f` on `[a, b]`.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, rel_tol: f64) -> f64 {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    // absolute floor keeps near-zero integrals from recursing forever
    let tol = (rel_tol * whole.abs()).max(1e-15);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, 50)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// `exp(x) * E1(x)` for `x > 0`.
pub fn scaled_exp_integral(x: f64) -> f64 {
    const EULER: f64 = 0.577_215_664_901_532_9;
    assert!(x > 0.0);
    if x <= 1.0 {
        let mut sum = 0.0;
        let mut term = 1.0;
        for k in 1..200 {
            term *= -x / k as f64;
            let add = term / k as f64;
            sum += add;
            if add.abs() < 1e-18 {
                break;
            }
        }
        (-EULER - x.ln() - sum) * x.exp()
    } else {
        // modified Lentz on the continued fraction
        let tiny = 1e-300;
        let mut b = x + 1.0;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..500 {
            let an = -((i * i) as f64);
            b += 2.0;
            d = 1.0 / (an * d + b);
            c = b + an / c;
            let del = c * d;
            h *= del;
            if (del - 1.0).abs() < 1e-16 {
                break;
            }
        }
        h
    }
}

/// Central-difference gradient and Hessian of a function of two variables.
pub fn gradient_hessian(f: &dyn Fn([f64; 2]) -> f64, x: [f64; 2], rel_h: f64) -> ([f64; 2], [[f64; 2]; 2]) {
    let h = [rel_h * x[0].abs().max(1.0), rel_h * x[1].abs().max(1.0)];
    let at = |d0: f64, d1: f64| f([x[0] + d0, x[1] + d1]);
    let f0 = at(0.0, 0.0);
    let fp0 = at(h[0], 0.0);
    let fm0 = at(-h[0], 0.0);
    let fp1 = at(0.0, h[1]);
    let fm1 = at(0.0, -h[1]);
    let g = [(fp0 - fm0) / (2.0 * h[0]), (fp1 - fm1) / (2.0 * h[1])];
    let h00 = (fp0 - 2.0 * f0 + fm0) / (h[0] * h[0]);
    let h11 = (fp1 - 2.0 * f0 + fm1) / (h[1] * h[1]);
    let h01 = (at(h[0], h[1]) - at(h[0], -h[1]) - at(-h[0], h[1]) + at(-h[0], -h[1])) / (4.0 * h[0] * h[1]);
    (g, [[h00, h01], [h01, h11]])
}

/// Damped Newton ascent with finite-difference derivatives and a gradient
/// fallback when the Hessian is not negative definite.
pub fn maximize_2d(f: &dyn Fn([f64; 2]) -> f64, start: [f64; 2], max_iter: usize) -> Result<([f64; 2], usize)> {
    let mut x = start;
    let mut fx = f(x);
    if !fx.is_finite() {
        return Err(Error::NonConvergence { what: "likelihood maximization", iterations: 0 });
    }
    for it in 1..=max_iter {
        let (g, h) = gradient_hessian(f, x, 1e-5);
        let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
        let mut step = if h[0][0] < 0.0 && det > 0.0 {
            [
                -(h[1][1] * g[0] - h[0][1] * g[1]) / det,
                -(-h[1][0] * g[0] + h[0][0] * g[1]) / det,
            ]
        } else {
            let scale = 1.0 / (h[0][0].abs() + h[1][1].abs()).max(1.0);
            [g[0] * scale, g[1] * scale]
        };
        let mut accepted = false;
        for _ in 0..60 {
            let cand = [x[0] + step[0], x[1] + step[1]];
            let fc = f(cand);
            if fc.is_finite() && fc >= fx - 1e-12 * fx.abs().max(1.0) {
                let moved = step[0].abs().max(step[1].abs());
                x = cand;
                let improvement = fc - fx;
                fx = fc;
                accepted = true;
                if moved < 1e-10 || (improvement.abs() < 1e-13 * fx.abs().max(1.0) && moved < 1e-7) {
                    return Ok((x, it));
                }
                break;
            }
            step = [0.5 * step[0], 0.5 * step[1]];
        }
        if !accepted {
            // no ascent direction left at finite-difference resolution
            let gn = g[0].abs().max(g[1].abs());
            if gn < 1e-4 * fx.abs().max(1.0) {
                return Ok((x, it));
            }
            return Err(Error::NonConvergence { what: "likelihood maximization", iterations: it });
        }
    }
    Err(Error::NonConvergence { what: "likelihood maximization", iterations: max_iter })
}

/// Branch-free `exp` with error below one ulp on `[-708, 709]`; inputs
/// outside are clamped. Written so the slice loops below vectorize.
#[inline(always)]
fn exp_kernel(x: f64) -> f64 {
    const INV_LN2: f64 = 1.442_695_040_888_963_4;
    const LN2_HI: f64 = 6.931_471_803_691_238_2e-1;
    const LN2_LO: f64 = 1.908_214_929_270_587_7e-10;
    // 1.5 * 2^52: adding it rounds to an integer kept in the low mantissa bits
    const SHIFTER: f64 = 6_755_399_441_055_744.0;
    let x = x.max(-708.0).min(709.0);
    let t = x * INV_LN2 + SHIFTER;
    let k = t - SHIFTER;
    let r = (x - k * LN2_HI) - k * LN2_LO;
    // Taylor series to degree 13 on |r| <= ln2 / 2
    let mut p = 1.0 / 6_227_020_800.0;
    p = p * r + 1.0 / 479_001_600.0;
    p = p * r + 1.0 / 39_916_800.0;
    p = p * r + 1.0 / 3_628_800.0;
    p = p * r + 1.0 / 362_880.0;
    p = p * r + 1.0 / 40_320.0;
    p = p * r + 1.0 / 5_040.0;
    p = p * r + 1.0 / 720.0;
    p = p * r + 1.0 / 120.0;
    p = p * r + 1.0 / 24.0;
    p = p * r + 1.0 / 6.0;
    p = p * r + 0.5;
    p = p * r + 1.0;
    p = p * r + 1.0;
    let two_k = f64::from_bits(t.to_bits().wrapping_sub(SHIFTER.to_bits()).wrapping_add(1023) << 52);
    p * two_k
}

fn exp_slice_portable(xs: &mut [f64]) {
    for x in xs.iter_mut() {
        *x = exp_kernel(*x);
    }
}

// Same operations (no fused multiply-add), so results match the portable
// path bit for bit.
#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2")]
unsafe fn exp_slice_avx2(xs: &mut [f64]) {
    for x in xs.iter_mut() {
        *x = exp_kernel(*x);
    }
}

/// `x -> exp(x)` over a slice.
pub fn exp_in_place(xs: &mut [f64]) {
    #[cfg(target_arch = "x86_64")]
    {
        if std::arch::is_x86_feature_detected!("avx2") {
            // SAFETY: the CPU supports AVX2, checked just above.
            unsafe { exp_slice_avx2(xs) };
            return;
        }
    }
    exp_slice_portable(xs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slice_exp_matches_std() {
        let mut xs: Vec<f64> = (0..20_001).map(|k| -700.0 + k as f64 * 0.07).collect();
        let expected: Vec<f64> = xs.iter().map(|x| x.exp()).collect();
        let mut portable = xs.clone();
        exp_in_place(&mut xs);
        exp_slice_portable(&mut portable);
        for ((a, b), e) in xs.iter().zip(&portable).zip(&expected) {
            assert_eq!(a.to_bits(), b.to_bits());
            assert!(((a - e) / e).abs() <= 2.0 * f64::EPSILON, "{a} {e}");
        }
        let mut edge = [0.0, -1e-300, 1e-17, -800.0];
        exp_in_place(&mut edge);
        assert_eq!(edge[0], 1.0);
        assert_eq!(edge[1], 1.0);
        assert_eq!(edge[2], 1.0);
        assert!(edge[3] > 0.0 && edge[3] < 1e-300);
    }

    #[test]
    fn simpson_integrates_polynomials_and_gaussian() {
        let v = adaptive_simpson(&|x| x * x, 0.0, 3.0, 1e-12);
        assert!((v - 9.0).abs() < 1e-10);
        let g = adaptive_simpson(&|x: f64| (-0.5 * x * x).exp(), -12.0, 12.0, 1e-12);
        assert!((g - (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-9);
    }

    #[test]
    fn exp_integral_matches_quadrature() {
        for &x in &[0.01, 0.3, 1.0, 1.5, 4.0, 20.0] {
            // e^x E1(x) = int_0^inf e^{-u} / (x + u) du
            let q = adaptive_simpson(&|s: f64| {
                if s <= 0.0 || s >= 1.0 {
                    return 0.0;
                }
                let u = -s.ln();
                1.0 / (x + u)
            }, 0.0, 1.0, 1e-12);
            let v = scaled_exp_integral(x);
            assert!((v - q).abs() < 1e-7 * q, "x={x}: {v} vs {q}");
        }
    }

    #[test]
    fn maximizes_concave_quadratic() {
        let f = |p: [f64; 2]| -(p[0] - 1.5).powi(2) - 2.0 * (p[1] + 0.5).powi(2) + 0.3 * p[0] * p[1];
        let (x, _) = maximize_2d(&f, [0.0, 0.0], 100).unwrap();
        // stationary point of the quadratic
        let det = 2.0 * 4.0 - 0.09;
        let x0 = (3.0 * 4.0 + 0.3 * -2.0) / det;
        let x1 = (2.0 * -2.0 + 0.3 * 3.0) / det;
        assert!((x[0] - x0).abs() < 1e-6 && (x[1] - x1).abs() < 1e-6, "{x:?}");
    }
}
