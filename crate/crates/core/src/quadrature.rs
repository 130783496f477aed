//! Globally adaptive Gauss–Kronrod (7/15) quadrature on finite intervals.

use alloc::vec::Vec;

use crate::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
// Gauss weights for XGK[1], XGK[3], XGK[5], XGK[7]
const WG: [f64; 4] =
    [0.129_484_966_168_869_7, 0.279_705_391_489_276_7, 0.381_830_050_505_118_9, 0.417_959_183_673_469_4];

const MAX_INTERVALS: usize = 20_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    /// Sum of the per-interval Kronrod–Gauss differences.
    pub error_estimate: f64,
    pub intervals: usize,
}

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

fn rule<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> Result<Segment> {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut eval = |x: f64| {
        let v = f(x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFiniteProfile { at: x, value: v })
        }
    };
    let fc = eval(c)?;
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = h * XGK[j];
        let pair = eval(c - dx)? + eval(c + dx)?;
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    Ok(Segment { a, b, value: kronrod * h, error: ((kronrod - gauss) * h).abs() })
}

/// Integrate `f` over `[a, b]` until the estimated absolute error is below `abs_tol`.
///
/// A non-finite integrand value aborts with the offending abscissa.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, abs_tol: f64) -> Result<Quadrature> {
    let mut segments: Vec<Segment> = alloc::vec![rule(&mut f, a, b)?];
    loop {
        let total_err: f64 = segments.iter().map(|s| s.error).sum();
        if total_err <= abs_tol || segments.len() >= MAX_INTERVALS {
            let value = segments.iter().map(|s| s.value).sum();
            return Ok(Quadrature { value, error_estimate: total_err, intervals: segments.len() });
        }
        let (worst, _) =
            segments
                .iter()
                .enumerate()
                .fold((0, -1.0), |(bi, be), (i, s)| if s.error > be { (i, s.error) } else { (bi, be) });
        let s = segments.swap_remove(worst);
        let mid = 0.5 * (s.a + s.b);
        if mid <= s.a || mid >= s.b {
            // interval cannot be split further in floating point
            let value = segments.iter().map(|s| s.value).sum::<f64>() + s.value;
            let err = segments.iter().map(|s| s.error).sum::<f64>() + s.error;
            return Ok(Quadrature { value, error_estimate: err, intervals: segments.len() + 1 });
        }
        segments.push(rule(&mut f, s.a, mid)?);
        segments.push(rule(&mut f, mid, s.b)?);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::PI;

    #[test]
    fn polynomials_are_exact() {
        let q = integrate(|x| x.powi(5) - 3.0 * x * x, -1.0, 2.0, 1e-14).unwrap();
        // [x^6/6 - x^3] from -1 to 2
        let exact = (64.0 / 6.0 - 8.0) - (1.0 / 6.0 + 1.0);
        assert!((q.value - exact).abs() < 1e-13);
        assert_eq!(q.intervals, 1);
    }

    #[test]
    fn oscillatory_and_kinked() {
        let q = integrate(|x| (40.0 * PI * x).sin().powi(2), 0.0, 1.0, 1e-12).unwrap();
        assert!((q.value - 0.5).abs() < 1e-11);
        let q = integrate(|x| (x - 0.3).abs(), 0.0, 1.0, 1e-12).unwrap();
        assert!((q.value - (0.045 + 0.245)).abs() < 1e-11);
    }

    #[test]
    fn non_finite_reports_abscissa() {
        let err = integrate(|x| if x > 0.5 { f64::NAN } else { x }, 0.0, 1.0, 1e-10).unwrap_err();
        match err {
            Error::NonFiniteProfile { at, .. } => assert!(at > 0.5),
            e => panic!("unexpected {e:?}"),
        }
    }
}
