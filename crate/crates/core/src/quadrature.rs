//! Adaptive Gauss–Kronrod quadrature and oscillatory Fourier integrals on a
//! half line.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

// 15-point Kronrod abscissae (positive half) and weights; the 7-point Gauss
// rule uses the odd-indexed abscissae.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Debug, Clone, Copy)]
pub struct QuadResult {
    pub value: Complex64,
    pub error_estimate: f64,
    pub evaluations: usize,
}

fn gk15(f: &impl Fn(f64) -> Complex64, a: f64, b: f64) -> (Complex64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kronrod += pair * WGK[j];
        if j % 2 == 1 {
            gauss += pair * WG[j / 2];
        }
    }
    let kronrod = kronrod * half;
    let gauss = gauss * half;
    (kronrod, (kronrod - gauss).norm())
}

struct Segment {
    a: f64,
    b: f64,
    value: Complex64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Globally adaptive G7/K15 on `[a, b]`: bisects the segment with the largest
/// error estimate until the summed estimate is below `abs_tol`.
pub fn adaptive_gk(
    f: impl Fn(f64) -> Complex64,
    a: f64,
    b: f64,
    abs_tol: f64,
    max_segments: usize,
) -> Result<QuadResult> {
    if a == b {
        return Ok(QuadResult { value: Complex64::new(0.0, 0.0), error_estimate: 0.0, evaluations: 0 });
    }
    let mut heap = BinaryHeap::new();
    let (v, e) = gk15(&f, a, b);
    heap.push(Segment { a, b, value: v, error: e });
    let mut evaluations = 15;
    loop {
        let total_err: f64 = heap.iter().map(|s| s.error).sum();
        if total_err <= abs_tol {
            break;
        }
        if heap.len() >= max_segments {
            let value = heap.iter().map(|s| s.value).sum::<Complex64>();
            return Err(Error::Numerical(format!(
                "quadrature on [{a}, {b}] did not converge: error estimate {total_err:.3e} > {abs_tol:.1e} \
                 after {max_segments} segments ({evaluations} evaluations, value {value})"
            )));
        }
        let worst = heap.pop().expect("non-empty");
        let mid = 0.5 * (worst.a + worst.b);
        let (vl, el) = gk15(&f, worst.a, mid);
        let (vr, er) = gk15(&f, mid, worst.b);
        evaluations += 30;
        heap.push(Segment { a: worst.a, b: mid, value: vl, error: el });
        heap.push(Segment { a: mid, b: worst.b, value: vr, error: er });
    }
    let value = heap.iter().map(|s| s.value).sum();
    let error_estimate = heap.iter().map(|s| s.error).sum();
    Ok(QuadResult { value, error_estimate, evaluations })
}

/// Wynn's epsilon extrapolation of a sequence of partial sums. Returns the
/// best estimate and the difference between the last two even-column
/// estimates as its error.
pub fn wynn_epsilon(partial_sums: &[Complex64]) -> (Complex64, f64) {
    let n = partial_sums.len();
    if n < 3 {
        let last = partial_sums.last().copied().unwrap_or_default();
        let err = if n == 2 { (partial_sums[1] - partial_sums[0]).norm() } else { f64::INFINITY };
        return (last, err);
    }
    // prev = column k-1, cur = column k; column -1 is all zeros.
    let mut prev: Vec<Complex64> = vec![Complex64::new(0.0, 0.0); n + 1];
    let mut cur: Vec<Complex64> = partial_sums.to_vec();
    let mut estimates = vec![*partial_sums.last().unwrap()];
    let mut k = 0;
    while cur.len() > 1 {
        let mut next = Vec::with_capacity(cur.len() - 1);
        for i in 0..cur.len() - 1 {
            let d = cur[i + 1] - cur[i];
            if d.norm() == 0.0 {
                // Converged exactly; the tail of the table is degenerate.
                return (cur[i + 1], 0.0);
            }
            next.push(prev[i + 1] + d.inv());
        }
        prev = cur;
        cur = next;
        k += 1;
        if k % 2 == 0 {
            estimates.push(*cur.last().unwrap());
        }
    }
    let m = estimates.len();
    let err = if m >= 2 { (estimates[m - 1] - estimates[m - 2]).norm() } else { f64::INFINITY };
    (estimates[m - 1], err)
}

/// `∫_0^∞ g(x) e^{-iκx} dx` for an integrable `g` with characteristic width
/// `scale`. Integrates half periods `[kπ/|κ|, (k+1)π/|κ|]`, each further split
/// at `scale·2^j` so narrow peaks are resolved, then accelerates the partial
/// sums with Wynn's epsilon algorithm.
pub fn fourier_half_line(g: impl Fn(f64) -> f64, kappa: f64, scale: f64, abs_tol: f64) -> Result<QuadResult> {
    if kappa == 0.0 || !kappa.is_finite() || !(scale > 0.0) {
        return Err(Error::Numerical(format!(
            "fourier_half_line needs finite nonzero kappa and positive scale, got {kappa}, {scale}"
        )));
    }
    const MAX_HALF_PERIODS: usize = 400;
    const MIN_HALF_PERIODS: usize = 8;
    let period = PI / kappa.abs();
    let integrand = |x: f64| Complex64::from_polar(g(x), -kappa * x);
    let piece_tol = abs_tol * 1e-3;

    let mut partial = Vec::new();
    let mut sum = Complex64::new(0.0, 0.0);
    let mut evaluations = 0;
    let mut last_estimate: Option<Complex64> = None;
    for k in 0..MAX_HALF_PERIODS {
        let (a, b) = (k as f64 * period, (k + 1) as f64 * period);
        let mut cuts = vec![a];
        let mut p = scale / 4.0;
        while p < b {
            if p > a {
                cuts.push(p);
            }
            p *= 2.0;
        }
        cuts.push(b);
        let mut term = Complex64::new(0.0, 0.0);
        for w in cuts.windows(2) {
            let r = adaptive_gk(integrand, w[0], w[1], piece_tol, 2000)?;
            term += r.value;
            evaluations += r.evaluations;
        }
        sum += term;
        partial.push(sum);

        // Rapidly decaying integrands: the plain partial sums have converged.
        if k + 1 >= MIN_HALF_PERIODS && term.norm() < abs_tol * 1e-4 && g(b).abs() * period < abs_tol * 1e-4 {
            return Ok(QuadResult { value: sum, error_estimate: term.norm(), evaluations });
        }
        if k + 1 >= MIN_HALF_PERIODS && (k + 1) % 4 == 0 {
            let start = partial.len().saturating_sub(40);
            let (est, err) = wynn_epsilon(&partial[start..]);
            if let Some(prev) = last_estimate {
                let drift: f64 = (est - prev).norm();
                if err.max(drift) < abs_tol * 1e-2 {
                    return Ok(QuadResult { value: est, error_estimate: err.max(drift), evaluations });
                }
            }
            last_estimate = Some(est);
        }
    }
    Err(Error::Numerical(format!(
        "oscillatory integral (kappa = {kappa}, scale = {scale}) not converged after \
         {MAX_HALF_PERIODS} half periods; last partial sum {sum}, {evaluations} evaluations"
    )))
}
