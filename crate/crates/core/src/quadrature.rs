//! Adaptive Gauss–Kronrod quadrature and a panel driver for oscillatory
//! integrals over the half line.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

// 15-point Kronrod nodes on [-1, 1] (non-negative half) with the embedded
// 7-point Gauss rule.
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
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub abs_error: f64,
    pub subdivisions: usize,
}

/// One G7K15 evaluation on `[a, b]`: `(kronrod, |kronrod - gauss|)`.
pub fn gauss_kronrod<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let centre = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(centre);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for (j, (&x, &w)) in XGK.iter().zip(WGK.iter()).take(7).enumerate() {
        let dx = half * x;
        let pair = f(centre - dx) + f(centre + dx);
        kronrod += w * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

struct Piece {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Piece {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Globally adaptive integration on `[a, b]`, bisecting the interval with
/// the largest error estimate until `error <= max(abs_tol, rel_tol * |I|)`.
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_subdivisions: usize,
) -> Result<Estimate> {
    let (value, error) = gauss_kronrod(&f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Piece { a, b, value, error });
    let mut total = value;
    let mut total_err = error;
    let mut subdivisions = 0;
    loop {
        if !total.is_finite() {
            return Err(Error::NonFinite("quadrature integrand"));
        }
        if total_err <= abs_tol.max(rel_tol * total.abs()) {
            break;
        }
        if subdivisions >= max_subdivisions {
            return Err(Error::Quadrature {
                achieved: total_err,
                subdivisions,
            });
        }
        let worst = heap.pop().expect("heap holds every piece");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // interval exhausted at machine precision
            heap.push(worst);
            return Err(Error::Quadrature {
                achieved: total_err,
                subdivisions,
            });
        }
        let (lv, le) = gauss_kronrod(&f, worst.a, mid);
        let (rv, re) = gauss_kronrod(&f, mid, worst.b);
        total += lv + rv - worst.value;
        total_err += le + re - worst.error;
        heap.push(Piece {
            a: worst.a,
            b: mid,
            value: lv,
            error: le,
        });
        heap.push(Piece {
            a: mid,
            b: worst.b,
            value: rv,
            error: re,
        });
        subdivisions += 1;
    }
    // re-sum to shed drift from the running updates
    let (value, abs_error) = heap.iter().fold((0.0, 0.0), |(v, e), p| (v + p.value, e + p.error));
    Ok(Estimate {
        value,
        abs_error,
        subdivisions,
    })
}

/// Wynn's epsilon algorithm applied to a sequence of partial sums; returns
/// the extrapolated limit from the highest even column.
pub fn wynn_epsilon(sums: &[f64]) -> f64 {
    let n = sums.len();
    if n < 3 {
        return sums.last().copied().unwrap_or(0.0);
    }
    let mut prev = vec![0.0; n + 1];
    let mut cur: Vec<f64> = sums.to_vec();
    let mut best = sums[n - 1];
    let mut column = 0;
    while cur.len() > 1 {
        let next: Vec<f64> = (0..cur.len() - 1)
            .map(|i| {
                let d = cur[i + 1] - cur[i];
                if d == 0.0 {
                    f64::INFINITY
                } else {
                    prev[i + 1] + 1.0 / d
                }
            })
            .collect();
        column += 1;
        if next.iter().any(|v| !v.is_finite()) {
            break;
        }
        if column % 2 == 0 {
            best = *next.last().expect("non-empty column");
        }
        prev = cur;
        cur = next;
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfLine {
    /// Panel width, ideally half the asymptotic oscillation period.
    pub panel: f64,
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Stop once the envelope bound falls below this, regardless of `abs_tol`.
    pub envelope_tol: f64,
    pub max_panels: usize,
}

/// `∫_0^∞ f(u) du` for an oscillatory `f` with `|f(u)| <= envelope(u)`,
/// `envelope` non-increasing. Panels are integrated in turn; the sum stops
/// when the envelope is negligible, or when Wynn extrapolation of the
/// partial sums settles.
pub fn half_line<F, E>(f: F, envelope: E, cfg: &HalfLine) -> Result<Estimate>
where
    F: Fn(f64) -> f64,
    E: Fn(f64) -> f64,
{
    const WINDOW: usize = 40;
    const MIN_PANELS: usize = 16;
    let mut sum: f64 = 0.0;
    let mut err = 0.0;
    let mut subdivisions = 0;
    let mut partial = Vec::new();
    let mut last_extrapolated = f64::NAN;
    let mut settled = 0;
    for k in 0..cfg.max_panels {
        let a = k as f64 * cfg.panel;
        let b = a + cfg.panel;
        let target = cfg.abs_tol.max(cfg.rel_tol * sum.abs());
        let piece = integrate(&f, a, b, 1e-3 * target, 1e-13, 400)?;
        sum += piece.value;
        err += piece.abs_error;
        subdivisions += piece.subdivisions + 1;
        partial.push(sum);

        let env = envelope(b);
        let target = cfg.abs_tol.max(cfg.rel_tol * sum.abs());
        if env < cfg.envelope_tol || env * cfg.panel < 1e-3 * target {
            return Ok(Estimate {
                value: sum,
                abs_error: err + env * cfg.panel,
                subdivisions,
            });
        }
        if partial.len() >= MIN_PANELS {
            let window = &partial[partial.len().saturating_sub(WINDOW)..];
            let extrapolated = wynn_epsilon(window);
            let change = (extrapolated - last_extrapolated).abs();
            if change < 0.1 * target {
                settled += 1;
            } else {
                settled = 0;
            }
            last_extrapolated = extrapolated;
            if settled >= 3 {
                return Ok(Estimate {
                    value: extrapolated,
                    abs_error: err + change,
                    subdivisions,
                });
            }
        }
    }
    Err(Error::Quadrature {
        achieved: envelope(cfg.max_panels as f64 * cfg.panel) * cfg.panel,
        subdivisions,
    })
}
