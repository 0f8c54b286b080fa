//! Globally adaptive Gauss–Kronrod (7/15) quadrature.

use crate::error::{FppError, Result};

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
    0.022_935_322_010_529_225,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
// Gauss weights for the odd-indexed Kronrod nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

const MAX_INTERVALS: usize = 4000;

#[derive(Clone, Copy, Debug)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
}

impl Tolerance {
    pub fn rel(rel: f64) -> Self {
        Tolerance { abs: 0.0, rel }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

struct Piece {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let s = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

/// ∫_a^b f, bisecting the piece with the largest error estimate until the
/// summed error meets `tol`.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: Tolerance) -> Result<Estimate> {
    if a == b {
        return Ok(Estimate { value: 0.0, error: 0.0 });
    }
    let (value, error) = gk15(&mut f, a, b);
    let mut pieces = vec![Piece { a, b, value, error }];
    loop {
        let total: f64 = pieces.iter().map(|p| p.value).sum();
        let err: f64 = pieces.iter().map(|p| p.error).sum();
        if !total.is_finite() {
            return Err(FppError::QuadratureFailure { tolerance: tol.rel, estimate: total, error: err });
        }
        if err <= tol.abs.max(tol.rel * total.abs()) {
            return Ok(Estimate { value: total, error: err });
        }
        if pieces.len() >= MAX_INTERVALS {
            return Err(FppError::QuadratureFailure { tolerance: tol.rel, estimate: total, error: err });
        }
        let worst = pieces
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.error.total_cmp(&y.1.error))
            .map(|(k, _)| k)
            .unwrap();
        let p = pieces.swap_remove(worst);
        let mid = 0.5 * (p.a + p.b);
        let (lv, le) = gk15(&mut f, p.a, mid);
        let (rv, re) = gk15(&mut f, mid, p.b);
        pieces.push(Piece { a: p.a, b: mid, value: lv, error: le });
        pieces.push(Piece { a: mid, b: p.b, value: rv, error: re });
    }
}

/// ∫_a^∞ f via `x = a + scale · t / (1 - t)`. `scale` should be of the order
/// of the decay length of `f`.
pub fn integrate_to_infinity<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    scale: f64,
    tol: Tolerance,
) -> Result<Estimate> {
    integrate(
        |t| {
            let one_minus = 1.0 - t;
            let x = a + scale * t / one_minus;
            let v = f(x);
            if v == 0.0 {
                0.0
            } else {
                v * scale / (one_minus * one_minus)
            }
        },
        0.0,
        1.0,
        tol,
    )
}
