//! Quadrature reference for the subsampled Gaussian RDP.
//!
//! Slow and independent of the closed-form expansion in the parent module:
//! the Rényi divergence `ln E_{x~P'}[(P(x)/P'(x))^alpha] / (alpha - 1)` is
//! integrated numerically over the real line for the pair
//! `mix = (1-q) N(0, sigma^2) + q N(1, sigma^2)` and `base = N(0, sigma^2)`,
//! in both directions. The larger of the two is returned.

use crate::error::{Error, Result};

const REL_TOL: f64 = 1e-13;
const MAX_DEPTH: usize = 40;
/// Integration reaches this many standard deviations past the outermost mode.
const TAIL_SIGMAS: f64 = 40.0;

// Gauss-Kronrod 7/15 nodes on [-1, 1] (nonnegative half, descending).
#[allow(clippy::excessive_precision)]
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
#[allow(clippy::excessive_precision)]
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
// Gauss weights for XGK[1], XGK[3], XGK[5], XGK[7].
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Returns `(kronrod, |kronrod - gauss|)` over `[a, b]`.
fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let pair = f(c - dx) + f(c + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

/// `noise` is the relative evaluation noise of `f`; error estimates below
/// `noise * |k|` are not meaningful.
fn adaptive(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    abs_tol: f64,
    noise: f64,
    depth: usize,
) -> Result<f64> {
    let (k, err) = gk15(f, a, b);
    if err <= abs_tol || err <= noise * k.abs() {
        return Ok(k);
    }
    if depth >= MAX_DEPTH {
        return Err(Error::Quadrature(format!(
            "interval [{a}, {b}] still has error {err:e} > {abs_tol:e} at depth {depth}"
        )));
    }
    let m = 0.5 * (a + b);
    let left = adaptive(f, a, m, 0.5 * abs_tol, noise, depth + 1)?;
    let right = adaptive(f, m, b, 0.5 * abs_tol, noise, depth + 1)?;
    Ok(left + right)
}

/// `ln(integral of exp(log_f))` over `[lo, hi]`, integrating on panels of
/// width `panel` after shifting by the largest sampled log value.
fn log_integral(log_f: impl Fn(f64) -> f64, lo: f64, hi: f64, panel: f64) -> Result<f64> {
    let panels = ((hi - lo) / panel).ceil().max(1.0) as usize;
    let width = (hi - lo) / panels as f64;
    let edges: Vec<f64> = (0..=panels).map(|i| lo + i as f64 * width).collect();

    // Sample densely enough that the shift is within a small factor of the peak.
    let mut shift = f64::NEG_INFINITY;
    for w in edges.windows(2) {
        for s in 0..4 {
            shift = shift.max(log_f(w[0] + s as f64 * 0.25 * (w[1] - w[0])));
        }
    }
    if !shift.is_finite() {
        return Err(Error::Quadrature(format!("integrand peak is not finite ({shift})")));
    }
    let f = |x: f64| (log_f(x) - shift).exp();

    let coarse: Vec<f64> = edges.windows(2).map(|w| gk15(&f, w[0], w[1]).0).collect();
    let total: f64 = coarse.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::Quadrature(format!("degenerate integral estimate {total}")));
    }
    let panel_tol = REL_TOL * total / panels as f64;
    // exp(log_f - shift) inherits the absolute rounding error of log_f.
    let noise = 64.0 * f64::EPSILON * shift.abs().max(1.0);
    let mut sum = 0.0;
    for w in edges.windows(2) {
        sum += adaptive(&f, w[0], w[1], panel_tol, noise, 0)?;
    }
    Ok(shift + sum.ln())
}

/// Reference RDP of the Poisson-subsampled Gaussian at order `alpha`
/// (max over both divergence directions), by numerical integration.
pub fn oracle_rdp_subsampled(alpha: f64, sigma: f64, q: f64) -> Result<f64> {
    if !(alpha > 1.0) || !alpha.is_finite() {
        return Err(Error::invalid("alpha", format!("order must exceed 1, got {alpha}")));
    }
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::invalid("sigma", format!("must be positive, got {sigma}")));
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::invalid("q", format!("must lie in [0, 1], got {q}")));
    }

    let var2 = 2.0 * sigma * sigma;
    let log_norm = -(sigma * (2.0 * std::f64::consts::PI).sqrt()).ln();
    let log_base = move |z: f64| log_norm - z * z / var2;
    // ln(mix(z) / base(z)) = ln((1 - q) + q exp((2z - 1) / (2 sigma^2)))
    let log_ratio = move |z: f64| {
        let u = (2.0 * z - 1.0) / var2;
        if q == 0.0 {
            0.0
        } else if q == 1.0 {
            u
        } else {
            let a = (-q).ln_1p();
            let b = q.ln() + u;
            let m = a.max(b);
            m + ((a - m).exp() + (b - m).exp()).ln()
        }
    };

    let reach = TAIL_SIGMAS * sigma + 2.0;
    let (lo, hi) = (-alpha - reach, alpha + reach);
    let panel = 0.5 * sigma;

    // E_base[(mix/base)^alpha] = integral of base * (mix/base)^alpha
    let forward = log_integral(|z| log_base(z) + alpha * log_ratio(z), lo, hi, panel)?;
    // E_mix[(base/mix)^alpha] = integral of base * (mix/base)^(1 - alpha)
    let reverse = log_integral(|z| log_base(z) - (alpha - 1.0) * log_ratio(z), lo, hi, panel)?;

    let rdp = forward.max(reverse) / (alpha - 1.0);
    Ok(rdp.max(0.0))
}
