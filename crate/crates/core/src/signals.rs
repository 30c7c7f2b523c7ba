//! Test signals with exact cell averages at any dyadic depth, plus the
//! built-in experiment signals and raster ingestion. Exactness comes from
//! closed-form antiderivatives per piece, so rendering commutes with
//! block-averaging across depths.

use crate::error::{Error, Result};
use crate::grid::FineGridFunction;
use crate::pgm;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::path::Path;

/// Depth caps under which every kind renders exactly.
pub const MAX_DEPTH_1D: u32 = 14;
pub const MAX_DEPTH_2D: u32 = 10;

#[derive(Clone, Debug)]
pub enum TestSignal {
    /// Constant on 2^depth dyadic cells (1D).
    DyadicStep { depth: u32, values: Vec<f64> },
    /// Polynomial pieces split at interior breakpoints (1D). pieces[i] holds
    /// ascending power coefficients on [breakpoints[i-1], breakpoints[i]).
    PiecewisePolynomial { breakpoints: Vec<f64>, pieces: Vec<Vec<f64>> },
    /// Polynomial plus sine waves: coeffs ascending, waves as
    /// (amplitude, frequency, phase) in amp*sin(2 pi freq x + phase) (1D).
    SmoothMix { poly: Vec<f64>, waves: Vec<(f64, f64, f64)> },
    /// |x - center|^{3/2}: finite-smoothness kink, C^1 but not C^2 (1D).
    PowerKink { center: f64 },
    /// Product bump 16 x^2 (1-x)^2 per axis plus a raised rectangle
    /// [x_lo, x_hi) x [y_lo, y_hi) of the given height (2D).
    BumpWithInset { inset: [f64; 4], height: f64 },
    /// Pixel field as cell averages, side = 2^depth, row-major (2D).
    Raster { depth: u32, values: Vec<f64> },
}

/// Antiderivative of an ascending-coefficient polynomial, zero at 0.
fn poly_integral(coeffs: &[f64], x: f64) -> f64 {
    let mut acc = 0.0;
    for (i, c) in coeffs.iter().enumerate().rev() {
        acc = acc * x + c / (i + 1) as f64;
    }
    acc * x
}

/// Integral of amp*sin(2 pi f x + phase) from 0 to x.
fn wave_integral(amp: f64, freq: f64, phase: f64, x: f64) -> f64 {
    let w = 2.0 * std::f64::consts::PI * freq;
    amp * (phase.cos() - (w * x + phase).cos()) / w
}

/// Antiderivative of |x - c|^{3/2}, zero at c.
fn kink_integral(c: f64, x: f64) -> f64 {
    let t = x - c;
    0.4 * t.signum() * t.abs().powf(2.5)
}

/// Antiderivative of the axis bump 16 t^2 (1 - t)^2.
fn bump_integral(t: f64) -> f64 {
    16.0 * (t.powi(3) / 3.0 - t.powi(4) / 2.0 + t.powi(5) / 5.0)
}

fn overlap(lo: f64, hi: f64, a: f64, b: f64) -> f64 {
    (hi.min(b) - lo.max(a)).max(0.0)
}

/// Averages 2^(from - to) consecutive fine values per coarse slot, per axis.
fn coarsen_1d(vals: &[f64], from: u32, to: u32) -> Vec<f64> {
    let ratio = 1usize << (from - to);
    vals.chunks(ratio).map(|c| c.iter().sum::<f64>() / ratio as f64).collect()
}

impl TestSignal {
    pub fn d(&self) -> u32 {
        match self {
            TestSignal::DyadicStep { .. }
            | TestSignal::PiecewisePolynomial { .. }
            | TestSignal::SmoothMix { .. }
            | TestSignal::PowerKink { .. } => 1,
            TestSignal::BumpWithInset { .. } | TestSignal::Raster { .. } => 2,
        }
    }

    /// Exact cell averages at depth q.
    pub fn render(&self, q: u32) -> Result<FineGridFunction> {
        let cap = if self.d() == 1 { MAX_DEPTH_1D } else { MAX_DEPTH_2D };
        if q > cap {
            return Err(Error::Domain(format!("render depth {q} above the {cap} cap")));
        }
        let side = 1usize << q;
        match self {
            TestSignal::DyadicStep { depth, values } => {
                if values.len() != 1usize << depth {
                    return Err(Error::DimensionMismatch(format!(
                        "{} step values at depth {depth}",
                        values.len()
                    )));
                }
                let vals = if q >= *depth {
                    (0..side).map(|j| values[j >> (q - depth)]).collect()
                } else {
                    coarsen_1d(values, *depth, q)
                };
                FineGridFunction::new(1, q, vals)
            }
            TestSignal::PiecewisePolynomial { breakpoints, pieces } => {
                if pieces.len() != breakpoints.len() + 1
                    || breakpoints.windows(2).any(|w| w[0] >= w[1])
                    || breakpoints.iter().any(|&c| !(0.0..1.0).contains(&c))
                {
                    return Err(Error::DimensionMismatch(
                        "breakpoints must be sorted in (0,1) with pieces = breaks + 1".into(),
                    ));
                }
                let mut bounds = vec![0.0];
                bounds.extend_from_slice(breakpoints);
                bounds.push(1.0);
                let integral = |a: f64, b: f64| -> f64 {
                    let mut total = 0.0;
                    for (i, piece) in pieces.iter().enumerate() {
                        let lo = a.max(bounds[i]);
                        let hi = b.min(bounds[i + 1]);
                        if lo < hi {
                            total += poly_integral(piece, hi) - poly_integral(piece, lo);
                        }
                    }
                    total
                };
                let vals = (0..side)
                    .map(|j| {
                        let a = j as f64 / side as f64;
                        let b = (j + 1) as f64 / side as f64;
                        integral(a, b) * side as f64
                    })
                    .collect();
                FineGridFunction::new(1, q, vals)
            }
            TestSignal::SmoothMix { poly, waves } => {
                let antider = |x: f64| -> f64 {
                    poly_integral(poly, x)
                        + waves
                            .iter()
                            .map(|&(a, f, p)| wave_integral(a, f, p, x))
                            .sum::<f64>()
                };
                let vals = (0..side)
                    .map(|j| {
                        let a = j as f64 / side as f64;
                        let b = (j + 1) as f64 / side as f64;
                        (antider(b) - antider(a)) * side as f64
                    })
                    .collect();
                FineGridFunction::new(1, q, vals)
            }
            TestSignal::PowerKink { center } => {
                let vals = (0..side)
                    .map(|j| {
                        let a = j as f64 / side as f64;
                        let b = (j + 1) as f64 / side as f64;
                        (kink_integral(*center, b) - kink_integral(*center, a)) * side as f64
                    })
                    .collect();
                FineGridFunction::new(1, q, vals)
            }
            TestSignal::BumpWithInset { inset, height } => {
                let axis_avg: Vec<f64> = (0..side)
                    .map(|j| {
                        let a = j as f64 / side as f64;
                        let b = (j + 1) as f64 / side as f64;
                        (bump_integral(b) - bump_integral(a)) * side as f64
                    })
                    .collect();
                let [x_lo, x_hi, y_lo, y_hi] = *inset;
                let mut vals = Vec::with_capacity(side * side);
                for i1 in 0..side {
                    let a1 = i1 as f64 / side as f64;
                    let b1 = (i1 + 1) as f64 / side as f64;
                    let cover1 = overlap(a1, b1, x_lo, x_hi) * side as f64;
                    for i2 in 0..side {
                        let a2 = i2 as f64 / side as f64;
                        let b2 = (i2 + 1) as f64 / side as f64;
                        let cover2 = overlap(a2, b2, y_lo, y_hi) * side as f64;
                        vals.push(axis_avg[i1] * axis_avg[i2] + height * cover1 * cover2);
                    }
                }
                FineGridFunction::new(2, q, vals)
            }
            TestSignal::Raster { depth, values } => {
                let s = 1usize << depth;
                if values.len() != s * s {
                    return Err(Error::DimensionMismatch(format!(
                        "{} raster values at depth {depth}",
                        values.len()
                    )));
                }
                let vals = if q >= *depth {
                    let shift = q - depth;
                    (0..side * side)
                        .map(|p| values[((p / side) >> shift) * s + ((p % side) >> shift)])
                        .collect()
                } else {
                    // Average rows down first, then columns.
                    let rows: Vec<f64> = (0..(1usize << q) * s)
                        .map(|p| {
                            let (r, c) = (p / s, p % s);
                            let ratio = 1usize << (depth - q);
                            (0..ratio).map(|k| values[(r * ratio + k) * s + c]).sum::<f64>()
                                / ratio as f64
                        })
                        .collect();
                    (0..side * side)
                        .map(|p| {
                            let (r, c) = (p / side, p % side);
                            let ratio = 1usize << (depth - q);
                            (0..ratio).map(|k| rows[r * s + c * ratio + k]).sum::<f64>()
                                / ratio as f64
                        })
                        .collect()
                };
                FineGridFunction::new(2, q, vals)
            }
        }
    }
}

/// The unit Haar wavelet psi_{0,0}: +1 then -1. In every Haar space of
/// level >= 1, so the generalized-sampling figure scenario recovers it
/// exactly.
pub fn builtin_haar_wavelet() -> TestSignal {
    TestSignal::DyadicStep { depth: 1, values: vec![1.0, -1.0] }
}

/// Cubic with two jump discontinuities at non-dyadic points 1/3 and 0.79.
pub fn builtin_poly_jumps() -> TestSignal {
    let base = vec![0.2, 1.0, -1.5, 0.8];
    let mut mid = base.clone();
    mid[0] += 0.75;
    let mut tail = base.clone();
    tail[0] -= 0.6;
    TestSignal::PiecewisePolynomial {
        breakpoints: vec![1.0 / 3.0, 0.79],
        pieces: vec![base, mid, tail],
    }
}

/// Smooth 1D signal: one sine plus a quadratic drift.
pub fn builtin_smooth() -> TestSignal {
    TestSignal::SmoothMix { poly: vec![0.0, 0.0, 0.3], waves: vec![(1.0, 1.0, 0.7)] }
}

/// |x - 0.371|^{3/2}: square-integrable second differences but no more,
/// the finite-smoothness probe for wavelet decay rates.
pub fn builtin_power_kink() -> TestSignal {
    TestSignal::PowerKink { center: 0.371 }
}

/// Smooth 2D bump with a raised dyadic rectangle inset.
pub fn builtin_bump_inset() -> TestSignal {
    TestSignal::BumpWithInset { inset: [0.625, 0.875, 0.125, 0.375], height: 0.5 }
}

/// Reads a PGM as a 2D signal: values normalized by maxval, zero-padded to
/// the next power of two.
pub fn load_raster(path: &Path) -> Result<TestSignal> {
    raster_from_pgm(&pgm::read_pgm(path)?)
}

pub fn raster_from_pgm(img: &pgm::Pgm) -> Result<TestSignal> {
    let side = img.width.max(img.height).next_power_of_two().max(1);
    let depth = side.trailing_zeros();
    if depth > MAX_DEPTH_2D {
        return Err(Error::Domain(format!("raster side {side} above the 2^{MAX_DEPTH_2D} cap")));
    }
    let mut values = vec![0.0; side * side];
    for r in 0..img.height {
        for c in 0..img.width {
            values[r * side + c] = img.pixels[r * img.width + c] as f64 / img.maxval as f64;
        }
    }
    Ok(TestSignal::Raster { depth, values })
}

/// Seeded iid uniform(-1,1) cell values; the random test-signal pool.
pub fn seeded_random_grid(d: u32, q: u32, seed: u64) -> Result<FineGridFunction> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cells = 1usize << (d * q);
    let vals = (0..cells).map(|_| rng.gen_range(-1.0..1.0)).collect();
    FineGridFunction::new(d, q, vals)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    /// Exact cell averages must commute with dyadic coarsening.
    fn check_depth_consistency(sig: &TestSignal, q: u32) {
        let fine = sig.render(q + 2).unwrap();
        let coarse = sig.render(q).unwrap();
        let blocked = fine.block_average(q);
        for (a, b) in coarse.values.iter().zip(&blocked.values) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn dyadic_step_replicates_and_averages() {
        let sig = TestSignal::DyadicStep { depth: 2, values: vec![1.0, 3.0, -2.0, 0.0] };
        let fine = sig.render(4).unwrap();
        assert_eq!(fine.values[0..4], [1.0; 4]);
        assert_eq!(fine.values[4..8], [3.0; 4]);
        let coarse = sig.render(1).unwrap();
        assert_eq!(coarse.values, vec![2.0, -1.0]);
        check_depth_consistency(&sig, 3);
    }

    #[test]
    fn piecewise_polynomial_matches_midpoint_quadrature() {
        let sig = builtin_poly_jumps();
        let q = 6u32;
        let rendered = sig.render(q).unwrap();
        let side = 1usize << q;
        // Midpoint rule; jump cells converge at first order (error about
        // jump/sub = 5e-5), smooth cells much faster.
        let sub = 1usize << 14;
        let eval = |x: f64| -> f64 {
            let base = 0.2 + x * (1.0 - x * (1.5 - 0.8 * x));
            let step = if x >= 0.79 {
                -0.6
            } else if x >= 1.0 / 3.0 {
                0.75
            } else {
                0.0
            };
            base + step
        };
        for j in 0..side {
            let mut acc = 0.0;
            for s in 0..sub {
                let x = (j as f64 + (s as f64 + 0.5) / sub as f64) / side as f64;
                acc += eval(x);
            }
            let expect = acc / sub as f64;
            assert!(
                (rendered.values[j] - expect).abs() < 1e-4,
                "cell {j}: {} vs {expect}",
                rendered.values[j]
            );
        }
        check_depth_consistency(&sig, 8);
    }

    #[test]
    fn smooth_mix_matches_quadrature_and_coarsening() {
        let sig = builtin_smooth();
        let rendered = sig.render(4).unwrap();
        let sub = 4096usize;
        for j in 0..16 {
            let mut acc = 0.0;
            for s in 0..sub {
                let x = (j as f64 + (s as f64 + 0.5) / sub as f64) / 16.0;
                acc += 0.3 * x * x + (2.0 * std::f64::consts::PI * x + 0.7).sin();
            }
            assert_abs_diff_eq!(rendered.values[j], acc / sub as f64, epsilon = 1e-8);
        }
        check_depth_consistency(&sig, 9);
    }

    #[test]
    fn power_kink_cell_averages_are_exact() {
        let sig = builtin_power_kink();
        let rendered = sig.render(5).unwrap();
        let sub = 1usize << 12;
        for j in 0..32 {
            let mut acc = 0.0;
            for s in 0..sub {
                let x = (j as f64 + (s as f64 + 0.5) / sub as f64) / 32.0;
                acc += (x - 0.371f64).abs().powf(1.5);
            }
            assert_abs_diff_eq!(rendered.values[j], acc / sub as f64, epsilon = 1e-7);
        }
        check_depth_consistency(&sig, 9);
    }

    #[test]
    fn bump_inset_combines_product_and_coverage() {
        let sig = builtin_bump_inset();
        let q = 4u32;
        let rendered = sig.render(q).unwrap();
        let side = 1usize << q;
        let axis: Vec<f64> = (0..side)
            .map(|j| {
                let a = j as f64 / side as f64;
                let b = (j + 1) as f64 / side as f64;
                (bump_integral(b) - bump_integral(a)) * side as f64
            })
            .collect();
        // Cell fully inside the inset.
        let (i1, i2) = (11, 3);
        assert_abs_diff_eq!(
            rendered.values[i1 * side + i2],
            axis[i1] * axis[i2] + 0.5,
            epsilon = 1e-13
        );
        // Cell fully outside.
        assert_abs_diff_eq!(rendered.values[0], axis[0] * axis[0], epsilon = 1e-13);
        check_depth_consistency(&sig, 6);
    }

    #[test]
    fn raster_pads_and_normalizes() {
        let img = pgm::Pgm {
            width: 3,
            height: 3,
            maxval: 255,
            pixels: vec![255, 0, 0, 0, 255, 0, 0, 0, 255],
        };
        let sig = raster_from_pgm(&img).unwrap();
        let TestSignal::Raster { depth, ref values } = sig else { panic!("kind") };
        assert_eq!(depth, 2);
        assert_eq!(values.len(), 16);
        assert_eq!(values[0], 1.0);
        assert_eq!(values[3], 0.0);
        assert_eq!(values[15], 0.0);
        // Constant field stays constant at any depth.
        let flat = pgm::Pgm { width: 4, height: 4, maxval: 255, pixels: vec![128; 16] };
        let flat_sig = raster_from_pgm(&flat).unwrap();
        let rendered = flat_sig.render(3).unwrap();
        assert!(rendered.values.iter().all(|&v| (v - 128.0 / 255.0).abs() < 1e-15));
        check_depth_consistency(&sig, 3);
    }

    #[test]
    fn depth_caps_are_enforced() {
        assert!(builtin_smooth().render(15).is_err());
        assert!(builtin_bump_inset().render(11).is_err());
        assert!(builtin_smooth().render(14).is_ok());
    }

    #[test]
    fn haar_wavelet_builtin_is_the_wavelet() {
        let f = builtin_haar_wavelet().render(4).unwrap();
        assert!(f.values[..8].iter().all(|&v| v == 1.0));
        assert!(f.values[8..].iter().all(|&v| v == -1.0));
        assert_abs_diff_eq!(f.norm(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn seeded_grids_are_deterministic() {
        let a = seeded_random_grid(1, 6, 42).unwrap();
        let b = seeded_random_grid(1, 6, 42).unwrap();
        let c = seeded_random_grid(1, 6, 43).unwrap();
        assert_eq!(a.values, b.values);
        assert_ne!(a.values, c.values);
    }
}
