//! Basis-truncation decay experiments: squared L2 truncation errors over a
//! size sweep and the fitted log-log rate. Errors come from Parseval tail
//! sums on the fine grid, so they are exact for the grid-rendered signal.

use crate::error::{Error, Result};
use crate::grid::FineGridFunction;
use crate::signals::TestSignal;
use crate::walsh::{fwht_sequency, fwht_sequency_2d};
use crate::wavelet::{Family, OrthoBasis};

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum TruncationBasis {
    /// Sequency-ordered Walsh prefix (any length in 1D, square in 2D).
    Walsh,
    /// Multiresolution spaces of the family; sizes must be 2^R (1D) or
    /// 4^R (2D).
    Wavelet(Family),
}

#[derive(Clone, Debug)]
pub struct DecayReport {
    /// (N, squared truncation error), in the order requested.
    pub table: Vec<(usize, f64)>,
    /// Log-log slope fitted over the largest 4 dyadic sizes with nonzero
    /// error; -inf when the tail is identically zero there.
    pub slope: f64,
    /// Root-mean-square residual of that fit.
    pub fit_residual: f64,
}

/// Least-squares slope of ln(eps) against ln(N) over the largest 4 dyadic
/// sizes. Small sizes are excluded on purpose: rates are asymptotic.
fn fit_slope(table: &[(usize, f64)]) -> (f64, f64) {
    let mut pts: Vec<(f64, f64)> = table
        .iter()
        .filter(|(n, _)| n.is_power_of_two())
        .map(|&(n, e)| (n, e))
        .collect::<Vec<_>>()
        .into_iter()
        .rev()
        .take(4)
        .filter(|&(_, e)| e > 1e-28)
        .map(|(n, e)| ((n as f64).ln(), e.ln()))
        .collect();
    pts.reverse();
    if pts.len() < 2 {
        return (f64::NEG_INFINITY, 0.0);
    }
    let n = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), &(x, y)| (a + x, b + y));
    let (mx, my) = (sx / n, sy / n);
    let sxx: f64 = pts.iter().map(|&(x, _)| (x - mx) * (x - mx)).sum();
    let sxy: f64 = pts.iter().map(|&(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let icept = my - slope * mx;
    let res: f64 = pts.iter().map(|&(x, y)| (y - slope * x - icept).powi(2)).sum::<f64>() / n;
    (slope, res.sqrt())
}

/// Squared Walsh coefficient tail sums at every cut in n_list. Suffix
/// accumulation keeps the table exactly non-increasing.
fn walsh_tails(f: &FineGridFunction, n_list: &[usize]) -> Result<Vec<f64>> {
    // c_n = <f, w_n> = cell_weight^{1/2} * fwht(f)[n] (the transform is
    // 2^{-q/2}-normalized per axis), so each energy is fwht^2 * cell weight.
    let w = f.cell_weight();
    let energies: Vec<f64> = match f.d {
        1 => {
            let mut buf = f.values.clone();
            fwht_sequency(&mut buf)?;
            buf.iter().map(|v| v * v * w).collect()
        }
        _ => {
            let mut buf = f.values.clone();
            fwht_sequency_2d(&mut buf, f.q)?;
            buf.iter().map(|v| v * v * w).collect()
        }
    };
    let side = 1usize << f.q;
    match f.d {
        1 => {
            let mut suffix = vec![0.0; side + 1];
            for i in (0..side).rev() {
                suffix[i] = suffix[i + 1] + energies[i];
            }
            n_list
                .iter()
                .map(|&n| {
                    if n > side {
                        Err(Error::DepthTooSmall { have: f.q, need: (n as u32).ilog2() })
                    } else {
                        Ok(suffix[n])
                    }
                })
                .collect()
        }
        _ => {
            // Square truncation: keep sequency indices below m on both axes,
            // N = m^2.
            n_list
                .iter()
                .map(|&n| {
                    let m = (n as f64).sqrt().round() as usize;
                    if m * m != n {
                        return Err(Error::Domain(format!(
                            "2D Walsh truncation size {n} is not a square"
                        )));
                    }
                    if m > side {
                        return Err(Error::DepthTooSmall { have: f.q, need: (m as u32).ilog2() });
                    }
                    let mut tail = 0.0;
                    for n1 in 0..side {
                        for n2 in 0..side {
                            if n1 >= m || n2 >= m {
                                tail += energies[n1 * side + n2];
                            }
                        }
                    }
                    Ok(tail)
                })
                .collect()
        }
    }
}

/// Squared distance to the level-R multiresolution space on the grid.
fn wavelet_tail(f: &FineGridFunction, family: Family, n: usize) -> Result<f64> {
    let per_axis = match f.d {
        1 => n,
        _ => {
            let m = (n as f64).sqrt().round() as usize;
            if m * m != n {
                return Err(Error::Domain(format!(
                    "2D wavelet truncation size {n} is not a square"
                )));
            }
            m
        }
    };
    if !per_axis.is_power_of_two() {
        return Err(Error::Domain(format!("wavelet truncation size {n} is not dyadic")));
    }
    let r = per_axis.trailing_zeros();
    let basis = OrthoBasis::new(family, r, f.q)?;
    match f.d {
        1 => {
            let coeffs = basis.analyze(f)?;
            let kept: f64 = coeffs.iter().map(|c| c * c).sum();
            Ok((f.norm().powi(2) - kept).max(0.0))
        }
        _ => {
            let side = 1usize << f.q;
            let nb = basis.n();
            let dense = basis.dense_matrix_at(f.q);
            // C = w^2 B^T F B, with w the per-axis cell weight.
            let w = 1.0 / side as f64;
            let mut fb = vec![0.0; side * nb];
            for i in 0..side {
                for j in 0..nb {
                    let mut acc = 0.0;
                    for k in 0..side {
                        acc += f.values[i * side + k] * dense[(k, j)];
                    }
                    fb[i * nb + j] = acc;
                }
            }
            let mut kept = 0.0;
            for j1 in 0..nb {
                for j2 in 0..nb {
                    let mut acc = 0.0;
                    for i in 0..side {
                        acc += dense[(i, j1)] * fb[i * nb + j2];
                    }
                    kept += (acc * w * w) * (acc * w * w);
                }
            }
            Ok((f.norm().powi(2) - kept).max(0.0))
        }
    }
}

/// Renders the signal at depth q and tabulates eps(N) = ||f - f_N||^2 for
/// each requested size, with the fitted decay rate.
pub fn truncation_error(
    sig: &TestSignal,
    basis: TruncationBasis,
    n_list: &[usize],
    q: u32,
) -> Result<DecayReport> {
    if n_list.is_empty() || n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Domain("size list must be ascending and nonempty".into()));
    }
    let f = sig.render(q)?;
    let eps = match basis {
        TruncationBasis::Walsh => walsh_tails(&f, n_list)?,
        TruncationBasis::Wavelet(family) => n_list
            .iter()
            .map(|&n| wavelet_tail(&f, family, n))
            .collect::<Result<Vec<f64>>>()?,
    };
    let table: Vec<(usize, f64)> = n_list.iter().cloned().zip(eps).collect();
    let (slope, fit_residual) = fit_slope(&table);
    Ok(DecayReport { table, slope, fit_residual })
}
