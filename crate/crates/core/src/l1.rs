//! Minimum-l1 coefficient recovery under exact measurement consistency:
//! min ||alpha||_1 subject to the first M measurements of alpha matching the
//! data. The measurement section is exposed as an operator (apply + adjoint)
//! so the coefficient window can extend past any assembled Gramian.

use crate::error::{Error, Result};
use crate::gramian::{augment_complex, haar_walsh_entry, CrossGramian, GramEntries};
use crate::wavelet::BasisKind;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

/// A finite section of the measurement operator: M rows of measurements over
/// a working bandwidth of K coefficient columns.
pub trait MeasurementOp {
    fn rows(&self) -> usize;
    fn cols(&self) -> usize;
    fn apply(&self, z: &[Complex64]) -> Vec<Complex64>;
    fn adjoint(&self, w: &[Complex64]) -> Vec<Complex64>;
}

/// Dense measurement section. Real-entry sections apply to the real and
/// imaginary parts separately, so complex iterates stay exact.
pub struct DenseOp {
    entries: GramEntries,
}

impl DenseOp {
    pub fn new(entries: GramEntries) -> Self {
        DenseOp { entries }
    }

    /// First m rows and k columns of an assembled cross-Gramian.
    pub fn from_gramian(g: &CrossGramian, m: usize, k: usize) -> Result<Self> {
        if m > g.m() || k > g.n() {
            return Err(Error::DimensionMismatch(format!(
                "section {m}x{k} of a {}x{} gramian",
                g.m(),
                g.n()
            )));
        }
        let entries = match &g.entries {
            GramEntries::Real(a) => GramEntries::Real(a.view((0, 0), (m, k)).into_owned()),
            GramEntries::Complex(a) => GramEntries::Complex(a.view((0, 0), (m, k)).into_owned()),
        };
        Ok(DenseOp { entries })
    }

    /// The 1D binary-measurement section in wavelet order: row n is the
    /// sequency-n functional, column 0 the unit scaling function, column
    /// j >= 1 the wavelet at level floor(log2 j), shift j - 2^level. Every
    /// entry has a closed form, so the bandwidth is unrestricted. Defaults
    /// to k = 4m.
    pub fn haar_walsh(m: usize, bandwidth: Option<usize>) -> Result<Self> {
        let k = bandwidth.unwrap_or(4 * m);
        if k == 0 || m == 0 {
            return Err(Error::DimensionMismatch("empty operator section".into()));
        }
        let mut mat = DMatrix::zeros(m, k);
        for j in 0..k {
            let (kind, level, shift) = if j == 0 {
                (BasisKind::Scaling, 0u32, 0u64)
            } else {
                let level = j.ilog2();
                (BasisKind::Wavelet, level, (j - (1usize << level)) as u64)
            };
            for n in 0..m {
                mat[(n, j)] = haar_walsh_entry(kind, level, &[shift], &[n as u64])?;
            }
        }
        Ok(DenseOp { entries: GramEntries::Real(mat) })
    }

}

impl MeasurementOp for DenseOp {
    fn rows(&self) -> usize {
        self.entries.nrows()
    }

    fn cols(&self) -> usize {
        self.entries.ncols()
    }

    fn apply(&self, z: &[Complex64]) -> Vec<Complex64> {
        match &self.entries {
            GramEntries::Real(a) => {
                let re = DVector::from_iterator(z.len(), z.iter().map(|c| c.re));
                let im = DVector::from_iterator(z.len(), z.iter().map(|c| c.im));
                let yr = a * re;
                let yi = a * im;
                (0..a.nrows()).map(|i| Complex64::new(yr[i], yi[i])).collect()
            }
            GramEntries::Complex(a) => {
                let v = DVector::from_column_slice(z);
                (a * v).iter().cloned().collect()
            }
        }
    }

    fn adjoint(&self, w: &[Complex64]) -> Vec<Complex64> {
        match &self.entries {
            GramEntries::Real(a) => {
                let re = DVector::from_iterator(w.len(), w.iter().map(|c| c.re));
                let im = DVector::from_iterator(w.len(), w.iter().map(|c| c.im));
                let zr = a.tr_mul(&re);
                let zi = a.tr_mul(&im);
                (0..a.ncols()).map(|i| Complex64::new(zr[i], zi[i])).collect()
            }
            GramEntries::Complex(a) => {
                let v = DVector::from_column_slice(w);
                (a.adjoint() * v).iter().cloned().collect()
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct L1Params {
    pub max_iters: usize,
    /// l2 gate on ||A alpha - b|| for the reachability precheck; also sets
    /// the scale of the splitting-residual exit tests.
    pub feas_tol: f64,
    /// Relative agreement required between the two splitting copies of the
    /// objective before exit.
    pub obj_tol: f64,
    /// Soft-threshold level of the coefficient update; the dual update runs
    /// at the reciprocal penalty, fixed across iterations.
    pub step: f64,
}

impl Default for L1Params {
    fn default() -> Self {
        L1Params { max_iters: 50_000, feas_tol: 1e-8, obj_tol: 1e-6, step: 0.999 }
    }
}

#[derive(Clone, Debug)]
pub struct L1Report {
    pub coeffs: Vec<Complex64>,
    pub objective: f64,
    pub feasibility: f64,
    pub iterations: usize,
}

fn l1_norm(z: &[Complex64]) -> f64 {
    z.iter().map(|c| c.norm()).sum()
}

fn l2_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt()
}

/// Componentwise complex soft threshold at t.
fn shrink(z: &mut [Complex64], t: f64) {
    for c in z.iter_mut() {
        let mag = c.norm();
        *c = if mag <= t { Complex64::new(0.0, 0.0) } else { *c * (1.0 - t / mag) };
    }
}

/// The operator section as the real-embedded dense matrix, built column by
/// column through unit applies so any MeasurementOp qualifies.
fn materialize_augmented<O: MeasurementOp + ?Sized>(op: &O) -> DMatrix<f64> {
    let (m, k) = (op.rows(), op.cols());
    let mut dense = DMatrix::zeros(m, k);
    let mut unit = vec![Complex64::new(0.0, 0.0); k];
    for j in 0..k {
        unit[j] = Complex64::new(1.0, 0.0);
        let col = op.apply(&unit);
        unit[j] = Complex64::new(0.0, 0.0);
        for i in 0..m {
            dense[(i, j)] = col[i];
        }
    }
    augment_complex(&dense)
}

fn stack_complex(v: &[Complex64]) -> DVector<f64> {
    let k = v.len();
    let mut out = DVector::zeros(2 * k);
    for (j, z) in v.iter().enumerate() {
        out[j] = z.re;
        out[j + k] = z.im;
    }
    out
}

fn unstack_complex(v: &DVector<f64>) -> Vec<Complex64> {
    let k = v.len() / 2;
    (0..k).map(|j| Complex64::new(v[j], v[j + k])).collect()
}

/// Minimum-l1 coefficients consistent with the data, by alternating-direction
/// splitting between the consistency constraint and the objective: one copy
/// of the iterate is projected exactly onto the data-consistent affine set
/// (least squares through the real-embedded SVD, factored once), the other
/// copy is soft-thresholded at a fixed step, and a scaled dual variable ties
/// them together. Exit requires both splitting residuals at the feasibility
/// scale and the two objective copies in relative agreement. Data outside the
/// operator range fails up front; hitting the iteration cap reports the
/// residual reached.
pub fn l1_consistent<O: MeasurementOp + ?Sized>(
    op: &O,
    b: &[Complex64],
    params: &L1Params,
) -> Result<L1Report> {
    let (m, k) = (op.rows(), op.cols());
    if b.len() != m {
        return Err(Error::DimensionMismatch(format!("{} samples for {m} rows", b.len())));
    }
    if k < m {
        return Err(Error::DimensionMismatch(format!(
            "bandwidth {k} below the measurement count {m}"
        )));
    }
    if !(params.step > 0.0 && params.step < 1.0) {
        return Err(Error::Domain(format!("step {} outside (0,1)", params.step)));
    }
    let bnorm = b.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if bnorm == 0.0 {
        return Ok(L1Report {
            coeffs: vec![Complex64::new(0.0, 0.0); k],
            objective: 0.0,
            feasibility: 0.0,
            iterations: 0,
        });
    }

    let aug = materialize_augmented(op);
    let rhs = stack_complex(b);
    let svd = aug.clone().svd(true, true);
    // Relative rank cutoff; rank-deficient sections project onto the
    // reachable part of the data, which the precheck bounds.
    let cut = svd.singular_values.max() * 1e-13;
    let least = svd
        .solve(&rhs, cut)
        .map_err(|e| Error::Domain(format!("least squares failed: {e}")))?;
    let reachable = (&aug * &least - &rhs).norm();
    if reachable > params.feas_tol {
        return Err(Error::Infeasible { residual: reachable });
    }
    let project = |v: &[Complex64]| -> Result<Vec<Complex64>> {
        let vr = stack_complex(v);
        let res = &aug * &vr - &rhs;
        let corr = svd
            .solve(&res, cut)
            .map_err(|e| Error::Domain(format!("projection failed: {e}")))?;
        Ok(unstack_complex(&(vr - corr)))
    };

    let t = params.step;
    let scale = params.feas_tol * (1.0 + bnorm);
    let mut z = unstack_complex(&least);
    let mut u = z.clone();
    shrink(&mut u, t);
    let mut d: Vec<Complex64> = z.iter().zip(&u).map(|(zi, ui)| zi - ui).collect();
    let mut primal = l2_diff(&z, &u);

    for it in 1..=params.max_iters {
        let v: Vec<Complex64> = u.iter().zip(&d).map(|(ui, di)| ui - di).collect();
        z = project(&v)?;
        let mut u_next: Vec<Complex64> = z.iter().zip(&d).map(|(zi, di)| zi + di).collect();
        shrink(&mut u_next, t);
        for ((di, zi), ui) in d.iter_mut().zip(&z).zip(&u_next) {
            *di += zi - ui;
        }
        primal = l2_diff(&z, &u_next);
        let dual = l2_diff(&u_next, &u) / t;
        u = u_next;

        let obj = l1_norm(&z);
        let gap = (l1_norm(&u) - obj).abs();
        if primal <= scale && dual <= scale && gap <= params.obj_tol * obj.max(1.0) {
            let feas = l2_diff(&op.apply(&z), b);
            return Ok(L1Report { coeffs: z, objective: obj, feasibility: feas, iterations: it });
        }
    }
    let feas = l2_diff(&op.apply(&z), b);
    Err(Error::NoConvergence { iterations: params.max_iters, residual: primal.max(feas) })
}
