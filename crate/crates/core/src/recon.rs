//! The measurement operator and the reconstruction methods built on the
//! cross-Gramian: least-squares generalized sampling and the consistent
//! PBDW correction. Both work on fine-grid cell averages, where Walsh and
//! Fourier integrals of step functions are exact.

use crate::error::{Error, Result};
use crate::gramian::{
    augment_complex, fourier_frequencies, fourier_integrals, mu_of, unit_cell_factor,
    CrossGramian, GramEntries, SamplingFamily, SamplingSpec,
};
use crate::grid::FineGridFunction;
use crate::walsh::{fwht_sequency, fwht_sequency_2d};
use crate::wavelet::{Family, OrthoBasis};
use nalgebra::{DMatrix, DVector, Dyn};
use num_complex::Complex64;
use rustfft::FftPlanner;

/// Least-squares solver factored once and reused across right-hand sides.
/// Complex systems are solved through the real embedding [Re -Im; Im Re]:
/// nalgebra's real SVD solve is accurate to machine precision while its
/// complex one loses about half the mantissa.
enum Lstsq {
    Real(nalgebra::SVD<f64, Dyn, Dyn>),
    Complex { svd: nalgebra::SVD<f64, Dyn, Dyn>, m: usize, n: usize },
}

impl Lstsq {
    fn new(entries: &GramEntries) -> Self {
        match entries {
            GramEntries::Real(u) => Lstsq::Real(u.clone().svd(true, true)),
            GramEntries::Complex(u) => Lstsq::Complex {
                svd: augment_complex(u).svd(true, true),
                m: u.nrows(),
                n: u.ncols(),
            },
        }
    }

    fn solve(&self, rhs: &[Complex64]) -> Result<DVector<Complex64>> {
        let fail = |e: &'static str| Error::Domain(format!("least squares failed: {e}"));
        match self {
            Lstsq::Real(svd) => {
                let re = DVector::from_iterator(rhs.len(), rhs.iter().map(|z| z.re));
                let im = DVector::from_iterator(rhs.len(), rhs.iter().map(|z| z.im));
                let ar = svd.solve(&re, 0.0).map_err(fail)?;
                let ai = svd.solve(&im, 0.0).map_err(fail)?;
                Ok(DVector::from_fn(ar.len(), |i, _| Complex64::new(ar[i], ai[i])))
            }
            Lstsq::Complex { svd, m, n } => {
                debug_assert_eq!(rhs.len(), *m);
                let mut stacked = DVector::zeros(2 * m);
                for (i, z) in rhs.iter().enumerate() {
                    stacked[i] = z.re;
                    stacked[i + m] = z.im;
                }
                let sol = svd.solve(&stacked, 0.0).map_err(fail)?;
                Ok(DVector::from_fn(*n, |i, _| Complex64::new(sol[i], sol[i + n])))
            }
        }
    }
}

#[derive(Clone, Debug)]
pub enum SampleValues {
    Real(Vec<f64>),
    Complex(Vec<Complex64>),
}

impl SampleValues {
    pub fn len(&self) -> usize {
        match self {
            SampleValues::Real(v) => v.len(),
            SampleValues::Complex(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn at(&self, i: usize) -> Complex64 {
        match self {
            SampleValues::Real(v) => Complex64::new(v[i], 0.0),
            SampleValues::Complex(v) => v[i],
        }
    }

    pub fn to_complex(&self) -> Vec<Complex64> {
        match self {
            SampleValues::Real(v) => v.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
            SampleValues::Complex(v) => v.clone(),
        }
    }

    pub fn norm(&self) -> f64 {
        match self {
            SampleValues::Real(v) => v.iter().map(|x| x * x).sum::<f64>().sqrt(),
            SampleValues::Complex(v) => v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt(),
        }
    }
}

/// The measurement vector l(f) = (<f, s_1>, ..., <f, s_M>).
#[derive(Clone, Debug)]
pub struct SampleVector {
    pub values: SampleValues,
    pub spec: SamplingSpec,
}

impl SampleVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Inner products of a fine-grid function against the first M measurement
/// functions. Exact for both families: Walsh functions are constant on grid
/// cells and the exponential has a closed-form integral over each cell.
pub fn sample_signal(f: &FineGridFunction, spec: &SamplingSpec) -> Result<SampleVector> {
    if f.d != spec.d {
        return Err(Error::DimensionMismatch(format!(
            "signal dimension {} vs sampling dimension {}",
            f.d, spec.d
        )));
    }
    if spec.m_per_axis > 1usize << f.q {
        return Err(Error::DepthTooSmall { have: f.q, need: spec.m_per_axis.ilog2() + 1 });
    }
    let m = spec.m_per_axis;
    let values = match (spec.family, spec.d) {
        (SamplingFamily::Walsh, 1) => {
            let ints = crate::gramian::walsh_integrals(&f.values)?;
            SampleValues::Real(ints[..m].to_vec())
        }
        (SamplingFamily::Walsh, 2) => {
            let mut buf = f.values.clone();
            fwht_sequency_2d(&mut buf, f.q)?;
            let side = 1usize << f.q;
            let scale = 1.0 / side as f64;
            let mut out = Vec::with_capacity(m * m);
            for n1 in 0..m {
                for n2 in 0..m {
                    out.push(buf[n1 * side + n2] * scale);
                }
            }
            SampleValues::Real(out)
        }
        (SamplingFamily::Fourier, 1) => {
            SampleValues::Complex(fourier_integrals(&f.values, &fourier_frequencies(m)))
        }
        (SamplingFamily::Fourier, 2) => {
            let side = 1usize << f.q;
            let mut buf: Vec<Complex64> =
                f.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
            fft_2d(&mut buf, side, false);
            let freqs = fourier_frequencies(m);
            let mut out = Vec::with_capacity(m * m);
            for &k1 in &freqs {
                let f1 = unit_cell_factor(k1, side);
                let i1 = k1.rem_euclid(side as i64) as usize;
                for &k2 in &freqs {
                    let f2 = unit_cell_factor(k2, side);
                    let i2 = k2.rem_euclid(side as i64) as usize;
                    out.push(f1 * f2 * buf[i1 * side + i2]);
                }
            }
            SampleValues::Complex(out)
        }
        (_, d) => return Err(Error::UnsupportedPairing(format!("sampling at d={d}"))),
    };
    Ok(SampleVector { values, spec: *spec })
}

/// Row-major 2D FFT, unnormalized, in place. inverse picks the +i kernel.
fn fft_2d(buf: &mut [Complex64], side: usize, inverse: bool) {
    let mut planner = FftPlanner::new();
    let fft = if inverse {
        planner.plan_fft_inverse(side)
    } else {
        planner.plan_fft_forward(side)
    };
    for row in buf.chunks_mut(side) {
        fft.process(row);
    }
    let mut col = vec![Complex64::new(0.0, 0.0); side];
    for c in 0..side {
        for r in 0..side {
            col[r] = buf[r * side + c];
        }
        fft.process(&mut col);
        for r in 0..side {
            buf[r * side + c] = col[r];
        }
    }
}

/// Renders sum_i b_i s_i as exact cell averages (complex for Fourier). This
/// is both the truncated-transform reconstruction and PBDW's data term s.
pub fn sampling_synthesis(b: &SampleVector, q: u32) -> Result<Vec<Complex64>> {
    let m = b.spec.m_per_axis;
    if m > 1usize << q {
        return Err(Error::DepthTooSmall { have: q, need: m.ilog2() + 1 });
    }
    let side = 1usize << q;
    match (b.spec.family, b.spec.d) {
        (SamplingFamily::Walsh, 1) => {
            let mut buf = vec![0.0; side];
            for i in 0..b.len() {
                buf[i] = b.values.at(i).re;
            }
            fwht_sequency(&mut buf)?;
            let scale = (side as f64).sqrt();
            Ok(buf.into_iter().map(|v| Complex64::new(v * scale, 0.0)).collect())
        }
        (SamplingFamily::Walsh, 2) => {
            let mut buf = vec![0.0; side * side];
            for n1 in 0..m {
                for n2 in 0..m {
                    buf[n1 * side + n2] = b.values.at(n1 * m + n2).re;
                }
            }
            fwht_sequency_2d(&mut buf, q)?;
            let scale = side as f64;
            Ok(buf.into_iter().map(|v| Complex64::new(v * scale, 0.0)).collect())
        }
        (SamplingFamily::Fourier, 1) => {
            let freqs = fourier_frequencies(m);
            let mut spectrum = vec![Complex64::new(0.0, 0.0); side];
            for (i, &k) in freqs.iter().enumerate() {
                // Cell averages of e^{2 pi i k x}: conj of the cell factor
                // times the grid exponential, scaled by the cell count.
                spectrum[k.rem_euclid(side as i64) as usize] +=
                    b.values.at(i) * unit_cell_factor(k, side).conj() * side as f64;
            }
            FftPlanner::new().plan_fft_inverse(side).process(&mut spectrum);
            Ok(spectrum)
        }
        (SamplingFamily::Fourier, 2) => {
            let freqs = fourier_frequencies(m);
            let mut spectrum = vec![Complex64::new(0.0, 0.0); side * side];
            for (i1, &k1) in freqs.iter().enumerate() {
                let w1 = unit_cell_factor(k1, side).conj() * side as f64;
                let p1 = k1.rem_euclid(side as i64) as usize;
                for (i2, &k2) in freqs.iter().enumerate() {
                    let w2 = unit_cell_factor(k2, side).conj() * side as f64;
                    let p2 = k2.rem_euclid(side as i64) as usize;
                    spectrum[p1 * side + p2] += b.values.at(i1 * m + i2) * w1 * w2;
                }
            }
            fft_2d(&mut spectrum, side, true);
            Ok(spectrum)
        }
        (_, d) => Err(Error::UnsupportedPairing(format!("synthesis at d={d}"))),
    }
}

/// Measures a complex grid function (the complex counterpart of
/// sample_signal, used by the PBDW correction).
fn sample_complex(f: &[Complex64], spec: &SamplingSpec, q: u32) -> Result<Vec<Complex64>> {
    let re: Vec<f64> = f.iter().map(|z| z.re).collect();
    let im: Vec<f64> = f.iter().map(|z| z.im).collect();
    let fr = FineGridFunction::new(spec.d, q, re)?;
    let fi = FineGridFunction::new(spec.d, q, im)?;
    let sr = sample_signal(&fr, spec)?.values.to_complex();
    let si = sample_signal(&fi, spec)?.values.to_complex();
    Ok(sr
        .into_iter()
        .zip(si)
        .map(|(a, b)| a + Complex64::new(0.0, 1.0) * b)
        .collect())
}

/// Orthogonal projection of a grid function onto the measurement span. For
/// Walsh this zeroes the sequency tail; for Fourier it keeps the spectrum
/// bins of the conjugate-closed frequency set (the projected exponentials
/// have a diagonal Gram, so the projection is a bin mask).
pub fn project_sampling(f: &[Complex64], spec: &SamplingSpec, q: u32) -> Result<Vec<Complex64>> {
    match spec.family {
        SamplingFamily::Walsh => {
            let samples = sample_complex(f, spec, q)?;
            let b = SampleVector {
                values: SampleValues::Complex(samples),
                spec: *spec,
            };
            sampling_synthesis_complex(&b, q)
        }
        SamplingFamily::Fourier => fourier_bandlimit(f, spec, q),
    }
}

/// The measured frequency list 0, 1, -1, 2, -2, ... is symmetric except for
/// +m/2 when m is even, and at m = 2^q the +m/2 and -m/2 exponentials
/// coincide on the grid. So the conjugate closure adds at most the -m/2
/// line. Closing the span keeps real signals real under projection.
fn fourier_unpaired(m: usize, side: usize) -> Option<i64> {
    (m % 2 == 0 && m < side).then(|| (m / 2) as i64)
}

/// One direction of the conjugate-closed Fourier measurement span: spectrum
/// bins, the unit-cell factor product, and where its data value comes from
/// (sample src, conjugated for the closure lines; valid for real signals,
/// whose mirrored measurements are complex conjugates).
struct FourierDir {
    bins: (usize, usize),
    ucf: Complex64,
    src: usize,
    conj: bool,
}

fn fourier_closed_dirs(spec: &SamplingSpec, side: usize) -> Vec<FourierDir> {
    let m = spec.m_per_axis;
    let freqs = fourier_frequencies(m);
    let bin = |k: i64| k.rem_euclid(side as i64) as usize;
    let unpaired = fourier_unpaired(m, side);
    let mut dirs = Vec::new();
    match spec.d {
        1 => {
            for (i, &k) in freqs.iter().enumerate() {
                dirs.push(FourierDir {
                    bins: (bin(k), 0),
                    ucf: unit_cell_factor(k, side),
                    src: i,
                    conj: false,
                });
            }
            if let Some(k) = unpaired {
                dirs.push(FourierDir {
                    bins: (bin(-k), 0),
                    ucf: unit_cell_factor(-k, side),
                    src: m - 1,
                    conj: true,
                });
            }
        }
        _ => {
            for (i1, &k1) in freqs.iter().enumerate() {
                for (i2, &k2) in freqs.iter().enumerate() {
                    dirs.push(FourierDir {
                        bins: (bin(k1), bin(k2)),
                        ucf: unit_cell_factor(k1, side) * unit_cell_factor(k2, side),
                        src: i1 * m + i2,
                        conj: false,
                    });
                }
            }
            if let Some(u) = unpaired {
                // Negating both axes keeps each added target equal to the
                // conjugate of a measured one.
                for (i1, &k1) in freqs.iter().enumerate() {
                    for (i2, &k2) in freqs.iter().enumerate() {
                        if k1 == u || k2 == u {
                            dirs.push(FourierDir {
                                bins: (bin(-k1), bin(-k2)),
                                ucf: unit_cell_factor(-k1, side) * unit_cell_factor(-k2, side),
                                src: i1 * m + i2,
                                conj: true,
                            });
                        }
                    }
                }
            }
        }
    }
    dirs
}

/// Keeps the spectrum bins of the conjugate-closed frequency set. Each kept
/// direction sigma has spectrum side^d conj(ucf) at its bin and squared norm
/// |side^d ucf|^2, so analysis-synthesis collapses to dividing by side^d.
fn fourier_bandlimit(f: &[Complex64], spec: &SamplingSpec, q: u32) -> Result<Vec<Complex64>> {
    let side = 1usize << q;
    if spec.m_per_axis > side {
        return Err(Error::DepthTooSmall { have: q, need: spec.m_per_axis.ilog2() + 1 });
    }
    let dirs = fourier_closed_dirs(spec, side);
    match spec.d {
        1 => {
            let mut spectrum = f.to_vec();
            FftPlanner::new().plan_fft_forward(side).process(&mut spectrum);
            let mut kept = vec![Complex64::new(0.0, 0.0); side];
            for dir in &dirs {
                kept[dir.bins.0] = spectrum[dir.bins.0] / side as f64;
            }
            FftPlanner::new().plan_fft_inverse(side).process(&mut kept);
            Ok(kept)
        }
        _ => {
            let mut spectrum = f.to_vec();
            fft_2d(&mut spectrum, side, false);
            let mut kept = vec![Complex64::new(0.0, 0.0); side * side];
            let cells = (side * side) as f64;
            for dir in &dirs {
                let p = dir.bins.0 * side + dir.bins.1;
                kept[p] = spectrum[p] / cells;
            }
            fft_2d(&mut kept, side, true);
            Ok(kept)
        }
    }
}

/// The unique element of the (conjugate-closed) measurement span whose
/// measurements reproduce b: the data term of the consistent correction.
/// Walsh measurement functions are orthonormal on the grid so the plain
/// synthesis already interpolates; Fourier needs the dual weights
/// 1 / (side^d ucf) per spectrum bin.
pub fn sampling_interpolant(b: &SampleVector, q: u32) -> Result<Vec<Complex64>> {
    match b.spec.family {
        SamplingFamily::Walsh => sampling_synthesis_complex(b, q),
        SamplingFamily::Fourier => {
            let side = 1usize << q;
            if b.spec.m_per_axis > side {
                return Err(Error::DepthTooSmall {
                    have: q,
                    need: b.spec.m_per_axis.ilog2() + 1,
                });
            }
            let dirs = fourier_closed_dirs(&b.spec, side);
            match b.spec.d {
                1 => {
                    let mut spectrum = vec![Complex64::new(0.0, 0.0); side];
                    for dir in &dirs {
                        let t = b.values.at(dir.src);
                        let t = if dir.conj { t.conj() } else { t };
                        spectrum[dir.bins.0] += t / (dir.ucf * side as f64);
                    }
                    FftPlanner::new().plan_fft_inverse(side).process(&mut spectrum);
                    Ok(spectrum)
                }
                _ => {
                    let mut spectrum = vec![Complex64::new(0.0, 0.0); side * side];
                    let cells = (side * side) as f64;
                    for dir in &dirs {
                        let t = b.values.at(dir.src);
                        let t = if dir.conj { t.conj() } else { t };
                        spectrum[dir.bins.0 * side + dir.bins.1] += t / (dir.ucf * cells);
                    }
                    fft_2d(&mut spectrum, side, true);
                    Ok(spectrum)
                }
            }
        }
    }
}

fn sampling_synthesis_complex(b: &SampleVector, q: u32) -> Result<Vec<Complex64>> {
    match &b.values {
        SampleValues::Real(_) => sampling_synthesis(b, q),
        SampleValues::Complex(v) => {
            let re = SampleVector {
                values: SampleValues::Real(v.iter().map(|z| z.re).collect()),
                spec: b.spec,
            };
            let im = SampleVector {
                values: SampleValues::Real(v.iter().map(|z| z.im).collect()),
                spec: b.spec,
            };
            let sr = sampling_synthesis(&re, q)?;
            let si = sampling_synthesis(&im, q)?;
            Ok(sr
                .into_iter()
                .zip(si)
                .map(|(a, b)| a + Complex64::new(0.0, 1.0) * b)
                .collect())
        }
    }
}

#[derive(Clone, Debug)]
pub struct ReconstructionResult {
    /// Reconstruction-basis coefficients (imaginary parts are rounding noise
    /// for real signals).
    pub coeffs: Vec<Complex64>,
    /// For PBDW: the corrected fine-grid estimate f*.
    pub fine: Option<FineGridFunction>,
    pub residual: f64,
    pub mu: f64,
    pub iterations: usize,
}

impl ReconstructionResult {
    pub fn coeffs_real(&self) -> Vec<f64> {
        self.coeffs.iter().map(|z| z.re).collect()
    }
}

/// Least-squares solution of U alpha = b. The minimizer is unique when
/// sigma_min > 0, which is what the rank check enforces.
pub fn generalized_sampling(g: &CrossGramian, b: &SampleVector) -> Result<ReconstructionResult> {
    if b.len() != g.m() {
        return Err(Error::DimensionMismatch(format!(
            "{} samples against a {}-row gramian",
            b.len(),
            g.m()
        )));
    }
    if g.m() < g.n() {
        return Err(Error::RankDeficient { sigma_min: 0.0 });
    }
    let report = mu_of(g)?;
    if !(report.sigma_min > 1e-12 * report.sigma_max) {
        return Err(Error::RankDeficient { sigma_min: report.sigma_min });
    }

    let (coeffs, residual) = match (&g.entries, &b.values) {
        (GramEntries::Real(u), SampleValues::Real(rhs)) => {
            let rhs = DVector::from_column_slice(rhs);
            let svd = u.clone().svd(true, true);
            let alpha = svd
                .solve(&rhs, 0.0)
                .map_err(|e| Error::Domain(format!("least squares failed: {e}")))?;
            let residual = (u * &alpha - rhs).norm();
            (alpha.iter().map(|&v| Complex64::new(v, 0.0)).collect(), residual)
        }
        _ => {
            let u = match &g.entries {
                GramEntries::Real(m) => m.map(|v| Complex64::new(v, 0.0)),
                GramEntries::Complex(m) => m.clone(),
            };
            let rhs_vec = b.values.to_complex();
            let alpha = Lstsq::new(&g.entries).solve(&rhs_vec)?;
            let rhs = DVector::from_vec(rhs_vec);
            let residual = (&u * &alpha - rhs).norm();
            (alpha.iter().cloned().collect(), residual)
        }
    };
    Ok(ReconstructionResult {
        coeffs,
        fine: None,
        residual,
        mu: report.mu,
        iterations: 0,
    })
}

/// 2D least squares through the tensor structure: with the per-axis Gramian
/// A and samples Y as an m x m matrix, the minimizer of
/// ||(A (x) A) vec(C) - vec(Y)|| is C = pinv(A) Y pinv(A)^T. Avoids ever
/// materializing the m^2 x n^2 matrix.
pub fn generalized_sampling_2d(
    axis: &CrossGramian,
    b: &SampleVector,
) -> Result<ReconstructionResult> {
    if axis.sampling.d != 1 || axis.recon.d != 1 {
        return Err(Error::DimensionMismatch("axis gramian must be 1D".into()));
    }
    if b.spec.d != 2 || b.len() != axis.m() * axis.m() {
        return Err(Error::DimensionMismatch(format!(
            "expected {} 2D samples, got {}",
            axis.m() * axis.m(),
            b.len()
        )));
    }
    if axis.m() < axis.n() {
        return Err(Error::RankDeficient { sigma_min: 0.0 });
    }
    let report = mu_of(axis)?;
    if !(report.sigma_min > 1e-12 * report.sigma_max) {
        return Err(Error::RankDeficient { sigma_min: report.sigma_min });
    }

    let (m, n) = (axis.m(), axis.n());
    let u = match &axis.entries {
        GramEntries::Real(a) => a.map(|v| Complex64::new(v, 0.0)),
        GramEntries::Complex(a) => a.clone(),
    };
    let y = DMatrix::from_fn(m, m, |i1, i2| b.values.at(i1 * m + i2));
    let solver = Lstsq::new(&axis.entries);
    // C = pinv(A) Y pinv(A)^T, built column- and row-wise by the solver.
    let mut half = DMatrix::zeros(n, m);
    for c in 0..m {
        let rhs: Vec<Complex64> = y.column(c).iter().cloned().collect();
        half.set_column(c, &solver.solve(&rhs)?);
    }
    let mut coeffs_mat = DMatrix::zeros(n, n);
    for r in 0..n {
        let rhs: Vec<Complex64> = half.row(r).iter().cloned().collect();
        coeffs_mat.set_row(r, &solver.solve(&rhs)?.transpose());
    }
    let residual = (&u * &coeffs_mat * u.transpose() - &y).norm();
    let coeffs: Vec<Complex64> = (0..n)
        .flat_map(|c1| (0..n).map(move |c2| (c1, c2)))
        .map(|(c1, c2)| coeffs_mat[(c1, c2)])
        .collect();
    Ok(ReconstructionResult {
        coeffs,
        fine: None,
        residual,
        mu: report.mu * report.mu,
        iterations: 0,
    })
}

/// Renders reconstruction coefficients as a fine-grid function: 1D directly,
/// 2D through per-axis dense columns (B C B^T).
pub fn synthesize_coeffs(
    family: Family,
    r: u32,
    d: u32,
    q: u32,
    coeffs: &[Complex64],
) -> Result<Vec<Complex64>> {
    let basis = OrthoBasis::new(family, r, q)?;
    match d {
        1 => basis.synthesize_complex(coeffs),
        2 => {
            let n = basis.n();
            if coeffs.len() != n * n {
                return Err(Error::DimensionMismatch(format!(
                    "expected {} coefficients, got {}",
                    n * n,
                    coeffs.len()
                )));
            }
            let side = 1usize << q;
            let b1 = basis.dense_matrix_at(q);
            let c = DMatrix::from_fn(n, n, |i, j| coeffs[i * n + j]);
            let b1c = b1.map(|v| Complex64::new(v, 0.0));
            let grid = &b1c * c * b1c.transpose();
            let mut out = vec![Complex64::new(0.0, 0.0); side * side];
            for i1 in 0..side {
                for i2 in 0..side {
                    out[i1 * side + i2] = grid[(i1, i2)];
                }
            }
            Ok(out)
        }
        d => Err(Error::UnsupportedPairing(format!("synthesis at d={d}"))),
    }
}

/// PBDW estimate f* = g* + (s - P_S g*): the generalized-sampling solution
/// corrected to reproduce the measurements exactly. Works on the depth-q
/// grid; for Daubechies bases q must equal the Gramian's assembly depth so
/// the rendered basis matches the assembled inner products.
pub fn pbdw(g: &CrossGramian, b: &SampleVector, q: u32) -> Result<ReconstructionResult> {
    if g.recon.family != Family::Haar && q != g.q {
        return Err(Error::Domain(format!(
            "pbdw depth {q} must match the gramian assembly depth {}",
            g.q
        )));
    }
    if g.sampling.family != b.spec.family {
        return Err(Error::DimensionMismatch(format!(
            "{:?} samples against a {:?} gramian",
            b.spec.family, g.sampling.family
        )));
    }
    // 2D goes through the per-axis gramian and the tensor solver.
    let gs = match b.spec.d {
        1 => generalized_sampling(g, b)?,
        2 => generalized_sampling_2d(g, b)?,
        d => return Err(Error::UnsupportedPairing(format!("pbdw at d={d}"))),
    };
    let d = b.spec.d;
    let gstar = synthesize_coeffs(g.recon.family, g.recon.r, d, q, &gs.coeffs)?;
    let s = sampling_interpolant(b, q)?;
    let ps_gstar = project_sampling(&gstar, &b.spec, q)?;
    let fine: Vec<f64> = gstar
        .iter()
        .zip(&s)
        .zip(&ps_gstar)
        .map(|((g, s), p)| (g + s - p).re)
        .collect();
    Ok(ReconstructionResult {
        fine: Some(FineGridFunction::new(d, q, fine)?),
        ..gs
    })
}

/// Grid distance from f to R_N + (S_M intersected with the complement of
/// R_N): the space PBDW actually reconstructs in. Computed by projecting the
/// measurement functions off R_N and orthonormalizing what is left.
pub fn dist_to_pbdw_space(
    f: &FineGridFunction,
    basis: &OrthoBasis,
    spec: &SamplingSpec,
) -> Result<f64> {
    if f.d != 1 || spec.d != 1 || spec.family != SamplingFamily::Walsh {
        return Err(Error::UnsupportedPairing(
            "direct-sum distance is computed for 1D Walsh sampling".into(),
        ));
    }
    let q = f.q;
    let cells = 1usize << q;
    let m = spec.m_per_axis;
    let p_r = basis.project(f)?;
    let mut residual: Vec<f64> = f.values.iter().zip(&p_r.values).map(|(a, b)| a - b).collect();

    // Build S_M projected off R_N, orthonormalize by the Gram eigensystem
    // (rank-revealing), then subtract the projection of the residual.
    let mut vs: Vec<Vec<f64>> = Vec::with_capacity(m);
    for n in 0..m {
        let mut w = vec![0.0; cells];
        w[n] = 1.0;
        fwht_sequency(&mut w)?;
        for v in w.iter_mut() {
            *v *= (cells as f64).sqrt();
        }
        let wf = FineGridFunction::new(1, q, w)?;
        let pw = basis.project(&wf)?;
        vs.push(wf.values.iter().zip(&pw.values).map(|(a, b)| a - b).collect());
    }
    let weight = 1.0 / cells as f64;
    let mut gram = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in i..m {
            let v = weight * crate::grid::dot(&vs[i], &vs[j]);
            gram[(i, j)] = v;
            gram[(j, i)] = v;
        }
    }
    let eig = gram.symmetric_eigen();
    let lambda_max = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max).max(1e-300);
    for (idx, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda < 1e-10 * lambda_max {
            continue;
        }
        // Orthonormal direction sum_i evec[i] v_i / sqrt(lambda).
        let mut dir = vec![0.0; cells];
        for (i, v) in vs.iter().enumerate() {
            let c = eig.eigenvectors[(i, idx)];
            if c != 0.0 {
                for (slot, &x) in dir.iter_mut().zip(v) {
                    *slot += c * x;
                }
            }
        }
        let inv = 1.0 / lambda.sqrt();
        let coef = weight * crate::grid::dot(&dir, &residual) * inv * inv;
        for (slot, &x) in residual.iter_mut().zip(&dir) {
            *slot -= coef * x;
        }
    }
    Ok((weight * crate::grid::dot(&residual, &residual)).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gramian::{assemble_gramian_at, ssr, SsrOutcome};
    use crate::wavelet::{BasisSpec, Representation};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_grid(q: u32, rng: &mut ChaCha8Rng) -> FineGridFunction {
        FineGridFunction::new(1, q, (0..1usize << q).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .unwrap()
    }

    #[test]
    fn sampling_walsh_unit_vectors() {
        // f = Wal(k, .) rendered on the grid measures as e_k.
        let q = 6u32;
        let cells = 1usize << q;
        let spec = SamplingSpec::new(SamplingFamily::Walsh, 1, 16).unwrap();
        for k in [0u64, 3, 7, 15] {
            let mut dense = vec![0.0; cells];
            for (j, slot) in dense.iter_mut().enumerate() {
                let x = crate::walsh::DyadicPoint::from_grid_index(j as u64, q).unwrap();
                *slot = crate::walsh::wal_eval(k, x).unwrap() as f64;
            }
            let f = FineGridFunction::new(1, q, dense).unwrap();
            let b = sample_signal(&f, &spec).unwrap();
            for i in 0..16 {
                let expect = if i as u64 == k { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(b.values.at(i).re, expect, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn sampling_matches_naive_summation() {
        let q = 5u32;
        let cells = 1usize << q;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let f = random_grid(q, &mut rng);
        let spec = SamplingSpec::new(SamplingFamily::Walsh, 1, 20).unwrap();
        let b = sample_signal(&f, &spec).unwrap();
        for n in 0..20u64 {
            let mut acc = 0.0;
            for j in 0..cells {
                let x = crate::walsh::DyadicPoint::from_grid_index(j as u64, q).unwrap();
                acc += f.values[j] * crate::walsh::wal_eval(n, x).unwrap() as f64;
            }
            assert_abs_diff_eq!(b.values.at(n as usize).re, acc / cells as f64, epsilon = 1e-12);
        }
    }

    #[test]
    fn sampling_fourier_half_indicator_closed_form() {
        let q = 8u32;
        let cells = 1usize << q;
        let f = FineGridFunction::new(
            1,
            q,
            (0..cells).map(|j| if j < cells / 2 { 1.0 } else { 0.0 }).collect(),
        )
        .unwrap();
        let spec = SamplingSpec::new(SamplingFamily::Fourier, 1, 9).unwrap();
        let b = sample_signal(&f, &spec).unwrap();
        for (i, &k) in fourier_frequencies(9).iter().enumerate() {
            let expect = if k == 0 {
                Complex64::new(0.5, 0.0)
            } else {
                let phase = -std::f64::consts::PI * k as f64;
                (Complex64::new(1.0, 0.0) - Complex64::new(phase.cos(), phase.sin()))
                    / Complex64::new(0.0, 2.0 * std::f64::consts::PI * k as f64)
            };
            assert_abs_diff_eq!(b.values.at(i).re, expect.re, epsilon = 1e-12);
            assert_abs_diff_eq!(b.values.at(i).im, expect.im, epsilon = 1e-12);
        }
    }

    #[test]
    fn walsh_sampling_2d_matches_tensor_oracle() {
        let q = 4u32;
        let side = 1usize << q;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_grid(q, &mut rng);
        let c = random_grid(q, &mut rng);
        let f2 = crate::grid::tensor_2d(&a, &c).unwrap();
        let spec2 = SamplingSpec::new(SamplingFamily::Walsh, 2, 6).unwrap();
        let b2 = sample_signal(&f2, &spec2).unwrap();
        let spec1 = SamplingSpec::new(SamplingFamily::Walsh, 1, 6).unwrap();
        let b_a = sample_signal(&a, &spec1).unwrap();
        let b_c = sample_signal(&c, &spec1).unwrap();
        for n1 in 0..6 {
            for n2 in 0..6 {
                let expect = b_a.values.at(n1).re * b_c.values.at(n2).re;
                assert_abs_diff_eq!(b2.values.at(n1 * 6 + n2).re, expect, epsilon = 1e-12);
            }
        }
        let _ = side;
    }

    #[test]
    fn gs_recovers_planted_coefficients() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for family in [SamplingFamily::Walsh, SamplingFamily::Fourier] {
            let recon = BasisSpec::new(crate::wavelet::Family::Daubechies(2), 1, 3).unwrap();
            let q = 9u32;
            let sampling = SamplingSpec::new(family, 1, 16).unwrap();
            let g = assemble_gramian_at(&sampling, &recon, Representation::Scaling, q).unwrap();
            let c: Vec<f64> = (0..recon.n()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let basis = OrthoBasis::new(recon.family, recon.r, q).unwrap();
            let f = basis.synthesize(&c).unwrap();
            let b = sample_signal(&f, &sampling).unwrap();
            let out = generalized_sampling(&g, &b).unwrap();
            for (got, want) in out.coeffs.iter().zip(&c) {
                assert_abs_diff_eq!(got.re, want, epsilon = 1e-10);
                assert_abs_diff_eq!(got.im, 0.0, epsilon = 1e-10);
            }
            assert!(out.residual < 1e-10);
        }
    }

    #[test]
    fn gs_zero_samples_give_zero() {
        let recon = BasisSpec::new(crate::wavelet::Family::Haar, 1, 3).unwrap();
        let sampling = SamplingSpec::new(SamplingFamily::Walsh, 1, 16).unwrap();
        let g = assemble_gramian_at(&sampling, &recon, Representation::Scaling, 6).unwrap();
        let b = SampleVector {
            values: SampleValues::Real(vec![0.0; 16]),
            spec: sampling,
        };
        let out = generalized_sampling(&g, &b).unwrap();
        assert!(out.coeffs.iter().all(|z| z.norm() < 1e-14));
    }

    #[test]
    fn gs_rejects_underdetermined_systems() {
        let recon = BasisSpec::new(crate::wavelet::Family::Haar, 1, 4).unwrap();
        let sampling = SamplingSpec::new(SamplingFamily::Walsh, 1, 8).unwrap();
        let g = assemble_gramian_at(&sampling, &recon, Representation::Scaling, 6).unwrap();
        let b = SampleVector {
            values: SampleValues::Real(vec![0.0; 8]),
            spec: sampling,
        };
        match generalized_sampling(&g, &b) {
            Err(Error::RankDeficient { sigma_min }) => assert_eq!(sigma_min, 0.0),
            other => panic!("expected rank failure, got {other:?}"),
        }
    }

    #[test]
    fn gs_stability_and_sandwich() {
        // ||G(f)|| <= mu ||f|| and the two-sided error bound, on random f.
        let recon = BasisSpec::new(crate::wavelet::Family::Daubechies(2), 1, 3).unwrap();
        let q = 10u32;
        let sampling = SamplingSpec::new(SamplingFamily::Walsh, 1, 16).unwrap();
        let g = assemble_gramian_at(&sampling, &recon, Representation::Scaling, q).unwrap();
        let basis = OrthoBasis::new(recon.family, recon.r, q).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let f = random_grid(q, &mut rng);
            let b = sample_signal(&f, &sampling).unwrap();
            let out = generalized_sampling(&g, &b).unwrap();
            let gf = basis.synthesize(&out.coeffs_real()).unwrap();
            assert!(gf.norm() <= out.mu * f.norm() + 1e-9);

            let best = basis.project(&f).unwrap();
            let e_best = (0..f.values.len())
                .map(|j| (f.values[j] - best.values[j]).powi(2))
                .sum::<f64>()
                .sqrt()
                * (0.5f64).powi(q as i32 / 2);
            let e_gs = (0..f.values.len())
                .map(|j| (f.values[j] - gf.values[j]).powi(2))
                .sum::<f64>()
                .sqrt()
                * (0.5f64).powi(q as i32 / 2);
            assert!(e_best <= e_gs + 1e-10);
            assert!(e_gs <= out.mu * e_best + 1e-8);
        }
    }

    #[test]
    fn pbdw_reproduces_signals_in_the_reconstruction_space() {
        let recon = BasisSpec::new(crate::wavelet::Family::Daubechies(2), 1, 3).unwrap();
        let q = 10u32;
        let sampling = SamplingSpec::new(SamplingFamily::Walsh, 1, 20).unwrap();
        let g = assemble_gramian_at(&sampling, &recon, Representation::Scaling, q).unwrap();
        let basis = OrthoBasis::new(recon.family, recon.r, q).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let c: Vec<f64> = (0..recon.n()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let f = basis.synthesize(&c).unwrap();
        let b = sample_signal(&f, &sampling).unwrap();
        let out = pbdw(&g, &b, q).unwrap();
        let fine = out.fine.unwrap();
        for (got, want) in fine.values.iter().zip(&f.values) {
            assert_abs_diff_eq!(got, want, epsilon = 1e-8);
        }
    }

    #[test]
    fn pbdw_is_consistent_and_matches_its_formula() {
        let recon = BasisSpec::new(crate::wavelet::Family::Daubechies(2), 1, 3).unwrap();
        let q = 10u32;
        for family in [SamplingFamily::Walsh, SamplingFamily::Fourier] {
            let sampling = SamplingSpec::new(family, 1, 24).unwrap();
            let g = assemble_gramian_at(&sampling, &recon, Representation::Scaling, q).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(13);
            let f = random_grid(q, &mut rng);
            let b = sample_signal(&f, &sampling).unwrap();
            let out = pbdw(&g, &b, q).unwrap();
            let fine = out.fine.clone().unwrap();

            // Re-measuring the estimate returns the input samples.
            let again = sample_signal(&fine, &sampling).unwrap();
            for i in 0..b.len() {
                let diff = (again.values.at(i) - b.values.at(i)).norm();
                assert!(diff < 1e-10, "{family:?} sample {i} differs by {diff:.2e}");
            }

            // f* equals g* + s - P_S g* assembled from independently
            // computed pieces.
            let gstar = synthesize_coeffs(recon.family, recon.r, 1, q, &out.coeffs).unwrap();
            let s = sampling_interpolant(&b, q).unwrap();
            let ps = project_sampling(&gstar, &sampling, q).unwrap();
            for j in 0..fine.values.len() {
                let expect = (gstar[j] + s[j] - ps[j]).re;
                assert_abs_diff_eq!(fine.values[j], expect, epsilon = 1e-10);
            }

            // Instance error bound through the subspace angle.
            let basis = OrthoBasis::new(recon.family, recon.r, q).unwrap();
            let best = basis.project(&f).unwrap();
            let dist: f64 = f
                .values
                .iter()
                .zip(&best.values)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
                * (0.5f64).powi(q as i32 / 2);
            let err: f64 = f
                .values
                .iter()
                .zip(&fine.values)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
                * (0.5f64).powi(q as i32 / 2);
            assert!(err <= out.mu * dist + 1e-8, "{family:?}: {err} vs {}", out.mu * dist);
        }
    }

    #[test]
    fn pbdw_error_within_direct_sum_distance_bound() {
        let recon = BasisSpec::new(crate::wavelet::Family::Daubechies(2), 1, 3).unwrap();
        let q = 10u32;
        let sampling = SamplingSpec::new(SamplingFamily::Walsh, 1, 24).unwrap();
        let g = assemble_gramian_at(&sampling, &recon, Representation::Scaling, q).unwrap();
        let basis = OrthoBasis::new(recon.family, recon.r, q).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..10 {
            let f = random_grid(q, &mut rng);
            let b = sample_signal(&f, &sampling).unwrap();
            let out = pbdw(&g, &b, q).unwrap();
            let fine = out.fine.unwrap();
            let err: f64 = f
                .values
                .iter()
                .zip(&fine.values)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
                * (0.5f64).powi(q as i32 / 2);
            let dist = dist_to_pbdw_space(&f, &basis, &sampling).unwrap();
            assert!(
                err <= out.mu * dist + 1e-8,
                "error {err:.3e} vs mu*dist {:.3e}",
                out.mu * dist
            );
            // The direct-sum distance is at least as tight as dist(f, R_N).
            let best = basis.project(&f).unwrap();
            let dist_r: f64 = f
                .values
                .iter()
                .zip(&best.values)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
                * (0.5f64).powi(q as i32 / 2);
            assert!(dist <= dist_r + 1e-12);
        }
    }

    #[test]
    fn pbdw_2d_consistent_for_haar() {
        // 2D pbdw takes the per-axis gramian plus 2D samples.
        let q = 5u32;
        let axis_sampling = SamplingSpec::new(SamplingFamily::Walsh, 1, 6).unwrap();
        let axis_spec = BasisSpec::new(crate::wavelet::Family::Haar, 1, 2).unwrap();
        let axis = assemble_gramian_at(&axis_sampling, &axis_spec, Representation::Scaling, q).unwrap();
        let sampling2 = SamplingSpec::new(SamplingFamily::Walsh, 2, 6).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let a = random_grid(q, &mut rng);
        let c = random_grid(q, &mut rng);
        let f2 = crate::grid::tensor_2d(&a, &c).unwrap();
        let b = sample_signal(&f2, &sampling2).unwrap();
        let out = pbdw(&axis, &b, q).unwrap();
        let fine = out.fine.unwrap();
        let again = sample_signal(&fine, &sampling2).unwrap();
        for i in 0..b.len() {
            assert!((again.values.at(i) - b.values.at(i)).norm() < 1e-10);
        }
    }

    #[test]
    fn pbdw_2d_fourier_consistency_crosses_the_unpaired_frequency() {
        // Even per-axis m leaves +m/2 without its mirror, the case the
        // conjugate closure exists for; exercise it in the tensor setting.
        let q = 5u32;
        let axis_sampling = SamplingSpec::new(SamplingFamily::Fourier, 1, 8).unwrap();
        let axis_spec = BasisSpec::new(crate::wavelet::Family::Haar, 1, 2).unwrap();
        let axis = assemble_gramian_at(&axis_sampling, &axis_spec, Representation::Scaling, q).unwrap();
        let sampling2 = SamplingSpec::new(SamplingFamily::Fourier, 2, 8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let a = random_grid(q, &mut rng);
        let c = random_grid(q, &mut rng);
        let f2 = crate::grid::tensor_2d(&a, &c).unwrap();
        let b = sample_signal(&f2, &sampling2).unwrap();
        let out = pbdw(&axis, &b, q).unwrap();
        let fine = out.fine.unwrap();
        let again = sample_signal(&fine, &sampling2).unwrap();
        for i in 0..b.len() {
            let diff = (again.values.at(i) - b.values.at(i)).norm();
            assert!(diff < 1e-10, "sample {i} differs by {diff:.2e}");
        }
    }

    #[test]
    fn ssr_feeds_usable_sample_counts() {
        // End-to-end: pick M from the rate sweep, reconstruct, verify the
        // stability constant in action.
        let recon = BasisSpec::new(crate::wavelet::Family::Daubechies(2), 1, 4).unwrap();
        let theta = 2.0;
        let m = match ssr(theta, SamplingFamily::Walsh, &recon, 4 * recon.n()).unwrap() {
            SsrOutcome::Reached { m, .. } => m,
            SsrOutcome::NotReached => panic!("ssr must reach at 4N"),
        };
        let q = recon.family.guard_depth(recon.r);
        let sampling = SamplingSpec::new(SamplingFamily::Walsh, 1, m).unwrap();
        let g = assemble_gramian_at(&sampling, &recon, Representation::Scaling, q).unwrap();
        let report = mu_of(&g).unwrap();
        assert!(report.mu < theta);
    }
}
