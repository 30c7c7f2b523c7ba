//! Cross-Gramians between the measurement families (sequency-ordered Walsh,
//! integer-frequency Fourier) and the reconstruction bases, the subspace-angle
//! report derived from their singular values, and the stable sampling rate
//! sweep built on top.

use crate::error::{Error, Result};
use crate::grid::GridColumn;
use crate::walsh::{fwht_sequency, wal_eval, DyadicPoint};
use crate::wavelet::{
    enumerate_basis, BasisKind, BasisSpec, Family, OrthoBasis, Representation,
};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::FftPlanner;

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum SamplingFamily {
    Walsh,
    Fourier,
}

impl SamplingFamily {
    pub fn parse(name: &str) -> Result<SamplingFamily> {
        match name {
            "walsh" => Ok(SamplingFamily::Walsh),
            "fourier" => Ok(SamplingFamily::Fourier),
            other => Err(Error::Domain(format!("unknown sampling family {other}"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SamplingFamily::Walsh => "walsh",
            SamplingFamily::Fourier => "fourier",
        }
    }
}

/// Measurement set description. The d-dimensional sets are full boxes: the
/// first m_per_axis functions of the 1D ordering in each axis, m_per_axis^d
/// functions in total. Walsh uses sequency order starting at 0; Fourier uses
/// the symmetric frequency interleaving 0, 1, -1, 2, -2, ...
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct SamplingSpec {
    pub family: SamplingFamily,
    pub d: u32,
    pub m_per_axis: usize,
}

impl SamplingSpec {
    pub fn new(family: SamplingFamily, d: u32, m_per_axis: usize) -> Result<Self> {
        if !(1..=2).contains(&d) {
            return Err(Error::Domain(format!("sampling dimension {d} not supported")));
        }
        if m_per_axis == 0 {
            return Err(Error::Domain("sample count must be positive".into()));
        }
        Ok(SamplingSpec { family, d, m_per_axis })
    }

    /// Total measurement count M = m_per_axis^d.
    pub fn total(&self) -> usize {
        self.m_per_axis.pow(self.d)
    }

    /// Splits a total count into the per-axis count, requiring an exact box.
    pub fn per_axis_of_total(d: u32, m_total: usize) -> Result<usize> {
        match d {
            1 => Ok(m_total),
            2 => {
                let m = (m_total as f64).sqrt().round() as usize;
                if m * m != m_total {
                    return Err(Error::Domain(format!(
                        "2D sample count {m_total} is not a perfect square"
                    )));
                }
                Ok(m)
            }
            _ => Err(Error::Domain(format!("sampling dimension {d} not supported"))),
        }
    }
}

/// Frequency of the i-th 1D Fourier measurement: 0, 1, -1, 2, -2, ...
pub fn fourier_frequency(i: usize) -> i64 {
    if i % 2 == 1 {
        (i as i64 + 1) / 2
    } else {
        -(i as i64) / 2
    }
}

pub fn fourier_frequencies(m: usize) -> Vec<i64> {
    (0..m).map(fourier_frequency).collect()
}

/// Exact integrals <v, Wal(n,.)> for all n < 2^q of a depth-q step function,
/// via one sequency-ordered fast transform. Walsh functions with n >= 2^q are
/// orthogonal to the depth-q grid, so this is the complete nonzero set.
pub fn walsh_integrals(dense: &[f64]) -> Result<Vec<f64>> {
    let mut buf = dense.to_vec();
    fwht_sequency(&mut buf)?;
    let scale = 1.0 / (dense.len() as f64).sqrt();
    for v in buf.iter_mut() {
        *v *= scale;
    }
    Ok(buf)
}

/// Exact integrals int_0^1 v(x) e^{-2 pi i k x} dx of a depth-q step function
/// for arbitrary integer frequencies: one FFT plus the per-frequency factor
/// that integrates the exponential over a single cell.
pub fn fourier_integrals(dense: &[f64], freqs: &[i64]) -> Vec<Complex64> {
    let len = dense.len();
    let mut buf: Vec<Complex64> = dense.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(len).process(&mut buf);
    freqs
        .iter()
        .map(|&k| unit_cell_factor(k, len) * buf[k.rem_euclid(len as i64) as usize])
        .collect()
}

/// int_{0}^{1/len} e^{-2 pi i k x} dx.
pub fn unit_cell_factor(k: i64, len: usize) -> Complex64 {
    if k == 0 {
        return Complex64::new(1.0 / len as f64, 0.0);
    }
    let phase = -2.0 * std::f64::consts::PI * k as f64 / len as f64;
    let num = Complex64::new(1.0, 0.0) - Complex64::new(phase.cos(), phase.sin());
    num / Complex64::new(0.0, 2.0 * std::f64::consts::PI * k as f64)
}

/// Real embedding [Re -Im; Im Re] of a complex matrix. Multiplication by it
/// reproduces complex multiplication on stacked [Re; Im] vectors, so real
/// SVD machinery can serve complex least-squares and spectra.
pub fn augment_complex(m: &DMatrix<Complex64>) -> DMatrix<f64> {
    let (rows, cols) = m.shape();
    let mut out = DMatrix::<f64>::zeros(2 * rows, 2 * cols);
    for i in 0..rows {
        for j in 0..cols {
            let z = m[(i, j)];
            out[(i, j)] = z.re;
            out[(i, j + cols)] = -z.im;
            out[(i + rows, j)] = z.im;
            out[(i + rows, j + cols)] = z.re;
        }
    }
    out
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Provenance {
    Analytic,
    Quadrature,
}

#[derive(Clone, Debug)]
pub enum GramEntries {
    Real(DMatrix<f64>),
    Complex(DMatrix<Complex64>),
}

impl GramEntries {
    pub fn nrows(&self) -> usize {
        match self {
            GramEntries::Real(m) => m.nrows(),
            GramEntries::Complex(m) => m.nrows(),
        }
    }

    pub fn ncols(&self) -> usize {
        match self {
            GramEntries::Real(m) => m.ncols(),
            GramEntries::Complex(m) => m.ncols(),
        }
    }

    pub fn at(&self, i: usize, j: usize) -> Complex64 {
        match self {
            GramEntries::Real(m) => Complex64::new(m[(i, j)], 0.0),
            GramEntries::Complex(m) => m[(i, j)],
        }
    }

    /// Descending singular values. Complex matrices go through the real
    /// embedding [Re -Im; Im Re], which doubles every singular value's
    /// multiplicity; the complex SVD code path is avoided because its
    /// accuracy is far below the real one's.
    pub fn singular_values(&self) -> Vec<f64> {
        let mut sv: Vec<f64> = match self {
            GramEntries::Real(m) => {
                m.clone().svd(false, false).singular_values.iter().cloned().collect()
            }
            GramEntries::Complex(m) => {
                let aug = augment_complex(m);
                let doubled: Vec<f64> =
                    aug.svd(false, false).singular_values.iter().cloned().collect();
                let mut doubled = doubled;
                doubled.sort_by(|a, b| b.partial_cmp(a).unwrap());
                return doubled.into_iter().step_by(2).collect();
            }
        };
        sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
        sv
    }

    /// Hermitian Gram of the first m rows, smallest eigenvalue clipped at 0.
    /// This is sigma_min^2 of the row-truncated matrix.
    pub fn lambda_min_of_rows(&self, m: usize) -> f64 {
        let lambda = match self {
            GramEntries::Real(u) => {
                let rows = u.rows(0, m);
                let g = rows.tr_mul(&rows);
                g.symmetric_eigen().eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
            }
            GramEntries::Complex(u) => {
                let aug = augment_complex(&u.rows(0, m).into_owned());
                let g = aug.tr_mul(&aug);
                g.symmetric_eigen()
                    .eigenvalues
                    .iter()
                    .cloned()
                    .fold(f64::INFINITY, f64::min)
            }
        };
        lambda.max(0.0)
    }
}

/// The change-of-basis matrix with u_{ij} = <r_j, s_i>: rows are measurement
/// functions, columns reconstruction functions.
#[derive(Clone, Debug)]
pub struct CrossGramian {
    pub entries: GramEntries,
    pub sampling: SamplingSpec,
    pub recon: BasisSpec,
    pub rep: Representation,
    pub provenance: Provenance,
    /// Per-axis grid depth the entries were integrated at; reconstruction
    /// methods that render the same basis must reuse it.
    pub q: u32,
}

impl CrossGramian {
    pub fn m(&self) -> usize {
        self.entries.nrows()
    }

    pub fn n(&self) -> usize {
        self.entries.ncols()
    }
}

#[derive(Copy, Clone, Debug)]
pub struct AngleReport {
    pub sigma_min: f64,
    pub sigma_max: f64,
    /// 1 / sigma_min: the reconstruction-to-measurement angle reciprocal.
    pub mu: f64,
    pub kappa: f64,
}

/// Subspace-angle quantities of an assembled Gramian. With fewer rows than
/// columns sigma_min is structurally 0 and mu is infinite.
pub fn mu_of(g: &CrossGramian) -> Result<AngleReport> {
    mu_of_entries(&g.entries)
}

pub fn mu_of_entries(entries: &GramEntries) -> Result<AngleReport> {
    if entries.nrows() == 0 || entries.ncols() == 0 {
        return Err(Error::Domain("empty matrix has no angle report".into()));
    }
    let sv = entries.singular_values();
    let sigma_max = sv[0];
    let sigma_min = if entries.nrows() < entries.ncols() {
        0.0
    } else {
        *sv.last().unwrap()
    };
    Ok(AngleReport {
        sigma_min,
        sigma_max,
        mu: if sigma_min > 0.0 { 1.0 / sigma_min } else { f64::INFINITY },
        kappa: if sigma_min > 0.0 { sigma_max / sigma_min } else { f64::INFINITY },
    })
}

/// Closed-form inner product of a Haar basis function with a Walsh function,
/// sign included. kind/level/j describe the basis function (j has one entry
/// per axis, n one sequency per axis).
pub fn haar_walsh_entry(kind: BasisKind, level: u32, j: &[u64], n: &[u64]) -> Result<f64> {
    if j.len() != n.len() || j.is_empty() || j.len() > 2 {
        return Err(Error::DimensionMismatch(format!(
            "haar_walsh_entry wants matching 1- or 2-axis indices, got {} and {}",
            j.len(),
            n.len()
        )));
    }
    let factors: Vec<bool> = match (j.len(), kind) {
        (1, BasisKind::Scaling) => vec![false],
        (1, BasisKind::Wavelet) => vec![true],
        (2, BasisKind::Scaling) => vec![false, false],
        (2, BasisKind::Mixed(1)) => vec![false, true],
        (2, BasisKind::Mixed(2)) => vec![true, false],
        (2, BasisKind::Mixed(3)) => vec![true, true],
        _ => return Err(Error::Domain("basis kind does not match dimension".into())),
    };
    let mut acc = 1.0;
    for (axis, &wavelet) in factors.iter().enumerate() {
        acc *= haar_walsh_axis(level, j[axis], n[axis], wavelet)?;
        if acc == 0.0 {
            return Ok(0.0);
        }
    }
    Ok(acc)
}

/// One axis factor: <phi_{r,j}, Wal(n,.)> or <psi_{r,j}, Wal(n,.)>.
/// The scaling factor is 2^{-r/2} Wal(n, j 2^-r) for n < 2^r; the wavelet
/// factor is 2^{-r/2} Wal(n, j 2^-r) for 2^r <= n < 2^{r+1}; both vanish
/// elsewhere. The sign comes from evaluating the Walsh function at the left
/// endpoint of the cell (it is constant on the relevant half-cell).
fn haar_walsh_axis(level: u32, j: u64, n: u64, wavelet: bool) -> Result<f64> {
    if j >= 1u64 << level {
        return Err(Error::Domain(format!("translate {j} out of range at level {level}")));
    }
    let lo = 1u64 << level;
    let in_band = if wavelet { n >= lo && n < 2 * lo } else { n < lo };
    if !in_band {
        return Ok(0.0);
    }
    let x = DyadicPoint::from_grid_index(j, level)?;
    let sign = wal_eval(n, x)? as f64;
    Ok(sign * (0.5f64).powi(level as i32 / 2) * if level % 2 == 1 { std::f64::consts::FRAC_1_SQRT_2 } else { 1.0 })
}

/// Assembles the cross-Gramian at the family's guard depth.
pub fn assemble_gramian(
    sampling: &SamplingSpec,
    recon: &BasisSpec,
    rep: Representation,
) -> Result<CrossGramian> {
    assemble_gramian_at(sampling, recon, rep, recon.family.guard_depth(recon.r))
}

/// Assembly at an explicit per-axis grid depth. Haar-Walsh entries are
/// analytic; everything else integrates the rendered basis exactly (Walsh
/// functions and the complex exponentials both have closed-form integrals
/// against depth-q step functions). Multi-axis entries factor across axes
/// because both families and both bases are tensor products.
pub fn assemble_gramian_at(
    sampling: &SamplingSpec,
    recon: &BasisSpec,
    rep: Representation,
    q: u32,
) -> Result<CrossGramian> {
    if sampling.d != recon.d {
        return Err(Error::DimensionMismatch(format!(
            "sampling dimension {} vs reconstruction dimension {}",
            sampling.d, recon.d
        )));
    }
    let m_total = sampling.total();
    let n_total = recon.n();
    if m_total.checked_mul(n_total).map_or(true, |size| size > 1 << 24) {
        return Err(Error::Domain(format!(
            "gramian {m_total} x {n_total} exceeds the dense size limit"
        )));
    }
    if rep == Representation::WaveletOrdered && recon.family != Family::Haar {
        return Err(Error::UnsupportedPairing(
            "wavelet-ordered assembly is available only for haar".into(),
        ));
    }

    let analytic = recon.family == Family::Haar && sampling.family == SamplingFamily::Walsh;
    let axis = if analytic {
        None
    } else {
        Some(assemble_axis(sampling, recon, rep, q)?)
    };

    let entries = match recon.d {
        1 => match &axis {
            None => GramEntries::Real(analytic_walsh_haar_axis(recon, rep, sampling.m_per_axis)?),
            Some(a) => a.clone(),
        },
        2 => {
            let a = match &axis {
                None => GramEntries::Real(analytic_walsh_haar_axis(
                    &BasisSpec::new(recon.family, 1, recon.r)?,
                    Representation::Scaling,
                    sampling.m_per_axis,
                )?),
                Some(a) => a.clone(),
            };
            if rep == Representation::WaveletOrdered {
                tensor_wavelet_ordered(sampling, recon, q, &a)?
            } else {
                tensor_box(&a, sampling.m_per_axis)
            }
        }
        d => return Err(Error::UnsupportedPairing(format!("gramian assembly at d={d}"))),
    };

    Ok(CrossGramian {
        entries,
        sampling: *sampling,
        recon: *recon,
        rep,
        provenance: if analytic { Provenance::Analytic } else { Provenance::Quadrature },
        q,
    })
}

/// 1D analytic Haar-Walsh entries for either representation. Rows with
/// sequency outside every band are exactly zero.
fn analytic_walsh_haar_axis(
    recon: &BasisSpec,
    rep: Representation,
    m: usize,
) -> Result<DMatrix<f64>> {
    let spec1 = BasisSpec::new(recon.family, 1, recon.r)?;
    let ids = enumerate_basis(&spec1, rep)?;
    let mut u = DMatrix::zeros(m, ids.len());
    for (c, id) in ids.iter().enumerate() {
        for row in 0..m {
            u[(row, c)] = haar_walsh_entry(id.kind, id.level, &id.j, &[row as u64])?;
        }
    }
    Ok(u)
}

/// 1D quadrature entries: every orthonormal basis column rendered on the
/// depth-q grid and integrated against the first m measurement functions.
fn assemble_axis(
    sampling: &SamplingSpec,
    recon: &BasisSpec,
    rep: Representation,
    q: u32,
) -> Result<GramEntries> {
    let spec1 = BasisSpec::new(recon.family, 1, recon.r)?;
    match (recon.family, rep) {
        (Family::Haar, Representation::WaveletOrdered) | (Family::Haar, Representation::Scaling) => {
            // Haar columns are rendered exactly from their ids; depth r+1
            // suffices for every level in the enumeration.
            let q = q.max(recon.r + 1);
            let ids = enumerate_basis(&spec1, rep)?;
            let mut cols: Vec<Vec<f64>> = Vec::with_capacity(ids.len());
            for id in &ids {
                cols.push(crate::wavelet::render_haar_id(id, 1, q)?.values);
            }
            integrate_columns(sampling, &cols, q)
        }
        (_, Representation::Scaling) => {
            let basis = OrthoBasis::new(recon.family, recon.r, q)?;
            let raw_u = integrate_raw(sampling, basis.raw_columns(), q)?;
            Ok(match raw_u {
                GramEntries::Real(m) => GramEntries::Real(m * basis.mix()),
                GramEntries::Complex(m) => {
                    GramEntries::Complex(m * basis.mix().map(|v| Complex64::new(v, 0.0)))
                }
            })
        }
        (fam, Representation::WaveletOrdered) => Err(Error::UnsupportedPairing(format!(
            "wavelet-ordered assembly for {}",
            fam.name()
        ))),
    }
}

fn integrate_columns(sampling: &SamplingSpec, cols: &[Vec<f64>], q: u32) -> Result<GramEntries> {
    let m = sampling.m_per_axis;
    match sampling.family {
        SamplingFamily::Walsh => {
            if m > 1 << q {
                return Err(Error::DepthTooSmall { have: q, need: m.ilog2() + 1 });
            }
            let mut u = DMatrix::zeros(m, cols.len());
            for (c, col) in cols.iter().enumerate() {
                let ints = walsh_integrals(col)?;
                for row in 0..m {
                    u[(row, c)] = ints[row];
                }
            }
            Ok(GramEntries::Real(u))
        }
        SamplingFamily::Fourier => {
            let freqs = fourier_frequencies(m);
            let mut u = DMatrix::zeros(m, cols.len());
            for (c, col) in cols.iter().enumerate() {
                for (row, v) in fourier_integrals(col, &freqs).into_iter().enumerate() {
                    u[(row, c)] = v;
                }
            }
            Ok(GramEntries::Complex(u))
        }
    }
}

fn integrate_raw(sampling: &SamplingSpec, raw: &[GridColumn], q: u32) -> Result<GramEntries> {
    let cells = 1usize << q;
    let cols: Vec<Vec<f64>> = raw
        .iter()
        .map(|col| {
            let mut dense = vec![0.0; cells];
            col.add_into(&mut dense, 1.0);
            dense
        })
        .collect();
    integrate_columns(sampling, &cols, q)
}

/// 2D entries from a 1D axis matrix: row (i1, i2) = i1 * m + i2, column
/// (c1, c2) = c1 * n + c2, entry = a[i1, c1] * a[i2, c2].
fn tensor_box(a: &GramEntries, m: usize) -> GramEntries {
    let n = a.ncols();
    match a {
        GramEntries::Real(a1) => {
            let mut u = DMatrix::zeros(m * m, n * n);
            for i1 in 0..m {
                for i2 in 0..m {
                    for c1 in 0..n {
                        for c2 in 0..n {
                            u[(i1 * m + i2, c1 * n + c2)] = a1[(i1, c1)] * a1[(i2, c2)];
                        }
                    }
                }
            }
            GramEntries::Real(u)
        }
        GramEntries::Complex(a1) => {
            let mut u = DMatrix::zeros(m * m, n * n);
            for i1 in 0..m {
                for i2 in 0..m {
                    for c1 in 0..n {
                        for c2 in 0..n {
                            u[(i1 * m + i2, c1 * n + c2)] = a1[(i1, c1)] * a1[(i2, c2)];
                        }
                    }
                }
            }
            GramEntries::Complex(u)
        }
    }
}

/// 2D wavelet-ordered Haar entries: per-axis factor tables for the scaling
/// and wavelet functions of each level, tensored according to each id's kind.
fn tensor_wavelet_ordered(
    sampling: &SamplingSpec,
    recon: &BasisSpec,
    q: u32,
    _axis_scaling: &GramEntries,
) -> Result<GramEntries> {
    let m = sampling.m_per_axis;
    let ids = enumerate_basis(recon, Representation::WaveletOrdered)?;

    // factor[level][j] for scaling and wavelet axis functions.
    let mut scal: Vec<DMatrix<Complex64>> = Vec::new();
    let mut wav: Vec<DMatrix<Complex64>> = Vec::new();
    for level in 0..=recon.r {
        let side = 1usize << level;
        let mut fs = DMatrix::zeros(m, side);
        let mut fw = DMatrix::zeros(m, side);
        for j in 0..side {
            for (is_wavelet, table) in [(false, &mut fs), (true, &mut fw)] {
                if is_wavelet && level == recon.r {
                    continue; // top-level wavelets are not part of the span
                }
                match sampling.family {
                    SamplingFamily::Walsh => {
                        for row in 0..m {
                            table[(row, j)] = Complex64::new(
                                haar_walsh_axis(level, j as u64, row as u64, is_wavelet)?,
                                0.0,
                            );
                        }
                    }
                    SamplingFamily::Fourier => {
                        let qa = q.max(recon.r + 1);
                        let id = crate::wavelet::BasisFunctionId {
                            level,
                            j: vec![j as u64],
                            kind: if is_wavelet { BasisKind::Wavelet } else { BasisKind::Scaling },
                        };
                        let dense = crate::wavelet::render_haar_id(&id, 1, qa)?.values;
                        let freqs = fourier_frequencies(m);
                        for (row, v) in fourier_integrals(&dense, &freqs).into_iter().enumerate() {
                            table[(row, j)] = v;
                        }
                    }
                }
            }
        }
        scal.push(fs);
        wav.push(fw);
    }

    let mut u = DMatrix::zeros(m * m, ids.len());
    for (c, id) in ids.iter().enumerate() {
        let (w1, w2) = match id.kind {
            BasisKind::Scaling => (false, false),
            BasisKind::Mixed(1) => (false, true),
            BasisKind::Mixed(2) => (true, false),
            BasisKind::Mixed(3) => (true, true),
            BasisKind::Wavelet | BasisKind::Mixed(_) => {
                return Err(Error::Domain("invalid 2D id".into()))
            }
        };
        let f1 = if w1 { &wav[id.level as usize] } else { &scal[id.level as usize] };
        let f2 = if w2 { &wav[id.level as usize] } else { &scal[id.level as usize] };
        for i1 in 0..m {
            for i2 in 0..m {
                u[(i1 * m + i2, c)] = f1[(i1, id.j[0] as usize)] * f2[(i2, id.j[1] as usize)];
            }
        }
    }
    if sampling.family == SamplingFamily::Walsh {
        Ok(GramEntries::Real(u.map(|z| z.re)))
    } else {
        Ok(GramEntries::Complex(u))
    }
}

#[derive(Copy, Clone, Debug, PartialEq)]
pub enum SsrOutcome {
    Reached { m: usize, mu: f64 },
    NotReached,
}

/// Stable sampling rate: the smallest admissible M <= m_max with
/// mu(R_N, S_M) < theta, sweeping the sampling family's admissible sizes
/// (all integers in 1D; full boxes m^d otherwise). mu is non-increasing in M
/// because the sampling spaces are nested, so the sweep bisects.
pub fn ssr(
    theta: f64,
    family: SamplingFamily,
    recon: &BasisSpec,
    m_max: usize,
) -> Result<SsrOutcome> {
    if !(theta > 1.0) {
        return Err(Error::Domain(format!("theta must exceed 1, got {theta}")));
    }
    let n_axis = recon.n_per_axis();
    // Per-axis threshold: box sampling sets and tensor bases factor, so the
    // d-dimensional sigma_min is the d-th power of the per-axis one.
    let theta_axis = theta.powf(1.0 / recon.d as f64);
    let axis_cap = match recon.d {
        1 => m_max,
        2 => (m_max as f64).sqrt() as usize,
        d => return Err(Error::UnsupportedPairing(format!("ssr at d={d}"))),
    };
    if axis_cap < n_axis {
        return Ok(SsrOutcome::NotReached);
    }

    let spec1 = BasisSpec::new(recon.family, 1, recon.r)?;
    let q = recon.family.guard_depth(recon.r);
    let axis_cap = if family == SamplingFamily::Walsh {
        // Sequencies >= 2^q vanish on the depth-q rendering and cannot help.
        axis_cap.min(1 << q)
    } else {
        axis_cap
    };
    let sampling = SamplingSpec::new(family, 1, axis_cap)?;
    let u = assemble_axis(&sampling, &spec1, Representation::Scaling, q)?;

    let mu_axis = |m: usize| -> f64 {
        let lambda = u.lambda_min_of_rows(m);
        if lambda > 0.0 {
            1.0 / lambda.sqrt()
        } else {
            f64::INFINITY
        }
    };

    if !(mu_axis(axis_cap) < theta_axis) {
        return Ok(SsrOutcome::NotReached);
    }
    let (mut lo, mut hi) = (n_axis, axis_cap);
    // Invariant: mu(hi) < theta_axis <= mu(lo) unless lo itself passes.
    if mu_axis(lo) < theta_axis {
        hi = lo;
    }
    while hi > lo + 1 {
        let mid = lo + (hi - lo) / 2;
        if mu_axis(mid) < theta_axis {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let m_axis = hi;
    let mu = mu_axis(m_axis).powi(recon.d as i32);
    Ok(SsrOutcome::Reached { m: m_axis.pow(recon.d), mu })
}

/// Full per-M angle profile over a 1D sweep, for monotonicity checks and the
/// reconstruct subcommand's error table.
pub fn mu_profile(
    family: SamplingFamily,
    recon: &BasisSpec,
    ms: &[usize],
) -> Result<Vec<f64>> {
    if recon.d != 1 {
        return Err(Error::UnsupportedPairing("mu_profile is 1D".into()));
    }
    let q = recon.family.guard_depth(recon.r);
    let cap = *ms.iter().max().unwrap_or(&recon.n());
    let sampling = SamplingSpec::new(family, 1, cap)?;
    let spec1 = BasisSpec::new(recon.family, 1, recon.r)?;
    let u = assemble_axis(&sampling, &spec1, Representation::Scaling, q)?;
    Ok(ms
        .iter()
        .map(|&m| {
            if m < recon.n() {
                return f64::INFINITY;
            }
            let lambda = u.lambda_min_of_rows(m);
            if lambda > 0.0 {
                1.0 / lambda.sqrt()
            } else {
                f64::INFINITY
            }
        })
        .collect())
}
