//! Haar and boundary-corrected Daubechies scaling bases of [0,1] at level R,
//! rendered as exact cell averages on a fine dyadic grid and orthonormalized
//! there. The edge construction keeps polynomial reproduction up to the
//! filter's vanishing-moment order on the whole interval.

use crate::error::{Error, Result};
use crate::grid::{dot, FineGridFunction, GridColumn};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

/// Daubechies filters in standard order, p vanishing moments, 2p taps.
/// Values from a high-precision spectral factorization of the Daubechies
/// polynomial, rounded to nearest f64.
const DB2: [f64; 4] = [
    0.4829629131445341434,
    0.8365163037378079056,
    0.224143868042013381,
    -0.1294095225512603812,
];
const DB4: [f64; 8] = [
    0.2303778133088965009,
    0.7148465705529156471,
    0.6308807679298589079,
    -0.02798376941685985421,
    -0.1870348117190930841,
    0.03084138183556076363,
    0.03288301166688519974,
    -0.0105974017850690321,
];
const DB8: [f64; 16] = [
    0.05441584224310400996,
    0.3128715909142999707,
    0.6756307362972898068,
    0.5853546836542067128,
    -0.01582910525634930567,
    -0.2840155429615469265,
    0.0004724845739132827704,
    0.1287474266204784589,
    -0.01736930100180754617,
    -0.04408825393079475151,
    0.01398102791739828165,
    0.008746094047405776716,
    -0.00487035299345157431,
    -0.0003917403733769470463,
    0.0006754494064505693664,
    -0.0001174767841247695337,
];

const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub enum Family {
    Haar,
    /// Order = number of vanishing moments; supported: 2, 4, 8.
    Daubechies(u32),
}

impl Family {
    pub fn parse(name: &str) -> Result<Family> {
        match name {
            "haar" => Ok(Family::Haar),
            "db2" => Ok(Family::Daubechies(2)),
            "db4" => Ok(Family::Daubechies(4)),
            "db8" => Ok(Family::Daubechies(8)),
            other => Err(Error::Domain(format!("unknown wavelet family {other}"))),
        }
    }

    pub fn name(&self) -> String {
        match self {
            Family::Haar => "haar".into(),
            Family::Daubechies(p) => format!("db{p}"),
        }
    }

    /// Vanishing moments; 1 for Haar.
    pub fn order(&self) -> u32 {
        match self {
            Family::Haar => 1,
            Family::Daubechies(p) => *p,
        }
    }

    pub fn filter(&self) -> Result<Vec<f64>> {
        match self {
            Family::Haar => Ok(vec![FRAC_1_SQRT_2, FRAC_1_SQRT_2]),
            Family::Daubechies(2) => Ok(DB2.to_vec()),
            Family::Daubechies(4) => Ok(DB4.to_vec()),
            Family::Daubechies(8) => Ok(DB8.to_vec()),
            Family::Daubechies(p) => Err(Error::UnsupportedOrder(*p)),
        }
    }

    /// Support of the scaling function is [0, support_len()].
    pub fn support_len(&self) -> u32 {
        2 * self.order() - 1
    }

    /// Fine-grid margin that keeps quadrature error out of the acceptance
    /// tolerances. Haar is exact one level down; Daubechies renderings
    /// converge geometrically, and the cap keeps grids at desk scale.
    pub fn guard_depth(&self, r: u32) -> u32 {
        match self {
            Family::Haar => r + 1,
            Family::Daubechies(_) => (r + 12).min(16).max(r + 3),
        }
    }

    /// Smallest level with a nonempty interior between the two edge blocks.
    pub fn min_level(&self) -> u32 {
        match self {
            Family::Haar => 0,
            Family::Daubechies(p) => (32 - (2 * p).leading_zeros()).max(1),
        }
    }
}

/// Reconstruction-space description: N = 2^{dR} functions on [0,1]^d.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct BasisSpec {
    pub family: Family,
    pub d: u32,
    pub r: u32,
}

impl BasisSpec {
    pub fn new(family: Family, d: u32, r: u32) -> Result<Self> {
        if d == 0 {
            return Err(Error::Domain("dimension must be at least 1".into()));
        }
        if d > 2 && family != Family::Haar {
            return Err(Error::UnsupportedPairing(format!(
                "dimension {d} is supported only for haar"
            )));
        }
        if family != Family::Haar && r < family.min_level() {
            return Err(Error::LevelTooSmall { r, p: family.order() });
        }
        Ok(BasisSpec { family, d, r })
    }

    pub fn n(&self) -> usize {
        1usize << (self.d * self.r)
    }

    pub fn n_per_axis(&self) -> usize {
        1usize << self.r
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Representation {
    /// Level-R scaling functions in translation order (default).
    Scaling,
    /// Multilevel wavelet order; Haar only.
    WaveletOrdered,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum BasisKind {
    Scaling,
    Wavelet,
    /// 2D mixed kinds: 1 = scaling x wavelet, 2 = wavelet x scaling,
    /// 3 = wavelet x wavelet.
    Mixed(u8),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BasisFunctionId {
    pub level: u32,
    pub j: Vec<u64>,
    pub kind: BasisKind,
}

/// Level-R scaling functions (or their edge corrections) in translation
/// order, one id per basis function.
pub fn enumerate_basis(spec: &BasisSpec, rep: Representation) -> Result<Vec<BasisFunctionId>> {
    match rep {
        Representation::Scaling => {
            let per_axis = spec.n_per_axis() as u64;
            let mut ids = Vec::with_capacity(spec.n());
            let mut j = vec![0u64; spec.d as usize];
            loop {
                ids.push(BasisFunctionId { level: spec.r, j: j.clone(), kind: BasisKind::Scaling });
                // Odometer with the last axis fastest, matching the row-major
                // Kronecker layout of 2D grids.
                let mut axis = spec.d as usize;
                loop {
                    if axis == 0 {
                        return Ok(ids);
                    }
                    axis -= 1;
                    j[axis] += 1;
                    if j[axis] < per_axis {
                        break;
                    }
                    j[axis] = 0;
                }
            }
        }
        Representation::WaveletOrdered => {
            if spec.family != Family::Haar {
                return Err(Error::UnsupportedPairing(
                    "wavelet-ordered enumeration is available only for haar".into(),
                ));
            }
            match spec.d {
                1 => {
                    let mut ids =
                        vec![BasisFunctionId { level: 0, j: vec![0], kind: BasisKind::Scaling }];
                    for level in 0..spec.r {
                        for j in 0..1u64 << level {
                            ids.push(BasisFunctionId { level, j: vec![j], kind: BasisKind::Wavelet });
                        }
                    }
                    Ok(ids)
                }
                2 => {
                    let mut ids =
                        vec![BasisFunctionId { level: 0, j: vec![0, 0], kind: BasisKind::Scaling }];
                    for level in 0..spec.r {
                        let side = 1u64 << level;
                        for l in 1..=3u8 {
                            for j2 in 0..side {
                                for j1 in 0..side {
                                    ids.push(BasisFunctionId {
                                        level,
                                        j: vec![j1, j2],
                                        kind: BasisKind::Mixed(l),
                                    });
                                }
                            }
                        }
                    }
                    Ok(ids)
                }
                d => Err(Error::UnsupportedPairing(format!(
                    "wavelet-ordered enumeration is limited to d <= 2, got {d}"
                ))),
            }
        }
    }
}

/// Exact cell averages of the scaling function over its support at mesh
/// 2^-g: returns (2p-1) * 2^g averages computed from the antiderivative,
/// which refines exactly under the two-scale relation.
pub fn scaling_cell_averages(family: Family, g: u32) -> Result<Vec<f64>> {
    let cells_per_unit = 1usize << g;
    if family == Family::Haar {
        return Ok(vec![1.0; cells_per_unit]);
    }
    let h = family.filter()?;
    let ell = h.len() - 1; // support [0, ell]
    let phi = antiderivative_dyadic(&h, g)?;
    let mut avg = Vec::with_capacity(ell * cells_per_unit);
    let scale = cells_per_unit as f64;
    for j in 0..ell * cells_per_unit {
        avg.push(scale * (phi[j + 1] - phi[j]));
    }
    Ok(avg)
}

/// Antiderivative Phi(x) = int_0^x phi at the dyadic points k * 2^-g of
/// [0, ell]. Phi obeys Phi(x) = 2^{-1/2} sum_k h_k Phi(2x - k) with
/// Phi(0) = 0, Phi(ell) = 1, so integer values come from a linear solve and
/// dyadic midpoints refine exactly level by level.
fn antiderivative_dyadic(h: &[f64], g: u32) -> Result<Vec<f64>> {
    let ell = h.len() - 1;
    let unknowns = ell - 1;
    let mut a = DMatrix::<f64>::zeros(unknowns, unknowns);
    let mut b = DVector::<f64>::zeros(unknowns);
    for (i, k) in (1..ell).enumerate() {
        a[(i, i)] += 1.0;
        for (j, &hj) in h.iter().enumerate() {
            let m = 2 * k as i64 - j as i64;
            if m <= 0 {
                continue;
            }
            if m as usize >= ell {
                b[i] += hj * FRAC_1_SQRT_2;
            } else {
                a[(i, m as usize - 1)] -= hj * FRAC_1_SQRT_2;
            }
        }
    }
    let interior = a
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::SingularConstruction(0.0))?;

    let cells_per_unit = 1usize << g;
    let total = ell * cells_per_unit;
    let mut phi = vec![f64::NAN; total + 1];
    for k in 0..=ell {
        phi[k * cells_per_unit] = if k == 0 {
            0.0
        } else if k == ell {
            1.0
        } else {
            interior[k - 1]
        };
    }
    for lev in 1..=g {
        let step = 1usize << (g - lev);
        let mut idx = step;
        while idx < total {
            if phi[idx].is_nan() {
                let mut acc = 0.0;
                for (j, &hj) in h.iter().enumerate() {
                    let idx2 = 2 * idx as i64 - (j as i64) * cells_per_unit as i64;
                    if idx2 < 0 {
                        continue;
                    }
                    if idx2 as usize >= total {
                        acc += hj;
                    } else {
                        acc += hj * phi[idx2 as usize];
                    }
                }
                phi[idx] = acc * FRAC_1_SQRT_2;
            }
            idx += 2 * step;
        }
    }
    Ok(phi)
}

/// Point values of the scaling function at the dyadic points k * 2^-q of its
/// support, by the cascade/refinement iteration: integer values from the
/// eigenvector of the transfer matrix, midpoints from the two-scale relation.
pub fn scaling_samples(family: Family, q: u32) -> Result<Vec<f64>> {
    let cells_per_unit = 1usize << q;
    if family == Family::Haar {
        let mut v = vec![1.0; cells_per_unit + 1];
        v[cells_per_unit] = 0.0;
        return Ok(v);
    }
    let h = family.filter()?;
    let ell = h.len() - 1;
    let sqrt2 = std::f64::consts::SQRT_2;

    // phi(a) = sqrt2 sum_b h_{2a-b} phi(b) for integer a,b in 1..ell-1;
    // normalized by sum phi(k) = 1 (partition of unity at integers).
    let n = ell - 1;
    let mut sys = DMatrix::<f64>::zeros(n + 1, n);
    let mut rhs = DVector::<f64>::zeros(n + 1);
    for (row, a_pt) in (1..ell).enumerate() {
        for (col, b_pt) in (1..ell).enumerate() {
            let k = 2 * a_pt as i64 - b_pt as i64;
            let mut m = 0.0;
            if (0..h.len() as i64).contains(&k) {
                m = sqrt2 * h[k as usize];
            }
            sys[(row, col)] = m - if row == col { 1.0 } else { 0.0 };
        }
    }
    for col in 0..n {
        sys[(n, col)] = 1.0;
    }
    rhs[n] = 1.0;
    let ints = sys
        .svd(true, true)
        .solve(&rhs, 1e-300)
        .map_err(|_| Error::SingularConstruction(0.0))?;

    let total = ell * cells_per_unit;
    let mut vals = vec![f64::NAN; total + 1];
    vals[0] = 0.0;
    vals[total] = 0.0;
    for k in 1..ell {
        vals[k * cells_per_unit] = ints[k - 1];
    }
    for lev in 1..=q {
        let step = 1usize << (q - lev);
        let mut idx = step;
        while idx < total {
            if vals[idx].is_nan() {
                let mut acc = 0.0;
                for (j, &hj) in h.iter().enumerate() {
                    let idx2 = 2 * idx as i64 - (j as i64) * cells_per_unit as i64;
                    if (0..=total as i64).contains(&idx2) {
                        acc += hj * vals[idx2 as usize];
                    }
                }
                vals[idx] = acc * sqrt2;
            }
            idx += 2 * step;
        }
    }
    Ok(vals)
}

fn binomial(n: u32, k: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    let mut acc = 1.0f64;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

/// The level-R reconstruction basis on [0,1], rendered on the depth-q grid.
/// Columns are stored as the raw construction (sparse runs) plus a dense
/// mixing matrix from the grid orthonormalization; basis column c is
/// sum_j mix[(j,c)] raw_j.
pub struct OrthoBasis {
    pub family: Family,
    pub r: u32,
    pub q: u32,
    raw: Vec<GridColumn>,
    mix: DMatrix<f64>,
}

impl OrthoBasis {
    pub fn new(family: Family, r: u32, q: u32) -> Result<Self> {
        let spec = BasisSpec::new(family, 1, r)?;
        let need = if family == Family::Haar { r } else { r + 2 };
        if q < need || q > 26 {
            return Err(Error::DepthTooSmall { have: q, need });
        }
        let n = spec.n();
        let g = q - r;
        let cells = 1usize << q;
        let avg = scaling_cell_averages(family, g)?;
        let p = family.order();
        let scale =
            (2f64).powi(r as i32 / 2) * if r % 2 == 1 { std::f64::consts::SQRT_2 } else { 1.0 };

        let translate = |t: i64| -> GridColumn {
            let start = t * (1i64 << g);
            if start >= cells as i64 || start + (avg.len() as i64) <= 0 {
                return GridColumn { start: 0, vals: vec![] };
            }
            let lo = (-start).max(0) as usize;
            let hi = (cells as i64 - start).min(avg.len() as i64) as usize;
            GridColumn {
                start: (start + lo as i64) as usize,
                vals: avg[lo..hi].iter().map(|&v| scale * v).collect(),
            }
        };
        let mut raw: Vec<GridColumn> = Vec::with_capacity(n);
        if family == Family::Haar {
            for t in 0..n as i64 {
                raw.push(translate(t));
            }
        } else {
            let p = p as i64;
            let s = ((p - 1) / 2) as i64;
            // Left edge: staggered binomial combinations of the translates
            // whose supports cross 0, one function per polynomial degree.
            // Together with the interior translates they reproduce all
            // polynomials of degree < p on [0,1].
            for k in 0..p {
                let mut col = GridColumn { start: 0, vals: vec![] };
                for nn in k..=(s + 2 * p - 2) {
                    col.axpy(binomial(nn as u32, k as u32), &translate(s - nn));
                }
                raw.push(col);
            }
            for t in (s + 1)..=(n as i64 - 2 * p + s) {
                raw.push(translate(t));
            }
            // Right edge: same staggering built from the translates crossing 1.
            let t0 = n as i64 - 2 * p + s + 1;
            for k in 0..p {
                let mut col = GridColumn { start: 0, vals: vec![] };
                for t in t0..n as i64 {
                    col.axpy(
                        binomial((t - t0) as u32 + (p - 1 - k) as u32, (p - 1 - k) as u32),
                        &translate(t),
                    );
                }
                raw.push(col);
            }
        }
        debug_assert_eq!(raw.len(), n);

        let weight = (0.5f64).powi(q as i32);
        for col in &mut raw {
            let nrm = (weight * dot(&col.vals, &col.vals)).sqrt();
            if nrm < 1e-300 {
                return Err(Error::SingularConstruction(0.0));
            }
            col.scale(1.0 / nrm);
        }

        let mix = if family == Family::Haar {
            DMatrix::identity(n, n)
        } else {
            orthonormalize(&raw, weight, cells)?
        };
        Ok(OrthoBasis { family, r, q, raw, mix })
    }

    pub fn n(&self) -> usize {
        self.raw.len()
    }

    fn weight(&self) -> f64 {
        (0.5f64).powi(self.q as i32)
    }

    /// Grid inner products of f against the raw construction columns.
    pub fn raw_dots(&self, f: &[f64]) -> DVector<f64> {
        let w = self.weight();
        DVector::from_iterator(
            self.n(),
            self.raw.iter().map(|col| {
                w * dot(&col.vals, &f[col.start..col.start + col.vals.len()])
            }),
        )
    }

    /// Inner products of f against each enumerated basis function.
    pub fn analyze(&self, f: &FineGridFunction) -> Result<Vec<f64>> {
        if f.d != 1 || f.q != self.q {
            return Err(Error::DimensionMismatch(format!(
                "analyze wants a 1D depth-{} grid, got d={}, q={}",
                self.q, f.d, f.q
            )));
        }
        Ok(self.mix.tr_mul(&self.raw_dots(&f.values)).data.into())
    }

    /// Renders sum_c coeffs[c] * basis_c as cell averages.
    pub fn synthesize(&self, coeffs: &[f64]) -> Result<FineGridFunction> {
        if coeffs.len() != self.n() {
            return Err(Error::DimensionMismatch(format!(
                "expected {} coefficients, got {}",
                self.n(),
                coeffs.len()
            )));
        }
        let raw_coeffs = &self.mix * DVector::from_column_slice(coeffs);
        let mut dense = vec![0.0; 1 << self.q];
        for (col, &c) in self.raw.iter().zip(raw_coeffs.iter()) {
            col.add_into(&mut dense, c);
        }
        FineGridFunction::new(1, self.q, dense)
    }

    pub fn analyze_complex(&self, f: &[Complex64]) -> Result<Vec<Complex64>> {
        let re: Vec<f64> = f.iter().map(|z| z.re).collect();
        let im: Vec<f64> = f.iter().map(|z| z.im).collect();
        let cre = self.analyze(&FineGridFunction::new(1, self.q, re)?)?;
        let cim = self.analyze(&FineGridFunction::new(1, self.q, im)?)?;
        Ok(cre.into_iter().zip(cim).map(|(a, b)| Complex64::new(a, b)).collect())
    }

    pub fn synthesize_complex(&self, coeffs: &[Complex64]) -> Result<Vec<Complex64>> {
        let re = self.synthesize(&coeffs.iter().map(|z| z.re).collect::<Vec<_>>())?;
        let im = self.synthesize(&coeffs.iter().map(|z| z.im).collect::<Vec<_>>())?;
        Ok(re.values.into_iter().zip(im.values).map(|(a, b)| Complex64::new(a, b)).collect())
    }

    /// Orthogonal projection onto the span, as a grid function.
    pub fn project(&self, f: &FineGridFunction) -> Result<FineGridFunction> {
        self.synthesize(&self.analyze(f)?)
    }

    /// Tensor-product coefficients <f, b_i x b_j> of a 2D grid function,
    /// row-major over (i, j).
    pub fn analyze_2d(&self, f: &FineGridFunction) -> Result<Vec<f64>> {
        if f.d != 2 || f.q != self.q {
            return Err(Error::DimensionMismatch(format!(
                "analyze_2d wants a 2D depth-{} grid, got d={}, q={}",
                self.q, f.d, f.q
            )));
        }
        let side = 1usize << self.q;
        let n = self.n();
        let b = self.dense_matrix_at(self.q);
        let grid = DMatrix::from_fn(side, side, |x, y| f.values[x * side + y]);
        let w = self.weight();
        let c = b.tr_mul(&grid) * &b * (w * w);
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                out[i * n + j] = c[(i, j)];
            }
        }
        Ok(out)
    }

    /// 2D orthogonal projection onto the tensor-product span.
    pub fn project_2d(&self, f: &FineGridFunction) -> Result<FineGridFunction> {
        let coeffs = self.analyze_2d(f)?;
        let side = 1usize << self.q;
        let n = self.n();
        let b = self.dense_matrix_at(self.q);
        let c = DMatrix::from_fn(n, n, |i, j| coeffs[i * n + j]);
        let grid = &b * c * b.transpose();
        let mut vals = vec![0.0; side * side];
        for x in 0..side {
            for y in 0..side {
                vals[x * side + y] = grid[(x, y)];
            }
        }
        FineGridFunction::new(2, self.q, vals)
    }

    /// One orthonormal column rendered dense.
    pub fn column_dense(&self, c: usize) -> Vec<f64> {
        let mut dense = vec![0.0; 1 << self.q];
        for (col, &m) in self.raw.iter().zip(self.mix.column(c).iter()) {
            if m != 0.0 {
                col.add_into(&mut dense, m);
            }
        }
        dense
    }

    /// All columns rendered at a coarser display depth (block averages).
    pub fn dense_matrix_at(&self, q_disp: u32) -> DMatrix<f64> {
        let q_disp = q_disp.min(self.q);
        let cells = 1usize << q_disp;
        let factor = 1usize << (self.q - q_disp);
        let mut m = DMatrix::zeros(cells, self.n());
        for c in 0..self.n() {
            let col = self.column_dense(c);
            for (j, chunk) in col.chunks(factor).enumerate() {
                m[(j, c)] = chunk.iter().sum::<f64>() / factor as f64;
            }
        }
        m
    }

    /// Grid Gram matrix of the orthonormal columns (identity up to float).
    /// Computed from densely rendered columns; the congruence form
    /// mix^T G_raw mix loses eps * cond(G_raw) digits to cancellation.
    pub fn gram(&self) -> DMatrix<f64> {
        let cells = 1usize << self.q;
        let n = self.n();
        let mut dense = DMatrix::<f64>::zeros(cells, n);
        for c in 0..n {
            for (j, v) in self.column_dense(c).into_iter().enumerate() {
                dense[(j, c)] = v;
            }
        }
        dense.tr_mul(&dense) * self.weight()
    }

    /// Raw construction columns and mixing matrix, for transform-based
    /// cross-Gramian assembly.
    pub fn raw_columns(&self) -> &[GridColumn] {
        &self.raw
    }

    pub fn mix(&self) -> &DMatrix<f64> {
        &self.mix
    }
}

fn raw_gram(raw: &[GridColumn], weight: f64) -> DMatrix<f64> {
    let n = raw.len();
    let mut g = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = weight * raw[i].dot(&raw[j]);
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    g
}

fn lowdin_step(gram: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = gram.clone().symmetric_eigen();
    let lambda_max = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
    let lambda_min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(lambda_min > 1e-13 * lambda_max) {
        return Err(Error::SingularConstruction(lambda_min / lambda_max));
    }
    let mut d = eig.eigenvalues.clone();
    for v in d.iter_mut() {
        *v = 1.0 / v.sqrt();
    }
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&d) * eig.eigenvectors.transpose())
}

fn max_off_identity(gram: &DMatrix<f64>) -> f64 {
    let n = gram.nrows();
    (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| (gram[(i, j)] - if i == j { 1.0 } else { 0.0 }).abs())
        .fold(0.0f64, f64::max)
}

/// Span-preserving orthonormalization: symmetric (Loewdin) passes on the Gram
/// matrix, then one corrective pass against a Gram recomputed from columns
/// re-rendered on the grid. Gram-only congruence updates bottom out at
/// eps * cond(G); re-rendering removes that floor, which matters for the
/// db8 edge combinations whose raw Gram is conditioned like 1e10.
fn orthonormalize(raw: &[GridColumn], weight: f64, cells: usize) -> Result<DMatrix<f64>> {
    let n = raw.len();
    let mut gram = raw_gram(raw, weight);
    let mut mix = DMatrix::<f64>::identity(n, n);
    for _ in 0..3 {
        let step = lowdin_step(&gram)?;
        mix *= &step;
        gram = step.transpose() * gram * &step;
        if max_off_identity(&gram) < 1e-13 {
            return Ok(mix);
        }
    }

    let mut dense = DMatrix::<f64>::zeros(cells, n);
    for c in 0..n {
        let mut col = dense.column_mut(c);
        for (r, &m) in raw.iter().zip(mix.column(c).iter()) {
            for (k, &v) in r.vals.iter().enumerate() {
                col[r.start + k] += m * v;
            }
        }
    }
    let gram_true = dense.tr_mul(&dense) * weight;
    let step = lowdin_step(&gram_true)?;
    mix *= &step;
    let check = step.transpose() * gram_true * &step;
    let off = max_off_identity(&check);
    if off < 1e-9 {
        Ok(mix)
    } else {
        Err(Error::SingularConstruction(off))
    }
}

/// Renders a Haar id (scaling or wavelet, 1D or 2D tensor kind) as exact cell
/// averages at depth q. Used by the wavelet-ordered representation.
pub fn render_haar_id(id: &BasisFunctionId, d: u32, q: u32) -> Result<FineGridFunction> {
    fn axis_values(level: u32, j: u64, wavelet: bool, q: u32) -> Result<Vec<f64>> {
        let need = if wavelet { level + 1 } else { level };
        if q < need {
            return Err(Error::DepthTooSmall { have: q, need });
        }
        let cells = 1usize << q;
        let width = 1usize << (q - level);
        let start = j as usize * width;
        let amp = (2f64).powi(level as i32 / 2) * if level % 2 == 1 { std::f64::consts::SQRT_2 } else { 1.0 };
        let mut v = vec![0.0; cells];
        if wavelet {
            for x in v.iter_mut().skip(start).take(width / 2) {
                *x = amp;
            }
            for x in v.iter_mut().skip(start + width / 2).take(width / 2) {
                *x = -amp;
            }
        } else {
            for x in v.iter_mut().skip(start).take(width) {
                *x = amp;
            }
        }
        Ok(v)
    }

    match (d, &id.kind) {
        (1, BasisKind::Scaling) => {
            FineGridFunction::new(1, q, axis_values(id.level, id.j[0], false, q)?)
        }
        (1, BasisKind::Wavelet) => {
            FineGridFunction::new(1, q, axis_values(id.level, id.j[0], true, q)?)
        }
        (2, kind) => {
            let (w1, w2) = match kind {
                BasisKind::Scaling => (false, false),
                BasisKind::Mixed(1) => (false, true),
                BasisKind::Mixed(2) => (true, false),
                BasisKind::Mixed(3) => (true, true),
                _ => return Err(Error::Domain("invalid 2D haar id".into())),
            };
            let a = FineGridFunction::new(1, q, axis_values(id.level, id.j[0], w1, q)?)?;
            let b = FineGridFunction::new(1, q, axis_values(id.level, id.j[1], w2, q)?)?;
            crate::grid::tensor_2d(&a, &b)
        }
        _ => Err(Error::UnsupportedPairing(format!("render_haar_id at d={d}"))),
    }
}
