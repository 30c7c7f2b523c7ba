//! Fine-grid carriers: cell-average vectors on the dyadic grid of [0,1]^d and
//! a sparse column type for compactly supported functions.

use crate::error::{Error, Result};
use num_complex::Complex64;

/// Cell averages on the dyadic grid of mesh 2^-q. Length 2^{dq}; for d = 2 the
/// layout is row-major with axis 1 slow (index = i1 * 2^q + i2), which makes a
/// tensor product of 1D vectors a Kronecker product.
#[derive(Clone, Debug)]
pub struct FineGridFunction {
    pub d: u32,
    pub q: u32,
    pub values: Vec<f64>,
}

impl FineGridFunction {
    pub fn new(d: u32, q: u32, values: Vec<f64>) -> Result<Self> {
        let expect = 1usize
            .checked_shl(d * q)
            .ok_or_else(|| Error::Domain(format!("grid 2^{} too large", d * q)))?;
        if values.len() != expect {
            return Err(Error::DimensionMismatch(format!(
                "grid function needs {expect} values at d={d}, q={q}, got {}",
                values.len()
            )));
        }
        Ok(FineGridFunction { d, q, values })
    }

    pub fn zero(d: u32, q: u32) -> Self {
        FineGridFunction { d, q, values: vec![0.0; 1 << (d * q)] }
    }

    /// Cell volume 2^{-dq}, the weight of the grid inner product.
    pub fn cell_weight(&self) -> f64 {
        (0.5f64).powi((self.d * self.q) as i32)
    }

    /// L2([0,1]^d) inner product of two step functions on the same grid.
    pub fn inner(&self, other: &FineGridFunction) -> Result<f64> {
        if self.d != other.d || self.q != other.q {
            return Err(Error::DimensionMismatch(format!(
                "grids (d={},q={}) and (d={},q={}) differ",
                self.d, self.q, other.d, other.q
            )));
        }
        Ok(self.cell_weight() * dot(&self.values, &other.values))
    }

    pub fn norm(&self) -> f64 {
        (self.cell_weight() * dot(&self.values, &self.values)).sqrt()
    }

    /// Exact cell averages of the same step function at a coarser depth.
    pub fn block_average(&self, q_new: u32) -> FineGridFunction {
        if q_new >= self.q {
            return self.clone();
        }
        match self.d {
            1 => {
                let factor = 1usize << (self.q - q_new);
                let cells = 1usize << q_new;
                let mut out = vec![0.0; cells];
                for (j, slot) in out.iter_mut().enumerate() {
                    let base = j * factor;
                    *slot = self.values[base..base + factor].iter().sum::<f64>() / factor as f64;
                }
                FineGridFunction { d: 1, q: q_new, values: out }
            }
            2 => {
                let factor = 1usize << (self.q - q_new);
                let side_old = 1usize << self.q;
                let side = 1usize << q_new;
                let mut out = vec![0.0; side * side];
                for i1 in 0..side {
                    for i2 in 0..side {
                        let mut acc = 0.0;
                        for a in 0..factor {
                            let row = (i1 * factor + a) * side_old + i2 * factor;
                            acc += self.values[row..row + factor].iter().sum::<f64>();
                        }
                        out[i1 * side + i2] = acc / (factor * factor) as f64;
                    }
                }
                FineGridFunction { d: 2, q: q_new, values: out }
            }
            _ => unreachable!("block_average supports d <= 2"),
        }
    }
}

/// Kronecker/tensor product grid. f(x1,x2) = a(x1) * b(x2).
pub fn tensor_2d(a: &FineGridFunction, b: &FineGridFunction) -> Result<FineGridFunction> {
    if a.d != 1 || b.d != 1 || a.q != b.q {
        return Err(Error::DimensionMismatch("tensor_2d wants two 1D grids of equal depth".into()));
    }
    let side = a.values.len();
    let mut values = Vec::with_capacity(side * side);
    for &va in &a.values {
        values.extend(b.values.iter().map(|&vb| va * vb));
    }
    Ok(FineGridFunction { d: 2, q: a.q, values })
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// L2 norm of a complex cell-average vector at dimension d, depth q.
pub fn complex_norm(values: &[Complex64], d: u32, q: u32) -> f64 {
    let w = (0.5f64).powi((d * q) as i32);
    (w * values.iter().map(|z| z.norm_sqr()).sum::<f64>()).sqrt()
}

/// A function supported on a contiguous run of grid cells: cell j holds
/// vals[j - start] for j in [start, start + vals.len()), zero elsewhere.
#[derive(Clone, Debug)]
pub struct GridColumn {
    pub start: usize,
    pub vals: Vec<f64>,
}

impl GridColumn {
    pub fn end(&self) -> usize {
        self.start + self.vals.len()
    }

    pub fn dot(&self, other: &GridColumn) -> f64 {
        let lo = self.start.max(other.start);
        let hi = self.end().min(other.end());
        if lo >= hi {
            return 0.0;
        }
        dot(
            &self.vals[lo - self.start..hi - self.start],
            &other.vals[lo - other.start..hi - other.start],
        )
    }

    pub fn scale(&mut self, s: f64) {
        for v in &mut self.vals {
            *v *= s;
        }
    }

    /// self += s * other, widening the stored run as needed.
    pub fn axpy(&mut self, s: f64, other: &GridColumn) {
        if other.vals.is_empty() {
            return;
        }
        if self.vals.is_empty() {
            self.start = other.start;
            self.vals = other.vals.iter().map(|&v| s * v).collect();
            return;
        }
        let lo = self.start.min(other.start);
        let hi = self.end().max(other.end());
        let mut merged = vec![0.0; hi - lo];
        merged[self.start - lo..self.end() - lo].copy_from_slice(&self.vals);
        for (i, &v) in other.vals.iter().enumerate() {
            merged[other.start - lo + i] += s * v;
        }
        self.start = lo;
        self.vals = merged;
    }

    /// Writes the column into a dense grid vector, scaled by s.
    pub fn add_into(&self, dense: &mut [f64], s: f64) {
        for (i, &v) in self.vals.iter().enumerate() {
            dense[self.start + i] += s * v;
        }
    }

    /// Restricts the run to [0, cells), dropping outside mass.
    pub fn clip(mut self, cells: usize) -> GridColumn {
        if self.start >= cells {
            return GridColumn { start: 0, vals: vec![] };
        }
        if self.end() > cells {
            self.vals.truncate(cells - self.start);
        }
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_length_checked() {
        assert!(FineGridFunction::new(1, 3, vec![0.0; 8]).is_ok());
        assert!(FineGridFunction::new(1, 3, vec![0.0; 7]).is_err());
        assert!(FineGridFunction::new(2, 2, vec![0.0; 16]).is_ok());
    }

    #[test]
    fn inner_product_is_weighted() {
        let f = FineGridFunction::new(1, 2, vec![1.0, 1.0, 1.0, 1.0]).unwrap();
        assert!((f.inner(&f).unwrap() - 1.0).abs() < 1e-15);
        assert!((f.norm() - 1.0).abs() < 1e-15);
        let g = FineGridFunction::new(2, 1, vec![2.0; 4]).unwrap();
        assert!((g.inner(&g).unwrap() - 4.0).abs() < 1e-15);
    }

    #[test]
    fn block_average_1d_and_2d() {
        let f = FineGridFunction::new(1, 2, vec![1.0, 3.0, 5.0, 7.0]).unwrap();
        let c = f.block_average(1);
        assert_eq!(c.values, vec![2.0, 6.0]);
        let a = FineGridFunction::new(1, 1, vec![1.0, 2.0]).unwrap();
        let b = FineGridFunction::new(1, 1, vec![3.0, 4.0]).unwrap();
        let t = tensor_2d(&a, &b).unwrap();
        assert_eq!(t.values, vec![3.0, 4.0, 6.0, 8.0]);
        let coarse = t.block_average(0);
        assert_eq!(coarse.values, vec![21.0 / 4.0]);
    }

    #[test]
    fn sparse_column_algebra() {
        let a = GridColumn { start: 2, vals: vec![1.0, 2.0, 3.0] };
        let b = GridColumn { start: 4, vals: vec![5.0, 7.0] };
        assert_eq!(a.dot(&b), 15.0);
        assert_eq!(b.dot(&a), 15.0);
        let mut c = a.clone();
        c.axpy(2.0, &b);
        assert_eq!(c.start, 2);
        assert_eq!(c.vals, vec![1.0, 2.0, 13.0, 14.0]);
        let clipped = b.clone().clip(5);
        assert_eq!(clipped.vals, vec![5.0]);
        let mut dense = vec![0.0; 8];
        a.add_into(&mut dense, 1.0);
        assert_eq!(dense[2..5], [1.0, 2.0, 3.0]);
    }
}
