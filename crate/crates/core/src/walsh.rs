//! Sequency-ordered Walsh functions on [0,1)^d and the fast transform.
//!
//! Convention: Wal(n,x) = (-1)^{sum_j g_j x_{j+1}} where g = gray(n) and x_j is
//! the j-th fractional bit of x. This is the unique choice (up to relabeling)
//! for which Wal(n,.) has exactly n sign changes on [0,1); the sequency,
//! scaling and multiplicativity identities are enforced by tests.

use crate::error::{Error, Result};

/// Fractional bits carried by a dyadic point. f64 mantissa width, so every
/// point is exactly representable and snapping is lossless for dyadic input.
pub const DYADIC_BITS: u32 = 53;

const ONE: u64 = 1 << DYADIC_BITS;

/// A point of [0,1) with a finite binary expansion of at most 53 bits.
/// Bit (DYADIC_BITS - j) of `bits` is the j-th fractional bit, so bits()
/// equals x * 2^53 exactly.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub struct DyadicPoint(u64);

impl DyadicPoint {
    pub const ZERO: DyadicPoint = DyadicPoint(0);

    pub fn from_bits(bits: u64) -> Result<Self> {
        if bits >= ONE {
            return Err(Error::Domain(format!("dyadic bits {bits:#x} outside [0,1)")));
        }
        Ok(DyadicPoint(bits))
    }

    /// Snaps an arbitrary real in [0,1) to the 2^-53 grid.
    pub fn from_f64(x: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&x) {
            return Err(Error::Domain(format!("point {x} outside [0,1)")));
        }
        let bits = ((x * ONE as f64).round() as u64).min(ONE - 1);
        Ok(DyadicPoint(bits))
    }

    /// x = j * 2^-q, the left endpoint of grid cell j at depth q.
    pub fn from_grid_index(j: u64, q: u32) -> Result<Self> {
        if q > DYADIC_BITS || j >= 1 << q {
            return Err(Error::Domain(format!("grid index {j} at depth {q} outside [0,1)")));
        }
        Ok(DyadicPoint(j << (DYADIC_BITS - q)))
    }

    /// x = (j + 1/2) * 2^-q, the midpoint of grid cell j at depth q.
    pub fn cell_midpoint(j: u64, q: u32) -> Result<Self> {
        if q >= DYADIC_BITS || j >= 1 << q {
            return Err(Error::Domain(format!("cell {j} at depth {q} outside [0,1)")));
        }
        Ok(DyadicPoint((j << (DYADIC_BITS - q)) | (1 << (DYADIC_BITS - q - 1))))
    }

    pub fn bits(self) -> u64 {
        self.0
    }

    pub fn to_f64(self) -> f64 {
        self.0 as f64 / ONE as f64
    }
}

/// Bitwise XOR of the binary expansions: the group operation under which
/// Walsh functions are characters.
pub fn dyadic_add(x: DyadicPoint, y: DyadicPoint) -> DyadicPoint {
    DyadicPoint(x.0 ^ y.0)
}

pub fn gray(n: u64) -> u64 {
    n ^ (n >> 1)
}

/// Reverses the low `k` bits of `x`.
pub fn bit_reverse(x: u64, k: u32) -> u64 {
    if k == 0 {
        0
    } else {
        x.reverse_bits() >> (64 - k)
    }
}

/// Wal(n, x) in {-1, +1}. Gray bit j pairs with fractional bit j+1, i.e. with
/// bit (DYADIC_BITS - 1 - j) of the point, so reversing the point's bit field
/// aligns the two masks and the exponent is a single popcount.
pub fn wal_eval(n: u64, x: DyadicPoint) -> Result<i32> {
    if n >= ONE {
        return Err(Error::Domain(format!("sequency {n} exceeds the dyadic bit budget")));
    }
    let rev = x.0.reverse_bits() >> (64 - DYADIC_BITS);
    Ok(if (gray(n) & rev).count_ones() & 1 == 0 { 1 } else { -1 })
}

/// Tensor-product Walsh value over d coordinates.
pub fn wal_eval_d(n: &[u64], x: &[DyadicPoint]) -> Result<i32> {
    if n.len() != x.len() {
        return Err(Error::DimensionMismatch(format!(
            "sequency has {} components, point has {}",
            n.len(),
            x.len()
        )));
    }
    let mut sign = 1;
    for (&nk, &xk) in n.iter().zip(x) {
        sign *= wal_eval(nk, xk)?;
    }
    Ok(sign)
}

/// In-place orthonormal sequency-ordered Walsh-Hadamard transform.
/// Symmetric and orthogonal, hence an involution. Layout: entry j of the
/// input is the value on dyadic cell j at depth k (v.len() = 2^k).
pub fn fwht_sequency(v: &mut [f64]) -> Result<()> {
    let len = v.len();
    if len == 0 || !len.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(len));
    }
    let k = len.trailing_zeros();
    // Natural-ordered butterfly.
    let mut half = 1;
    while half < len {
        let mut base = 0;
        while base < len {
            for i in base..base + half {
                let (a, b) = (v[i], v[i + half]);
                v[i] = a + b;
                v[i + half] = a - b;
            }
            base += 2 * half;
        }
        half *= 2;
    }
    // Natural -> sequency: coefficient n sits at the bit-reversed Gray code.
    let scale = 1.0 / (len as f64).sqrt();
    let mut out = vec![0.0; len];
    for (n, slot) in out.iter_mut().enumerate() {
        *slot = v[bit_reverse(gray(n as u64), k) as usize] * scale;
    }
    v.copy_from_slice(&out);
    Ok(())
}

/// Separable 2D transform of a 2^q x 2^q grid stored row-major
/// (index = i1 * 2^q + i2, axis 1 slow). After the call, entry (n1, n2)
/// holds the coefficient of Wal(n1, x1) * Wal(n2, x2).
pub fn fwht_sequency_2d(v: &mut [f64], q: u32) -> Result<()> {
    let side = 1usize << q;
    if v.len() != side * side {
        return Err(Error::DimensionMismatch(format!(
            "expected {} values for a 2^{q} square grid, got {}",
            side * side,
            v.len()
        )));
    }
    for row in v.chunks_mut(side) {
        fwht_sequency(row)?;
    }
    let mut col = vec![0.0; side];
    for c in 0..side {
        for r in 0..side {
            col[r] = v[r * side + c];
        }
        fwht_sequency(&mut col)?;
        for r in 0..side {
            v[r * side + c] = col[r];
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent oracle: walks the dyadic expansions bit by bit instead of
    /// using the popcount trick.
    fn wal_naive(n: u64, x: f64) -> i32 {
        let g = gray(n);
        let mut frac = x;
        let mut exponent = 0u32;
        for j in 0..DYADIC_BITS {
            frac *= 2.0;
            let bit = if frac >= 1.0 {
                frac -= 1.0;
                1u64
            } else {
                0
            };
            if bit == 1 && (g >> j) & 1 == 1 {
                exponent += 1;
            }
        }
        if exponent % 2 == 0 {
            1
        } else {
            -1
        }
    }

    // The naive oracle above indexes fractional bits in reading order while
    // gray bits count from the LSB; this variant is the literal transcription
    // of the convention in the module docs and must agree with wal_eval too.
    fn wal_naive_bits(n: u64, x: DyadicPoint) -> i32 {
        let g = gray(n);
        let mut exponent = 0u32;
        for j in 0..DYADIC_BITS {
            let xbit = (x.bits() >> (DYADIC_BITS - 1 - j)) & 1;
            let gbit = (g >> j) & 1;
            exponent += (xbit & gbit) as u32;
        }
        if exponent % 2 == 0 {
            1
        } else {
            -1
        }
    }

    fn sign_changes(n: u64, probe_depth: u32) -> u32 {
        let cells = 1u64 << probe_depth;
        let mut changes = 0;
        let mut prev = wal_eval(n, DyadicPoint::cell_midpoint(0, probe_depth).unwrap()).unwrap();
        for j in 1..cells {
            let cur = wal_eval(n, DyadicPoint::cell_midpoint(j, probe_depth).unwrap()).unwrap();
            if cur != prev {
                changes += 1;
            }
            prev = cur;
        }
        changes
    }

    #[test]
    fn wal_zero_is_constant_one() {
        assert_eq!(wal_eval(0, DyadicPoint::from_f64(0.3).unwrap()).unwrap(), 1);
        assert_eq!(wal_eval(0, DyadicPoint::ZERO).unwrap(), 1);
    }

    #[test]
    fn wal_matches_naive_oracles() {
        for n in 0..64 {
            for j in 0..256 {
                let x = DyadicPoint::cell_midpoint(j, 8).unwrap();
                let fast = wal_eval(n, x).unwrap();
                assert_eq!(fast, wal_naive(n, x.to_f64()), "n={n} j={j}");
                assert_eq!(fast, wal_naive_bits(n, x), "n={n} j={j}");
            }
        }
        let x = DyadicPoint::from_f64(0.7).unwrap();
        assert_eq!(wal_eval(3, x).unwrap(), wal_naive_bits(3, x));
    }

    #[test]
    fn sequency_counts_sign_changes() {
        for n in 0..=64 {
            assert_eq!(sign_changes(n, 8), n as u32, "n={n}");
        }
        for n in [100, 255, 256, 511, 777, 1024] {
            assert_eq!(sign_changes(n, 12), n as u32, "n={n}");
        }
    }

    #[test]
    fn scaling_identity() {
        // wal(2^j n, x) = wal(n, frac(2^j x)) for dyadic x with 2^j x < 1.
        for n in 0..32u64 {
            for j in 0..3u32 {
                for cell in 0..(256 >> j) {
                    let x = DyadicPoint::cell_midpoint(cell, 8).unwrap();
                    let shifted = DyadicPoint::from_bits((x.bits() << j) & (ONE - 1)).unwrap();
                    assert_eq!(
                        wal_eval(n << j, x).unwrap(),
                        wal_eval(n, shifted).unwrap(),
                        "n={n} j={j} cell={cell}"
                    );
                }
            }
        }
    }

    #[test]
    fn multiplicativity_identity() {
        for n in [0u64, 1, 2, 3, 5, 12, 31] {
            for a in 0..32 {
                for b in 0..32 {
                    let x = DyadicPoint::cell_midpoint(a, 5).unwrap();
                    let y = DyadicPoint::cell_midpoint(b, 5).unwrap();
                    // Midpoint bits collide at depth 5, so the sum lands back
                    // on the depth-5 left-endpoint lattice. Any finite-bit
                    // pair is legal for the identity.
                    let sum = dyadic_add(x, y);
                    assert_eq!(
                        wal_eval(n, x).unwrap() * wal_eval(n, y).unwrap(),
                        wal_eval(n, sum).unwrap(),
                        "n={n} a={a} b={b}"
                    );
                }
            }
        }
    }

    #[test]
    fn dyadic_add_examples() {
        let x = DyadicPoint::from_f64(0.5).unwrap();
        let y = DyadicPoint::from_f64(0.25).unwrap();
        assert_eq!(dyadic_add(x, y).to_f64(), 0.75);
        let z = DyadicPoint::from_f64(0.75).unwrap();
        assert_eq!(dyadic_add(z, x).to_f64(), 0.25);
        assert_eq!(dyadic_add(z, z).to_f64(), 0.0);
    }

    #[test]
    fn rejects_out_of_domain() {
        assert!(DyadicPoint::from_f64(1.0).is_err());
        assert!(DyadicPoint::from_f64(-0.1).is_err());
        assert!(fwht_sequency(&mut [0.0; 3]).is_err());
        assert!(fwht_sequency(&mut []).is_err());
    }

    #[test]
    fn fwht_unit_vector_is_constant() {
        let mut v = vec![0.0; 8];
        v[0] = 1.0;
        fwht_sequency(&mut v).unwrap();
        for &c in &v {
            assert!((c - 1.0 / 8f64.sqrt()).abs() < 1e-15);
        }
    }

    #[test]
    fn fwht_is_involution() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for k in [0u32, 1, 3, 6, 10] {
            let v: Vec<f64> = (0..1usize << k).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut w = v.clone();
            fwht_sequency(&mut w).unwrap();
            fwht_sequency(&mut w).unwrap();
            for (a, b) in v.iter().zip(&w) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn fwht_matches_dense_walsh_matrix() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for k in [1u32, 3, 5] {
            let len = 1usize << k;
            let v: Vec<f64> = (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut fast = v.clone();
            fwht_sequency(&mut fast).unwrap();
            let scale = 1.0 / (len as f64).sqrt();
            for n in 0..len {
                let mut acc = 0.0;
                for (j, &vj) in v.iter().enumerate() {
                    let x = DyadicPoint::cell_midpoint(j as u64, k).unwrap();
                    acc += wal_eval(n as u64, x).unwrap() as f64 * vj;
                }
                assert!((fast[n] - acc * scale).abs() < 1e-12, "k={k} n={n}");
            }
        }
    }

    #[test]
    fn fwht_2d_matches_tensor_evaluation() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(13);
        let q = 3u32;
        let side = 1usize << q;
        let v: Vec<f64> = (0..side * side).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut fast = v.clone();
        fwht_sequency_2d(&mut fast, q).unwrap();
        for n1 in 0..side {
            for n2 in 0..side {
                let mut acc = 0.0;
                for i1 in 0..side {
                    for i2 in 0..side {
                        let x1 = DyadicPoint::cell_midpoint(i1 as u64, q).unwrap();
                        let x2 = DyadicPoint::cell_midpoint(i2 as u64, q).unwrap();
                        acc += wal_eval_d(&[n1 as u64, n2 as u64], &[x1, x2]).unwrap() as f64
                            * v[i1 * side + i2];
                    }
                }
                let got = fast[n1 * side + n2];
                assert!((got - acc / side as f64).abs() < 1e-12, "n=({n1},{n2})");
            }
        }
    }

    #[test]
    fn wal_d_axiswise_sign_changes() {
        // Grid-scan oracle along each axis of a 2D tensor evaluation.
        let (n1, n2) = (3u64, 5u64);
        let depth = 8;
        let fixed = DyadicPoint::cell_midpoint(17, depth).unwrap();
        let mut changes = (0, 0);
        let mut prev1 = wal_eval_d(&[n1, n2], &[DyadicPoint::cell_midpoint(0, depth).unwrap(), fixed]).unwrap();
        let mut prev2 = wal_eval_d(&[n1, n2], &[fixed, DyadicPoint::cell_midpoint(0, depth).unwrap()]).unwrap();
        for j in 1..1u64 << depth {
            let p = DyadicPoint::cell_midpoint(j, depth).unwrap();
            let cur1 = wal_eval_d(&[n1, n2], &[p, fixed]).unwrap();
            let cur2 = wal_eval_d(&[n1, n2], &[fixed, p]).unwrap();
            if cur1 != prev1 {
                changes.0 += 1;
            }
            if cur2 != prev2 {
                changes.1 += 1;
            }
            prev1 = cur1;
            prev2 = cur2;
        }
        assert_eq!(changes, (n1 as u32, n2 as u32));
        assert!(wal_eval_d(&[1, 2], &[fixed]).is_err());
    }
}
