//! Factorized dimensions, digit conversions and uniform grids.
//!
//! An index `i` with `0 <= i < dim` is decomposed into mixed-radix digits
//! `i = sum_q c_q * i_q` where each digit `i_q` has an integer base `b_q`
//! and the place value `c_q` is the product of all later bases. Digit
//! indices are 0-based throughout.

use ndarray::{Array1, Array2, ArrayView2};

use crate::error::{Error, Result};

/// One mixed-radix position: its radix and its place value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Digit {
    pub base: usize,
    pub factor: usize,
}

/// A factorized index range. `size() = prod(bases)`, and the factor of
/// digit `q` is the product of the bases of digits `q+1..n`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Dimension {
    digits: Vec<Digit>,
}

impl Dimension {
    /// Factorize an integer size into prime bases, sorted ascending
    /// (`20 -> 2*2*5`).
    pub fn new(size: usize) -> Result<Self> {
        if size == 0 {
            return Err(Error::InvalidDimension("size must be >= 1".into()));
        }
        if size == 1 {
            return Self::from_bases(&[1]);
        }
        let mut bases = Vec::new();
        let mut rest = size;
        let mut p = 2;
        while p * p <= rest {
            while rest % p == 0 {
                bases.push(p);
                rest /= p;
            }
            p += 1;
        }
        if rest > 1 {
            bases.push(rest);
        }
        Self::from_bases(&bases)
    }

    /// Use the given bases verbatim, in order.
    pub fn from_bases(bases: &[usize]) -> Result<Self> {
        if bases.is_empty() {
            return Err(Error::InvalidDimension("empty base sequence".into()));
        }
        if bases.contains(&0) {
            return Err(Error::InvalidDimension("bases must be >= 1".into()));
        }
        let mut digits = vec![
            Digit {
                base: 0,
                factor: 1
            };
            bases.len()
        ];
        let mut factor = 1usize;
        for (q, &b) in bases.iter().enumerate().rev() {
            digits[q] = Digit { base: b, factor };
            factor = factor.checked_mul(b).ok_or_else(|| {
                Error::InvalidDimension("dimension size overflows usize".into())
            })?;
        }
        Ok(Self { digits })
    }

    /// Same bases in reverse order. Used by the tensorized DFT, whose
    /// column index is factorized with reversed factors.
    pub fn reversed(&self) -> Self {
        let bases: Vec<usize> = self.digits.iter().rev().map(|d| d.base).collect();
        Self::from_bases(&bases).expect("reversing valid bases cannot fail")
    }

    pub fn size(&self) -> usize {
        self.digits.first().map_or(1, |d| d.base * d.factor)
    }

    pub fn ndigits(&self) -> usize {
        self.digits.len()
    }

    pub fn digits(&self) -> &[Digit] {
        &self.digits
    }

    pub fn digit(&self, q: usize) -> Digit {
        self.digits[q]
    }

    pub fn bases(&self) -> Vec<usize> {
        self.digits.iter().map(|d| d.base).collect()
    }

    /// Mixed-radix decomposition of one index.
    pub fn to_digits_one(&self, idx: usize) -> Result<Vec<usize>> {
        let size = self.size();
        if idx >= size {
            return Err(Error::IndexOutOfRange { index: idx, size });
        }
        Ok(self
            .digits
            .iter()
            .map(|d| (idx % (d.base * d.factor)) / d.factor)
            .collect())
    }

    /// Batched mixed-radix decomposition; row `k` holds the digits of
    /// `idxs[k]`.
    pub fn to_digits(&self, idxs: &[usize]) -> Result<Array2<usize>> {
        let mut out = Array2::zeros((idxs.len(), self.ndigits()));
        for (k, &idx) in idxs.iter().enumerate() {
            let digits = self.to_digits_one(idx)?;
            for (q, v) in digits.into_iter().enumerate() {
                out[[k, q]] = v;
            }
        }
        Ok(out)
    }

    /// Recompose one index from digits: `sum_q c_q * digit_q`.
    pub fn to_idx_one(&self, digits: &[usize]) -> Result<usize> {
        if digits.len() != self.ndigits() {
            return Err(Error::Shape(format!(
                "expected {} digits, got {}",
                self.ndigits(),
                digits.len()
            )));
        }
        let mut idx = 0usize;
        for (d, &v) in self.digits.iter().zip(digits) {
            if v >= d.base {
                return Err(Error::DigitOutOfRange {
                    digit: v,
                    base: d.base,
                });
            }
            idx += d.factor * v;
        }
        Ok(idx)
    }

    /// Batched inverse of [`Dimension::to_digits`].
    pub fn to_idxs(&self, digits: ArrayView2<usize>) -> Result<Vec<usize>> {
        digits
            .rows()
            .into_iter()
            .map(|row| self.to_idx_one(row.as_slice().expect("row-major digit rows")))
            .collect()
    }
}

/// A real interval `[lower, upper]` with `upper > lower`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Domain {
    pub lower: f64,
    pub upper: f64,
}

impl Domain {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if !(upper > lower) || !lower.is_finite() || !upper.is_finite() {
            return Err(Error::InvalidDimension(format!(
                "domain requires finite upper > lower, got [{lower}, {upper}]"
            )));
        }
        Ok(Self { lower, upper })
    }
}

/// Uniformly spaced grid points over one domain per factorized dimension.
///
/// Axis `a` maps index `i` to `lower + (upper - lower) * i / (size - 1)`;
/// a size-1 axis maps index 0 to `lower`.
#[derive(Debug, Clone, PartialEq)]
pub struct UniformGrid {
    dims: Vec<Dimension>,
    domains: Vec<Domain>,
}

impl UniformGrid {
    pub fn new(dims: Vec<Dimension>, domains: Vec<Domain>) -> Result<Self> {
        if dims.len() != domains.len() {
            return Err(Error::Shape(format!(
                "{} dimensions vs {} domains",
                dims.len(),
                domains.len()
            )));
        }
        if dims.is_empty() {
            return Err(Error::Shape("grid needs at least one axis".into()));
        }
        Ok(Self { dims, domains })
    }

    pub fn ndims(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[Dimension] {
        &self.dims
    }

    pub fn domains(&self) -> &[Domain] {
        &self.domains
    }

    pub fn dim(&self, axis: usize) -> &Dimension {
        &self.dims[axis]
    }

    fn spacing(&self, axis: usize) -> f64 {
        let size = self.dims[axis].size();
        let dom = self.domains[axis];
        let steps = if size > 1 { (size - 1) as f64 } else { 1.0 };
        (dom.upper - dom.lower) / steps
    }

    pub fn coord_one(&self, axis: usize, idx: usize) -> Result<f64> {
        let size = self.dims[axis].size();
        if idx >= size {
            return Err(Error::IndexOutOfRange { index: idx, size });
        }
        let dom = self.domains[axis];
        if idx + 1 == size && size > 1 {
            // Exact endpoint, immune to rounding in the affine form.
            return Ok(dom.upper);
        }
        Ok(dom.lower + self.spacing(axis) * idx as f64)
    }

    /// Indices to coordinates, one array per axis.
    pub fn to_coords(&self, idxs: &[&[usize]]) -> Result<Vec<Array1<f64>>> {
        self.check_axes(idxs.len())?;
        idxs.iter()
            .enumerate()
            .map(|(a, axis_idxs)| {
                axis_idxs
                    .iter()
                    .map(|&i| self.coord_one(a, i))
                    .collect::<Result<Array1<f64>>>()
            })
            .collect()
    }

    pub fn idx_one(&self, axis: usize, coord: f64) -> Result<usize> {
        let dom = self.domains[axis];
        let size = self.dims[axis].size();
        let h = self.spacing(axis);
        let u = (coord - dom.lower) / h;
        // Tolerate half a grid spacing beyond either end.
        if !u.is_finite() || u < -0.5 || u > (size - 1) as f64 + 0.5 {
            return Err(Error::CoordOutOfDomain {
                coord,
                lower: dom.lower,
                upper: dom.upper,
            });
        }
        // Nearest grid point, ties away from lower.
        let idx = (u + 0.5).floor() as usize;
        Ok(idx.min(size - 1))
    }

    /// Coordinates to nearest-grid-point indices, exact inverse of
    /// [`UniformGrid::to_coords`] on grid points.
    pub fn to_idxs(&self, coords: &[&[f64]]) -> Result<Vec<Vec<usize>>> {
        self.check_axes(coords.len())?;
        coords
            .iter()
            .enumerate()
            .map(|(a, axis_coords)| {
                axis_coords
                    .iter()
                    .map(|&c| self.idx_one(a, c))
                    .collect::<Result<Vec<usize>>>()
            })
            .collect()
    }

    fn check_axes(&self, got: usize) -> Result<()> {
        if got != self.ndims() {
            return Err(Error::Shape(format!(
                "expected {} axes, got {got}",
                self.ndims()
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn prime_factorization_ascending() {
        let dim = Dimension::new(20).unwrap();
        assert_eq!(dim.bases(), vec![2, 2, 5]);
        let factors: Vec<usize> = dim.digits().iter().map(|d| d.factor).collect();
        assert_eq!(factors, vec![10, 5, 1]);
        assert_eq!(dim.size(), 20);
    }

    #[test]
    fn explicit_bases_verbatim() {
        let dim = Dimension::from_bases(&[2, 5, 2]).unwrap();
        assert_eq!(dim.bases(), vec![2, 5, 2]);
        let factors: Vec<usize> = dim.digits().iter().map(|d| d.factor).collect();
        assert_eq!(factors, vec![10, 2, 1]);
    }

    #[test]
    fn degenerate_and_prime_sizes() {
        let one = Dimension::new(1).unwrap();
        assert_eq!(one.bases(), vec![1]);
        assert_eq!(one.digits()[0].factor, 1);
        let seven = Dimension::new(7).unwrap();
        assert_eq!(seven.bases(), vec![7]);
        assert_eq!(seven.digits()[0].factor, 1);
        assert!(Dimension::new(0).is_err());
    }

    #[test]
    fn factor_recurrence() {
        for size in [6usize, 12, 20, 36, 210] {
            let dim = Dimension::new(size).unwrap();
            let d = dim.digits();
            assert_eq!(d.last().unwrap().factor, 1);
            for q in 0..d.len() - 1 {
                assert_eq!(d[q].factor, d[q + 1].factor * d[q + 1].base);
            }
            assert_eq!(dim.size(), size);
        }
    }

    #[test]
    fn digit_roundtrip() {
        let dim = Dimension::from_bases(&[2, 2, 5]).unwrap();
        assert_eq!(dim.to_digits_one(13).unwrap(), vec![1, 0, 3]);
        assert_eq!(dim.to_digits_one(0).unwrap(), vec![0, 0, 0]);
        assert_eq!(dim.to_digits_one(19).unwrap(), vec![1, 1, 4]);
        assert_eq!(dim.to_idx_one(&[1, 0, 3]).unwrap(), 13);
        assert!(dim.to_digits_one(20).is_err());
        assert!(dim.to_idx_one(&[0, 0, 5]).is_err());
    }

    #[test]
    fn roundtrip_all_indices_of_1024() {
        let dim = Dimension::new(1024).unwrap();
        let idxs: Vec<usize> = (0..1024).collect();
        let digits = dim.to_digits(&idxs).unwrap();
        let back = dim.to_idxs(digits.view()).unwrap();
        assert_eq!(back, idxs);
    }

    #[test]
    fn batched_digits_match_scalar() {
        let dim = Dimension::from_bases(&[3, 4]).unwrap();
        let digits = dim.to_digits(&[0, 5, 11]).unwrap();
        assert_eq!(digits, array![[0, 0], [1, 1], [2, 3]]);
    }

    #[test]
    fn grid_linspace_endpoints() {
        let grid = UniformGrid::new(
            vec![Dimension::new(1024).unwrap()],
            vec![Domain::new(-1.0, 1.0).unwrap()],
        )
        .unwrap();
        assert_eq!(grid.coord_one(0, 0).unwrap(), -1.0);
        assert_eq!(grid.coord_one(0, 1023).unwrap(), 1.0);
        // Symmetry about zero up to one spacing.
        let a = grid.coord_one(0, 511).unwrap();
        let b = grid.coord_one(0, 512).unwrap();
        assert!((a + b).abs() <= 1.0 / 1023.0 + 1e-15);
        // Strictly increasing.
        for i in 1..1024 {
            assert!(grid.coord_one(0, i).unwrap() > grid.coord_one(0, i - 1).unwrap());
        }
    }

    #[test]
    fn grid_roundtrip_and_ties() {
        let grid = UniformGrid::new(
            vec![Dimension::new(16).unwrap()],
            vec![Domain::new(0.0, 15.0).unwrap()],
        )
        .unwrap();
        for i in 0..16 {
            let c = grid.coord_one(0, i).unwrap();
            assert_eq!(grid.idx_one(0, c).unwrap(), i);
        }
        // Midpoint between points 3 and 4 rounds away from lower.
        assert_eq!(grid.idx_one(0, 3.5).unwrap(), 4);
        assert_eq!(grid.idx_one(0, 15.0).unwrap(), 15);
        assert!(grid.idx_one(0, -0.51).is_err());
        assert!(grid.idx_one(0, 15.51).is_err());
    }

    #[test]
    fn size_one_grid_maps_to_lower() {
        let grid = UniformGrid::new(
            vec![Dimension::new(1).unwrap()],
            vec![Domain::new(2.0, 3.0).unwrap()],
        )
        .unwrap();
        assert_eq!(grid.coord_one(0, 0).unwrap(), 2.0);
        assert_eq!(grid.idx_one(0, 2.0).unwrap(), 0);
    }
}
