//! Static shape of a tensor train: which digits sit on which core.

use crate::error::{Error, Result};
use crate::quantics::Dimension;

/// Reference to one digit of one dimension of a shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DigitRef {
    pub dim: usize,
    pub pos: usize,
}

/// Digit-to-core layout policy for [`TrainShape::new`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GroupMode {
    /// Dimensions laid out one after another, one digit per core.
    Block,
    /// Core `q` holds digit `q` of every dimension; requires equal digit
    /// counts.
    Interleaved,
    /// Groups given verbatim; must form an order-preserving partition of
    /// all digits.
    Explicit(Vec<Vec<DigitRef>>),
}

/// Shape of a tensor train: dimensions, the partition of their digits
/// into per-core groups, and the bond ranks.
///
/// Ranks are derived data: [`crate::train::TensorTrain`] construction
/// re-validates them against the actual core arrays.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainShape {
    dims: Vec<Dimension>,
    groups: Vec<Vec<DigitRef>>,
    ranks: Vec<usize>,
}

impl TrainShape {
    /// Build a shape with the given layout mode. With `None`, a single
    /// dimension gets the block layout, several dimensions of equal digit
    /// count the interleaved one, and anything else falls back to block.
    pub fn new(dims: Vec<Dimension>, mode: Option<GroupMode>) -> Result<Self> {
        let mode = mode.unwrap_or_else(|| {
            let equal_counts = dims
                .windows(2)
                .all(|w| w[0].ndigits() == w[1].ndigits());
            if dims.len() > 1 && equal_counts {
                GroupMode::Interleaved
            } else {
                GroupMode::Block
            }
        });
        let groups = match mode {
            GroupMode::Block => {
                let mut groups = Vec::new();
                for (d, dim) in dims.iter().enumerate() {
                    for pos in 0..dim.ndigits() {
                        groups.push(vec![DigitRef { dim: d, pos }]);
                    }
                }
                groups
            }
            GroupMode::Interleaved => {
                let n = dims.first().map_or(0, |d| d.ndigits());
                if dims.iter().any(|d| d.ndigits() != n) {
                    return Err(Error::Shape(
                        "interleaved layout requires equal digit counts".into(),
                    ));
                }
                (0..n)
                    .map(|pos| {
                        (0..dims.len())
                            .map(|dim| DigitRef { dim, pos })
                            .collect()
                    })
                    .collect()
            }
            GroupMode::Explicit(groups) => groups,
        };
        let shape = Self::explicit_unordered(dims, groups)?;
        shape.check_digit_order()?;
        Ok(shape)
    }

    /// Like [`TrainShape::new`] with explicit groups, but digits of one
    /// dimension may appear out of order across cores. Needed for the
    /// tensorized DFT, which reverses the column digits.
    pub fn explicit_unordered(dims: Vec<Dimension>, groups: Vec<Vec<DigitRef>>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::Shape("shape needs at least one dimension".into()));
        }
        if groups.is_empty() {
            return Err(Error::Shape("shape needs at least one core".into()));
        }
        let mut seen: Vec<Vec<bool>> = dims.iter().map(|d| vec![false; d.ndigits()]).collect();
        for group in &groups {
            for r in group {
                if r.dim >= dims.len() || r.pos >= dims[r.dim].ndigits() {
                    return Err(Error::Shape(format!(
                        "digit reference ({}, {}) out of range",
                        r.dim, r.pos
                    )));
                }
                if seen[r.dim][r.pos] {
                    return Err(Error::Shape(format!(
                        "digit ({}, {}) appears in more than one group",
                        r.dim, r.pos
                    )));
                }
                seen[r.dim][r.pos] = true;
            }
        }
        for (d, flags) in seen.iter().enumerate() {
            if let Some(pos) = flags.iter().position(|&f| !f) {
                return Err(Error::Shape(format!(
                    "digit ({d}, {pos}) is missing from the groups"
                )));
            }
        }
        let ranks = vec![1; groups.len() + 1];
        Ok(Self {
            dims,
            groups,
            ranks,
        })
    }

    fn check_digit_order(&self) -> Result<()> {
        let mut last: Vec<Option<usize>> = vec![None; self.dims.len()];
        for group in &self.groups {
            for r in group {
                if let Some(prev) = last[r.dim] {
                    if r.pos <= prev {
                        return Err(Error::Shape(format!(
                            "digits of dimension {} are out of order",
                            r.dim
                        )));
                    }
                }
                last[r.dim] = Some(r.pos);
            }
        }
        Ok(())
    }

    pub fn dims(&self) -> &[Dimension] {
        &self.dims
    }

    pub fn ncores(&self) -> usize {
        self.groups.len()
    }

    pub fn groups(&self) -> &[Vec<DigitRef>] {
        &self.groups
    }

    pub fn group(&self, q: usize) -> &[DigitRef] {
        &self.groups[q]
    }

    pub fn ranks(&self) -> &[usize] {
        &self.ranks
    }

    pub fn rank_left(&self, q: usize) -> usize {
        self.ranks[q]
    }

    pub fn rank_right(&self, q: usize) -> usize {
        self.ranks[q + 1]
    }

    pub(crate) fn set_ranks(&mut self, ranks: Vec<usize>) {
        debug_assert_eq!(ranks.len(), self.groups.len() + 1);
        self.ranks = ranks;
    }

    /// Bases of the digits in group `q`, in group order.
    pub fn group_bases(&self, q: usize) -> Vec<usize> {
        self.groups[q]
            .iter()
            .map(|r| self.dims[r.dim].digit(r.pos).base)
            .collect()
    }

    /// Product of the bases of the digits in group `q`.
    pub fn core_extent(&self, q: usize) -> usize {
        self.group_bases(q).iter().product()
    }

    /// Total number of entries of the represented tensor.
    pub fn total_size(&self) -> usize {
        self.dims.iter().map(|d| d.size()).product()
    }

    /// Two shapes can be added element-wise iff dims, groups, and digit
    /// order all match. Ranks are not part of the comparison.
    pub fn addition_compatible(&self, other: &Self) -> bool {
        self.dims == other.dims && self.groups == other.groups
    }

    /// Flatten per-digit values of group `q` into one site index,
    /// row-major in group order.
    pub fn site_index(&self, q: usize, digit_values: &[usize]) -> usize {
        let bases = self.group_bases(q);
        debug_assert_eq!(digit_values.len(), bases.len());
        digit_values
            .iter()
            .zip(&bases)
            .fold(0, |acc, (&v, &b)| acc * b + v)
    }

    /// Inverse of [`TrainShape::site_index`].
    pub fn site_digits(&self, q: usize, mut site: usize) -> Vec<usize> {
        let bases = self.group_bases(q);
        let mut out = vec![0usize; bases.len()];
        for (k, &b) in bases.iter().enumerate().rev() {
            out[k] = site % b;
            site /= b;
        }
        out
    }

    /// Convert one flat index per dimension into one site index per core.
    pub fn dim_idxs_to_sites(&self, idxs: &[usize]) -> Result<Vec<usize>> {
        if idxs.len() != self.dims.len() {
            return Err(Error::Shape(format!(
                "expected {} dimension indices, got {}",
                self.dims.len(),
                idxs.len()
            )));
        }
        let digit_tables: Vec<Vec<usize>> = self
            .dims
            .iter()
            .zip(idxs)
            .map(|(dim, &idx)| dim.to_digits_one(idx))
            .collect::<Result<_>>()?;
        Ok((0..self.ncores())
            .map(|q| {
                let values: Vec<usize> = self.groups[q]
                    .iter()
                    .map(|r| digit_tables[r.dim][r.pos])
                    .collect();
                self.site_index(q, &values)
            })
            .collect())
    }

    /// Convert one site index per core into one flat index per dimension.
    pub fn sites_to_dim_idxs(&self, sites: &[usize]) -> Result<Vec<usize>> {
        if sites.len() != self.ncores() {
            return Err(Error::Shape(format!(
                "expected {} site indices, got {}",
                self.ncores(),
                sites.len()
            )));
        }
        let mut digit_tables: Vec<Vec<usize>> =
            self.dims.iter().map(|d| vec![0usize; d.ndigits()]).collect();
        for (q, &site) in sites.iter().enumerate() {
            let values = self.site_digits(q, site);
            for (r, v) in self.groups[q].iter().zip(values) {
                digit_tables[r.dim][r.pos] = v;
            }
        }
        self.dims
            .iter()
            .zip(&digit_tables)
            .map(|(dim, digits)| dim.to_idx_one(digits))
            .collect()
    }

    /// Shape with the dimensions relabeled by `order` (a permutation of
    /// `0..ndims`); entry `k` of the new dims is old dim `order[k]`.
    pub(crate) fn permute_dims(&self, order: &[usize]) -> Result<Self> {
        if order.len() != self.dims.len() {
            return Err(Error::Shape("permutation length mismatch".into()));
        }
        let mut inverse = vec![usize::MAX; order.len()];
        for (new, &old) in order.iter().enumerate() {
            if old >= order.len() || inverse[old] != usize::MAX {
                return Err(Error::Shape("invalid dimension permutation".into()));
            }
            inverse[old] = new;
        }
        let dims = order.iter().map(|&o| self.dims[o].clone()).collect();
        let groups = self
            .groups
            .iter()
            .map(|g| {
                g.iter()
                    .map(|r| DigitRef {
                        dim: inverse[r.dim],
                        pos: r.pos,
                    })
                    .collect()
            })
            .collect();
        Ok(Self {
            dims,
            groups,
            ranks: self.ranks.clone(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dim(size: usize) -> Dimension {
        Dimension::new(size).unwrap()
    }

    #[test]
    fn block_layout() {
        let shape = TrainShape::new(vec![dim(8), dim(20)], Some(GroupMode::Block)).unwrap();
        assert_eq!(shape.ncores(), 6);
        assert_eq!(shape.group(0), &[DigitRef { dim: 0, pos: 0 }]);
        assert_eq!(shape.group(3), &[DigitRef { dim: 1, pos: 0 }]);
        assert_eq!(shape.core_extent(5), 5);
        assert_eq!(shape.ranks(), &[1; 7]);
    }

    #[test]
    fn interleaved_layout() {
        let shape =
            TrainShape::new(vec![dim(8), dim(20)], Some(GroupMode::Interleaved)).unwrap();
        assert_eq!(shape.ncores(), 3);
        assert_eq!(
            shape.group(2),
            &[DigitRef { dim: 0, pos: 2 }, DigitRef { dim: 1, pos: 2 }]
        );
        assert_eq!(shape.core_extent(2), 2 * 5);
    }

    #[test]
    fn single_dimension_defaults_to_block() {
        let shape = TrainShape::new(vec![dim(20)], None).unwrap();
        assert_eq!(shape.ncores(), 3);
        assert_eq!(shape.core_extent(0), 2);
        assert_eq!(shape.core_extent(2), 5);
    }

    #[test]
    fn equal_digit_counts_default_to_interleaved() {
        let shape = TrainShape::new(vec![dim(8), dim(20)], None).unwrap();
        assert_eq!(shape.ncores(), 3);
    }

    #[test]
    fn interleaved_rejects_unequal_counts() {
        assert!(TrainShape::new(vec![dim(8), dim(6)], Some(GroupMode::Interleaved)).is_err());
    }

    #[test]
    fn explicit_partition_validation() {
        let missing = GroupMode::Explicit(vec![vec![DigitRef { dim: 0, pos: 0 }]]);
        assert!(TrainShape::new(vec![dim(4)], Some(missing)).is_err());

        let duplicated = GroupMode::Explicit(vec![
            vec![DigitRef { dim: 0, pos: 0 }],
            vec![DigitRef { dim: 0, pos: 0 }, DigitRef { dim: 0, pos: 1 }],
        ]);
        assert!(TrainShape::new(vec![dim(4)], Some(duplicated)).is_err());

        let disordered = GroupMode::Explicit(vec![
            vec![DigitRef { dim: 0, pos: 1 }],
            vec![DigitRef { dim: 0, pos: 0 }],
        ]);
        assert!(TrainShape::new(vec![dim(4)], Some(disordered)).is_err());
        // The same layout is representable through the unordered entry point.
        assert!(TrainShape::explicit_unordered(
            vec![dim(4)],
            vec![
                vec![DigitRef { dim: 0, pos: 1 }],
                vec![DigitRef { dim: 0, pos: 0 }],
            ],
        )
        .is_ok());
    }

    #[test]
    fn extent_product_is_total_size() {
        let shape = TrainShape::new(vec![dim(8), dim(20)], None).unwrap();
        let product: usize = (0..shape.ncores()).map(|q| shape.core_extent(q)).product();
        assert_eq!(product, shape.total_size());
        assert_eq!(shape.total_size(), 160);
    }

    #[test]
    fn base_one_digit_has_extent_one() {
        let shape = TrainShape::new(vec![dim(1)], None).unwrap();
        assert_eq!(shape.core_extent(0), 1);
    }

    #[test]
    fn addition_compatibility() {
        let a = TrainShape::new(vec![dim(8), dim(8)], Some(GroupMode::Interleaved)).unwrap();
        let b = TrainShape::new(vec![dim(8), dim(8)], Some(GroupMode::Interleaved)).unwrap();
        let c = TrainShape::new(vec![dim(8), dim(8)], Some(GroupMode::Block)).unwrap();
        assert!(a.addition_compatible(&b));
        assert!(!a.addition_compatible(&c));
    }

    #[test]
    fn permute_dims_relabels_groups() {
        let shape = TrainShape::new(vec![dim(4), dim(9)], Some(GroupMode::Block)).unwrap();
        let swapped = shape.permute_dims(&[1, 0]).unwrap();
        assert_eq!(swapped.dims()[0], dim(9));
        assert_eq!(swapped.group(0), &[DigitRef { dim: 1, pos: 0 }]);
        assert_eq!(swapped.group(2), &[DigitRef { dim: 0, pos: 0 }]);
    }
}
