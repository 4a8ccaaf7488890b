//! Closed boxes with dyadic vertices and finite unions of them.
//!
//! Every finite `f64` is a dyadic rational, and the only new coordinates
//! ever created are midpoints of existing ones, so all comparisons below
//! are exact rational comparisons. Volumes are summed in `BigRational`.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::real::CertifiedReal;

fn rat(x: f64) -> BigRational {
    BigRational::from_float(x).expect("block coordinates are finite")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Block {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.is_empty() || lo.len() != hi.len() {
            return Err(Error::Argument("block corners must share a positive dimension".into()));
        }
        if lo.iter().chain(&hi).any(|v| !v.is_finite()) {
            return Err(Error::Argument("block corners must be finite".into()));
        }
        Ok(Self { lo, hi })
    }

    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo], vec![hi])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lo.iter().zip(&self.hi).any(|(a, b)| a > b)
    }

    /// Empty or flat in some axis.
    pub fn is_null(&self) -> bool {
        self.lo.iter().zip(&self.hi).any(|(a, b)| a >= b)
    }

    pub fn volume(&self) -> BigRational {
        if self.is_null() {
            return BigRational::zero();
        }
        self.lo.iter().zip(&self.hi).fold(BigRational::from_integer(BigInt::from(1)), |acc, (a, b)| acc * (rat(*b) - rat(*a)))
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().zip(self.lo.iter().zip(&self.hi)).all(|(v, (a, b))| *a <= *v && *v <= *b)
    }

    pub fn contains_interior(&self, x: &[f64]) -> bool {
        x.iter().zip(self.lo.iter().zip(&self.hi)).all(|(v, (a, b))| *a < *v && *v < *b)
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(a, b)| a + (b - a) / 2.0).collect()
    }

    pub fn half_diagonal(&self) -> f64 {
        if self.dim() == 1 {
            return (self.hi[0] - self.lo[0]).max(0.0) / 2.0;
        }
        let s: f64 = self.lo.iter().zip(&self.hi).map(|(a, b)| (b - a) * (b - a)).sum();
        (s.sqrt() / 2.0).next_up()
    }

    pub fn intersect(&self, other: &Block) -> Block {
        Block {
            lo: self.lo.iter().zip(&other.lo).map(|(a, b)| a.max(*b)).collect(),
            hi: self.hi.iter().zip(&other.hi).map(|(a, b)| a.min(*b)).collect(),
        }
    }

    /// Whether the interiors meet.
    pub fn overlaps(&self, other: &Block) -> bool {
        !self.intersect(other).is_null()
    }

    /// `self ∖ other` as interior-disjoint boxes (boundaries may be shared).
    pub fn subtract(&self, other: &Block) -> Vec<Block> {
        if !self.overlaps(other) {
            return vec![self.clone()];
        }
        let mut out = Vec::new();
        let mut rest = self.clone();
        for axis in 0..self.dim() {
            if rest.lo[axis] < other.lo[axis] {
                let mut left = rest.clone();
                left.hi[axis] = other.lo[axis];
                out.push(left);
                rest.lo[axis] = other.lo[axis];
            }
            if rest.hi[axis] > other.hi[axis] {
                let mut right = rest.clone();
                right.lo[axis] = other.hi[axis];
                out.push(right);
                rest.hi[axis] = other.hi[axis];
            }
        }
        out
    }

    /// The `2ⁿ` children obtained by halving every axis.
    pub fn bisect(&self) -> Vec<Block> {
        let n = self.dim();
        let mid = self.center();
        (0..1usize << n)
            .map(|code| {
                let mut b = self.clone();
                for axis in 0..n {
                    if code >> axis & 1 == 1 {
                        b.lo[axis] = mid[axis];
                    } else {
                        b.hi[axis] = mid[axis];
                    }
                }
                b
            })
            .collect()
    }
}

/// A union of blocks. `tail`, when present, bounds the total volume of the
/// blocks of a generator-backed sequence that were not materialized.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GeneralizedBlock {
    pub blocks: Vec<Block>,
    pub tail: Option<f64>,
}

impl GeneralizedBlock {
    pub fn new(blocks: Vec<Block>) -> Self {
        Self { blocks, tail: None }
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.iter().all(Block::is_null) && self.tail.is_none()
    }

    /// Pairwise interior-disjoint, decided exactly.
    pub fn is_proper(&self) -> bool {
        let b = &self.blocks;
        (0..b.len()).all(|i| (i + 1..b.len()).all(|j| !b[i].overlaps(&b[j])))
    }

    /// `Σ μ(𝔹_i)` as an exact rational over the materialized blocks.
    pub fn exact_volume(&self) -> BigRational {
        self.blocks.iter().map(Block::volume).fold(BigRational::zero(), |a, b| a + b)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.blocks.iter().any(|b| b.contains(x))
    }

    pub fn contains_interior(&self, x: &[f64]) -> bool {
        self.blocks.iter().any(|b| b.contains_interior(x))
    }

    /// Boxes in `self` minus everything in `other`.
    pub fn minus(&self, other: &GeneralizedBlock) -> GeneralizedBlock {
        let mut pieces: Vec<Block> = self.blocks.iter().filter(|b| !b.is_null()).cloned().collect();
        for cut in other.blocks.iter().filter(|b| !b.is_null()) {
            pieces = pieces.into_iter().flat_map(|p| p.subtract(cut)).filter(|p| !p.is_null()).collect();
        }
        GeneralizedBlock::new(pieces)
    }

    /// Pairwise intersections with non-empty interior.
    pub fn intersect(&self, other: &GeneralizedBlock) -> GeneralizedBlock {
        let mut out = Vec::new();
        for a in &self.blocks {
            for b in &other.blocks {
                let c = a.intersect(b);
                if !c.is_null() {
                    out.push(c);
                }
            }
        }
        GeneralizedBlock::new(out)
    }
}

/// `μ(𝔹) = Σ μ(𝔹_i)`: exact for finite inputs, widened by the tail bound
/// for truncated proper sequences.
pub fn volume(gb: &GeneralizedBlock) -> Result<CertifiedReal> {
    let exact = gb.exact_volume();
    let v = exact.to_f64().unwrap_or(f64::INFINITY);
    let back = rat(v);
    let rounding = if back == exact { 0.0 } else { (&back - &exact).abs().to_f64().unwrap_or(f64::INFINITY).next_up() };
    match gb.tail {
        None => CertifiedReal::new(v, rounding),
        Some(t) if gb.is_proper() => Ok(CertifiedReal::exact(v + t / 2.0).widen(t / 2.0 + rounding)),
        Some(_) => Err(Error::Contract("volume of a non-proper infinite generalized block".into())),
    }
}

/// Makes a sequence of generalized blocks proper: the `k`-th output is the
/// `k`-th input minus everything before it, in the sequence and within
/// itself. Unions are preserved up to shared boundaries.
pub fn countable_reduction(gbs: &[GeneralizedBlock]) -> Vec<GeneralizedBlock> {
    let mut seen: Vec<Block> = Vec::new();
    let mut out = Vec::with_capacity(gbs.len());
    for gb in gbs {
        let mut mine = Vec::new();
        for b in gb.blocks.iter().filter(|b| !b.is_null()) {
            let mut pieces = vec![b.clone()];
            for cut in &seen {
                if pieces.is_empty() {
                    break;
                }
                pieces = pieces
                    .into_iter()
                    .flat_map(|p| p.subtract(cut))
                    .filter(|p| !p.is_null())
                    .collect();
            }
            seen.extend(pieces.iter().cloned());
            mine.extend(pieces);
        }
        out.push(GeneralizedBlock::new(mine));
    }
    out
}

/// Slabs of half-width `w` around every facet of the given blocks,
/// clipped to `clip`.
pub fn facet_slabs(blocks: &[Block], w: f64, clip: &Block) -> Vec<Block> {
    let mut out = Vec::new();
    for b in blocks.iter().filter(|b| !b.is_null()) {
        let n = b.dim();
        for axis in 0..n {
            for face in [b.lo[axis], b.hi[axis]] {
                let mut s = Block {
                    lo: b.lo.iter().map(|v| v - w).collect(),
                    hi: b.hi.iter().map(|v| v + w).collect(),
                };
                s.lo[axis] = face - w;
                s.hi[axis] = face + w;
                let s = s.intersect(clip);
                if !s.is_null() {
                    out.push(s);
                }
            }
        }
    }
    out
}

/// Facet slabs with the largest power-of-two half-width whose total
/// volume stays within `budget`.
pub fn boundary_exception(blocks: &[Block], clip: &Block, budget: f64) -> Result<GeneralizedBlock> {
    if !(budget > 0.0) {
        return Err(Error::Argument(format!("exception budget must be positive, got {budget}")));
    }
    let limit = rat(budget);
    let widest = blocks
        .iter()
        .flat_map(|b| b.lo.iter().zip(&b.hi).map(|(a, c)| c - a))
        .fold(0.0, f64::max);
    let mut w = if widest > 0.0 { 2f64.powi(widest.log2().floor() as i32 - 2) } else { 1.0 };
    for _ in 0..1100 {
        let slabs = GeneralizedBlock::new(facet_slabs(blocks, w, clip));
        if slabs.exact_volume() <= limit {
            return Ok(slabs);
        }
        w /= 2.0;
    }
    Err(Error::Internal("no slab width meets the exception budget".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iv(a: f64, b: f64) -> Block {
        Block::interval(a, b).unwrap()
    }

    #[test]
    fn volume_examples() {
        let two = GeneralizedBlock::new(vec![iv(0.0, 1.0), iv(2.0, 3.0)]);
        assert_eq!(volume(&two).unwrap(), CertifiedReal::exact(2.0));
        let empty = GeneralizedBlock::new(vec![iv(1.0, 0.0)]);
        assert_eq!(volume(&empty).unwrap(), CertifiedReal::exact(0.0));
        let three = GeneralizedBlock::new(vec![iv(0.0, 0.5), iv(0.5, 0.75), iv(0.75, 0.875)]);
        assert_eq!(three.exact_volume(), BigRational::new(7.into(), 8.into()));
        assert_eq!(volume(&three).unwrap().radius, 0.0);
    }

    #[test]
    fn truncated_non_proper_volume_is_a_contract_error() {
        let gb = GeneralizedBlock { blocks: vec![iv(0.0, 1.0), iv(0.5, 1.5)], tail: Some(0.1) };
        assert!(matches!(volume(&gb), Err(Error::Contract(_))));
        let ok = GeneralizedBlock { blocks: vec![iv(0.0, 1.0)], tail: Some(0.5) };
        let v = volume(&ok).unwrap();
        assert!(v.contains(1.0) && v.contains(1.5));
    }

    #[test]
    fn reduction_examples() {
        let out = countable_reduction(&[GeneralizedBlock::new(vec![iv(0.0, 2.0)]), GeneralizedBlock::new(vec![iv(1.0, 3.0)])]);
        assert_eq!(out[0].blocks, vec![iv(0.0, 2.0)]);
        assert_eq!(out[1].blocks, vec![iv(2.0, 3.0)]);

        let disjoint = [GeneralizedBlock::new(vec![iv(0.0, 1.0)]), GeneralizedBlock::new(vec![iv(1.0, 2.0)])];
        assert_eq!(countable_reduction(&disjoint), disjoint.to_vec());

        let dup = countable_reduction(&[GeneralizedBlock::new(vec![iv(0.0, 1.0), iv(0.0, 1.0)])]);
        assert_eq!(dup[0].blocks.len(), 1);
    }

    #[test]
    fn subtraction_in_the_plane() {
        let a = Block::new(vec![0.0, 0.0], vec![2.0, 2.0]).unwrap();
        let b = Block::new(vec![0.5, 0.5], vec![1.0, 3.0]).unwrap();
        let parts = a.subtract(&b);
        let gb = GeneralizedBlock::new(parts);
        assert!(gb.is_proper());
        assert_eq!(gb.exact_volume(), rat(4.0) - rat(0.5 * 1.5));
    }

    #[test]
    fn boundary_exception_respects_budget() {
        let blocks: Vec<Block> = (0..4).map(|i| iv(i as f64 / 4.0, (i + 1) as f64 / 4.0)).collect();
        let j = boundary_exception(&blocks, &iv(0.0, 1.0), 0.01).unwrap();
        assert!(j.exact_volume() <= rat(0.01));
        assert!(j.contains_interior(&[0.25]));
        assert!(!j.contains(&[0.125]));
    }
}
