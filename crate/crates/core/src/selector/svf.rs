//! Regular and simple set-valued maps `𝕏 ⇉ ℝ`.

use num_rational::BigRational;

use super::block::{boundary_exception, Block, GeneralizedBlock};
use crate::error::{positive, Error, Result};
use crate::evt::dyadic_floor;
use crate::interval::{add_down, add_up};
use crate::func::ScalarFn;

const MAX_SIMPLE_PIECES: usize = 1 << 20;

/// `{y : lower(x) ≤ y ≤ upper(x)}`.
#[derive(Debug, Clone)]
pub struct Chunk {
    pub lower: ScalarFn,
    pub upper: ScalarFn,
}

impl Chunk {
    pub fn new(lower: ScalarFn, upper: ScalarFn) -> Self {
        Self { lower, upper }
    }

    pub fn constant(a: f64, b: f64) -> Self {
        Self::new(ScalarFn::constant(a), ScalarFn::constant(b))
    }
}

#[derive(Debug, Clone)]
pub struct SvfPiece {
    pub block: Block,
    pub chunks: Vec<Chunk>,
}

/// Finitely many chunks with continuous boundaries on each block of a
/// proper partition of `domain`.
#[derive(Debug, Clone)]
pub struct RegularSVF {
    pub domain: Block,
    pub pieces: Vec<SvfPiece>,
}

/// Distance from `y` to a union of closed intervals.
pub fn distance_to_intervals(y: f64, intervals: impl IntoIterator<Item = (f64, f64)>) -> f64 {
    intervals
        .into_iter()
        .map(|(a, b)| if y < a { a - y } else if y > b { y - b } else { 0.0 })
        .fold(f64::INFINITY, f64::min)
}

impl RegularSVF {
    pub fn new(domain: Block, pieces: Vec<SvfPiece>) -> Result<Self> {
        if pieces.is_empty() || pieces.iter().any(|p| p.chunks.is_empty()) {
            return Err(Error::Argument("every piece needs at least one chunk".into()));
        }
        if pieces.iter().any(|p| p.block.dim() != domain.dim() || p.block.intersect(&domain) != p.block) {
            return Err(Error::Argument("pieces must lie inside the domain".into()));
        }
        let gb = GeneralizedBlock::new(pieces.iter().map(|p| p.block.clone()).collect());
        if !gb.is_proper() {
            return Err(Error::Argument("pieces overlap".into()));
        }
        if gb.exact_volume() != domain.volume() {
            return Err(Error::Argument("pieces do not cover the domain".into()));
        }
        Ok(Self { domain, pieces })
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    /// Index of the first piece containing `x`.
    pub fn piece_at(&self, x: &[f64]) -> Option<usize> {
        self.pieces.iter().position(|p| p.block.contains(x))
    }

    /// `F(x)` as closed intervals.
    pub fn eval(&self, x: &[f64]) -> Option<Vec<(f64, f64)>> {
        let p = &self.pieces[self.piece_at(x)?];
        Some(p.chunks.iter().map(|c| (c.lower.eval(x), c.upper.eval(x))).collect())
    }

    /// Located distance from `y` to `F(x)`.
    pub fn distance(&self, x: &[f64], y: f64) -> Option<f64> {
        self.eval(x).map(|iv| distance_to_intervals(y, iv))
    }

    /// Sound global bounds `lo ≤ α, β ≤ hi`, from center values and the
    /// moduli over each piece.
    pub fn value_range(&self) -> Result<(f64, f64)> {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for p in &self.pieces {
            let c = p.block.center();
            let r = p.block.half_diagonal();
            for ch in &p.chunks {
                for f in [&ch.lower, &ch.upper] {
                    let v = f.eval(&c);
                    let var = f.variation_near(&c, r);
                    if !var.is_finite() || !v.is_finite() {
                        return Err(Error::Contract("chunk boundary lacks a finite variation bound".into()));
                    }
                    lo = lo.min(add_down(v, -var));
                    hi = hi.max(add_up(v, var));
                }
            }
        }
        Ok((lo, hi))
    }

    /// `(F − offset)/scale`.
    pub fn affine(&self, offset: f64, scale: f64) -> RegularSVF {
        RegularSVF {
            domain: self.domain.clone(),
            pieces: self
                .pieces
                .iter()
                .map(|p| SvfPiece {
                    block: p.block.clone(),
                    chunks: p.chunks.iter().map(|c| Chunk::new(c.lower.affine(offset, scale), c.upper.affine(offset, scale))).collect(),
                })
                .collect(),
        }
    }
}

/// Constant finite unions of closed dyadic intervals on each block.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplePiece {
    pub block: Block,
    pub values: Vec<(f64, f64)>,
    /// Index of the regular piece this block refines.
    pub source: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimpleSVF {
    pub pieces: Vec<SimplePiece>,
    /// Value grid the intervals were rounded to.
    pub grid: f64,
}

impl SimpleSVF {
    pub fn piece_at(&self, x: &[f64]) -> Option<&SimplePiece> {
        self.pieces.iter().find(|p| p.block.contains(x))
    }

    pub fn distance(&self, x: &[f64], y: f64) -> Option<f64> {
        self.piece_at(x).map(|p| distance_to_intervals(y, p.values.iter().copied()))
    }
}

/// Blocks `ℰ` whose facet slabs give exception sets of any requested
/// volume.
#[derive(Debug, Clone, PartialEq)]
pub struct RepresentableDomain {
    pub base: Vec<Block>,
    pub clip: Block,
}

impl RepresentableDomain {
    /// `𝕁` with `μ(𝕁) ≤ budget` containing every block boundary in its
    /// interior; points of the clip box outside `𝕁` lie inside some base
    /// block.
    pub fn exception(&self, budget: f64) -> Result<GeneralizedBlock> {
        boundary_exception(&self.base, &self.clip, budget)
    }

    pub fn volume(&self) -> BigRational {
        GeneralizedBlock::new(self.base.clone()).exact_volume()
    }
}

fn floor_to(v: f64, g: f64) -> f64 {
    (v / g).floor() * g
}

fn ceil_to(v: f64, g: f64) -> f64 {
    (v / g).ceil() * g
}

/// Freezes each chunk on `block` to `[⌊α(c) − v⌋, ⌈β(c) + v⌉]` on the
/// value grid, or returns `None` when the Hausdorff error bound exceeds
/// `delta`.
fn freeze(piece: &SvfPiece, block: &Block, delta: f64, grid: f64) -> Result<Option<Vec<(f64, f64)>>> {
    let c = block.center();
    let r = block.half_diagonal();
    let mut out = Vec::with_capacity(piece.chunks.len());
    for ch in &piece.chunks {
        let (a, va) = (ch.lower.eval(&c), ch.lower.variation_near(&c, r));
        let (b, vb) = (ch.upper.eval(&c), ch.upper.variation_near(&c, r));
        if !(va.is_finite() && vb.is_finite()) {
            return Err(Error::Contract("chunk boundary modulus gives no finite variation".into()));
        }
        let lo = floor_to(add_down(a, -va), grid);
        let hi = ceil_to(add_up(b, vb), grid);
        // The chunk endpoints stay within these distances of the frozen ones.
        let err = add_up(add_up(a, va), -lo).max(add_up(hi, -add_down(b, -vb)));
        if err > delta {
            return Ok(None);
        }
        out.push((lo, hi));
    }
    Ok(Some(out))
}

/// Simple approximation within Hausdorff distance `delta`.
///
/// Each piece is bisected until every chunk can be frozen to a dyadic
/// interval whose endpoints are within `delta` of the chunk's boundary
/// values at every point of the sub-block.
pub fn simple_approx(f: &RegularSVF, delta: f64) -> Result<(SimpleSVF, RepresentableDomain)> {
    positive("approximation accuracy", delta)?;
    let grid = dyadic_floor(delta / 16.0);
    let mut pieces = Vec::new();
    for (source, piece) in f.pieces.iter().enumerate() {
        let mut todo = vec![piece.block.clone()];
        while let Some(b) = todo.pop() {
            match freeze(piece, &b, delta, grid)? {
                Some(values) => pieces.push(SimplePiece { block: b, values, source }),
                None => {
                    if pieces.len() + todo.len() > MAX_SIMPLE_PIECES {
                        return Err(Error::Budget {
                            what: "simple approximation pieces",
                            required: (pieces.len() + todo.len()) as u128 + 1,
                            budget: MAX_SIMPLE_PIECES as u128,
                        });
                    }
                    let mut kids = b.bisect();
                    kids.reverse();
                    todo.extend(kids);
                }
            }
        }
    }
    let base = pieces.iter().map(|p| p.block.clone()).collect();
    Ok((SimpleSVF { pieces, grid }, RepresentableDomain { base, clip: f.domain.clone() }))
}
