//! Certified maximization over boxes by branch and bound.
//!
//! Cells are cubes; a cell's upper bound is the certified value at its
//! center plus the modulus variation over its half-diagonal. The cell with
//! the largest upper bound is split into `2^p` children until the gap
//! between the best certified lower value and the largest open upper bound
//! falls below the requested precision.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{positive, Error, Result};
use crate::mesh::Hypercube;
use crate::modulus::Modulus;
use crate::real::CertifiedReal;

#[derive(Debug, Clone)]
pub struct MaxCertificate {
    pub value: CertifiedReal,
    /// Center of the cell attaining the best lower value.
    pub argmax: Vec<f64>,
    /// Certified value at `argmax`.
    pub at_argmax: CertifiedReal,
    pub evaluations: usize,
}

struct Cell {
    upper: f64,
    seq: u64,
    center: Vec<f64>,
    side: f64,
}

impl PartialEq for Cell {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Cell {}
impl PartialOrd for Cell {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Cell {
    fn cmp(&self, other: &Self) -> Ordering {
        self.upper.total_cmp(&other.upper).then_with(|| other.seq.cmp(&self.seq))
    }
}

pub fn maximize_on_box(
    f: impl Fn(&[f64]) -> CertifiedReal,
    bx: &Hypercube,
    modulus: &Modulus,
    eps: f64,
    budget: usize,
) -> Result<MaxCertificate> {
    positive("maximization precision", eps)?;
    let p = bx.dim();
    let root = (bx.diameter() / 2.0).max(0.0);
    let mut evaluations = 0usize;
    let mut best = (f64::NEG_INFINITY, Vec::new(), CertifiedReal::exact(0.0));
    let mut heap = BinaryHeap::new();

    let visit = |center: Vec<f64>, side: f64, seq: usize, best: &mut (f64, Vec<f64>, CertifiedReal)| {
        let v = f(&center);
        if v.lo() > best.0 {
            *best = (v.lo(), center.clone(), v);
        }
        let hd = side / 2.0 * (p as f64).sqrt();
        let upper = (v.hi() + modulus.variation(hd, &center, hd.max(root))).next_up();
        Cell { upper, seq: seq as u64, center, side }
    };
    heap.push(visit(bx.center.clone(), bx.side, 0, &mut best));
    evaluations += 1;

    loop {
        let top = heap.peek().expect("heap keeps at least one cell");
        if top.upper - best.0 <= eps || top.side == 0.0 {
            let (lo, hi) = (best.0, top.upper);
            let value = CertifiedReal::new(lo + (hi - lo) / 2.0, ((hi - lo) / 2.0).next_up())?;
            return Ok(MaxCertificate { value, argmax: best.1, at_argmax: best.2, evaluations });
        }
        if evaluations + (1 << p) > budget {
            return Err(Error::Budget { what: "branch-and-bound evaluations", required: evaluations as u128 + (1 << p), budget: budget as u128 });
        }
        let cell = heap.pop().unwrap();
        let child = cell.side / 2.0;
        for code in 0..1usize << p {
            let center: Vec<f64> = cell
                .center
                .iter()
                .enumerate()
                .map(|(axis, c)| if code >> axis & 1 == 1 { c + child / 2.0 } else { c - child / 2.0 })
                .collect();
            heap.push(visit(center, child, evaluations, &mut best));
            evaluations += 1;
        }
    }
}
