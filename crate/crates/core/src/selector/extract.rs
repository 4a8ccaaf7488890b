//! Piecewise-constant selectors of regular set-valued maps.

use std::fmt::Write as _;

use num_traits::Zero;
use rayon::prelude::*;

use super::block::{countable_reduction, Block, GeneralizedBlock};
use super::svf::{distance_to_intervals, simple_approx, RegularSVF, RepresentableDomain, SimpleSVF};
use crate::error::{positive, Error, Result};

/// Share of the domain volume given to exception sets when no budget is
/// passed.
pub const DEFAULT_EXCEPTION_FRACTION: f64 = 1.0 / 64.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SelectorPiece {
    pub block: Block,
    /// Value in the normalized codomain `[0, 1]`.
    pub level: f64,
    pub value: f64,
}

/// A piecewise-constant `f` with `dist(f(x), F(x)) ≤ epsilon` for every
/// `x` of the domain outside `exception`.
#[derive(Debug, Clone)]
pub struct Selector {
    pub pieces: Vec<SelectorPiece>,
    pub epsilon: f64,
    pub domain: RepresentableDomain,
    pub exception: GeneralizedBlock,
    /// Exception volumes, one per stage that contributed.
    pub exception_volumes: Vec<f64>,
    /// `f_k` levels per piece, `k = 1, 2, …`.
    pub stages: Vec<Vec<f64>>,
    pub offset: f64,
    pub scale: f64,
}

impl Selector {
    /// `f(x)`, or `None` on the exception set and outside the domain.
    pub fn eval(&self, x: &[f64]) -> Option<f64> {
        if self.exception.contains(x) {
            return None;
        }
        self.value_at(x)
    }

    /// Value of the first piece containing `x`, ignoring the exception.
    pub fn value_at(&self, x: &[f64]) -> Option<f64> {
        self.pieces.iter().find(|p| p.block.contains(x)).map(|p| p.value)
    }

    /// `f_k(x)` for an intermediate stage.
    pub fn stage_value(&self, k: usize, x: &[f64]) -> Option<f64> {
        let levels = self.stages.get(k.checked_sub(1)?)?;
        let i = self.pieces.iter().position(|p| p.block.contains(x))?;
        Some(self.offset + self.scale * levels[i])
    }

    /// `(Q_i, r_i)`, grouping pieces by value in increasing order.
    pub fn groups(&self) -> Vec<(GeneralizedBlock, f64)> {
        let mut order: Vec<usize> = (0..self.pieces.len()).collect();
        order.sort_by(|&a, &b| self.pieces[a].level.total_cmp(&self.pieces[b].level));
        let mut out: Vec<(GeneralizedBlock, f64)> = Vec::new();
        for i in order {
            let p = &self.pieces[i];
            match out.last_mut() {
                Some((gb, v)) if *v == p.value => gb.blocks.push(p.block.clone()),
                _ => out.push((GeneralizedBlock::new(vec![p.block.clone()]), p.value)),
            }
        }
        out
    }

    pub fn is_proper(&self) -> bool {
        GeneralizedBlock::new(self.pieces.iter().map(|p| p.block.clone()).collect()).is_proper()
    }

    pub fn exception_volume(&self) -> f64 {
        self.exception_volumes.iter().sum()
    }

    /// One line per piece: `lo.. | hi.. | value`.
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "selector pieces={} epsilon={:?}", self.pieces.len(), self.epsilon);
        for p in &self.pieces {
            let join = |v: &[f64]| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(" ");
            let _ = writeln!(s, "{} | {} | {:?}", join(&p.block.lo), join(&p.block.hi), p.value);
        }
        s
    }
}

fn normalization(f: &RegularSVF) -> Result<(f64, f64)> {
    let (lo, hi) = f.value_range()?;
    let scale = hi - lo;
    Ok(if scale > 0.0 { (lo, scale) } else { (lo, 1.0) })
}

/// Smallest `N ≥ 1` with `2^-N ≤ tol`.
fn final_stage(tol: f64) -> u32 {
    let mut n = 1;
    while 2f64.powi(-(n as i32)) > tol {
        n += 1;
    }
    n
}

/// First mesh level `r = i·2^-(k+1)` with `dist(r, V) < 2^-k` and, past
/// the second stage, `|r − prev| < 2^-(k-1)`.
fn stage_level(values: &[(f64, f64)], prev: f64, k: u32) -> Option<f64> {
    let step = 2f64.powi(-(k as i32 + 1));
    let near = 2f64.powi(-(k as i32));
    let keep = 2.0 * near;
    (0..=(1u32 << (k + 1))).map(|i| i as f64 * step).find(|&r| {
        distance_to_intervals(r, values.iter().copied()) < near && (k == 2 || (r - prev).abs() < keep)
    })
}

fn default_budget(f: &RegularSVF) -> f64 {
    f.domain.volume().to_f64_lossy() * DEFAULT_EXCEPTION_FRACTION
}

trait LossyF64 {
    fn to_f64_lossy(&self) -> f64;
}

impl LossyF64 for num_rational::BigRational {
    fn to_f64_lossy(&self) -> f64 {
        num_traits::ToPrimitive::to_f64(self).unwrap_or(f64::INFINITY)
    }
}

pub fn extract_selector(f: &RegularSVF, eps: f64) -> Result<Selector> {
    extract_selector_with_budget(f, eps, default_budget(f))
}

/// Runs the stage recursion on `F̂ = simple_approx(F, ε/2)` in the
/// normalized codomain. Exception volume: `η/2` for the approximation
/// domain and `η/2^k` at stage `k`.
pub fn extract_selector_with_budget(f: &RegularSVF, eps: f64, budget: f64) -> Result<Selector> {
    positive("selector accuracy", eps)?;
    positive("exception budget", budget)?;
    let (offset, scale) = normalization(f)?;
    let unit = f.affine(offset, scale);
    let tol = eps / scale;
    let (simple, domain) = simple_approx(&unit, tol / 2.0)?;
    let mut exception = domain.exception(budget / 2.0)?;
    let mut exception_volumes = vec![exception.exact_volume().to_f64_lossy()];

    let n = final_stage(tol / 2.0);
    let mut levels = vec![0.0; simple.pieces.len()];
    let mut stages = vec![levels.clone()];
    for k in 2..=n {
        levels = run_stage(&simple, &levels, k)?;
        let slabs = domain.exception(budget / 2f64.powi(k as i32))?;
        exception_volumes.push(slabs.exact_volume().to_f64_lossy());
        exception.blocks.extend(slabs.blocks);
        stages.push(levels.clone());
    }

    let pieces = simple
        .pieces
        .iter()
        .zip(&levels)
        .map(|(p, &level)| SelectorPiece { block: p.block.clone(), level, value: offset + scale * level })
        .collect();
    Ok(Selector { pieces, epsilon: eps, domain, exception, exception_volumes, stages, offset, scale })
}

fn run_stage(simple: &SimpleSVF, prev: &[f64], k: u32) -> Result<Vec<f64>> {
    simple
        .pieces
        .par_iter()
        .zip(prev)
        .map(|(p, &r)| {
            stage_level(&p.values, r, k).ok_or_else(|| {
                Error::Internal(format!("stage {k} left block {:?}..{:?} without a value", p.block.lo, p.block.hi))
            })
        })
        .collect()
}

fn sample_points(b: &Block, count: usize) -> Vec<Vec<f64>> {
    let mut out = vec![b.center()];
    let mut state = 0x9e37_79b9_7f4a_7c15u64;
    for _ in 1..count {
        out.push(
            b.lo.iter()
                .zip(&b.hi)
                .map(|(lo, hi)| {
                    state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                    lo + (hi - lo) * ((state >> 11) as f64 / (1u64 << 53) as f64)
                })
                .collect(),
        );
    }
    out
}

/// Selectors `f_1, …, f_stages` of a map with representable inverse.
///
/// `inverse(r, ρ)` must return the closed set `{x : dist(r, F(x)) ≤ ρ}` as
/// a generalized block, in the original codomain units. Sampled points of
/// each returned set are checked against `F`; parts of the domain lost at
/// stage `k` are charged to an exception budget of `budget/2^k`.
pub fn refine_selector(
    f: &RegularSVF,
    inverse: &(dyn Fn(f64, f64) -> GeneralizedBlock + Sync),
    stages: u32,
    budget: f64,
) -> Result<Vec<Selector>> {
    positive("exception budget", budget)?;
    if stages == 0 {
        return Err(Error::Argument("at least one stage is required".into()));
    }
    let (offset, scale) = normalization(f)?;
    let whole = GeneralizedBlock::new(vec![f.domain.clone()]);
    let mut current: Vec<(Block, f64)> = vec![(f.domain.clone(), 0.0)];
    let mut exception = GeneralizedBlock::default();
    let mut exception_volumes = Vec::new();
    let mut out = Vec::new();
    let emit = |current: &[(Block, f64)], k: u32, exception: &GeneralizedBlock, volumes: &[f64]| Selector {
        pieces: current
            .iter()
            .map(|(b, r)| SelectorPiece { block: b.clone(), level: *r, value: offset + scale * r })
            .collect(),
        epsilon: scale * 2f64.powi(-(k as i32)),
        domain: RepresentableDomain { base: current.iter().map(|(b, _)| b.clone()).collect(), clip: f.domain.clone() },
        exception: exception.clone(),
        exception_volumes: volumes.to_vec(),
        stages: Vec::new(),
        offset,
        scale,
    };
    out.push(emit(&current, 1, &exception, &exception_volumes));

    for k in 2..=stages {
        let step = 2f64.powi(-(k as i32 + 1));
        let near = 2f64.powi(-(k as i32));
        let mesh: Vec<f64> = (0..=(1u32 << (k + 1))).map(|i| i as f64 * step).collect();
        let sets: Vec<GeneralizedBlock> = mesh
            .par_iter()
            .map(|&r| {
                let c = inverse(offset + scale * r, scale * near).intersect(&whole);
                for b in &c.blocks {
                    for x in sample_points(b, 4) {
                        let d = f.distance(&x, offset + scale * r).unwrap_or(f64::INFINITY);
                        if d > scale * near * (1.0 + 1e-9) + 1e-12 {
                            return Err(Error::Contract(format!(
                                "inverse set for r = {} contains {x:?} at distance {d}",
                                offset + scale * r
                            )));
                        }
                    }
                }
                let d = GeneralizedBlock::new(
                    current
                        .iter()
                        .filter(|(_, prev)| k == 2 || (r - prev).abs() <= 2.0 * near)
                        .map(|(b, _)| b.clone())
                        .collect(),
                );
                Ok(c.intersect(&d))
            })
            .collect::<Result<_>>()?;
        let reduced = countable_reduction(&sets);
        let next: Vec<(Block, f64)> =
            reduced.iter().zip(&mesh).flat_map(|(gb, &r)| gb.blocks.iter().map(move |b| (b.clone(), r))).collect();

        let before = GeneralizedBlock::new(current.iter().map(|(b, _)| b.clone()).collect());
        let after = GeneralizedBlock::new(next.iter().map(|(b, _)| b.clone()).collect());
        let lost = before.minus(&after);
        let lost_volume = lost.exact_volume();
        let allowance = budget / 2f64.powi(k as i32);
        if !lost_volume.is_zero() {
            if lost_volume.to_f64_lossy() > allowance {
                return Err(Error::Contract(format!(
                    "inverse sets at stage {k} miss a volume of {} (allowed {allowance})",
                    lost_volume.to_f64_lossy()
                )));
            }
            exception_volumes.push(lost_volume.to_f64_lossy());
            exception.blocks.extend(lost.blocks);
        }
        current = next;
        out.push(emit(&current, k, &exception, &exception_volumes));
    }
    Ok(out)
}
