use constructa::forms::FnForm;
use constructa::selector::{extract_selector, extract_selector_with_budget, Block, Chunk, RegularSVF, SvfPiece};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use serde_json::json;

use crate::config::{parse, positive, scalar_fn, CliError};
use crate::record::{Outcome, Verdict};
use crate::RunContext;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SelectorConfig {
    domain: BlockConfig,
    pieces: Vec<PieceConfig>,
    eps: f64,
    exception_budget: Option<f64>,
    #[serde(default = "default_samples")]
    samples: usize,
}

fn default_samples() -> usize {
    1000
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BlockConfig {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl BlockConfig {
    fn block(&self) -> Result<Block, CliError> {
        Ok(Block::new(self.lo.clone(), self.hi.clone())?)
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PieceConfig {
    lo: Vec<f64>,
    hi: Vec<f64>,
    chunks: Vec<ChunkConfig>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ChunkConfig {
    lower: FnForm,
    upper: FnForm,
}

fn build(cfg: &SelectorConfig) -> Result<RegularSVF, CliError> {
    let domain = cfg.domain.block()?;
    let mut pieces = Vec::with_capacity(cfg.pieces.len());
    for p in &cfg.pieces {
        let block = Block::new(p.lo.clone(), p.hi.clone())?;
        let chunks = p
            .chunks
            .iter()
            .map(|c| {
                Ok(Chunk::new(
                    scalar_fn("lower", &c.lower, &block.lo, &block.hi)?,
                    scalar_fn("upper", &c.upper, &block.lo, &block.hi)?,
                ))
            })
            .collect::<Result<Vec<_>, CliError>>()?;
        pieces.push(SvfPiece { block, chunks });
    }
    Ok(RegularSVF::new(domain, pieces)?)
}

pub fn run(text: &str, ctx: &RunContext) -> Result<Outcome, CliError> {
    let cfg: SelectorConfig = parse(text)?;
    positive("eps", cfg.eps)?;
    let f = build(&cfg)?;
    let sel = match cfg.exception_budget {
        Some(b) => extract_selector_with_budget(&f, cfg.eps, b)?,
        None => extract_selector(&f, cfg.eps)?,
    };

    // Seeded spot check of the distance bound off the exception set.
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    let (mut checked, mut worst) = (0usize, 0.0f64);
    for _ in 0..cfg.samples {
        let x: Vec<f64> = f.domain.lo.iter().zip(&f.domain.hi).map(|(a, b)| rng.gen_range(*a..=*b)).collect();
        if let Some(d) = sel.eval(&x).and_then(|y| f.distance(&x, y)) {
            checked += 1;
            worst = worst.max(d);
        }
    }
    let proper = sel.is_proper();
    let ok = proper && worst <= cfg.eps;
    let fields = json!({
        "eps": cfg.eps,
        "pieces": sel.pieces.len(),
        "exception_volume": sel.exception_volume(),
        "proper": proper,
        "samples": cfg.samples,
        "samples_checked": checked,
        "max_distance": worst,
    });
    let audit = if ctx.precision_audit {
        let fine = match cfg.exception_budget {
            Some(b) => extract_selector_with_budget(&f, cfg.eps / 2.0, b)?,
            None => extract_selector(&f, cfg.eps / 2.0)?,
        };
        let mut gap = 0.0f64;
        for _ in 0..cfg.samples {
            let x: Vec<f64> = f.domain.lo.iter().zip(&f.domain.hi).map(|(a, b)| rng.gen_range(*a..=*b)).collect();
            if let Some(d) = fine.eval(&x).and_then(|y| f.distance(&x, y)) {
                gap = gap.max(d);
            }
        }
        Some(json!({ "eps": cfg.eps / 2.0, "pieces": fine.pieces.len(), "max_distance": gap, "consistent": gap <= cfg.eps / 2.0 }))
    } else {
        None
    };
    let verdict = if ok { Verdict::Success } else { Verdict::Failure };
    Ok(Outcome::new(verdict, fields).file("selector_table.txt", sel.to_table()).audit(audit))
}
