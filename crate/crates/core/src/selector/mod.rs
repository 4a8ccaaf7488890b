//! Blocks, set-valued maps and measurable selectors.

mod block;
mod extract;
mod svf;

pub use block::{boundary_exception, countable_reduction, facet_slabs, volume, Block, GeneralizedBlock};
pub use extract::{
    extract_selector, extract_selector_with_budget, refine_selector, Selector, SelectorPiece,
    DEFAULT_EXCEPTION_FRACTION,
};
pub use svf::{
    distance_to_intervals, simple_approx, Chunk, RegularSVF, RepresentableDomain, SimplePiece, SimpleSVF, SvfPiece,
};
