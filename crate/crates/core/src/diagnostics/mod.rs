//! Empirical checks along simulated orbits: collision-pattern brackets,
//! velocity-gap bounds, expansion identities, collision counts and
//! sufficiency search.

mod bracket;
mod counts;
mod expansion;
mod gaps;
mod sufficiency;

pub use bracket::{all_brackets, build_partition, count_between, find_pattern_bracket, Mark, PairPartition, PatternBracket};
pub use counts::{collision_count_probe, prefix_count_probe, CountReport, WindowMode, WindowRow};
pub use expansion::{
    adjudicate_floor_weight, consecutive_intervals, expansion_report, expansion_residual, sample_residuals, ExpansionResidual,
    ExpansionVariant, FloorWeight, FloorWeightAdjudication, VariantStats,
};
pub use gaps::{gap_trace, heart_probe, GapTrace, HeartReport};
pub use sufficiency::{sufficiency_search, Direction, Sufficiency};
