//! Explanation validation: input-zeroing sweeps, frequency-axis scaling and
//! accuracy bookkeeping.

mod accuracy;
mod freqscale;
mod select;
mod sweep;

pub use accuracy::{accuracy, evaluate_accuracy, FoldSummary};
pub use freqscale::scale_frequency_axis;
pub use select::{select_indices, zero_out, RelevanceOrder, SelectionStrategy, StrategyKind};
pub use sweep::{perturbation_sweep, AuditRecord, CurvePoint, PerturbationCurve, SweepConfig};
