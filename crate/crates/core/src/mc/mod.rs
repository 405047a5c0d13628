//! Monte-Carlo junctions made of independent parallel pixels.

mod barrier;
mod ensemble;
mod sweep;

pub use barrier::{
    junction_iv, junction_iv_with, sample_barrier, BarrierField, JunctionIv, ThicknessDistribution,
    MIN_PHYSICAL_PIXEL_NM,
};
pub use ensemble::{
    simulate_ensemble, simulate_junctions, EnsembleConfig, EnsembleMetrics, Geometry, JunctionOutcome, MatchFlags,
    MatchTargets, VoltageGrid,
};
pub use sweep::{steps_inclusive, sweep, SweepCell, SweepSpec, BARRIER_HEIGHT_PRESETS};
