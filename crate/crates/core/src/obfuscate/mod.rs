//! Z-score guided obfuscation: uneven suppression, fake check-ins,
//! one-for-one replacement and data reduction.
//!
//! Plans carry only chunk labels and probabilities, so a client holding the
//! published z-scores can apply them to its own data.

mod fake;
mod reduction;
mod suppression;

pub use fake::{differential_fake_run, generate_fake, replace, FakeMix, FakePool, Replacement};
pub use reduction::{
    apply_reduction, build_reduction_plan, calibrate_reduction_plan, full_reduction_plan,
    ReductionPlan, ReductionStep, StepKind, DEFAULT_NOISE_THRESHOLD,
};
pub use suppression::{
    build_suppression_plan, suppress, suppression_mask, suppression_prob, PlanEntry,
    SuppressionPlan,
};
