//! Correlation clustering with asymmetric classification errors: instance
//! model, metric LP relaxation, pivot rounding, triple-based certification of
//! rounding functions, and instance generators.

pub mod error;
pub mod exact;
pub mod generators;
pub mod io;
pub mod lp;
pub mod model;
pub mod optimal_f;
pub mod rounding;
pub mod triple;

pub use error::{Error, Result};
pub use lp::{check_metric_feasibility, solve_metric_lp, EdgeLengths, LpMode, LpOptions, MetricSolution, SolverStats};
pub use exact::{exact_opt, ExactResult};
pub use generators::{gap_instance, planted_instance, random_instance, suggested_gap_n, two_weight_instance, GapParams, PlantedParams};
pub use optimal_f::{compute_a_opt, feasibility_lp, OptFResult};
pub use rounding::{approximation_factor, expected_step_cost, pivot_round, Mode, RoundingFunction};
pub use triple::{certify_grid, worst_case_margin, CertReport, Signature};
pub use model::{disagreement_cost, normalize, validate_instance, Clustering, Instance, Sign, Topology};

#[cfg(test)]
pub(crate) mod fixtures {
    use crate::model::{Instance, Sign, Topology};

    /// ab, ac positive (weight 1); bc negative (weight 1).
    pub(crate) fn triangle() -> Instance {
        Instance::from_fn(3, Topology::Complete, 1.0, 1.0, |u, v| match (u, v) {
            (1, 2) => (Sign::Negative, 1.0),
            _ => (Sign::Positive, 1.0),
        })
        .unwrap()
    }
}
