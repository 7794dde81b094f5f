//! Chance-constrained unit commitment, end to end.
//!
//! The crate walks the whole reformulation chain of a small stochastic
//! unit commitment problem:
//!
//! * [`instance`]: generator data, initial state and demand model, including
//!   the built-in three-unit, three-period benchmark.
//! * [`sampler`]: seeded multivariate normal demand scenarios.
//! * [`scenario_model`]: objective and constraint checks of the scenario
//!   approximated MILP.
//! * [`reference_solver`]: exhaustive solvers that prove optimality at desk
//!   scale, plus a greedy scenario-dropping surrogate for large scenario sets.
//! * [`encoding`]: binary encoding of dispatch and slacks, bit-width tables
//!   and the fixed variable layout.
//! * [`qubo`]: penalty compilation into a QUBO, energies and statistics.
//! * [`annealer`]: single-flip simulated annealing.
//! * [`tuner`]: adaptive sigmoid update of the penalty weights.

pub mod annealer;
pub mod encoding;
pub mod error;
pub mod instance;
pub mod qubo;
pub mod reference_solver;
pub mod sampler;
pub mod scenario_model;
pub mod tuner;

pub use error::{Error, Result};

/// Validates a reliability level. Levels are accepted in `(0, 1]`; `1.0`
/// means every scenario must be served.
pub fn check_p_level(p_level: f64) -> Result<()> {
    if p_level.is_finite() && p_level > 0.0 && p_level <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "reliability level {p_level} must lie in (0, 1]"
        )))
    }
}
