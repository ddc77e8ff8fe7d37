//! Monte Carlo estimators and power-law fits.

pub mod cells;
pub mod correlation;
pub mod fit;
pub mod rng;
pub mod transitions;

pub use cells::{sample_mu, tail_and_cells, CellStatistics, TailReport};
pub use correlation::{correlation_curve, CorrelationCurve, Observable, ObservablePair};
pub use fit::{power_law_fit, FitError, FitMethod, FitResult};
pub use rng::Stream;
pub use transitions::{transition_stats, TransitionReport};
