//! Equipartitioning of embedding spaces.
//!
//! Embeddings are optionally whitened, then each is assigned to the nearest
//! of `k` fixed, data-independent grid directions by cosine similarity. The
//! induced spherical Voronoi cells are comparable across embedding methods
//! and years.

mod assign;
mod grid;
mod whiten;

pub use assign::{assign, assign_rows, balance_metrics, retention, BalanceMetrics, Partition, UNASSIGNED};
pub use grid::{fibonacci_grid, generalized_golden_ratio, inverse_normal_cdf, FibonacciGrid, GridConstruction};
pub use whiten::{fit_whitening, fit_whitening_rows, WhiteningTransform};
