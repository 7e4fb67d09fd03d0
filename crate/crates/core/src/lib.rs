//! Integrated order batching and cobot routing for multi-depot warehouses
//! with mixed-shelves storage.
//!
//! The crate generates instances, exports the three-index and two-commodity
//! flow MILP models as LP files, solves instances with a variable
//! neighborhood search and checks small instances against an exact oracle.

pub mod bench;
pub mod distances;
pub mod instance;
pub mod milp;
pub mod oracle;
pub mod vns;

pub use distances::{DistanceMatrix, LayoutSpec};
pub use instance::{generate_instance, min_batches_per_depot, GenConfig, Instance, StoragePolicy};
pub use vns::{vns_run, AlsConfig, Solution, VnsConfig};
