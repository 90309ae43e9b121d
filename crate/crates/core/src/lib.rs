//! Local barycenters of finite ensembles in symmetric products `SP^k X` of
//! metric spaces, barycenter-indexed labeling of unordered k-tuples, and two
//! ensemble pipelines built on top: clustering consistency on partitioned
//! point clouds, and redistricting plan ensembles.
//!
//! The ground space is abstracted by [`GroundSpace`]; the concrete spaces are
//! the Euclidean space, the circle, the space of uniform atomic measures, and
//! the nested symmetric product `SP^M R^n`.

pub mod assignment;
pub mod barycenter;
pub mod clustering;
pub mod error;
pub mod labeling;
pub mod metric;
pub mod redistrict;
pub mod stats;
pub mod symprod;

pub use assignment::{CostMatrix, EnumerationLimits, Matching, MatchingSet};
pub use barycenter::{BarycenterParams, BarycenterResult, IterationDiagnostics, Mode};
pub use error::{Error, Result};
pub use labeling::LabeledEnsemble;
pub use metric::{Angle, Circle, Euclidean, GroundSpace, NestedSpace};
pub use symprod::{Configuration, UniformAtomicMeasure};
