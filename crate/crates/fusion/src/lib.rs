//! Combining several forecasters.
//!
//! A [`pool::ModelPool`] holds the candidates and [`pool::profile`] scores
//! them per dataset. Forecasts can be fused by plain averaging, a
//! least-squares linear blend, or a learned router that weights members from
//! features of the input series. [`coordinate`] implements a cascade in
//! which cheap AR models answer confident cases and a large model handles
//! the rest, with a second small model distilled toward the large one.

pub mod combine;
pub mod coordinate;
pub mod features;
pub mod pool;
pub mod router;

pub use combine::{fit_linear_fusion, fuse_average, LinearFusion};
pub use coordinate::{
    coordinate_infer, coordinate_train, CoordinationConfig, CoordinationOutcome, Route,
};
pub use features::{Embedder, StatEmbedder};
pub use pool::{profile, ModelPool, ModelProfile, PoolMember};
pub use router::{route_fuse, train_router, RouterConfig, RouterMode, RouterParams};
