//! Level-set horizontal mean curvature flow in Carnot groups.

pub mod grid;
pub mod group;
pub mod par;
pub mod poly;
pub mod calculus;
pub mod curvature;
pub mod snapshot;
pub mod barriers;
pub mod flow;
pub mod viscosity;
pub mod levelset;
pub mod config;
pub mod experiment;
