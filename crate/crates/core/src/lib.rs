//! Fused partial Gromov-Wasserstein (FPGW) and mass-constrained FPGW (FMPGW)
//! between attributed metric-measure spaces, with Frank-Wolfe and Sinkhorn
//! solvers, barycenters and graph workflows built on top.

pub mod barycenter;
pub mod contraction;
pub mod error;
pub mod esolver;
pub mod fw;
pub mod graphio;
pub mod model;
pub mod oracle;
pub mod pot;
pub mod tasks;
pub mod tol;

pub use contraction::Loss;
pub use error::{Error, Result};
pub use model::{
    fmpgw_objective, fpgw_objective, Features, FusedConfig, MmSpace, SolverReport, TraceEntry, TransportPlan,
};
