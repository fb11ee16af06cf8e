use thiserror::Error;

use crate::NodeId;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid network spec: {0}")]
    InvalidSpec(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("patch anchored at node {anchor} cannot be completed; measured components {components:?}")]
    Incompletable {
        anchor: NodeId,
        components: Vec<Vec<NodeId>>,
    },

    #[error("correlation undefined: a distance profile has zero variance")]
    UndefinedCorrelation,

    #[error("degenerate landmark configuration: all landmarks coincide")]
    DegenerateConfiguration,

    #[error("translation system is underdetermined; free components {components:?}")]
    Underdetermined { components: Vec<Vec<NodeId>> },

    #[error("no end-node to gateway measurement; the problem cannot be anchored")]
    Unanchorable,

    #[error("feasibility projections did not converge after {sweeps} sweeps (residual {residual:.3e})")]
    SdpNotConverged { sweeps: usize, residual: f64 },

    #[error("stitch system is singular (condition estimate {condition:.3e}); increase mu")]
    SingularStitch { condition: f64 },

    #[error("localization error undefined: true coordinates coincide")]
    UndefinedMetric,

    #[error("remaining energy {energy} is not positive")]
    DepletedEnergy { energy: f64 },

    #[error("no feasible flow: balance at node {node} violated by {violation:.3e}")]
    InfeasibleFlow { node: usize, violation: f64 },

    #[error("brute force needs {required:.3e} evaluations, budget is {budget}")]
    BudgetExceeded { required: f64, budget: u64 },

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}
