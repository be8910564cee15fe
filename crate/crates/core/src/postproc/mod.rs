//! Error verification, cluster-size optimisation and the previous-frame
//! QBER estimator.

mod cluster;
mod estimator;
mod verify;

pub use cluster::{
    effective_efficiency, effective_efficiency_with_repeat, fer_cluster, optimize_cluster,
    ClusterPlan, ClusterSearch, TagCost, VerificationParams,
};
pub use estimator::{
    qber_estimator_study, DriftProcess, ErrorTrajectory, EstimatorRow, EstimatorStudyConfig,
};
pub use verify::{irreducible_polynomial, verify_cluster, PolyHash, Verification};
