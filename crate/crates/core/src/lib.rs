//! Positioning of an underwater vehicle from a surface vehicle's imaging
//! sonar (range and azimuth) combined with the underwater vehicle's depth.
//!
//! The surface vehicle's pose comes from 2D SLAM (x, y, yaw) fused with a
//! tilt EKF (roll, pitch). The sonar pose follows by composing the mount
//! transform; each detection then defines a circle of candidate positions
//! which the depth reading cuts to at most two points, disambiguated by the
//! sonar's forward field of view.

pub mod attitude;
pub mod dataset;
pub mod eval;
pub mod geometry;
pub mod scenario;
pub mod sim;
pub mod solver;
pub mod sonar;

pub use attitude::{AttitudeState, EkfConfig, ImuSample, SlamPose2D, TiltEkf};
pub use dataset::{Dataset, DatasetError, EstimatesFile, Record, RecordData};
pub use eval::{
    associate, compute_metrics, evaluate, run_pipeline, run_pipeline_with, EvalError,
    MetricsReport, Pair, PipelineConfig, PipelineOutput,
};
pub use geometry::{EulerZYX, Pose3, RotMat3, Vec3};
pub use scenario::{Scenario, ScenarioError};
pub use sim::{
    gen_trajectory, simulate, NoiseSpec, SimError, TankSpec, TrajectoryKind, TrajectorySpec,
};
pub use solver::{
    brute_force_solve, solve_position, solve_position_with, DepthSample, PositionEstimate,
    SolveError, SolverConfig, SolverInput,
};
pub use sonar::{FovVerdict, PixelDetection, PolarDetection, SonarConfig, SonarScan};
