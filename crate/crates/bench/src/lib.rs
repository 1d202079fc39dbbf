//! Fixtures shared by the benchmarks in `benches/`.

use capsd::sonar::point_to_polar;
use capsd::{
    DepthSample, EulerZYX, PolarDetection, Pose3, Scenario, SolverInput, SonarConfig, Vec3,
};

/// A tilted vehicle looking at a target 8 m ahead and 3 m down.
pub fn solver_input() -> SolverInput {
    let asv = Pose3::from_euler(
        EulerZYX::from_degrees(20.0, 2.0, -3.0),
        Vec3::new(4.0, 8.0, 0.0),
    );
    let mount = Pose3::from_euler(
        EulerZYX::from_degrees(0.0, 25.0, 0.0),
        Vec3::new(0.3, 0.0, -0.2),
    );
    let cfg = SonarConfig {
        vmin: -20f64.to_radians(),
        vmax: 20f64.to_radians(),
        rmax: 30.0,
        mount,
        ..SonarConfig::default()
    };
    let target = Vec3::new(11.0, 10.5, -3.0);
    let q = asv.compose(&mount).inverse().transform_point(&target);
    let (range_m, azimuth) = point_to_polar(&q);
    SolverInput {
        asv_pose: asv,
        mount,
        detection: PolarDetection::new(range_m, azimuth),
        depth: DepthSample {
            t: 0.0,
            z_depth: target.z,
        },
        cfg,
    }
}

/// Square run in a reduced region, about 24 s of data.
pub fn small_scenario() -> Scenario {
    Scenario::from_toml(
        r#"
seed = 1
[trajectory.region]
x_min = 9.0
x_max = 12.0
y_min = 6.0
y_max = 9.0
"#,
    )
    .expect("fixture scenario is valid")
}
