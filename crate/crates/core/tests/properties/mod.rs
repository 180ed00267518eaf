//! Randomized invariants, each checked over `CASES` generated inputs.

use nalgebra::Vector3;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use proptest::test_runner::{Config, TestCaseError, TestRunner};

use vlp_core::beacon::{extract_rss, synthesize_composite, BeaconPlan, SynthesisOptions};
use vlp_core::channel::{line_of_sight_power, ChannelGeometry, NoiseModel};
use vlp_core::eval::ErrorStats;
use vlp_core::fusion::{drift_correct, DriftCorrectionConfig};
use vlp_core::localization::{
    distance_parallel, distance_tilted, solve_firefly, solve_indirect_h, solve_pso_3d, trilaterate_2d,
    IndirectHConfig, PsoConfig,
};
use vlp_core::sensors::{Pose, SensorFrame};
use vlp_core::sim::{run_flight, FlightPlan, SensorModels, Testbed};

pub const CASES: u32 = 1000;

pub type Suite = (&'static str, fn() -> Result<(), String>);

pub const SUITES: &[Suite] = &[
    ("parallel inversion round trip", parallel_round_trip),
    ("tilted inversion round trip", tilted_round_trip),
    ("trilateration from exact ranges", trilateration_exact),
    ("firefly zero-tilt equivalence", zero_tilt_equivalence),
    ("solver scale sanity", scale_sanity),
    ("determinism per seed", determinism),
    ("drift gate and stride", gate_and_stride),
    ("FDMA round trip and DC rejection", fdma_round_trip),
    ("error stats reorder invariance", stats_reorder),
];

fn check<S: Strategy>(strategy: S, test: impl Fn(S::Value) -> Result<(), TestCaseError>) -> Result<(), String> {
    let mut runner = TestRunner::new(Config { cases: CASES, failure_persistence: None, ..Config::default() });
    runner.run(&strategy, test).map_err(|e| e.to_string())
}

fn interior() -> impl Strategy<Value = Vector3<f64>> {
    (0.3..1.7f64, 0.3..1.7f64, 0.3..1.8f64).prop_map(|(x, y, z)| Vector3::new(x, y, z))
}

fn frame_at(tb: &Testbed, pose: Pose) -> SensorFrame {
    let rss = tb.luminaires.iter().map(|l| line_of_sight_power(l, &pose, &tb.photodiode).unwrap()).collect();
    SensorFrame {
        timestamp: pose.timestamp,
        rss,
        accel: Vector3::zeros(),
        roll: pose.roll,
        pitch: pose.pitch,
        yaw: pose.yaw,
        baro_altitude: pose.position.z,
        ground_truth: pose,
    }
}

fn parallel_round_trip() -> Result<(), String> {
    let tb = Testbed::reference();
    check((interior(), 0..4usize), |(p, i)| {
        let tx = &tb.luminaires[i];
        let pr = line_of_sight_power(tx, &Pose::level(p), &tb.photodiode).unwrap();
        let d = distance_parallel(pr, tx.transmit_power, tb.photodiode.area, tx.lambertian_order, p.z - tx.position.z)
            .unwrap();
        let truth = (p - tx.position).norm();
        prop_assert!((d - truth).abs() <= 1e-9 * truth, "{d} vs {truth}");
        Ok(())
    })
}

fn tilted_round_trip() -> Result<(), String> {
    let tb = Testbed::reference();
    let tilt = -7f64.to_radians()..7f64.to_radians();
    check((interior(), 0..4usize, tilt.clone(), tilt, -3.1..3.1f64), |(p, i, roll, pitch, yaw)| {
        let tx = &tb.luminaires[i];
        let pose = Pose::new(0.0, p, roll, pitch, yaw);
        let pr = line_of_sight_power(tx, &pose, &tb.photodiode).unwrap();
        prop_assume!(pr > 0.0);
        let g = ChannelGeometry::between(tx, &pose).unwrap();
        let d = distance_tilted(pr, tx, g.irradiance_angle, g.incidence_angle, tb.photodiode.area).unwrap();
        prop_assert!((d - g.distance).abs() <= 1e-9 * g.distance, "{d} vs {}", g.distance);
        Ok(())
    })
}

fn trilateration_exact() -> Result<(), String> {
    let anchors = Testbed::reference().anchor_positions();
    check((0.0..2.0f64, 0.0..2.0f64, 0.05..2.0f64), |(x, y, z)| {
        let p = Vector3::new(x, y, z);
        let d: Vec<f64> = anchors.iter().map(|a| (p - a).norm()).collect();
        let fix = trilaterate_2d(&anchors, &d, z).unwrap();
        prop_assert!((fix.position - p.xy()).norm() < 1e-9);
        Ok(())
    })
}

fn zero_tilt_equivalence() -> Result<(), String> {
    let tb = Testbed::reference().noiseless();
    check((interior(), -0.2..0.2f64), |(p, height_error)| {
        let frame = frame_at(&tb, Pose::level(p));
        let fix = solve_firefly(&frame, p.z + height_error, &tb).unwrap();
        prop_assert!((fix.estimate.position - fix.pass_one).norm() < 1e-9);
        Ok(())
    })
}

fn scale_sanity() -> Result<(), String> {
    let tb = Testbed::reference().noiseless();
    let pso = PsoConfig { swarm_size: 20, iterations: 5, ..PsoConfig::default() };
    check((interior(), -6..=6i32, any::<u64>()), |(p, k, seed)| {
        let factor = 2f64.powi(k);
        let frame = frame_at(&tb, Pose::level(p));
        let scaled_tb = tb.scaled_power(factor);
        let mut scaled = frame.clone();
        scaled.rss.iter_mut().for_each(|r| *r *= factor);

        let a = solve_firefly(&frame, p.z, &tb).unwrap().estimate.position;
        let b = solve_firefly(&scaled, p.z, &scaled_tb).unwrap().estimate.position;
        prop_assert!((a - b).norm() < 1e-9, "firefly {a} vs {b}");
        let a = solve_indirect_h(&frame, &IndirectHConfig::default(), &tb).unwrap().position;
        let b = solve_indirect_h(&scaled, &IndirectHConfig::default(), &scaled_tb).unwrap().position;
        prop_assert!((a - b).norm() < 1e-9, "indirect_h {a} vs {b}");
        let a = solve_pso_3d(&frame, &pso, &tb, seed).unwrap().position;
        let b = solve_pso_3d(&scaled, &pso, &scaled_tb, seed).unwrap().position;
        prop_assert!((a - b).norm() < 1e-9, "pso_3d {a} vs {b}");
        Ok(())
    })
}

fn determinism() -> Result<(), String> {
    let tb = Testbed::reference();
    let pso = PsoConfig { swarm_size: 20, iterations: 5, ..PsoConfig::default() };
    check((interior(), any::<u64>()), |(p, seed)| {
        let plan = FlightPlan::hover(p, 0.06);
        let a = run_flight(&tb, &plan, &SensorModels::default(), seed).unwrap();
        let b = run_flight(&tb, &plan, &SensorModels::default(), seed).unwrap();
        prop_assert_eq!(&a, &b);
        let x = solve_pso_3d(&a[0], &pso, &tb, seed);
        let y = solve_pso_3d(&b[0], &pso, &tb, seed);
        if let (Ok(x), Ok(y)) = (x, y) {
            prop_assert_eq!(x, y);
        }
        Ok(())
    })
}

fn gate_and_stride() -> Result<(), String> {
    let angle = -0.2..0.2f64;
    check(
        (angle.clone(), angle, 0..500usize, 1..20usize, 0.0..1.0f64, 0.0..2.0f64, -0.05..0.05f64, 0.0..2.0f64),
        |(roll, pitch, index, stride_k, epsilon, h_vlp, delta, prev)| {
            let cfg = DriftCorrectionConfig { epsilon, stride_k, ..DriftCorrectionConfig::default() };
            let open = roll.abs().max(pitch.abs()) < cfg.tilt_threshold && index % stride_k == 0;
            prop_assert_eq!(cfg.accepts(roll, pitch, index), open);
            let out = drift_correct(Some(h_vlp), delta, prev, (roll, pitch), index, &cfg);
            if open {
                prop_assert_eq!(out, epsilon * h_vlp + (1.0 - epsilon) * (prev + delta));
            } else {
                // A closed gate or an off-stride update follows the barometer exactly.
                prop_assert_eq!(out, prev + delta);
            }
            prop_assert_eq!(drift_correct(None, delta, prev, (roll, pitch), index, &cfg), prev + delta);
            Ok(())
        },
    )
}

fn fdma_round_trip() -> Result<(), String> {
    let plan = BeaconPlan::power_of_two(60.0, &[1, 2, 3, 4]).unwrap();
    let opts = SynthesisOptions::one_period(&plan, 7680.0).unwrap();
    let power = 1e-9..1e-4f64;
    check(
        (prop::array::uniform4(power), 0.0..1e-3f64),
        |(powers, dc)| {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
            let w = synthesize_composite(&powers, &plan, &opts, &NoiseModel::NONE, &mut rng).unwrap();
            let lit = NoiseModel { gaussian_sigma: 0.0, ambient_dc: dc };
            let w_dc = synthesize_composite(&powers, &plan, &opts, &lit, &mut rng).unwrap();
            let scale = powers.iter().cloned().fold(0.0, f64::max) + dc;
            for ((a, b), p) in extract_rss(&w, &plan).unwrap().iter().zip(extract_rss(&w_dc, &plan).unwrap()).zip(powers) {
                prop_assert!((a - p).abs() <= 0.005 * p, "{a} vs {p}");
                prop_assert!((a - b).abs() <= 1e-12 * scale, "DC moved {a} to {b}");
            }
            Ok(())
        },
    )
}

fn stats_reorder() -> Result<(), String> {
    let errors = prop::collection::vec(0.0..5.0f64, 1..200);
    check((errors, any::<u64>()), |(errors, seed)| {
        let mut shuffled = errors.clone();
        shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let a = ErrorStats::from_errors(&errors).unwrap();
        let b = ErrorStats::from_errors(&shuffled).unwrap();
        prop_assert_eq!(a, b);
        prop_assert!(a.median <= a.max && a.std_dev >= 0.0);
        Ok(())
    })
}
