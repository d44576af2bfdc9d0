mod common;

use ndarray::s;
use sonotrace::scene::shapes;
use sonotrace::{trace, PlaneWaveScheme, SecondaryMode, TransducerSpec, Vec3};

use common::*;

#[test]
fn disjoint_plates_add_linearly() {
    let spec = linear_probe(32);
    let scheme = PlaneWaveScheme::linspace(-0.05, 0.05, 3).unwrap();
    let cfg = config(3_000, 21, 5_000, SecondaryMode::Binary);
    let run = |left: bool, right: bool| {
        let mut scene = empty_scene();
        if left {
            add_plate(&mut scene, "left", 0.04, -0.006, 0.008, 0.02);
        }
        if right {
            add_plate(&mut scene, "right", 0.04, 0.006, 0.008, 0.02);
        }
        trace(&scene, &build(&scene), &spec, &scheme, &cfg).unwrap().0
    };
    let both = run(true, true);
    let sum = &run(true, false).samples + &run(false, true).samples;
    let scale = both.samples.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(scale > 0.0);
    let err = (&both.samples - &sum).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(err <= 1e-6 * scale, "max deviation {err:e} vs peak {scale:e}");
}

#[test]
fn single_angle_deposits_carry_event_zero() {
    let scene = flat_plate(0.03);
    let (_, stats) = trace(&scene, &build(&scene), &linear_probe(16), &PlaneWaveScheme::broadside(), &config(1_000, 3, 3_000, SecondaryMode::Transmissive)).unwrap();
    assert_eq!(stats.deposits_per_event, vec![stats.deposits]);
}

#[test]
fn events_are_drawn_evenly() {
    // Wide, fully rough plate seen by omnidirectional elements: every primary
    // ray deposits exactly once, whatever its steering angle.
    let mut scene = sonotrace::Scene::new(
        vec![
            sonotrace::Material::new("water", 1.54, 1.0).unwrap(),
            sonotrace::Material::new("bone", 7.8, 1.0).unwrap(),
        ],
        "water",
        C,
    )
    .unwrap();
    scene
        .add_mesh(shapes::sheet("wide", Vec3::new(0.0, 0.0, 0.02), -Vec3::Z, Vec3::X, 1.0, 1.0), "bone")
        .unwrap();
    let half_pi = std::f64::consts::FRAC_PI_2;
    let spec = TransducerSpec::linear_equivalent(16, 3e-4, 0.004, FC, half_pi, half_pi).unwrap();
    let scheme = PlaneWaveScheme::linspace(-0.35, 0.35, 5).unwrap();
    let (_, stats) = trace(&scene, &build(&scene), &spec, &scheme, &config(5_000, 4, 4_000, SecondaryMode::Binary)).unwrap();
    assert_eq!(stats.deposits, stats.rays_emitted);
    let total = stats.deposits as f64;
    let p = 1.0 / 5.0;
    let sigma = (total * p * (1.0 - p)).sqrt();
    for (event, &count) in stats.deposits_per_event.iter().enumerate() {
        assert!((count as f64 - total * p).abs() <= 3.0 * sigma, "event {event}: {count} of {total}");
    }
}

#[test]
fn deposit_times_match_geometry() {
    // One element at the origin: every echo leaves the plate within the
    // 2° receive cone, so its delay is bounded by the straight down-and-back
    // path and the slant return from the cone edge.
    let depth = 0.04;
    let scene = flat_plate(depth);
    let spec = linear_probe(1);
    let (rf, stats) = trace(&scene, &build(&scene), &spec, &PlaneWaveScheme::broadside(), &config(200_000, 5, 4_000, SecondaryMode::Transmissive)).unwrap();
    assert!(stats.deposits > 0);
    let lo = (2.0 * depth / C * FS).floor() as usize;
    let slant = depth / 2f64.to_radians().cos();
    let hi = ((depth + slant) / C * FS).ceil() as usize + 1;
    for (k, &v) in rf.samples.slice(s![0, 0, ..]).iter().enumerate() {
        if v != 0.0 {
            assert!((lo..=hi).contains(&k), "sample {k} outside [{lo}, {hi}]");
        }
    }
}

#[test]
fn two_interfaces_give_two_echoes_with_opposite_signs() {
    // water|bone at 30 mm, then bone|water at 45 mm (second plate faces away
    // from the array so it is crossed from its inside).
    let (d1, d2) = (0.03, 0.045);
    let mut scene = empty_scene();
    add_plate(&mut scene, "top", d1, 0.0, 0.05, 0.05);
    let bottom = shapes::sheet("bottom", Vec3::new(0.0, 0.0, d2), Vec3::Z, Vec3::X, 0.05, 0.05);
    scene.add_mesh(bottom, "bone").unwrap();
    let spec = linear_probe(32);
    let (rf, _) = trace(&scene, &build(&scene), &spec, &PlaneWaveScheme::broadside(), &config(20_000, 6, 5_000, SecondaryMode::Transmissive)).unwrap();
    let window = |d: f64| {
        let k = (2.0 * d / C * FS).round() as usize;
        rf.samples.slice(s![0, .., k - 3..=k + 3]).sum()
    };
    let first = window(d1);
    let second = window(d2);
    assert!(first < 0.0, "water to bone echo should invert, got {first}");
    assert!(second > 0.0, "bone to water echo should not invert, got {second}");
    // Nothing in between the two echoes.
    let gap = rf.samples.slice(s![0, .., (2.0 * d1 / C * FS) as usize + 10..(2.0 * d2 / C * FS) as usize - 10]);
    assert!(gap.iter().all(|&v| v == 0.0));
}

#[test]
fn caps_are_respected() {
    let mut scene = empty_scene();
    // Facing plates make a cavity that traps reflected rays.
    add_plate(&mut scene, "floor", 0.03, 0.0, 0.05, 0.05);
    let lid = shapes::sheet("lid", Vec3::new(0.0, 0.0, 0.02), Vec3::Z, Vec3::X, 0.05, 0.05);
    scene.add_mesh(lid, "bone").unwrap();
    let spec = linear_probe(8);
    let mut cfg = config(2_000, 7, 20_000, SecondaryMode::Transmissive);
    cfg.max_bounces = 3;
    cfg.max_path_length = 0.09;
    let (_, stats) = trace(&scene, &build(&scene), &spec, &PlaneWaveScheme::broadside(), &cfg).unwrap();
    assert!(stats.max_bounces_observed <= 3);
    assert!(stats.max_deposit_path_length <= cfg.max_path_length);
    assert!(stats.mean_bounces > 1.0);
}

#[test]
fn worker_count_does_not_change_output() {
    let scene = flat_plate(0.03);
    let accel = build(&scene);
    let spec = linear_probe(16);
    let scheme = PlaneWaveScheme::linspace(-0.1, 0.1, 3).unwrap();
    let cfg = config(3_000, 8, 3_000, SecondaryMode::Transmissive);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| trace(&scene, &accel, &spec, &scheme, &cfg).unwrap().0)
    };
    assert_eq!(run(1), run(3));
}

#[test]
fn short_buffer_counts_truncation() {
    let scene = flat_plate(0.05);
    let (_, stats) = trace(&scene, &build(&scene), &linear_probe(8), &PlaneWaveScheme::broadside(), &config(1_000, 9, 1_000, SecondaryMode::Binary)).unwrap();
    assert!(stats.truncated > 0);
    assert_eq!(stats.deposits, 0);
}
