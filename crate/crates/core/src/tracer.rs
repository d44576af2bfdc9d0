//! Monte Carlo round-trip tracer.
//!
//! Each primary ray leaves the array face with a plane-wave delay, bounces
//! through the scene by sampling the acoustic BSDF, and at every interaction
//! casts one secondary ray toward the center of a randomly chosen element.
//! Unblocked secondaries deposit a time-stamped pressure sample into that
//! element's channel for the ray's transmit event.
//!
//! Every ray draws from its own ChaCha stream selected by the ray index, so a
//! ray's path does not depend on what other rays did. Rays are grouped into
//! chunks that run in parallel; deposits are merged in chunk order, so the
//! output does not depend on the worker count.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::acoustics::{eval_toward_signed, scatter, straight_transmission};
use crate::channel::{splat, ChannelData, SplatOutcome};
use crate::math::Vec3;
use crate::scene::{Accelerator, Hit, Scene};
use crate::transducer::{receive_directivity, sample_receive_target, Emitter, PlaneWaveScheme, TransducerSpec};

/// Rays per work item.
pub const CHUNK_RAYS: usize = 4096;
/// Chunks traced before their deposits are merged into the channel buffer.
const CHUNKS_PER_BATCH: usize = 64;

#[derive(Debug, Error, PartialEq)]
pub enum TraceError {
    #[error("invalid trace configuration: {0}")]
    Config(String),
    #[error("non-finite path throughput at ray {ray} after {bounces} bounces")]
    NonFinite { ray: usize, bounces: u32 },
}

/// How a next-event segment treats geometry between the interaction point and
/// the receiving element.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SecondaryMode {
    /// Any hit cancels the deposit.
    Binary,
    /// Straight continuation through interfaces, attenuated by the
    /// transmission amplitude at each; total reflection cancels.
    Transmissive,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceConfig {
    pub rays_per_element: usize,
    pub max_bounces: u32,
    /// Primary path length cap, m.
    pub max_path_length: f64,
    pub seed: u64,
    pub sampling_frequency: f64,
    pub num_samples: usize,
    pub secondary_mode: SecondaryMode,
    pub max_secondary_interactions: u32,
}

impl TraceConfig {
    /// Buffer length that holds any echo up to twice the path cap plus a
    /// convolution kernel of `kernel_len` samples.
    pub fn default_num_samples(max_path_length: f64, speed_of_sound: f64, fs: f64, kernel_len: usize) -> usize {
        (2.0 * max_path_length / speed_of_sound * fs).ceil() as usize + kernel_len
    }

    pub fn validate(&self, spec: &TransducerSpec) -> Result<(), TraceError> {
        let bad = |m: String| Err(TraceError::Config(m));
        if self.rays_per_element < 1 {
            return bad("rays_per_element must be at least 1".into());
        }
        if self.max_bounces < 1 {
            return bad("max_bounces must be at least 1".into());
        }
        if self.max_secondary_interactions < 1 {
            return bad("max_secondary_interactions must be at least 1".into());
        }
        if self.num_samples < 1 {
            return bad("num_samples must be at least 1".into());
        }
        if !(self.max_path_length > 0.0 && self.max_path_length.is_finite()) {
            return bad(format!("max_path_length must be > 0, got {}", self.max_path_length));
        }
        if !(self.sampling_frequency > 2.0 * spec.center_frequency) {
            return bad(format!(
                "sampling frequency {} Hz does not exceed twice the center frequency {} Hz",
                self.sampling_frequency, spec.center_frequency
            ));
        }
        if spec.num_elements.checked_mul(self.rays_per_element).is_none() {
            return bad("total ray count overflows".into());
        }
        Ok(())
    }
}

/// State of one primary ray.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathState {
    pub position: Vec3,
    pub direction: Vec3,
    /// Signed pressure weight.
    pub throughput: f64,
    pub path_length: f64,
    pub bounces: u32,
    pub emission_delay: f64,
    pub event_index: usize,
    pub active: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct TraceStats {
    pub rays_emitted: u64,
    pub deposits: u64,
    /// Next-event segments blocked by geometry (or totally reflected in
    /// transmissive mode).
    pub cancelled_occluded: u64,
    pub truncated: u64,
    /// Rays absorbed because scatter resampling failed.
    pub killed: u64,
    pub total_bounces: u64,
    pub mean_bounces: f64,
    pub max_bounces_observed: u32,
    /// Longest primary path length among deposits, m.
    pub max_deposit_path_length: f64,
    /// Longest next-event segment among deposits, m.
    pub max_secondary_length: f64,
    pub deposits_per_event: Vec<u64>,
    pub wall_clock_seconds: f64,
}

impl TraceStats {
    fn absorb(&mut self, o: &TraceStats) {
        self.rays_emitted += o.rays_emitted;
        self.cancelled_occluded += o.cancelled_occluded;
        self.killed += o.killed;
        self.total_bounces += o.total_bounces;
        self.max_bounces_observed = self.max_bounces_observed.max(o.max_bounces_observed);
        self.max_deposit_path_length = self.max_deposit_path_length.max(o.max_deposit_path_length);
        self.max_secondary_length = self.max_secondary_length.max(o.max_secondary_length);
    }
}

#[derive(Debug, Clone, Copy)]
struct Deposit {
    event: u32,
    element: u32,
    time: f64,
    amplitude: f64,
}

/// Everything a worker needs, shared read-only.
struct Tracer<'a> {
    scene: &'a Scene,
    accel: &'a Accelerator,
    spec: &'a TransducerSpec,
    cfg: &'a TraceConfig,
    emitter: Emitter<'a>,
    /// Inverse of the expected share of rays per event.
    event_weight: f64,
    base_rng: ChaCha8Rng,
}

/// Traces `rays_per_element × num_elements` primary rays and returns the
/// accumulated channel data.
pub fn trace(
    scene: &Scene,
    accel: &Accelerator,
    spec: &TransducerSpec,
    scheme: &PlaneWaveScheme,
    cfg: &TraceConfig,
) -> Result<(ChannelData, TraceStats), TraceError> {
    cfg.validate(spec)?;
    spec.validate().map_err(|e| TraceError::Config(e.to_string()))?;
    let start = Instant::now();

    let tracer = Tracer {
        scene,
        accel,
        spec,
        cfg,
        emitter: Emitter::new(spec, scheme, cfg.rays_per_element, scene.speed_of_sound),
        event_weight: scheme.len() as f64,
        base_rng: ChaCha8Rng::seed_from_u64(cfg.seed),
    };

    let total = cfg.rays_per_element * spec.num_elements;
    let chunks = total.div_ceil(CHUNK_RAYS);
    let mut channel = ChannelData::zeros(scheme.len(), spec.num_elements, cfg.num_samples, cfg.sampling_frequency);
    let mut stats = TraceStats {
        deposits_per_event: vec![0; scheme.len()],
        ..TraceStats::default()
    };

    for batch_start in (0..chunks).step_by(CHUNKS_PER_BATCH) {
        let batch_end = (batch_start + CHUNKS_PER_BATCH).min(chunks);
        let results: Vec<Result<(Vec<Deposit>, TraceStats), TraceError>> = (batch_start..batch_end)
            .into_par_iter()
            .map(|chunk| {
                let first = chunk * CHUNK_RAYS;
                let last = (first + CHUNK_RAYS).min(total);
                tracer.run_chunk(first..last)
            })
            .collect();
        for result in results {
            let (deposits, chunk_stats) = result?;
            stats.absorb(&chunk_stats);
            for d in deposits {
                match splat(&mut channel, d.event as usize, d.element as usize, d.time, d.amplitude) {
                    SplatOutcome::Stored => {
                        stats.deposits += 1;
                        stats.deposits_per_event[d.event as usize] += 1;
                    }
                    SplatOutcome::Truncated => stats.truncated += 1,
                }
            }
        }
    }

    stats.mean_bounces = if stats.rays_emitted > 0 {
        stats.total_bounces as f64 / stats.rays_emitted as f64
    } else {
        0.0
    };
    stats.wall_clock_seconds = start.elapsed().as_secs_f64();
    Ok((channel, stats))
}

impl Tracer<'_> {
    fn run_chunk(&self, rays: std::ops::Range<usize>) -> Result<(Vec<Deposit>, TraceStats), TraceError> {
        let mut deposits = Vec::new();
        let mut stats = TraceStats::default();
        for ray in rays {
            let mut rng = self.base_rng.clone();
            rng.set_stream(ray as u64);
            self.trace_ray(ray, &mut rng, &mut deposits, &mut stats)?;
        }
        Ok((deposits, stats))
    }

    fn trace_ray(
        &self,
        ray: usize,
        rng: &mut ChaCha8Rng,
        deposits: &mut Vec<Deposit>,
        stats: &mut TraceStats,
    ) -> Result<(), TraceError> {
        let emitted = self.emitter.sample(rng);
        stats.rays_emitted += 1;
        let mut state = PathState {
            position: emitted.origin,
            direction: emitted.direction,
            throughput: emitted.pressure,
            path_length: 0.0,
            bounces: 0,
            emission_delay: emitted.emission_delay,
            event_index: emitted.event_index,
            active: emitted.pressure > 0.0,
        };

        while state.active {
            if state.bounces >= self.cfg.max_bounces {
                break;
            }
            let remaining = self.cfg.max_path_length - state.path_length;
            let Some(hit) = self.accel.intersect(state.position, state.direction, remaining) else {
                break;
            };
            state.bounces += 1;
            state.path_length += hit.distance;
            state.position = hit.position;

            if let Some(d) = self.next_event_deposit(&state, &hit, rng, stats) {
                deposits.push(d);
            }

            let pair = self.scene.material_pair_at(&hit);
            let alpha = self.scene.roughness_at(&hit);
            match scatter(&hit, state.direction, pair, alpha, rng) {
                Ok(s) => {
                    state.direction = s.direction;
                    state.throughput *= s.throughput;
                }
                Err(_) => {
                    stats.killed += 1;
                    state.active = false;
                }
            }
            if !state.throughput.is_finite() || !state.direction.is_finite() {
                return Err(TraceError::NonFinite {
                    ray,
                    bounces: state.bounces,
                });
            }
        }
        stats.total_bounces += state.bounces as u64;
        stats.max_bounces_observed = stats.max_bounces_observed.max(state.bounces);
        Ok(())
    }

    /// Casts the secondary ray from `hit` and returns the deposit, if any.
    fn next_event_deposit(
        &self,
        state: &PathState,
        hit: &Hit,
        rng: &mut ChaCha8Rng,
        stats: &mut TraceStats,
    ) -> Option<Deposit> {
        let (target, probability) = sample_receive_target(self.spec, rng);
        let offset = target.center - hit.position;
        let distance = offset.length();
        if distance <= 0.0 {
            return None;
        }
        let toward = offset / distance;
        let directivity = receive_directivity(self.spec, -toward, target.normal);
        if directivity == 0.0 {
            return None;
        }
        let pair = self.scene.material_pair_at(hit);
        let alpha = self.scene.roughness_at(hit);
        let bsdf = eval_toward_signed(hit, state.direction, toward, pair, alpha);
        if bsdf == 0.0 {
            return None;
        }
        let mut amplitude = state.throughput * bsdf * directivity / probability * self.event_weight;

        match self.cfg.secondary_mode {
            SecondaryMode::Binary => {
                if self.accel.occluded(hit.position, toward, distance) {
                    stats.cancelled_occluded += 1;
                    return None;
                }
            }
            SecondaryMode::Transmissive => {
                let mut position = hit.position;
                let mut remaining = distance;
                let mut crossings = 0;
                while let Some(blocker) = self.accel.intersect(position, toward, remaining) {
                    crossings += 1;
                    let factor = if crossings > self.cfg.max_secondary_interactions {
                        None
                    } else {
                        straight_transmission(
                            toward,
                            blocker.geometric_normal,
                            self.scene.material_pair_at(&blocker),
                            self.scene.roughness_at(&blocker),
                        )
                    };
                    let Some(factor) = factor else {
                        stats.cancelled_occluded += 1;
                        return None;
                    };
                    amplitude *= factor;
                    remaining -= blocker.distance;
                    position = blocker.position;
                }
            }
        }

        stats.max_deposit_path_length = stats.max_deposit_path_length.max(state.path_length);
        stats.max_secondary_length = stats.max_secondary_length.max(distance);
        let time = state.emission_delay + (state.path_length + distance) / self.scene.speed_of_sound;
        Some(Deposit {
            event: state.event_index as u32,
            element: target.index as u32,
            time,
            amplitude,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{shapes, Material};

    fn materials() -> Vec<Material> {
        vec![
            Material::new("water", 1.54, 1.0).unwrap(),
            Material::new("bone", 7.8, 0.5).unwrap(),
        ]
    }

    fn probe() -> TransducerSpec {
        TransducerSpec::linear_equivalent(32, 3e-4, 0.004, 5e6, 2f64.to_radians(), 2f64.to_radians()).unwrap()
    }

    fn config(rays: usize) -> TraceConfig {
        TraceConfig {
            rays_per_element: rays,
            max_bounces: 10,
            max_path_length: 0.1,
            seed: 7,
            sampling_frequency: 50e6,
            num_samples: 7000,
            secondary_mode: SecondaryMode::Transmissive,
            max_secondary_interactions: 10,
        }
    }

    fn plate_scene(depth: f64) -> Scene {
        let mut scene = Scene::new(materials(), "water", 1540.0).unwrap();
        let plate = shapes::sheet("plate", Vec3::new(0.0, 0.0, depth), -Vec3::Z, Vec3::X, 0.1, 0.05);
        scene.add_mesh(plate, "bone").unwrap();
        scene
    }

    #[test]
    fn empty_scene_is_silent() {
        let scene = Scene::new(materials(), "water", 1540.0).unwrap();
        let accel = Accelerator::build(&scene);
        let spec = probe();
        let (ch, stats) = trace(&scene, &accel, &spec, &PlaneWaveScheme::broadside(), &config(100)).unwrap();
        assert!(ch.samples.iter().all(|&v| v == 0.0));
        assert_eq!(stats.deposits, 0);
        assert_eq!(stats.rays_emitted, 3200);
        assert_eq!(stats.mean_bounces, 0.0);
    }

    #[test]
    fn plate_echo_budget_and_bounces() {
        let scene = plate_scene(0.03);
        let accel = Accelerator::build(&scene);
        let spec = probe();
        let (ch, stats) = trace(&scene, &accel, &spec, &PlaneWaveScheme::broadside(), &config(300)).unwrap();
        assert_eq!(stats.rays_emitted, 300 * 32);
        assert!(stats.mean_bounces >= 1.0);
        assert!(stats.deposits > 0);
        assert!(ch.is_finite());
        assert!(stats.max_bounces_observed <= 10);
    }

    #[test]
    fn config_validation() {
        let spec = probe();
        let mut cfg = config(1);
        cfg.sampling_frequency = 9e6;
        assert!(cfg.validate(&spec).is_err());
        let mut cfg = config(0);
        cfg.rays_per_element = 0;
        assert!(cfg.validate(&spec).is_err());
        let mut cfg = config(1);
        cfg.max_path_length = 0.0;
        assert!(cfg.validate(&spec).is_err());
        assert!(config(1).validate(&spec).is_ok());
    }

    #[test]
    fn default_buffer_length() {
        // 2 * 0.2 / 1540 * 50e6 = 12987.01 -> 12988
        assert_eq!(TraceConfig::default_num_samples(0.2, 1540.0, 50e6, 159), 12988 + 159);
    }
}
