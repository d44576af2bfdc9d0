//! Physically based ultrasound simulation by Monte Carlo ray tracing.
//!
//! The pipeline runs scene → tracer → channel data → [`dsp`] → B-mode image.
//! Rays leave a convex (or linear-equivalent) array as steered plane waves,
//! scatter off triangle-mesh interfaces through an impedance-based acoustic
//! BSDF with GGX microfacet roughness, and at every interaction send a
//! next-event ray back to a randomly chosen receive element.

pub mod acoustics;
pub mod channel;
pub mod dsp;
pub mod math;
pub mod scene;
pub mod tracer;
pub mod transducer;

pub use channel::{splat, ChannelData, FormatError, SplatOutcome};
pub use math::Vec3;
pub use scene::{Accelerator, Hit, Material, Mesh, Scene};
pub use tracer::{trace, SecondaryMode, TraceConfig, TraceError, TraceStats};
pub use transducer::{PlaneWaveScheme, TransducerSpec};
