//! Convex-array transducer: element layout, plane-wave emission with cosine
//! directivity, and receive-side element sampling with a ramp directivity.
//!
//! The array lies in the imaging plane spanned by `lateral` and `axis`. The
//! `center` is the apex of the arc (the point of the face on the axis); the
//! arc's center of curvature sits `radius` behind it. A very large radius
//! gives a linear-equivalent layout, see [`TransducerSpec::linear_equivalent`].

use std::f64::consts::FRAC_PI_2;

use rand::Rng;
use thiserror::Error;

use crate::math::Vec3;

#[derive(Debug, Error, PartialEq)]
pub enum TransducerError {
    #[error("invalid transducer: {0}")]
    InvalidSpec(String),
    #[error("element {index} out of range (array has {count})")]
    ElementOutOfRange { index: usize, count: usize },
    #[error("plane-wave scheme: {0}")]
    InvalidScheme(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransducerSpec {
    pub num_elements: usize,
    /// Radius of curvature of the array face, m.
    pub radius: f64,
    /// Full arc angle between the outermost element centers, rad.
    pub opening_angle: f64,
    /// Elevational width of the emitting strip, m.
    pub elevational_extent: f64,
    /// Center frequency, Hz.
    pub center_frequency: f64,
    /// Receive main-beam half angle, rad.
    pub main_beam_angle: f64,
    /// Receive cutoff half angle, rad.
    pub cutoff_angle: f64,
    pub center: Vec3,
    /// Unit depth direction of the imaging plane.
    pub axis: Vec3,
    /// Unit lateral direction of the imaging plane, orthogonal to `axis`.
    pub lateral: Vec3,
}

impl TransducerSpec {
    /// Array centered at the origin looking along +z with +x lateral.
    pub fn convex(
        num_elements: usize,
        radius: f64,
        opening_angle: f64,
        elevational_extent: f64,
        center_frequency: f64,
        main_beam_angle: f64,
        cutoff_angle: f64,
    ) -> Result<TransducerSpec, TransducerError> {
        let spec = TransducerSpec {
            num_elements,
            radius,
            opening_angle,
            elevational_extent,
            center_frequency,
            main_beam_angle,
            cutoff_angle,
            center: Vec3::ZERO,
            axis: Vec3::Z,
            lateral: Vec3::X,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Practically flat array with element pitch `pitch` (m): the radius is
    /// set so large that the arc sagitta over the aperture is far below a
    /// picometer.
    pub fn linear_equivalent(
        num_elements: usize,
        pitch: f64,
        elevational_extent: f64,
        center_frequency: f64,
        main_beam_angle: f64,
        cutoff_angle: f64,
    ) -> Result<TransducerSpec, TransducerError> {
        const RADIUS: f64 = 1.0e6;
        let aperture = pitch * num_elements.saturating_sub(1) as f64;
        Self::convex(
            num_elements,
            RADIUS,
            aperture / RADIUS,
            elevational_extent,
            center_frequency,
            main_beam_angle,
            cutoff_angle,
        )
    }

    pub fn validate(&self) -> Result<(), TransducerError> {
        let bad = |msg: String| Err(TransducerError::InvalidSpec(msg));
        if self.num_elements < 1 {
            return bad("num_elements must be at least 1".into());
        }
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return bad(format!("radius must be > 0, got {}", self.radius));
        }
        if !(self.opening_angle >= 0.0 && self.opening_angle < std::f64::consts::TAU) {
            return bad(format!("opening angle must be in [0, 2π), got {}", self.opening_angle));
        }
        if !(self.elevational_extent > 0.0 && self.elevational_extent.is_finite()) {
            return bad(format!("elevational extent must be > 0, got {}", self.elevational_extent));
        }
        if !(self.center_frequency > 0.0 && self.center_frequency.is_finite()) {
            return bad(format!("center frequency must be > 0, got {}", self.center_frequency));
        }
        if !(0.0 <= self.main_beam_angle
            && self.main_beam_angle <= self.cutoff_angle
            && self.cutoff_angle <= FRAC_PI_2)
        {
            return bad(format!(
                "need 0 <= main beam ({}) <= cutoff ({}) <= π/2",
                self.main_beam_angle, self.cutoff_angle
            ));
        }
        if !self.axis.is_unit() || !self.lateral.is_unit() || self.axis.dot(self.lateral).abs() > 1e-9 {
            return bad("axis and lateral must be orthonormal".into());
        }
        Ok(())
    }

    /// Unit elevational direction, completing `(lateral, elevation, axis)`.
    pub fn elevation(&self) -> Vec3 {
        self.axis.cross(self.lateral)
    }

    /// Arc angle of element `e`, measured from the axis toward `lateral`.
    pub fn element_angle(&self, e: usize) -> f64 {
        if self.num_elements == 1 {
            return 0.0;
        }
        self.opening_angle * (e as f64 / (self.num_elements - 1) as f64 - 0.5)
    }

    /// Point on the arc at angle `phi` (elevation 0).
    pub fn arc_point(&self, phi: f64) -> Vec3 {
        let half = (phi / 2.0).sin();
        self.center + self.lateral * (self.radius * phi.sin()) - self.axis * (2.0 * self.radius * half * half)
    }

    /// Outward surface normal at arc angle `phi`.
    pub fn arc_normal(&self, phi: f64) -> Vec3 {
        self.axis * phi.cos() + self.lateral * phi.sin()
    }

    /// Plane-wave propagation direction for a steering angle in the imaging
    /// plane.
    pub fn steering_direction(&self, angle: f64) -> Vec3 {
        self.axis * angle.cos() + self.lateral * angle.sin()
    }

    /// Element center spacing along the arc, m.
    pub fn pitch(&self) -> f64 {
        if self.num_elements < 2 {
            0.0
        } else {
            self.radius * self.opening_angle / (self.num_elements - 1) as f64
        }
    }

    /// All element geometries in index order.
    pub fn elements(&self) -> Vec<ElementGeometry> {
        (0..self.num_elements)
            .map(|e| element_geometry(self, e).expect("index in range"))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementGeometry {
    pub index: usize,
    pub center: Vec3,
    /// Outward unit normal, pointing into the medium.
    pub normal: Vec3,
    /// Signed arc length from the apex, m.
    pub lateral_arc_position: f64,
}

pub fn element_geometry(spec: &TransducerSpec, e: usize) -> Result<ElementGeometry, TransducerError> {
    if e >= spec.num_elements {
        return Err(TransducerError::ElementOutOfRange {
            index: e,
            count: spec.num_elements,
        });
    }
    let phi = spec.element_angle(e);
    Ok(ElementGeometry {
        index: e,
        center: spec.arc_point(phi),
        normal: spec.arc_normal(phi),
        lateral_arc_position: spec.radius * phi,
    })
}

/// Steering angles of one acquisition, one transmit event per angle.
#[derive(Debug, Clone, PartialEq)]
pub struct PlaneWaveScheme {
    angles: Vec<f64>,
}

impl PlaneWaveScheme {
    pub fn new(angles: Vec<f64>) -> Result<PlaneWaveScheme, TransducerError> {
        if angles.is_empty() {
            return Err(TransducerError::InvalidScheme("no angles".into()));
        }
        if angles.iter().any(|a| !a.is_finite() || a.abs() >= FRAC_PI_2) {
            return Err(TransducerError::InvalidScheme("angles must lie in (-90°, 90°)".into()));
        }
        if angles.windows(2).any(|w| w[1] <= w[0]) {
            return Err(TransducerError::InvalidScheme("angles must be strictly increasing".into()));
        }
        Ok(PlaneWaveScheme { angles })
    }

    /// `count` angles evenly spaced from `first` to `last` inclusive, rad.
    pub fn linspace(first: f64, last: f64, count: usize) -> Result<PlaneWaveScheme, TransducerError> {
        let angles = match count {
            0 => Vec::new(),
            1 => vec![first],
            n => (0..n)
                .map(|i| first + (last - first) * i as f64 / (n - 1) as f64)
                .collect(),
        };
        Self::new(angles)
    }

    pub fn broadside() -> PlaneWaveScheme {
        PlaneWaveScheme { angles: vec![0.0] }
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }
}

/// Smallest projection of any element center onto the steering direction.
pub fn min_aperture_projection(spec: &TransducerSpec, angle: f64) -> f64 {
    let k = spec.steering_direction(angle);
    (0..spec.num_elements)
        .map(|e| spec.arc_point(spec.element_angle(e)).dot(k))
        .fold(f64::INFINITY, f64::min)
}

/// Transmit delay (s) for a point on the array face so that all emitted rays
/// form one plane wavefront. The earliest element fires at 0.
pub fn plane_wave_delay(spec: &TransducerSpec, angle: f64, point: Vec3, c: f64) -> f64 {
    let k = spec.steering_direction(angle);
    (point.dot(k) - min_aperture_projection(spec, angle)) / c
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmittedRay {
    pub origin: Vec3,
    pub direction: Vec3,
    pub pressure: f64,
    pub emission_delay: f64,
    pub event_index: usize,
    /// Outward face normal at the origin.
    pub surface_normal: Vec3,
}

/// Plane-wave ray source with per-event delay offsets precomputed.
#[derive(Debug, Clone)]
pub struct Emitter<'a> {
    spec: &'a TransducerSpec,
    scheme: &'a PlaneWaveScheme,
    directions: Vec<Vec3>,
    min_projection: Vec<f64>,
    rays_per_element: f64,
    speed_of_sound: f64,
}

impl<'a> Emitter<'a> {
    pub fn new(spec: &'a TransducerSpec, scheme: &'a PlaneWaveScheme, rays_per_element: usize, speed_of_sound: f64) -> Self {
        Emitter {
            spec,
            scheme,
            directions: scheme.angles().iter().map(|&a| spec.steering_direction(a)).collect(),
            min_projection: scheme.angles().iter().map(|&a| min_aperture_projection(spec, a)).collect(),
            rays_per_element: rays_per_element as f64,
            speed_of_sound,
        }
    }

    /// Draws one ray: uniform position on the face (arc between the outer
    /// element centers × elevational strip), uniform event, cosine-weighted
    /// pressure normalized by the per-element ray budget.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> EmittedRay {
        let half_arc = self.spec.opening_angle / 2.0;
        let phi = if half_arc > 0.0 {
            rng.random_range(-half_arc..=half_arc)
        } else {
            0.0
        };
        let half_elev = self.spec.elevational_extent / 2.0;
        let elev = rng.random_range(-half_elev..=half_elev);
        let event_index = rng.random_range(0..self.scheme.len());

        let origin = self.spec.arc_point(phi) + self.spec.elevation() * elev;
        let normal = self.spec.arc_normal(phi);
        let direction = self.directions[event_index];
        let delay = (origin.dot(direction) - self.min_projection[event_index]) / self.speed_of_sound;
        EmittedRay {
            origin,
            direction,
            pressure: direction.dot(normal).max(0.0) / self.rays_per_element,
            emission_delay: delay.max(0.0),
            event_index,
            surface_normal: normal,
        }
    }
}

/// Convenience wrapper around [`Emitter::sample`].
pub fn sample_emission<R: Rng + ?Sized>(
    spec: &TransducerSpec,
    scheme: &PlaneWaveScheme,
    rays_per_element: usize,
    speed_of_sound: f64,
    rng: &mut R,
) -> EmittedRay {
    Emitter::new(spec, scheme, rays_per_element, speed_of_sound).sample(rng)
}

/// Receive sensitivity for a ray arriving at an element. `toward_source` is
/// the unit direction from the element back along the arriving ray, so an
/// on-axis echo has `toward_source == element_normal`.
pub fn receive_directivity(spec: &TransducerSpec, toward_source: Vec3, element_normal: Vec3) -> f64 {
    let alpha = element_normal.angle_to(toward_source).abs();
    let (main, cutoff) = (spec.main_beam_angle, spec.cutoff_angle);
    if alpha > cutoff {
        0.0
    } else if alpha <= main {
        1.0
    } else {
        // cutoff > main here, otherwise one of the branches above applies.
        (cutoff - alpha) / (cutoff - main)
    }
}

/// Uniformly chosen receive element and its selection probability.
pub fn sample_receive_target<R: Rng + ?Sized>(spec: &TransducerSpec, rng: &mut R) -> (ElementGeometry, f64) {
    let e = rng.random_range(0..spec.num_elements);
    (
        element_geometry(spec, e).expect("index in range"),
        1.0 / spec.num_elements as f64,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn deg(d: f64) -> f64 {
        d.to_radians()
    }

    fn probe(n: usize) -> TransducerSpec {
        TransducerSpec::convex(n, 0.06, deg(70.0), 0.004, 5e6, deg(2.0), deg(2.0)).unwrap()
    }

    #[test]
    fn middle_element_on_axis() {
        let spec = probe(127);
        let g = element_geometry(&spec, 63).unwrap();
        assert!(g.center.length() < 1e-15);
        assert!((g.normal - spec.axis).length() < 1e-15);
    }

    #[test]
    fn first_element_tilted_by_half_opening() {
        let spec = probe(128);
        let g = element_geometry(&spec, 0).unwrap();
        let tilt = g.normal.x.atan2(g.normal.z);
        assert!((tilt - deg(-35.0)).abs() < 1e-12);
        assert!(((g.center - (spec.center - spec.axis * spec.radius)).length() - spec.radius).abs() < 1e-12);
    }

    #[test]
    fn uniform_pitch_along_arc() {
        let spec = probe(128);
        let els = spec.elements();
        let expected = spec.radius * spec.opening_angle / 127.0;
        for w in els.windows(2) {
            assert!((w[1].lateral_arc_position - w[0].lateral_arc_position - expected).abs() < 1e-12);
            // Chord is slightly shorter than the arc.
            let chord = (w[1].center - w[0].center).length();
            assert!(chord <= expected && expected - chord < 1e-8);
        }
    }

    #[test]
    fn out_of_range_element() {
        let spec = probe(4);
        assert_eq!(
            element_geometry(&spec, 4),
            Err(TransducerError::ElementOutOfRange { index: 4, count: 4 })
        );
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(TransducerSpec::convex(0, 0.06, 1.0, 0.004, 5e6, 0.0, 0.1).is_err());
        assert!(TransducerSpec::convex(8, -1.0, 1.0, 0.004, 5e6, 0.0, 0.1).is_err());
        assert!(TransducerSpec::convex(8, 0.06, 1.0, 0.004, 5e6, 0.2, 0.1).is_err());
        assert!(TransducerSpec::convex(8, 0.06, 1.0, 0.0, 5e6, 0.0, 0.1).is_err());
    }

    #[test]
    fn broadside_delays_vanish_on_linear_layout() {
        let spec = TransducerSpec::linear_equivalent(128, 3e-4, 0.004, 5e6, deg(2.0), deg(2.0)).unwrap();
        for g in spec.elements() {
            assert!(plane_wave_delay(&spec, 0.0, g.center, 1540.0).abs() < 1e-12);
        }
    }

    #[test]
    fn steered_delay_matches_hand_value() {
        let spec = TransducerSpec::linear_equivalent(128, 3e-4, 0.004, 5e6, deg(2.0), deg(2.0)).unwrap();
        let first = element_geometry(&spec, 0).unwrap();
        let point = first.center + spec.lateral * 0.010;
        let d = plane_wave_delay(&spec, deg(30.0), point, 1540.0);
        // 0.010 * sin(30°) / 1540
        assert!((d - 3.246_753_246_753e-6).abs() < 1e-12, "{d}");
    }

    #[test]
    fn delays_have_zero_minimum() {
        let spec = probe(128);
        let scheme = PlaneWaveScheme::linspace(deg(-30.0), deg(30.0), 25).unwrap();
        for &a in scheme.angles() {
            let delays: Vec<f64> = spec.elements().iter().map(|g| plane_wave_delay(&spec, a, g.center, 1540.0)).collect();
            let min = delays.iter().cloned().fold(f64::INFINITY, f64::min);
            assert_eq!(min, 0.0);
            assert!(delays.iter().all(|&d| d >= 0.0));
        }
    }

    #[test]
    fn scheme_validation() {
        assert!(PlaneWaveScheme::new(vec![]).is_err());
        assert!(PlaneWaveScheme::new(vec![0.1, 0.1]).is_err());
        assert!(PlaneWaveScheme::new(vec![0.2, 0.1]).is_err());
        let s = PlaneWaveScheme::linspace(deg(-30.0), deg(30.0), 25).unwrap();
        assert_eq!(s.len(), 25);
        assert_eq!(s.angles()[0], deg(-30.0));
        assert!((s.angles()[24] - deg(30.0)).abs() < 1e-15);
        assert!((s.angles()[12]).abs() < 1e-15);
    }

    #[test]
    fn apex_broadside_weight() {
        let spec = probe(1);
        let spec = TransducerSpec { opening_angle: 0.0, ..spec };
        let scheme = PlaneWaveScheme::broadside();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let ray = sample_emission(&spec, &scheme, 1000, 1540.0, &mut rng);
        assert_eq!(ray.pressure, 1.0 / 1000.0);
        assert_eq!(ray.emission_delay, 0.0);
        assert_eq!(ray.event_index, 0);
    }

    #[test]
    fn grazing_emission_has_zero_pressure() {
        // Half-circle face: the edge normals are perpendicular to the axis.
        let spec = TransducerSpec::convex(2, 0.01, std::f64::consts::PI, 0.004, 5e6, 0.0, 0.1).unwrap();
        let edge = spec.arc_normal(spec.element_angle(0));
        assert!(spec.steering_direction(0.0).dot(edge).abs() < 1e-15);
        let scheme = PlaneWaveScheme::broadside();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let emitter = Emitter::new(&spec, &scheme, 10, 1540.0);
        for _ in 0..1000 {
            let ray = emitter.sample(&mut rng);
            assert!(ray.pressure >= 0.0);
            assert!((ray.pressure - ray.surface_normal.dot(ray.direction).max(0.0) / 10.0).abs() < 1e-15);
        }
    }

    #[test]
    fn emission_delays_are_nonnegative() {
        let spec = probe(128);
        let scheme = PlaneWaveScheme::linspace(deg(-30.0), deg(30.0), 25).unwrap();
        let emitter = Emitter::new(&spec, &scheme, 100, 1540.0);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..10_000 {
            let ray = emitter.sample(&mut rng);
            assert!(ray.emission_delay >= 0.0);
            assert!(ray.event_index < 25);
            assert!(ray.direction.is_unit());
        }
    }

    #[test]
    fn directivity_ramp() {
        let spec = TransducerSpec::convex(8, 0.06, 1.0, 0.004, 5e6, deg(1.0), deg(3.0)).unwrap();
        let n = Vec3::Z;
        let at = |a: f64| receive_directivity(&spec, Vec3::new(a.sin(), 0.0, a.cos()), n);
        assert_eq!(at(0.0), 1.0);
        assert!((at(deg(2.0)) - 0.5).abs() < 1e-12);
        assert_eq!(at(deg(3.5)), 0.0);
        assert_eq!(at(deg(-0.5)), 1.0);
    }

    #[test]
    fn degenerate_ramp_is_a_step() {
        let spec = probe(8);
        let n = Vec3::Z;
        let at = |a: f64| receive_directivity(&spec, Vec3::new(a.sin(), 0.0, a.cos()), n);
        assert_eq!(at(deg(1.999)), 1.0);
        assert_eq!(at(deg(2.001)), 0.0);
        assert_eq!(at(deg(5.0)), 0.0);
    }

    #[test]
    fn single_element_target() {
        let spec = probe(1);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..10 {
            let (g, p) = sample_receive_target(&spec, &mut rng);
            assert_eq!(g.index, 0);
            assert_eq!(p, 1.0);
        }
    }

    #[test]
    fn target_matches_geometry() {
        let spec = probe(16);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let (g, p) = sample_receive_target(&spec, &mut rng);
            assert_eq!(g, element_geometry(&spec, g.index).unwrap());
            assert_eq!(p, 1.0 / 16.0);
        }
    }

    #[test]
    fn mirrored_elements() {
        let spec = probe(128);
        for e in 0..64 {
            let a = element_geometry(&spec, e).unwrap();
            let b = element_geometry(&spec, 127 - e).unwrap();
            assert!((a.center.x + b.center.x).abs() < 1e-15);
            assert!((a.center.z - b.center.z).abs() < 1e-15);
            assert!((a.normal.x + b.normal.x).abs() < 1e-15);
            assert!((a.normal.z - b.normal.z).abs() < 1e-15);
        }
    }
}
