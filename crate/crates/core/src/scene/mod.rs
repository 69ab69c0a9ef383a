//! Synthetic CSI dataset generation from a parametric deployment.
//!
//! A scene is one base station with a planar antenna array, a rectangular
//! grid of candidate user positions, plus vertical walls: blockers that cut
//! rays off and reflectors that contribute single-bounce mirror-image
//! paths. Path gains follow a distance power law, delays are geometric.
//! The model is fully deterministic, so identical scenes always produce
//! identical datasets.

mod channel;
mod geometry;

pub use channel::{array_response, channel_vector, steering_vector_y, steering_vector_z};
pub use geometry::{mirror_across, ray_clears_wall, segment_intersection, Segment};

use thiserror::Error;

/// Propagation speed used for delays, in meters per second.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("invalid scene: {0}")]
    InvalidSpec(String),
    #[error("subcarrier index {index} outside 1..={n_subcarriers}")]
    BadSubcarrier { index: usize, n_subcarriers: usize },
    #[error("path {index} has non-finite gain or delay")]
    NonFinitePath { index: usize },
    #[error("empty path set")]
    EmptyPathSet,
    #[error("user position ({0}, {1}) outside the user grid")]
    OutsideGrid(f64, f64),
    #[error("no grid location has propagation coverage")]
    NoCoverage,
}

/// Rectangular grid of candidate user positions at a fixed height.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub origin: [f64; 2],
    pub rows: usize,
    pub cols: usize,
    pub spacing: f64,
    pub height: f64,
}

impl GridSpec {
    /// Position of the grid point in `row`, `col` (columns advance x, rows
    /// advance y).
    pub fn position(&self, row: usize, col: usize) -> [f64; 2] {
        [
            self.origin[0] + col as f64 * self.spacing,
            self.origin[1] + row as f64 * self.spacing,
        ]
    }

    /// Axis-aligned bounding box as `(min, max)` corners.
    pub fn bounding_box(&self) -> ([f64; 2], [f64; 2]) {
        let max = [
            self.origin[0] + (self.cols - 1) as f64 * self.spacing,
            self.origin[1] + (self.rows - 1) as f64 * self.spacing,
        ];
        (self.origin, max)
    }

    fn contains(&self, p: [f64; 2]) -> bool {
        let (lo, hi) = self.bounding_box();
        let eps = 1e-9;
        p[0] >= lo[0] - eps && p[0] <= hi[0] + eps && p[1] >= lo[1] - eps && p[1] <= hi[1] + eps
    }
}

/// Vertical screen standing on the ground that cuts rays off.
#[derive(Debug, Clone, PartialEq)]
pub struct Blocker {
    pub base: Segment,
    pub height: f64,
}

/// Vertical reflecting wall; `loss` is the power attenuation factor in
/// `(0, 1]` applied to a bounced path.
#[derive(Debug, Clone, PartialEq)]
pub struct Reflector {
    pub base: Segment,
    pub loss: f64,
}

/// Distance power law for path gains: `rho = reference_gain * dist^(-exponent)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathGainModel {
    pub reference_gain: f64,
    pub exponent: f64,
}

/// Full parametric deployment: RF parameters, array geometry, user grid and
/// walls.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub carrier_frequency: f64,
    pub bandwidth: f64,
    pub m_y: usize,
    pub m_z: usize,
    pub n_subcarriers: usize,
    pub n_paths_max: usize,
    pub bs_position: [f64; 3],
    /// Azimuth rotation of the array frame; broadside points along +x when
    /// zero.
    pub bs_orientation: f64,
    pub user_grid: GridSpec,
    pub blockers: Vec<Blocker>,
    pub reflectors: Vec<Reflector>,
    pub path_gain: PathGainModel,
    /// Reserved for stochastic scene extensions; generation itself is
    /// deterministic and does not consume it.
    pub rng_seed: u64,
}

impl SceneSpec {
    /// Total antenna elements `M = m_y * m_z`.
    pub fn antenna_count(&self) -> usize {
        self.m_y * self.m_z
    }

    /// Carrier wavelength in meters; element spacing is half of this.
    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_frequency
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        let fail = |msg: String| Err(SceneError::InvalidSpec(msg));
        if self.m_y < 1 || self.m_z < 1 {
            return fail(format!("antenna counts must be >= 1, got {}x{}", self.m_y, self.m_z));
        }
        if !(self.carrier_frequency > 0.0) {
            return fail(format!("carrier_frequency must be > 0, got {}", self.carrier_frequency));
        }
        if !(self.bandwidth > 0.0) {
            return fail(format!("bandwidth must be > 0, got {}", self.bandwidth));
        }
        if self.n_subcarriers < 1 {
            return fail("n_subcarriers must be >= 1".into());
        }
        if self.n_paths_max < 1 {
            return fail("n_paths_max must be >= 1".into());
        }
        if self.user_grid.rows < 1 || self.user_grid.cols < 1 {
            return fail("user grid must have at least one row and column".into());
        }
        if !(self.user_grid.spacing > 0.0) {
            return fail(format!("grid spacing must be > 0, got {}", self.user_grid.spacing));
        }
        for (i, b) in self.blockers.iter().enumerate() {
            if b.base.length() <= 0.0 {
                return fail(format!("blocker {i} has a degenerate base segment"));
            }
            if !(b.height > 0.0) {
                return fail(format!("blocker {i} height must be > 0, got {}", b.height));
            }
        }
        for (i, r) in self.reflectors.iter().enumerate() {
            if r.base.length() <= 0.0 {
                return fail(format!("reflector {i} has a degenerate base segment"));
            }
            if !(r.loss > 0.0 && r.loss <= 1.0) {
                return fail(format!("reflector {i} loss must be in (0, 1], got {}", r.loss));
            }
        }
        if !(self.path_gain.reference_gain > 0.0) {
            return fail("reference gain must be > 0".into());
        }
        if !(self.path_gain.exponent > 0.0) {
            return fail(format!(
                "path-loss exponent must be > 0, got {}",
                self.path_gain.exponent
            ));
        }
        Ok(())
    }
}

/// One propagation path: linear power gain, delay in seconds, arrival
/// angles in the array frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    pub gain: f64,
    pub delay: f64,
    pub azimuth: f64,
    pub elevation: f64,
}

/// Paths reaching one user, strongest first; `los` records whether the
/// direct ray is unobstructed.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSet {
    pub paths: Vec<Path>,
    pub los: bool,
}

/// One labeled example: stacked real and imaginary channel parts, true 2-D
/// position, LOS flag and the grid index it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct CsiSample {
    pub features: Vec<f64>,
    pub position: [f64; 2],
    pub los: bool,
    pub location_id: usize,
}

fn arrival_angles(spec: &SceneSpec, direction: [f64; 3]) -> (f64, f64) {
    let (sin_o, cos_o) = spec.bs_orientation.sin_cos();
    let lx = cos_o * direction[0] + sin_o * direction[1];
    let ly = -sin_o * direction[0] + cos_o * direction[1];
    let lz = direction[2];
    let r = (lx * lx + ly * ly + lz * lz).sqrt();
    let azimuth = ly.atan2(lx);
    let elevation = (lz / r).clamp(-1.0, 1.0).acos();
    (azimuth, elevation)
}

fn clears_all_blockers(spec: &SceneSpec, from: [f64; 3], to: [f64; 3]) -> bool {
    spec.blockers
        .iter()
        .all(|b| ray_clears_wall(from, to, &b.base, b.height))
}

fn path_from_geometry(spec: &SceneSpec, length: f64, direction: [f64; 3], loss: f64) -> Path {
    let (azimuth, elevation) = arrival_angles(spec, direction);
    Path {
        gain: spec.path_gain.reference_gain * length.powf(-spec.path_gain.exponent) * loss,
        delay: length / SPEED_OF_LIGHT,
        azimuth,
        elevation,
    }
}

/// Traces direct and single-bounce paths from the base station to `user`.
///
/// Returns `Ok(None)` when the user is fully shadowed; callers skip such
/// users. The direct path is emitted iff it clears every blocker; each
/// reflector contributes at most one mirror-image path whose both legs must
/// be unobstructed. At most `n_paths_max` paths are kept, strongest first.
pub fn trace_paths(user: [f64; 2], spec: &SceneSpec) -> Result<Option<PathSet>, SceneError> {
    if !spec.user_grid.contains(user) {
        return Err(SceneError::OutsideGrid(user[0], user[1]));
    }
    let bs = spec.bs_position;
    let user3 = [user[0], user[1], spec.user_grid.height];
    let mut paths = Vec::new();

    let los = clears_all_blockers(spec, bs, user3);
    if los {
        let d = [user3[0] - bs[0], user3[1] - bs[1], user3[2] - bs[2]];
        let length = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
        paths.push(path_from_geometry(spec, length, d, 1.0));
    }

    for reflector in &spec.reflectors {
        let mirrored = mirror_across(user, &reflector.base);
        let mirrored3 = [mirrored[0], mirrored[1], user3[2]];
        // The unfolded ray runs straight from the BS to the mirrored user;
        // where it crosses the reflector base is the bounce point.
        let unfolded = Segment::new([bs[0], bs[1]], mirrored);
        let Some((t, _)) = segment_intersection(&unfolded, &reflector.base) else {
            continue;
        };
        let d = [
            mirrored3[0] - bs[0],
            mirrored3[1] - bs[1],
            mirrored3[2] - bs[2],
        ];
        let length = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
        let bounce = [
            bs[0] + t * (mirrored3[0] - bs[0]),
            bs[1] + t * (mirrored3[1] - bs[1]),
            bs[2] + t * (mirrored3[2] - bs[2]),
        ];
        if !clears_all_blockers(spec, bs, bounce) || !clears_all_blockers(spec, bounce, user3) {
            continue;
        }
        paths.push(path_from_geometry(spec, length, d, reflector.loss));
    }

    if paths.is_empty() {
        return Ok(None);
    }
    paths.sort_by(|a, b| b.gain.partial_cmp(&a.gain).unwrap());
    paths.truncate(spec.n_paths_max);
    Ok(Some(PathSet { paths, los }))
}

/// Evaluates the channel for every reachable grid user and packs the result
/// into labeled samples with `[Re(h); Im(h)]` feature layout.
pub fn generate_dataset(
    spec: &SceneSpec,
    subcarrier_index: usize,
) -> Result<Vec<CsiSample>, SceneError> {
    spec.validate()?;
    let mut samples = Vec::with_capacity(spec.user_grid.rows * spec.user_grid.cols);
    let mut dropped = 0usize;
    for row in 0..spec.user_grid.rows {
        for col in 0..spec.user_grid.cols {
            let location_id = row * spec.user_grid.cols + col;
            let position = spec.user_grid.position(row, col);
            let Some(paths) = trace_paths(position, spec)? else {
                dropped += 1;
                continue;
            };
            let h = channel_vector(&paths, spec, subcarrier_index)?;
            let m = h.len();
            let mut features = Vec::with_capacity(2 * m);
            features.extend(h.iter().map(|c| c.re));
            features.extend(h.iter().map(|c| c.im));
            samples.push(CsiSample {
                features,
                position,
                los: paths.los,
                location_id,
            });
        }
    }
    if dropped > 0 {
        log::info!("dropped {dropped} grid locations without propagation coverage");
    }
    if samples.is_empty() {
        return Err(SceneError::NoCoverage);
    }
    Ok(samples)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Open scene: BS on a mast, no walls.
    fn open_scene() -> SceneSpec {
        SceneSpec {
            carrier_frequency: 3.5e9,
            bandwidth: 20e6,
            m_y: 4,
            m_z: 2,
            n_subcarriers: 64,
            n_paths_max: 5,
            bs_position: [0.0, 0.0, 6.0],
            bs_orientation: 0.0,
            user_grid: GridSpec {
                origin: [5.0, -5.0],
                rows: 5,
                cols: 5,
                spacing: 2.5,
                height: 1.5,
            },
            blockers: vec![],
            reflectors: vec![],
            path_gain: PathGainModel { reference_gain: 1.0, exponent: 2.5 },
            rng_seed: 0,
        }
    }

    #[test]
    fn clear_direct_segment_gives_single_los_path() {
        let spec = open_scene();
        let set = trace_paths([10.0, 0.0], &spec).unwrap().unwrap();
        assert_eq!(set.paths.len(), 1);
        assert!(set.los);
    }

    #[test]
    fn direct_path_delay_is_distance_over_c() {
        let spec = open_scene();
        let set = trace_paths([10.0, 0.0], &spec).unwrap().unwrap();
        let expect = (100.0_f64 + 20.25).sqrt() / SPEED_OF_LIGHT;
        assert!((set.paths[0].delay - expect).abs() < 1e-18);
    }

    #[test]
    fn blocked_user_with_reflector_gets_single_nlos_path() {
        let mut spec = open_scene();
        // Screen between BS and the whole grid; one reflecting wall south.
        spec.blockers.push(Blocker {
            base: Segment::new([3.0, -20.0], [3.0, 20.0]),
            height: 50.0,
        });
        spec.reflectors.push(Reflector {
            base: Segment::new([-5.0, -30.0], [20.0, -30.0]),
            loss: 0.3,
        });
        // The bounce via y=-30 passes x=3 far south of the screen only if
        // the screen is finite; keep it finite below.
        spec.blockers[0].base = Segment::new([3.0, -8.0], [3.0, 8.0]);
        let set = trace_paths([10.0, 0.0], &spec).unwrap().unwrap();
        assert!(!set.los);
        assert_eq!(set.paths.len(), 1);
        // Bounced path length equals BS -> mirrored-user distance.
        let mirrored: [f64; 3] = [10.0, -60.0, 1.5];
        let d = (mirrored[0] * mirrored[0]
            + mirrored[1] * mirrored[1]
            + (mirrored[2] - 6.0) * (mirrored[2] - 6.0))
            .sqrt();
        assert!((set.paths[0].delay - d / SPEED_OF_LIGHT).abs() < 1e-15);
        assert!((set.paths[0].gain - 0.3 * d.powf(-2.5)).abs() < 1e-12);
    }

    #[test]
    fn fully_shadowed_user_reports_no_coverage() {
        let mut spec = open_scene();
        spec.blockers.push(Blocker {
            base: Segment::new([3.0, -100.0], [3.0, 100.0]),
            height: 100.0,
        });
        assert!(trace_paths([10.0, 0.0], &spec).unwrap().is_none());
        assert!(matches!(generate_dataset(&spec, 1), Err(SceneError::NoCoverage)));
    }

    #[test]
    fn outside_grid_position_is_rejected() {
        let spec = open_scene();
        assert!(matches!(
            trace_paths([100.0, 0.0], &spec),
            Err(SceneError::OutsideGrid(..))
        ));
    }

    #[test]
    fn paths_are_sorted_strongest_first_and_truncated() {
        let mut spec = open_scene();
        spec.n_paths_max = 2;
        spec.reflectors = vec![
            Reflector { base: Segment::new([-5.0, -30.0], [30.0, -30.0]), loss: 0.9 },
            Reflector { base: Segment::new([-5.0, 25.0], [30.0, 25.0]), loss: 0.1 },
        ];
        let set = trace_paths([10.0, 0.0], &spec).unwrap().unwrap();
        assert_eq!(set.paths.len(), 2);
        assert!(set.paths[0].gain >= set.paths[1].gain);
        assert!(set.los);
    }

    #[test]
    fn dataset_covers_all_users_in_open_scene() {
        let spec = open_scene();
        let data = generate_dataset(&spec, 1).unwrap();
        assert_eq!(data.len(), 25);
        for s in &data {
            assert_eq!(s.features.len(), 2 * spec.antenna_count());
            assert!(s.los);
        }
        // Row-major location ids.
        assert_eq!(data[0].location_id, 0);
        assert_eq!(data[24].location_id, 24);
    }

    #[test]
    fn generation_is_deterministic() {
        let mut spec = open_scene();
        spec.blockers.push(Blocker {
            base: Segment::new([4.0, -3.0], [4.0, 3.0]),
            height: 7.0,
        });
        spec.reflectors.push(Reflector {
            base: Segment::new([-5.0, -20.0], [20.0, -20.0]),
            loss: 0.3,
        });
        let a = generate_dataset(&spec, 1).unwrap();
        let b = generate_dataset(&spec, 1).unwrap();
        assert_eq!(a, b);
    }

    /// Independent LOS oracle: intersects the 3-D ray with each blocker
    /// rectangle via plane algebra instead of 2-D cross products.
    fn los_oracle(spec: &SceneSpec, user: [f64; 2]) -> bool {
        let bs = spec.bs_position;
        let u = [user[0], user[1], spec.user_grid.height];
        for b in &spec.blockers {
            let e = [b.base.b[0] - b.base.a[0], b.base.b[1] - b.base.a[1], 0.0];
            let normal = [e[1], -e[0], 0.0];
            let dir = [u[0] - bs[0], u[1] - bs[1], u[2] - bs[2]];
            let denom = normal[0] * dir[0] + normal[1] * dir[1];
            if denom.abs() < 1e-12 {
                continue;
            }
            let w = [b.base.a[0] - bs[0], b.base.a[1] - bs[1]];
            let t = (normal[0] * w[0] + normal[1] * w[1]) / denom;
            if !(0.0..=1.0).contains(&t) {
                continue;
            }
            let hit = [bs[0] + t * dir[0], bs[1] + t * dir[1], bs[2] + t * dir[2]];
            let along = (e[0] * (hit[0] - b.base.a[0]) + e[1] * (hit[1] - b.base.a[1]))
                / (e[0] * e[0] + e[1] * e[1]);
            if (0.0..=1.0).contains(&along) && hit[2] <= b.height {
                return false;
            }
        }
        true
    }

    #[test]
    fn los_flag_matches_plane_intersection_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        for _ in 0..200 {
            let mut spec = open_scene();
            for _ in 0..rng.random_range(1..=3usize) {
                let x = rng.random_range(1.0..14.0);
                let y0 = rng.random_range(-8.0..4.0);
                let len = rng.random_range(1.0..8.0);
                spec.blockers.push(Blocker {
                    base: Segment::new([x, y0], [x + rng.random_range(-2.0..2.0), y0 + len]),
                    height: rng.random_range(2.0..10.0),
                });
            }
            let user = [rng.random_range(5.0..15.0), rng.random_range(-5.0..5.0)];
            match trace_paths(user, &spec).unwrap() {
                Some(set) => assert_eq!(set.los, los_oracle(&spec, user)),
                None => assert!(!los_oracle(&spec, user)),
            }
        }
    }
}
