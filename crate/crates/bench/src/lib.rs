//! Fixture builders shared by the criterion benchmarks: a reduced desk-like
//! scene, random network batches and synthetic evaluation records.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use uqloc_core::metrics::EvalRecord;
use uqloc_core::scene::{Blocker, GridSpec, PathGainModel, Reflector, Segment, SceneSpec};
use uqloc_core::{Method, PositionEstimate};

/// A scene with the desk layout (screen plus two side walls) at an
/// arbitrary grid size, so benchmarks can scale the user count.
pub fn desk_like_scene(rows: usize, cols: usize) -> SceneSpec {
    SceneSpec {
        carrier_frequency: 3.5e9,
        bandwidth: 2e7,
        m_y: 16,
        m_z: 8,
        n_subcarriers: 1024,
        n_paths_max: 3,
        bs_position: [0.0, 0.0, 3.0],
        bs_orientation: 0.0,
        user_grid: GridSpec {
            origin: [5.0, -5.9],
            rows,
            cols,
            spacing: 0.2,
            height: 1.5,
        },
        blockers: vec![Blocker {
            base: Segment::new([3.0, -0.45], [3.0, 0.45]),
            height: 3.0,
        }],
        reflectors: vec![
            Reflector {
                base: Segment::new([2.0, 6.5], [18.0, 6.5]),
                loss: 0.3,
            },
            Reflector {
                base: Segment::new([2.0, -6.5], [5.0, -6.5]),
                loss: 0.3,
            },
        ],
        path_gain: PathGainModel {
            reference_gain: 1.0,
            exponent: 2.5,
        },
        rng_seed: 0,
    }
}

/// Uniform random matrix in [-1, 1], seeded.
pub fn random_batch(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(-1.0..1.0))
}

/// Synthetic evaluation records with random errors and uncertainties.
pub fn random_records(n: usize, seed: u64) -> Vec<EvalRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|id| {
            let err = rng.random_range(0.0..2.0);
            let unc = rng.random_range(0.0..1.0);
            let estimate = PositionEstimate {
                mean: [err, 0.0],
                data_variance: [unc, unc],
                model_variance: [0.5 * unc, 0.5 * unc],
                total_variance: [1.5 * unc, 1.5 * unc],
                uncertainty_scalar: 3.0 * unc,
                s_used: 32,
                method: Method::DeepEnsemble,
            };
            EvalRecord::new(id, [0.0, 0.0], estimate, id % 3 != 0, false)
        })
        .collect()
}
