//! Uniform-planar-array steering vectors and the multipath channel vector.
//!
//! The array is an `m_y x m_z` grid of elements at half-wavelength spacing,
//! so the per-element phase step reduces to `pi` times the direction
//! cosines. The full array response factorizes as a Kronecker product of
//! the vertical and horizontal linear-array responses, with the vertical
//! factor outermost. Elevation is measured from the +z axis, azimuth in the
//! horizontal plane of the array frame.

use num_complex::Complex64;

use super::{PathSet, SceneError, SceneSpec};

/// Horizontal steering vector; element `p` has phase
/// `pi * p * sin(phi_el) * sin(phi_az)`.
pub fn steering_vector_y(phi_az: f64, phi_el: f64, m_y: usize) -> Vec<Complex64> {
    let step = std::f64::consts::PI * phi_el.sin() * phi_az.sin();
    (0..m_y)
        .map(|p| Complex64::from_polar(1.0, step * p as f64))
        .collect()
}

/// Vertical steering vector; element `q` has phase `pi * q * cos(phi_el)`.
pub fn steering_vector_z(phi_el: f64, m_z: usize) -> Vec<Complex64> {
    let step = std::f64::consts::PI * phi_el.cos();
    (0..m_z)
        .map(|q| Complex64::from_polar(1.0, step * q as f64))
        .collect()
}

/// Full planar-array response `a_z ⊗ a_y`, length `m_y * m_z`.
///
/// Element `q * m_y + p` pairs vertical index `q` with horizontal index `p`.
pub fn array_response(phi_az: f64, phi_el: f64, m_y: usize, m_z: usize) -> Vec<Complex64> {
    let ay = steering_vector_y(phi_az, phi_el, m_y);
    let az = steering_vector_z(phi_el, m_z);
    let mut out = Vec::with_capacity(m_y * m_z);
    for zq in &az {
        for yp in &ay {
            out.push(zq * yp);
        }
    }
    out
}

/// Sums the per-path contributions into the channel vector of one
/// subcarrier (1-based index `n`).
///
/// Each path contributes `sqrt(rho / N_SC) * exp(j 2 pi n tau B / N_SC)`
/// times its array response.
pub fn channel_vector(
    paths: &PathSet,
    spec: &SceneSpec,
    subcarrier_index: usize,
) -> Result<Vec<Complex64>, SceneError> {
    let n_sc = spec.n_subcarriers;
    if subcarrier_index < 1 || subcarrier_index > n_sc {
        return Err(SceneError::BadSubcarrier {
            index: subcarrier_index,
            n_subcarriers: n_sc,
        });
    }
    if paths.paths.is_empty() {
        return Err(SceneError::EmptyPathSet);
    }
    let m = spec.antenna_count();
    let mut h = vec![Complex64::new(0.0, 0.0); m];
    let phase_scale = 2.0 * std::f64::consts::PI * subcarrier_index as f64 / n_sc as f64;
    for (i, path) in paths.paths.iter().enumerate() {
        if !path.gain.is_finite() || !path.delay.is_finite() {
            return Err(SceneError::NonFinitePath { index: i });
        }
        let amp = (path.gain / n_sc as f64).sqrt();
        let rotation = Complex64::from_polar(amp, phase_scale * path.delay * spec.bandwidth);
        let response = array_response(path.azimuth, path.elevation, spec.m_y, spec.m_z);
        for (acc, a) in h.iter_mut().zip(response) {
            *acc += rotation * a;
        }
    }
    Ok(h)
}
