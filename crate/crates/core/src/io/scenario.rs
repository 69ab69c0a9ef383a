//! Scenario file codec: the full [`SceneSpec`] as `key = value` pairs.
//!
//! Angles are degrees in the file and radians in memory. `blocker` and
//! `reflector` keys repeat, one wall per line, as `x1, y1, x2, y2` plus the
//! wall's height or loss.

use std::path::Path;

use super::kv::{format_f64, format_floats, KvFile};
use super::IoError;
use crate::scene::{Blocker, GridSpec, PathGainModel, Reflector, SceneSpec, Segment};

pub fn read_scenario(path: &Path) -> Result<SceneSpec, IoError> {
    scenario_from_kv(&KvFile::read(path)?)
}

pub fn write_scenario(path: &Path, spec: &SceneSpec) -> Result<(), IoError> {
    scenario_to_kv(spec).write(path)
}

pub fn scenario_from_kv(kv: &KvFile) -> Result<SceneSpec, IoError> {
    let bs = kv.require_floats("bs_position", 3)?;
    let origin = kv.require_floats("grid_origin", 2)?;
    let spec = SceneSpec {
        carrier_frequency: kv.require_parsed("carrier_frequency_hz")?,
        bandwidth: kv.require_parsed("bandwidth_hz")?,
        m_y: kv.require_parsed("array_m_y")?,
        m_z: kv.require_parsed("array_m_z")?,
        n_subcarriers: kv.require_parsed("n_subcarriers")?,
        n_paths_max: kv.require_parsed("n_paths_max")?,
        bs_position: [bs[0], bs[1], bs[2]],
        bs_orientation: kv.require_parsed::<f64>("bs_orientation_deg")?.to_radians(),
        user_grid: GridSpec {
            origin: [origin[0], origin[1]],
            rows: kv.require_parsed("grid_rows")?,
            cols: kv.require_parsed("grid_cols")?,
            spacing: kv.require_parsed("grid_spacing")?,
            height: kv.require_parsed("user_height")?,
        },
        blockers: kv
            .get_all("blocker")
            .into_iter()
            .map(|v| {
                let f = super::kv::parse_floats("blocker", v, Some(5))?;
                Ok(Blocker {
                    base: Segment::new([f[0], f[1]], [f[2], f[3]]),
                    height: f[4],
                })
            })
            .collect::<Result<_, IoError>>()?,
        reflectors: kv
            .get_all("reflector")
            .into_iter()
            .map(|v| {
                let f = super::kv::parse_floats("reflector", v, Some(5))?;
                Ok(Reflector {
                    base: Segment::new([f[0], f[1]], [f[2], f[3]]),
                    loss: f[4],
                })
            })
            .collect::<Result<_, IoError>>()?,
        path_gain: PathGainModel {
            reference_gain: kv.require_parsed("path_gain_reference")?,
            exponent: kv.require_parsed("path_loss_exponent")?,
        },
        rng_seed: kv.get_parsed("rng_seed")?.unwrap_or(0),
    };
    spec.validate()?;
    Ok(spec)
}

pub fn scenario_to_kv(spec: &SceneSpec) -> KvFile {
    let mut kv = KvFile::new();
    kv.push("bs_position", format_floats(&spec.bs_position));
    kv.push("bs_orientation_deg", format_f64(spec.bs_orientation.to_degrees()));
    kv.push("array_m_y", spec.m_y);
    kv.push("array_m_z", spec.m_z);
    kv.push("carrier_frequency_hz", format_f64(spec.carrier_frequency));
    kv.push("bandwidth_hz", format_f64(spec.bandwidth));
    kv.push("n_subcarriers", spec.n_subcarriers);
    kv.push("n_paths_max", spec.n_paths_max);
    kv.push("grid_origin", format_floats(&spec.user_grid.origin));
    kv.push("grid_rows", spec.user_grid.rows);
    kv.push("grid_cols", spec.user_grid.cols);
    kv.push("grid_spacing", format_f64(spec.user_grid.spacing));
    kv.push("user_height", format_f64(spec.user_grid.height));
    kv.push("path_gain_reference", format_f64(spec.path_gain.reference_gain));
    kv.push("path_loss_exponent", format_f64(spec.path_gain.exponent));
    for b in &spec.blockers {
        kv.push(
            "blocker",
            format_floats(&[b.base.a[0], b.base.a[1], b.base.b[0], b.base.b[1], b.height]),
        );
    }
    for r in &spec.reflectors {
        kv.push(
            "reflector",
            format_floats(&[r.base.a[0], r.base.a[1], r.base.b[0], r.base.b[1], r.loss]),
        );
    }
    kv.push("rng_seed", spec.rng_seed);
    kv
}
