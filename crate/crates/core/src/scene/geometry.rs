//! Planar geometry helpers for path tracing.
//!
//! Blockers and reflectors are vertical walls standing on the ground plane,
//! described by their 2-D base segments. A ray between two 3-D points is
//! blocked by a wall when its ground-plane projection crosses the base
//! segment and the ray height at the crossing is below the wall top.

/// 2-D line segment between `a` and `b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub a: [f64; 2],
    pub b: [f64; 2],
}

impl Segment {
    pub fn new(a: [f64; 2], b: [f64; 2]) -> Self {
        Self { a, b }
    }

    pub fn length(&self) -> f64 {
        let dx = self.b[0] - self.a[0];
        let dy = self.b[1] - self.a[1];
        (dx * dx + dy * dy).sqrt()
    }
}

fn cross(ax: f64, ay: f64, bx: f64, by: f64) -> f64 {
    ax * by - ay * bx
}

/// Intersection of segments `p` and `q`, as parameters `(t, u)` along each.
///
/// Returns `None` for parallel or non-crossing segments. Endpoint touches
/// count as crossings.
pub fn segment_intersection(p: &Segment, q: &Segment) -> Option<(f64, f64)> {
    let dpx = p.b[0] - p.a[0];
    let dpy = p.b[1] - p.a[1];
    let dqx = q.b[0] - q.a[0];
    let dqy = q.b[1] - q.a[1];
    let denom = cross(dpx, dpy, dqx, dqy);
    if denom.abs() < 1e-15 {
        return None;
    }
    let rx = q.a[0] - p.a[0];
    let ry = q.a[1] - p.a[1];
    let t = cross(rx, ry, dqx, dqy) / denom;
    let u = cross(rx, ry, dpx, dpy) / denom;
    if (0.0..=1.0).contains(&t) && (0.0..=1.0).contains(&u) {
        Some((t, u))
    } else {
        None
    }
}

/// Mirrors point `p` across the infinite line through `axis`.
pub fn mirror_across(p: [f64; 2], axis: &Segment) -> [f64; 2] {
    let dx = axis.b[0] - axis.a[0];
    let dy = axis.b[1] - axis.a[1];
    let len2 = dx * dx + dy * dy;
    debug_assert!(len2 > 0.0, "degenerate mirror axis");
    let px = p[0] - axis.a[0];
    let py = p[1] - axis.a[1];
    // Projection of p onto the axis direction.
    let s = (px * dx + py * dy) / len2;
    let foot = [axis.a[0] + s * dx, axis.a[1] + s * dy];
    [2.0 * foot[0] - p[0], 2.0 * foot[1] - p[1]]
}

/// Whether the 3-D segment `from -> to` passes a wall of given base segment
/// and height without being cut off.
///
/// `from`/`to` are `[x, y, z]`. The wall occupies heights `0..=height`.
pub fn ray_clears_wall(from: [f64; 3], to: [f64; 3], base: &Segment, height: f64) -> bool {
    let ray = Segment::new([from[0], from[1]], [to[0], to[1]]);
    match segment_intersection(&ray, base) {
        None => true,
        Some((t, _)) => {
            let z = from[2] + t * (to[2] - from[2]);
            z > height
        }
    }
}
