use serde::{Deserialize, Serialize};

pub type Vec2 = [f64; 2];

#[inline]
pub fn sub(a: Vec2, b: Vec2) -> Vec2 {
    [a[0] - b[0], a[1] - b[1]]
}

#[inline]
pub fn add_scaled(a: Vec2, v: Vec2, s: f64) -> Vec2 {
    [a[0] + v[0] * s, a[1] + v[1] * s]
}

#[inline]
pub fn dot(a: Vec2, b: Vec2) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

#[inline]
pub fn cross(a: Vec2, b: Vec2) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

#[inline]
pub fn norm(a: Vec2) -> f64 {
    a[0].hypot(a[1])
}

#[inline]
pub fn rotate(v: Vec2, theta: f64) -> Vec2 {
    let (s, c) = theta.sin_cos();
    [c * v[0] - s * v[1], s * v[0] + c * v[1]]
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub a: Vec2,
    pub b: Vec2,
}

impl Segment {
    pub fn new(a: Vec2, b: Vec2) -> Self {
        Self { a, b }
    }

    pub fn closest_point(&self, p: Vec2) -> Vec2 {
        let ab = sub(self.b, self.a);
        let len2 = dot(ab, ab);
        if len2 == 0.0 {
            return self.a;
        }
        let t = (dot(sub(p, self.a), ab) / len2).clamp(0.0, 1.0);
        [self.a[0] + t * ab[0], self.a[1] + t * ab[1]]
    }

    /// Distance along the ray `origin + t·dir` (unit `dir`) to this segment.
    pub fn ray_hit(&self, origin: Vec2, dir: Vec2) -> Option<f64> {
        let e = sub(self.b, self.a);
        let denom = cross(dir, e);
        if denom.abs() < 1e-12 {
            return None;
        }
        let w = sub(self.a, origin);
        let t = cross(w, e) / denom;
        let u = cross(w, dir) / denom;
        (t >= 0.0 && (0.0..=1.0).contains(&u)).then_some(t)
    }
}

/// Push a disc of radius `r` at `p` out of a segment. Returns the corrected
/// centre, or `None` if there was no overlap.
pub fn resolve_disc_segment(p: Vec2, r: f64, seg: &Segment) -> Option<Vec2> {
    let q = seg.closest_point(p);
    let d = sub(p, q);
    let dist = norm(d);
    if dist >= r {
        return None;
    }
    if dist < 1e-12 {
        // Centre exactly on the wall: push along the segment normal.
        let e = sub(seg.b, seg.a);
        let len = norm(e).max(1e-12);
        let n = [-e[1] / len, e[0] / len];
        return Some([q[0] + n[0] * r, q[1] + n[1] * r]);
    }
    let k = r / dist;
    Some([q[0] + d[0] * k, q[1] + d[1] * k])
}

/// Axis-aligned square.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Square {
    pub center: Vec2,
    pub half: f64,
}

impl Square {
    pub fn closest_point(&self, p: Vec2) -> Vec2 {
        [
            p[0].clamp(self.center[0] - self.half, self.center[0] + self.half),
            p[1].clamp(self.center[1] - self.half, self.center[1] + self.half),
        ]
    }

    pub fn edges(&self) -> [Segment; 4] {
        let [x, y] = self.center;
        let h = self.half;
        let c = [[x - h, y - h], [x + h, y - h], [x + h, y + h], [x - h, y + h]];
        [Segment::new(c[0], c[1]), Segment::new(c[1], c[2]), Segment::new(c[2], c[3]), Segment::new(c[3], c[0])]
    }
}
