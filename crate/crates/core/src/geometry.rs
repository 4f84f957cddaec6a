//! Planar oriented boxes: overlap test (separating axis) and exact separation distance.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }

    pub fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }

    pub fn scale(self, k: f64) -> Vec2 {
        Vec2::new(self.x * k, self.y * k)
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn from_angle(theta: f64) -> Vec2 {
        Vec2::new(theta.cos(), theta.sin())
    }
}

/// Offset of `p` expressed in the frame of a body at `origin` facing `heading`:
/// `(longitudinal, lateral)`, lateral positive to the left.
pub fn to_body_frame(origin: Vec2, heading: f64, p: Vec2) -> (f64, f64) {
    let d = p.sub(origin);
    let fwd = Vec2::from_angle(heading);
    let left = Vec2::new(-fwd.y, fwd.x);
    (d.dot(fwd), d.dot(left))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Obb {
    pub center: Vec2,
    pub heading: f64,
    pub half_len: f64,
    pub half_wid: f64,
}

impl Obb {
    pub fn new(x: f64, y: f64, heading: f64, half_len: f64, half_wid: f64) -> Self {
        Obb {
            center: Vec2::new(x, y),
            heading,
            half_len,
            half_wid,
        }
    }

    fn axes(&self) -> [Vec2; 2] {
        let f = Vec2::from_angle(self.heading);
        [f, Vec2::new(-f.y, f.x)]
    }

    /// Corners in counter-clockwise order.
    pub fn corners(&self) -> [Vec2; 4] {
        let [f, l] = self.axes();
        let a = f.scale(self.half_len);
        let b = l.scale(self.half_wid);
        let c = self.center;
        [
            c.add(a).add(b),
            c.sub(a).add(b),
            c.sub(a).sub(b),
            c.add(a).sub(b),
        ]
    }

    fn project(&self, axis: Vec2) -> (f64, f64) {
        let [f, l] = self.axes();
        let c = self.center.dot(axis);
        let r = self.half_len * f.dot(axis).abs() + self.half_wid * l.dot(axis).abs();
        (c - r, c + r)
    }

    pub fn overlaps(&self, other: &Obb) -> bool {
        self.axes().iter().chain(other.axes().iter()).all(|&axis| {
            let (a0, a1) = self.project(axis);
            let (b0, b1) = other.project(axis);
            a1 >= b0 && b1 >= a0
        })
    }

    /// Euclidean distance between the two boxes; zero when they touch or overlap.
    pub fn distance(&self, other: &Obb) -> f64 {
        if self.overlaps(other) {
            return 0.0;
        }
        let ca = self.corners();
        let cb = other.corners();
        let mut best = f64::INFINITY;
        for (pts, poly) in [(&ca, &cb), (&cb, &ca)] {
            for &p in pts.iter() {
                for i in 0..4 {
                    let d = point_segment_distance(p, poly[i], poly[(i + 1) % 4]);
                    best = best.min(d);
                }
            }
        }
        best
    }
}

fn point_segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let ab = b.sub(a);
    let len2 = ab.dot(ab);
    let t = if len2 > 0.0 {
        (p.sub(a).dot(ab) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    p.sub(a.add(ab.scale(t))).norm()
}
