//! Arc-length parameterized lane-centre polyline.

use crate::geometry::Vec2;

#[derive(Debug, Clone)]
pub(crate) struct Polyline {
    pts: Vec<Vec2>,
    /// Cumulative arc length at each vertex.
    cum: Vec<f64>,
}

/// Closest-point projection of a point onto the polyline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Projection {
    pub s: f64,
    /// Signed lateral offset, positive to the left of the direction of travel.
    pub d: f64,
    pub heading: f64,
}

impl Polyline {
    pub fn new(points: &[[f64; 2]]) -> Self {
        let pts: Vec<Vec2> = points.iter().map(|p| Vec2::new(p[0], p[1])).collect();
        let mut cum = vec![0.0];
        for w in pts.windows(2) {
            let last = *cum.last().unwrap_or(&0.0);
            cum.push(last + w[1].sub(w[0]).norm());
        }
        Polyline { pts, cum }
    }

    fn segment_at(&self, s: f64) -> usize {
        let n = self.pts.len() - 1;
        match self.cum.partition_point(|&c| c <= s) {
            0 => 0,
            i => (i - 1).min(n - 1),
        }
    }

    pub fn heading_at(&self, s: f64) -> f64 {
        let i = self.segment_at(s);
        let d = self.pts[i + 1].sub(self.pts[i]);
        d.y.atan2(d.x)
    }

    /// Position at arc length `s` shifted `d` metres to the left. Extrapolates linearly
    /// beyond either end.
    pub fn point_at(&self, s: f64, d: f64) -> Vec2 {
        let i = self.segment_at(s);
        let h = self.heading_at(s);
        let fwd = Vec2::from_angle(h);
        let left = Vec2::new(-fwd.y, fwd.x);
        self.pts[i].add(fwd.scale(s - self.cum[i])).add(left.scale(d))
    }

    pub fn project(&self, p: Vec2) -> Projection {
        let mut best: Option<(f64, Projection)> = None;
        let last = self.pts.len() - 2;
        for i in 0..=last {
            let a = self.pts[i];
            let seg = self.pts[i + 1].sub(a);
            let len = seg.norm();
            let fwd = seg.scale(1.0 / len);
            let rel = p.sub(a);
            let mut u = rel.dot(fwd);
            // the first and last segments extend to infinity
            if i > 0 {
                u = u.max(0.0);
            }
            if i < last {
                u = u.min(len);
            }
            let foot = a.add(fwd.scale(u));
            let dist = p.sub(foot).norm();
            if best.is_none_or(|(bd, _)| dist < bd - 1e-12) {
                let left = Vec2::new(-fwd.y, fwd.x);
                best = Some((
                    dist,
                    Projection {
                        s: self.cum[i] + u,
                        d: rel.dot(left),
                        heading: fwd.y.atan2(fwd.x),
                    },
                ));
            }
        }
        best.map(|(_, pr)| pr).expect("polyline has at least one segment")
    }
}
