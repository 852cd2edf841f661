//! Planar polygon types shared by polygonization, GeoJSON output and the
//! spatial splitter.
//!
//! Orientation follows the mathematical convention in the polygon's own
//! coordinates: exterior rings have positive shoelace area
//! (counter-clockwise with the y axis pointing up), holes negative.

use serde::{Deserialize, Serialize};

pub type Point = [f64; 2];

/// Closed ring: the first vertex is repeated at the end.
pub type Ring = Vec<Point>;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PolygonAttributes {
    pub instance: Option<u32>,
    pub class: Option<u32>,
    pub confidence: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Polygon {
    pub exterior: Ring,
    pub holes: Vec<Ring>,
    pub attributes: PolygonAttributes,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PolygonSet {
    pub polygons: Vec<Polygon>,
}

/// Shoelace area of a closed ring, positive for counter-clockwise.
pub fn signed_area(ring: &[Point]) -> f64 {
    ring.windows(2)
        .map(|e| e[0][0] * e[1][1] - e[1][0] * e[0][1])
        .sum::<f64>()
        / 2.0
}

pub fn is_closed(ring: &[Point]) -> bool {
    ring.len() >= 2 && ring.first() == ring.last()
}

/// Reverse `ring` if needed so its signed area has the requested sign.
pub fn orient(ring: &mut Ring, counter_clockwise: bool) {
    if (signed_area(ring) > 0.0) != counter_clockwise {
        ring.reverse();
    }
}

impl Polygon {
    /// Area with holes subtracted.
    pub fn area(&self) -> f64 {
        signed_area(&self.exterior).abs()
            - self.holes.iter().map(|h| signed_area(h).abs()).sum::<f64>()
    }

    /// Area centroid; falls back to the vertex mean for degenerate shapes.
    pub fn centroid(&self) -> Point {
        let mut acc = [0.0, 0.0, 0.0];
        let mut add = |ring: &[Point], sign: f64| {
            for e in ring.windows(2) {
                let cross = e[0][0] * e[1][1] - e[1][0] * e[0][1];
                acc[0] += sign * cross;
                acc[1] += sign * (e[0][0] + e[1][0]) * cross;
                acc[2] += sign * (e[0][1] + e[1][1]) * cross;
            }
        };
        let s = signed_area(&self.exterior).signum();
        add(&self.exterior, s);
        for h in &self.holes {
            add(h, -signed_area(h).signum());
        }
        let area = acc[0] / 2.0;
        if area.abs() < 1e-12 {
            let pts = &self.exterior[..self.exterior.len().saturating_sub(1).max(1)];
            let n = pts.len() as f64;
            return [
                pts.iter().map(|p| p[0]).sum::<f64>() / n,
                pts.iter().map(|p| p[1]).sum::<f64>() / n,
            ];
        }
        [acc[1] / (6.0 * area), acc[2] / (6.0 * area)]
    }

    /// (min_x, min_y, max_x, max_y) of the exterior ring.
    pub fn bounds(&self) -> [f64; 4] {
        bounds(&self.exterior)
    }
}

pub fn bounds(ring: &[Point]) -> [f64; 4] {
    ring.iter().fold(
        [
            f64::INFINITY,
            f64::INFINITY,
            f64::NEG_INFINITY,
            f64::NEG_INFINITY,
        ],
        |b, p| {
            [
                b[0].min(p[0]),
                b[1].min(p[1]),
                b[2].max(p[0]),
                b[3].max(p[1]),
            ]
        },
    )
}

/// Even-odd point-in-ring test.
pub fn point_in_ring(p: Point, ring: &[Point]) -> bool {
    let mut inside = false;
    for e in ring.windows(2) {
        let (a, b) = (e[0], e[1]);
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x = a[0] + (p[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
            if p[0] < x {
                inside = !inside;
            }
        }
    }
    inside
}

/// Clip a closed ring to the axis-aligned rectangle
/// `[min_x, max_x] x [min_y, max_y]` (Sutherland-Hodgman). Returns `None`
/// when nothing of positive area remains. For concave input the result may
/// contain zero-width bridges along the rectangle edges; its area is exact.
pub fn clip_ring_to_rect(ring: &[Point], rect: [f64; 4]) -> Option<Ring> {
    let [min_x, min_y, max_x, max_y] = rect;
    let mut pts: Vec<Point> = ring[..ring.len().saturating_sub(1)].to_vec();
    type Inside = fn(Point, f64) -> bool;
    type Cross = fn(Point, Point, f64) -> Point;
    let lerp_x: Cross = |a, b, x| [x, a[1] + (b[1] - a[1]) * (x - a[0]) / (b[0] - a[0])];
    let lerp_y: Cross = |a, b, y| [a[0] + (b[0] - a[0]) * (y - a[1]) / (b[1] - a[1]), y];
    let planes: [(Inside, Cross, f64); 4] = [
        (|p, v| p[0] >= v, lerp_x, min_x),
        (|p, v| p[0] <= v, lerp_x, max_x),
        (|p, v| p[1] >= v, lerp_y, min_y),
        (|p, v| p[1] <= v, lerp_y, max_y),
    ];
    for (inside, cross, v) in planes {
        if pts.is_empty() {
            break;
        }
        let mut out = Vec::with_capacity(pts.len() + 4);
        for i in 0..pts.len() {
            let cur = pts[i];
            let prev = pts[(i + pts.len() - 1) % pts.len()];
            match (inside(prev, v), inside(cur, v)) {
                (true, true) => out.push(cur),
                (true, false) => out.push(cross(prev, cur, v)),
                (false, true) => {
                    out.push(cross(prev, cur, v));
                    out.push(cur);
                }
                (false, false) => {}
            }
        }
        pts = out;
    }
    pts.dedup();
    while pts.len() > 1 && pts.first() == pts.last() {
        pts.pop();
    }
    if pts.len() < 3 {
        return None;
    }
    pts.push(pts[0]);
    (signed_area(&pts).abs() > 1e-12).then_some(pts)
}
