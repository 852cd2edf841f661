//! Pixel-boundary polygonization.
//!
//! Boundary edges run along pixel sides with the object on their right in
//! image coordinates (x = column, y = row), which gives exteriors positive
//! shoelace area and holes negative. Where two object pixels touch only at
//! a corner the trace stays on the pixel it arrived from, so every ring is
//! simple and each 4-connected part of an instance becomes its own polygon.

use std::collections::HashMap;

use super::components::label_components;
use crate::geometry::{signed_area, Point, Polygon, PolygonAttributes, PolygonSet, Ring};
use crate::instances::InstanceSet;
use crate::labels::segments;
use crate::raster::{Connectivity, Raster};

pub fn polygonize(instances: &InstanceSet) -> PolygonSet {
    let map = instances.map();
    let segs = segments(map);
    let mut polygons = Vec::new();
    for rec in instances.records() {
        let Some(seg) = segs.get(&rec.id) else {
            continue;
        };
        let (r0, r1, c0, c1) = seg.window(0, map.height(), map.width());
        let member = Raster::from_fn(r1 - r0, c1 - c0, |r, c| *map.get(r0 + r, c0 + c) == rec.id);
        let attributes = PolygonAttributes {
            instance: Some(rec.id),
            class: rec.class,
            confidence: rec.confidence,
        };
        for (exterior, holes) in trace(&member) {
            let shift = |ring: Ring| -> Ring {
                ring.into_iter()
                    .map(|[x, y]| [x + c0 as f64, y + r0 as f64])
                    .collect()
            };
            polygons.push(Polygon {
                exterior: shift(exterior),
                holes: holes.into_iter().map(shift).collect(),
                attributes: attributes.clone(),
            });
        }
    }
    PolygonSet { polygons }
}

#[derive(Clone, Copy)]
struct Edge {
    from: (usize, usize),
    to: (usize, usize),
    pixel: usize,
}

/// Rings of a binary raster grouped per 4-connected part, in part order.
fn trace(member: &Raster<bool>) -> Vec<(Ring, Vec<Ring>)> {
    let (h, w) = member.shape();
    let inside = |r: isize, c: isize| {
        r >= 0
            && c >= 0
            && (r as usize) < h
            && (c as usize) < w
            && *member.get(r as usize, c as usize)
    };

    // vertices are (x, y) pixel corners
    let mut edges = Vec::new();
    for r in 0..h {
        for c in 0..w {
            if !*member.get(r, c) {
                continue;
            }
            let (ri, ci) = (r as isize, c as isize);
            let pixel = r * w + c;
            if !inside(ri - 1, ci) {
                edges.push(Edge {
                    from: (c, r),
                    to: (c + 1, r),
                    pixel,
                });
            }
            if !inside(ri, ci + 1) {
                edges.push(Edge {
                    from: (c + 1, r),
                    to: (c + 1, r + 1),
                    pixel,
                });
            }
            if !inside(ri + 1, ci) {
                edges.push(Edge {
                    from: (c + 1, r + 1),
                    to: (c, r + 1),
                    pixel,
                });
            }
            if !inside(ri, ci - 1) {
                edges.push(Edge {
                    from: (c, r + 1),
                    to: (c, r),
                    pixel,
                });
            }
        }
    }

    let mut outgoing: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
    for (k, e) in edges.iter().enumerate() {
        outgoing.entry(e.from).or_default().push(k);
    }

    let (parts, n_parts) = label_components(member, Connectivity::Four);
    let mut grouped: Vec<(Option<Ring>, Vec<Ring>)> = vec![(None, Vec::new()); n_parts as usize];
    let mut used = vec![false; edges.len()];
    for start in 0..edges.len() {
        if used[start] {
            continue;
        }
        let mut walk = Vec::new();
        let mut k = start;
        loop {
            used[k] = true;
            walk.push((edges[k].from, edges[k].pixel));
            let next = &outgoing[&edges[k].to];
            let pick = if next.len() == 1 {
                next[0]
            } else {
                *next
                    .iter()
                    .find(|&&n| edges[n].pixel == edges[k].pixel)
                    .expect("corner-touching pixels keep their own side")
            };
            if pick == start {
                break;
            }
            k = pick;
        }
        for lp in split_loops(walk) {
            let part = parts.as_slice()[lp[0].1] as usize - 1;
            let vertices: Vec<(usize, usize)> = lp.into_iter().map(|(v, _)| v).collect();
            let ring = simplify(&vertices);
            if signed_area(&ring) > 0.0 {
                grouped[part].0 = Some(ring);
            } else {
                grouped[part].1.push(ring);
            }
        }
    }
    grouped
        .into_iter()
        .map(|(ext, holes)| (ext.expect("every part has an exterior"), holes))
        .collect()
}

/// Cut a closed walk at repeated vertices into simple loops. A hole that
/// meets the outline at a single corner is traced together with it.
fn split_loops(walk: Vec<((usize, usize), usize)>) -> Vec<Vec<((usize, usize), usize)>> {
    let mut loops = Vec::new();
    let mut stack: Vec<((usize, usize), usize)> = Vec::new();
    let mut seen: HashMap<(usize, usize), usize> = HashMap::new();
    for step in walk {
        if let Some(&at) = seen.get(&step.0) {
            let lp = stack.split_off(at);
            for s in &lp[1..] {
                seen.remove(&s.0);
            }
            loops.push(lp);
        }
        seen.insert(step.0, stack.len());
        stack.push(step);
    }
    loops.push(stack);
    loops
}

/// Drop collinear vertices, start at the smallest (y, x) corner and close.
fn simplify(vertices: &[(usize, usize)]) -> Ring {
    let n = vertices.len();
    let mut corners: Vec<(usize, usize)> = (0..n)
        .filter(|&i| {
            let a = vertices[(i + n - 1) % n];
            let b = vertices[i];
            let c = vertices[(i + 1) % n];
            let d1 = (b.0 as isize - a.0 as isize, b.1 as isize - a.1 as isize);
            let d2 = (c.0 as isize - b.0 as isize, c.1 as isize - b.1 as isize);
            d1.0 * d2.1 - d1.1 * d2.0 != 0
        })
        .map(|i| vertices[i])
        .collect();
    let first = (0..corners.len())
        .min_by_key(|&i| (corners[i].1, corners[i].0))
        .unwrap_or(0);
    corners.rotate_left(first);
    let mut ring: Ring = corners
        .iter()
        .map(|&(x, y)| [x as f64, y as f64] as Point)
        .collect();
    ring.push(ring[0]);
    ring
}
