//! GeoJSON (RFC 7946) FeatureCollection reading and writing.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::geometry::{is_closed, orient, Point, Polygon, PolygonAttributes, PolygonSet, Ring};

/// Maps pixel corners to world coordinates with a north-up affine:
/// `x = origin_x + col * pixel_size`, `y = origin_y - row * pixel_size`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeoReference {
    pub origin_x: f64,
    pub origin_y: f64,
    pub pixel_size: f64,
}

impl GeoReference {
    pub fn apply(&self, p: Point) -> Point {
        [
            self.origin_x + p[0] * self.pixel_size,
            self.origin_y - p[1] * self.pixel_size,
        ]
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let georef: Self = serde_json::from_str(&text)
            .map_err(|e| Error::Format(format!("georeference sidecar: {e}")))?;
        if !(georef.pixel_size > 0.0 && georef.pixel_size.is_finite()) {
            return Err(Error::InvalidInput("pixel_size must be positive".into()));
        }
        Ok(georef)
    }
}

fn check_ring(ring: &Ring) -> Result<()> {
    if ring.len() < 4 {
        return Err(Error::InvalidInput(format!(
            "degenerate ring with {} vertices",
            ring.len()
        )));
    }
    if !is_closed(ring) {
        return Err(Error::InvalidInput("ring is not closed".into()));
    }
    Ok(())
}

fn ring_coords(ring: &Ring, georef: Option<&GeoReference>, counter_clockwise: bool) -> Value {
    let mut pts: Ring = match georef {
        Some(g) => ring.iter().map(|&p| g.apply(p)).collect(),
        None => ring.clone(),
    };
    orient(&mut pts, counter_clockwise);
    Value::Array(pts.into_iter().map(|[x, y]| json!([x, y])).collect())
}

/// Build the FeatureCollection, one Feature per polygon. Rings are
/// re-oriented in output coordinates: exteriors counter-clockwise, holes
/// clockwise.
pub fn to_feature_collection(set: &PolygonSet, georef: Option<&GeoReference>) -> Result<Value> {
    let mut features = Vec::with_capacity(set.polygons.len());
    for poly in &set.polygons {
        check_ring(&poly.exterior)?;
        let mut rings = vec![ring_coords(&poly.exterior, georef, true)];
        for hole in &poly.holes {
            check_ring(hole)?;
            rings.push(ring_coords(hole, georef, false));
        }
        let mut properties = Map::new();
        if let Some(id) = poly.attributes.instance {
            properties.insert("instance".into(), json!(id));
        }
        properties.insert("class".into(), json!(poly.attributes.class));
        properties.insert("confidence".into(), json!(poly.attributes.confidence));
        features.push(json!({
            "type": "Feature",
            "geometry": { "type": "Polygon", "coordinates": rings },
            "properties": properties,
        }));
    }
    Ok(json!({ "type": "FeatureCollection", "features": features }))
}

pub fn write_geojson(
    set: &PolygonSet,
    path: impl AsRef<Path>,
    georef: Option<&GeoReference>,
) -> Result<()> {
    let path = path.as_ref();
    let value = to_feature_collection(set, georef)?;
    let mut text = serde_json::to_string(&value).expect("json values serialize");
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// A polygon feature read from GeoJSON with its raw properties.
#[derive(Clone, Debug, PartialEq)]
pub struct Feature {
    pub polygon: Polygon,
    pub properties: Map<String, Value>,
}

/// Read Polygon and MultiPolygon features; a MultiPolygon contributes one
/// [`Feature`] per part with the same properties.
pub fn read_features(path: impl AsRef<Path>) -> Result<Vec<Feature>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let value: Value =
        serde_json::from_str(&text).map_err(|e| Error::Format(format!("GeoJSON: {e}")))?;
    parse_features(&value)
}

pub fn parse_features(value: &Value) -> Result<Vec<Feature>> {
    let bad = |msg: &str| Error::Format(format!("GeoJSON: {msg}"));
    if value.get("type").and_then(Value::as_str) != Some("FeatureCollection") {
        return Err(bad("expected a FeatureCollection"));
    }
    let features = value
        .get("features")
        .and_then(Value::as_array)
        .ok_or_else(|| bad("missing features array"))?;
    let mut out = Vec::new();
    for f in features {
        let properties = f
            .get("properties")
            .and_then(Value::as_object)
            .cloned()
            .unwrap_or_default();
        let geom = f
            .get("geometry")
            .ok_or_else(|| bad("feature without geometry"))?;
        let coords = geom
            .get("coordinates")
            .ok_or_else(|| bad("geometry without coordinates"))?;
        let parts = match geom.get("type").and_then(Value::as_str) {
            Some("Polygon") => vec![parse_polygon(coords)?],
            Some("MultiPolygon") => coords
                .as_array()
                .ok_or_else(|| bad("MultiPolygon coordinates"))?
                .iter()
                .map(parse_polygon)
                .collect::<Result<_>>()?,
            other => return Err(bad(&format!("unsupported geometry {other:?}"))),
        };
        for (exterior, holes) in parts {
            out.push(Feature {
                polygon: Polygon {
                    exterior,
                    holes,
                    attributes: PolygonAttributes::default(),
                },
                properties: properties.clone(),
            });
        }
    }
    Ok(out)
}

fn parse_polygon(coords: &Value) -> Result<(Ring, Vec<Ring>)> {
    let bad = || Error::Format("GeoJSON: malformed polygon coordinates".into());
    let mut rings = coords
        .as_array()
        .ok_or_else(bad)?
        .iter()
        .map(|ring| {
            let ring: Ring = ring
                .as_array()
                .ok_or_else(bad)?
                .iter()
                .map(|p| {
                    let x = p.get(0).and_then(Value::as_f64).ok_or_else(bad)?;
                    let y = p.get(1).and_then(Value::as_f64).ok_or_else(bad)?;
                    Ok([x, y])
                })
                .collect::<Result<_>>()?;
            check_ring(&ring)?;
            Ok(ring)
        })
        .collect::<Result<Vec<Ring>>>()?;
    if rings.is_empty() {
        return Err(bad());
    }
    let exterior = rings.remove(0);
    Ok((exterior, rings))
}
