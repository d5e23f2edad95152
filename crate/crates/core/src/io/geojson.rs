//! GeoJSON-subset serialization of building polygons: a FeatureCollection
//! of hole-free Polygon geometries in pixel coordinates.

use crate::datapipe::Polygon;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Serialize, Deserialize)]
struct FeatureCollection {
    #[serde(rename = "type")]
    kind: String,
    features: Vec<Feature>,
}

#[derive(Serialize, Deserialize)]
struct Feature {
    #[serde(rename = "type")]
    kind: String,
    properties: serde_json::Map<String, serde_json::Value>,
    geometry: Geometry,
}

#[derive(Serialize, Deserialize)]
struct Geometry {
    #[serde(rename = "type")]
    kind: String,
    coordinates: Vec<Vec<[f64; 2]>>,
}

pub fn polygons_to_json(polygons: &[Polygon]) -> String {
    let features = polygons
        .iter()
        .map(|p| {
            let mut ring: Vec<[f64; 2]> = p.vertices().iter().map(|&(x, y)| [x, y]).collect();
            ring.push(ring[0]); // GeoJSON rings close explicitly
            Feature {
                kind: "Feature".into(),
                properties: serde_json::Map::new(),
                geometry: Geometry {
                    kind: "Polygon".into(),
                    coordinates: vec![ring],
                },
            }
        })
        .collect();
    serde_json::to_string_pretty(&FeatureCollection {
        kind: "FeatureCollection".into(),
        features,
    })
    .expect("geojson serialization cannot fail")
}

pub fn polygons_from_json(text: &str) -> std::result::Result<Vec<Polygon>, String> {
    let fc: FeatureCollection = serde_json::from_str(text).map_err(|e| e.to_string())?;
    if fc.kind != "FeatureCollection" {
        return Err(format!("expected FeatureCollection, got {}", fc.kind));
    }
    let mut out = Vec::with_capacity(fc.features.len());
    for (i, f) in fc.features.iter().enumerate() {
        if f.geometry.kind != "Polygon" {
            return Err(format!(
                "feature {}: expected Polygon geometry, got {}",
                i, f.geometry.kind
            ));
        }
        if f.geometry.coordinates.len() != 1 {
            return Err(format!("feature {}: holes are not supported", i));
        }
        let ring = &f.geometry.coordinates[0];
        if ring.len() < 4 || ring.first() != ring.last() {
            return Err(format!("feature {}: ring must close on itself", i));
        }
        let verts: Vec<(f64, f64)> = ring[..ring.len() - 1]
            .iter()
            .map(|&[x, y]| (x, y))
            .collect();
        out.push(Polygon::new(verts).map_err(|e| format!("feature {}: {}", i, e))?);
    }
    Ok(out)
}

pub fn write_polygons(path: &Path, polygons: &[Polygon]) -> Result<()> {
    std::fs::write(path, polygons_to_json(polygons))
        .map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn read_polygons(path: &Path) -> Result<Vec<Polygon>> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    polygons_from_json(&text).map_err(|reason| Error::format(path.display().to_string(), reason))
}
