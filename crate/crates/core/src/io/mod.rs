//! On-disk formats: FGRID raster fields, network checkpoints, GeoJSON
//! polygon documents, dataset manifests and PNG images.

pub mod checkpoint;
pub mod fgrid;
pub mod geojson;
pub mod manifest;
pub mod png;
