//! Dataset construction: polygon rasterization, tile-window selection,
//! footprint alignment and the seeded synthetic scene generator.

mod align;
pub(crate) mod polygon;
mod scene;
mod window;

pub use align::{align_footprints, gradient_magnitude};
pub use polygon::{rasterize, Polygon};
pub use scene::{generate_scene, SceneConfig, SceneSample};
pub use window::{
    border_crossing_count, select_tile_window, DEFAULT_WINDOW_SEARCH_RADIUS, DEFAULT_WINDOW_STRIDE,
};
