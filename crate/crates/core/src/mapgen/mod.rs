//! PM2.5 surfaces from ground stations and fused satellite estimates.

mod idw;
mod quasi;
mod render;

pub use idw::{dedup_points, idw_at, idw_interpolate, Pm25Map, COINCIDENCE_M, DEFAULT_POWER};
pub use quasi::{generate_quasi_stations, QuasiStation};
pub use render::{render_map, world_file, Palette, PaletteKind, RenderLog, Rendered};
