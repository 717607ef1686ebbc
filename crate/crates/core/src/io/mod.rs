//! Snapshot files, heatmap images and run manifests.

mod heatmap;
mod manifest;
mod snapshot;

pub use heatmap::{render_rgb, write_heatmap, Palette, SIGNED_MIDPOINT};
pub use manifest::{sha256_file, ArtifactEntry, Manifest, MANIFEST_FILE};
pub use snapshot::{read_ensemble, read_grid, write_ensemble, write_grid, Metadata, ENSEMBLE_MAGIC, GRID_MAGIC};

/// Environment variable naming the default output directory.
pub const OUTPUT_DIR_ENV: &str = "KHO_OUTPUT_DIR";
