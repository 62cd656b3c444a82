//! File formats: the raw cube (text sidecar header plus little-endian f64
//! binary), the library CSV, the segment-map text file and PGM abundance
//! map exports. Cube and segment-map round trips are bit-exact.

mod cube;
mod library_csv;
mod pgm;
mod segmap;

pub use cube::{read_cube, write_cube, CubeHeader};
pub use library_csv::{read_library, write_library};
pub use pgm::export_abundance_maps;
pub use segmap::{read_segment_map, write_segment_map};
