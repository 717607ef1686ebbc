//! Portable pixmap (P6) renderings of phase-space grids.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::PhaseSpaceGrid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Palette {
    /// Symmetric range `±max|W|`; zero maps to white, negative to blue,
    /// positive to red.
    Signed,
    /// Range `[0, max W]`, black through orange to pale yellow; negative
    /// values clamp to black.
    Unsigned,
}

impl FromStr for Palette {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "signed" => Ok(Palette::Signed),
            "unsigned" => Ok(Palette::Unsigned),
            other => Err(Error::InvalidParameter(format!("unknown palette {other:?}"))),
        }
    }
}

/// Color of the signed palette at zero.
pub const SIGNED_MIDPOINT: [u8; 3] = [255, 255, 255];

fn to_byte(x: f64) -> u8 {
    (x.clamp(0.0, 1.0) * 255.0).round() as u8
}

fn color(v: f64, scale: f64, palette: Palette) -> [u8; 3] {
    let t = if scale > 0.0 { v / scale } else { 0.0 };
    match palette {
        Palette::Signed => {
            let t = t.clamp(-1.0, 1.0);
            if t >= 0.0 {
                [255, to_byte(1.0 - t), to_byte(1.0 - t)]
            } else {
                [to_byte(1.0 + t), to_byte(1.0 + t), 255]
            }
        }
        Palette::Unsigned => {
            let t = t.clamp(0.0, 1.0);
            [to_byte(1.6 * t), to_byte(1.6 * t - 0.5), to_byte(3.0 * t - 2.0)]
        }
    }
}

/// Pixel rows for `grid`: `q` runs left to right, `p` bottom to top.
pub fn render_rgb(grid: &PhaseSpaceGrid, palette: Palette) -> Vec<u8> {
    let s = grid.spec();
    let scale = match palette {
        Palette::Signed => grid.max_abs(),
        Palette::Unsigned => grid.values().iter().cloned().fold(0.0, f64::max),
    };
    let mut out = Vec::with_capacity(3 * s.len());
    for row in 0..s.n_p {
        let ip = s.n_p - 1 - row;
        for iq in 0..s.n_q {
            out.extend_from_slice(&color(grid.get(iq, ip), scale, palette));
        }
    }
    out
}

/// Writes a P6 image with one pixel per grid point. `comments` become `#`
/// lines in the image header.
pub fn write_heatmap(grid: &PhaseSpaceGrid, path: &Path, palette: Palette, comments: &[String]) -> Result<()> {
    let s = grid.spec();
    let io = |e| Error::io(path, e);
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    writeln!(w, "P6").map_err(io)?;
    for c in comments {
        for line in c.lines() {
            writeln!(w, "# {line}").map_err(io)?;
        }
    }
    writeln!(w, "{} {}\n255", s.n_q, s.n_p).map_err(io)?;
    w.write_all(&render_rgb(grid, palette)).map_err(io)?;
    w.flush().map_err(io)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{new_coherent_state, GridSpec, Label};
    use crate::oracles::{wigner_of_state, WaveFunction};

    #[test]
    fn zeros_render_uniform_midpoint() {
        let g = PhaseSpaceGrid::zeros(GridSpec::square(64, 1.0).unwrap(), Label::Quantum);
        let rgb = render_rgb(&g, Palette::Signed);
        assert!(rgb.chunks(3).all(|px| px == SIGNED_MIDPOINT));
    }

    #[test]
    fn coherent_state_is_brightest_at_center() {
        let s = GridSpec::square(64, 2.0).unwrap();
        let g = new_coherent_state(s, (0.0, 0.0), 0.2).unwrap();
        let rgb = render_rgb(&g, Palette::Unsigned);
        let brightness = |row: usize, col: usize| {
            let i = 3 * (row * 64 + col);
            rgb[i] as u32 + rgb[i + 1] as u32 + rgb[i + 2] as u32
        };
        // Grid node 32 sits at q = p = 0; p = 0 is pixel row 31.
        let center = brightness(31, 32);
        assert_eq!(center, 3 * 255);
        assert!(brightness(0, 0) == 0 && brightness(31, 10) < center);
    }

    #[test]
    fn cat_fringes_alternate_about_midpoint() {
        let s = GridSpec::square(128, 2.0 * std::f64::consts::PI).unwrap();
        let eta = 0.3;
        let w = wigner_of_state(&WaveFunction::cat(&s, 4.0 * eta, eta).unwrap(), &s).unwrap();
        let rgb = render_rgb(&w, Palette::Signed);
        // Walk along p through q = 0, where the fringes sit.
        let iq = 64;
        let mut red = 0;
        let mut blue = 0;
        for row in 0..128 {
            let i = 3 * (row * 128 + iq);
            let px = &rgb[i..i + 3];
            if px[0] == 255 && px[2] < 200 {
                red += 1;
            }
            if px[2] == 255 && px[0] < 200 {
                blue += 1;
            }
        }
        assert!(red >= 2 && blue >= 2, "red {red}, blue {blue}");
    }

    #[test]
    fn writes_valid_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.ppm");
        let g = PhaseSpaceGrid::zeros(GridSpec::new(64, 128, (0.0, 1.0), (0.0, 1.0)).unwrap(), Label::Quantum);
        write_heatmap(&g, &path, Palette::Signed, &["K = 2".into()]).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        let header = b"P6\n# K = 2\n64 128\n255\n";
        assert_eq!(&bytes[..header.len()], header);
        assert_eq!(bytes.len(), header.len() + 3 * 64 * 128);
    }
}
