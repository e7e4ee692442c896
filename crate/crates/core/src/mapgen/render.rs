use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::idw::Pm25Map;
use crate::error::{Error, Result};
use crate::grid::GridGeometry;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PaletteKind {
    /// Binary graymap (PGM P5).
    Gray,
    /// Blue-to-red ramp, binary pixmap (PPM P6).
    Heat,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Palette {
    pub kind: PaletteKind,
    pub min: f64,
    pub max: f64,
}

impl Palette {
    pub fn extension(&self) -> &'static str {
        match self.kind {
            PaletteKind::Gray => "pgm",
            PaletteKind::Heat => "ppm",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RenderLog {
    pub clipped_low: usize,
    pub clipped_high: usize,
    pub non_finite: usize,
}

impl RenderLog {
    pub fn to_text(&self, palette: &Palette) -> String {
        format!(
            "palette_min = {}\npalette_max = {}\nclipped_low = {}\nclipped_high = {}\nnon_finite = {}\n",
            palette.min, palette.max, self.clipped_low, self.clipped_high, self.non_finite
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rendered {
    pub image: Vec<u8>,
    pub log: RenderLog,
}

const HEAT: [[f64; 3]; 5] = [
    [0.0, 0.0, 255.0],
    [0.0, 255.0, 255.0],
    [0.0, 255.0, 0.0],
    [255.0, 255.0, 0.0],
    [255.0, 0.0, 0.0],
];

fn heat(t: f64) -> [u8; 3] {
    let x = t * (HEAT.len() - 1) as f64;
    let i = (libm::floor(x) as usize).min(HEAT.len() - 2);
    let f = x - i as f64;
    let mut px = [0u8; 3];
    for (k, p) in px.iter_mut().enumerate() {
        *p = libm::round(HEAT[i][k] + f * (HEAT[i + 1][k] - HEAT[i][k])) as u8;
    }
    px
}

/// Encodes a map as a binary PGM or PPM. Values outside the palette range
/// are clamped and counted; non-finite cells are drawn black.
pub fn render_map(map: &Pm25Map, palette: &Palette) -> Result<Rendered> {
    if !(palette.max > palette.min) || !palette.min.is_finite() || !palette.max.is_finite() {
        return Err(Error::validation("palette", "need finite min < max"));
    }
    let g = &map.geometry;
    let magic = match palette.kind {
        PaletteKind::Gray => "P5",
        PaletteKind::Heat => "P6",
    };
    let mut image = format!("{magic}\n{} {}\n255\n", g.ncols, g.nrows).into_bytes();
    let mut log = RenderLog::default();
    for &v in &map.values {
        let t = if !v.is_finite() {
            log.non_finite += 1;
            None
        } else if v < palette.min {
            log.clipped_low += 1;
            Some(0.0)
        } else if v > palette.max {
            log.clipped_high += 1;
            Some(1.0)
        } else {
            Some((v - palette.min) / (palette.max - palette.min))
        };
        match (palette.kind, t) {
            (PaletteKind::Gray, Some(t)) => image.push(libm::round(t * 255.0) as u8),
            (PaletteKind::Gray, None) => image.push(0),
            (PaletteKind::Heat, Some(t)) => image.extend_from_slice(&heat(t)),
            (PaletteKind::Heat, None) => image.extend_from_slice(&[0, 0, 0]),
        }
    }
    Ok(Rendered { image, log })
}

/// Six-line world file georeferencing the image pixels to cell centers.
pub fn world_file(g: &GridGeometry) -> String {
    let (e, n) = g.cell_center(0, 0);
    let cs = g.transform.cellsize;
    format!("{cs}\n0\n0\n{}\n{e}\n{n}\n", -cs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::geometry;
    use crate::Date;
    use alloc::vec;

    fn map(values: Vec<f64>) -> Pm25Map {
        Pm25Map {
            geometry: geometry(2, 3, 0.0, 0.0, 100.0),
            date: Date::from_ymd_opt(2020, 1, 1).unwrap(),
            values,
            n_ground: 1,
            n_quasi: 0,
        }
    }

    #[test]
    fn constant_map_is_uniform() {
        let p = Palette {
            kind: PaletteKind::Gray,
            min: 0.0,
            max: 100.0,
        };
        let r = render_map(&map(vec![50.0; 6]), &p).unwrap();
        let header = b"P5\n3 2\n255\n";
        assert_eq!(&r.image[..header.len()], header);
        assert!(r.image[header.len()..].iter().all(|&b| b == 128));
        assert_eq!(r.image, render_map(&map(vec![50.0; 6]), &p).unwrap().image);
    }

    #[test]
    fn clipping_is_logged() {
        let p = Palette {
            kind: PaletteKind::Heat,
            min: 10.0,
            max: 20.0,
        };
        let r = render_map(&map(vec![5.0, 15.0, 25.0, 30.0, f64::NAN, 10.0]), &p).unwrap();
        assert_eq!(
            r.log,
            RenderLog {
                clipped_low: 1,
                clipped_high: 2,
                non_finite: 1
            }
        );
        assert_eq!(r.image.len(), b"P6\n3 2\n255\n".len() + 18);
    }

    #[test]
    fn world_file_points_at_first_center() {
        assert_eq!(
            world_file(&geometry(2, 3, 1000.0, 2000.0, 100.0)),
            "100\n0\n0\n-100\n1050\n2150\n"
        );
    }
}
