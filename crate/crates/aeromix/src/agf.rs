//! AGF, a plain-text grid format.
//!
//! ```text
//! ncols = 3
//! nrows = 2
//! xllcorner = 500000
//! yllcorner = 3900000
//! cellsize = 1000
//! nodata_value = -9999
//! sensor = MODIS-Aqua
//! algorithm = DB
//! date = 2020-01-01
//! VALUES
//! 0.31 0.29 -9999
//! 0.3 0.305 0.33
//! QA
//! 3 3 0
//! 3 2 3
//! ```
//!
//! Grid values carry 9 significant digits, enough to restore any `f32`
//! exactly. PM2.5 maps use the same layout with `quantity = pm25` in place of
//! the sensor and algorithm and no `QA` block.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use aeromix_core::grid::{GeoTransform, GridGeometry};
use aeromix_core::mapgen::Pm25Map;
use aeromix_core::{Algorithm, AodGrid, Date, Sensor, Source};

use crate::error::{AppError, AppResult};
use crate::fsio;

/// Formats a value with 9 significant digits, positional when the exponent
/// lies in [-5, 9), trailing zeros removed.
pub fn sig9(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return format!("{v}");
    }
    let sci = format!("{v:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    let negative = mantissa.starts_with('-');
    let digits: String = mantissa.chars().filter(|c| c.is_ascii_digit()).collect();
    let mut out = String::new();
    if negative {
        out.push('-');
    }
    if (-5..9).contains(&exp) {
        if exp < 0 {
            out.push_str("0.");
            out.extend(std::iter::repeat_n('0', (-exp - 1) as usize));
            out.push_str(digits.trim_end_matches('0'));
        } else {
            let int_len = exp as usize + 1;
            out.push_str(&digits[..int_len]);
            let frac = digits[int_len..].trim_end_matches('0');
            if !frac.is_empty() {
                out.push('.');
                out.push_str(frac);
            }
        }
    } else {
        let frac = digits[1..].trim_end_matches('0');
        out.push_str(&digits[..1]);
        if !frac.is_empty() {
            out.push('.');
            out.push_str(frac);
        }
        write!(out, "e{exp}").expect("string write");
    }
    out
}

fn header_common(out: &mut String, g: &GridGeometry, nodata: f64) {
    let t = &g.transform;
    writeln!(out, "ncols = {}", g.ncols).unwrap();
    writeln!(out, "nrows = {}", g.nrows).unwrap();
    writeln!(out, "xllcorner = {}", t.origin_east).unwrap();
    writeln!(out, "yllcorner = {}", t.origin_north).unwrap();
    writeln!(out, "cellsize = {}", t.cellsize).unwrap();
    writeln!(out, "nodata_value = {}", sig9(nodata)).unwrap();
}

fn rows<T: Copy>(out: &mut String, ncols: usize, values: &[T], fmt: impl Fn(T) -> String) {
    for row in values.chunks(ncols) {
        let line: Vec<String> = row.iter().map(|v| fmt(*v)).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
}

pub fn grid_to_string(grid: &AodGrid) -> String {
    let mut out = String::new();
    let g = grid.geometry();
    header_common(&mut out, g, grid.nodata() as f64);
    writeln!(out, "sensor = {}", grid.source().sensor).unwrap();
    writeln!(out, "algorithm = {}", grid.source().algorithm).unwrap();
    writeln!(out, "date = {}", grid.date()).unwrap();
    out.push_str("VALUES\n");
    rows(&mut out, g.ncols, grid.values(), |v| sig9(v as f64));
    out.push_str("QA\n");
    rows(&mut out, g.ncols, grid.qa(), |q| q.to_string());
    out
}

pub fn map_to_string(map: &Pm25Map) -> String {
    let mut out = String::new();
    header_common(&mut out, &map.geometry, -9999.0);
    writeln!(out, "quantity = pm25").unwrap();
    writeln!(out, "date = {}", map.date).unwrap();
    writeln!(out, "ground_stations = {}", map.n_ground).unwrap();
    writeln!(out, "quasi_stations = {}", map.n_quasi).unwrap();
    out.push_str("VALUES\n");
    rows(&mut out, map.geometry.ncols, &map.values, |v| {
        if v.is_finite() {
            sig9(v)
        } else {
            "-9999".into()
        }
    });
    out
}

struct Parsed {
    header: BTreeMap<String, (usize, String)>,
    values: Vec<(usize, String)>,
    qa: Option<Vec<(usize, String)>>,
}

fn split_sections(path: &Path, text: &str) -> AppResult<Parsed> {
    let mut header = BTreeMap::new();
    let mut section_values = Vec::new();
    let mut section_qa = Vec::new();
    let mut state = 0; // 0 header, 1 values, 2 qa
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        let lineno = i + 1;
        if line.is_empty() {
            continue;
        }
        match line {
            "VALUES" if state == 0 => {
                state = 1;
                continue;
            }
            "QA" if state == 1 => {
                state = 2;
                continue;
            }
            "VALUES" | "QA" => {
                return Err(AppError::parse(
                    path,
                    lineno,
                    format!("unexpected `{line}` section"),
                ))
            }
            _ => {}
        }
        match state {
            0 => {
                let (k, v) = line
                    .split_once('=')
                    .ok_or_else(|| AppError::parse(path, lineno, "expected `key = value`"))?;
                let k = k.trim().to_ascii_lowercase();
                if header
                    .insert(k.clone(), (lineno, v.trim().to_string()))
                    .is_some()
                {
                    return Err(AppError::parse(
                        path,
                        lineno,
                        format!("duplicate header key `{k}`"),
                    ));
                }
            }
            1 => section_values.push((lineno, line.to_string())),
            _ => section_qa.push((lineno, line.to_string())),
        }
    }
    if state == 0 {
        return Err(AppError::parse(
            path,
            text.lines().count(),
            "missing VALUES section",
        ));
    }
    let qa = (state == 2).then_some(section_qa);
    Ok(Parsed {
        header,
        values: section_values,
        qa,
    })
}

fn field<'a>(path: &Path, p: &'a Parsed, key: &str) -> AppResult<(usize, &'a str)> {
    p.header
        .get(key)
        .map(|(l, v)| (*l, v.as_str()))
        .ok_or_else(|| AppError::parse(path, 1, format!("missing header field `{key}`")))
}

fn parse_field<T: std::str::FromStr>(path: &Path, p: &Parsed, key: &str) -> AppResult<T>
where
    T::Err: std::fmt::Display,
{
    let (line, v) = field(path, p, key)?;
    v.parse::<T>()
        .map_err(|e| AppError::parse(path, line, format!("{key}: {e}")))
}

fn geometry_of(path: &Path, p: &Parsed) -> AppResult<GridGeometry> {
    let ncols: usize = parse_field(path, p, "ncols")?;
    let nrows: usize = parse_field(path, p, "nrows")?;
    let transform = GeoTransform {
        origin_east: parse_field(path, p, "xllcorner")?,
        origin_north: parse_field(path, p, "yllcorner")?,
        cellsize: parse_field(path, p, "cellsize")?,
    };
    GridGeometry::new(nrows, ncols, transform).map_err(|e| AppError::parse(path, 1, e))
}

fn block<T>(
    path: &Path,
    name: &str,
    lines: &[(usize, String)],
    g: &GridGeometry,
    parse: impl Fn(&str) -> Option<T>,
) -> AppResult<Vec<T>> {
    if lines.len() != g.nrows {
        let at = lines.last().map_or(1, |l| l.0);
        return Err(AppError::parse(
            path,
            at,
            format!(
                "{name} block has {} rows, header says nrows = {}",
                lines.len(),
                g.nrows
            ),
        ));
    }
    let mut out = Vec::with_capacity(g.len());
    for (lineno, line) in lines {
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() != g.ncols {
            return Err(AppError::parse(
                path,
                *lineno,
                format!(
                    "{name} row has {} entries, header says ncols = {}",
                    tokens.len(),
                    g.ncols
                ),
            ));
        }
        for t in tokens {
            out.push(parse(t).ok_or_else(|| {
                AppError::parse(path, *lineno, format!("bad {name} entry `{t}`"))
            })?);
        }
    }
    Ok(out)
}

pub fn parse_grid(path: &Path, text: &str) -> AppResult<AodGrid> {
    let p = split_sections(path, text)?;
    let g = geometry_of(path, &p)?;
    let nodata: f32 = parse_field(path, &p, "nodata_value")?;
    let sensor: Sensor = parse_field(path, &p, "sensor")?;
    let algorithm: Algorithm = parse_field(path, &p, "algorithm")?;
    let date: Date = parse_field(path, &p, "date")?;
    let values = block(path, "VALUES", &p.values, &g, |t| {
        t.parse::<f32>().ok().filter(|v| v.is_finite())
    })?;
    let qa_lines =
        p.qa.as_ref()
            .ok_or_else(|| AppError::parse(path, text.lines().count(), "missing QA section"))?;
    let qa = block(path, "QA", qa_lines, &g, |t| {
        t.parse::<u8>().ok().filter(|q| *q <= 3)
    })?;
    AodGrid::new(g, nodata, values, qa, Source::new(sensor, algorithm), date)
        .map_err(|e| AppError::core(path.display(), e))
}

pub fn parse_map(path: &Path, text: &str) -> AppResult<Pm25Map> {
    let p = split_sections(path, text)?;
    let g = geometry_of(path, &p)?;
    let nodata: f64 = parse_field(path, &p, "nodata_value")?;
    let date: Date = parse_field(path, &p, "date")?;
    let values = block(path, "VALUES", &p.values, &g, |t| t.parse::<f64>().ok())?
        .into_iter()
        .map(|v| if v == nodata { f64::NAN } else { v })
        .collect();
    Ok(Pm25Map {
        geometry: g,
        date,
        values,
        n_ground: parse_field(path, &p, "ground_stations")?,
        n_quasi: parse_field(path, &p, "quasi_stations")?,
    })
}

pub fn load_grid(path: &Path) -> AppResult<AodGrid> {
    parse_grid(path, &fsio::read_text(path)?)
}

pub fn write_grid(grid: &AodGrid, path: &Path) -> AppResult<()> {
    fsio::write(path, grid_to_string(grid).as_bytes())
}

/// Loads every `*.agf` file in a directory, in file-name order.
pub fn load_grid_dir(dir: &Path) -> AppResult<Vec<AodGrid>> {
    let mut paths = fsio::list_with_extension(dir, "agf")?;
    paths.sort();
    paths.iter().map(|p| load_grid(p)).collect()
}

/// File name used for a grid inside a grid directory.
pub fn grid_file_name(grid: &AodGrid) -> String {
    let s = grid.source();
    format!(
        "{}_{}_{}.agf",
        grid.date(),
        s.sensor.name().to_ascii_lowercase(),
        s.algorithm.code().to_ascii_lowercase()
    )
}
