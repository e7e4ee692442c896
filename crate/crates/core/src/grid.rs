//! Gridded AOD products and their provenance.
//!
//! Grids are row-major with row 0 at the northern edge, as in ESRI ASCII
//! rasters. `origin_east`/`origin_north` locate the lower-left corner.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};
use crate::Date;

/// Default nodata sentinel.
pub const DEFAULT_NODATA: f32 = -9999.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Sensor {
    ModisTerra,
    ModisAqua,
    ViirsSnpp,
}

impl Sensor {
    pub const ALL: [Sensor; 3] = [Sensor::ModisTerra, Sensor::ModisAqua, Sensor::ViirsSnpp];

    pub fn name(self) -> &'static str {
        match self {
            Sensor::ModisTerra => "MODIS-Terra",
            Sensor::ModisAqua => "MODIS-Aqua",
            Sensor::ViirsSnpp => "VIIRS-SNPP",
        }
    }

    pub fn is_modis(self) -> bool {
        !matches!(self, Sensor::ViirsSnpp)
    }
}

impl fmt::Display for Sensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Sensor {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Sensor::ALL
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::validation("sensor", format!("unknown sensor `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Algorithm {
    DeepBlue,
    DarkTarget,
}

impl Algorithm {
    pub fn code(self) -> &'static str {
        match self {
            Algorithm::DeepBlue => "DB",
            Algorithm::DarkTarget => "DT",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Algorithm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "DB" => Ok(Algorithm::DeepBlue),
            "DT" => Ok(Algorithm::DarkTarget),
            _ => Err(Error::validation(
                "algorithm",
                format!("unknown algorithm `{s}`"),
            )),
        }
    }
}

/// A single retrieval stream: one sensor/platform with one algorithm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Source {
    pub sensor: Sensor,
    pub algorithm: Algorithm,
}

impl Source {
    pub const fn new(sensor: Sensor, algorithm: Algorithm) -> Self {
        Source { sensor, algorithm }
    }

    pub fn product(self) -> Product {
        Product::from_parts(self.sensor.is_modis(), self.algorithm)
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.sensor, self.algorithm)
    }
}

/// The four daily products that enter the fusion models. MODIS products are
/// Aqua/Terra daily averages; VIIRS products come from SNPP alone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Product {
    Mdb,
    Mdt,
    Vdb,
    Vdt,
}

impl Product {
    pub const ALL: [Product; 4] = [Product::Mdb, Product::Mdt, Product::Vdb, Product::Vdt];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn code(self) -> &'static str {
        match self {
            Product::Mdb => "MDB",
            Product::Mdt => "MDT",
            Product::Vdb => "VDB",
            Product::Vdt => "VDT",
        }
    }

    pub fn from_parts(modis: bool, algorithm: Algorithm) -> Product {
        match (modis, algorithm) {
            (true, Algorithm::DeepBlue) => Product::Mdb,
            (true, Algorithm::DarkTarget) => Product::Mdt,
            (false, Algorithm::DeepBlue) => Product::Vdb,
            (false, Algorithm::DarkTarget) => Product::Vdt,
        }
    }

    pub fn algorithm(self) -> Algorithm {
        match self {
            Product::Mdb | Product::Vdb => Algorithm::DeepBlue,
            Product::Mdt | Product::Vdt => Algorithm::DarkTarget,
        }
    }

    pub fn is_modis(self) -> bool {
        matches!(self, Product::Mdb | Product::Mdt)
    }

    /// Retrieval streams feeding this product.
    pub fn sources(self) -> Vec<Source> {
        let alg = self.algorithm();
        if self.is_modis() {
            alloc::vec![
                Source::new(Sensor::ModisAqua, alg),
                Source::new(Sensor::ModisTerra, alg)
            ]
        } else {
            alloc::vec![Source::new(Sensor::ViirsSnpp, alg)]
        }
    }
}

impl fmt::Display for Product {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Product {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Product::ALL
            .into_iter()
            .find(|p| p.code().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::validation("product", format!("unknown product `{s}`")))
    }
}

/// Subset of [`Product::ALL`] as a bitmask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct ProductSet(u8);

impl ProductSet {
    pub const EMPTY: ProductSet = ProductSet(0);

    pub fn from_bits(bits: u8) -> Self {
        ProductSet(bits & 0b1111)
    }

    pub fn bits(self) -> u8 {
        self.0
    }

    pub fn insert(&mut self, p: Product) {
        self.0 |= 1 << p.index();
    }

    pub fn contains(self, p: Product) -> bool {
        self.0 & (1 << p.index()) != 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_subset_of(self, other: ProductSet) -> bool {
        self.0 & !other.0 == 0
    }

    /// Members in canonical (MDB, MDT, VDB, VDT) order.
    pub fn iter(self) -> impl Iterator<Item = Product> {
        Product::ALL.into_iter().filter(move |p| self.contains(*p))
    }

    /// Every nonempty subset, ordered by bitmask.
    pub fn nonempty_subsets(self) -> Vec<ProductSet> {
        (1..=0b1111u8)
            .map(ProductSet)
            .filter(|s| s.is_subset_of(self))
            .collect()
    }
}

impl FromIterator<Product> for ProductSet {
    fn from_iter<I: IntoIterator<Item = Product>>(iter: I) -> Self {
        let mut s = ProductSet::EMPTY;
        for p in iter {
            s.insert(p);
        }
        s
    }
}

impl fmt::Display for ProductSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for p in self.iter() {
            if !first {
                f.write_str("+")?;
            }
            f.write_str(p.code())?;
            first = false;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeoTransform {
    pub origin_east: f64,
    pub origin_north: f64,
    pub cellsize: f64,
}

/// Raster shape plus georeference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridGeometry {
    pub nrows: usize,
    pub ncols: usize,
    pub transform: GeoTransform,
}

impl GridGeometry {
    pub fn new(nrows: usize, ncols: usize, transform: GeoTransform) -> Result<Self> {
        if nrows == 0 || ncols == 0 {
            return Err(Error::validation(
                "dimensions",
                "nrows and ncols must be positive",
            ));
        }
        if !(transform.cellsize > 0.0) || !transform.cellsize.is_finite() {
            return Err(Error::validation("cellsize", "must be positive and finite"));
        }
        if !transform.origin_east.is_finite() || !transform.origin_north.is_finite() {
            return Err(Error::validation("origin", "must be finite"));
        }
        Ok(GridGeometry {
            nrows,
            ncols,
            transform,
        })
    }

    pub fn len(&self) -> usize {
        self.nrows * self.ncols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Cell containing a coordinate; cells own their west and south edges.
    pub fn locate(&self, east: f64, north: f64) -> Option<(usize, usize)> {
        let t = &self.transform;
        let cx = (east - t.origin_east) / t.cellsize;
        let cy = (north - t.origin_north) / t.cellsize;
        if !(cx >= 0.0 && cy >= 0.0) {
            return None;
        }
        let (col, from_bottom) = (libm::floor(cx) as usize, libm::floor(cy) as usize);
        if col >= self.ncols || from_bottom >= self.nrows {
            return None;
        }
        Some((self.nrows - 1 - from_bottom, col))
    }

    pub fn cell_center(&self, row: usize, col: usize) -> (f64, f64) {
        let t = &self.transform;
        (
            t.origin_east + (col as f64 + 0.5) * t.cellsize,
            t.origin_north + ((self.nrows - row) as f64 - 0.5) * t.cellsize,
        )
    }
}

/// One product's gridded AOD with per-pixel QA codes.
#[derive(Debug, Clone, PartialEq)]
pub struct AodGrid {
    geometry: GridGeometry,
    nodata: f32,
    values: Vec<f32>,
    qa: Vec<u8>,
    source: Source,
    date: Date,
}

impl AodGrid {
    /// Builds a grid, enforcing shape, value and QA invariants.
    pub fn new(
        geometry: GridGeometry,
        nodata: f32,
        values: Vec<f32>,
        qa: Vec<u8>,
        source: Source,
        date: Date,
    ) -> Result<Self> {
        let n = geometry.len();
        if values.len() != n {
            return Err(Error::validation(
                "values",
                format!("expected {n} entries, got {}", values.len()),
            ));
        }
        if qa.len() != n {
            return Err(Error::validation(
                "qa",
                format!("expected {n} entries, got {}", qa.len()),
            ));
        }
        if !nodata.is_finite() {
            return Err(Error::validation("nodata_value", "must be finite"));
        }
        for (i, v) in values.iter().enumerate() {
            if *v != nodata && !(v.is_finite() && *v >= 0.0) {
                return Err(Error::validation(
                    "values",
                    format!(
                        "row {} col {}: AOD {v} must be finite and non-negative",
                        i / geometry.ncols,
                        i % geometry.ncols
                    ),
                ));
            }
        }
        if let Some(i) = qa.iter().position(|q| *q > 3) {
            return Err(Error::validation(
                "qa",
                format!(
                    "row {} col {}: code {} outside 0..3",
                    i / geometry.ncols,
                    i % geometry.ncols,
                    qa[i]
                ),
            ));
        }
        Ok(AodGrid {
            geometry,
            nodata,
            values,
            qa,
            source,
            date,
        })
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }
    pub fn nrows(&self) -> usize {
        self.geometry.nrows
    }
    pub fn ncols(&self) -> usize {
        self.geometry.ncols
    }
    pub fn nodata(&self) -> f32 {
        self.nodata
    }
    pub fn values(&self) -> &[f32] {
        &self.values
    }
    pub fn qa(&self) -> &[u8] {
        &self.qa
    }
    pub fn source(&self) -> Source {
        self.source
    }
    pub fn date(&self) -> Date {
        self.date
    }

    pub fn is_valid(&self, row: usize, col: usize) -> bool {
        self.values[row * self.geometry.ncols + col] != self.nodata
    }

    /// AOD at a pixel, `None` for nodata.
    pub fn value(&self, row: usize, col: usize) -> Option<f32> {
        let v = self.values[row * self.geometry.ncols + col];
        (v != self.nodata).then_some(v)
    }

    pub fn qa_at(&self, row: usize, col: usize) -> u8 {
        self.qa[row * self.geometry.ncols + col]
    }

    pub fn valid_count(&self) -> usize {
        self.values.iter().filter(|v| **v != self.nodata).count()
    }
}

/// Averages overlapping swaths of one product/day into a single grid.
///
/// Per pixel the merged value is the mean of valid inputs and QA is the
/// highest code among them. Values are sorted before summation, so the result
/// does not depend on input order.
pub fn merge_swaths(grids: &[AodGrid]) -> Result<AodGrid> {
    let first = grids
        .first()
        .ok_or_else(|| Error::Precondition("merge_swaths needs at least one grid".into()))?;
    for g in &grids[1..] {
        if g.geometry != first.geometry {
            return Err(Error::Mismatch(format!(
                "swath geometry differs for {} on {}",
                first.source, first.date
            )));
        }
        if g.source != first.source || g.date != first.date {
            return Err(Error::Mismatch(format!(
                "cannot merge {} {} with {} {}",
                first.source, first.date, g.source, g.date
            )));
        }
    }
    let nodata = first.nodata;
    let n = first.geometry.len();
    let mut values = Vec::with_capacity(n);
    let mut qa = Vec::with_capacity(n);
    let mut stack: Vec<f32> = Vec::with_capacity(grids.len());
    for i in 0..n {
        stack.clear();
        let mut best_qa = 0u8;
        for g in grids {
            let v = g.values[i];
            if v != g.nodata {
                stack.push(v);
                best_qa = best_qa.max(g.qa[i]);
            }
        }
        if stack.is_empty() {
            values.push(nodata);
            qa.push(0);
        } else {
            stack.sort_by(|a, b| a.total_cmp(b));
            let sum: f64 = stack.iter().map(|v| *v as f64).sum();
            let mut mean = (sum / stack.len() as f64) as f32;
            // An average that happens to land on the sentinel would read back as a gap.
            if mean == nodata {
                mean = stack[0];
            }
            values.push(mean);
            qa.push(best_qa);
        }
    }
    AodGrid::new(first.geometry, nodata, values, qa, first.source, first.date)
}

/// Shortcut used by tests and the synthesizer.
pub fn geometry(
    nrows: usize,
    ncols: usize,
    origin_east: f64,
    origin_north: f64,
    cellsize: f64,
) -> GridGeometry {
    GridGeometry::new(
        nrows,
        ncols,
        GeoTransform {
            origin_east,
            origin_north,
            cellsize,
        },
    )
    .expect("valid geometry")
}

impl AodGrid {
    /// Human-readable identity for diagnostics.
    pub fn label(&self) -> String {
        format!("{} {}", self.source, self.date)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn day() -> Date {
        Date::from_ymd_opt(2015, 12, 29).unwrap()
    }

    const SRC: Source = Source::new(Sensor::ModisAqua, Algorithm::DeepBlue);

    fn grid(values: Vec<f32>, qa: Vec<u8>) -> AodGrid {
        AodGrid::new(
            geometry(1, values.len(), 0.0, 0.0, 10.0),
            DEFAULT_NODATA,
            values,
            qa,
            SRC,
            day(),
        )
        .unwrap()
    }

    #[test]
    fn rejects_negative_and_bad_qa() {
        let g = geometry(1, 2, 0.0, 0.0, 1.0);
        assert!(AodGrid::new(g, -9999.0, vec![-0.05, 0.1], vec![3, 3], SRC, day()).is_err());
        assert!(AodGrid::new(g, -9999.0, vec![0.2, 0.1], vec![3, 4], SRC, day()).is_err());
        assert!(AodGrid::new(g, -9999.0, vec![0.2], vec![3], SRC, day()).is_err());
        assert!(AodGrid::new(g, -9999.0, vec![-9999.0, 0.1], vec![0, 3], SRC, day()).is_ok());
    }

    #[test]
    fn locate_and_center_agree() {
        let g = geometry(3, 4, 100.0, 200.0, 10.0);
        for r in 0..3 {
            for c in 0..4 {
                let (e, n) = g.cell_center(r, c);
                assert_eq!(g.locate(e, n), Some((r, c)));
            }
        }
        assert_eq!(g.locate(100.0, 200.0), Some((2, 0)));
        assert_eq!(g.locate(99.9, 205.0), None);
        assert_eq!(g.locate(140.0, 205.0), None);
    }

    #[test]
    fn merge_examples() {
        let nd = DEFAULT_NODATA;
        let a = grid(vec![0.2, 0.7, nd], vec![1, 2, 0]);
        let b = grid(vec![0.4, nd, nd], vec![3, 0, 0]);
        let m = merge_swaths(&[a, b]).unwrap();
        assert!((m.values()[0] - 0.3).abs() < 1e-7);
        assert_eq!(m.qa()[0], 3);
        assert_eq!(m.values()[1], 0.7);
        assert_eq!(m.qa()[1], 2);
        assert_eq!(m.values()[2], nd);
    }

    #[test]
    fn merge_rejects_mismatch() {
        let a = grid(vec![0.2], vec![1]);
        let mut b = grid(vec![0.4], vec![1]);
        b.source = Source::new(Sensor::ModisTerra, Algorithm::DeepBlue);
        assert!(matches!(
            merge_swaths(&[a.clone(), b]),
            Err(Error::Mismatch(_))
        ));
        let c = AodGrid::new(
            geometry(1, 1, 5.0, 0.0, 10.0),
            DEFAULT_NODATA,
            vec![0.1],
            vec![0],
            SRC,
            day(),
        )
        .unwrap();
        assert!(matches!(merge_swaths(&[a, c]), Err(Error::Mismatch(_))));
    }

    #[test]
    fn product_set_subsets() {
        let s: ProductSet = [Product::Mdb, Product::Vdb].into_iter().collect();
        assert_eq!(s.len(), 2);
        assert_eq!(s.nonempty_subsets().len(), 3);
        assert_eq!(alloc::format!("{s}"), "MDB+VDB");
    }

    fn swath_strategy() -> impl Strategy<Value = Vec<AodGrid>> {
        let cell = prop_oneof![Just(None), (0.0f32..3.0, 0u8..4).prop_map(Some)];
        prop::collection::vec(prop::collection::vec(cell, 6), 1..5).prop_map(|swaths| {
            swaths
                .into_iter()
                .map(|cells| {
                    let values = cells
                        .iter()
                        .map(|c| c.map_or(DEFAULT_NODATA, |v| v.0))
                        .collect();
                    let qa = cells.iter().map(|c| c.map_or(0, |v| v.1)).collect();
                    AodGrid::new(
                        geometry(2, 3, 0.0, 0.0, 1.0),
                        DEFAULT_NODATA,
                        values,
                        qa,
                        SRC,
                        day(),
                    )
                    .unwrap()
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn merge_is_permutation_invariant_and_covers_union(mut swaths in swath_strategy()) {
            let merged = merge_swaths(&swaths).unwrap();
            for i in 0..6 {
                let any = swaths.iter().any(|g| g.values()[i] != DEFAULT_NODATA);
                prop_assert_eq!(merged.values()[i] != DEFAULT_NODATA, any);
            }
            swaths.reverse();
            let reversed = merge_swaths(&swaths).unwrap();
            prop_assert_eq!(merged, reversed);
        }
    }
}
