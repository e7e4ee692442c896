//! Assembly of the model-ready dataset from raw grids and tables.
//!
//! Station-days get per-product daily AOD (window filter, Aqua/Terra gap
//! fill, daily average), a data-level fused AOD, kriged meteorology and a
//! humidity-corrected target. Every pixel-day gets the same availability
//! decision, which defines coverage. A pixel is available for a source only
//! if its own retrieval exists and its window passes the dispersion filter.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::fusion::{fuse_weighted, mask_coverage};
use crate::grid::{
    merge_swaths, Algorithm, AodGrid, GridGeometry, Product, ProductSet, Sensor, Source,
};
use crate::preprocess::{
    build_training_matrix, correct_pm25, daily_average, extract_window, extract_window_at,
    fit_cross_fill_pairs, fit_variogram, normalize_aod, CrossFillRegression, OrdinaryKriging,
    PreprocessParams, TrainingRows, VariogramKind, WindowSample,
};
use crate::records::{
    validate_met, validate_stations, MetRecord, MetValues, SampleKey, StationRecord,
};
use crate::Date;

type DayLayers = (
    BTreeMap<Product, Vec<f32>>,
    Vec<f32>,
    BTreeMap<Source, WindowStats>,
);

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetConfig {
    pub preprocess: PreprocessParams,
    pub products: ProductSet,
    pub variogram_kinds: Vec<VariogramKind>,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            preprocess: PreprocessParams::default(),
            products: Product::ALL.into_iter().collect(),
            variogram_kinds: VariogramKind::ALL.to_vec(),
        }
    }
}

/// Aqua/Terra regressions of one algorithm. `None` when too few pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossFill {
    pub algorithm: Algorithm,
    pub aqua_to_terra: Option<CrossFillRegression>,
    pub terra_to_aqua: Option<CrossFillRegression>,
    pub n_pairs: usize,
}

/// Pixel-day window counts for one source.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct WindowStats {
    /// Pixel-days whose own retrieval exists.
    pub retrieved: usize,
    /// Of those, windows rejected by the dispersion filter.
    pub rejected: usize,
    /// Of the accepted ones, windows with zero quality weight.
    pub zero_weight: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub geometry: GridGeometry,
    pub dates: Vec<Date>,
    pub products: ProductSet,
    pub params: PreprocessParams,
    /// Station-days with the humidity-corrected target filled in where met
    /// could be kriged.
    pub stations: Vec<StationRecord>,
    pub met: BTreeMap<SampleKey, MetValues>,
    /// Daily AOD (not yet normalized) per product at station-days.
    pub product_aod: BTreeMap<Product, BTreeMap<SampleKey, f64>>,
    /// Data-level fused AOD at station-days.
    pub fused_aod: BTreeMap<SampleKey, f64>,
    pub crossfill: Vec<CrossFill>,
    /// Daily AOD per product over all pixel-days (`date index · cells + cell`),
    /// NaN where unavailable.
    pub pixel_aod: BTreeMap<Product, Vec<f32>>,
    pub pixel_fused: Vec<f32>,
    pub window_stats: BTreeMap<Source, WindowStats>,
}

fn sources_of(products: ProductSet) -> Vec<Source> {
    let mut v: Vec<Source> = products.iter().flat_map(|p| p.sources()).collect();
    v.sort();
    v
}

/// Kriges every met variable of one day's records at the given points.
pub fn krige_met(
    records: &[&MetRecord],
    points: &[(f64, f64)],
    kinds: &[VariogramKind],
) -> Result<Vec<MetValues>> {
    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(MetValues::COUNT);
    for v in 0..MetValues::COUNT {
        let samples: Vec<(f64, f64, f64)> = records
            .iter()
            .map(|r| (r.east, r.north, r.values.to_array()[v]))
            .collect();
        let model = fit_variogram(&samples, kinds)?;
        let ok = OrdinaryKriging::new(&samples, model)?;
        columns.push(points.iter().map(|&(e, n)| ok.predict(e, n)).collect());
    }
    Ok((0..points.len())
        .map(|i| {
            let mut a = [0.0; MetValues::COUNT];
            for v in 0..MetValues::COUNT {
                a[v] = columns[v][i];
            }
            let mut m = MetValues::from_array(a);
            // Kriging is a weighted mean with possibly negative weights.
            m.rh = m.rh.clamp(0.0, 100.0);
            m.blh = m.blh.max(f64::MIN_POSITIVE);
            m
        })
        .collect())
}

fn met_by_date(met: &[MetRecord]) -> BTreeMap<Date, Vec<&MetRecord>> {
    let mut by: BTreeMap<Date, Vec<&MetRecord>> = BTreeMap::new();
    for r in met {
        by.entry(r.date).or_default().push(r);
    }
    for v in by.values_mut() {
        v.sort_by(|a, b| a.east.total_cmp(&b.east).then(a.north.total_cmp(&b.north)));
    }
    by
}

/// Kriged met at every cell center of `geometry` for one date.
pub fn krige_met_grid(
    met: &[MetRecord],
    date: Date,
    geometry: &GridGeometry,
    kinds: &[VariogramKind],
) -> Result<Vec<MetValues>> {
    let by = met_by_date(met);
    let recs = by
        .get(&date)
        .ok_or_else(|| Error::Empty(format!("no meteorological records on {date}")))?;
    let points: Vec<(f64, f64)> = (0..geometry.nrows)
        .flat_map(|r| (0..geometry.ncols).map(move |c| (r, c)))
        .map(|(r, c)| geometry.cell_center(r, c))
        .collect();
    krige_met(recs, &points, kinds)
}

/// Merges swaths per (source, date) and checks all grids share one geometry.
pub fn merge_all(grids: &[AodGrid]) -> Result<BTreeMap<(Source, Date), AodGrid>> {
    let first = grids
        .first()
        .ok_or_else(|| Error::Empty("no AOD grids".into()))?;
    let geometry = *first.geometry();
    let mut groups: BTreeMap<(Source, Date), Vec<AodGrid>> = BTreeMap::new();
    for g in grids {
        if *g.geometry() != geometry {
            return Err(Error::Mismatch(format!(
                "{} is not co-registered with {}",
                g.label(),
                first.label()
            )));
        }
        groups
            .entry((g.source(), g.date()))
            .or_default()
            .push(g.clone());
    }
    groups
        .into_iter()
        .map(|(k, v)| {
            Ok((
                k,
                if v.len() == 1 {
                    v.into_iter().next().expect("one")
                } else {
                    merge_swaths(&v)?
                },
            ))
        })
        .collect()
}

fn product_value(
    product: Product,
    get: impl Fn(Source) -> Option<f64>,
    crossfill: &BTreeMap<Algorithm, CrossFill>,
) -> Option<f64> {
    if product.is_modis() {
        let alg = product.algorithm();
        let aqua = get(Source::new(Sensor::ModisAqua, alg));
        let terra = get(Source::new(Sensor::ModisTerra, alg));
        let cf = crossfill.get(&alg);
        daily_average(
            aqua,
            terra,
            cf.and_then(|c| c.aqua_to_terra.as_ref()),
            cf.and_then(|c| c.terra_to_aqua.as_ref()),
        )
    } else {
        get(Source::new(Sensor::ViirsSnpp, product.algorithm()))
    }
}

impl Dataset {
    pub fn build<E: Executor>(
        grids: &[AodGrid],
        stations: &[StationRecord],
        met: &[MetRecord],
        config: &DatasetConfig,
        exec: &E,
    ) -> Result<Dataset> {
        validate_stations(stations)?;
        validate_met(met)?;
        if config.products.is_empty() {
            return Err(Error::Config("no products selected".into()));
        }
        let params = config.preprocess;
        let merged = merge_all(grids)?;
        let geometry = *merged.values().next().expect("nonempty").geometry();
        let mut dates: Vec<Date> = merged.keys().map(|(_, d)| *d).collect();
        dates.sort();
        dates.dedup();
        let sources = sources_of(config.products);

        // Meteorology at station-days, kriged per date.
        let by_date = met_by_date(met);
        let mut station_dates: Vec<Date> = stations.iter().map(|s| s.date).collect();
        station_dates.sort();
        station_dates.dedup();
        let mut sorted_stations: Vec<StationRecord> = stations.to_vec();
        sorted_stations
            .sort_by(|a, b| (a.station_id.as_str(), a.date).cmp(&(b.station_id.as_str(), b.date)));
        let kriged: Vec<Result<Vec<(SampleKey, MetValues)>>> = exec.map(station_dates.len(), |i| {
            let date = station_dates[i];
            let Some(recs) = by_date.get(&date) else {
                return Ok(Vec::new());
            };
            let on_day: Vec<&StationRecord> =
                sorted_stations.iter().filter(|s| s.date == date).collect();
            let points: Vec<(f64, f64)> = on_day.iter().map(|s| (s.east, s.north)).collect();
            let values = krige_met(recs, &points, &config.variogram_kinds)?;
            Ok(on_day.iter().map(|s| s.key()).zip(values).collect())
        });
        let mut met_at: BTreeMap<SampleKey, MetValues> = BTreeMap::new();
        for r in kriged {
            met_at.extend(r?);
        }

        let mut corrected = sorted_stations;
        for s in corrected.iter_mut() {
            s.pm25_corrected = match met_at.get(&s.key()) {
                Some(m) => Some(correct_pm25(s.pm25_raw, m.rh, params.rh_max)?),
                None => None,
            };
        }

        // Station windows per source.
        let mut station_windows: BTreeMap<Source, BTreeMap<SampleKey, WindowSample>> =
            BTreeMap::new();
        for s in &corrected {
            for &src in &sources {
                if let Some(g) = merged.get(&(src, s.date)) {
                    let w =
                        extract_window(g, s.east, s.north, params.std_threshold).map_err(|_| {
                            Error::Mismatch(format!(
                                "station {} at ({}, {}) lies outside the AOD grid",
                                s.station_id, s.east, s.north
                            ))
                        })?;
                    station_windows.entry(src).or_default().insert(s.key(), w);
                }
            }
        }

        // Pooled Aqua/Terra regressions per algorithm.
        let mut crossfill = BTreeMap::new();
        for alg in [Algorithm::DeepBlue, Algorithm::DarkTarget] {
            if !config.products.contains(Product::from_parts(true, alg)) {
                continue;
            }
            let empty = BTreeMap::new();
            let aqua = station_windows
                .get(&Source::new(Sensor::ModisAqua, alg))
                .unwrap_or(&empty);
            let terra = station_windows
                .get(&Source::new(Sensor::ModisTerra, alg))
                .unwrap_or(&empty);
            let pairs: Vec<(f64, f64)> = aqua
                .iter()
                .filter(|(_, w)| w.valid)
                .filter_map(|(k, a)| {
                    terra
                        .get(k)
                        .filter(|t| t.valid)
                        .map(|t| (a.mean_aod, t.mean_aod))
                })
                .collect();
            let swapped: Vec<(f64, f64)> = pairs.iter().map(|&(a, t)| (t, a)).collect();
            crossfill.insert(
                alg,
                CrossFill {
                    algorithm: alg,
                    aqua_to_terra: fit_cross_fill_pairs(&pairs, params.min_pairs).ok(),
                    terra_to_aqua: fit_cross_fill_pairs(&swapped, params.min_pairs).ok(),
                    n_pairs: pairs.len(),
                },
            );
        }

        let mut product_aod: BTreeMap<Product, BTreeMap<SampleKey, f64>> = BTreeMap::new();
        let mut fused_aod = BTreeMap::new();
        for s in &corrected {
            let key = s.key();
            let window = |src: Source| {
                station_windows
                    .get(&src)
                    .and_then(|m| m.get(&key))
                    .filter(|w| w.valid)
            };
            for p in config.products.iter() {
                if let Some(v) = product_value(p, |src| window(src).map(|w| w.mean_aod), &crossfill)
                {
                    product_aod.entry(p).or_default().insert(key.clone(), v);
                }
            }
            let items: Vec<(f64, f64)> = sources
                .iter()
                .filter_map(|&src| window(src))
                .map(|w| (w.mean_aod, w.weight))
                .collect();
            if let Some(v) = fuse_weighted(&items) {
                fused_aod.insert(key, v);
            }
        }

        // Pixel-day availability.
        let cells = geometry.len();
        let per_date: Vec<DayLayers> = exec.map(dates.len(), |di| {
            let date = dates[di];
            let mut layers: BTreeMap<Source, Vec<Option<(f64, f64)>>> = BTreeMap::new();
            let mut stats = BTreeMap::new();
            for &src in &sources {
                let mut st = WindowStats::default();
                let layer = match merged.get(&(src, date)) {
                    None => vec![None; cells],
                    Some(g) => (0..cells)
                        .map(|i| {
                            let (r, c) = (i / geometry.ncols, i % geometry.ncols);
                            if !g.is_valid(r, c) {
                                return None;
                            }
                            st.retrieved += 1;
                            let w = extract_window_at(g, r, c, params.std_threshold);
                            if !w.valid {
                                st.rejected += 1;
                                return None;
                            }
                            if w.weight == 0.0 {
                                st.zero_weight += 1;
                            }
                            Some((w.mean_aod, w.weight))
                        })
                        .collect(),
                };
                stats.insert(src, st);
                layers.insert(src, layer);
            }
            let mut products = BTreeMap::new();
            for p in config.products.iter() {
                let v: Vec<f32> = (0..cells)
                    .map(|i| {
                        product_value(
                            p,
                            |src| layers.get(&src).and_then(|l| l[i]).map(|x| x.0),
                            &crossfill,
                        )
                        .map_or(f32::NAN, |v| v as f32)
                    })
                    .collect();
                products.insert(p, v);
            }
            let fused: Vec<f32> = (0..cells)
                .map(|i| {
                    let items: Vec<(f64, f64)> =
                        sources.iter().filter_map(|s| layers[s][i]).collect();
                    fuse_weighted(&items).map_or(f32::NAN, |v| v as f32)
                })
                .collect();
            (products, fused, stats)
        });
        let mut pixel_aod: BTreeMap<Product, Vec<f32>> = config
            .products
            .iter()
            .map(|p| (p, Vec::with_capacity(cells * dates.len())))
            .collect();
        let mut pixel_fused = Vec::with_capacity(cells * dates.len());
        let mut window_stats: BTreeMap<Source, WindowStats> = BTreeMap::new();
        for (products, fused, stats) in per_date {
            for (p, v) in products {
                pixel_aod.get_mut(&p).expect("configured product").extend(v);
            }
            pixel_fused.extend(fused);
            for (src, st) in stats {
                let e = window_stats.entry(src).or_default();
                e.retrieved += st.retrieved;
                e.rejected += st.rejected;
                e.zero_weight += st.zero_weight;
            }
        }

        Ok(Dataset {
            geometry,
            dates,
            products: config.products,
            params,
            stations: corrected,
            met: met_at,
            product_aod,
            fused_aod,
            crossfill: crossfill.into_values().collect(),
            pixel_aod,
            pixel_fused,
            window_stats,
        })
    }

    fn normalized(&self, aod: &BTreeMap<SampleKey, f64>) -> BTreeMap<SampleKey, f64> {
        aod.iter()
            .filter_map(|(k, v)| {
                self.met
                    .get(k)
                    .map(|m| (k.clone(), normalize_aod(*v, m.blh, self.params.blh_min)))
            })
            .collect()
    }

    /// Training rows for one product, or for the data-level fused AOD when
    /// `product` is `None`.
    pub fn training_rows(&self, product: Option<Product>) -> Result<TrainingRows> {
        let aod = match product {
            Some(p) => self
                .product_aod
                .get(&p)
                .ok_or_else(|| Error::Empty(format!("product {p} has no station samples")))?,
            None => &self.fused_aod,
        };
        build_training_matrix(&self.normalized(aod), &self.stations, &self.met)
    }

    pub fn n_cells(&self) -> usize {
        self.geometry.len()
    }

    /// Pixel-day availability mask of a product (`None`: data-level fused).
    pub fn availability(&self, product: Option<Product>) -> Result<Vec<bool>> {
        let layer = match product {
            Some(p) => self
                .pixel_aod
                .get(&p)
                .ok_or_else(|| Error::Empty(format!("product {p} not in dataset")))?,
            None => &self.pixel_fused,
        };
        Ok(layer.iter().map(|v| !v.is_nan()).collect())
    }

    pub fn coverage(&self, product: Option<Product>) -> Result<f64> {
        mask_coverage(&self.availability(product)?)
    }

    /// Pixel AOD of one product on one date, NaN where unavailable.
    pub fn pixel_day(&self, product: Product, date: Date) -> Option<&[f32]> {
        let di = self.dates.binary_search(&date).ok()?;
        let n = self.n_cells();
        self.pixel_aod
            .get(&product)
            .map(|v| &v[di * n..(di + 1) * n])
    }
}
