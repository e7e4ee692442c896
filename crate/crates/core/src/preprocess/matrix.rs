use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use chrono::Datelike;

use crate::error::{Error, Result};
use crate::ml::TrainingMatrix;
use crate::records::{MetValues, SampleKey, StationRecord};
use crate::Date;

/// Feature columns, in order. `AOD` is boundary-layer normalized.
pub const FEATURE_NAMES: [&str; 15] = [
    "AOD", "East", "North", "DPT", "T", "Blh", "SP", "Lai_hv", "Lai_lv", "WS", "WD", "Cdir", "Uvb",
    "RH", "DOY",
];

pub fn feature_names() -> Vec<String> {
    FEATURE_NAMES.iter().map(|s| s.to_string()).collect()
}

/// Day of year, 1..=366.
pub fn day_of_year(date: Date) -> u32 {
    date.ordinal()
}

/// Feature row for one location and day, given the normalized AOD.
pub fn feature_row(aod_norm: f64, east: f64, north: f64, met: &MetValues, date: Date) -> [f64; 15] {
    let m = met.to_array();
    let mut row = [0.0; 15];
    row[0] = aod_norm;
    row[1] = east;
    row[2] = north;
    row[3..14].copy_from_slice(&m);
    row[14] = day_of_year(date) as f64;
    row
}

#[derive(Debug, Clone)]
pub struct TrainingRows {
    pub matrix: TrainingMatrix,
    /// Station-days lacking at least one required feature or the target.
    pub dropped: usize,
}

/// Joins normalized AOD, kriged meteorology and corrected PM2.5 on
/// (station, date). Rows with any missing piece are dropped and counted.
pub fn build_training_matrix(
    aod: &BTreeMap<SampleKey, f64>,
    stations: &[StationRecord],
    met: &BTreeMap<SampleKey, MetValues>,
) -> Result<TrainingRows> {
    let mut sorted: Vec<&StationRecord> = stations.iter().collect();
    sorted.sort_by(|a, b| (a.station_id.as_str(), a.date).cmp(&(b.station_id.as_str(), b.date)));
    let (mut no_aod, mut no_met, mut no_target) = (0usize, 0usize, 0usize);
    let mut features = Vec::new();
    let mut targets = Vec::new();
    let mut keys = Vec::new();
    for rec in sorted {
        let key = rec.key();
        let (a, m, t) = (aod.get(&key), met.get(&key), rec.pm25_corrected);
        no_aod += a.is_none() as usize;
        no_met += m.is_none() as usize;
        no_target += t.is_none() as usize;
        if let (Some(a), Some(m), Some(t)) = (a, m, t) {
            features.extend_from_slice(&feature_row(*a, rec.east, rec.north, m, rec.date));
            targets.push(t);
            keys.push(key);
        }
    }
    let dropped = stations.len() - keys.len();
    if keys.is_empty() {
        return Err(Error::Empty(format!(
            "training matrix has no rows: {} station-days, {no_aod} without AOD, {no_met} without met, {no_target} without corrected PM2.5",
            stations.len()
        )));
    }
    let matrix = TrainingMatrix::new(feature_names(), features, targets, keys)?;
    Ok(TrainingRows { matrix, dropped })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn met() -> MetValues {
        MetValues::from_array([
            270.0, 280.0, 500.0, 87000.0, 0.5, 1.0, 2.0, 1.0, 1e7, 5e5, 40.0,
        ])
    }

    fn fixture() -> (
        BTreeMap<SampleKey, f64>,
        Vec<StationRecord>,
        BTreeMap<SampleKey, MetValues>,
    ) {
        let mut aod = BTreeMap::new();
        let mut stations = Vec::new();
        let mut mets = BTreeMap::new();
        for s in ["A", "B", "C"] {
            for d in [1u32, 2] {
                let date = Date::from_ymd_opt(2015, 1, d).unwrap();
                let key = SampleKey::new(s, date);
                aod.insert(key.clone(), 4e-4);
                mets.insert(key, met());
                stations.push(StationRecord {
                    station_id: s.into(),
                    east: 1.0,
                    north: 2.0,
                    date,
                    pm25_raw: 10.0,
                    pm25_corrected: Some(12.0),
                });
            }
        }
        (aod, stations, mets)
    }

    #[test]
    fn full_join() {
        let (aod, st, met) = fixture();
        let rows = build_training_matrix(&aod, &st, &met).unwrap();
        assert_eq!(rows.matrix.n_rows(), 6);
        assert_eq!(rows.dropped, 0);
        assert_eq!(rows.matrix.n_features(), 15);
    }

    #[test]
    fn missing_aod_dropped() {
        let (mut aod, st, met) = fixture();
        aod.remove(&SampleKey::new(
            "B",
            Date::from_ymd_opt(2015, 1, 2).unwrap(),
        ));
        let rows = build_training_matrix(&aod, &st, &met).unwrap();
        assert_eq!(rows.matrix.n_rows(), 5);
        assert_eq!(rows.dropped, 1);
    }

    #[test]
    fn empty_join_errors() {
        let (_, st, met) = fixture();
        assert!(matches!(
            build_training_matrix(&BTreeMap::new(), &st, &met),
            Err(Error::Empty(_))
        ));
    }

    #[test]
    fn doy() {
        assert_eq!(day_of_year(Date::from_ymd_opt(2015, 2, 1).unwrap()), 32);
        assert_eq!(day_of_year(Date::from_ymd_opt(2016, 12, 31).unwrap()), 366);
    }
}
