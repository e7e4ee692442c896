//! CSV tables: stations, meteorology, training matrices, quasi-stations and
//! cross-validation results.

use std::path::Path;

use aeromix_core::mapgen::QuasiStation;
use aeromix_core::ml::{CvResult, ModelParams, TrainingMatrix};
use aeromix_core::records::{validate_met, validate_stations};
use aeromix_core::{Date, MetRecord, MetValues, SampleKey, StationRecord};

use crate::error::{AppError, AppResult};
use crate::fsio;

pub const STATION_COLUMNS: [&str; 5] = ["station_id", "east", "north", "date", "pm25"];
pub const MET_COLUMNS: [&str; 14] = [
    "east", "north", "date", "dpt", "t", "blh", "sp", "lai_hv", "lai_lv", "ws", "wd", "cdir",
    "uvb", "rh",
];
pub const QUASI_COLUMNS: [&str; 5] = ["east", "north", "date", "pm25", "source"];
pub const TARGET_COLUMN: &str = "target_pm25";

/// A CSV body with named-column lookup and line-aware errors.
struct Table<'a> {
    path: &'a Path,
    index: Vec<usize>,
    rows: Vec<(usize, csv::StringRecord)>,
}

impl<'a> Table<'a> {
    fn parse(path: &'a Path, text: &str, required: &[&str]) -> AppResult<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let headers = reader
            .headers()
            .map_err(|e| AppError::parse(path, 1, e))?
            .clone();
        let mut index = Vec::with_capacity(required.len());
        for name in required {
            let i = headers
                .iter()
                .position(|h| h == *name)
                .ok_or_else(|| AppError::parse(path, 1, format!("missing column `{name}`")))?;
            index.push(i);
        }
        let mut rows = Vec::new();
        for rec in reader.records() {
            let rec = rec.map_err(|e| {
                let line = e.position().map_or(0, |p| p.line() as usize);
                AppError::parse(path, line, e)
            })?;
            let line = rec.position().map_or(0, |p| p.line() as usize);
            rows.push((line, rec));
        }
        Ok(Table { path, index, rows })
    }

    fn get<'r>(
        &self,
        row: &'r (usize, csv::StringRecord),
        col: usize,
        name: &str,
    ) -> AppResult<&'r str> {
        row.1
            .get(self.index[col])
            .ok_or_else(|| AppError::parse(self.path, row.0, format!("missing value for `{name}`")))
    }

    fn value<T: std::str::FromStr>(
        &self,
        row: &(usize, csv::StringRecord),
        col: usize,
        name: &str,
    ) -> AppResult<T>
    where
        T::Err: std::fmt::Display,
    {
        let s = self.get(row, col, name)?;
        s.parse::<T>()
            .map_err(|e| AppError::parse(self.path, row.0, format!("`{name}` = `{s}`: {e}")))
    }
}

pub fn parse_stations(path: &Path, text: &str) -> AppResult<Vec<StationRecord>> {
    let t = Table::parse(path, text, &STATION_COLUMNS)?;
    let mut out = Vec::with_capacity(t.rows.len());
    for row in &t.rows {
        out.push(StationRecord {
            station_id: t.get(row, 0, "station_id")?.to_string(),
            east: t.value(row, 1, "east")?,
            north: t.value(row, 2, "north")?,
            date: t.value::<Date>(row, 3, "date")?,
            pm25_raw: t.value(row, 4, "pm25")?,
            pm25_corrected: None,
        });
    }
    validate_stations(&out).map_err(|e| AppError::core(path.display(), e))?;
    Ok(out)
}

pub fn parse_met(path: &Path, text: &str) -> AppResult<Vec<MetRecord>> {
    let t = Table::parse(path, text, &MET_COLUMNS)?;
    let mut out = Vec::with_capacity(t.rows.len());
    for row in &t.rows {
        let mut a = [0.0; MetValues::COUNT];
        for (k, v) in a.iter_mut().enumerate() {
            *v = t.value(row, 3 + k, MET_COLUMNS[3 + k])?;
        }
        out.push(MetRecord {
            east: t.value(row, 0, "east")?,
            north: t.value(row, 1, "north")?,
            date: t.value(row, 2, "date")?,
            values: MetValues::from_array(a),
        });
    }
    validate_met(&out).map_err(|e| AppError::core(path.display(), e))?;
    Ok(out)
}

pub fn load_stations(path: &Path) -> AppResult<Vec<StationRecord>> {
    parse_stations(path, &fsio::read_text(path)?)
}

pub fn load_met(path: &Path) -> AppResult<Vec<MetRecord>> {
    parse_met(path, &fsio::read_text(path)?)
}

fn finish(w: csv::Writer<Vec<u8>>) -> String {
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8 csv")
}

fn writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new())
}

fn write_row<I, S>(w: &mut csv::Writer<Vec<u8>>, row: I)
where
    I: IntoIterator<Item = S>,
    S: AsRef<[u8]>,
{
    w.write_record(row).expect("in-memory csv");
}

pub fn stations_to_csv(records: &[StationRecord]) -> String {
    let mut w = writer();
    write_row(&mut w, STATION_COLUMNS);
    for r in records {
        write_row(
            &mut w,
            [
                r.station_id.clone(),
                r.east.to_string(),
                r.north.to_string(),
                r.date.to_string(),
                r.pm25_raw.to_string(),
            ],
        );
    }
    finish(w)
}

pub fn met_to_csv(records: &[MetRecord]) -> String {
    let mut w = writer();
    write_row(&mut w, MET_COLUMNS);
    for r in records {
        let mut row = vec![r.east.to_string(), r.north.to_string(), r.date.to_string()];
        row.extend(r.values.to_array().iter().map(|v| v.to_string()));
        write_row(&mut w, row);
    }
    finish(w)
}

/// Training matrix: feature columns then `target_pm25`.
pub fn matrix_to_csv(m: &TrainingMatrix) -> String {
    let mut w = writer();
    let mut header: Vec<String> = m.feature_names().to_vec();
    header.push(TARGET_COLUMN.into());
    write_row(&mut w, header);
    for i in 0..m.n_rows() {
        let mut row: Vec<String> = m.row(i).iter().map(|v| v.to_string()).collect();
        row.push(m.targets()[i].to_string());
        write_row(&mut w, row);
    }
    finish(w)
}

/// Row keys of a training matrix, in row order (`station_id,date`).
pub fn matrix_keys_to_csv(m: &TrainingMatrix) -> String {
    let mut w = writer();
    write_row(&mut w, ["station_id", "date"]);
    for k in m.keys() {
        write_row(&mut w, [k.station_id.clone(), k.date.to_string()]);
    }
    finish(w)
}

pub fn parse_matrix_keys(path: &Path, text: &str) -> AppResult<Vec<SampleKey>> {
    let t = Table::parse(path, text, &["station_id", "date"])?;
    t.rows
        .iter()
        .map(|row| {
            Ok(SampleKey::new(
                t.get(row, 0, "station_id")?,
                t.value::<Date>(row, 1, "date")?,
            ))
        })
        .collect()
}

/// Parses a training matrix; rows get synthetic keys when `keys` is `None`.
pub fn parse_matrix(
    path: &Path,
    text: &str,
    keys: Option<Vec<SampleKey>>,
) -> AppResult<TrainingMatrix> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| AppError::parse(path, 1, e))?
        .iter()
        .map(str::to_string)
        .collect();
    if headers.len() < 2 || headers.last().map(String::as_str) != Some(TARGET_COLUMN) {
        return Err(AppError::parse(
            path,
            1,
            format!("expected `<features>,{TARGET_COLUMN}` header"),
        ));
    }
    let arity = headers.len() - 1;
    let (mut features, mut targets) = (Vec::new(), Vec::new());
    for rec in reader.records() {
        let rec = rec
            .map_err(|e| AppError::parse(path, e.position().map_or(0, |p| p.line() as usize), e))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        for (i, field) in rec.iter().enumerate() {
            let v: f64 = field.parse().map_err(|e| {
                AppError::parse(path, line, format!("`{}` = `{field}`: {e}", headers[i]))
            })?;
            if i < arity {
                features.push(v);
            } else {
                targets.push(v);
            }
        }
    }
    let keys = match keys {
        Some(k) => k,
        None => {
            let epoch = Date::from_ymd_opt(2000, 1, 1).expect("valid date");
            (0..targets.len())
                .map(|i| SampleKey::new(format!("row{i:06}"), epoch))
                .collect()
        }
    };
    TrainingMatrix::new(headers[..arity].to_vec(), features, targets, keys)
        .map_err(|e| AppError::core(path.display(), e))
}

pub fn quasi_to_csv(points: &[QuasiStation]) -> String {
    let mut w = writer();
    write_row(&mut w, QUASI_COLUMNS);
    for q in points {
        write_row(
            &mut w,
            [
                q.east.to_string(),
                q.north.to_string(),
                q.date.to_string(),
                q.pm25.to_string(),
                q.source.clone(),
            ],
        );
    }
    finish(w)
}

/// Human-readable hyperparameter label used in CV tables and reports.
pub fn params_label(p: &ModelParams) -> String {
    match p {
        ModelParams::Gbt(g) => format!(
            "gbt n_trees={} max_depth={} learning_rate={} subsample={} min_samples_leaf={}",
            g.n_trees, g.max_depth, g.learning_rate, g.subsample, g.min_samples_leaf
        ),
        ModelParams::Rf(r) => format!(
            "rf n_trees={} max_depth={} min_samples_leaf={} bootstrap={} max_features={}",
            r.n_trees,
            r.max_depth,
            r.min_samples_leaf,
            r.bootstrap,
            crate::bundle::max_features_label(r.max_features)
        ),
        ModelParams::Linear => "linear".into(),
    }
}

pub fn cv_to_csv(label: &str, cv: &CvResult) -> String {
    let mut w = writer();
    let folds = cv.rows.first().map_or(0, |r| r.fold_rmse.len());
    let mut header = vec![
        "target".to_string(),
        "params".into(),
        "best".into(),
        "mean_rmse".into(),
    ];
    header.extend((1..=folds).map(|k| format!("fold{k}_rmse")));
    write_row(&mut w, header);
    for (i, row) in cv.rows.iter().enumerate() {
        let mut r = vec![
            label.to_string(),
            params_label(&row.params),
            (i == cv.best_index).to_string(),
            row.mean_rmse.to_string(),
        ];
        r.extend(row.fold_rmse.iter().map(|v| v.to_string()));
        write_row(&mut w, r);
    }
    finish(w)
}
