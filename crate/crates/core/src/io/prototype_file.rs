//! Prototype matrices as CSV (for plotting) and JSON (keyed by class name).
//!
//! CSV: header `class,<name_0>,...,<name_{C-1}>,observed,source_weight`, then
//! one row per class with 17 significant digits per value. JSON: an object
//! with `schema_version`, `class_names` and `prototypes`, where each class maps
//! to `{observed, source_weight, row: {<name>: value}}`.
//!
//! Both importers re-validate every prototype invariant.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde_json::{json, Map, Value};

use crate::calibration::PrototypeSet;
use crate::error::{Error, Result};

pub const PROTOTYPE_SCHEMA_VERSION: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrototypeFormat {
    Csv,
    Json,
}

impl PrototypeFormat {
    /// Picks the format from a `.csv` / `.json` extension.
    pub fn from_path(path: &Path) -> Result<Self> {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => Ok(PrototypeFormat::Csv),
            Some(e) if e.eq_ignore_ascii_case("json") => Ok(PrototypeFormat::Json),
            _ => Err(Error::invalid(format!(
                "cannot infer prototype format from {}",
                path.display()
            ))),
        }
    }
}

pub fn export_prototypes<W: Write>(
    protos: &PrototypeSet,
    dest: W,
    format: PrototypeFormat,
) -> Result<()> {
    match format {
        PrototypeFormat::Csv => write_csv(protos, dest),
        PrototypeFormat::Json => write_json(protos, dest),
    }
}

pub fn import_prototypes<R: Read>(src: R, format: PrototypeFormat) -> Result<PrototypeSet> {
    match format {
        PrototypeFormat::Csv => read_csv(src),
        PrototypeFormat::Json => read_json(src),
    }
}

pub fn save_prototypes(protos: &PrototypeSet, path: &Path) -> Result<()> {
    let format = PrototypeFormat::from_path(path)?;
    let mut out = BufWriter::new(File::create(path)?);
    export_prototypes(protos, &mut out, format)?;
    out.flush()?;
    Ok(())
}

pub fn load_prototypes(path: &Path) -> Result<PrototypeSet> {
    let format = PrototypeFormat::from_path(path)?;
    import_prototypes(BufReader::new(File::open(path)?), format)
}

/// Formats `x` with 17 significant digits, positional where that stays short,
/// trailing zeros trimmed. 17 digits round-trip every `f64`.
pub fn format_sig17(x: f64) -> String {
    if x == 0.0 {
        return "0".to_owned();
    }
    let sci = format!("{x:.16e}");
    let (_, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-7..=20).contains(&exp) {
        return sci;
    }
    let decimals = (16 - exp).max(0) as usize;
    let mut s = format!("{x:.decimals$}");
    if s.contains('.') {
        let trimmed = s.trim_end_matches('0').trim_end_matches('.').len();
        s.truncate(trimmed);
    }
    s
}

fn write_csv<W: Write>(protos: &PrototypeSet, dest: W) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(dest);
    let mut header = vec!["class".to_owned()];
    header.extend(protos.class_names().iter().cloned());
    header.push("observed".to_owned());
    header.push("source_weight".to_owned());
    wtr.write_record(&header)?;
    for (c, row) in protos.rows().enumerate() {
        let mut record = vec![protos.class_names()[c].clone()];
        record.extend(row.iter().map(|&v| format_sig17(v)));
        record.push(protos.observed()[c].to_string());
        record.push(format_sig17(protos.source_weight()[c]));
        wtr.write_record(&record)?;
    }
    wtr.flush()?;
    Ok(())
}

fn read_csv<R: Read>(src: R) -> Result<PrototypeSet> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(src);
    let header = rdr.headers()?.clone();
    if header.len() < 4
        || header.get(0) != Some("class")
        || header.get(header.len() - 2) != Some("observed")
        || header.get(header.len() - 1) != Some("source_weight")
    {
        return Err(Error::Format(
            "prototype CSV header must be class,<names...>,observed,source_weight".into(),
        ));
    }
    let n = header.len() - 3;
    let names: Vec<String> = header.iter().skip(1).take(n).map(str::to_owned).collect();
    let mut matrix = Vec::with_capacity(n * n);
    let mut observed = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for (c, record) in rdr.records().enumerate() {
        let record = record?;
        if c >= n {
            return Err(Error::dim(format!("more than {n} prototype rows")));
        }
        if record.get(0) != Some(names[c].as_str()) {
            return Err(Error::Format(format!(
                "row {c} is labelled {:?}, expected {:?}",
                record.get(0).unwrap_or(""),
                names[c]
            )));
        }
        for j in 0..n {
            matrix.push(parse_f64(&record[j + 1])?);
        }
        observed.push(match &record[n + 1] {
            "true" => true,
            "false" => false,
            other => return Err(Error::Format(format!("observed flag {other:?}"))),
        });
        weights.push(parse_f64(&record[n + 2])?);
    }
    if observed.len() != n {
        return Err(Error::dim(format!(
            "{} prototype rows for {n} classes",
            observed.len()
        )));
    }
    PrototypeSet::from_parts(names, matrix, observed, weights)
}

fn parse_f64(s: &str) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| Error::Format(format!("not a number: {s:?}")))
}

fn write_json<W: Write>(protos: &PrototypeSet, mut dest: W) -> Result<()> {
    let names = protos.class_names();
    let mut by_class = Map::new();
    for (c, row) in protos.rows().enumerate() {
        let entries: Map<String, Value> = names
            .iter()
            .zip(row)
            .map(|(name, &v)| (name.clone(), json!(v)))
            .collect();
        by_class.insert(
            names[c].clone(),
            json!({
                "observed": protos.observed()[c],
                "source_weight": protos.source_weight()[c],
                "row": entries,
            }),
        );
    }
    let doc = json!({
        "schema_version": PROTOTYPE_SCHEMA_VERSION,
        "num_classes": names.len(),
        "class_names": names,
        "prototypes": by_class,
    });
    serde_json::to_writer_pretty(&mut dest, &doc)?;
    dest.write_all(b"\n")?;
    Ok(())
}

fn read_json<R: Read>(src: R) -> Result<PrototypeSet> {
    let doc: Value = serde_json::from_reader(src)?;
    let field = |v: &Value, key: &str| -> Result<Value> {
        v.get(key)
            .cloned()
            .ok_or_else(|| Error::Format(format!("missing field {key:?}")))
    };
    let version = field(&doc, "schema_version")?.as_u64();
    if version != Some(PROTOTYPE_SCHEMA_VERSION) {
        return Err(Error::Format(format!(
            "unsupported schema_version {version:?}"
        )));
    }
    let names: Vec<String> = serde_json::from_value(field(&doc, "class_names")?)?;
    let n = names.len();
    let by_class = field(&doc, "prototypes")?;
    let by_class = by_class
        .as_object()
        .ok_or_else(|| Error::Format("prototypes must be an object".into()))?;
    if by_class.len() != n {
        return Err(Error::dim(format!(
            "{} prototypes for {n} classes",
            by_class.len()
        )));
    }
    let mut matrix = Vec::with_capacity(n * n);
    let mut observed = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for name in &names {
        let entry = by_class
            .get(name)
            .ok_or_else(|| Error::Format(format!("no prototype for class {name:?}")))?;
        observed.push(
            field(entry, "observed")?
                .as_bool()
                .ok_or_else(|| Error::Format("observed must be a boolean".into()))?,
        );
        weights.push(
            field(entry, "source_weight")?
                .as_f64()
                .ok_or_else(|| Error::Format("source_weight must be a number".into()))?,
        );
        let row = field(entry, "row")?;
        let row = row
            .as_object()
            .ok_or_else(|| Error::Format("row must be an object".into()))?;
        if row.len() != n {
            return Err(Error::dim(format!(
                "prototype {name:?} has {} entries",
                row.len()
            )));
        }
        for col in &names {
            let v = row
                .get(col)
                .and_then(Value::as_f64)
                .ok_or_else(|| Error::Format(format!("prototype {name:?} lacks {col:?}")))?;
            matrix.push(v);
        }
    }
    PrototypeSet::from_parts(names, matrix, observed, weights)
}
