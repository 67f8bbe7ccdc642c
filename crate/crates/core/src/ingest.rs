//! Block-group datasets and their wide CSV layout.
//!
//! One row per block group:
//!
//! ```text
//! id,lat,lon,phi,pci,population,ec_1,...,ec_T,hh_1,...,hh_T
//! ```
//!
//! `T` is inferred from the number of `ec_*` columns and the `hh_*` block
//! must have the same length. Rows must be complete; there is no encoding
//! for a missing month.

use std::collections::HashSet;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geostats::GeoPoint;

const FIXED_COLUMNS: [&str; 6] = ["id", "lat", "lon", "phi", "pci", "population"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockGroupRecord {
    pub id: String,
    /// Degrees latitude of the block-group centroid.
    pub lat: f64,
    /// Degrees longitude of the block-group centroid.
    pub lon: f64,
    /// Monthly electricity consumption totals, kWh.
    pub ec: Vec<f64>,
    /// Monthly household counts, each at least 1.
    pub households: Vec<u32>,
    /// Income per household, $/household/year.
    pub phi: f64,
    /// Income per capita, $/person/year.
    pub pci: f64,
    pub population: u32,
}

impl BlockGroupRecord {
    pub fn months(&self) -> usize {
        self.ec.len()
    }

    pub fn position(&self) -> GeoPoint {
        GeoPoint::new(self.lat, self.lon)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub records: Vec<BlockGroupRecord>,
    pub months: usize,
    /// Ground-truth zone per record; only synthetic data carries these.
    pub labels: Option<Vec<usize>>,
}

impl Dataset {
    /// Builds a dataset, checking that every record has the same month count
    /// and that ids are unique.
    pub fn new(records: Vec<BlockGroupRecord>, labels: Option<Vec<usize>>) -> Result<Self> {
        let months = records.first().map_or(0, |r| r.months());
        let mut seen = HashSet::with_capacity(records.len());
        for (i, r) in records.iter().enumerate() {
            if r.ec.len() != months || r.households.len() != months {
                return Err(Error::LengthMismatch {
                    row: i + 1,
                    detail: format!(
                        "expected {months} months, found ec={} hh={}",
                        r.ec.len(),
                        r.households.len()
                    ),
                });
            }
            if !seen.insert(r.id.as_str()) {
                return Err(Error::DuplicateId(r.id.clone()));
            }
        }
        if let Some(l) = &labels {
            if l.len() != records.len() {
                return Err(Error::DimensionMismatch {
                    expected: records.len(),
                    found: l.len(),
                });
            }
        }
        Ok(Self {
            records,
            months,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn ids(&self) -> Vec<String> {
        self.records.iter().map(|r| r.id.clone()).collect()
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.records.iter().position(|r| r.id == id)
    }
}

/// Column expectations for [`parse_dataset`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CsvSchema {
    /// Required month count; `None` infers it from the header.
    pub months: Option<usize>,
}

impl CsvSchema {
    pub fn with_months(months: usize) -> Self {
        Self {
            months: Some(months),
        }
    }
}

pub fn parse_dataset(path: impl AsRef<Path>, schema: CsvSchema) -> Result<Dataset> {
    let file = std::fs::File::open(path)?;
    parse_dataset_from_reader(file, schema)
}

pub fn parse_dataset_from_reader<R: Read>(reader: R, schema: CsvSchema) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    let months = check_header(&header, schema)?;
    let width = FIXED_COLUMNS.len() + 2 * months;

    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row?;
        let rownum = i + 1;
        if row.len() != width {
            return Err(Error::LengthMismatch {
                row: rownum,
                detail: format!("expected {width} fields, found {}", row.len()),
            });
        }
        let id = row[0].to_owned();
        let float = |col: usize| -> Result<f64> {
            row[col]
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::MalformedNumber {
                    row: rownum,
                    col,
                    value: row[col].to_owned(),
                })
        };
        let count = |col: usize| -> Result<u32> {
            row[col].parse::<u32>().map_err(|_| Error::MalformedNumber {
                row: rownum,
                col,
                value: row[col].to_owned(),
            })
        };
        let lat = float(1)?;
        let lon = float(2)?;
        let phi = float(3)?;
        let pci = float(4)?;
        let population = count(5)?;
        let ec = (0..months)
            .map(|t| float(FIXED_COLUMNS.len() + t))
            .collect::<Result<Vec<_>>>()?;
        let households = (0..months)
            .map(|t| count(FIXED_COLUMNS.len() + months + t))
            .collect::<Result<Vec<_>>>()?;
        if let Some(t) = households.iter().position(|&h| h < 1) {
            return Err(Error::DomainViolation {
                row: rownum,
                detail: format!("hh_{} must be at least 1", t + 1),
            });
        }
        if population < 1 {
            return Err(Error::DomainViolation {
                row: rownum,
                detail: "population must be at least 1".into(),
            });
        }
        if !seen.insert(id.clone()) {
            return Err(Error::DuplicateId(id));
        }
        records.push(BlockGroupRecord {
            id,
            lat,
            lon,
            ec,
            households,
            phi,
            pci,
            population,
        });
    }
    Ok(Dataset {
        records,
        months,
        labels: None,
    })
}

fn check_header(header: &[String], schema: CsvSchema) -> Result<usize> {
    for (i, name) in FIXED_COLUMNS.iter().enumerate() {
        if header.get(i).map(String::as_str) != Some(*name) {
            return Err(Error::MissingColumn((*name).to_owned()));
        }
    }
    let rest = &header[FIXED_COLUMNS.len()..];
    let months = rest.iter().take_while(|h| h.starts_with("ec_")).count();
    if let Some(expected) = schema.months {
        if months != expected {
            return Err(Error::MissingColumn(format!("ec_{}", months.min(expected) + 1)));
        }
    }
    if months == 0 {
        return Err(Error::MissingColumn("ec_1".into()));
    }
    for t in 0..months {
        let want = format!("ec_{}", t + 1);
        if rest[t] != want {
            return Err(Error::MissingColumn(want));
        }
    }
    for t in 0..months {
        let want = format!("hh_{}", t + 1);
        if rest.get(months + t) != Some(&want) {
            return Err(Error::MissingColumn(want));
        }
    }
    if rest.len() > 2 * months {
        return Err(Error::LengthMismatch {
            row: 0,
            detail: format!(
                "header has {} columns, expected {}",
                header.len(),
                FIXED_COLUMNS.len() + 2 * months
            ),
        });
    }
    Ok(months)
}

pub fn write_dataset(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_dataset_to(ds, std::io::BufWriter::new(file))
}

/// Writes the wide CSV layout. Floats use Rust's shortest round-trip
/// formatting, so parsing the output recovers every value bit-for-bit.
pub fn write_dataset_to<W: Write>(ds: &Dataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = FIXED_COLUMNS.iter().map(|s| (*s).to_owned()).collect();
    header.extend((1..=ds.months).map(|t| format!("ec_{t}")));
    header.extend((1..=ds.months).map(|t| format!("hh_{t}")));
    w.write_record(&header)?;
    for r in &ds.records {
        let mut row = Vec::with_capacity(header.len());
        row.push(r.id.clone());
        row.push(r.lat.to_string());
        row.push(r.lon.to_string());
        row.push(r.phi.to_string());
        row.push(r.pci.to_string());
        row.push(r.population.to_string());
        row.extend(r.ec.iter().map(f64::to_string));
        row.extend(r.households.iter().map(u32::to_string));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes one `id,zone` row per record.
pub fn write_zone_labels<W: Write>(ds: &Dataset, labels: &[usize], writer: W) -> Result<()> {
    if labels.len() != ds.len() {
        return Err(Error::DimensionMismatch {
            expected: ds.len(),
            found: labels.len(),
        });
    }
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["id", "zone"])?;
    for (r, z) in ds.records.iter().zip(labels) {
        w.write_record([r.id.as_str(), &z.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads an `id,zone` file and returns the zone of each record of `ds`.
/// Every record must be labelled exactly once.
pub fn read_zone_labels(ds: &Dataset, path: impl AsRef<Path>) -> Result<Vec<usize>> {
    let file = std::fs::File::open(path)?;
    read_zone_labels_from(ds, file)
}

pub fn read_zone_labels_from<R: Read>(ds: &Dataset, reader: R) -> Result<Vec<usize>> {
    let mut r = csv::Reader::from_reader(reader);
    let headers = r.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::MissingColumn(name.into()))
    };
    let (id_col, zone_col) = (col("id")?, col("zone")?);
    let index: std::collections::HashMap<&str, usize> = ds
        .records
        .iter()
        .enumerate()
        .map(|(i, r)| (r.id.as_str(), i))
        .collect();
    let mut labels = vec![None; ds.len()];
    for (row, rec) in r.records().enumerate() {
        let rec = rec?;
        let id = rec[id_col].trim();
        let zone: usize = rec[zone_col].trim().parse().map_err(|_| Error::MalformedNumber {
            row: row + 1,
            col: zone_col + 1,
            value: rec[zone_col].to_string(),
        })?;
        let i = *index.get(id).ok_or_else(|| Error::UnknownId(id.into()))?;
        if labels[i].replace(zone).is_some() {
            return Err(Error::DuplicateId(id.into()));
        }
    }
    labels
        .into_iter()
        .zip(&ds.records)
        .map(|(l, r)| l.ok_or_else(|| Error::UnknownId(r.id.clone())))
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub records: usize,
    /// Months with `ec <= 0`, summed over all records.
    pub nonpositive_consumption_months: usize,
    pub records_with_nonpositive_consumption: usize,
    /// Records where per-household income is below per-capita income.
    pub phi_below_pci: usize,
    pub nonpositive_income: usize,
    pub coordinate_violations: usize,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.nonpositive_consumption_months == 0
            && self.phi_below_pci == 0
            && self.nonpositive_income == 0
            && self.coordinate_violations == 0
    }
}

pub fn validate(ds: &Dataset) -> ValidationReport {
    let mut report = ValidationReport {
        records: ds.len(),
        ..Default::default()
    };
    for r in &ds.records {
        let bad = r.ec.iter().filter(|&&e| e <= 0.0).count();
        report.nonpositive_consumption_months += bad;
        if bad > 0 {
            report.records_with_nonpositive_consumption += 1;
        }
        if r.phi < r.pci {
            report.phi_below_pci += 1;
        }
        if r.phi <= 0.0 || r.pci <= 0.0 {
            report.nonpositive_income += 1;
        }
        if !GeoPoint::new(r.lat, r.lon).is_valid() {
            report.coordinate_violations += 1;
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    fn csv_text(months: usize, rows: &[(&str, f64, u32)]) -> String {
        let mut s = String::from("id,lat,lon,phi,pci,population");
        for t in 1..=months {
            s += &format!(",ec_{t}");
        }
        for t in 1..=months {
            s += &format!(",hh_{t}");
        }
        s.push('\n');
        for (id, ec, hh) in rows {
            s += &format!("{id},34.0,-118.2,60000,25000,1000");
            for _ in 0..months {
                s += &format!(",{ec}");
            }
            for _ in 0..months {
                s += &format!(",{hh}");
            }
            s.push('\n');
        }
        s
    }

    #[test]
    fn parses_three_rows_of_72_months() {
        let text = csv_text(72, &[("a", 1000.0, 10), ("b", 900.0, 9), ("c", 500.0, 4)]);
        let ds = parse_dataset_from_reader(text.as_bytes(), CsvSchema::default()).unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.months, 72);
        assert_eq!(ds.ids(), vec!["a", "b", "c"]);
        assert_eq!(ds.records[2].households[71], 4);
    }

    #[test]
    fn zero_households_is_a_domain_violation() {
        let text = csv_text(72, &[("a", 1000.0, 10), ("b", 900.0, 0)]);
        let err = parse_dataset_from_reader(text.as_bytes(), CsvSchema::default()).unwrap_err();
        assert!(matches!(err, Error::DomainViolation { row: 2, .. }), "{err}");
    }

    #[test]
    fn duplicate_ids_rejected() {
        let text = csv_text(12, &[("a", 1.0, 1), ("a", 1.0, 1)]);
        let err = parse_dataset_from_reader(text.as_bytes(), CsvSchema::default()).unwrap_err();
        assert!(matches!(err, Error::DuplicateId(id) if id == "a"));
    }

    #[test]
    fn malformed_number_reports_position() {
        let text = csv_text(12, &[("a", 1.0, 1)]).replace("34.0", "north");
        let err = parse_dataset_from_reader(text.as_bytes(), CsvSchema::default()).unwrap_err();
        assert!(matches!(err, Error::MalformedNumber { row: 1, col: 1, .. }), "{err}");
    }

    #[test]
    fn short_row_is_length_mismatch() {
        let mut text = csv_text(12, &[("a", 1.0, 1)]);
        text.push_str("b,34,-118,1,1,1,5\n");
        let err = parse_dataset_from_reader(text.as_bytes(), CsvSchema::default()).unwrap_err();
        assert!(matches!(err, Error::LengthMismatch { row: 2, .. }), "{err}");
    }

    #[test]
    fn header_problems_name_the_column() {
        let text = csv_text(12, &[("a", 1.0, 1)]).replace("pci", "pcx");
        let err = parse_dataset_from_reader(text.as_bytes(), CsvSchema::default()).unwrap_err();
        assert!(matches!(err, Error::MissingColumn(c) if c == "pci"));

        let text = csv_text(12, &[("a", 1.0, 1)]).replace("hh_7,", "hh_x,");
        let err = parse_dataset_from_reader(text.as_bytes(), CsvSchema::default()).unwrap_err();
        assert!(matches!(err, Error::MissingColumn(c) if c == "hh_7"));

        let text = csv_text(12, &[("a", 1.0, 1)]);
        let err = parse_dataset_from_reader(text.as_bytes(), CsvSchema::with_months(72)).unwrap_err();
        assert!(matches!(err, Error::MissingColumn(_)));
    }

    #[test]
    fn validate_counts_problems_without_mutating() {
        let text = csv_text(12, &[("a", 1000.0, 10), ("b", 900.0, 9)]);
        let mut ds = parse_dataset_from_reader(text.as_bytes(), CsvSchema::default()).unwrap();
        assert!(validate(&ds).is_clean());

        ds.records[0].lat = 95.0;
        ds.records[1].ec[3] = 0.0;
        ds.records[1].pci = 70000.0;
        let before = ds.clone();
        let report = validate(&ds);
        assert_eq!(ds, before);
        assert_eq!(report.coordinate_violations, 1);
        assert_eq!(report.nonpositive_consumption_months, 1);
        assert_eq!(report.records_with_nonpositive_consumption, 1);
        assert_eq!(report.phi_below_pci, 1);
    }

    #[test]
    fn dataset_new_checks_lengths() {
        let rec = |id: &str, t: usize| BlockGroupRecord {
            id: id.into(),
            lat: 0.0,
            lon: 0.0,
            ec: vec![1.0; t],
            households: vec![1; t],
            phi: 1.0,
            pci: 1.0,
            population: 1,
        };
        assert!(Dataset::new(vec![rec("a", 12), rec("b", 12)], None).is_ok());
        assert!(matches!(
            Dataset::new(vec![rec("a", 12), rec("b", 24)], None),
            Err(Error::LengthMismatch { row: 2, .. })
        ));
        assert!(matches!(
            Dataset::new(vec![rec("a", 12), rec("a", 12)], None),
            Err(Error::DuplicateId(_))
        ));
    }

    fn three_rows() -> Dataset {
        let text = csv_text(12, &[("a", 1000.0, 10), ("b", 900.0, 9), ("c", 500.0, 4)]);
        parse_dataset_from_reader(text.as_bytes(), CsvSchema::default()).unwrap()
    }

    #[test]
    fn zone_labels_round_trip_in_any_row_order() {
        let ds = three_rows();
        let mut buf = Vec::new();
        write_zone_labels(&ds, &[2, 0, 1], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "id,zone\na,2\nb,0\nc,1\n");
        let shuffled = " zone , id \n1,c\n 2 ,a\n0,b\n";
        assert_eq!(read_zone_labels_from(&ds, shuffled.as_bytes()).unwrap(), vec![2, 0, 1]);
    }

    #[test]
    fn zone_label_problems() {
        let ds = three_rows();
        let read = |text: &str| read_zone_labels_from(&ds, text.as_bytes());
        assert!(matches!(read("id,cluster\na,0\n"), Err(Error::MissingColumn(_))));
        assert!(matches!(read("id,zone\na,0\nb,x\nc,1\n"), Err(Error::MalformedNumber { row: 2, .. })));
        assert!(matches!(read("id,zone\na,0\nb,1\nz,1\n"), Err(Error::UnknownId(id)) if id == "z"));
        assert!(matches!(read("id,zone\na,0\nb,1\n"), Err(Error::UnknownId(id)) if id == "c"));
        assert!(matches!(read("id,zone\na,0\nb,1\na,1\n"), Err(Error::DuplicateId(id)) if id == "a"));
        assert!(matches!(
            write_zone_labels(&ds, &[0, 1], Vec::new()),
            Err(Error::DimensionMismatch { expected: 3, found: 2 })
        ));
    }
}
