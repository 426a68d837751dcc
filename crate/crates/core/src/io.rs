//! CSV ingestion and full-precision CSV output.

use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::fdrbounds::BoundCurve;
use crate::linmodel::Dataset;
use crate::simulation::EmpiricalCurve;

/// Round-trip formatting with 17 significant digits.
pub fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Parses a dataset whose header row is followed by rows `Y, X_1, …, X_p`.
pub fn read_dataset<R: Read>(reader: R) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let width = rdr.headers()?.len();
    if width < 2 {
        return Err(Error::Config("data needs a response column and at least one predictor".into()));
    }
    let mut values = Vec::new();
    let mut rows = 0;
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        if record.len() != width {
            return Err(Error::Config(format!("data row {} has {} fields, expected {width}", i + 2, record.len())));
        }
        for (j, field) in record.iter().enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|_| Error::Config(format!("data row {}, column {}: cannot parse {field:?}", i + 2, j + 1)))?;
            values.push(v);
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(Error::Config("data has no rows".into()));
    }
    let all = Array2::from_shape_vec((rows, width), values).expect("row-major shape");
    let y: Array1<f64> = all.column(0).to_owned();
    let x = all.slice(ndarray::s![.., 1..]).to_owned();
    Dataset::new(y, x)
}

pub fn read_dataset_path(path: &Path) -> Result<Dataset> {
    read_dataset(std::fs::File::open(path)?)
}

pub fn write_dataset<W: Write>(data: &Dataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["y".to_string()];
    header.extend((1..=data.p()).map(|j| format!("x{j}")));
    w.write_record(&header)?;
    for (i, row) in data.x().rows().into_iter().enumerate() {
        let mut rec = vec![fmt_num(data.y()[i])];
        rec.extend(row.iter().map(|&v| fmt_num(v)));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

fn write_columns<W: Write>(writer: W, header: &[&str], cols: &[&[f64]]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(header)?;
    let len = cols.first().map_or(0, |c| c.len());
    for i in 0..len {
        w.write_record(cols.iter().map(|c| fmt_num(c[i])))?;
    }
    w.flush()?;
    Ok(())
}

/// Columns `K, fdr, fdr_ci, pr, pr_ci, mean_dim`.
pub fn write_empirical_curve<W: Write>(curve: &EmpiricalCurve, writer: W) -> Result<()> {
    write_columns(
        writer,
        &["K", "fdr", "fdr_ci", "pr", "pr_ci", "mean_dim"],
        &[&curve.k_grid, &curve.fdr, &curve.fdr_ci, &curve.pr, &curve.pr_ci, &curve.mean_dim],
    )
}

/// Columns `K, b, B, floor, b_mc_err, B_mc_err`.
pub fn write_bound_curve<W: Write>(curve: &BoundCurve, writer: W) -> Result<()> {
    write_columns(
        writer,
        &["K", "b", "B", "floor", "b_mc_err", "B_mc_err"],
        &[&curve.k_grid, &curve.lower, &curve.upper, &curve.floor, &curve.lower_mc_err, &curve.upper_mc_err],
    )
}

/// Reads a numeric CSV with a header into named columns.
pub fn read_columns<R: Read>(reader: R) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut rdr = csv::Reader::from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    let mut cols = vec![Vec::new(); header.len()];
    for record in rdr.records() {
        for (j, field) in record?.iter().enumerate() {
            cols[j].push(field.parse().map_err(|_| Error::Config(format!("cannot parse {field:?}")))?);
        }
    }
    Ok((header, cols))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulation::{generate, ScenarioSpec};
    use proptest::prelude::*;

    #[test]
    fn dataset_round_trip() {
        let (data, _) = generate(&ScenarioSpec::toy(3), 0).unwrap();
        let mut buf = Vec::new();
        write_dataset(&data, &mut buf).unwrap();
        let back = read_dataset(buf.as_slice()).unwrap();
        assert_eq!(back.y(), data.y());
        assert_eq!(back.x(), data.x());
    }

    #[test]
    fn malformed_data() {
        assert!(matches!(read_dataset("y\n1\n".as_bytes()), Err(Error::Config(_))));
        assert!(matches!(read_dataset("y,x1\n".as_bytes()), Err(Error::Config(_))));
        assert!(read_dataset("y,x1\n1,2\n3\n".as_bytes()).is_err());
        match read_dataset("y,x1\n1,2\n3,abc\n".as_bytes()) {
            Err(Error::Config(msg)) => assert!(msg.contains("row 3"), "{msg}"),
            other => panic!("{other:?}"),
        }
    }

    proptest! {
        #[test]
        fn seventeen_digits_round_trip(x in any::<f64>().prop_filter("finite", |v| v.is_finite())) {
            prop_assert_eq!(fmt_num(x).parse::<f64>().unwrap(), x);
        }
    }
}
