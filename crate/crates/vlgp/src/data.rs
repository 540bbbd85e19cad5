//! CSV data exchange. Numbers are written with 17 significant digits.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use vlgp_core::covariance::Locations;
use vlgp_core::laplace::Design;

use crate::error::{io_err, CliError, CliResult};

/// `v` with 17 significant digits, which round-trips every finite double.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "NaN".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// Header-addressed CSV dataset: coordinates `s1..sd`, optional response `y` and
/// covariates `x1..xp`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub locations: Locations,
    pub y: Option<Vec<f64>>,
    /// Row-major `n x p`.
    pub x: Vec<f64>,
    pub p: usize,
}

impl Dataset {
    pub fn n(&self) -> usize {
        self.locations.len()
    }

    pub fn dim(&self) -> usize {
        self.locations.dim()
    }

    pub fn response(&self) -> CliResult<&[f64]> {
        self.y.as_deref().ok_or_else(|| CliError::data("the data file has no 'y' column"))
    }

    /// Covariates with a leading column of ones when `intercept` is set.
    pub fn design(&self, intercept: bool) -> CliResult<Design> {
        let n = self.n();
        let p = self.p + intercept as usize;
        let mut data = Vec::with_capacity(n * p);
        for i in 0..n {
            if intercept {
                data.push(1.0);
            }
            data.extend_from_slice(&self.x[i * self.p..(i + 1) * self.p]);
        }
        Ok(Design::new(n, p, data)?)
    }
}

#[derive(Clone, Copy)]
enum Column {
    S(usize),
    Y,
    X(usize),
}

fn parse_header(header: &csv::StringRecord) -> CliResult<(Vec<Column>, usize, bool, usize)> {
    let mut cols = Vec::with_capacity(header.len());
    let mut seen = std::collections::BTreeSet::new();
    for name in header.iter() {
        let name = name.trim();
        if !seen.insert(name.to_string()) {
            return Err(CliError::data(format!("duplicate column '{name}'")));
        }
        let indexed = |prefix: &str| -> Option<usize> {
            name.strip_prefix(prefix).and_then(|r| r.parse::<usize>().ok()).filter(|&k| k >= 1)
        };
        let col = if name == "y" {
            Column::Y
        } else if let Some(k) = indexed("s") {
            Column::S(k - 1)
        } else if let Some(k) = indexed("x") {
            Column::X(k - 1)
        } else {
            return Err(CliError::data(format!(
                "unknown column '{name}' (expected s1..sd, y and x1..xp)"
            )));
        };
        cols.push(col);
    }
    let count = |f: &dyn Fn(&Column) -> Option<usize>| -> CliResult<usize> {
        let mut idx: Vec<usize> = cols.iter().filter_map(f).collect();
        idx.sort_unstable();
        for (i, &k) in idx.iter().enumerate() {
            if i != k {
                return Err(CliError::data("coordinate and covariate columns must be numbered 1, 2, ... without gaps"));
            }
        }
        Ok(idx.len())
    };
    let d = count(&|c| if let Column::S(k) = c { Some(*k) } else { None })?;
    let p = count(&|c| if let Column::X(k) = c { Some(*k) } else { None })?;
    if d == 0 {
        return Err(CliError::data("the data file needs at least one coordinate column 's1'"));
    }
    let has_y = cols.iter().any(|c| matches!(c, Column::Y));
    Ok((cols, d, has_y, p))
}

pub fn read_dataset(path: &Path) -> CliResult<Dataset> {
    let file = File::open(path).map_err(io_err(path))?;
    read_dataset_from(file, &path.display().to_string())
}

pub fn read_dataset_from<R: std::io::Read>(reader: R, name: &str) -> CliResult<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).comment(Some(b'#')).trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers().map_err(|e| CliError::data(format!("{name}: cannot read header: {e}")))?.clone();
    let (cols, d, has_y, p) = parse_header(&header).map_err(|e| CliError::data(format!("{name}: {e}")))?;
    let mut coords = Vec::new();
    let mut y = Vec::new();
    let mut x = Vec::new();
    let mut row = alloc_row(d, p);
    for (r, rec) in rdr.records().enumerate() {
        let row_no = r + 1;
        let rec = rec.map_err(|e| CliError::data(format!("{name}: row {row_no}: {e}")))?;
        if rec.len() != cols.len() {
            return Err(CliError::data(format!(
                "{name}: row {row_no}: expected {} fields, found {}",
                cols.len(),
                rec.len()
            )));
        }
        let mut yv = f64::NAN;
        for (field, col) in rec.iter().zip(&cols) {
            let v: f64 = field.parse().map_err(|_| {
                CliError::data(format!("{name}: row {row_no}: '{field}' is not a number"))
            })?;
            if !v.is_finite() {
                return Err(CliError::data(format!("{name}: row {row_no}: non-finite value '{field}'")));
            }
            match *col {
                Column::S(k) => row.0[k] = v,
                Column::Y => yv = v,
                Column::X(k) => row.1[k] = v,
            }
        }
        coords.extend_from_slice(&row.0);
        x.extend_from_slice(&row.1);
        if has_y {
            y.push(yv);
        }
    }
    if coords.is_empty() {
        return Err(CliError::data(format!("{name}: no data rows")));
    }
    let locations = Locations::new(coords, d)?;
    Ok(Dataset { locations, y: has_y.then_some(y), x, p })
}

fn alloc_row(d: usize, p: usize) -> (Vec<f64>, Vec<f64>) {
    (vec![0.0; d], vec![0.0; p])
}

/// Writes named columns of equal length.
pub fn write_columns(path: &Path, comment: Option<&str>, names: &[String], cols: &[&[f64]]) -> CliResult<()> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    write_columns_to(&mut w, comment, names, cols).map_err(io_err(path))?;
    w.flush().map_err(io_err(path))
}

pub fn write_columns_to<W: Write>(w: &mut W, comment: Option<&str>, names: &[String], cols: &[&[f64]]) -> std::io::Result<()> {
    debug_assert_eq!(names.len(), cols.len());
    if let Some(c) = comment {
        writeln!(w, "# {c}")?;
    }
    writeln!(w, "{}", names.join(","))?;
    let n = cols.first().map_or(0, |c| c.len());
    let mut line = String::new();
    for i in 0..n {
        line.clear();
        for (j, c) in cols.iter().enumerate() {
            if j > 0 {
                line.push(',');
            }
            line.push_str(&fmt_f64(c[i]));
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}

/// Coordinate columns of `locs` as separate vectors, with their names.
pub fn coordinate_columns(locs: &Locations) -> (Vec<String>, Vec<Vec<f64>>) {
    let d = locs.dim();
    let names = (1..=d).map(|k| format!("s{k}")).collect();
    let cols = (0..d).map(|k| (0..locs.len()).map(|i| locs.point(i)[k]).collect()).collect();
    (names, cols)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_columns_in_any_order() {
        let text = "y,x1,s2,s1\n1,0.5,0.2,0.1\n0,-1,0.4,0.3\n";
        let d = read_dataset_from(text.as_bytes(), "t").unwrap();
        assert_eq!(d.n(), 2);
        assert_eq!(d.locations.point(1), &[0.3, 0.4]);
        assert_eq!(d.y.as_deref(), Some(&[1.0, 0.0][..]));
        assert_eq!(d.x, vec![0.5, -1.0]);
        let x = d.design(true).unwrap();
        assert_eq!(x.row(1), &[1.0, -1.0]);
    }

    #[test]
    fn malformed_row_is_named() {
        let text = "s1,s2,y\n0.1,0.2,1\n0.3,oops,0\n";
        let e = read_dataset_from(text.as_bytes(), "t").unwrap_err();
        assert!(e.to_string().contains("row 2"), "{e}");
        assert_eq!(e.exit_code(), 3);
        let short = "s1,s2,y\n0.1,0.2\n";
        assert!(read_dataset_from(short.as_bytes(), "t").unwrap_err().to_string().contains("row 1"));
    }

    #[test]
    fn rejects_unknown_and_gapped_columns() {
        assert!(read_dataset_from("s1,z\n1,2\n".as_bytes(), "t").is_err());
        assert!(read_dataset_from("s1,s3\n1,2\n".as_bytes(), "t").is_err());
        assert!(read_dataset_from("y\n1\n".as_bytes(), "t").is_err());
        assert!(read_dataset_from("s1,y\n".as_bytes(), "t").is_err());
    }

    #[test]
    fn seventeen_digits_round_trip() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MIN_POSITIVE] {
            let s = fmt_f64(v);
            assert_eq!(s.parse::<f64>().unwrap(), v);
            let mantissa = s.split('e').next().unwrap().trim_start_matches('-');
            assert_eq!(mantissa.chars().filter(|c| c.is_ascii_digit()).count(), 17);
        }
    }

    #[test]
    fn written_columns_read_back() {
        let mut buf = Vec::new();
        let names = vec!["s1".to_string(), "y".to_string()];
        write_columns_to(&mut buf, Some("note"), &names, &[&[0.25, 0.5], &[1.0, 0.0]]).unwrap();
        let d = read_dataset_from(&buf[..], "t").unwrap();
        assert_eq!(d.locations.coords(), &[0.25, 0.5]);
        assert_eq!(d.y.unwrap(), vec![1.0, 0.0]);
    }
}
