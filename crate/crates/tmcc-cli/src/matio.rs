//! Plain-text matrix files. Two shapes:
//!
//! ```text
//! # matrix rows=R cols=C
//! <R comma-separated rows>
//! ```
//!
//! ```text
//! # dataset n=N d=D widths=W1,W2,...
//! # families=bernoulli,poisson,gaussian:<sigma2>,...
//! <N rows of D+sum(W) values; unobserved entries hold the token NaN>
//! # calibration q=Q            (section absent when uncalibrated)
//! <Q rows of A, N columns>
//! <Q rows of B, D columns>
//! ```
//!
//! Values are written with Rust's shortest round-trip float formatting,
//! so read(write(x)) reproduces x bit for bit. All diagnostics carry
//! 1-based line numbers.

use crate::{io_err, CliError};
use ndarray::Array2;
use std::fmt::Write as _;
use std::path::Path;
use tmcc::data_model::{CalibrationConstraint, Dataset, MaskedMatrix, TaskBlock};
use tmcc::expfam::Family;
use tmcc::linalg::DenseMatrix;

fn parse_error(path: &Path, line: usize, message: impl Into<String>) -> CliError {
    CliError::Parse {
        path: path.display().to_string(),
        line,
        message: message.into(),
    }
}

fn push_row(out: &mut String, row: impl Iterator<Item = String>) {
    let mut first = true;
    for tok in row {
        if !first {
            out.push(',');
        }
        out.push_str(&tok);
        first = false;
    }
    out.push('\n');
}

pub fn write_matrix(path: &Path, m: &DenseMatrix) -> Result<(), CliError> {
    let mut out = String::new();
    writeln!(out, "# matrix rows={} cols={}", m.nrows(), m.ncols()).unwrap();
    for i in 0..m.nrows() {
        push_row(&mut out, (0..m.ncols()).map(|j| format!("{}", m[[i, j]])));
    }
    std::fs::write(path, out).map_err(|e| io_err(path, e))
}

struct Lines<'a> {
    path: &'a Path,
    lines: Vec<&'a str>,
    next: usize,
}

impl<'a> Lines<'a> {
    fn new(path: &'a Path, text: &'a str) -> Self {
        Lines {
            path,
            lines: text.lines().collect(),
            next: 0,
        }
    }

    /// 1-based number of the line `take` would return.
    fn lineno(&self) -> usize {
        self.next + 1
    }

    fn take(&mut self, what: &str) -> Result<&'a str, CliError> {
        match self.lines.get(self.next) {
            Some(line) => {
                self.next += 1;
                Ok(line)
            }
            None => Err(parse_error(
                self.path,
                self.lineno(),
                format!("unexpected end of file, expected {what}"),
            )),
        }
    }

    fn peek(&self) -> Option<&'a str> {
        self.lines.get(self.next).copied()
    }

    fn expect_end(&self) -> Result<(), CliError> {
        match self.peek() {
            Some(line) if !line.trim().is_empty() => Err(parse_error(
                self.path,
                self.lineno(),
                "unexpected trailing content",
            )),
            _ => Ok(()),
        }
    }
}

/// Pull `key=value` out of a `#` header line.
fn header_field<'a>(
    path: &Path,
    line: &'a str,
    lineno: usize,
    key: &str,
) -> Result<&'a str, CliError> {
    line.split_whitespace()
        .find_map(|tok| tok.strip_prefix(key).and_then(|rest| rest.strip_prefix('=')))
        .ok_or_else(|| parse_error(path, lineno, format!("missing {key}= in header")))
}

fn parse_count(path: &Path, value: &str, lineno: usize, key: &str) -> Result<usize, CliError> {
    value
        .parse()
        .map_err(|_| parse_error(path, lineno, format!("{key}= is not a count: {value:?}")))
}

/// One CSV data row of known width; `allow_missing` maps the NaN token to
/// mask 0 instead of rejecting it.
fn parse_row(
    path: &Path,
    line: &str,
    lineno: usize,
    cols: usize,
    allow_missing: bool,
) -> Result<Vec<(f64, bool)>, CliError> {
    let tokens: Vec<&str> = line.split(',').collect();
    if tokens.len() != cols {
        return Err(parse_error(
            path,
            lineno,
            format!("expected {cols} columns, found {}", tokens.len()),
        ));
    }
    let mut row = Vec::with_capacity(cols);
    for tok in tokens {
        let v: f64 = tok.trim().parse().map_err(|_| {
            parse_error(path, lineno, format!("not a number: {tok:?}"))
        })?;
        if v.is_nan() {
            if allow_missing {
                row.push((0.0, false));
                continue;
            }
            return Err(parse_error(path, lineno, "NaN not allowed here"));
        }
        if v.is_infinite() {
            return Err(parse_error(path, lineno, format!("non-finite value: {tok:?}")));
        }
        row.push((v, true));
    }
    Ok(row)
}

fn read_dense_rows(
    path: &Path,
    lines: &mut Lines<'_>,
    rows: usize,
    cols: usize,
    what: &str,
) -> Result<DenseMatrix, CliError> {
    let mut m = Array2::zeros((rows, cols));
    for i in 0..rows {
        let lineno = lines.lineno();
        let line = lines.take(what)?;
        for (j, (v, _)) in parse_row(path, line, lineno, cols, false)?
            .into_iter()
            .enumerate()
        {
            m[[i, j]] = v;
        }
    }
    Ok(m)
}

pub fn read_matrix(path: &Path) -> Result<DenseMatrix, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut lines = Lines::new(path, &text);
    let lineno = lines.lineno();
    let header = lines.take("matrix header")?;
    if !header.starts_with("# matrix") {
        return Err(parse_error(path, lineno, "expected `# matrix rows=.. cols=..`"));
    }
    let rows = parse_count(path, header_field(path, header, lineno, "rows")?, lineno, "rows")?;
    let cols = parse_count(path, header_field(path, header, lineno, "cols")?, lineno, "cols")?;
    let m = read_dense_rows(path, &mut lines, rows, cols, "matrix row")?;
    lines.expect_end()?;
    Ok(m)
}

fn family_token(f: Family) -> String {
    match f {
        Family::Gaussian { sigma2 } => format!("gaussian:{sigma2}"),
        other => other.label().to_string(),
    }
}

fn parse_family(path: &Path, tok: &str, lineno: usize) -> Result<Family, CliError> {
    match tok.split_once(':') {
        None => match tok {
            "bernoulli" => Ok(Family::Bernoulli),
            "poisson" => Ok(Family::Poisson),
            "gaussian" => Err(parse_error(path, lineno, "gaussian family requires :<sigma2>")),
            _ => Err(parse_error(path, lineno, format!("unknown family {tok:?}"))),
        },
        Some(("gaussian", s)) => {
            let sigma2: f64 = s.parse().map_err(|_| {
                parse_error(path, lineno, format!("bad gaussian variance {s:?}"))
            })?;
            Ok(Family::Gaussian { sigma2 })
        }
        Some(_) => Err(parse_error(path, lineno, format!("unknown family {tok:?}"))),
    }
}

pub fn write_dataset(path: &Path, ds: &Dataset) -> Result<(), CliError> {
    let (n, d) = (ds.n(), ds.d());
    let widths: Vec<String> = ds.tasks.iter().map(|t| t.data.ncols().to_string()).collect();
    let families: Vec<String> = ds.tasks.iter().map(|t| family_token(t.family)).collect();
    let mut out = String::new();
    writeln!(out, "# dataset n={n} d={d} widths={}", widths.join(",")).unwrap();
    writeln!(out, "# families={}", families.join(",")).unwrap();
    let block = |values: &DenseMatrix, mask: &DenseMatrix, i: usize| {
        (0..values.ncols())
            .map(move |j| {
                if mask[[i, j]] == 1.0 {
                    format!("{}", values[[i, j]])
                } else {
                    "NaN".to_string()
                }
            })
            .collect::<Vec<_>>()
    };
    for i in 0..n {
        let mut toks = block(ds.features.values(), ds.features.mask(), i);
        for task in &ds.tasks {
            toks.extend(block(task.data.values(), task.data.mask(), i));
        }
        push_row(&mut out, toks.into_iter());
    }
    if let Some(cal) = &ds.calibration {
        writeln!(out, "# calibration q={}", cal.a.nrows()).unwrap();
        for i in 0..cal.a.nrows() {
            push_row(&mut out, (0..cal.a.ncols()).map(|j| format!("{}", cal.a[[i, j]])));
        }
        for i in 0..cal.b.nrows() {
            push_row(&mut out, (0..cal.b.ncols()).map(|j| format!("{}", cal.b[[i, j]])));
        }
    }
    std::fs::write(path, out).map_err(|e| io_err(path, e))
}

pub fn read_dataset(path: &Path) -> Result<Dataset, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut lines = Lines::new(path, &text);

    let lineno = lines.lineno();
    let header = lines.take("dataset header")?;
    if !header.starts_with("# dataset") {
        return Err(parse_error(path, lineno, "expected `# dataset n=.. d=.. widths=..`"));
    }
    let n = parse_count(path, header_field(path, header, lineno, "n")?, lineno, "n")?;
    let d = parse_count(path, header_field(path, header, lineno, "d")?, lineno, "d")?;
    let widths_raw = header_field(path, header, lineno, "widths")?;
    let widths: Vec<usize> = widths_raw
        .split(',')
        .filter(|t| !t.is_empty())
        .map(|t| parse_count(path, t, lineno, "widths"))
        .collect::<Result<_, _>>()?;

    let fam_lineno = lines.lineno();
    let fam_line = lines.take("families header")?;
    let fam_list = fam_line
        .strip_prefix("# families=")
        .ok_or_else(|| parse_error(path, fam_lineno, "expected `# families=...`"))?;
    let families: Vec<Family> = fam_list
        .split(',')
        .filter(|t| !t.is_empty())
        .map(|t| parse_family(path, t.trim(), fam_lineno))
        .collect::<Result<_, _>>()?;
    if families.len() != widths.len() {
        return Err(parse_error(
            path,
            fam_lineno,
            format!("{} families for {} task blocks", families.len(), widths.len()),
        ));
    }

    let total: usize = d + widths.iter().sum::<usize>();
    let mut values = Array2::zeros((n, total));
    let mut mask = Array2::zeros((n, total));
    for i in 0..n {
        let lineno = lines.lineno();
        let line = lines.take("data row")?;
        for (j, (v, seen)) in parse_row(path, line, lineno, total, true)?
            .into_iter()
            .enumerate()
        {
            values[[i, j]] = v;
            mask[[i, j]] = if seen { 1.0 } else { 0.0 };
        }
    }

    let calibration = match lines.peek() {
        Some(line) if line.starts_with("# calibration") => {
            let lineno = lines.lineno();
            lines.take("calibration header")?;
            let q = parse_count(path, header_field(path, line, lineno, "q")?, lineno, "q")?;
            let a = read_dense_rows(path, &mut lines, q, n, "calibration A row")?;
            let b = read_dense_rows(path, &mut lines, q, d, "calibration B row")?;
            Some(CalibrationConstraint { a, b })
        }
        _ => None,
    };
    lines.expect_end()?;

    let block = |lo: usize, hi: usize| -> Result<MaskedMatrix, CliError> {
        MaskedMatrix::new(
            values.slice(ndarray::s![.., lo..hi]).to_owned(),
            mask.slice(ndarray::s![.., lo..hi]).to_owned(),
        )
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    };
    let features = block(0, d)?;
    let mut tasks = Vec::with_capacity(widths.len());
    let mut lo = d;
    for (w, family) in widths.iter().zip(families) {
        tasks.push(TaskBlock {
            data: block(lo, lo + w)?,
            family,
        });
        lo += w;
    }
    Ok(Dataset {
        features,
        tasks,
        calibration,
    })
}
