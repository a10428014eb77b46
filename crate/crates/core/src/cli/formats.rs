//! Plain-text grid files for tabulated fields and Sincov decompositions.
//!
//! Both formats are CSV with `#` header lines. A tabulated field reads
//!
//! ```text
//! # tabulated-field
//! # n=1
//! # axis t -1.5 2 8
//! # axis x1 -3 3 6001
//! t,x1,f1
//! -1.5,-3,9
//! ...
//! ```
//!
//! with one row per grid site in row-major order (time outermost) and
//! `NaN` at skipped sites. A decomposition reads
//!
//! ```text
//! # sincov-decomposition
//! # n=2
//! # tau0=0
//! # span=enforced
//! tau,w11,w12,w21,w22,h1,h2
//! ```
//!
//! with one row per grid time and `W` in row-major order.

use crate::linear::SincovDecomposition;
use crate::reconstruct::{Axis, TabulatedField};
use nalgebra::{DMatrix, DVector};
use std::io::{self, BufRead, Write};

const FIELD_MAGIC: &str = "# tabulated-field";
const DECOMPOSITION_MAGIC: &str = "# sincov-decomposition";

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

fn syntax(line: usize, message: impl Into<String>) -> FormatError {
    FormatError::Syntax {
        line,
        message: message.into(),
    }
}

/// Shortest round-tripping text for `v`, switching to exponent form for
/// very large or very small magnitudes.
pub fn fmt_num(v: f64) -> String {
    let m = v.abs();
    if v == 0.0 || !v.is_finite() || (1e-4..1e15).contains(&m) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

fn parse_num(s: &str, line: usize) -> Result<f64, FormatError> {
    s.trim()
        .parse()
        .map_err(|_| syntax(line, format!("bad number `{}`", s.trim())))
}

fn write_row(w: &mut dyn Write, values: impl IntoIterator<Item = f64>) -> io::Result<()> {
    let row: Vec<String> = values.into_iter().map(fmt_num).collect();
    writeln!(w, "{}", row.join(","))
}

/// Line reader that skips blank lines and counts line numbers for errors.
struct Reader<R> {
    lines: io::Lines<R>,
    line: usize,
}

impl<R: BufRead> Reader<R> {
    fn new(r: R) -> Self {
        Reader { lines: r.lines(), line: 0 }
    }

    fn next(&mut self) -> Result<Option<String>, FormatError> {
        loop {
            match self.lines.next() {
                None => return Ok(None),
                Some(l) => {
                    self.line += 1;
                    let l = l?;
                    if !l.trim().is_empty() {
                        return Ok(Some(l.trim().to_owned()));
                    }
                }
            }
        }
    }

    fn expect(&mut self, what: &str) -> Result<String, FormatError> {
        self.next()?
            .ok_or_else(|| syntax(self.line + 1, format!("unexpected end of file, expected {what}")))
    }

    fn numbers(&mut self, width: usize) -> Result<Option<Vec<f64>>, FormatError> {
        let Some(l) = self.next()? else {
            return Ok(None);
        };
        let row = l
            .split(',')
            .map(|s| parse_num(s, self.line))
            .collect::<Result<Vec<_>, _>>()?;
        if row.len() != width {
            return Err(syntax(self.line, format!("expected {width} columns, found {}", row.len())));
        }
        Ok(Some(row))
    }
}

fn header_value<'a>(line: &'a str, key: &str, at: usize) -> Result<&'a str, FormatError> {
    line.strip_prefix("# ")
        .and_then(|s| s.strip_prefix(key))
        .and_then(|s| s.strip_prefix('='))
        .map(str::trim)
        .ok_or_else(|| syntax(at, format!("expected `# {key}=...`")))
}

pub fn write_tabulated(field: &TabulatedField, w: &mut dyn Write) -> io::Result<()> {
    let axes = field.axes();
    let n = axes.len() - 1;
    writeln!(w, "{FIELD_MAGIC}")?;
    writeln!(w, "# n={n}")?;
    for (k, a) in axes.iter().enumerate() {
        let name = if k == 0 { "t".to_owned() } else { format!("x{k}") };
        writeln!(w, "# axis {name} {} {} {}", fmt_num(a.lo), fmt_num(a.hi), a.count)?;
    }
    let mut cols = vec!["t".to_owned()];
    cols.extend((1..=n).map(|k| format!("x{k}")));
    cols.extend((1..=n).map(|k| format!("f{k}")));
    writeln!(w, "{}", cols.join(","))?;
    for i in 0..field.site_count() {
        let site = field.site(i);
        write_row(w, site.into_iter().chain(field.site_value(i).iter().copied()))?;
    }
    Ok(())
}

pub fn read_tabulated(r: impl BufRead) -> Result<TabulatedField, FormatError> {
    let mut rd = Reader::new(r);
    let magic = rd.expect("header")?;
    if magic != FIELD_MAGIC {
        return Err(syntax(rd.line, format!("expected `{FIELD_MAGIC}`")));
    }
    let line = rd.expect("`# n=`")?;
    let n: usize = header_value(&line, "n", rd.line)?
        .parse()
        .map_err(|_| syntax(rd.line, "bad dimension"))?;
    let mut axes = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let line = rd.expect("axis line")?;
        let at = rd.line;
        let parts: Vec<&str> = line.split_whitespace().collect();
        let name = if k == 0 { "t".to_owned() } else { format!("x{k}") };
        if parts.len() != 6 || parts[0] != "#" || parts[1] != "axis" || parts[2] != name {
            return Err(syntax(at, format!("expected `# axis {name} lo hi count`")));
        }
        let lo = parse_num(parts[3], at)?;
        let hi = parse_num(parts[4], at)?;
        let count: usize = parts[5].parse().map_err(|_| syntax(at, "bad node count"))?;
        if !(lo < hi && count >= 2) {
            return Err(syntax(at, "axis needs lo < hi and at least two nodes"));
        }
        axes.push(Axis::new(lo, hi, count));
    }
    rd.expect("column header")?;
    let width = 1 + 2 * n;
    let sites: usize = axes.iter().map(|a| a.count).product();
    let shell = TabulatedField::new(axes.clone(), vec![0.0; sites * n]);
    let mut values = Vec::with_capacity(sites * n);
    for i in 0..sites {
        let row = rd
            .numbers(width)?
            .ok_or_else(|| syntax(rd.line + 1, format!("expected {sites} rows, found {i}")))?;
        let expect = shell.site(i);
        let tol = |a: &Axis| 1e-9 * (a.hi - a.lo).abs().max(1.0);
        if expect.iter().zip(&row).zip(&axes).any(|((e, r), a)| (e - r).abs() > tol(a)) {
            return Err(syntax(rd.line, "site coordinates do not match the axes"));
        }
        values.extend_from_slice(&row[1 + n..]);
    }
    if rd.next()?.is_some() {
        return Err(syntax(rd.line, "trailing rows after the last site"));
    }
    Ok(TabulatedField::new(axes, values))
}

pub fn write_decomposition(dec: &SincovDecomposition, w: &mut dyn Write) -> io::Result<()> {
    let n = dec.dim();
    writeln!(w, "{DECOMPOSITION_MAGIC}")?;
    writeln!(w, "# n={n}")?;
    writeln!(w, "# tau0={}", fmt_num(dec.tau0))?;
    writeln!(w, "# span={}", if dec.enforce_span { "enforced" } else { "extended" })?;
    let mut cols = vec!["tau".to_owned()];
    for i in 1..=n {
        cols.extend((1..=n).map(|j| format!("w{i}{j}")));
    }
    cols.extend((1..=n).map(|k| format!("h{k}")));
    writeln!(w, "{}", cols.join(","))?;
    for (i, &tau) in dec.grid.iter().enumerate() {
        let w_row_major = dec.w[i].transpose();
        write_row(
            w,
            std::iter::once(tau)
                .chain(w_row_major.iter().copied())
                .chain(dec.h[i].iter().copied()),
        )?;
    }
    Ok(())
}

pub fn read_decomposition(r: impl BufRead) -> Result<SincovDecomposition, FormatError> {
    let mut rd = Reader::new(r);
    let magic = rd.expect("header")?;
    if magic != DECOMPOSITION_MAGIC {
        return Err(syntax(rd.line, format!("expected `{DECOMPOSITION_MAGIC}`")));
    }
    let line = rd.expect("`# n=`")?;
    let n: usize = header_value(&line, "n", rd.line)?
        .parse()
        .map_err(|_| syntax(rd.line, "bad dimension"))?;
    let line = rd.expect("`# tau0=`")?;
    let tau0 = parse_num(header_value(&line, "tau0", rd.line)?, rd.line)?;
    let line = rd.expect("`# span=`")?;
    let enforce_span = match header_value(&line, "span", rd.line)? {
        "enforced" => true,
        "extended" => false,
        other => return Err(syntax(rd.line, format!("unknown span mode `{other}`"))),
    };
    rd.expect("column header")?;
    let (mut grid, mut w, mut h) = (Vec::new(), Vec::new(), Vec::new());
    while let Some(row) = rd.numbers(1 + n * n + n)? {
        if grid.last().is_some_and(|&last: &f64| last >= row[0]) {
            return Err(syntax(rd.line, "grid times must increase"));
        }
        grid.push(row[0]);
        w.push(DMatrix::from_row_slice(n, n, &row[1..1 + n * n]));
        h.push(DVector::from_column_slice(&row[1 + n * n..]));
    }
    if grid.is_empty() {
        return Err(syntax(rd.line, "no grid rows"));
    }
    Ok(SincovDecomposition {
        tau0,
        grid,
        w,
        h,
        enforce_span,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::VectorField;
    use crate::flow::FnFamily;
    use crate::linear::sincov_decompose;
    use crate::state::State;

    #[test]
    fn numbers_round_trip() {
        for v in [0.0, -0.0, 1.0, 0.1, 1.0 / 3.0, 1e-20, -2.5e300, 123456.789, f64::MIN_POSITIVE] {
            assert_eq!(fmt_num(v).parse::<f64>().unwrap().to_bits(), v.to_bits(), "{v}");
        }
        assert!(fmt_num(f64::NAN).parse::<f64>().unwrap().is_nan());
        assert_eq!(fmt_num(1e-20), "1e-20");
        assert_eq!(fmt_num(0.5), "0.5");
    }

    #[test]
    fn tabulated_round_trip() {
        let axes = vec![Axis::new(-1.0, 1.0, 3), Axis::new(0.0, 0.3, 4)];
        let mut values: Vec<f64> = (0..12).map(|i| i as f64 / 7.0).collect();
        values[5] = f64::NAN;
        let tab = TabulatedField::new(axes, values);
        let mut buf = Vec::new();
        write_tabulated(&tab, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# tabulated-field\n# n=1\n# axis t -1 1 3\n# axis x1 0 0.3 4\nt,x1,f1\n"));
        let back = read_tabulated(&buf[..]).unwrap();
        assert_eq!(back.axes(), tab.axes());
        for (a, b) in back.values().iter().zip(tab.values()) {
            assert!(a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan()));
        }
        assert_eq!(back.eval(0.5, &[0.25]).unwrap(), tab.eval(0.5, &[0.25]).unwrap());
        assert!(back.eval(0.5, &[0.05]).is_err());
    }

    #[test]
    fn tabulated_rejects_damage() {
        let tab = TabulatedField::new(vec![Axis::new(0.0, 1.0, 2), Axis::new(0.0, 1.0, 2)], vec![1.0; 4]);
        let mut buf = Vec::new();
        write_tabulated(&tab, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let short: String = text.lines().take(7).map(|l| format!("{l}\n")).collect();
        assert!(matches!(read_tabulated(short.as_bytes()), Err(FormatError::Syntax { line: 8, .. })));
        let moved = text.replace("1,1,1", "1,0.5,1");
        assert!(read_tabulated(moved.as_bytes()).is_err());
        assert!(read_tabulated("# other\n".as_bytes()).is_err());
    }

    #[test]
    fn decomposition_round_trip() {
        let rot = FnFamily::new(2, |tau, sigma, a| {
            let (s, c) = (tau - sigma).sin_cos();
            State::new(vec![c * a[0] - s * a[1] + tau, s * a[0] + c * a[1]])
        });
        let dec = sincov_decompose(&rot, 0.0, &[-0.5, 0.25, 1.0]).unwrap();
        let mut buf = Vec::new();
        write_decomposition(&dec, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.contains("tau,w11,w12,w21,w22,h1,h2\n"));
        let back = read_decomposition(&buf[..]).unwrap();
        assert_eq!(back, dec);
    }
}
