//! Uniform lattices aligned to integer multiples of `h`, lattice-backed fields
//! with multilinear interpolation, and their CSV / binary serialization.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Nodes sit at `(origin_index + i) * h` along every axis; axis 0 varies fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub h: f64,
    pub origin_index: Vec<i64>,
    pub counts: Vec<usize>,
}

impl Grid {
    pub fn new(h: f64, origin_index: Vec<i64>, counts: Vec<usize>) -> Result<Self> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::InvalidParameter(format!("grid spacing must be positive, got {h}")));
        }
        if origin_index.len() != counts.len() || counts.is_empty() {
            return Err(Error::InvalidParameter("grid origin/counts dimension mismatch".into()));
        }
        if counts.iter().any(|&c| c < 2) {
            return Err(Error::InvalidParameter("grid needs at least two nodes per axis".into()));
        }
        Ok(Self { h, origin_index, counts })
    }

    /// Smallest aligned grid containing the box `[lo, hi]`.
    pub fn covering(lo: &[f64], hi: &[f64], h: f64) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch { expected: lo.len(), got: hi.len() });
        }
        let mut origin = Vec::with_capacity(lo.len());
        let mut counts = Vec::with_capacity(lo.len());
        for (&a, &b) in lo.iter().zip(hi) {
            let i0 = snap_integer(a / h).unwrap_or_else(|| (a / h).floor()) as i64;
            let i1 = snap_integer(b / h).unwrap_or_else(|| (b / h).ceil()) as i64;
            origin.push(i0);
            counts.push((i1 - i0 + 1).max(2) as usize);
        }
        Self::new(h, origin, counts)
    }

    pub fn dim(&self) -> usize {
        self.counts.len()
    }

    pub fn len(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn lower(&self) -> Vec<f64> {
        self.origin_index.iter().map(|&i| i as f64 * self.h).collect()
    }

    pub fn upper(&self) -> Vec<f64> {
        self.origin_index
            .iter()
            .zip(&self.counts)
            .map(|(&i, &n)| (i + n as i64 - 1) as f64 * self.h)
            .collect()
    }

    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.dim());
        for &n in &self.counts {
            out.push(flat % n);
            flat /= n;
        }
        out
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        let mut flat = 0;
        for k in (0..self.dim()).rev() {
            flat = flat * self.counts[k] + idx[k];
        }
        flat
    }

    pub fn stride(&self, axis: usize) -> usize {
        self.counts[..axis].iter().product()
    }

    pub fn coord(&self, axis: usize, i: usize) -> f64 {
        (self.origin_index[axis] + i as i64) as f64 * self.h
    }

    pub fn node(&self, flat: usize) -> Vec<f64> {
        self.multi_index(flat).iter().enumerate().map(|(k, &i)| self.coord(k, i)).collect()
    }

    /// Fractional index coordinates of a point.
    pub fn frac_index(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.origin_index).map(|(&v, &o)| v / self.h - o as f64).collect()
    }

    /// Whether `x` lies in the closed bounding box of the grid.
    pub fn contains(&self, x: &[f64]) -> bool {
        let lo = self.lower();
        let hi = self.upper();
        x.iter().zip(lo.iter().zip(&hi)).all(|(&v, (&a, &b))| v >= a - 1e-12 && v <= b + 1e-12)
    }

    /// Nearest node if `x` lies within `1e-9 h` of one.
    pub fn snap(&self, x: &[f64]) -> Option<usize> {
        let f = self.frac_index(x);
        let mut idx = Vec::with_capacity(f.len());
        for (k, &v) in f.iter().enumerate() {
            let r = v.round();
            if (v - r).abs() > 1e-9 || r < 0.0 || r as usize >= self.counts[k] {
                return None;
            }
            idx.push(r as usize);
        }
        Some(self.flat_index(&idx))
    }
}

/// Real values on the nodes of a [`Grid`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeField {
    pub grid: Grid,
    pub values: Vec<f64>,
}

impl LatticeField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidParameter(format!(
                "lattice needs {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn sample(grid: Grid, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = (0..grid.len()).map(|i| f(&grid.node(i))).collect();
        Self { grid, values }
    }

    pub fn constant(grid: Grid, value: f64) -> Self {
        let n = grid.len();
        Self { grid, values: vec![value; n] }
    }

    pub fn h(&self) -> f64 {
        self.grid.h
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Multilinear interpolation at fractional index coordinates, clamped to
    /// the grid.
    pub fn interpolate_frac(&self, f: &[f64]) -> f64 {
        let d = self.grid.dim();
        let mut base = 0usize;
        let mut w = [0.0f64; 8];
        debug_assert!(d <= 8);
        for k in 0..d {
            let n = self.grid.counts[k];
            let v = snap_integer(f[k]).unwrap_or(f[k]).clamp(0.0, (n - 1) as f64);
            let mut i = v.floor() as usize;
            if i >= n - 1 {
                i = n - 2;
            }
            w[k] = v - i as f64;
            base += i * self.grid.stride(k);
        }
        // nested convex combinations, axis 0 first; monotone in the node values
        let mut vals = [0.0f64; 256];
        for corner in 0..(1usize << d) {
            let mut off = 0usize;
            for k in 0..d {
                if corner >> k & 1 == 1 {
                    off += self.grid.stride(k);
                }
            }
            vals[corner] = self.values[base + off];
        }
        let mut len = 1usize << d;
        for k in 0..d {
            len /= 2;
            for j in 0..len {
                let a = vals[2 * j];
                let b = vals[2 * j + 1];
                vals[j] = if w[k] == 0.0 {
                    a
                } else if w[k] == 1.0 {
                    b
                } else {
                    (1.0 - w[k]) * a + w[k] * b
                };
            }
        }
        vals[0]
    }

    pub fn interpolate(&self, x: &[f64]) -> f64 {
        self.interpolate_frac(&self.grid.frac_index(x))
    }

    /// Corner values of the cell containing `x`.
    pub fn cell_range(&self, x: &[f64]) -> (f64, f64) {
        let d = self.grid.dim();
        let f = self.grid.frac_index(x);
        let mut base = 0usize;
        for k in 0..d {
            let n = self.grid.counts[k];
            let v = snap_integer(f[k]).unwrap_or(f[k]).clamp(0.0, (n - 1) as f64);
            let i = (v.floor() as usize).min(n - 2);
            base += i * self.grid.stride(k);
        }
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for corner in 0..(1usize << d) {
            let off: usize = (0..d).filter(|k| corner >> k & 1 == 1).map(|k| self.grid.stride(k)).sum();
            let v = self.values[base + off];
            lo = lo.min(v);
            hi = hi.max(v);
        }
        (lo, hi)
    }

    fn header(&self) -> String {
        let join = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";");
        let counts = self.grid.counts.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(";");
        format!(
            "# amvf-lattice d={} h={} lo={} hi={} counts={} values={}",
            self.grid.dim(),
            self.grid.h,
            join(&self.grid.lower()),
            join(&self.grid.upper()),
            counts,
            self.values.len()
        )
    }

    /// CSV with a one-line `#` header, then `x0,..,x{d-1},value` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{}", self.header())?;
        let mut wr = csv::Writer::from_writer(w);
        let mut head: Vec<String> = (0..self.grid.dim()).map(|k| format!("x{k}")).collect();
        head.push("value".into());
        wr.write_record(&head)?;
        for (i, v) in self.values.iter().enumerate() {
            let mut rec: Vec<String> = self.grid.node(i).iter().map(|x| x.to_string()).collect();
            rec.push(v.to_string());
            wr.write_record(&rec)?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut reader = BufReader::new(r);
        let mut first = String::new();
        reader.read_line(&mut first)?;
        let grid = parse_header(first.trim())?;
        let mut rd = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let d = grid.dim();
        let mut values = Vec::with_capacity(grid.len());
        for rec in rd.records() {
            let rec = rec?;
            let v: f64 = rec
                .get(d)
                .ok_or_else(|| Error::Format("missing value column".into()))?
                .parse()
                .map_err(|e| Error::Format(format!("bad value: {e}")))?;
            values.push(v);
        }
        Self::new(grid, values)
    }

    const MAGIC: &'static [u8; 8] = b"AMVFLAT\0";

    /// Little-endian binary: magic, `d: u32`, `h: f64`, origin indices `i64`,
    /// counts `u64`, value count `u64`, values `f64`.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(Self::MAGIC)?;
        w.write_all(&(self.grid.dim() as u32).to_le_bytes())?;
        w.write_all(&self.grid.h.to_le_bytes())?;
        for &o in &self.grid.origin_index {
            w.write_all(&o.to_le_bytes())?;
        }
        for &c in &self.grid.counts {
            w.write_all(&(c as u64).to_le_bytes())?;
        }
        w.write_all(&(self.values.len() as u64).to_le_bytes())?;
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != Self::MAGIC {
            return Err(Error::Format("bad lattice magic".into()));
        }
        let mut b4 = [0u8; 4];
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b4)?;
        let d = u32::from_le_bytes(b4) as usize;
        r.read_exact(&mut b8)?;
        let h = f64::from_le_bytes(b8);
        let mut origin = Vec::with_capacity(d);
        for _ in 0..d {
            r.read_exact(&mut b8)?;
            origin.push(i64::from_le_bytes(b8));
        }
        let mut counts = Vec::with_capacity(d);
        for _ in 0..d {
            r.read_exact(&mut b8)?;
            counts.push(u64::from_le_bytes(b8) as usize);
        }
        r.read_exact(&mut b8)?;
        let n = u64::from_le_bytes(b8) as usize;
        let grid = Grid::new(h, origin, counts)?;
        if n != grid.len() {
            return Err(Error::Format(format!("value count {n} does not match grid size {}", grid.len())));
        }
        let mut values = Vec::with_capacity(n);
        for _ in 0..n {
            r.read_exact(&mut b8)?;
            values.push(f64::from_le_bytes(b8));
        }
        Self::new(grid, values)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::io::BufWriter::new(std::fs::File::create(path)?);
        match path.extension().and_then(|e| e.to_str()) {
            Some("csv") => self.write_csv(f),
            _ => self.write_binary(f),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        match path.extension().and_then(|e| e.to_str()) {
            Some("csv") => Self::read_csv(f),
            _ => Self::read_binary(f),
        }
    }
}

fn parse_header(line: &str) -> Result<Grid> {
    let body = line
        .strip_prefix("# amvf-lattice")
        .ok_or_else(|| Error::Format(format!("missing lattice header: {line}")))?;
    let mut d = None;
    let mut h = None;
    let mut lo: Option<Vec<f64>> = None;
    let mut counts: Option<Vec<usize>> = None;
    for tok in body.split_whitespace() {
        let (k, v) = tok.split_once('=').ok_or_else(|| Error::Format(format!("bad header token {tok}")))?;
        let bad = |e: &dyn std::fmt::Display| Error::Format(format!("bad header value {tok}: {e}"));
        match k {
            "d" => d = Some(v.parse::<usize>().map_err(|e| bad(&e))?),
            "h" => h = Some(v.parse::<f64>().map_err(|e| bad(&e))?),
            "lo" => lo = Some(v.split(';').map(|s| s.parse::<f64>()).collect::<std::result::Result<_, _>>().map_err(|e| bad(&e))?),
            "counts" => {
                counts = Some(v.split(';').map(|s| s.parse::<usize>()).collect::<std::result::Result<_, _>>().map_err(|e| bad(&e))?)
            }
            _ => {}
        }
    }
    let (d, h, lo, counts) = match (d, h, lo, counts) {
        (Some(d), Some(h), Some(lo), Some(c)) => (d, h, lo, c),
        _ => return Err(Error::Format("incomplete lattice header".into())),
    };
    if lo.len() != d || counts.len() != d {
        return Err(Error::Format("header dimension mismatch".into()));
    }
    let origin = lo.iter().map(|&a| (a / h).round() as i64).collect();
    Grid::new(h, origin, counts)
}

fn snap_integer(t: f64) -> Option<f64> {
    let r = t.round();
    ((t - r).abs() <= 1e-9 * (1.0 + r.abs())).then_some(r)
}
