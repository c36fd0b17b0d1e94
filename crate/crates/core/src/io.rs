//! File formats: binary grids, JSON-lines coefficients, binary coefficient blocks.
//!
//! Missing parameters are written as NaN and read back as `None`.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{FieldRealization, GridSpec, Method};
use crate::hyperbolic::{block_len, HyperbolicCoeffs};
use crate::model::FieldParams;

pub const GRID_MAGIC: &[u8; 4] = b"WTFB";
pub const GRID_VERSION: u8 = 1;
pub const BLOCK_MAGIC: &[u8; 4] = b"WTFC";
pub const BLOCK_VERSION: u8 = 1;
pub const COEFF_FORMAT: &str = "wtfbf-coeffs";

fn format_err(field: &'static str, reason: impl Into<String>) -> Error {
    Error::Format {
        field,
        reason: reason.into(),
    }
}

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(data: &'a [u8]) -> Self {
        Self { data, pos: 0 }
    }

    fn take(&mut self, n: usize, field: &'static str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.data.len());
        match end {
            Some(end) => {
                let s = &self.data[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(format_err(field, "unexpected end of input")),
        }
    }

    fn array<const N: usize>(&mut self, field: &'static str) -> Result<[u8; N]> {
        Ok(self.take(N, field)?.try_into().expect("length checked"))
    }

    fn u8(&mut self, field: &'static str) -> Result<u8> {
        Ok(self.take(1, field)?[0])
    }

    fn u32(&mut self, field: &'static str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array(field)?))
    }

    fn i32(&mut self, field: &'static str) -> Result<i32> {
        Ok(i32::from_le_bytes(self.array(field)?))
    }

    fn u64(&mut self, field: &'static str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.array(field)?))
    }

    fn f64(&mut self, field: &'static str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.array(field)?))
    }

    fn remaining(&self) -> usize {
        self.data.len() - self.pos
    }

    /// `rows × cols` little-endian `f64` values, all finite.
    fn matrix(&mut self, rows: usize, cols: usize, field: &'static str) -> Result<Array2<f64>> {
        let count = rows
            .checked_mul(cols)
            .and_then(|c| c.checked_mul(8).map(|b| (c, b)))
            .ok_or_else(|| format_err(field, "dimensions overflow"))?;
        if count.1 > self.remaining() {
            return Err(format_err(field, format!("need {} bytes, {} left", count.1, self.remaining())));
        }
        let bytes = self.take(count.1, field)?;
        let values: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(format_err(field, "non-finite value"));
        }
        Ok(Array2::from_shape_vec((rows, cols), values).expect("length checked"))
    }
}

fn push_f64(out: &mut Vec<u8>, v: f64) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn push_grid(out: &mut Vec<u8>, g: &GridSpec) {
    out.extend_from_slice(&(g.n1 as u32).to_le_bytes());
    out.extend_from_slice(&(g.n2 as u32).to_le_bytes());
    for v in [g.x1_min, g.x1_max, g.x2_min, g.x2_max] {
        push_f64(out, v);
    }
}

fn push_params(out: &mut Vec<u8>, p: Option<FieldParams>) {
    let (a, h) = p.map_or((f64::NAN, f64::NAN), |p| (p.alpha(), p.hurst()));
    push_f64(out, a);
    push_f64(out, h);
}

fn read_grid(r: &mut Reader) -> Result<GridSpec> {
    let n1 = r.u32("n1")? as usize;
    let n2 = r.u32("n2")? as usize;
    let x1_min = r.f64("x1_min")?;
    let x1_max = r.f64("x1_max")?;
    let x2_min = r.f64("x2_min")?;
    let x2_max = r.f64("x2_max")?;
    GridSpec::new(n1, n2, (x1_min, x1_max), (x2_min, x2_max)).map_err(|e| format_err("grid", e.to_string()))
}

fn read_params(r: &mut Reader) -> Result<Option<FieldParams>> {
    let alpha = r.f64("alpha")?;
    let hurst = r.f64("hurst")?;
    match (alpha.is_nan(), hurst.is_nan()) {
        (true, true) => Ok(None),
        (false, false) => FieldParams::new(alpha, hurst)
            .map(Some)
            .map_err(|e| format_err("alpha/hurst", e.to_string())),
        _ => Err(format_err("alpha/hurst", "exactly one of alpha and hurst is missing")),
    }
}

/// Encodes a realization in the binary grid format.
pub fn encode_grid(field: &FieldRealization) -> Vec<u8> {
    let g = &field.grid;
    let mut out = Vec::with_capacity(64 + 8 * g.len());
    out.extend_from_slice(GRID_MAGIC);
    out.push(GRID_VERSION);
    push_grid(&mut out, g);
    push_params(&mut out, field.params);
    out.extend_from_slice(&field.seed.to_le_bytes());
    out.push(field.method.code());
    for v in field.values.iter() {
        push_f64(&mut out, *v);
    }
    out
}

pub fn decode_grid(data: &[u8]) -> Result<FieldRealization> {
    let mut r = Reader::new(data);
    if &r.array::<4>("magic")? != GRID_MAGIC {
        return Err(format_err("magic", "expected \"WTFB\""));
    }
    let version = r.u8("version")?;
    if version != GRID_VERSION {
        return Err(format_err("version", format!("unsupported version {version}")));
    }
    let grid = read_grid(&mut r)?;
    let params = read_params(&mut r)?;
    let seed = r.u64("seed")?;
    let code = r.u8("method")?;
    let method = Method::from_code(code).ok_or_else(|| format_err("method", format!("unknown code {code}")))?;
    let values = r.matrix(grid.n1, grid.n2, "values")?;
    if r.remaining() != 0 {
        return Err(format_err("values", format!("{} trailing bytes", r.remaining())));
    }
    Ok(FieldRealization {
        values,
        grid,
        params,
        seed,
        method,
    })
}

/// First line of a JSON-lines coefficient file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoeffHeader {
    pub format: String,
    pub version: u32,
    pub max_level: i32,
    pub grid: GridSpec,
    pub params: Option<FieldParams>,
    pub seed: u64,
    pub taper: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoeffRecord {
    pub j1: i32,
    pub j2: i32,
    pub k1: usize,
    pub k2: usize,
    pub value: f64,
}

/// Header line followed by one record per coefficient, levels in storage order.
pub fn encode_jsonl(coeffs: &HyperbolicCoeffs) -> String {
    let header = CoeffHeader {
        format: COEFF_FORMAT.into(),
        version: 1,
        max_level: coeffs.max_level,
        grid: coeffs.grid,
        params: coeffs.params,
        seed: coeffs.seed,
        taper: coeffs.taper,
    };
    let mut out = serde_json::to_string(&header).expect("header serializes");
    out.push('\n');
    for ((j1, j2), b) in coeffs.iter_blocks() {
        for ((k1, k2), &value) in b.indexed_iter() {
            let rec = CoeffRecord { j1, j2, k1, k2, value };
            out.push_str(&serde_json::to_string(&rec).expect("record serializes"));
            out.push('\n');
        }
    }
    out
}

/// Parses JSON-lines coefficients. Without a header line the maximum level is the
/// largest level present and the grid is the unit square with `2^{J+2}` points per axis.
pub fn decode_jsonl(text: &str) -> Result<HyperbolicCoeffs> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()).peekable();
    let header = match lines.peek() {
        Some((_, l)) if l.contains("\"format\"") => {
            let h: CoeffHeader = serde_json::from_str(l).map_err(|e| format_err("header", e.to_string()))?;
            if h.format != COEFF_FORMAT {
                return Err(format_err("format", format!("unknown format {:?}", h.format)));
            }
            if h.version != 1 {
                return Err(format_err("version", format!("unsupported version {}", h.version)));
            }
            h.grid.validate().map_err(|e| format_err("grid", e.to_string()))?;
            if !(h.taper >= 0.0 && h.taper < 0.5) {
                return Err(format_err("taper", format!("{} outside [0, 0.5)", h.taper)));
            }
            lines.next();
            Some(h)
        }
        _ => None,
    };
    let records: Vec<CoeffRecord> = lines
        .map(|(i, l)| {
            let rec: CoeffRecord =
                serde_json::from_str(l).map_err(|e| format_err("record", format!("line {}: {e}", i + 1)))?;
            if !rec.value.is_finite() {
                return Err(format_err("value", format!("line {}: non-finite", i + 1)));
            }
            Ok(rec)
        })
        .collect::<Result<_>>()?;
    let (max_level, grid) = match &header {
        Some(h) => (h.max_level, h.grid),
        None => {
            let j = records.iter().map(|r| r.j1.max(r.j2)).max().unwrap_or(0).max(0);
            if j > 24 {
                return Err(format_err("j1/j2", format!("level {j} too deep without a header")));
            }
            let grid = GridSpec::square(1usize << (j + 2), 1.0).map_err(|e| format_err("grid", e.to_string()))?;
            (j, grid)
        }
    };
    check_level_budget(max_level, 8 * text.len().max(1))?;
    let mut coeffs = HyperbolicCoeffs::zeros(max_level, grid).map_err(|e| format_err("max_level", e.to_string()))?;
    if let Some(h) = header {
        coeffs.params = h.params;
        coeffs.seed = h.seed;
        coeffs.taper = h.taper;
    }
    let mut seen = std::collections::HashSet::new();
    for rec in records {
        let block = coeffs
            .block_mut(rec.j1, rec.j2)
            .map_err(|e| format_err("j1/j2", e.to_string()))?;
        let slot = block
            .get_mut((rec.k1, rec.k2))
            .ok_or_else(|| format_err("k1/k2", format!("({}, {}) outside block ({}, {})", rec.k1, rec.k2, rec.j1, rec.j2)))?;
        *slot = rec.value;
        if !seen.insert((rec.j1, rec.j2, rec.k1, rec.k2)) {
            return Err(format_err(
                "record",
                format!("duplicate coefficient ({}, {}, {}, {})", rec.j1, rec.j2, rec.k1, rec.k2),
            ));
        }
    }
    Ok(coeffs)
}

/// Rejects a maximum level whose `(2^{J+1})²` coefficients exceed `budget` before allocating.
fn check_level_budget(max_level: i32, budget: usize) -> Result<()> {
    if !(0..=30).contains(&max_level) {
        return Err(format_err("max_level", format!("{max_level} outside 0..=30")));
    }
    let side = 1u64 << (max_level + 1);
    if side * side > budget as u64 {
        return Err(format_err("max_level", format!("J = {max_level} needs more data than supplied")));
    }
    Ok(())
}

/// File header, then per level `i32 j1, i32 j2, u32 rows, u32 cols` and the
/// row-major little-endian `f64` payload.
pub fn encode_blocks(coeffs: &HyperbolicCoeffs) -> Vec<u8> {
    let mut out = Vec::with_capacity(80 + 8 * coeffs.len() + 16 * (coeffs.max_level as usize + 2).pow(2));
    out.extend_from_slice(BLOCK_MAGIC);
    out.push(BLOCK_VERSION);
    out.extend_from_slice(&coeffs.max_level.to_le_bytes());
    push_grid(&mut out, &coeffs.grid);
    push_params(&mut out, coeffs.params);
    out.extend_from_slice(&coeffs.seed.to_le_bytes());
    push_f64(&mut out, coeffs.taper);
    let count = (coeffs.max_level + 2).pow(2) as u32;
    out.extend_from_slice(&count.to_le_bytes());
    for ((j1, j2), b) in coeffs.iter_blocks() {
        out.extend_from_slice(&j1.to_le_bytes());
        out.extend_from_slice(&j2.to_le_bytes());
        out.extend_from_slice(&(b.nrows() as u32).to_le_bytes());
        out.extend_from_slice(&(b.ncols() as u32).to_le_bytes());
        for v in b.iter() {
            push_f64(&mut out, *v);
        }
    }
    out
}

pub fn decode_blocks(data: &[u8]) -> Result<HyperbolicCoeffs> {
    let mut r = Reader::new(data);
    if &r.array::<4>("magic")? != BLOCK_MAGIC {
        return Err(format_err("magic", "expected \"WTFC\""));
    }
    let version = r.u8("version")?;
    if version != BLOCK_VERSION {
        return Err(format_err("version", format!("unsupported version {version}")));
    }
    let max_level = r.i32("max_level")?;
    let grid = read_grid(&mut r)?;
    let params = read_params(&mut r)?;
    let seed = r.u64("seed")?;
    let taper = r.f64("taper")?;
    if !(taper >= 0.0 && taper < 0.5) {
        return Err(format_err("taper", format!("{taper} outside [0, 0.5)")));
    }
    check_level_budget(max_level, r.remaining() / 8)?;
    let mut coeffs = HyperbolicCoeffs::zeros(max_level, grid).map_err(|e| format_err("max_level", e.to_string()))?;
    coeffs.params = params;
    coeffs.seed = seed;
    coeffs.taper = taper;
    let count = r.u32("block_count")?;
    if count != (max_level + 2).pow(2) as u32 {
        return Err(format_err("block_count", format!("{count} blocks for J = {max_level}")));
    }
    let mut seen = vec![false; count as usize];
    for _ in 0..count {
        let j1 = r.i32("j1")?;
        let j2 = r.i32("j2")?;
        let rows = r.u32("rows")? as usize;
        let cols = r.u32("cols")? as usize;
        if j1 < -1 || j1 > max_level || j2 < -1 || j2 > max_level {
            return Err(format_err("j1/j2", format!("level ({j1}, {j2}) outside -1..={max_level}")));
        }
        if (rows, cols) != (block_len(j1), block_len(j2)) {
            return Err(format_err("rows/cols", format!("block ({j1}, {j2}) is {rows}×{cols}")));
        }
        let idx = ((j1 + 1) * (max_level + 2) + (j2 + 1)) as usize;
        if std::mem::replace(&mut seen[idx], true) {
            return Err(format_err("j1/j2", format!("duplicate block ({j1}, {j2})")));
        }
        let block = r.matrix(rows, cols, "payload")?;
        coeffs.set_block(j1, j2, block)?;
    }
    if r.remaining() != 0 {
        return Err(format_err("payload", format!("{} trailing bytes", r.remaining())));
    }
    Ok(coeffs)
}
