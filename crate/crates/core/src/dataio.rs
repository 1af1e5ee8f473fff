//! Matrix and dictionary files, PGM images and image patches.
//!
//! Binary layout (all integers and floats little-endian):
//!
//! ```text
//! b"ITKM"  u32 version = 1  u64 rows  u64 cols  rows*cols f64, column-major
//! ```
//!
//! CSV matrices have one row per line and no header, so a dictionary file
//! holds one atom per column. Values use the shortest representation that
//! parses back to the same `f64`.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::dictionary::Dictionary;
use crate::error::{Error, Result};
use crate::model::SignalBatch;

pub const MAGIC: &[u8; 4] = b"ITKM";
pub const FORMAT_VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 8 + 8;

/// Relative norm below which a mean-removed patch counts as flat.
pub const FLAT_PATCH_TOL: f64 = 1e-10;

// ---------------------------------------------------------------- binary

pub fn write_matrix<W: Write>(mut w: W, m: &DMatrix<f64>) -> std::io::Result<()> {
    let mut buf = Vec::with_capacity(HEADER_LEN + 8 * m.len());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(m.nrows() as u64).to_le_bytes());
    buf.extend_from_slice(&(m.ncols() as u64).to_le_bytes());
    for v in m.as_slice() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    w.flush()
}

/// Decodes a binary matrix; trailing bytes are rejected.
pub fn decode_matrix(bytes: &[u8]) -> Result<DMatrix<f64>> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Format(format!(
            "truncated header: {} of {HEADER_LEN} bytes",
            bytes.len()
        )));
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::Format(format!("bad magic {:?}", &bytes[..4])));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!(
            "unsupported version {version} (expected {FORMAT_VERSION})"
        )));
    }
    let rows = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
    let cols = u64::from_le_bytes(bytes[16..24].try_into().unwrap());
    let need = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(8))
        .and_then(|n| usize::try_from(n).ok())
        .ok_or_else(|| Error::Format(format!("matrix size {rows}x{cols} overflows")))?;
    let body = &bytes[HEADER_LEN..];
    if body.len() != need {
        return Err(Error::Format(format!(
            "{rows}x{cols} matrix needs {need} data bytes, found {}",
            body.len()
        )));
    }
    let data = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect::<Vec<_>>();
    Ok(DMatrix::from_vec(rows as usize, cols as usize, data))
}

pub fn read_matrix<R: Read>(mut r: R) -> Result<DMatrix<f64>> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)
        .map_err(|e| Error::io("<reader>", e))?;
    decode_matrix(&bytes)
}

// ---------------------------------------------------------------- CSV

fn format_f64(v: f64) -> String {
    // Debug prints the shortest string that round-trips, switching to
    // exponent notation for very large or small magnitudes.
    format!("{v:?}")
}

pub fn write_matrix_csv<W: Write>(w: W, m: &DMatrix<f64>) -> std::io::Result<()> {
    let mut w = BufWriter::new(w);
    for i in 0..m.nrows() {
        let line = m
            .row(i)
            .iter()
            .map(|&v| format_f64(v))
            .collect::<Vec<_>>()
            .join(",");
        writeln!(w, "{line}")?;
    }
    w.flush()
}

pub fn read_matrix_csv<R: Read>(r: R) -> Result<DMatrix<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut offset = 0usize;
    for line in BufReader::new(r).split(b'\n') {
        let line = line.map_err(|e| Error::io("<reader>", e))?;
        let len = line.len() + 1;
        let text = std::str::from_utf8(&line).map_err(|_| Error::Parse {
            offset,
            message: "line is not UTF-8".into(),
        })?;
        let text = text.trim_end_matches('\r');
        if !text.trim().is_empty() {
            let mut row = Vec::new();
            let mut col_offset = offset;
            for field in text.split(',') {
                let v = field.trim().parse::<f64>().map_err(|_| Error::Parse {
                    offset: col_offset,
                    message: format!("not a number: {field:?}"),
                })?;
                row.push(v);
                col_offset += field.len() + 1;
            }
            if let Some(first) = rows.first() {
                if first.len() != row.len() {
                    return Err(Error::Parse {
                        offset,
                        message: format!("row has {} fields, expected {}", row.len(), first.len()),
                    });
                }
            }
            rows.push(row);
        }
        offset += len;
    }
    let ncols = rows.first().map_or(0, Vec::len);
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

// ---------------------------------------------------------------- files

/// On-disk matrix encoding, chosen from the file extension by default.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixFormat {
    Binary,
    Csv,
}

impl MatrixFormat {
    /// `.csv` selects CSV; anything else is binary.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => MatrixFormat::Csv,
            _ => MatrixFormat::Binary,
        }
    }
}

pub fn save_matrix(path: impl AsRef<Path>, m: &DMatrix<f64>) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    match MatrixFormat::from_path(path) {
        MatrixFormat::Binary => write_matrix(BufWriter::new(file), m),
        MatrixFormat::Csv => write_matrix_csv(file, m),
    }
    .map_err(|e| Error::io(path, e))
}

pub fn load_matrix(path: impl AsRef<Path>) -> Result<DMatrix<f64>> {
    let path = path.as_ref();
    match MatrixFormat::from_path(path) {
        MatrixFormat::Binary => decode_matrix(&fs::read(path).map_err(|e| Error::io(path, e))?),
        MatrixFormat::Csv => {
            read_matrix_csv(fs::File::open(path).map_err(|e| Error::io(path, e))?)
        }
    }
}

pub fn save_dictionary(path: impl AsRef<Path>, dict: &Dictionary) -> Result<()> {
    save_matrix(path, dict.matrix())
}

/// Loads a dictionary and checks its atoms are unit norm.
pub fn load_dictionary(path: impl AsRef<Path>) -> Result<Dictionary> {
    let path = path.as_ref();
    Dictionary::from_matrix(load_matrix(path)?).map_err(|e| match e {
        Error::InvalidArgument(m) => Error::Format(format!("{}: {m}", path.display())),
        other => other,
    })
}

// ---------------------------------------------------------------- signal batches

/// Ground truth for one signal of a saved batch.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleRecord {
    pub support: Vec<usize>,
    pub signs: Vec<f64>,
    pub coefficients: Vec<f64>,
    pub decay: Option<f64>,
    pub noise_norm: f64,
}

pub const SIDECAR_HEADER: &str = "signal,support,signs,coefficients,decay,noise_norm";

fn join<T>(xs: &[T], f: impl Fn(&T) -> String) -> String {
    xs.iter().map(f).collect::<Vec<_>>().join(" ")
}

/// Writes the oracle data of a batch, one signal per row; list fields are
/// space separated and aligned with the sorted support.
pub fn write_batch_sidecar<W: Write>(w: W, batch: &SignalBatch) -> std::io::Result<()> {
    let mut w = BufWriter::new(w);
    writeln!(w, "{SIDECAR_HEADER}")?;
    for n in 0..batch.len() {
        writeln!(
            w,
            "{n},{},{},{},{},{}",
            join(&batch.supports[n], |i| i.to_string()),
            join(&batch.signs[n], |&v| format_f64(v)),
            join(&batch.coefficients[n], |&v| format_f64(v)),
            batch.decays[n].map_or(String::new(), format_f64),
            format_f64(batch.noise_norms[n]),
        )?;
    }
    w.flush()
}

pub fn read_batch_sidecar<R: Read>(r: R) -> Result<Vec<OracleRecord>> {
    fn list<T: std::str::FromStr>(s: &str, offset: usize) -> Result<Vec<T>> {
        s.split_whitespace()
            .map(|t| {
                t.parse().map_err(|_| Error::Parse {
                    offset,
                    message: format!("bad list entry {t:?}"),
                })
            })
            .collect()
    }
    let mut out = Vec::new();
    let mut offset = 0usize;
    for (i, line) in BufReader::new(r).lines().enumerate() {
        let line = line.map_err(|e| Error::io("<reader>", e))?;
        let here = offset;
        offset += line.len() + 1;
        if i == 0 {
            if line.trim_end() != SIDECAR_HEADER {
                return Err(Error::Parse { offset: 0, message: "unexpected sidecar header".into() });
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 6 {
            return Err(Error::Parse { offset: here, message: format!("expected 6 fields, got {}", f.len()) });
        }
        let num = |s: &str| {
            s.trim().parse::<f64>().map_err(|_| Error::Parse { offset: here, message: format!("not a number: {s:?}") })
        };
        out.push(OracleRecord {
            support: list(f[1], here)?,
            signs: list(f[2], here)?,
            coefficients: list(f[3], here)?,
            decay: if f[4].trim().is_empty() { None } else { Some(num(f[4])?) },
            noise_norm: num(f[5])?,
        });
    }
    Ok(out)
}

/// Saves the signals as a binary matrix and the oracle data as a sidecar CSV
/// next to it (`<stem>.oracle.csv`).
pub fn save_signal_batch(path: impl AsRef<Path>, batch: &SignalBatch) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_matrix(BufWriter::new(file), &batch.signals).map_err(|e| Error::io(path, e))?;
    let side = sidecar_path(path);
    let file = fs::File::create(&side).map_err(|e| Error::io(&side, e))?;
    write_batch_sidecar(file, batch).map_err(|e| Error::io(&side, e))
}

pub fn sidecar_path(path: &Path) -> std::path::PathBuf {
    path.with_extension("oracle.csv")
}

// ---------------------------------------------------------------- PGM

#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    /// Row-major samples in `[0, 1]`.
    pub data: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width * height != data.len() {
            return Err(Error::shape(width * height, data.len()));
        }
        if data.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::invalid("image samples must lie in [0, 1]"));
        }
        Ok(GrayImage { width, height, data })
    }

    pub fn pixel(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }
}

struct Header<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Header<'_> {
    fn err(&self, message: impl Into<String>) -> Error {
        Error::Parse { offset: self.pos, message: message.into() }
    }

    fn skip_space(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while self.pos < self.bytes.len() && !matches!(self.bytes[self.pos], b'\n' | b'\r') {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        self.skip_space();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(match self.bytes.get(self.pos) {
                None => self.err(format!("unexpected end of data reading {what}")),
                Some(b) => self.err(format!("expected {what}, found byte {b:#04x}")),
            });
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .unwrap()
            .parse()
            .map_err(|_| Error::Parse { offset: start, message: format!("{what} out of range") })
    }
}

pub fn parse_pgm(bytes: &[u8]) -> Result<GrayImage> {
    let mut h = Header { bytes, pos: 0 };
    let binary = match bytes.get(..2) {
        Some(b"P5") => true,
        Some(b"P2") => false,
        _ => return Err(h.err("magic must be P2 or P5")),
    };
    h.pos = 2;
    if !bytes.get(2).is_some_and(|b| b.is_ascii_whitespace() || *b == b'#') {
        return Err(h.err("expected whitespace after magic"));
    }
    let width = h.number("width")?;
    let height = h.number("height")?;
    let maxval = h.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(h.err("image dimensions must be positive"));
    }
    if maxval == 0 || maxval > 255 {
        return Err(h.err(format!("maxval {maxval} outside 1..=255")));
    }
    let n = width
        .checked_mul(height)
        .ok_or_else(|| h.err("image dimensions overflow"))?;
    let scale = maxval as f64;
    let mut data = Vec::with_capacity(n);
    if binary {
        match bytes.get(h.pos) {
            Some(b) if b.is_ascii_whitespace() => h.pos += 1,
            _ => return Err(h.err("expected single whitespace before raster")),
        }
        let raster = &bytes[h.pos..];
        if raster.len() < n {
            return Err(Error::Parse {
                offset: bytes.len(),
                message: format!("raster has {} of {n} samples", raster.len()),
            });
        }
        for (i, &b) in raster[..n].iter().enumerate() {
            if b as usize > maxval {
                return Err(Error::Parse { offset: h.pos + i, message: format!("sample {b} exceeds maxval {maxval}") });
            }
            data.push(b as f64 / scale);
        }
    } else {
        for _ in 0..n {
            h.skip_space();
            let at = h.pos;
            let v = h.number("sample")?;
            if v > maxval {
                return Err(Error::Parse { offset: at, message: format!("sample {v} exceeds maxval {maxval}") });
            }
            data.push(v as f64 / scale);
        }
    }
    Ok(GrayImage { width, height, data })
}

pub fn read_pgm(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    parse_pgm(&fs::read(path).map_err(|e| Error::io(path, e))?)
}

/// Encodes an image with maxval 255, rounding samples to the nearest level.
pub fn encode_pgm(img: &GrayImage, binary: bool) -> Vec<u8> {
    let levels = img.data.iter().map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8);
    let mut out = format!("{}\n{} {}\n255\n", if binary { "P5" } else { "P2" }, img.width, img.height)
        .into_bytes();
    if binary {
        out.extend(levels);
    } else {
        let levels: Vec<u8> = levels.collect();
        for row in levels.chunks(img.width) {
            let line = row.iter().map(u8::to_string).collect::<Vec<_>>().join(" ");
            out.extend_from_slice(line.as_bytes());
            out.push(b'\n');
        }
    }
    out
}

pub fn write_pgm(path: impl AsRef<Path>, img: &GrayImage, binary: bool) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_pgm(img, binary)).map_err(|e| Error::io(path, e))
}

// ---------------------------------------------------------------- patches

#[derive(Debug, Clone, PartialEq)]
pub struct PatchSet {
    pub patch_edge: usize,
    /// `p² × N`, one patch per column.
    pub patches: DMatrix<f64>,
    /// Columns have unit norm.
    pub normalized: bool,
    /// Columns are orthogonal to the constant vector.
    pub mean_removed: bool,
    /// Patches discarded because they had (numerically) zero norm.
    pub dropped: usize,
    /// Norm of each kept patch just before mean removal, if applied.
    pub pre_projection_norms: Option<Vec<f64>>,
}

impl PatchSet {
    pub fn len(&self) -> usize {
        self.patches.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn patch_count(width: usize, height: usize, p: usize) -> usize {
    if p == 0 || p > width || p > height {
        0
    } else {
        (width - p + 1) * (height - p + 1)
    }
}

/// All overlapping `p × p` patches. Patch `(r, c)` (top-left corner) is
/// column `r·(w−p+1) + c`, stored row by row.
pub fn extract_patches(img: &GrayImage, p: usize) -> Result<PatchSet> {
    if p == 0 || p > img.width.min(img.height) {
        return Err(Error::invalid(format!(
            "patch edge {p} must be in 1..={}",
            img.width.min(img.height)
        )));
    }
    let across = img.width - p + 1;
    let n = patch_count(img.width, img.height, p);
    let mut patches = DMatrix::zeros(p * p, n);
    for (col, mut patch) in patches.column_iter_mut().enumerate() {
        let (r0, c0) = (col / across, col % across);
        for i in 0..p {
            let src = &img.data[(r0 + i) * img.width + c0..][..p];
            for (j, &v) in src.iter().enumerate() {
                patch[i * p + j] = v;
            }
        }
    }
    Ok(PatchSet {
        patch_edge: p,
        patches,
        normalized: false,
        mean_removed: false,
        dropped: 0,
        pre_projection_norms: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Preprocess {
    pub normalize: bool,
    pub remove_mean: bool,
    /// Rescale to unit norm after mean removal.
    pub renormalize: bool,
}

impl Default for Preprocess {
    fn default() -> Self {
        Preprocess { normalize: true, remove_mean: true, renormalize: true }
    }
}

/// Normalizes, then projects onto the complement of the constant vector,
/// dropping patches that vanish along the way.
pub fn preprocess_patches(ps: &PatchSet, opts: Preprocess) -> PatchSet {
    let d = ps.patches.nrows();
    let mut kept: Vec<DVector<f64>> = Vec::with_capacity(ps.len());
    let mut norms = Vec::new();
    let mut dropped = ps.dropped;
    for col in ps.patches.column_iter() {
        let mut v = col.into_owned();
        let n0 = v.norm();
        if n0 == 0.0 {
            dropped += 1;
            continue;
        }
        if opts.normalize {
            v /= n0;
        }
        if opts.remove_mean {
            let before = v.norm();
            let mean = v.sum() / d as f64;
            v.add_scalar_mut(-mean);
            let after = v.norm();
            if after <= FLAT_PATCH_TOL * before {
                dropped += 1;
                continue;
            }
            norms.push(before);
            if opts.renormalize {
                v /= after;
            }
        }
        kept.push(v);
    }
    let patches = if kept.is_empty() {
        DMatrix::zeros(d, 0)
    } else {
        DMatrix::from_columns(&kept)
    };
    PatchSet {
        patch_edge: ps.patch_edge,
        patches,
        normalized: if opts.remove_mean {
            opts.renormalize
        } else {
            opts.normalize || ps.normalized
        },
        mean_removed: opts.remove_mean || ps.mean_removed,
        dropped,
        pre_projection_norms: opts.remove_mean.then_some(norms),
    }
}

/// The unit-norm constant atom of dimension `d`.
pub fn constant_atom(d: usize) -> DVector<f64> {
    DVector::from_element(d, 1.0 / (d as f64).sqrt())
}

/// Tiles the atoms as `p × p` images on a grid with `ceil(sqrt(K))` columns.
/// Each tile is min-max scaled to `[0, 1]`; constant tiles become 0.5 and
/// unused grid cells 0.
pub fn mosaic(dict: &DMatrix<f64>, p: usize) -> Result<DMatrix<f64>> {
    if p * p != dict.nrows() {
        return Err(Error::shape(format!("{p}x{p} = {} rows", p * p), dict.nrows()));
    }
    let k = dict.ncols();
    let cols = (k as f64).sqrt().ceil().max(1.0) as usize;
    let rows = k.div_ceil(cols).max(1);
    let mut out = DMatrix::zeros(rows * p, cols * p);
    for (a, atom) in dict.column_iter().enumerate() {
        let (lo, hi) = atom.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
        let span = hi - lo;
        let (gr, gc) = (a / cols, a % cols);
        for i in 0..p {
            for j in 0..p {
                let v = atom[i * p + j];
                out[(gr * p + i, gc * p + j)] = if span > 0.0 { (v - lo) / span } else { 0.5 };
            }
        }
    }
    Ok(out)
}
