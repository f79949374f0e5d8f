//! Binary and text file formats.
//!
//! Every numeric field is little-endian. Layouts:
//!
//! * `SIPD` descriptors: magic, version `u32`, count `u64`, dim `u32`, then
//!   `count * dim` `f32` values.
//! * `SIPH` 64-bit hashes: magic, version `u32`, count `u64`, bit width `u32`
//!   (always 64), then `count` `u64` codes.
//! * `SIPF` flow: magic, height `u32`, width `u32`, then `height * width`
//!   `(dx, dy)` `f32` pairs, row-major.
//! * Manifest: tab-separated `id  path  group` with a one-line header.
//! * Images: binary 8-bit PGM (`P5`) and PPM (`P6`).

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::model::{
    Descriptor, FlowField, ImageBuffer, Manifest, ManifestRow, Mask, DESCRIPTOR_DIM,
};
use crate::FORMAT_VERSION;

pub const DESCRIPTOR_MAGIC: &[u8; 4] = b"SIPD";
pub const HASH_MAGIC: &[u8; 4] = b"SIPH";
pub const FLOW_MAGIC: &[u8; 4] = b"SIPF";

/// Cursor over a byte buffer that reports failures with their offset.
pub(crate) struct ByteReader<'a> {
    bytes: &'a [u8],
    pos: usize,
    context: &'a str,
}

impl<'a> ByteReader<'a> {
    pub(crate) fn new(bytes: &'a [u8], context: &'a str) -> Self {
        Self {
            bytes,
            pos: 0,
            context,
        }
    }

    pub(crate) fn offset(&self) -> u64 {
        self.pos as u64
    }

    pub(crate) fn error(&self, message: impl Into<String>) -> Error {
        Error::format(self.context, self.offset(), message)
    }

    pub(crate) fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let remaining = self.bytes.len() - self.pos;
        if remaining < n {
            return Err(self.error(format!(
                "truncated payload: {what} needs {n} bytes, {remaining} remain"
            )));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    pub(crate) fn magic(&mut self, expected: &[u8; 4]) -> Result<()> {
        let start = self.pos;
        let got = self.take(4, "magic")?;
        if got != expected {
            return Err(Error::format(self.context, start as u64, "bad magic"));
        }
        Ok(())
    }

    pub(crate) fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    pub(crate) fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    /// Reads `n` little-endian `f32`s after checking the whole run is present.
    pub(crate) fn f32s(&mut self, n: usize, what: &str) -> Result<Vec<f32>> {
        let bytes = n
            .checked_mul(4)
            .ok_or_else(|| self.error(format!("{what} length overflows")))?;
        let raw = self.take(bytes, what)?;
        Ok(raw
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
            .collect())
    }

    pub(crate) fn version(&mut self) -> Result<u32> {
        let start = self.pos;
        let v = self.u32("version")?;
        if v != FORMAT_VERSION {
            return Err(Error::format(
                self.context,
                start as u64,
                format!("unsupported version {v} (expected {FORMAT_VERSION})"),
            ));
        }
        Ok(v)
    }

    pub(crate) fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(self.error(format!(
                "{} trailing bytes after payload",
                self.bytes.len() - self.pos
            )));
        }
        Ok(())
    }
}

pub(crate) fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))
}

fn context(path: &Path) -> String {
    path.display().to_string()
}

pub fn encode_descriptors<D: AsRef<[f32]>>(descriptors: &[D]) -> Vec<u8> {
    let mut out = Vec::with_capacity(20 + descriptors.len() * DESCRIPTOR_DIM * 4);
    out.extend_from_slice(DESCRIPTOR_MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(descriptors.len() as u64).to_le_bytes());
    out.extend_from_slice(&(DESCRIPTOR_DIM as u32).to_le_bytes());
    for d in descriptors {
        for v in d.as_ref() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn decode_descriptors(bytes: &[u8], context: &str) -> Result<Vec<Descriptor>> {
    let mut r = ByteReader::new(bytes, context);
    r.magic(DESCRIPTOR_MAGIC)?;
    r.version()?;
    let count = r.u64("count")? as usize;
    let dim_at = r.offset();
    let dim = r.u32("dim")? as usize;
    if dim != DESCRIPTOR_DIM {
        return Err(Error::format(
            context,
            dim_at,
            format!("dim must be {DESCRIPTOR_DIM}, found {dim}"),
        ));
    }
    let expected = count.saturating_mul(dim).saturating_mul(4);
    let remaining = bytes.len() - r.offset() as usize;
    if remaining < expected {
        return Err(r.error(format!(
            "truncated payload: count {count} needs {expected} bytes, {remaining} remain"
        )));
    }
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let at = r.offset();
        let values = r.f32s(dim, "descriptor")?;
        out.push(
            Descriptor::new(values)
                .map_err(|e| Error::format(context, at, format!("descriptor {i}: {e}")))?,
        );
    }
    r.finish()?;
    Ok(out)
}

pub fn write_descriptors<D: AsRef<[f32]>>(path: &Path, descriptors: &[D]) -> Result<()> {
    write_file(path, &encode_descriptors(descriptors))
}

pub fn read_descriptors(path: &Path) -> Result<Vec<Descriptor>> {
    decode_descriptors(&read_file(path)?, &context(path))
}

pub fn encode_hashes(codes: &[u64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(20 + codes.len() * 8);
    out.extend_from_slice(HASH_MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(codes.len() as u64).to_le_bytes());
    out.extend_from_slice(&64u32.to_le_bytes());
    for c in codes {
        out.extend_from_slice(&c.to_le_bytes());
    }
    out
}

pub fn decode_hashes(bytes: &[u8], context: &str) -> Result<Vec<u64>> {
    let mut r = ByteReader::new(bytes, context);
    r.magic(HASH_MAGIC)?;
    r.version()?;
    let count = r.u64("count")? as usize;
    let bits_at = r.offset();
    let bits = r.u32("bit width")?;
    if bits != 64 {
        return Err(Error::format(
            context,
            bits_at,
            format!("bit width must be 64, found {bits}"),
        ));
    }
    let remaining = bytes.len() - r.offset() as usize;
    if remaining < count.saturating_mul(8) {
        return Err(r.error(format!(
            "truncated payload: count {count} needs {} bytes, {remaining} remain",
            count.saturating_mul(8)
        )));
    }
    let codes = (0..count)
        .map(|_| r.u64("hash"))
        .collect::<Result<Vec<_>>>()?;
    r.finish()?;
    Ok(codes)
}

pub fn write_hashes(path: &Path, codes: &[u64]) -> Result<()> {
    write_file(path, &encode_hashes(codes))
}

pub fn read_hashes(path: &Path) -> Result<Vec<u64>> {
    decode_hashes(&read_file(path)?, &context(path))
}

pub fn encode_flow(flow: &FlowField) -> Vec<u8> {
    let n = flow.height() * flow.width();
    let mut out = Vec::with_capacity(12 + n * 8);
    out.extend_from_slice(FLOW_MAGIC);
    out.extend_from_slice(&(flow.height() as u32).to_le_bytes());
    out.extend_from_slice(&(flow.width() as u32).to_le_bytes());
    for (dx, dy) in flow.dx().iter().zip(flow.dy()) {
        out.extend_from_slice(&dx.to_le_bytes());
        out.extend_from_slice(&dy.to_le_bytes());
    }
    out
}

pub fn decode_flow(bytes: &[u8], context: &str) -> Result<FlowField> {
    let mut r = ByteReader::new(bytes, context);
    r.magic(FLOW_MAGIC)?;
    let height = r.u32("height")? as usize;
    let width = r.u32("width")? as usize;
    let n = height.saturating_mul(width);
    let pairs = r.f32s(n.saturating_mul(2), "flow pairs")?;
    r.finish()?;
    let (dx, dy) = pairs.chunks_exact(2).map(|p| (p[0], p[1])).unzip();
    FlowField::new(height, width, dx, dy).map_err(|e| Error::format(context, 12, e.to_string()))
}

pub fn write_flow(flow: &FlowField, path: &Path) -> Result<()> {
    write_file(path, &encode_flow(flow))
}

pub fn read_flow(path: &Path) -> Result<FlowField> {
    decode_flow(&read_file(path)?, &context(path))
}

fn quantize_u8(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub fn encode_image(image: &ImageBuffer) -> Vec<u8> {
    let magic = if image.channels() == 1 { "P5" } else { "P6" };
    let mut out = format!("{magic}\n{} {}\n255\n", image.width(), image.height()).into_bytes();
    out.extend(image.data().iter().map(|&v| quantize_u8(v)));
    out
}

pub fn decode_image(bytes: &[u8], context: &str) -> Result<ImageBuffer> {
    let mut pos = 0usize;
    let fail = |pos: usize, msg: &str| Error::format(context, pos as u64, msg);

    let magic = bytes.get(0..2).ok_or_else(|| fail(0, "truncated header"))?;
    let channels = match magic {
        b"P5" => 1,
        b"P6" => 3,
        _ => return Err(fail(0, "bad magic: only binary P5/P6 are supported")),
    };
    pos += 2;

    let mut fields = [0usize; 3];
    for field in &mut fields {
        // whitespace and comments
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                Some(_) => break,
                None => return Err(fail(pos, "truncated header")),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        if start == pos {
            return Err(fail(pos, "expected a decimal header field"));
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .unwrap()
            .parse()
            .map_err(|_| fail(start, "header field out of range"))?;
    }
    let [width, height, maxval] = fields;
    if maxval != 255 {
        return Err(fail(pos, &format!("unsupported maxval {maxval}")));
    }
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err(fail(pos, "missing separator after header")),
    }
    let n = width * height * channels;
    let payload = &bytes[pos..];
    if payload.len() < n {
        return Err(fail(
            pos,
            &format!(
                "truncated payload: {n} bytes expected, {} present",
                payload.len()
            ),
        ));
    }
    let data = payload[..n].iter().map(|&p| p as f32 / 255.0).collect();
    ImageBuffer::new(height, width, channels, data).map_err(|e| fail(0, &e.to_string()))
}

pub fn read_image(path: &Path) -> Result<ImageBuffer> {
    decode_image(&read_file(path)?, &context(path))
}

pub fn write_image(image: &ImageBuffer, path: &Path) -> Result<()> {
    write_file(path, &encode_image(image))
}

/// Writes a real map in `[0, 1]` as an 8-bit PGM (value × 255, rounded).
pub fn write_gray_map(values: &[f32], height: usize, width: usize, path: &Path) -> Result<()> {
    if values.len() != height * width {
        return Err(Error::dim(format!(
            "{} values do not fill {height}x{width}",
            values.len()
        )));
    }
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend(values.iter().map(|&v| quantize_u8(v)));
    write_file(path, &out)
}

pub fn write_mask(mask: &Mask, path: &Path) -> Result<()> {
    let values: Vec<f32> = mask
        .data
        .iter()
        .map(|&b| if b { 1.0 } else { 0.0 })
        .collect();
    write_gray_map(&values, mask.height, mask.width, path)
}

/// Reads a PGM mask: any non-zero pixel is set.
pub fn read_mask(path: &Path) -> Result<Mask> {
    let img = read_image(path)?;
    let gray = img.to_gray();
    Ok(Mask {
        height: gray.height(),
        width: gray.width(),
        data: gray.data().iter().map(|&v| v > 0.0).collect(),
    })
}

pub const MANIFEST_HEADER: &str = "id\tpath\tgroup";

/// Parses a manifest. Relative paths are resolved against `base`.
pub fn parse_manifest(text: &str, base: &Path, context: &str) -> Result<Manifest> {
    let mut lines = text.lines();
    let mut offset = 0u64;
    match lines.next() {
        Some(h) if h.trim_end() == MANIFEST_HEADER => offset += h.len() as u64 + 1,
        _ => {
            return Err(Error::format(
                context,
                0,
                format!("manifest header must be {MANIFEST_HEADER:?}"),
            ))
        }
    }
    let mut rows = Vec::new();
    for line in lines {
        let line_len = line.len() as u64 + 1;
        if line.trim().is_empty() {
            offset += line_len;
            continue;
        }
        let mut cols = line.trim_end_matches('\r').split('\t');
        let (id, path, group) = match (cols.next(), cols.next(), cols.next(), cols.next()) {
            (Some(id), Some(path), Some(group), None) => (id, path, group),
            _ => {
                return Err(Error::format(
                    context,
                    offset,
                    "manifest row must have 3 tab-separated columns",
                ))
            }
        };
        let id = id
            .parse::<u64>()
            .map_err(|_| Error::format(context, offset, format!("bad id {id:?}")))?;
        let path = PathBuf::from(path);
        let path = if path.is_relative() {
            base.join(path)
        } else {
            path
        };
        rows.push(ManifestRow {
            id,
            path,
            group: group.to_string(),
        });
        offset += line_len;
    }
    Manifest::new(rows)
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let bytes = read_file(path)?;
    let text = String::from_utf8(bytes).map_err(|e| {
        Error::format(
            context(path),
            e.utf8_error().valid_up_to() as u64,
            "not UTF-8",
        )
    })?;
    let base = path.parent().unwrap_or_else(|| Path::new(""));
    parse_manifest(&text, base, &context(path))
}

pub fn write_manifest(manifest: &Manifest, path: &Path) -> Result<()> {
    let mut out = String::from(MANIFEST_HEADER);
    out.push('\n');
    for r in manifest.rows() {
        out.push_str(&format!("{}\t{}\t{}\n", r.id, r.path.display(), r.group));
    }
    write_file(path, out.as_bytes())
}
