//! Tile ingestion: a little-endian binary LAS subset and a whitespace
//! "x y z [class]" ASCII format.
//!
//! The binary reader understands the fixed portion of a LAS 1.x header —
//! signature, header size, point-data offset, record count, scale/offset
//! triplets, min/max bounds — and takes the leading scaled-int32 x/y/z of
//! each point record, ignoring the remainder. Anything outside that subset
//! is reported as an unsupported tile format rather than guessed at.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};

/// One point with optional classification code (2 = ground, 5 = vegetation
/// in tiles written by this crate).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointRecord {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub classification: Option<u8>,
}

/// Header-level tile description; extents come without touching the payload
/// for binary tiles and from a full scan for ASCII ones.
#[derive(Debug, Clone, PartialEq)]
pub struct TileHeader {
    pub path: PathBuf,
    pub point_count: u64,
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
    pub min_z: f64,
    pub max_z: f64,
}

static HEADER_READS: AtomicU64 = AtomicU64::new(0);
static PAYLOAD_READS: AtomicU64 = AtomicU64::new(0);

/// Number of header reads since the last [`reset_io_counters`].
pub fn header_reads() -> u64 {
    HEADER_READS.load(Ordering::Relaxed)
}

/// Number of point-payload reads since the last [`reset_io_counters`].
pub fn payload_reads() -> u64 {
    PAYLOAD_READS.load(Ordering::Relaxed)
}

pub fn reset_io_counters() {
    HEADER_READS.store(0, Ordering::Relaxed);
    PAYLOAD_READS.store(0, Ordering::Relaxed);
}

const LAS_MAGIC: &[u8; 4] = b"LASF";
/// Size of the fixed header region this reader needs.
const LAS_HEADER_LEN: usize = 227;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum TileFormat {
    Las,
    Ascii,
}

fn corrupt(path: &Path, detail: impl Into<String>) -> Error {
    Error::CorruptTile {
        path: path.to_path_buf(),
        detail: detail.into(),
    }
}

/// Sniff the on-disk format from leading bytes: LAS magic, or text that
/// starts (after comments) with a parseable coordinate row.
fn detect_format(path: &Path) -> Result<TileFormat> {
    let mut file = File::open(path)?;
    let mut head = [0u8; 4096];
    let n = read_up_to(&mut file, &mut head)?;
    let head = &head[..n];
    if head.len() >= 4 && &head[..4] == LAS_MAGIC {
        return Ok(TileFormat::Las);
    }
    let text = match std::str::from_utf8(head) {
        Ok(t) => t,
        // a trailing truncated multi-byte char is fine for sniffing purposes
        Err(e) if e.valid_up_to() > 0 => std::str::from_utf8(&head[..e.valid_up_to()]).unwrap(),
        Err(_) => return Err(Error::UnsupportedTileFormat(path.to_path_buf())),
    };
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if parse_ascii_point(line).is_some() {
            return Ok(TileFormat::Ascii);
        }
        return Err(Error::UnsupportedTileFormat(path.to_path_buf()));
    }
    // nothing but comments/blank lines in the probed window: treat as ASCII
    // and let the scan decide whether it is empty
    Ok(TileFormat::Ascii)
}

fn read_up_to(file: &mut File, buf: &mut [u8]) -> Result<usize> {
    let mut n = 0;
    loop {
        let r = file.read(&mut buf[n..])?;
        if r == 0 || n + r == buf.len() {
            return Ok(n + r);
        }
        n += r;
    }
}

fn parse_ascii_point(line: &str) -> Option<PointRecord> {
    let mut it = line.split_whitespace();
    let x: f64 = it.next()?.parse().ok()?;
    let y: f64 = it.next()?.parse().ok()?;
    let z: f64 = it.next()?.parse().ok()?;
    let classification = match it.next() {
        Some(c) => Some(c.parse::<u8>().ok()?),
        None => None,
    };
    if it.next().is_some() || !x.is_finite() || !y.is_finite() || !z.is_finite() {
        return None;
    }
    Some(PointRecord {
        x,
        y,
        z,
        classification,
    })
}

struct LasHeader {
    point_count: u64,
    offset_to_points: u64,
    record_len: usize,
    format_id: u8,
    scale: [f64; 3],
    offset: [f64; 3],
    min: [f64; 3],
    max: [f64; 3],
}

fn read_las_header(path: &Path) -> Result<LasHeader> {
    let mut file = File::open(path)?;
    let mut buf = [0u8; LAS_HEADER_LEN];
    let n = read_up_to(&mut file, &mut buf)?;
    if n < LAS_HEADER_LEN {
        return Err(corrupt(path, "truncated header"));
    }
    let u16_at = |o: usize| u16::from_le_bytes([buf[o], buf[o + 1]]);
    let u32_at = |o: usize| u32::from_le_bytes([buf[o], buf[o + 1], buf[o + 2], buf[o + 3]]);
    let f64_at = |o: usize| f64::from_le_bytes(buf[o..o + 8].try_into().unwrap());

    if &buf[..4] != LAS_MAGIC {
        return Err(Error::UnsupportedTileFormat(path.to_path_buf()));
    }
    let version_major = buf[24];
    if version_major != 1 {
        return Err(Error::UnsupportedTileFormat(path.to_path_buf()));
    }
    let header_size = u16_at(94) as u64;
    if header_size < LAS_HEADER_LEN as u64 {
        return Err(corrupt(path, "declared header size too small"));
    }
    let offset_to_points = u32_at(96) as u64;
    if offset_to_points < header_size {
        return Err(corrupt(path, "point data offset inside header"));
    }
    let format_id = buf[104] & 0x3f;
    let record_len = u16_at(105) as usize;
    if record_len < 12 {
        return Err(corrupt(path, "point record shorter than x/y/z"));
    }
    let point_count = u32_at(107) as u64;
    let scale = [f64_at(131), f64_at(139), f64_at(147)];
    let offset = [f64_at(155), f64_at(163), f64_at(171)];
    if scale.iter().any(|s| !(s.abs() > 0.0) || !s.is_finite()) {
        return Err(corrupt(path, "zero or non-finite scale factor"));
    }
    // LAS stores bounds as max/min pairs per axis
    let max = [f64_at(179), f64_at(195), f64_at(211)];
    let min = [f64_at(187), f64_at(203), f64_at(219)];
    Ok(LasHeader {
        point_count,
        offset_to_points,
        record_len,
        format_id,
        scale,
        offset,
        min,
        max,
    })
}

/// Read extents and count. Binary tiles never touch the payload; ASCII tiles
/// are scanned in full. An ASCII tile without a single point row is corrupt.
pub fn read_tile_header(path: &Path) -> Result<TileHeader> {
    HEADER_READS.fetch_add(1, Ordering::Relaxed);
    match detect_format(path)? {
        TileFormat::Las => {
            let h = read_las_header(path)?;
            Ok(TileHeader {
                path: path.to_path_buf(),
                point_count: h.point_count,
                min_x: h.min[0],
                min_y: h.min[1],
                max_x: h.max[0],
                max_y: h.max[1],
                min_z: h.min[2],
                max_z: h.max[2],
            })
        }
        TileFormat::Ascii => {
            let points = scan_ascii(path)?;
            let mut header = TileHeader {
                path: path.to_path_buf(),
                point_count: points.len() as u64,
                min_x: f64::INFINITY,
                min_y: f64::INFINITY,
                max_x: f64::NEG_INFINITY,
                max_y: f64::NEG_INFINITY,
                min_z: f64::INFINITY,
                max_z: f64::NEG_INFINITY,
            };
            if points.is_empty() {
                return Err(corrupt(path, "no point rows"));
            }
            for p in &points {
                header.min_x = header.min_x.min(p.x);
                header.min_y = header.min_y.min(p.y);
                header.max_x = header.max_x.max(p.x);
                header.max_y = header.max_y.max(p.y);
                header.min_z = header.min_z.min(p.z);
                header.max_z = header.max_z.max(p.z);
            }
            Ok(header)
        }
    }
}

fn scan_ascii(path: &Path) -> Result<Vec<PointRecord>> {
    let file = File::open(path)?;
    let reader = BufReader::new(file);
    let mut points = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        match parse_ascii_point(trimmed) {
            Some(p) => points.push(p),
            None => {
                return Err(corrupt(path, format!("bad point row at line {}", lineno + 1)));
            }
        }
    }
    Ok(points)
}

/// Read the full point payload of a tile.
pub fn read_points(path: &Path) -> Result<Vec<PointRecord>> {
    PAYLOAD_READS.fetch_add(1, Ordering::Relaxed);
    match detect_format(path)? {
        TileFormat::Ascii => {
            let points = scan_ascii(path)?;
            if points.is_empty() {
                return Err(corrupt(path, "no point rows"));
            }
            Ok(points)
        }
        TileFormat::Las => {
            let h = read_las_header(path)?;
            let mut file = File::open(path)?;
            file.seek(SeekFrom::Start(h.offset_to_points))?;
            let want = h.point_count as usize * h.record_len;
            let mut payload = vec![0u8; want];
            let got = read_up_to(&mut file, &mut payload)?;
            if got < want {
                return Err(corrupt(
                    path,
                    format!(
                        "payload holds {} records, header declares {}",
                        got / h.record_len.max(1),
                        h.point_count
                    ),
                ));
            }
            // classification sits at byte 15 in point formats 0 through 5
            let class_offset = if h.format_id <= 5 && h.record_len > 15 {
                Some(15)
            } else {
                None
            };
            let mut points = Vec::with_capacity(h.point_count as usize);
            for rec in payload.chunks_exact(h.record_len) {
                let i32_at = |o: usize| {
                    i32::from_le_bytes([rec[o], rec[o + 1], rec[o + 2], rec[o + 3]]) as f64
                };
                points.push(PointRecord {
                    x: i32_at(0) * h.scale[0] + h.offset[0],
                    y: i32_at(4) * h.scale[1] + h.offset[1],
                    z: i32_at(8) * h.scale[2] + h.offset[2],
                    classification: class_offset.map(|o| rec[o] & 0x1f),
                });
            }
            Ok(points)
        }
    }
}

/// Write a binary tile in the LAS subset this crate reads (point format 0,
/// millimeter scale). Creation date fields are zeroed so identical input
/// always produces identical bytes.
pub fn write_las_tile(path: &Path, points: &[PointRecord]) -> Result<()> {
    if points.is_empty() {
        return Err(Error::Config("refusing to write an empty tile".into()));
    }
    const RECORD_LEN: u16 = 20;
    let scale = 0.001_f64;
    let mut min = [f64::INFINITY; 3];
    let mut max = [f64::NEG_INFINITY; 3];
    for p in points {
        for (i, v) in [p.x, p.y, p.z].into_iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::Config("non-finite point coordinate".into()));
            }
            min[i] = min[i].min(v);
            max[i] = max[i].max(v);
        }
    }
    let offset = [min[0].floor(), min[1].floor(), min[2].floor()];

    let mut header = vec![0u8; LAS_HEADER_LEN];
    header[..4].copy_from_slice(LAS_MAGIC);
    header[24] = 1; // version 1.2
    header[25] = 2;
    header[26..26 + 7].copy_from_slice(b"waveloc");
    header[58..58 + 7].copy_from_slice(b"waveloc");
    header[94..96].copy_from_slice(&(LAS_HEADER_LEN as u16).to_le_bytes());
    header[96..100].copy_from_slice(&(LAS_HEADER_LEN as u32).to_le_bytes());
    header[104] = 0;
    header[105..107].copy_from_slice(&RECORD_LEN.to_le_bytes());
    header[107..111].copy_from_slice(&(points.len() as u32).to_le_bytes());
    header[111..115].copy_from_slice(&(points.len() as u32).to_le_bytes());
    for (i, &s) in [scale, scale, scale].iter().enumerate() {
        header[131 + 8 * i..139 + 8 * i].copy_from_slice(&s.to_le_bytes());
    }
    for i in 0..3 {
        header[155 + 8 * i..163 + 8 * i].copy_from_slice(&offset[i].to_le_bytes());
    }
    for i in 0..3 {
        header[179 + 16 * i..187 + 16 * i].copy_from_slice(&max[i].to_le_bytes());
        header[187 + 16 * i..195 + 16 * i].copy_from_slice(&min[i].to_le_bytes());
    }

    let mut body = Vec::with_capacity(points.len() * RECORD_LEN as usize);
    for p in points {
        let mut rec = [0u8; RECORD_LEN as usize];
        for (i, v) in [p.x, p.y, p.z].into_iter().enumerate() {
            let q = ((v - offset[i]) / scale).round();
            if q.abs() > i32::MAX as f64 {
                return Err(Error::Config("coordinate out of range for tile".into()));
            }
            rec[4 * i..4 * i + 4].copy_from_slice(&(q as i32).to_le_bytes());
        }
        rec[15] = p.classification.unwrap_or(0);
        body.extend_from_slice(&rec);
    }

    let mut file = File::create(path)?;
    file.write_all(&header)?;
    file.write_all(&body)?;
    Ok(())
}

/// Write an ASCII tile ("x y z class" rows).
pub fn write_ascii_tile(path: &Path, points: &[PointRecord]) -> Result<()> {
    if points.is_empty() {
        return Err(Error::Config("refusing to write an empty tile".into()));
    }
    let mut out = String::with_capacity(points.len() * 32);
    for p in points {
        match p.classification {
            Some(c) => out.push_str(&format!("{} {} {} {}\n", p.x, p.y, p.z, c)),
            None => out.push_str(&format!("{} {} {}\n", p.x, p.y, p.z)),
        }
    }
    fs::write(path, out)?;
    Ok(())
}
