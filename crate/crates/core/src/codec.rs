//! Raster codecs: the raw `RLM1`/`RKM1` wire format and color-coded PNG.
//!
//! Raw layout: 4-byte magic, width and height as little-endian `u32`, then
//! `width * height` bytes in row-major order.

use std::collections::HashMap;
use std::io::{self, Read, Write};

use crate::classes::{ClassTable, Rgb};
use crate::error::{Error, Result};
use crate::render::{RgbImage, RiskColormap};
use crate::types::{LabelMap, Raster, RiskMap};

pub const LABEL_MAGIC: [u8; 4] = *b"RLM1";
pub const RISK_MAGIC: [u8; 4] = *b"RKM1";
const HEADER_LEN: usize = 12;

fn write_raw(magic: [u8; 4], width: usize, height: usize, values: impl Iterator<Item = u8>) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + width * height);
    out.extend_from_slice(&magic);
    out.extend_from_slice(&(width as u32).to_le_bytes());
    out.extend_from_slice(&(height as u32).to_le_bytes());
    out.extend(values);
    out
}

fn parse_header(magic: [u8; 4], bytes: &[u8]) -> Result<(usize, usize, &[u8])> {
    if bytes.len() < HEADER_LEN {
        if bytes.len() >= 4 && bytes[..4] != magic {
            return Err(Error::BadMagic(bytes[..4].try_into().unwrap()));
        }
        return Err(Error::Truncated { expected: HEADER_LEN, got: bytes.len() });
    }
    let found: [u8; 4] = bytes[..4].try_into().unwrap();
    if found != magic {
        return Err(Error::BadMagic(found));
    }
    let width = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let height = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let len = width.checked_mul(height).ok_or(Error::BadShape { width, height, len: 0 })?;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() < len {
        return Err(Error::Truncated { expected: HEADER_LEN + len, got: bytes.len() });
    }
    Ok((width, height, &payload[..len]))
}

pub fn encode_raw_labels(labels: &LabelMap) -> Vec<u8> {
    write_raw(LABEL_MAGIC, labels.width(), labels.height(), labels.data().iter().map(|c| c.get()))
}

pub fn encode_raw_risk(risk: &RiskMap) -> Vec<u8> {
    write_raw(RISK_MAGIC, risk.width(), risk.height(), risk.levels())
}

/// Decodes one `RLM1` record; trailing bytes are rejected.
pub fn decode_raw_labels(bytes: &[u8], table: &ClassTable) -> Result<LabelMap> {
    let (w, h, payload) = parse_header(LABEL_MAGIC, bytes)?;
    if bytes.len() > HEADER_LEN + payload.len() {
        return Err(Error::BadShape { width: w, height: h, len: bytes.len() - HEADER_LEN });
    }
    let labels = LabelMap::from_ids(w, h, payload)?;
    table.validate_labels(&labels)?;
    Ok(labels)
}

/// Decodes one `RKM1` record; trailing bytes are rejected.
pub fn decode_raw_risk(bytes: &[u8]) -> Result<RiskMap> {
    let (w, h, payload) = parse_header(RISK_MAGIC, bytes)?;
    if bytes.len() > HEADER_LEN + payload.len() {
        return Err(Error::BadShape { width: w, height: h, len: bytes.len() - HEADER_LEN });
    }
    RiskMap::from_levels(w, h, payload)
}

/// Reads concatenated `RLM1` records from a byte stream.
pub struct RawFrameReader<R> {
    inner: R,
    header: [u8; HEADER_LEN],
}

impl<R: Read> RawFrameReader<R> {
    pub fn new(inner: R) -> Self {
        RawFrameReader { inner, header: [0; HEADER_LEN] }
    }

    /// Next complete record including its header, or `None` at a clean end of stream.
    pub fn next_record(&mut self) -> Result<Option<Vec<u8>>> {
        let got = read_full(&mut self.inner, &mut self.header)?;
        if got == 0 {
            return Ok(None);
        }
        if got >= 4 && self.header[..4] != LABEL_MAGIC {
            return Err(Error::BadMagic(self.header[..4].try_into().unwrap()));
        }
        if got < HEADER_LEN {
            return Err(Error::Truncated { expected: HEADER_LEN, got });
        }
        let width = u32::from_le_bytes(self.header[4..8].try_into().unwrap()) as usize;
        let height = u32::from_le_bytes(self.header[8..12].try_into().unwrap()) as usize;
        let len = width.checked_mul(height).ok_or(Error::BadShape { width, height, len: 0 })?;
        let mut record = Vec::with_capacity(HEADER_LEN + len);
        record.extend_from_slice(&self.header);
        record.resize(HEADER_LEN + len, 0);
        let got = read_full(&mut self.inner, &mut record[HEADER_LEN..])?;
        if got < len {
            return Err(Error::Truncated { expected: HEADER_LEN + len, got: HEADER_LEN + got });
        }
        Ok(Some(record))
    }
}

fn read_full(r: &mut impl Read, buf: &mut [u8]) -> io::Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match r.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    Ok(filled)
}

/// Encodes an RGB image as an 8-bit truecolor PNG with fixed encoder settings.
pub fn encode_png(image: &RgbImage) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, image.width() as u32, image.height() as u32);
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Eight);
        enc.set_compression(png::Compression::Default);
        enc.set_filter(png::FilterType::Sub);
        enc.set_adaptive_filter(png::AdaptiveFilterType::NonAdaptive);
        let mut writer = enc.write_header().map_err(|e| Error::Png(e.to_string()))?;
        writer.write_image_data(image.as_bytes()).map_err(|e| Error::Png(e.to_string()))?;
        writer.finish().map_err(|e| Error::Png(e.to_string()))?;
    }
    Ok(out)
}

/// Decodes any 8/16-bit PNG to RGB. Palette and grayscale images are expanded;
/// alpha is dropped.
pub fn decode_png(bytes: &[u8]) -> Result<RgbImage> {
    let mut dec = png::Decoder::new(bytes);
    dec.set_transformations(png::Transformations::EXPAND | png::Transformations::STRIP_16);
    let mut reader = dec.read_info().map_err(|e| Error::Png(e.to_string()))?;
    let mut buf = vec![0; reader.output_buffer_size()];
    let info = reader.next_frame(&mut buf).map_err(|e| Error::Png(e.to_string()))?;
    let (w, h) = (info.width as usize, info.height as usize);
    let buf = &buf[..info.buffer_size()];
    let stride = info.line_size;
    let channels = match info.color_type {
        png::ColorType::Grayscale => 1,
        png::ColorType::GrayscaleAlpha => 2,
        png::ColorType::Rgb => 3,
        png::ColorType::Rgba => 4,
        png::ColorType::Indexed => return Err(Error::Png("palette not expanded".into())),
    };
    let mut rgb = Vec::with_capacity(w * h * 3);
    for row in buf.chunks(stride).take(h) {
        for px in row[..w * channels].chunks_exact(channels) {
            match channels {
                1 | 2 => rgb.extend_from_slice(&[px[0]; 3]),
                _ => rgb.extend_from_slice(&px[..3]),
            }
        }
    }
    RgbImage::from_bytes(w, h, rgb)
}

fn decode_colors<T: Copy>(image: &RgbImage, lookup: impl Fn(Rgb) -> Option<T>) -> Result<Raster<T>> {
    let mut cache: HashMap<Rgb, T> = HashMap::new();
    let mut out = Vec::with_capacity(image.width() * image.height());
    for (i, px) in image.pixels().enumerate() {
        let v = match cache.get(&px) {
            Some(&v) => v,
            None => {
                let v = lookup(px).ok_or(Error::UnknownColor {
                    x: i % image.width(),
                    y: i / image.width(),
                    r: px[0],
                    g: px[1],
                    b: px[2],
                })?;
                cache.insert(px, v);
                v
            }
        };
        out.push(v);
    }
    Raster::from_vec(image.width(), image.height(), out)
}

pub fn labels_to_image(labels: &LabelMap, table: &ClassTable) -> Result<RgbImage> {
    table.validate_labels(labels)?;
    let palette: Vec<Rgb> = table.entries().iter().map(|e| e.color).collect();
    let data = labels.data().iter().flat_map(|c| palette[c.index()]).collect();
    RgbImage::from_bytes(labels.width(), labels.height(), data)
}

pub fn image_to_labels(image: &RgbImage, table: &ClassTable) -> Result<LabelMap> {
    decode_colors(image, |c| table.class_of_color(c))
}

pub fn encode_label_image(labels: &LabelMap, table: &ClassTable) -> Result<Vec<u8>> {
    encode_png(&labels_to_image(labels, table)?)
}

pub fn decode_label_image(png_bytes: &[u8], table: &ClassTable) -> Result<LabelMap> {
    image_to_labels(&decode_png(png_bytes)?, table)
}

/// Inverse of [`render_risk`](crate::render::render_risk).
pub fn image_to_risk(image: &RgbImage, cmap: &RiskColormap) -> Result<RiskMap> {
    decode_colors(image, |c| cmap.level_of(c))
}

pub fn decode_risk_image(png_bytes: &[u8], cmap: &RiskColormap) -> Result<RiskMap> {
    image_to_risk(&decode_png(png_bytes)?, cmap)
}

/// Writes a raw record to `w`.
pub fn write_record(w: &mut impl Write, record: &[u8]) -> Result<()> {
    w.write_all(record)?;
    Ok(())
}
