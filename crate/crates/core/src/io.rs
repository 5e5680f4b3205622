//! File formats: images in, label maps, masks, flow and overlays out.

use std::fs;
use std::io::Write;
use std::path::Path;

use image::{DynamicImage, Rgb, RgbImage};

use crate::error::{Error, Result};
use crate::grid::{neighbors4, LabelField, RegionMask, ScalarField};
use crate::motion::FlowField;

/// `"PIEH"` read as a little-endian f32.
pub const FLO_MAGIC: f32 = 202021.25;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn format_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

/// Loads an 8 or 16 bit PGM/PPM (or PNG) as channels scaled to [0, 1]. Gray
/// inputs give one channel, color inputs three; alpha is dropped.
pub fn read_image(path: &Path) -> Result<Vec<ScalarField>> {
    let img = image::open(path).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(channels_of(&img))
}

fn channels_of(img: &DynamicImage) -> Vec<ScalarField> {
    let (w, h) = (img.width() as usize, img.height() as usize);
    if img.color().has_color() {
        let rgb = img.to_rgb32f();
        (0..3)
            .map(|c| ScalarField::from_fn(w, h, |x, y| f64::from(rgb.get_pixel(x as u32, y as u32)[c])))
            .collect()
    } else {
        let gray = img.to_luma32f();
        vec![ScalarField::from_fn(w, h, |x, y| f64::from(gray.get_pixel(x as u32, y as u32)[0]))]
    }
}

/// Binary 8-bit PGM bytes.
fn pgm_bytes(width: usize, height: usize, data: &[u8]) -> Vec<u8> {
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(data);
    out
}

fn read_gray8(path: &Path) -> Result<(usize, usize, Vec<u8>)> {
    let img = image::open(path).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })?;
    if img.color().has_color() {
        return Err(format_err(path, "expected a single-channel image"));
    }
    let gray = img.to_luma8();
    Ok((gray.width() as usize, gray.height() as usize, gray.into_raw()))
}

/// Writes one byte per site holding its label.
pub fn write_labels_pgm(path: &Path, labels: &LabelField) -> Result<()> {
    let bytes: Vec<u8> = labels
        .labels()
        .iter()
        .map(|&l| u8::try_from(l).map_err(|_| Error::invalid("labels", "more than 256 regions do not fit in 8 bits")))
        .collect::<Result<_>>()?;
    let (w, h) = labels.dims();
    fs::write(path, pgm_bytes(w, h, &bytes)).map_err(io_err(path))
}

/// Reads a label map written by [`write_labels_pgm`]. A map holding only 0
/// and 255 is read as a binary mask, 255 becoming label 1.
pub fn read_labels_pgm(path: &Path) -> Result<LabelField> {
    let (w, h, data) = read_gray8(path)?;
    let binary = data.contains(&255) && data.iter().all(|&v| v == 0 || v == 255);
    let labels = data
        .into_iter()
        .map(|v| if binary { usize::from(v == 255) } else { usize::from(v) })
        .collect();
    LabelField::from_vec(w, h, labels)
}

/// Occlusion mask: sites at 255 are occluded.
pub fn read_mask_pgm(path: &Path) -> Result<RegionMask> {
    let (w, h, data) = read_gray8(path)?;
    RegionMask::from_vec(w, h, data.into_iter().map(|v| v == 255).collect())
}

pub fn write_mask_pgm(path: &Path, mask: &RegionMask) -> Result<()> {
    let (w, h) = mask.dims();
    let bytes: Vec<u8> = mask.members().iter().map(|&m| if m { 255 } else { 0 }).collect();
    fs::write(path, pgm_bytes(w, h, &bytes)).map_err(io_err(path))
}

/// Writes channels in [0, 1] as an 8-bit PGM (one channel) or PPM (three).
pub fn write_image(path: &Path, channels: &[ScalarField]) -> Result<()> {
    let first = channels.first().ok_or_else(|| Error::invalid("channels", "nothing to write"))?;
    let (w, h) = first.dims();
    let q = |v: f64| (v.clamp(0.0, 1.0) * 255.0).round() as u8;
    let (magic, data): (&str, Vec<u8>) = match channels.len() {
        1 => ("P5", first.values().iter().map(|&v| q(v)).collect()),
        3 => (
            "P6",
            (0..w * h).flat_map(|k| channels.iter().map(move |c| q(c.values()[k]))).collect(),
        ),
        _ => return Err(Error::invalid("channels", "need one or three channels")),
    };
    let mut out = format!("{magic}\n{w} {h}\n255\n").into_bytes();
    out.extend_from_slice(&data);
    fs::write(path, out).map_err(io_err(path))
}

/// Reads a `.flo` file: magic, width and height as i32, then `(u, v)` f32
/// pairs row-major, all little-endian.
pub fn read_flo(path: &Path) -> Result<FlowField> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    let word = |i: usize| -> Result<[u8; 4]> {
        bytes
            .get(4 * i..4 * i + 4)
            .map(|b| [b[0], b[1], b[2], b[3]])
            .ok_or_else(|| format_err(path, "truncated flow file"))
    };
    if f32::from_le_bytes(word(0)?) != FLO_MAGIC {
        return Err(format_err(path, "missing PIEH magic"));
    }
    let (w, h) = (i32::from_le_bytes(word(1)?), i32::from_le_bytes(word(2)?));
    if w <= 0 || h <= 0 {
        return Err(format_err(path, format!("bad flow size {w}x{h}")));
    }
    let (w, h) = (w as usize, h as usize);
    if bytes.len() != 12 + 8 * w * h {
        return Err(format_err(path, "flow payload length does not match its size"));
    }
    let mut u = Vec::with_capacity(w * h);
    let mut v = Vec::with_capacity(w * h);
    for k in 0..w * h {
        u.push(f64::from(f32::from_le_bytes(word(3 + 2 * k)?)));
        v.push(f64::from(f32::from_le_bytes(word(4 + 2 * k)?)));
    }
    FlowField::new(ScalarField::from_vec(w, h, u)?, ScalarField::from_vec(w, h, v)?)
}

pub fn write_flo(path: &Path, flow: &FlowField) -> Result<()> {
    let (w, h) = flow.dims();
    let mut out = Vec::with_capacity(12 + 8 * w * h);
    out.extend_from_slice(&FLO_MAGIC.to_le_bytes());
    out.extend_from_slice(&(w as i32).to_le_bytes());
    out.extend_from_slice(&(h as i32).to_le_bytes());
    for (&u, &v) in flow.u().values().iter().zip(flow.v().values()) {
        out.extend_from_slice(&(u as f32).to_le_bytes());
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    let mut f = fs::File::create(path).map_err(io_err(path))?;
    f.write_all(&out).map_err(io_err(path))
}

/// Input drawn in gray (or color) with region boundaries in red.
pub fn overlay(channels: &[ScalarField], labels: &LabelField) -> Result<RgbImage> {
    let first = channels.first().ok_or_else(|| Error::invalid("channels", "nothing to draw"))?;
    let (w, h) = labels.dims();
    if first.dims() != (w, h) {
        return Err(Error::DimensionMismatch {
            expected: (w, h),
            found: first.dims(),
        });
    }
    let q = |v: f64| (v.clamp(0.0, 1.0) * 255.0).round() as u8;
    Ok(RgbImage::from_fn(w as u32, h as u32, |x, y| {
        let (x, y) = (x as usize, y as usize);
        let l = labels.get(x, y);
        if neighbors4(x, y, w, h).any(|(nx, ny)| labels.get(nx, ny) != l) {
            return Rgb([255, 0, 0]);
        }
        if channels.len() == 3 {
            Rgb([q(channels[0].get(x, y)), q(channels[1].get(x, y)), q(channels[2].get(x, y))])
        } else {
            let g = q(channels.iter().map(|c| c.get(x, y)).sum::<f64>() / channels.len() as f64);
            Rgb([g, g, g])
        }
    }))
}

pub fn write_overlay_png(path: &Path, channels: &[ScalarField], labels: &LabelField) -> Result<()> {
    overlay(channels, labels)?
        .save_with_format(path, image::ImageFormat::Png)
        .map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })
}
