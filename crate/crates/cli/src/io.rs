//! Grayscale image files and atomic writes.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use dwmgipt_core::Image;
use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{DynamicImage, ImageBuffer, ImageReader, Luma};

/// A decoded frame with the sample range it came from.
#[derive(Debug, Clone)]
pub struct Frame {
    pub image: Image,
    /// 255 for 8-bit sources, 65535 for 16-bit ones.
    pub maxval: u16,
}

/// Reads an 8- or 16-bit grayscale PGM (P2 or P5) or PNG. Colour inputs are
/// converted to luma.
pub fn read_frame(path: &Path) -> Result<Frame> {
    let decoded = ImageReader::open(path)
        .and_then(|r| r.with_guessed_format())
        .with_context(|| format!("cannot open {}", path.display()))?
        .decode()
        .with_context(|| format!("cannot decode {}", path.display()))?;
    let (w, h) = (decoded.width() as usize, decoded.height() as usize);
    let (pixels, maxval): (Vec<f64>, u16) = match decoded {
        DynamicImage::ImageLuma16(buf) => (
            buf.into_raw().into_iter().map(f64::from).collect(),
            u16::MAX,
        ),
        DynamicImage::ImageLumaA16(_)
        | DynamicImage::ImageRgb16(_)
        | DynamicImage::ImageRgba16(_) => {
            let buf = decoded.to_luma16();
            (
                buf.into_raw().into_iter().map(f64::from).collect(),
                u16::MAX,
            )
        }
        other => (
            other
                .to_luma8()
                .into_raw()
                .into_iter()
                .map(f64::from)
                .collect(),
            255,
        ),
    };
    if w == 0 || h == 0 {
        bail!("{} has no pixels", path.display());
    }
    let image =
        Image::new(h, w, pixels).with_context(|| format!("invalid image {}", path.display()))?;
    Ok(Frame { image, maxval })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PgmEncoding {
    /// P2
    Ascii,
    /// P5
    Binary,
}

/// Encodes `img` as an 8-bit PGM, rounding and clamping samples to `0..=255`.
pub fn encode_pgm(img: &Image, encoding: PgmEncoding, out: impl Write) -> Result<()> {
    let sample = match encoding {
        PgmEncoding::Ascii => SampleEncoding::Ascii,
        PgmEncoding::Binary => SampleEncoding::Binary,
    };
    let encoder = PnmEncoder::new(out).with_subtype(PnmSubtype::Graymap(sample));
    let (w, h) = (img.width() as u32, img.height() as u32);
    let raw: Vec<u8> = img
        .pixels()
        .iter()
        .map(|p| {
            if p.is_nan() {
                0
            } else {
                p.round().clamp(0.0, 255.0) as u8
            }
        })
        .collect();
    ImageBuffer::<Luma<u8>, _>::from_raw(w, h, raw)
        .expect("buffer matches dimensions")
        .write_with_encoder(encoder)?;
    Ok(())
}

pub fn write_pgm(path: &Path, img: &Image) -> Result<()> {
    write_atomic(path, |w| encode_pgm(img, PgmEncoding::Binary, w))
}

/// Linearly maps the image range onto `0..=255` (a constant image maps to 0).
pub fn rescale_to_byte(img: &Image) -> Image {
    let (lo, hi) = img.min_max();
    let span = hi - lo;
    img.map(|p| {
        if span > 0.0 {
            255.0 * (p - lo) / span
        } else {
            0.0
        }
    })
}

/// Writes through a temporary file in the destination directory and renames
/// it into place, so readers never observe a partial file.
pub fn write_atomic(
    path: &Path,
    fill: impl FnOnce(&mut BufWriter<&mut File>) -> Result<()>,
) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .with_context(|| format!("cannot write into {}", dir.display()))?;
    {
        let mut w = BufWriter::new(tmp.as_file_mut());
        fill(&mut w)?;
        w.flush()?;
    }
    tmp.persist(path)
        .with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    write_atomic(path, |w| Ok(w.write_all(text.as_bytes())?))
}
