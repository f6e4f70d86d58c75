//! Tensor containers, the bit-exact `.frag` file format, and image-sequence
//! ingestion.
//!
//! File layout (little-endian throughout):
//!
//! - bytes 0..8   ASCII magic `FRAG0001`
//! - bytes 8..12  format version, u32 (= 1)
//! - bytes 12..28 four u32: L, W, H, C
//! - then `L*W*H*C` f32 values, element `(l, y, x, c)` at flat offset
//!   `((l*H + y)*W + x)*C + c`
//!
//! Values are stored as f32 on disk and widened to f64 in memory, so any
//! tensor read from a file round-trips bit-identically.

use crate::error::{FragError, Result};
use std::fs;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

pub const MAGIC: &[u8; 8] = b"FRAG0001";
pub const FORMAT_VERSION: u32 = 1;

/// Parsed file header.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TensorHeader {
    pub version: u32,
    pub frames: usize,
    pub width: usize,
    pub height: usize,
    pub channels: usize,
}

impl TensorHeader {
    /// Number of scalar values the payload must hold.
    pub fn value_count(&self) -> usize {
        self.frames * self.width * self.height * self.channels
    }
}

/// A real-valued frames x width x height x channels tensor.
///
/// All values are finite; the container is immutable after construction and
/// safe to share across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentSequence {
    frames: usize,
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

impl LatentSequence {
    /// Builds a tensor from a flat payload in `(l, y, x, c)` order.
    pub fn from_vec(
        frames: usize,
        width: usize,
        height: usize,
        channels: usize,
        data: Vec<f64>,
    ) -> Result<Self> {
        if frames == 0 || width == 0 || height == 0 || channels == 0 {
            return Err(FragError::InvalidArgument(
                "tensor dimensions must all be >= 1".into(),
            ));
        }
        let expected = frames
            .checked_mul(width)
            .and_then(|n| n.checked_mul(height))
            .and_then(|n| n.checked_mul(channels))
            .ok_or_else(|| FragError::InvalidArgument("tensor dimensions overflow".into()))?;
        if data.len() != expected {
            return Err(FragError::DimMismatch(format!(
                "payload has {} values, dims imply {}",
                data.len(),
                expected
            )));
        }
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(FragError::NonFinite { index });
        }
        Ok(Self {
            frames,
            width,
            height,
            channels,
            data,
        })
    }

    /// All-zero tensor of the given shape.
    pub fn zeros(frames: usize, width: usize, height: usize, channels: usize) -> Result<Self> {
        Self::from_vec(
            frames,
            width,
            height,
            channels,
            vec![0.0; frames * width * height * channels],
        )
    }

    /// Builds a tensor by evaluating `f(l, y, x, c)`.
    pub fn from_fn<F>(
        frames: usize,
        width: usize,
        height: usize,
        channels: usize,
        mut f: F,
    ) -> Result<Self>
    where
        F: FnMut(usize, usize, usize, usize) -> f64,
    {
        let mut data = Vec::with_capacity(frames * width * height * channels);
        for l in 0..frames {
            for y in 0..height {
                for x in 0..width {
                    for c in 0..channels {
                        data.push(f(l, y, x, c));
                    }
                }
            }
        }
        Self::from_vec(frames, width, height, channels, data)
    }

    pub fn frames(&self) -> usize {
        self.frames
    }
    pub fn width(&self) -> usize {
        self.width
    }
    pub fn height(&self) -> usize {
        self.height
    }
    pub fn channels(&self) -> usize {
        self.channels
    }
    pub fn shape(&self) -> (usize, usize, usize, usize) {
        (self.frames, self.width, self.height, self.channels)
    }

    #[inline]
    pub fn index_of(&self, l: usize, y: usize, x: usize, c: usize) -> usize {
        ((l * self.height + y) * self.width + x) * self.channels + c
    }

    #[inline]
    pub fn get(&self, l: usize, y: usize, x: usize, c: usize) -> f64 {
        self.data[self.index_of(l, y, x, c)]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Flat values of one frame, `(y, x, c)` order.
    pub fn frame(&self, l: usize) -> &[f64] {
        let stride = self.height * self.width * self.channels;
        &self.data[l * stride..(l + 1) * stride]
    }

    /// Rounds every value through f32, the on-disk precision.
    pub fn quantized(&self) -> Self {
        Self {
            frames: self.frames,
            width: self.width,
            height: self.height,
            channels: self.channels,
            data: self.data.iter().map(|&v| v as f32 as f64).collect(),
        }
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.shape(), other.shape(), "shape mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Binary per-pixel mask covering one frame plane.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameMask {
    width: usize,
    height: usize,
    data: Vec<bool>,
}

impl FrameMask {
    pub fn from_vec(width: usize, height: usize, data: Vec<bool>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(FragError::InvalidArgument(
                "mask dimensions must be >= 1".into(),
            ));
        }
        if data.len() != width * height {
            return Err(FragError::DimMismatch(format!(
                "mask payload has {} values, dims imply {}",
                data.len(),
                width * height
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn ones(width: usize, height: usize) -> Result<Self> {
        Self::from_vec(width, height, vec![true; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> bool {
        self.data[y * self.width + x]
    }

    pub fn count_ones(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    /// Loads a mask from a binary PGM: nonzero pixels are `true`.
    pub fn from_pgm(path: impl AsRef<Path>) -> Result<Self> {
        let bytes = fs::read(path.as_ref())?;
        let image = parse_netpbm(&bytes, path.as_ref())?;
        if image.channels != 1 {
            return Err(FragError::UnsupportedImage(
                "mask must be single-channel PGM".into(),
            ));
        }
        Self::from_vec(
            image.width,
            image.height,
            image.pixels.iter().map(|&p| p != 0).collect(),
        )
    }
}

fn read_header(reader: &mut impl Read, path: &Path) -> Result<TensorHeader> {
    let mut magic = [0u8; 8];
    reader
        .read_exact(&mut magic)
        .map_err(|_| FragError::BadMagic {
            path: path.display().to_string(),
        })?;
    if &magic != MAGIC {
        return Err(FragError::BadMagic {
            path: path.display().to_string(),
        });
    }
    let mut word = [0u8; 4];
    let mut next_u32 = |reader: &mut dyn Read| -> Result<u32> {
        reader.read_exact(&mut word)?;
        Ok(u32::from_le_bytes(word))
    };
    let version = next_u32(reader)?;
    if version != FORMAT_VERSION {
        return Err(FragError::UnsupportedVersion { version });
    }
    let frames = next_u32(reader)? as usize;
    let width = next_u32(reader)? as usize;
    let height = next_u32(reader)? as usize;
    let channels = next_u32(reader)? as usize;
    Ok(TensorHeader {
        version,
        frames,
        width,
        height,
        channels,
    })
}

/// Reads a tensor file, validating magic, version, payload length and
/// finiteness.
pub fn read_latents(path: impl AsRef<Path>) -> Result<LatentSequence> {
    let path = path.as_ref();
    let mut reader = BufReader::new(fs::File::open(path)?);
    let header = read_header(&mut reader, path)?;
    let expected = header.value_count();

    let mut payload = Vec::new();
    reader.read_to_end(&mut payload)?;
    if payload.len() < expected * 4 {
        return Err(FragError::TruncatedPayload {
            expected,
            actual: payload.len() / 4,
        });
    }
    if payload.len() > expected * 4 {
        return Err(FragError::TrailingBytes { expected });
    }
    let mut data = Vec::with_capacity(expected);
    for (index, chunk) in payload.chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]);
        if !v.is_finite() {
            return Err(FragError::NonFinite { index });
        }
        data.push(v as f64);
    }
    LatentSequence::from_vec(
        header.frames,
        header.width,
        header.height,
        header.channels,
        data,
    )
}

/// Serializes a tensor to bytes in the `.frag` layout.
pub fn latents_to_bytes(x: &LatentSequence) -> Result<Vec<u8>> {
    if let Some(index) = x.data().iter().position(|v| !v.is_finite()) {
        return Err(FragError::NonFinite { index });
    }
    let mut out = Vec::with_capacity(28 + x.data().len() * 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    for dim in [x.frames(), x.width(), x.height(), x.channels()] {
        out.extend_from_slice(&(dim as u32).to_le_bytes());
    }
    for &v in x.data() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    Ok(out)
}

/// Writes a tensor file; values are quantized to f32 on the way out.
pub fn write_latents(x: &LatentSequence, path: impl AsRef<Path>) -> Result<()> {
    let bytes = latents_to_bytes(x)?;
    let mut writer = BufWriter::new(fs::File::create(path)?);
    writer.write_all(&bytes)?;
    writer.flush()?;
    Ok(())
}

struct NetpbmImage {
    width: usize,
    height: usize,
    channels: usize,
    pixels: Vec<u8>,
}

fn parse_netpbm(bytes: &[u8], path: &Path) -> Result<NetpbmImage> {
    let err = |msg: &str| FragError::UnsupportedImage(format!("{}: {}", path.display(), msg));
    if bytes.len() < 2 {
        return Err(err("file too short"));
    }
    let channels = match &bytes[..2] {
        b"P5" => 1,
        b"P6" => 3,
        _ => return Err(err("expected binary PGM (P5) or PPM (P6)")),
    };

    // Header tokens: width, height, maxval; `#` comments allowed.
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in fields.iter_mut() {
        // skip whitespace and comments
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                break;
            }
        }
        let start = pos;
        while pos < bytes.len() && bytes[pos].is_ascii_digit() {
            pos += 1;
        }
        if start == pos {
            return Err(err("malformed header"));
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .unwrap()
            .parse::<usize>()
            .map_err(|_| err("malformed header"))?;
    }
    let [width, height, maxval] = fields;
    if maxval != 255 {
        return Err(err("only maxval 255 is supported"));
    }
    // single whitespace byte separates header from raster
    pos += 1;
    let expected = width * height * channels;
    if bytes.len() < pos + expected {
        return Err(err("raster shorter than header implies"));
    }
    Ok(NetpbmImage {
        width,
        height,
        channels,
        pixels: bytes[pos..pos + expected].to_vec(),
    })
}

/// Loads every `.pgm`/`.ppm` in `dir` (lexicographic filename order = frame
/// order) into one tensor, pixel values scaled to `[0, 1]`.
pub fn ingest_frames(dir: impl AsRef<Path>) -> Result<LatentSequence> {
    let dir = dir.as_ref();
    let mut paths: Vec<_> = fs::read_dir(dir)?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| {
            matches!(
                p.extension().and_then(|e| e.to_str()),
                Some("pgm") | Some("ppm")
            )
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(FragError::InvalidArgument(format!(
            "no .pgm/.ppm files in {}",
            dir.display()
        )));
    }

    let mut frames = Vec::with_capacity(paths.len());
    let mut dims: Option<(usize, usize, usize)> = None;
    for path in &paths {
        let image = parse_netpbm(&fs::read(path)?, path)?;
        let this = (image.width, image.height, image.channels);
        match dims {
            None => dims = Some(this),
            Some(first) if first != this => {
                return Err(FragError::DimMismatch(format!(
                    "{} is {}x{}x{}, previous frames are {}x{}x{}",
                    path.display(),
                    this.0,
                    this.1,
                    this.2,
                    first.0,
                    first.1,
                    first.2
                )));
            }
            _ => {}
        }
        frames.push(image.pixels);
    }
    let (width, height, channels) = dims.unwrap();
    let mut data = Vec::with_capacity(frames.len() * width * height * channels);
    for pixels in &frames {
        // netpbm rasters are already (y, x, c) ordered
        data.extend(pixels.iter().map(|&p| p as f64 / 255.0));
    }
    LatentSequence::from_vec(frames.len(), width, height, channels, data)
}
