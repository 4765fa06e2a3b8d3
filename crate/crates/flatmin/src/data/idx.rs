//! IDX binary container (the MNIST format): big-endian magic, dimension
//! sizes, then the raw payload. Gzip-compressed files are detected by their
//! magic bytes.

use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;

use crate::data::Dataset;
use crate::error::{Error, Result};

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

struct Reader<R> {
    inner: R,
    path: String,
    offset: u64,
}

impl<R: Read> Reader<R> {
    fn err(&self, offset: u64, message: String) -> Error {
        Error::Format { path: self.path.clone(), offset, message }
    }

    fn read_u32(&mut self, what: &str) -> Result<u32> {
        let at = self.offset;
        let mut buf = [0u8; 4];
        self.inner
            .read_exact(&mut buf)
            .map_err(|e| self.err(at, format!("truncated while reading {what}: {e}")))?;
        self.offset += 4;
        Ok(u32::from_be_bytes(buf))
    }

    /// Read exactly `expected` payload bytes; reject both truncation and
    /// trailing data. Never pre-allocates from untrusted counts.
    fn read_payload(&mut self, expected: u64) -> Result<Vec<u8>> {
        let at = self.offset;
        let mut data = Vec::new();
        (&mut self.inner)
            .take(expected + 1)
            .read_to_end(&mut data)
            .map_err(|e| self.err(at, format!("payload read failed: {e}")))?;
        if (data.len() as u64) < expected {
            return Err(self.err(
                at + data.len() as u64,
                format!("truncated payload: {} of {expected} bytes", data.len()),
            ));
        }
        if data.len() as u64 > expected {
            return Err(self.err(at + expected, "trailing data after payload".into()));
        }
        self.offset += expected;
        Ok(data)
    }
}

fn open_maybe_gz(path: &Path) -> Result<Box<dyn Read>> {
    let mut file = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 2];
    let n = file.read(&mut magic)?;
    let joined: Box<dyn Read> = Box::new(std::io::Cursor::new(magic[..n].to_vec()).chain(file));
    if n == 2 && magic == [0x1f, 0x8b] {
        Ok(Box::new(GzDecoder::new(joined)))
    } else {
        Ok(joined)
    }
}

fn read_images(path: &Path) -> Result<(usize, usize, usize, Vec<u8>)> {
    let mut r = Reader {
        inner: open_maybe_gz(path)?,
        path: path.display().to_string(),
        offset: 0,
    };
    let magic = r.read_u32("images magic")?;
    if magic != IMAGES_MAGIC {
        return Err(r.err(0, format!("bad images magic {magic:#010x}, expected {IMAGES_MAGIC:#010x}")));
    }
    let count = r.read_u32("image count")? as usize;
    let rows = r.read_u32("image rows")? as usize;
    let cols = r.read_u32("image cols")? as usize;
    if count == 0 || rows == 0 || cols == 0 {
        return Err(r.err(4, format!("degenerate dimensions {count} x {rows} x {cols}")));
    }
    let expected = count as u64 * rows as u64 * cols as u64;
    let data = r.read_payload(expected)?;
    Ok((count, rows, cols, data))
}

fn read_labels(path: &Path) -> Result<(usize, Vec<u8>)> {
    let mut r = Reader {
        inner: open_maybe_gz(path)?,
        path: path.display().to_string(),
        offset: 0,
    };
    let magic = r.read_u32("labels magic")?;
    if magic != LABELS_MAGIC {
        return Err(r.err(0, format!("bad labels magic {magic:#010x}, expected {LABELS_MAGIC:#010x}")));
    }
    let count = r.read_u32("label count")? as usize;
    let data = r.read_payload(count as u64)?;
    Ok((count, data))
}

/// Load an images/labels file pair. Pixel bytes are scaled to `[0, 1]` by
/// dividing by 255; the image shape is recorded on the dataset.
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<Dataset> {
    let (count, rows, cols, pixels) = read_images(images_path)?;
    let (label_count, raw_labels) = read_labels(labels_path)?;
    if count != label_count {
        return Err(Error::Format {
            path: labels_path.display().to_string(),
            offset: 4,
            message: format!("{label_count} labels for {count} images"),
        });
    }
    let features: Vec<f64> = pixels.iter().map(|&b| b as f64 / 255.0).collect();
    let labels: Vec<u32> = raw_labels.iter().map(|&b| b as u32).collect();
    let classes = labels.iter().copied().max().unwrap_or(0) as usize + 1;
    Dataset::new(count, rows * cols, features, labels, classes.max(2))?
        .with_image_shape(rows, cols)
}

/// Write a dataset as a raw IDX image/label file pair. Features are clamped
/// to `[0, 1]` and quantized to bytes; datasets without an image shape are
/// written as `d x 1` images.
pub fn write_idx(data: &Dataset, images_path: &Path, labels_path: &Path) -> Result<()> {
    let (rows, cols) = data.image_shape().unwrap_or((data.dim(), 1));
    let mut img = File::create(images_path)?;
    img.write_all(&IMAGES_MAGIC.to_be_bytes())?;
    img.write_all(&(data.len() as u32).to_be_bytes())?;
    img.write_all(&(rows as u32).to_be_bytes())?;
    img.write_all(&(cols as u32).to_be_bytes())?;
    let bytes: Vec<u8> = data
        .features()
        .iter()
        .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect();
    img.write_all(&bytes)?;

    let mut lab = File::create(labels_path)?;
    lab.write_all(&LABELS_MAGIC.to_be_bytes())?;
    lab.write_all(&(data.len() as u32).to_be_bytes())?;
    let label_bytes: Vec<u8> = data.labels().iter().map(|&l| l as u8).collect();
    lab.write_all(&label_bytes)?;
    Ok(())
}
