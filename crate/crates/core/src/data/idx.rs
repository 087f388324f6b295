use std::fs::File;
use std::io::Read;
use std::path::Path;

use flate2::read::GzDecoder;

use crate::error::{Error, Result};

const IMAGE_MAGIC: u32 = 2051;
const LABEL_MAGIC: u32 = 2049;

/// Images and labels as stored on disk.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawDataset {
    pub rows: usize,
    pub cols: usize,
    /// Row-major pixels, `rows * cols` bytes per image.
    pub images: Vec<u8>,
    pub labels: Vec<u8>,
}

impl RawDataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn pixels_per_image(&self) -> usize {
        self.rows * self.cols
    }

    pub fn image(&self, i: usize) -> &[u8] {
        let n = self.pixels_per_image();
        &self.images[i * n..(i + 1) * n]
    }
}

/// Reads a whole file, inflating it when it starts with the gzip magic.
fn read_maybe_gz(path: &Path) -> Result<Vec<u8>> {
    let mut raw = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut raw))
        .map_err(|e| Error::ingest(path, e.to_string()))?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice())
            .read_to_end(&mut out)
            .map_err(|e| Error::ingest(path, format!("gzip: {e}")))?;
        return Ok(out);
    }
    Ok(raw)
}

fn be_u32(buf: &[u8], offset: usize, path: &Path) -> Result<u32> {
    buf.get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| {
            Error::ingest(
                path,
                format!(
                    "header truncated at offset {offset}: file has {} bytes",
                    buf.len()
                ),
            )
        })
}

fn payload<'a>(buf: &'a [u8], offset: usize, len: usize, path: &Path) -> Result<&'a [u8]> {
    let have = buf.len().saturating_sub(offset);
    if have < len {
        return Err(Error::ingest(
            path,
            format!(
                "truncated payload at offset {offset}: expected {len} bytes, found {have} ({} missing)",
                len - have
            ),
        ));
    }
    if have > len {
        return Err(Error::ingest(
            path,
            format!(
                "{} trailing bytes after offset {}",
                have - len,
                offset + len
            ),
        ));
    }
    Ok(&buf[offset..])
}

/// Parses an IDX image file (magic 2051) and label file (magic 2049).
/// Either may be gzip-compressed.
pub fn load_idx(images: impl AsRef<Path>, labels: impl AsRef<Path>) -> Result<RawDataset> {
    let (ip, lp) = (images.as_ref(), labels.as_ref());
    let ib = read_maybe_gz(ip)?;
    let lb = read_maybe_gz(lp)?;

    let magic = be_u32(&ib, 0, ip)?;
    if magic != IMAGE_MAGIC {
        return Err(Error::ingest(
            ip,
            format!("bad magic {magic} at offset 0, expected {IMAGE_MAGIC}"),
        ));
    }
    let n = be_u32(&ib, 4, ip)? as usize;
    let rows = be_u32(&ib, 8, ip)? as usize;
    let cols = be_u32(&ib, 12, ip)? as usize;
    let pixels = payload(&ib, 16, n * rows * cols, ip)?;

    let magic = be_u32(&lb, 0, lp)?;
    if magic != LABEL_MAGIC {
        return Err(Error::ingest(
            lp,
            format!("bad magic {magic} at offset 0, expected {LABEL_MAGIC}"),
        ));
    }
    let nl = be_u32(&lb, 4, lp)? as usize;
    let labels = payload(&lb, 8, nl, lp)?;
    if nl != n {
        return Err(Error::ingest(lp, format!("{nl} labels for {n} images")));
    }
    Ok(RawDataset {
        rows,
        cols,
        images: pixels.to_vec(),
        labels: labels.to_vec(),
    })
}

/// Serializes a dataset back to IDX image and label bytes.
pub fn encode_idx(data: &RawDataset) -> (Vec<u8>, Vec<u8>) {
    let mut images = Vec::with_capacity(16 + data.images.len());
    for v in [
        IMAGE_MAGIC,
        data.len() as u32,
        data.rows as u32,
        data.cols as u32,
    ] {
        images.extend_from_slice(&v.to_be_bytes());
    }
    images.extend_from_slice(&data.images);
    let mut labels = Vec::with_capacity(8 + data.len());
    for v in [LABEL_MAGIC, data.len() as u32] {
        labels.extend_from_slice(&v.to_be_bytes());
    }
    labels.extend_from_slice(&data.labels);
    (images, labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn fixture() -> RawDataset {
        RawDataset {
            rows: 2,
            cols: 3,
            images: (0..12).map(|i| i * 20).collect(),
            labels: vec![7, 1],
        }
    }

    fn write(dir: &Path, name: &str, bytes: &[u8]) -> std::path::PathBuf {
        let p = dir.join(name);
        File::create(&p).unwrap().write_all(bytes).unwrap();
        p
    }

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let (i, l) = encode_idx(&fixture());
        let ip = write(dir.path(), "img", &i);
        let lp = write(dir.path(), "lab", &l);
        let d = load_idx(&ip, &lp).unwrap();
        assert_eq!(d, fixture());
        assert_eq!(d.image(1), &[120, 140, 160, 180, 200, 220]);
    }

    #[test]
    fn gzip_inputs() {
        let dir = tempfile::tempdir().unwrap();
        let (i, l) = encode_idx(&fixture());
        let mut gz = flate2::write::GzEncoder::new(Vec::new(), flate2::Compression::default());
        gz.write_all(&i).unwrap();
        let ip = write(dir.path(), "img.gz", &gz.finish().unwrap());
        let lp = write(dir.path(), "lab", &l);
        assert_eq!(load_idx(&ip, &lp).unwrap(), fixture());
    }

    #[test]
    fn truncated_names_missing_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let (i, l) = encode_idx(&fixture());
        let ip = write(dir.path(), "img", &i[..i.len() - 5]);
        let lp = write(dir.path(), "lab", &l);
        let msg = load_idx(&ip, &lp).unwrap_err().to_string();
        assert!(msg.contains("5 missing"), "{msg}");
        assert!(msg.contains("offset 16"), "{msg}");
    }

    #[test]
    fn wrong_magic_and_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let (i, l) = encode_idx(&fixture());
        let ip = write(dir.path(), "img", &i);
        let lp = write(dir.path(), "lab", &l);
        assert!(load_idx(&lp, &ip)
            .unwrap_err()
            .to_string()
            .contains("bad magic"));
        let mut short = fixture();
        short.labels.pop();
        let (_, l1) = encode_idx(&short);
        let lp1 = write(dir.path(), "lab1", &l1);
        assert!(load_idx(&ip, &lp1)
            .unwrap_err()
            .to_string()
            .contains("1 labels for 2 images"));
    }
}
