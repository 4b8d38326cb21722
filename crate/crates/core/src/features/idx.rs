//! MNIST IDX archives (big-endian headers, unsigned byte payload).

use std::fs;
use std::path::Path;

use super::{Split, TaskDataset};
use crate::error::{Error, Result};

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;

/// Raw MNIST train and test splits. Pixels stay as bytes until a task is
/// materialized.
#[derive(Debug, Clone)]
pub struct MnistSource {
    pub image_dim: usize,
    train_images: Vec<u8>,
    train_labels: Vec<u8>,
    test_images: Vec<u8>,
    test_labels: Vec<u8>,
}

fn be_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_be_bytes(bytes[at..at + 4].try_into().unwrap())
}

/// Returns (count, rows, cols, pixels).
pub fn read_idx_images(path: &Path) -> Result<(usize, usize, usize, Vec<u8>)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < 16 {
        return Err(Error::ingest(path, "file shorter than the IDX image header"));
    }
    let magic = be_u32(&bytes, 0);
    if magic != IMAGES_MAGIC {
        return Err(Error::ingest(path, format!("bad image magic {magic:#010x}")));
    }
    let count = be_u32(&bytes, 4) as usize;
    let rows = be_u32(&bytes, 8) as usize;
    let cols = be_u32(&bytes, 12) as usize;
    let expected = count * rows * cols;
    if bytes.len() - 16 != expected {
        return Err(Error::ingest(
            path,
            format!("payload has {} bytes, header implies {expected}", bytes.len() - 16),
        ));
    }
    Ok((count, rows, cols, bytes[16..].to_vec()))
}

pub fn read_idx_labels(path: &Path) -> Result<Vec<u8>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < 8 {
        return Err(Error::ingest(path, "file shorter than the IDX label header"));
    }
    let magic = be_u32(&bytes, 0);
    if magic != LABELS_MAGIC {
        return Err(Error::ingest(path, format!("bad label magic {magic:#010x}")));
    }
    let count = be_u32(&bytes, 4) as usize;
    if bytes.len() - 8 != count {
        return Err(Error::ingest(path, format!("payload has {} labels, header says {count}", bytes.len() - 8)));
    }
    if let Some(l) = bytes[8..].iter().find(|&&l| l > 9) {
        return Err(Error::ingest(path, format!("label {l} is not a digit")));
    }
    Ok(bytes[8..].to_vec())
}

impl MnistSource {
    /// Load the four standard files (`train-images-idx3-ubyte`, ...) from `dir`.
    pub fn load(dir: &Path) -> Result<Self> {
        let (n_train, r, c, train_images) = read_idx_images(&dir.join("train-images-idx3-ubyte"))?;
        let train_labels = read_idx_labels(&dir.join("train-labels-idx1-ubyte"))?;
        let (n_test, r2, c2, test_images) = read_idx_images(&dir.join("t10k-images-idx3-ubyte"))?;
        let test_labels = read_idx_labels(&dir.join("t10k-labels-idx1-ubyte"))?;
        if (r, c) != (r2, c2) {
            return Err(Error::ingest(dir, "train and test images differ in size"));
        }
        if n_train != train_labels.len() || n_test != test_labels.len() {
            return Err(Error::ingest(dir, "image and label counts differ"));
        }
        Ok(MnistSource {
            image_dim: r * c,
            train_images,
            train_labels,
            test_images,
            test_labels,
        })
    }

    /// Build a source from raw arrays (used by tests and synthetic checks).
    pub fn from_raw(
        image_dim: usize,
        train_images: Vec<u8>,
        train_labels: Vec<u8>,
        test_images: Vec<u8>,
        test_labels: Vec<u8>,
    ) -> Result<Self> {
        if image_dim == 0
            || train_images.len() != train_labels.len() * image_dim
            || test_images.len() != test_labels.len() * image_dim
        {
            return Err(Error::arg("raw MNIST arrays are inconsistent with the image size"));
        }
        Ok(MnistSource {
            image_dim,
            train_images,
            train_labels,
            test_images,
            test_labels,
        })
    }

    pub fn len(&self, split: Split) -> usize {
        match split {
            Split::Train => self.train_labels.len(),
            Split::Test => self.test_labels.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.train_labels.is_empty() && self.test_labels.is_empty()
    }

    /// Image `i` scaled to [0, 1].
    pub fn image(&self, split: Split, i: usize) -> Vec<f32> {
        let d = self.image_dim;
        let src = match split {
            Split::Train => &self.train_images,
            Split::Test => &self.test_images,
        };
        src[i * d..(i + 1) * d].iter().map(|&p| f32::from(p) / 255.0).collect()
    }

    pub(crate) fn permuted_task(&self, task_id: usize, split: Split, permutation: &[u32], rows: &[usize]) -> TaskDataset {
        let d = self.image_dim;
        let (images, labels) = match split {
            Split::Train => (&self.train_images, &self.train_labels),
            Split::Test => (&self.test_images, &self.test_labels),
        };
        let mut features = Vec::with_capacity(rows.len() * d);
        let mut out_labels = Vec::with_capacity(rows.len());
        for &i in rows {
            let img = &images[i * d..(i + 1) * d];
            features.extend(permutation.iter().map(|&p| f32::from(img[p as usize]) / 255.0));
            out_labels.push(u32::from(labels[i]));
        }
        TaskDataset::new(task_id, split, d, 10, features, out_labels).expect("pixels are finite and labels are digits")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_images(path: &Path, count: u32, rows: u32, cols: u32, payload: &[u8]) {
        let mut b = Vec::new();
        b.extend_from_slice(&IMAGES_MAGIC.to_be_bytes());
        b.extend_from_slice(&count.to_be_bytes());
        b.extend_from_slice(&rows.to_be_bytes());
        b.extend_from_slice(&cols.to_be_bytes());
        b.extend_from_slice(payload);
        fs::write(path, b).unwrap();
    }

    #[test]
    fn parses_and_validates_headers() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("imgs");
        write_images(&p, 2, 2, 2, &[0, 255, 1, 2, 3, 4, 5, 6]);
        let (n, r, c, px) = read_idx_images(&p).unwrap();
        assert_eq!((n, r, c), (2, 2, 2));
        assert_eq!(px.len(), 8);

        write_images(&p, 3, 2, 2, &[0; 8]);
        assert!(matches!(read_idx_images(&p), Err(Error::Ingestion { .. })));

        let mut labels = LABELS_MAGIC.to_be_bytes().to_vec();
        labels.extend_from_slice(&2u32.to_be_bytes());
        labels.extend_from_slice(&[3, 11]);
        let lp = dir.path().join("labels");
        fs::write(&lp, labels).unwrap();
        assert!(read_idx_labels(&lp).is_err());
    }

    #[test]
    fn missing_directory_is_an_error() {
        assert!(MnistSource::load(Path::new("/nonexistent/mnist")).is_err());
    }
}
