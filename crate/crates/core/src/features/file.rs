//! Feature files: a little-endian f32 row-major payload (`*.f32`), a u32
//! label file (`*.labels`) and a JSON manifest sidecar (`*.json`).

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Split, TaskDataset, TaskStream};
use crate::error::{Error, Result};
use crate::pspbd::HeadLayout;

pub const FEATURE_MAGIC: &str = "TMFEAT";
pub const FEATURE_VERSION: u32 = 1;
pub const DTYPE_F32LE: &str = "f32le";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureFileManifest {
    pub magic: String,
    pub version: u32,
    pub dim: usize,
    pub count: usize,
    pub classes: usize,
    pub task_id: usize,
    pub dtype: String,
    /// `sha256:` followed by the lowercase hex digest of the `.f32` payload.
    pub checksum: String,
}

fn sidecar(path: &Path, ext: &str) -> PathBuf {
    path.with_extension(ext)
}

fn checksum(payload: &[u8]) -> String {
    format!("sha256:{}", hex::encode(Sha256::digest(payload)))
}

/// Write `data` to `path` (the `.f32` payload) plus its label file and manifest.
pub fn write_feature_file(path: &Path, data: &TaskDataset) -> Result<FeatureFileManifest> {
    let mut payload = Vec::with_capacity(data.features().len() * 4);
    for v in data.features() {
        payload.extend_from_slice(&v.to_le_bytes());
    }
    let mut labels = Vec::with_capacity(data.len() * 4);
    for l in data.labels() {
        labels.extend_from_slice(&l.to_le_bytes());
    }
    let manifest = FeatureFileManifest {
        magic: FEATURE_MAGIC.to_string(),
        version: FEATURE_VERSION,
        dim: data.dim(),
        count: data.len(),
        classes: data.num_classes(),
        task_id: data.task_id(),
        dtype: DTYPE_F32LE.to_string(),
        checksum: checksum(&payload),
    };
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, &payload).map_err(|e| Error::io(path, e))?;
    let lp = sidecar(path, "labels");
    fs::write(&lp, &labels).map_err(|e| Error::io(&lp, e))?;
    let mp = sidecar(path, "json");
    fs::write(&mp, serde_json::to_string_pretty(&manifest)?).map_err(|e| Error::io(&mp, e))?;
    Ok(manifest)
}

/// Read and verify a feature file. `expected_dim` cross-checks the manifest
/// against the experiment configuration.
pub fn load_feature_file(path: &Path, split: Split, expected_dim: Option<usize>) -> Result<TaskDataset> {
    let mp = sidecar(path, "json");
    let text = fs::read_to_string(&mp).map_err(|e| Error::io(&mp, e))?;
    let manifest: FeatureFileManifest =
        serde_json::from_str(&text).map_err(|e| Error::ingest(&mp, format!("bad manifest: {e}")))?;
    if manifest.magic != FEATURE_MAGIC {
        return Err(Error::ingest(&mp, format!("bad magic {:?}", manifest.magic)));
    }
    if manifest.version != FEATURE_VERSION {
        return Err(Error::ingest(&mp, format!("unsupported version {}", manifest.version)));
    }
    if manifest.dtype != DTYPE_F32LE {
        return Err(Error::ingest(&mp, format!("unsupported dtype {:?}", manifest.dtype)));
    }
    if manifest.dim == 0 {
        return Err(Error::ingest(&mp, "dimension must be positive"));
    }
    if let Some(d) = expected_dim {
        if d != manifest.dim {
            return Err(Error::ingest(
                path,
                format!("dimension {} disagrees with the configured {d}", manifest.dim),
            ));
        }
    }

    let payload = fs::read(path).map_err(|e| Error::io(path, e))?;
    let expected_len = manifest.count * manifest.dim * 4;
    if payload.len() != expected_len {
        return Err(Error::ingest(
            path,
            format!("payload has {} bytes, manifest implies {expected_len}", payload.len()),
        ));
    }
    if checksum(&payload) != manifest.checksum {
        return Err(Error::ingest(path, "checksum mismatch"));
    }
    let lp = sidecar(path, "labels");
    let label_bytes = fs::read(&lp).map_err(|e| Error::io(&lp, e))?;
    if label_bytes.len() != manifest.count * 4 {
        return Err(Error::ingest(
            &lp,
            format!("{} label bytes for {} samples", label_bytes.len(), manifest.count),
        ));
    }
    let features = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let labels = label_bytes
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    TaskDataset::new(manifest.task_id, split, manifest.dim, manifest.classes, features, labels)
        .map_err(|e| Error::ingest(path, e.to_string()))
}

/// File name of task `t`'s mapper features; classifier features, when they
/// differ, use the `.clf.f32` suffix.
pub fn task_file(dir: &Path, t: usize, split: Split, classifier: bool) -> PathBuf {
    let suffix = if classifier { "clf.f32" } else { "f32" };
    dir.join(format!("task{t:02}_{}.{suffix}", split.as_str()))
}

/// Load every `taskNN_{train,test}.f32` in `dir`, in task order.
pub fn load_stream_from_dir(
    dir: &Path,
    head: HeadLayout,
    expected_dim: Option<usize>,
    n_tasks: Option<usize>,
) -> Result<TaskStream> {
    let first = task_file(dir, 0, Split::Train, false);
    if !first.exists() {
        return Err(Error::config(format!(
            "no feature files found at {}; run the feature extractor (tools/extract_features.py) \
             to produce taskNN_train.f32/taskNN_test.f32 files first",
            dir.display()
        )));
    }
    let mut tasks = Vec::new();
    let mut t = 0;
    while n_tasks.map_or(true, |n| t < n) {
        let train_path = task_file(dir, t, Split::Train, false);
        if !train_path.exists() {
            if let Some(n) = n_tasks {
                return Err(Error::config(format!(
                    "expected {n} tasks but {} is missing; rerun the feature extractor",
                    train_path.display()
                )));
            }
            break;
        }
        let train = load_feature_file(&train_path, Split::Train, expected_dim)?;
        let test = load_feature_file(&task_file(dir, t, Split::Test, false), Split::Test, expected_dim)?;
        let clf_train_path = task_file(dir, t, Split::Train, true);
        let clf = if clf_train_path.exists() {
            Some((
                load_feature_file(&clf_train_path, Split::Train, None)?,
                load_feature_file(&task_file(dir, t, Split::Test, true), Split::Test, None)?,
            ))
        } else {
            None
        };
        tasks.push((train, test, clf));
        t += 1;
    }
    TaskStream::from_datasets_with_classifier_views(head, tasks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dataset(dim: usize, n: usize) -> TaskDataset {
        let features = (0..dim * n).map(|i| (i as f32).sin() * 3.5).collect();
        let labels = (0..n as u32).map(|i| i % 5).collect();
        TaskDataset::new(4, Split::Train, dim, 5, features, labels).unwrap()
    }

    #[test]
    fn writes_and_reads_512_dim_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("task00_train.f32");
        let d = dataset(512, 6);
        let m = write_feature_file(&p, &d).unwrap();
        assert_eq!(m.count, 6);
        let back = load_feature_file(&p, Split::Train, Some(512)).unwrap();
        assert_eq!(back.dim(), 512);
        assert_eq!(back, d);
    }

    #[test]
    fn empty_payload_is_valid() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("empty.f32");
        let d = TaskDataset::new(0, Split::Test, 8, 3, vec![], vec![]).unwrap();
        write_feature_file(&p, &d).unwrap();
        assert!(load_feature_file(&p, Split::Test, Some(8)).unwrap().is_empty());
    }

    #[test]
    fn truncation_checksum_and_dimension_errors() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.f32");
        write_feature_file(&p, &dataset(4, 3)).unwrap();
        assert!(matches!(
            load_feature_file(&p, Split::Train, Some(5)),
            Err(Error::Ingestion { .. })
        ));

        let mut bytes = fs::read(&p).unwrap();
        bytes.pop();
        fs::write(&p, &bytes).unwrap();
        assert!(matches!(load_feature_file(&p, Split::Train, None), Err(Error::Ingestion { .. })));

        write_feature_file(&p, &dataset(4, 3)).unwrap();
        let mut bytes = fs::read(&p).unwrap();
        bytes[0] ^= 0xff;
        fs::write(&p, &bytes).unwrap();
        let err = load_feature_file(&p, Split::Train, None).unwrap_err();
        assert!(err.to_string().contains("checksum"));
    }

    #[test]
    fn manifest_fields_are_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.f32");
        write_feature_file(&p, &dataset(2, 1)).unwrap();
        let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(p.with_extension("json")).unwrap()).unwrap();
        let mut keys: Vec<_> = v.as_object().unwrap().keys().cloned().collect();
        keys.sort();
        assert_eq!(keys, ["checksum", "classes", "count", "dim", "dtype", "magic", "task_id", "version"]);
    }

    #[test]
    fn missing_directory_names_the_extractor() {
        let err = load_stream_from_dir(Path::new("/nonexistent"), HeadLayout::shared(5), None, None).unwrap_err();
        assert!(err.to_string().contains("extract_features"));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn round_trip_is_bit_identical(values in prop::collection::vec(-1e30f32..1e30, 0..40)) {
            let dim = 4;
            let n = values.len() / dim;
            let features = values[..n * dim].to_vec();
            let d = TaskDataset::new(1, Split::Test, dim, 2, features, vec![1; n]).unwrap();
            let dir = tempfile::tempdir().unwrap();
            let p = dir.path().join("rt.f32");
            write_feature_file(&p, &d).unwrap();
            let back = load_feature_file(&p, Split::Test, Some(dim)).unwrap();
            let a: Vec<u32> = d.features().iter().map(|v| v.to_bits()).collect();
            let b: Vec<u32> = back.features().iter().map(|v| v.to_bits()).collect();
            prop_assert_eq!(a, b);
        }
    }
}
