//! On-disk corpus representation.
//!
//! A saved corpus is a directory of three files tied together by the
//! manifest:
//!
//! - `embeddings.bin` — 24-byte header (8-byte magic `WPLUSV1\0`, then `N`,
//!   `L`, `D` as little-endian u32, then 4 reserved zero bytes) followed by
//!   the tensor as little-endian f32, sample-major with layers contiguous
//!   within a sample. Total size is exactly `24 + 4*N*L*D` bytes.
//! - `labels.csv` — columns `sample_id,gloss,style,geometry,illumination,color`.
//! - `manifest.json` — shape, seed, provenance, factor dictionaries, and the
//!   two file names above, relative to the manifest's directory.
//!
//! Round trips are bit-exact: f32 payloads are moved as raw bits, never
//! reparsed through decimal.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use ndarray::Array3;
use serde::{Deserialize, Serialize};

use super::{CorpusError, EmbeddingCorpus, FactorTable};

/// Magic bytes opening every embeddings file.
pub const CORPUS_MAGIC: [u8; 8] = *b"WPLUSV1\0";

const HEADER_LEN: u64 = 24;

#[derive(Serialize, Deserialize)]
struct Manifest {
    format: String,
    n: usize,
    layers: usize,
    dim: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    provenance: String,
    embeddings: String,
    labels: String,
    dictionaries: BTreeMap<String, Vec<String>>,
}

fn io_err(path: &Path, source: std::io::Error) -> CorpusError {
    CorpusError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Writes `corpus` under `dir` (created if missing) and returns the manifest
/// path. Validation runs first so no partially invalid corpus reaches disk.
pub fn save_corpus(
    corpus: &EmbeddingCorpus,
    dir: &Path,
    provenance: &str,
) -> Result<PathBuf, CorpusError> {
    let violations = corpus.validate();
    if !violations.is_empty() {
        return Err(CorpusError::Invalid {
            count: violations.len(),
            first: format!("{:?}", violations[0]),
        });
    }
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;

    let bin_path = dir.join("embeddings.bin");
    write_tensor(&bin_path, corpus.data())?;

    let labels_path = dir.join("labels.csv");
    write_labels(&labels_path, corpus)?;

    let manifest = Manifest {
        format: "wplus-embeddings-v1".to_string(),
        n: corpus.n(),
        layers: corpus.layers(),
        dim: corpus.dim(),
        seed: corpus.seed,
        provenance: provenance.to_string(),
        embeddings: "embeddings.bin".to_string(),
        labels: "labels.csv".to_string(),
        dictionaries: corpus.labels().dictionaries.clone(),
    };
    let manifest_path = dir.join("manifest.json");
    let file = File::create(&manifest_path).map_err(|e| io_err(&manifest_path, e))?;
    let mut writer = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut writer, &manifest)?;
    writer
        .write_all(b"\n")
        .and_then(|()| writer.flush())
        .map_err(|e| io_err(&manifest_path, e))?;
    Ok(manifest_path)
}

/// Loads a corpus from its manifest (or from a directory containing
/// `manifest.json`). All cross-file consistency checks (shape, file size,
/// label row count, dictionary coverage) run before the corpus is returned.
pub fn load_corpus(path: &Path) -> Result<EmbeddingCorpus, CorpusError> {
    let manifest_path = if path.is_dir() {
        path.join("manifest.json")
    } else {
        path.to_path_buf()
    };
    let base = manifest_path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_default();

    let file = File::open(&manifest_path).map_err(|e| io_err(&manifest_path, e))?;
    let manifest: Manifest = serde_json::from_reader(BufReader::new(file))?;

    let bin_path = base.join(&manifest.embeddings);
    let data = read_tensor(&bin_path)?;
    let (n, layers, dim) = data.dim();
    if n != manifest.n {
        return Err(CorpusError::ManifestMismatch("n"));
    }
    if layers != manifest.layers {
        return Err(CorpusError::ManifestMismatch("layers"));
    }
    if dim != manifest.dim {
        return Err(CorpusError::ManifestMismatch("dim"));
    }

    let labels_path = base.join(&manifest.labels);
    let labels = read_labels(&labels_path, n, manifest.dictionaries)?;
    EmbeddingCorpus::new(data, labels, manifest.seed)
}

fn write_tensor(path: &Path, data: &Array3<f32>) -> Result<(), CorpusError> {
    let (n, layers, dim) = data.dim();
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut writer = BufWriter::new(file);
    let mut header = Vec::with_capacity(HEADER_LEN as usize);
    header.extend_from_slice(&CORPUS_MAGIC);
    header.extend_from_slice(&(n as u32).to_le_bytes());
    header.extend_from_slice(&(layers as u32).to_le_bytes());
    header.extend_from_slice(&(dim as u32).to_le_bytes());
    header.extend_from_slice(&[0u8; 4]);
    writer.write_all(&header).map_err(|e| io_err(path, e))?;

    let slice = data.as_slice().expect("standard layout");
    let mut buf = Vec::with_capacity(4 * 4096);
    for chunk in slice.chunks(4096) {
        buf.clear();
        for v in chunk {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        writer.write_all(&buf).map_err(|e| io_err(path, e))?;
    }
    writer.flush().map_err(|e| io_err(path, e))
}

fn read_tensor(path: &Path) -> Result<Array3<f32>, CorpusError> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let actual = file.metadata().map_err(|e| io_err(path, e))?.len();
    let mut reader = BufReader::new(file);

    let mut header = [0u8; HEADER_LEN as usize];
    reader.read_exact(&mut header).map_err(|e| io_err(path, e))?;
    let found: [u8; 8] = header[..8].try_into().expect("sliced 8");
    if found != CORPUS_MAGIC {
        return Err(CorpusError::BadMagic {
            expected: CORPUS_MAGIC,
            found,
        });
    }
    let n = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
    let layers = u32::from_le_bytes(header[12..16].try_into().unwrap()) as usize;
    let dim = u32::from_le_bytes(header[16..20].try_into().unwrap()) as usize;

    let expected = HEADER_LEN + 4 * (n as u64) * (layers as u64) * (dim as u64);
    if actual != expected {
        return Err(CorpusError::SizeMismatch { expected, actual });
    }

    let count = n * layers * dim;
    let mut values = Vec::with_capacity(count);
    let mut buf = vec![0u8; 4 * 4096];
    let mut remaining = count;
    while remaining > 0 {
        let take = remaining.min(4096);
        let bytes = &mut buf[..4 * take];
        reader.read_exact(bytes).map_err(|e| io_err(path, e))?;
        for quad in bytes.chunks_exact(4) {
            values.push(f32::from_le_bytes(quad.try_into().unwrap()));
        }
        remaining -= take;
    }
    Ok(Array3::from_shape_vec((n, layers, dim), values).expect("sized above"))
}

fn write_labels(path: &Path, corpus: &EmbeddingCorpus) -> Result<(), CorpusError> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut writer = csv::Writer::from_writer(BufWriter::new(file));
    writer.write_record(["sample_id", "gloss", "style", "geometry", "illumination", "color"])?;
    let labels = corpus.labels();
    for i in 0..corpus.n() {
        writer.write_record([
            i.to_string(),
            labels.gloss[i].to_string(),
            labels.style[i].to_string(),
            labels.geometry[i].to_string(),
            labels.illumination[i].to_string(),
            labels.color[i].to_string(),
        ])?;
    }
    writer.flush().map_err(|e| io_err(path, e))
}

fn read_labels(
    path: &Path,
    n: usize,
    dictionaries: BTreeMap<String, Vec<String>>,
) -> Result<FactorTable, CorpusError> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut reader = csv::Reader::from_reader(BufReader::new(file));

    let mut table = FactorTable {
        gloss: Vec::with_capacity(n),
        style: Vec::with_capacity(n),
        geometry: Vec::with_capacity(n),
        illumination: Vec::with_capacity(n),
        color: Vec::with_capacity(n),
        dictionaries,
    };
    #[derive(Deserialize)]
    struct Row {
        #[allow(dead_code)]
        sample_id: u64,
        gloss: u32,
        style: u32,
        geometry: u32,
        illumination: u32,
        color: u32,
    }
    for record in reader.deserialize() {
        let row: Row = record?;
        table.gloss.push(row.gloss);
        table.style.push(row.style);
        table.geometry.push(row.geometry);
        table.illumination.push(row.illumination);
        table.color.push(row.color);
    }
    if table.gloss.len() != n {
        return Err(CorpusError::LabelRowMismatch {
            rows: table.gloss.len(),
            expected: n,
        });
    }
    Ok(table)
}
