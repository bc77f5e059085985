use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{AnnotationTrack, EmbeddingSequence};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

pub const EMBEDDING_MAGIC: &[u8; 4] = b"RACE";
pub const EMBEDDING_VERSION: u32 = 1;
const EMBEDDING_HEADER_LEN: usize = 4 + 4 + 8 + 8;

pub const ANNOTATION_SCHEMA_EXAMPLE: &str = r#"{"total_frames": 20, "intervals": [[0, 9], [10, 19]]}"#;

/// Writes `bytes` to a sibling temp file, then renames it over `path`.
pub fn write_atomic(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::InvalidValue(format!("not a file path: {}", path.display())))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(file_name);
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(Error::io(path, e));
    }
    Ok(())
}

pub fn encode_embeddings<T: Scalar>(seq: &EmbeddingSequence<T>) -> Vec<u8> {
    let mut out = Vec::with_capacity(EMBEDDING_HEADER_LEN + seq.len() * seq.dim() * 4);
    out.extend_from_slice(EMBEDDING_MAGIC);
    out.extend_from_slice(&EMBEDDING_VERSION.to_le_bytes());
    out.extend_from_slice(&(seq.len() as u64).to_le_bytes());
    out.extend_from_slice(&(seq.dim() as u64).to_le_bytes());
    for v in seq.frames().as_slice() {
        out.extend_from_slice(&v.to_f32_lossy().to_le_bytes());
    }
    out
}

pub fn decode_embeddings<T: Scalar>(bytes: &[u8]) -> Result<EmbeddingSequence<T>> {
    let err = |offset: usize, message: String| Error::Parse {
        offset: offset as u64,
        message,
    };
    if bytes.len() < EMBEDDING_HEADER_LEN {
        return Err(err(
            bytes.len(),
            format!("truncated header: {} of {EMBEDDING_HEADER_LEN} bytes", bytes.len()),
        ));
    }
    if &bytes[0..4] != EMBEDDING_MAGIC {
        return Err(err(0, format!("bad magic {:?}, expected \"RACE\"", &bytes[0..4])));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != EMBEDDING_VERSION {
        return Err(err(4, format!("unsupported version {version}")));
    }
    let frames = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
    let dim = u64::from_le_bytes(bytes[16..24].try_into().unwrap());
    if frames == 0 {
        return Err(err(8, "frame count must be >= 1".into()));
    }
    if dim == 0 {
        return Err(err(16, "dimension must be >= 1".into()));
    }
    let expected = frames
        .checked_mul(dim)
        .and_then(|n| n.checked_mul(4))
        .and_then(|n| usize::try_from(n).ok())
        .ok_or_else(|| err(8, format!("payload size overflows for {frames}x{dim}")))?;
    let payload = &bytes[EMBEDDING_HEADER_LEN..];
    if payload.len() < expected {
        return Err(err(
            bytes.len(),
            format!("truncated payload: {} of {expected} bytes", payload.len()),
        ));
    }
    if payload.len() > expected {
        return Err(err(
            EMBEDDING_HEADER_LEN + expected,
            format!("{} trailing bytes", payload.len() - expected),
        ));
    }
    let mut values = Vec::with_capacity(expected / 4);
    for (i, chunk) in payload.chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes(chunk.try_into().unwrap());
        if !v.is_finite() {
            return Err(err(EMBEDDING_HEADER_LEN + i * 4, format!("non-finite value {v}")));
        }
        values.push(T::from_f32(v).unwrap_or_else(T::nan));
    }
    let m = Matrix::from_vec(frames as usize, dim as usize, values).expect("length checked");
    EmbeddingSequence::new(m)
}

/// Writes the binary embedding format. Values are stored as `f32`.
pub fn write_embeddings<T: Scalar>(seq: &EmbeddingSequence<T>, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path, &encode_embeddings(seq))
}

pub fn read_embeddings<T: Scalar>(path: impl AsRef<Path>) -> Result<EmbeddingSequence<T>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_embeddings(&bytes)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AnnotationFile {
    total_frames: usize,
    intervals: Vec<[usize; 2]>,
}

pub fn annotations_to_json(track: &AnnotationTrack) -> String {
    let file = AnnotationFile {
        total_frames: track.total_frames(),
        intervals: track.intervals().iter().map(|&(s, e)| [s, e]).collect(),
    };
    serde_json::to_string(&file).expect("plain struct serializes")
}

pub fn annotations_from_json(text: &str) -> Result<AnnotationTrack> {
    let file: AnnotationFile = serde_json::from_str(text)?;
    AnnotationTrack::new(
        file.total_frames,
        file.intervals.into_iter().map(|[s, e]| (s, e)).collect(),
    )
}

pub fn write_annotations(track: &AnnotationTrack, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path, annotations_to_json(track).as_bytes())
}

pub fn read_annotations(path: impl AsRef<Path>) -> Result<AnnotationTrack> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    annotations_from_json(&text)
}
