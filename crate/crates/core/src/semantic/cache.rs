//! Vector cache file: one compact JSON header line, then every vector as
//! little-endian `f32`, classes first, in header order.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::SemanticError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheHeader {
    pub format: u32,
    pub model: String,
    pub ontology_hash: String,
    pub dim: usize,
    pub classes: Vec<String>,
    pub links: Vec<String>,
}

pub fn cache_path(dir: &Path, ontology_hash: &str, model: &str) -> PathBuf {
    let model: String =
        model.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' { c } else { '_' }).collect();
    let short = &ontology_hash[..ontology_hash.len().min(16)];
    dir.join(format!("{short}-{model}.vec"))
}

fn io_err(e: impl std::fmt::Display) -> SemanticError {
    SemanticError::Cache(e.to_string())
}

pub fn write_cache(path: &Path, header: &CacheHeader, vectors: &[&[f32]]) -> Result<(), SemanticError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(io_err)?;
    }
    let tmp = path.with_extension("vec.tmp");
    let mut file = std::io::BufWriter::new(fs::File::create(&tmp).map_err(io_err)?);
    serde_json::to_writer(&mut file, header).map_err(io_err)?;
    file.write_all(b"\n").map_err(io_err)?;
    for v in vectors {
        for x in *v {
            file.write_all(&x.to_le_bytes()).map_err(io_err)?;
        }
    }
    file.flush().map_err(io_err)?;
    drop(file);
    fs::rename(&tmp, path).map_err(io_err)
}

pub fn read_cache(path: &Path) -> Result<(CacheHeader, Vec<Vec<f32>>), SemanticError> {
    let mut reader = BufReader::new(fs::File::open(path).map_err(io_err)?);
    let mut line = String::new();
    reader.read_line(&mut line).map_err(io_err)?;
    let header: CacheHeader = serde_json::from_str(line.trim_end()).map_err(io_err)?;
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes).map_err(io_err)?;
    let count = header.classes.len() + header.links.len();
    if bytes.len() != count * header.dim * 4 {
        return Err(SemanticError::Cache(format!(
            "{}: expected {} payload bytes, found {}",
            path.display(),
            count * header.dim * 4,
            bytes.len()
        )));
    }
    let floats: Vec<f32> = bytes.chunks_exact(4).map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]])).collect();
    let vectors = if header.dim == 0 {
        vec![Vec::new(); count]
    } else {
        floats.chunks(header.dim).map(<[f32]>::to_vec).collect()
    };
    Ok((header, vectors))
}
