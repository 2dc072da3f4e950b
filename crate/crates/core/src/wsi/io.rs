//! Model files. JSON and a little-endian binary layout carry the same
//! content: header (d, k, s, seed, iterations, reinit threshold), the
//! vocabulary the codes refer to, atoms, codes, residual norms and the
//! per-sweep error trace. Both round-trip bit-exactly.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{Atoms, SparseCode, WsiConfig, WsiModel};

const MAGIC: &[u8; 4] = b"AWSI";
const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelFormat {
    Json,
    Binary,
}

impl ModelFormat {
    /// `.bin` selects binary, anything else JSON.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("bin") => ModelFormat::Binary,
            _ => ModelFormat::Json,
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct ModelFile {
    d: usize,
    k: usize,
    s: usize,
    seed: u64,
    iterations: usize,
    reinit_threshold: usize,
    words: Vec<String>,
    atoms: Vec<Vec<f64>>,
    codes: Vec<Vec<(usize, f64)>>,
    residual_norms: Vec<f64>,
    mse_history: Vec<f64>,
}

pub fn write_model(path: impl AsRef<Path>, model: &WsiModel, words: &[String], format: ModelFormat) -> Result<()> {
    let path = path.as_ref();
    if words.len() != model.codes.len() {
        return Err(Error::Invalid(format!(
            "{} words given for a model with {} codes",
            words.len(),
            model.codes.len()
        )));
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    match format {
        ModelFormat::Json => {
            let f = ModelFile {
                d: model.dim(),
                k: model.num_atoms(),
                s: model.config.s,
                seed: model.config.seed,
                iterations: model.config.iterations,
                reinit_threshold: model.config.reinit_threshold,
                words: words.to_vec(),
                atoms: (0..model.num_atoms()).map(|i| model.atoms.row(i).to_vec()).collect(),
                codes: model.codes.clone(),
                residual_norms: model.residual_norms.clone(),
                mse_history: model.mse_history.clone(),
            };
            serde_json::to_writer(&mut out, &f)?;
            out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
        }
        ModelFormat::Binary => write_binary(&mut out, model, words).map_err(|e| Error::io(path, e))?,
    }
    out.flush().map_err(|e| Error::io(path, e))
}

fn write_binary<W: Write>(out: &mut W, model: &WsiModel, words: &[String]) -> std::io::Result<()> {
    out.write_all(MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    for v in [
        model.dim() as u64,
        model.num_atoms() as u64,
        model.config.s as u64,
        model.config.seed,
        model.config.iterations as u64,
        model.config.reinit_threshold as u64,
        words.len() as u64,
    ] {
        out.write_all(&v.to_le_bytes())?;
    }
    for w in words {
        out.write_all(&(w.len() as u32).to_le_bytes())?;
        out.write_all(w.as_bytes())?;
    }
    for x in model.atoms.as_slice() {
        out.write_all(&x.to_le_bytes())?;
    }
    for code in &model.codes {
        out.write_all(&(code.len() as u32).to_le_bytes())?;
        for &(i, c) in code {
            out.write_all(&(i as u32).to_le_bytes())?;
            out.write_all(&c.to_le_bytes())?;
        }
    }
    for x in &model.residual_norms {
        out.write_all(&x.to_le_bytes())?;
    }
    out.write_all(&(model.mse_history.len() as u64).to_le_bytes())?;
    for x in &model.mse_history {
        out.write_all(&x.to_le_bytes())?;
    }
    Ok(())
}

struct Bytes<R> {
    inner: R,
}

impl<R: Read> Bytes<R> {
    fn take<const N: usize>(&mut self) -> std::io::Result<[u8; N]> {
        let mut b = [0u8; N];
        self.inner.read_exact(&mut b)?;
        Ok(b)
    }
    fn u32(&mut self) -> std::io::Result<u32> {
        self.take::<4>().map(u32::from_le_bytes)
    }
    fn u64(&mut self) -> std::io::Result<u64> {
        self.take::<8>().map(u64::from_le_bytes)
    }
    fn f64(&mut self) -> std::io::Result<f64> {
        self.take::<8>().map(f64::from_le_bytes)
    }
}

fn read_binary<R: Read>(r: R) -> std::io::Result<std::result::Result<ModelFile, String>> {
    let mut b = Bytes { inner: r };
    if &b.take::<4>()? != MAGIC {
        return Ok(Err("not a binary WSI model (bad magic)".into()));
    }
    let version = b.u32()?;
    if version != VERSION {
        return Ok(Err(format!("unsupported model version {version}")));
    }
    let d = b.u64()? as usize;
    let k = b.u64()? as usize;
    let s = b.u64()? as usize;
    let seed = b.u64()?;
    let iterations = b.u64()? as usize;
    let reinit_threshold = b.u64()? as usize;
    let n = b.u64()? as usize;
    let mut words = Vec::with_capacity(n.min(1 << 20));
    for _ in 0..n {
        let len = b.u32()? as usize;
        let mut buf = vec![0u8; len];
        b.inner.read_exact(&mut buf)?;
        match String::from_utf8(buf) {
            Ok(w) => words.push(w),
            Err(_) => return Ok(Err("word is not valid UTF-8".into())),
        }
    }
    let mut atoms = Vec::with_capacity(k);
    for _ in 0..k {
        atoms.push((0..d).map(|_| b.f64()).collect::<std::io::Result<Vec<_>>>()?);
    }
    let mut codes = Vec::with_capacity(n);
    for _ in 0..n {
        let m = b.u32()? as usize;
        let mut code = Vec::with_capacity(m);
        for _ in 0..m {
            code.push((b.u32()? as usize, b.f64()?));
        }
        codes.push(code);
    }
    let residual_norms = (0..n).map(|_| b.f64()).collect::<std::io::Result<Vec<_>>>()?;
    let h = b.u64()? as usize;
    let mse_history = (0..h).map(|_| b.f64()).collect::<std::io::Result<Vec<_>>>()?;
    Ok(Ok(ModelFile {
        d,
        k,
        s,
        seed,
        iterations,
        reinit_threshold,
        words,
        atoms,
        codes,
        residual_norms,
        mse_history,
    }))
}

/// Reads a model and the vocabulary its codes are indexed by.
pub fn read_model(path: impl AsRef<Path>) -> Result<(WsiModel, Vec<String>)> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(file);
    let mut head = [0u8; 4];
    let mut raw = Vec::new();
    reader.read_to_end(&mut raw).map_err(|e| Error::io(path, e))?;
    if raw.len() >= 4 {
        head.copy_from_slice(&raw[..4]);
    }
    let f: ModelFile = if &head == MAGIC {
        read_binary(raw.as_slice())
            .map_err(|e| Error::io(path, e))?
            .map_err(|m| Error::parse(path, 0, m))?
    } else {
        serde_json::from_slice(&raw).map_err(|e| Error::parse(path, 1, e.to_string()))?
    };
    into_model(f).map_err(|m| Error::parse(path, 0, m))
}

fn into_model(f: ModelFile) -> std::result::Result<(WsiModel, Vec<String>), String> {
    if f.atoms.len() != f.k || f.atoms.iter().any(|a| a.len() != f.d) {
        return Err("atom matrix does not match header".into());
    }
    if f.codes.len() != f.words.len() || f.residual_norms.len() != f.words.len() {
        return Err("codes or residual norms do not match the word list".into());
    }
    for code in &f.codes {
        if code.len() > f.s {
            return Err(format!("code with {} entries exceeds sparsity {}", code.len(), f.s));
        }
        if let Some(&(i, _)) = code.iter().find(|&&(i, _)| i >= f.k) {
            return Err(format!("code refers to atom {i} but the model has {}", f.k));
        }
    }
    let atoms = Atoms::new(f.d, f.atoms.concat()).map_err(|e| e.to_string())?;
    let model = WsiModel {
        config: WsiConfig {
            k: f.k,
            s: f.s,
            iterations: f.iterations,
            seed: f.seed,
            reinit_threshold: f.reinit_threshold,
        },
        atoms,
        codes: f.codes.into_iter().map(|c| c as SparseCode).collect(),
        residual_norms: f.residual_norms,
        mse_history: f.mse_history,
    };
    Ok((model, f.words))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> (WsiModel, Vec<String>) {
        let atoms = Atoms::from_rows(&[vec![1.0, 0.0], vec![0.6, 0.8]]).unwrap();
        let model = WsiModel {
            config: WsiConfig { k: 2, s: 2, iterations: 3, seed: 42, reinit_threshold: 1 },
            atoms,
            codes: vec![vec![(0, 0.1 + 0.2)], vec![(0, -1e-300), (1, std::f64::consts::PI)]],
            residual_norms: vec![1.0 / 3.0, 0.0],
            mse_history: vec![0.5, 0.25],
        };
        (model, vec!["a".into(), "é".into()])
    }

    #[test]
    fn both_formats_round_trip_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let (model, words) = tiny();
        for (name, fmt) in [("m.json", ModelFormat::Json), ("m.bin", ModelFormat::Binary)] {
            let p = dir.path().join(name);
            assert_eq!(ModelFormat::from_path(&p), fmt);
            write_model(&p, &model, &words, fmt).unwrap();
            let (back, w) = read_model(&p).unwrap();
            assert_eq!(back, model);
            assert_eq!(w, words);
        }
    }

    #[test]
    fn oversized_code_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let (mut model, words) = tiny();
        model.config.s = 1;
        let p = dir.path().join("m.json");
        write_model(&p, &model, &words, ModelFormat::Json).unwrap();
        assert!(read_model(&p).is_err());
    }
}
