//! Output directory bookkeeping: CSV and binary field files plus a JSON
//! manifest that lists everything written, itself included.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use qwave_core::C64;
use serde::Serialize;

pub const MANIFEST: &str = "manifest.json";
/// Magic bytes opening every binary field dump.
pub const BINARY_MAGIC: &[u8; 8] = b"QWAVEF01";

#[derive(Debug, Serialize)]
pub struct Timing {
    pub label: String,
    pub seconds: f64,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    command: &'a str,
    scenario_sha256: &'a str,
    version: &'a str,
    started_unix: f64,
    finished_unix: f64,
    wall_seconds: f64,
    threads: usize,
    timings: &'a [Timing],
    stats: &'a serde_json::Value,
    files: Vec<String>,
}

pub struct OutputDir {
    root: PathBuf,
    files: Vec<String>,
    started: SystemTime,
    clock: Instant,
    pub timings: Vec<Timing>,
}

fn unix(t: SystemTime) -> f64 {
    t.duration_since(UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64())
}

impl OutputDir {
    pub fn create(root: &Path) -> std::io::Result<Self> {
        fs::create_dir_all(root)?;
        Ok(Self {
            root: root.to_path_buf(),
            files: Vec::new(),
            started: SystemTime::now(),
            clock: Instant::now(),
            timings: Vec::new(),
        })
    }

    pub fn elapsed(&self) -> f64 {
        self.clock.elapsed().as_secs_f64()
    }

    pub fn time(&mut self, label: impl Into<String>, seconds: f64) {
        self.timings.push(Timing { label: label.into(), seconds });
    }

    fn register(&mut self, name: &str) -> PathBuf {
        if !self.files.iter().any(|f| f == name) {
            self.files.push(name.to_string());
        }
        self.root.join(name)
    }

    /// Writes a header line and one line per row.
    pub fn csv<I, R>(&mut self, name: &str, header: &[&str], rows: I) -> std::io::Result<()>
    where
        I: IntoIterator<Item = R>,
        R: AsRef<[String]>,
    {
        let mut w = BufWriter::new(File::create(self.register(name))?);
        writeln!(w, "{}", header.join(","))?;
        for row in rows {
            writeln!(w, "{}", row.as_ref().join(","))?;
        }
        w.flush()
    }

    /// Little-endian dump: magic, u32 n1, u32 n2, then (re, im) pairs in
    /// row-major order j1·n2 + j2.
    pub fn binary(&mut self, name: &str, n1: usize, n2: usize, values: &[C64]) -> std::io::Result<()> {
        assert_eq!(values.len(), n1 * n2, "binary dump shape mismatch");
        let mut w = BufWriter::new(File::create(self.register(name))?);
        w.write_all(BINARY_MAGIC)?;
        for n in [n1, n2] {
            let n = u32::try_from(n).map_err(|_| std::io::Error::other("dimension exceeds u32"))?;
            w.write_all(&n.to_le_bytes())?;
        }
        for v in values {
            w.write_all(&v.re.to_le_bytes())?;
            w.write_all(&v.im.to_le_bytes())?;
        }
        w.flush()
    }

    /// Writes the manifest and returns the sorted file list it records.
    pub fn finish(mut self, command: &str, hash: &str, stats: serde_json::Value) -> std::io::Result<Vec<String>> {
        let path = self.register(MANIFEST);
        let mut files = self.files.clone();
        files.sort();
        let manifest = Manifest {
            command,
            scenario_sha256: hash,
            version: env!("CARGO_PKG_VERSION"),
            started_unix: unix(self.started),
            finished_unix: unix(SystemTime::now()),
            wall_seconds: self.elapsed(),
            threads: rayon::current_num_threads(),
            timings: &self.timings,
            stats: &stats,
            files: files.clone(),
        };
        let text = serde_json::to_string_pretty(&manifest).map_err(std::io::Error::other)?;
        fs::write(path, text + "\n")?;
        Ok(files)
    }
}

/// Shortest round-trip formatting, so output is reproducible bit for bit.
pub fn num(x: f64) -> String {
    format!("{x:e}")
}

/// Reads a binary dump back.
#[cfg(test)]
pub fn read_binary(bytes: &[u8]) -> Option<(usize, usize, Vec<C64>)> {
    if bytes.len() < 16 || &bytes[..8] != BINARY_MAGIC {
        return None;
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap()) as usize;
    let (n1, n2) = (word(8), word(12));
    let body = &bytes[16..];
    if body.len() != n1 * n2 * 16 {
        return None;
    }
    let f = |c: &[u8]| f64::from_le_bytes(c.try_into().unwrap());
    let values = body.chunks_exact(16).map(|c| C64::new(f(&c[..8]), f(&c[8..]))).collect();
    Some((n1, n2, values))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_lists_every_file_including_itself() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = OutputDir::create(dir.path()).unwrap();
        out.csv("b.csv", &["x"], [vec![num(1.0)]]).unwrap();
        out.binary("a.bin", 1, 2, &[C64::new(1.0, 2.0), C64::new(3.0, -4.0)]).unwrap();
        let files = out.finish("test", "00", serde_json::Value::Null).unwrap();
        let mut on_disk: Vec<String> =
            fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
        on_disk.sort();
        assert_eq!(files, on_disk);
        assert!(files.contains(&MANIFEST.to_string()));
    }

    #[test]
    fn binary_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = OutputDir::create(dir.path()).unwrap();
        let v: Vec<C64> = (0..6).map(|k| C64::new(k as f64, -0.5 * k as f64)).collect();
        out.binary("f.bin", 2, 3, &v).unwrap();
        let bytes = fs::read(dir.path().join("f.bin")).unwrap();
        assert_eq!(bytes.len(), 16 + 6 * 16);
        assert_eq!(read_binary(&bytes), Some((2, 3, v)));
        assert_eq!(read_binary(&bytes[..20]), None);
    }

    #[test]
    fn numbers_round_trip() {
        for x in [0.1, -2.5e-17, 1.0 / 3.0, 0.0] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
    }
}
