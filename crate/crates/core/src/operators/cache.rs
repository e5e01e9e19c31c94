//! On-disk cache for assembled operator matrices.
//!
//! Entries are plain text: a header line echoing the full cache key
//! (so collisions and stale files are detected by comparison, not
//! trusted to the hash), a size line, then one `i j value` triple per
//! stored entry with 17 significant digits. Symmetric matrices store
//! the upper triangle only. Any mismatch or parse problem simply
//! reports a miss; the cache is an accelerator, never an authority.

use nalgebra::DMatrix;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::PathBuf;

use crate::basis::BasisParams;
use crate::sparse_index::CrossIndexSet;

/// Directory for cached matrices: HCSOLVE_CACHE_DIR if set, otherwise
/// ./hcsolve-cache under the current working directory.
pub fn cache_dir() -> PathBuf {
    match std::env::var_os("HCSOLVE_CACHE_DIR") {
        Some(dir) if !dir.is_empty() => PathBuf::from(dir),
        _ => PathBuf::from("hcsolve-cache"),
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325_u64;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Canonical key for an operator over an index set: term name, the
/// defining numbers of the set and of every per-dimension basis, and a
/// digest of the index list itself.
pub fn matrix_key(term: &str, set: &CrossIndexSet, params: &[BasisParams]) -> String {
    use std::fmt::Write as _;
    let mut key = String::new();
    let _ = write!(
        key,
        "{term} d={} N={} gamma={} len={}",
        set.d(),
        set.order(),
        set.gamma(),
        set.len()
    );
    for p in params {
        let _ = write!(
            key,
            " [{:?} {:.16e} {:.16e} {} {:.16e} {:.16e}]",
            p.family, p.alpha1, p.alpha2, p.r, p.beta, p.x0
        );
    }
    let mut digest = 0xcbf2_9ce4_8422_2325_u64;
    for idx in set.iter() {
        for &v in idx {
            for b in (v as u64).to_le_bytes() {
                digest ^= b as u64;
                digest = digest.wrapping_mul(0x0000_0100_0000_01b3);
            }
        }
    }
    let _ = write!(key, " idx={digest:016x}");
    key
}

fn file_for(key: &str) -> PathBuf {
    cache_dir().join(format!("{:016x}.txt", fnv1a(key.as_bytes())))
}

/// Load a cached matrix, verifying the echoed key and dimensions.
/// Returns None on any mismatch or parse problem.
pub fn load(key: &str, dim: usize) -> Option<DMatrix<f64>> {
    let path = file_for(key);
    let file = fs::File::open(path).ok()?;
    let mut lines = BufReader::new(file).lines();
    let header = lines.next()?.ok()?;
    if header.strip_prefix("# ")? != key {
        return None;
    }
    let size_line = lines.next()?.ok()?;
    let mut parts = size_line.split_whitespace();
    if parts.next()? != "size" {
        return None;
    }
    let n: usize = parts.next()?.parse().ok()?;
    let symmetric = match parts.next()? {
        "symmetric" => true,
        "general" => false,
        _ => return None,
    };
    if n != dim {
        return None;
    }
    let mut m = DMatrix::zeros(n, n);
    for line in lines {
        let line = line.ok()?;
        if line.is_empty() {
            continue;
        }
        let mut it = line.split_whitespace();
        let i: usize = it.next()?.parse().ok()?;
        let j: usize = it.next()?.parse().ok()?;
        let v: f64 = it.next()?.parse().ok()?;
        if i >= n || j >= n || it.next().is_some() {
            return None;
        }
        m[(i, j)] = v;
        if symmetric {
            m[(j, i)] = v;
        }
    }
    Some(m)
}

/// Store a matrix under the key. Failures are silent: a read-only or
/// full disk must never break an assembly that already succeeded.
pub fn store(key: &str, matrix: &DMatrix<f64>, symmetric: bool) {
    let dir = cache_dir();
    if fs::create_dir_all(&dir).is_err() {
        return;
    }
    let path = file_for(key);
    let tmp = path.with_extension("tmp");
    let Ok(file) = fs::File::create(&tmp) else {
        return;
    };
    let mut w = BufWriter::new(file);
    let n = matrix.nrows();
    let kind = if symmetric { "symmetric" } else { "general" };
    let ok = (|| -> std::io::Result<()> {
        writeln!(w, "# {key}")?;
        writeln!(w, "size {n} {kind}")?;
        for i in 0..n {
            let j0 = if symmetric { i } else { 0 };
            for j in j0..n {
                writeln!(w, "{i} {j} {:.16e}", matrix[(i, j)])?;
            }
        }
        w.flush()
    })()
    .is_ok();
    drop(w);
    if ok {
        let _ = fs::rename(&tmp, &path);
    } else {
        let _ = fs::remove_file(&tmp);
    }
}
