// SPDX-License-Identifier: MIT OR Apache-2.0

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use sha2::{Digest, Sha256};

use super::{ActStoreError, ActivationRun, RoleTensor, RunManifest, FORMAT_VERSION};

pub const MAGIC: [u8; 4] = *b"ACTR";
/// Magic (4) + version (4) + manifest length (8).
pub const HEADER_LEN: u64 = 16;
pub const CHECKSUM_LEN: u64 = 32;
pub const MAX_MANIFEST_BYTES: u64 = 64 << 20;

/// Writer that hashes everything passing through it.
struct HashingWriter<W> {
    inner: W,
    hasher: Sha256,
}

impl<W: Write> Write for HashingWriter<W> {
    fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
        let n = self.inner.write(buf)?;
        self.hasher.update(&buf[..n]);
        Ok(n)
    }

    fn flush(&mut self) -> std::io::Result<()> {
        self.inner.flush()
    }
}

/// Serializes a validated run to `out`.
pub fn write_to<W: Write>(run: &ActivationRun, out: W) -> Result<(), ActStoreError> {
    run.validate()?;
    let manifest = serde_json::to_vec(&run.manifest)?;
    let mut w = HashingWriter { inner: out, hasher: Sha256::new() };
    w.write_all(&MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&(manifest.len() as u64).to_le_bytes())?;
    w.write_all(&manifest)?;
    let mut buf = Vec::with_capacity(64 * 1024);
    for role in &run.manifest.roles {
        for chunk in run.tensors[role].data.chunks(16 * 1024) {
            buf.clear();
            for v in chunk {
                buf.extend_from_slice(&v.to_le_bytes());
            }
            w.write_all(&buf)?;
        }
    }
    let digest = w.hasher.finalize();
    let mut out = w.inner;
    out.write_all(&digest)?;
    out.flush()?;
    Ok(())
}

pub fn to_bytes(run: &ActivationRun) -> Result<Vec<u8>, ActStoreError> {
    let mut bytes = Vec::new();
    write_to(run, &mut bytes)?;
    Ok(bytes)
}

/// Writes `run` to `path` atomically (temporary sibling file, then rename).
pub fn write_run(run: &ActivationRun, path: &Path) -> Result<(), ActStoreError> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".partial");
    let tmp = std::path::PathBuf::from(tmp);
    let result = (|| {
        let file = File::create(&tmp)?;
        write_to(run, BufWriter::new(file))?;
        fs::rename(&tmp, path)?;
        Ok(())
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result
}

fn read_exact_or_truncated<R: Read>(r: &mut R, buf: &mut [u8], section: &'static str) -> Result<(), ActStoreError> {
    let mut filled = 0;
    while filled < buf.len() {
        match r.read(&mut buf[filled..])? {
            0 => return Err(ActStoreError::Truncated { section, expected: buf.len() as u64, actual: filled as u64 }),
            n => filled += n,
        }
    }
    Ok(())
}

/// Reads a run from `input`, whose total length is `total_len` bytes.
///
/// Sizes declared in the header are checked against `total_len` before any
/// buffer is allocated, so a malformed header cannot trigger a large allocation.
pub fn read_from<R: Read>(mut input: R, total_len: u64) -> Result<ActivationRun, ActStoreError> {
    let mut hasher = Sha256::new();
    let mut header = [0u8; HEADER_LEN as usize];
    read_exact_or_truncated(&mut input, &mut header, "header")?;
    hasher.update(header);

    let magic: [u8; 4] = header[0..4].try_into().unwrap();
    if magic != MAGIC {
        return Err(ActStoreError::BadMagic(magic));
    }
    let version = u32::from_le_bytes(header[4..8].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(ActStoreError::UnsupportedVersion { found: version, supported: FORMAT_VERSION });
    }
    let manifest_len = u64::from_le_bytes(header[8..16].try_into().unwrap());
    if manifest_len > MAX_MANIFEST_BYTES {
        return Err(ActStoreError::ManifestTooLarge(manifest_len));
    }
    let available = total_len.saturating_sub(HEADER_LEN);
    if manifest_len > available {
        return Err(ActStoreError::Truncated { section: "manifest", expected: manifest_len, actual: available });
    }
    let mut manifest_bytes = vec![0u8; manifest_len as usize];
    read_exact_or_truncated(&mut input, &mut manifest_bytes, "manifest")?;
    hasher.update(&manifest_bytes);
    let manifest: RunManifest = serde_json::from_slice(&manifest_bytes)?;
    manifest.validate()?;

    let per_role = (manifest.num_layers as u64)
        .checked_mul(manifest.num_instances() as u64)
        .and_then(|v| v.checked_mul(manifest.hidden_dim as u64))
        .ok_or(ActStoreError::SizeOverflow)?;
    let per_role_bytes = per_role.checked_mul(4).ok_or(ActStoreError::SizeOverflow)?;
    let tensor_bytes = per_role_bytes.checked_mul(manifest.roles.len() as u64).ok_or(ActStoreError::SizeOverflow)?;
    let expected_total = HEADER_LEN
        .checked_add(manifest_len)
        .and_then(|v| v.checked_add(tensor_bytes))
        .and_then(|v| v.checked_add(CHECKSUM_LEN))
        .ok_or(ActStoreError::SizeOverflow)?;
    if total_len < expected_total {
        let have = total_len - HEADER_LEN - manifest_len;
        return Err(ActStoreError::Truncated {
            section: "tensor blocks and checksum",
            expected: tensor_bytes + CHECKSUM_LEN,
            actual: have,
        });
    }
    if total_len > expected_total {
        return Err(ActStoreError::TrailingBytes(total_len - expected_total));
    }

    let mut tensors = BTreeMap::new();
    let mut chunk = vec![0u8; 64 * 1024];
    for role in &manifest.roles {
        let mut data = Vec::with_capacity(per_role as usize);
        let mut remaining = per_role_bytes;
        while remaining > 0 {
            let take = remaining.min(chunk.len() as u64) as usize;
            read_exact_or_truncated(&mut input, &mut chunk[..take], "tensor block")?;
            hasher.update(&chunk[..take]);
            data.extend(chunk[..take].chunks_exact(4).map(|b| f32::from_le_bytes(b.try_into().unwrap())));
            remaining -= take as u64;
        }
        tensors.insert(
            *role,
            RoleTensor {
                num_layers: manifest.num_layers,
                num_instances: manifest.num_instances(),
                dim: manifest.hidden_dim,
                data,
            },
        );
    }

    let mut stored = [0u8; CHECKSUM_LEN as usize];
    read_exact_or_truncated(&mut input, &mut stored, "checksum")?;
    let computed = hasher.finalize();
    if stored[..] != computed[..] {
        let hex = |b: &[u8]| b.iter().map(|x| format!("{x:02x}")).collect::<String>();
        return Err(ActStoreError::ChecksumMismatch { stored: hex(&stored), computed: hex(&computed) });
    }

    let run = ActivationRun { manifest, tensors };
    run.validate()?;
    Ok(run)
}

/// Reads and fully validates the run stored at `path`.
pub fn read_run(path: &Path) -> Result<ActivationRun, ActStoreError> {
    let file = File::open(path)?;
    let len = file.metadata()?.len();
    read_from(BufReader::new(file), len)
}
