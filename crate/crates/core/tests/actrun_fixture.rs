// SPDX-License-Identifier: MIT OR Apache-2.0

//! Reads files produced by the standalone Python writer in `fixtures/`.

use std::path::{Path, PathBuf};
use std::process::Command;

use instprobe::actstore::{read_from, read_run, to_bytes, ActivationRun, Role};
use instprobe::analysis::behavior_em;
use instprobe::Label;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn sample_value(l: usize, n: usize, k: usize) -> f32 {
    ((l * 7 + n * 3 + k) % 251) as f32 / 8.0 - 10.0
}

fn output_value(l: usize, n: usize, k: usize) -> f32 {
    ((l * 5 + n * 11 + k * 2) % 257) as f32 / 4.0 - 30.0
}

fn check_pattern(run: &ActivationRun, layers: usize, instances: usize, dim: usize) {
    let m = &run.manifest;
    assert_eq!((m.num_layers, m.num_instances(), m.hidden_dim), (layers, instances, dim));
    assert_eq!(m.roles, vec![Role::Sample, Role::Output]);
    for (role, f) in [(Role::Sample, sample_value as fn(usize, usize, usize) -> f32), (Role::Output, output_value)] {
        let t = run.tensor(role).unwrap();
        for l in 0..layers {
            for n in 0..instances {
                let row = t.row(l, n);
                for (k, &v) in row.iter().enumerate() {
                    assert_eq!(v.to_bits(), f(l, n, k).to_bits(), "{role} l={l} n={n} k={k}");
                }
            }
        }
    }
    for (n, inst) in m.instances.iter().enumerate() {
        assert_eq!(inst.label, if n % 2 == 0 { Label::Acceptable } else { Label::Unacceptable });
        assert_eq!(
            inst.behavior.em_correct,
            behavior_em(&inst.behavior.generated_text, &inst.behavior.expected_answer)
        );
        assert_eq!(inst.behavior.em_correct, n % 3 != 0);
    }
}

#[test]
fn committed_fixture_reads_exactly() {
    let path = fixtures().join("tiny.actrun");
    let run = read_run(&path).unwrap();
    check_pattern(&run, 3, 4, 2);
    let bytes = to_bytes(&run).unwrap();
    let back = read_from(&bytes[..], bytes.len() as u64).unwrap();
    assert_eq!(back, run);
}

#[test]
fn python_writer_full_size() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("full.actrun");
    let status = match Command::new("python3").arg(fixtures().join("write_actrun.py")).arg(&out).status() {
        Ok(s) => s,
        Err(e) => {
            eprintln!("skipping: python3 unavailable ({e})");
            return;
        }
    };
    assert!(status.success());
    let run = read_run(&out).unwrap();
    check_pattern(&run, 25, 200, 64);
    assert_eq!(run.manifest.notes.get("writer").map(String::as_str), Some("write_actrun.py"));
}

#[test]
fn flipped_checksum_byte_rejected() {
    let mut bytes = std::fs::read(fixtures().join("tiny.actrun")).unwrap();
    let last = bytes.len() - 1;
    bytes[last] ^= 1;
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.actrun");
    std::fs::write(&path, bytes).unwrap();
    assert!(read_run(&path).is_err());
}
