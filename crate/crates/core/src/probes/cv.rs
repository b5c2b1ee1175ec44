// SPDX-License-Identifier: MIT OR Apache-2.0

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::mdl::{mdl_codelength_features, MdlOptions};
use super::{control_labels, train_probe, ProbeConfig, ProbeError, ProbeStats, DEFAULT_FOLDS, DEFAULT_SEEDS};
use crate::actstore::{ActivationRun, Role};
use crate::seed::stable_hash;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CvOptions {
    pub folds: usize,
    /// Each seed defines its own fold partition.
    pub seeds: Vec<u64>,
}

impl Default for CvOptions {
    fn default() -> Self {
        Self { folds: DEFAULT_FOLDS, seeds: DEFAULT_SEEDS.to_vec() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldAccuracy {
    pub seed: u64,
    pub fold: usize,
    pub accuracy: f64,
    pub n_test: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedFold {
    pub seed: u64,
    pub fold: usize,
    pub reason: String,
}

/// Everything measured for one (layer, role).
#[derive(Debug, Default, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeJob {
    pub probe: ProbeConfig,
    pub cv: CvOptions,
    /// Seed of the control task; `None` skips selectivity.
    pub control_seed: Option<u64>,
    pub mdl: Option<MdlOptions>,
}

/// Fold index per instance. Source pairs are ranked by a seeded hash and
/// dealt round-robin, so siblings share a fold and fold sizes differ by at
/// most one pair.
pub fn fold_assignment<S: AsRef<str>>(pair_ids: &[S], folds: usize, seed: u64) -> Vec<usize> {
    let mut ranked: Vec<(u64, &str)> =
        pair_ids.iter().map(|p| (stable_hash(seed, &["fold", p.as_ref()]), p.as_ref())).collect();
    ranked.sort_unstable();
    ranked.dedup();
    let fold_of: BTreeMap<&str, usize> = ranked.iter().enumerate().map(|(rank, (_, p))| (*p, rank % folds)).collect();
    pair_ids.iter().map(|p| fold_of[p.as_ref()]).collect()
}

/// The `N × d` feature matrix of one (role, layer), widened to f64.
pub fn layer_features(run: &ActivationRun, role: Role, layer: usize) -> Result<DMatrix<f64>, ProbeError> {
    let tensor = run.tensor(role).ok_or(ProbeError::MissingRole(role))?;
    if layer >= tensor.num_layers {
        return Err(ProbeError::LayerOutOfRange { layer, num_layers: tensor.num_layers });
    }
    let block = tensor.layer(layer);
    Ok(DMatrix::from_fn(tensor.num_instances, tensor.dim, |i, j| block[i * tensor.dim + j] as f64))
}

fn select_rows(x: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), x.ncols(), |i, j| x[(rows[i], j)])
}

/// Raw result of a cross-validation sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct CvOutcome {
    pub accuracies: Vec<FoldAccuracy>,
    pub skipped: Vec<SkippedFold>,
    pub predictions: Vec<Option<bool>>,
    pub max_dropped: usize,
}

impl CvOutcome {
    pub fn mean(&self) -> f64 {
        self.accuracies.iter().map(|a| a.accuracy).sum::<f64>() / self.accuracies.len() as f64
    }

    pub fn stddev(&self) -> f64 {
        let n = self.accuracies.len();
        if n < 2 {
            return 0.0;
        }
        let mean = self.mean();
        let ss: f64 = self.accuracies.iter().map(|a| (a.accuracy - mean).powi(2)).sum();
        (ss / (n - 1) as f64).sqrt()
    }

    pub fn pooled(&self) -> f64 {
        let correct: f64 = self.accuracies.iter().map(|a| a.accuracy * a.n_test as f64).sum();
        let total: usize = self.accuracies.iter().map(|a| a.n_test).sum();
        correct / total as f64
    }
}

/// Folds × seeds cross-validation on a feature matrix.
pub fn cross_validate_features<S: AsRef<str>>(
    features: &DMatrix<f64>,
    labels: &[bool],
    pair_ids: &[S],
    cfg: &ProbeConfig,
    opts: &CvOptions,
) -> Result<CvOutcome, ProbeError> {
    cfg.validate()?;
    if opts.folds < 2 {
        return Err(ProbeError::NoHeldOut(opts.folds));
    }
    if opts.seeds.is_empty() {
        return Err(ProbeError::NoSeeds);
    }
    let n = labels.len();
    if features.nrows() != n || pair_ids.len() != n {
        return Err(ProbeError::LengthMismatch { rows: features.nrows(), labels: n });
    }

    let mut accuracies = Vec::new();
    let mut skipped = Vec::new();
    let mut votes = vec![(0usize, 0usize); n];
    let mut max_dropped = 0;
    for &seed in &opts.seeds {
        let assignment = fold_assignment(pair_ids, opts.folds, seed);
        for fold in 0..opts.folds {
            let (test, train): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| assignment[i] == fold);
            let classes = |rows: &[usize]| {
                let pos = rows.iter().filter(|&&i| labels[i]).count();
                (pos > 0) as usize + (pos < rows.len()) as usize
            };
            let reason = if test.is_empty() {
                Some("empty held-out fold".to_string())
            } else if classes(&test) < 2 {
                Some("held-out fold has a single class".to_string())
            } else if classes(&train) < 2 {
                Some("training folds have a single class".to_string())
            } else {
                None
            };
            if let Some(reason) = reason {
                skipped.push(SkippedFold { seed, fold, reason });
                continue;
            }

            let train_y: Vec<bool> = train.iter().map(|&i| labels[i]).collect();
            let model = train_probe(&select_rows(features, &train), &train_y, cfg, seed)?;
            max_dropped = max_dropped.max(model.standardizer.dropped.len());
            let predictions = model.predict(&select_rows(features, &test));
            let mut correct = 0;
            for (&i, &p) in test.iter().zip(&predictions) {
                correct += (p == labels[i]) as usize;
                if p {
                    votes[i].0 += 1;
                } else {
                    votes[i].1 += 1;
                }
            }
            accuracies.push(FoldAccuracy {
                seed,
                fold,
                accuracy: correct as f64 / test.len() as f64,
                n_test: test.len(),
            });
        }
    }
    if accuracies.is_empty() {
        return Err(ProbeError::NoUsableFolds);
    }
    // ties go to the positive class, as for the probability threshold
    let predictions =
        votes.into_iter().map(|(pos, neg)| if pos + neg == 0 { None } else { Some(pos >= neg) }).collect();
    Ok(CvOutcome { accuracies, skipped, predictions, max_dropped })
}

fn pair_ids(run: &ActivationRun) -> Vec<&str> {
    run.manifest.instances.iter().map(|i| i.source_pair_id.as_str()).collect()
}

/// Cross-validated probe accuracy for one (role, layer) of a run.
pub fn cross_validate(
    run: &ActivationRun,
    role: Role,
    layer: usize,
    cfg: &ProbeConfig,
    opts: &CvOptions,
) -> Result<ProbeStats, ProbeError> {
    let x = layer_features(run, role, layer)?;
    let out = cross_validate_features(&x, &run.manifest.labels(), &pair_ids(run), cfg, opts)?;
    Ok(ProbeStats {
        layer,
        role,
        probe: cfg.kind,
        mean: out.mean(),
        stddev: out.stddev(),
        pooled_accuracy: out.pooled(),
        accuracies: out.accuracies,
        control_mean: None,
        mdl_codelength_bits: None,
        mdl_compression: None,
        skipped_folds: out.skipped,
        max_dropped_dims: out.max_dropped,
        predictions: out.predictions,
    })
}

/// Cross-validation plus the optional control-task and MDL measurements.
pub fn probe_layer(run: &ActivationRun, role: Role, layer: usize, job: &ProbeJob) -> Result<ProbeStats, ProbeError> {
    let mut stats = cross_validate(run, role, layer, &job.probe, &job.cv)?;
    if job.control_seed.is_some() || job.mdl.is_some() {
        let x = layer_features(run, role, layer)?;
        if let Some(seed) = job.control_seed {
            let ids: Vec<&str> = run.manifest.instance_ids().collect();
            let control = control_labels(&ids, seed);
            let out = cross_validate_features(&x, &control, &pair_ids(run), &job.probe, &job.cv)?;
            stats.control_mean = Some(out.mean());
        }
        if let Some(mdl) = &job.mdl {
            let schedule = mdl.schedule_for(x.nrows())?;
            let res = mdl_codelength_features(&x, &run.manifest.labels(), &job.probe, &schedule, mdl.seed)?;
            stats.mdl_codelength_bits = Some(res.codelength_bits);
            stats.mdl_compression = Some(res.compression);
        }
    }
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::actstore::testing::small_run;

    #[test]
    fn folds_partition_and_keep_siblings_together() {
        let pairs: Vec<String> = (0..40).map(|i| format!("p{}", i / 2)).collect();
        for seed in 0..3 {
            let a = fold_assignment(&pairs, 4, seed);
            assert!(a.iter().all(|&f| f < 4));
            for i in (0..40).step_by(2) {
                assert_eq!(a[i], a[i + 1]);
            }
            let mut sizes = [0; 4];
            for f in &a {
                sizes[*f] += 1;
            }
            assert_eq!(sizes.iter().sum::<usize>(), 40);
            assert!(sizes.iter().all(|&s| s == 10), "{sizes:?}");
        }
        assert_ne!(fold_assignment(&pairs, 4, 0), fold_assignment(&pairs, 4, 1));
    }

    #[test]
    fn default_protocol_gives_twenty_entries_and_is_deterministic() {
        let run = small_run(3, 40, 4);
        let a = cross_validate(&run, Role::Sample, 1, &ProbeConfig::linear(), &CvOptions::default()).unwrap();
        assert_eq!(a.accuracies.len(), 20);
        assert!(a.accuracies.iter().all(|f| (0.0..=1.0).contains(&f.accuracy)));
        assert!(a.predictions.iter().all(Option::is_some));
        let b = cross_validate(&run, Role::Sample, 1, &ProbeConfig::linear(), &CvOptions::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn single_fold_is_an_error() {
        let run = small_run(3, 8, 2);
        let opts = CvOptions { folds: 1, seeds: vec![0] };
        assert_eq!(cross_validate(&run, Role::Sample, 0, &ProbeConfig::linear(), &opts), Err(ProbeError::NoHeldOut(1)));
    }

    #[test]
    fn missing_role_and_layer_are_errors() {
        let mut run = small_run(3, 8, 2);
        run.tensors.remove(&Role::Output);
        run.manifest.roles = vec![Role::Sample];
        assert_eq!(
            cross_validate(&run, Role::Output, 0, &ProbeConfig::linear(), &CvOptions::default()),
            Err(ProbeError::MissingRole(Role::Output))
        );
        assert!(matches!(
            cross_validate(&run, Role::Sample, 3, &ProbeConfig::linear(), &CvOptions::default()),
            Err(ProbeError::LayerOutOfRange { .. })
        ));
    }

    #[test]
    fn single_class_folds_are_skipped_and_recorded() {
        let mut run = small_run(2, 12, 2);
        // unpaired instances so a fold can hold a single class
        for (i, inst) in run.manifest.instances.iter_mut().enumerate() {
            inst.source_pair_id = format!("solo-{i}");
            inst.label = crate::corpus::Label::from_positive(i < 2);
        }
        let opts = CvOptions { folds: 4, seeds: vec![0, 1] };
        let stats = cross_validate(&run, Role::Sample, 0, &ProbeConfig::linear(), &opts).unwrap();
        assert!(!stats.skipped_folds.is_empty());
        assert_eq!(stats.accuracies.len() + stats.skipped_folds.len(), 8);
    }
}
