// SPDX-License-Identifier: MIT OR Apache-2.0

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{check_len, AnalysisError, Prediction};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairAgreement<K> {
    pub a: K,
    pub b: K,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariationAgreement<K> {
    /// One entry per unordered pair of keys, `a < b`, in key order.
    pub pairwise: Vec<PairAgreement<K>>,
    /// Fraction of instances on which every key has the same value.
    pub all_agree: f64,
    pub num_instances: usize,
}

/// Agreement of per-instance values across keys (typically prompting
/// variations). Inputs are keyed by instance id so storage order is irrelevant.
pub fn variation_agreement<K, T>(
    values: &BTreeMap<K, BTreeMap<String, T>>,
) -> Result<VariationAgreement<K>, AnalysisError>
where
    K: Ord + Clone,
    T: PartialEq,
{
    let mut keys = values.keys();
    let first = keys.next().ok_or(AnalysisError::Empty)?;
    let reference = &values[first];
    for k in keys {
        let other = &values[k];
        if other.len() != reference.len() || other.keys().zip(reference.keys()).any(|(a, b)| a != b) {
            let missing = reference
                .keys()
                .find(|id| !other.contains_key(*id))
                .or_else(|| other.keys().find(|id| !reference.contains_key(*id)));
            return Err(AnalysisError::InstanceMismatch(format!(
                "{} vs {} instances; first differing id {:?}",
                reference.len(),
                other.len(),
                missing
            )));
        }
    }
    let n = reference.len();
    let columns: Vec<(&K, Vec<&T>)> = values.iter().map(|(k, m)| (k, m.values().collect())).collect();
    let rate = |count: usize| if n == 0 { 1.0 } else { count as f64 / n as f64 };

    let mut pairwise = Vec::new();
    for (i, (ka, va)) in columns.iter().enumerate() {
        for (kb, vb) in &columns[i + 1..] {
            let same = va.iter().zip(vb).filter(|(x, y)| x == y).count();
            pairwise.push(PairAgreement { a: (*ka).clone(), b: (*kb).clone(), rate: rate(same) });
        }
    }
    let all = (0..n).filter(|&i| columns.iter().all(|(_, v)| v[i] == columns[0].1[i])).count();
    Ok(VariationAgreement { pairwise, all_agree: rate(all), num_instances: n })
}

/// Per-instance probe correctness; a missing prediction is incorrect.
pub fn correctness(predictions: &[Prediction], labels: &[bool]) -> Result<Vec<bool>, AnalysisError> {
    check_len("labels", predictions.len(), labels.len())?;
    Ok(predictions.iter().zip(labels).map(|(p, &l)| *p == Some(l)).collect())
}

/// Symmetric `L × L` matrix of prediction agreement between layers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementMatrix {
    pub layers: Vec<usize>,
    /// Row-major, `layers.len()²` entries.
    pub values: Vec<f64>,
}

impl AgreementMatrix {
    pub fn size(&self) -> usize {
        self.layers.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.size() + j]
    }
}

/// Entry `(i, j)` is the fraction of instances whose prediction at layer `i`
/// equals the prediction at layer `j`. With no instances every entry is 1.
pub fn cross_layer_agreement<T: PartialEq>(
    layers: &[usize],
    predictions: &[Vec<T>],
) -> Result<AgreementMatrix, AnalysisError> {
    check_len("predictions per layer", layers.len(), predictions.len())?;
    let n = predictions.first().map_or(0, Vec::len);
    for p in predictions {
        check_len("instances per layer", n, p.len())?;
    }
    let l = layers.len();
    let mut values = vec![1.0; l * l];
    for i in 0..l {
        for j in i + 1..l {
            let same = predictions[i].iter().zip(&predictions[j]).filter(|(a, b)| a == b).count();
            let v = if n == 0 { 1.0 } else { same as f64 / n as f64 };
            values[i * l + j] = v;
            values[j * l + i] = v;
        }
    }
    Ok(AgreementMatrix { layers: layers.to_vec(), values })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn keyed(v: &[bool]) -> BTreeMap<String, bool> {
        v.iter().enumerate().map(|(i, &b)| (format!("i{i:03}"), b)).collect()
    }

    #[test]
    fn identical_and_complementary() {
        let a = [true, false, true, true];
        let not_a: Vec<bool> = a.iter().map(|v| !v).collect();
        let same = BTreeMap::from([("x", keyed(&a)), ("y", keyed(&a)), ("z", keyed(&a))]);
        let r = variation_agreement(&same).unwrap();
        assert!(r.pairwise.iter().all(|p| p.rate == 1.0));
        assert_eq!(r.all_agree, 1.0);
        assert_eq!(r.pairwise.len(), 3);
        let comp = BTreeMap::from([("x", keyed(&a)), ("y", keyed(&not_a))]);
        let r = variation_agreement(&comp).unwrap();
        assert_eq!(r.pairwise[0].rate, 0.0);
        assert_eq!(r.all_agree, 0.0);
    }

    #[test]
    fn mismatched_instance_sets() {
        let mut b = keyed(&[true, false]);
        b.insert("extra".into(), true);
        let m = BTreeMap::from([(1, keyed(&[true, false])), (2, b)]);
        assert!(matches!(variation_agreement(&m), Err(AnalysisError::InstanceMismatch(_))));
        let empty: BTreeMap<u8, BTreeMap<String, bool>> = BTreeMap::new();
        assert_eq!(variation_agreement(&empty), Err(AnalysisError::Empty));
    }

    #[test]
    fn matrix_shape_and_copies() {
        let p = vec![vec![true, false, true], vec![true, false, true], vec![false, false, false]];
        let m = cross_layer_agreement(&[0, 1, 2], &p).unwrap();
        assert_eq!(m.get(0, 1), 1.0);
        assert_eq!(m.get(2, 0), 1.0 / 3.0);
        assert_eq!(m.get(2, 2), 1.0);
        let empty: Vec<Vec<bool>> = vec![vec![], vec![]];
        assert!(cross_layer_agreement(&[0, 1], &empty).unwrap().values.iter().all(|&v| v == 1.0));
        assert!(cross_layer_agreement(&[0, 1], &[vec![true], vec![]]).is_err());
    }
}
