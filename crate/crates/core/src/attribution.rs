//! Feature attributions derived from composition traces, plus the LRP-ε
//! baseline.

use std::fmt;
use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fcp::{explain, CompositionTrace};
use crate::linalg::Vector;
use crate::network::{argmax, Network};

pub const DEFAULT_LRP_EPSILON: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Fcp,
    Lrp,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Fcp => "fcp",
            Method::Lrp => "lrp",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Scope {
    Instance,
    Global,
}

impl fmt::Display for Scope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scope::Instance => "instance",
            Scope::Global => "global",
        })
    }
}

/// One score per input feature.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureAttribution {
    pub scores: Vec<f64>,
    pub method: Method,
    pub scope: Scope,
}

impl FeatureAttribution {
    pub fn ranking(&self) -> FeatureRanking {
        FeatureRanking::from_scores(&self.scores)
    }

    /// CSV with header `feature,name,score,method,scope`.
    pub fn write_csv<W: Write>(&self, out: W, names: &[String]) -> Result<()> {
        write_attributions_csv(out, std::slice::from_ref(self), names)
    }
}

/// Writes several attributions into one CSV table.
pub fn write_attributions_csv<W: Write>(
    out: W,
    attributions: &[FeatureAttribution],
    names: &[String],
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["feature", "name", "score", "method", "scope"])?;
    for a in attributions {
        if a.scores.len() != names.len() {
            return Err(Error::shape(
                "write_attributions_csv",
                format!("{} scores", a.scores.len()),
                format!("{} names", names.len()),
            ));
        }
        for (j, (score, name)) in a.scores.iter().zip(names).enumerate() {
            w.write_record([
                j.to_string(),
                name.clone(),
                score.to_string(),
                a.method.to_string(),
                a.scope.to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

/// Features ordered by descending score; ties keep the lower index first.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureRanking(Vec<(usize, f64)>);

impl FeatureRanking {
    pub fn from_scores(scores: &[f64]) -> Self {
        let mut entries: Vec<(usize, f64)> = scores.iter().copied().enumerate().collect();
        // Stable sort keeps index order among equal scores.
        entries.sort_by(|a, b| b.1.total_cmp(&a.1));
        Self(entries)
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.0
    }

    /// Feature indices, most important first.
    pub fn order(&self) -> Vec<usize> {
        self.0.iter().map(|&(j, _)| j).collect()
    }

    pub fn top(&self, k: usize) -> Vec<usize> {
        self.0.iter().take(k).map(|&(j, _)| j).collect()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Rank (0 = most important) of feature `j`.
    pub fn position(&self, j: usize) -> Option<usize> {
        self.0.iter().position(|&(f, _)| f == j)
    }
}

/// Absolute output-layer compositions of the predicted class's neuron.
pub fn instance_importance(trace: &CompositionTrace) -> Result<FeatureAttribution> {
    importance_for_neuron(trace, trace.predicted_class())
}

/// Absolute output-layer compositions of output neuron `neuron`.
pub fn importance_for_neuron(trace: &CompositionTrace, neuron: usize) -> Result<FeatureAttribution> {
    let output = trace.output();
    if neuron >= output.rows() {
        return Err(Error::InvalidArgument(format!(
            "output neuron {neuron} out of range for {} outputs",
            output.rows()
        )));
    }
    if trace.is_degenerate(trace.layers().len() - 1, neuron) {
        return Err(Error::Degenerate(format!(
            "output neuron {neuron} has an all-zero composition"
        )));
    }
    Ok(FeatureAttribution {
        scores: output.row(neuron).iter().map(|v| v.abs()).collect(),
        method: Method::Fcp,
        scope: Scope::Instance,
    })
}

/// Class whose output neuron holds the largest signed composition for
/// `feature`; ties go to the lowest class index.
pub fn composition_class_vote(trace: &CompositionTrace, feature: usize) -> Result<usize> {
    if feature >= trace.n_features() {
        return Err(Error::InvalidArgument(format!(
            "feature {feature} out of range for {} features",
            trace.n_features()
        )));
    }
    Ok(argmax(&trace.output().column(feature)))
}

/// Mean of per-instance absolute attributions over a dataset.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GlobalImportance {
    pub attribution: FeatureAttribution,
    pub ranking: FeatureRanking,
    /// Instances skipped because their decision row was degenerate.
    pub degenerate: usize,
}

/// Mean FCP importance over the rows of `instances`.
pub fn global_importance<'a, I>(net: &Network, instances: I) -> Result<GlobalImportance>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let rows: Vec<&[f64]> = instances.into_iter().collect();
    let per_instance: Vec<Option<Vec<f64>>> = rows
        .par_iter()
        .map(|row| {
            let trace = explain(net, &Vector::try_from(*row)?)?;
            match instance_importance(&trace) {
                Ok(a) => Ok(Some(a.scores)),
                Err(Error::Degenerate(_)) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_>>()?;
    aggregate(net.input_width(), per_instance, Method::Fcp)
}

/// Mean absolute LRP-ε relevance over the rows of `instances`.
pub fn global_lrp<'a, I>(net: &Network, instances: I, epsilon: f64) -> Result<GlobalImportance>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let rows: Vec<&[f64]> = instances.into_iter().collect();
    let per_instance: Vec<Option<Vec<f64>>> = rows
        .par_iter()
        .map(|row| {
            let r = lrp_epsilon(net, &Vector::try_from(*row)?, epsilon)?;
            Ok(Some(r.scores.iter().map(|v| v.abs()).collect()))
        })
        .collect::<Result<_>>()?;
    aggregate(net.input_width(), per_instance, Method::Lrp)
}

// Sums in instance order so results do not depend on thread scheduling.
fn aggregate(n: usize, per_instance: Vec<Option<Vec<f64>>>, method: Method) -> Result<GlobalImportance> {
    if per_instance.is_empty() {
        return Err(Error::Data("cannot aggregate attributions over no instances".into()));
    }
    let mut sums = vec![0.0; n];
    let mut used = 0usize;
    let mut degenerate = 0usize;
    for scores in per_instance {
        match scores {
            Some(s) => {
                used += 1;
                for (acc, v) in sums.iter_mut().zip(s) {
                    *acc += v;
                }
            }
            None => degenerate += 1,
        }
    }
    if used == 0 {
        return Err(Error::Degenerate(format!(
            "all {degenerate} instances have degenerate decision rows"
        )));
    }
    let scores: Vec<f64> = sums.into_iter().map(|s| s / used as f64).collect();
    let ranking = FeatureRanking::from_scores(&scores);
    Ok(GlobalImportance {
        attribution: FeatureAttribution {
            scores,
            method,
            scope: Scope::Global,
        },
        ranking,
        degenerate,
    })
}

/// LRP-ε relevance of each input feature for the predicted class.
///
/// Relevance starts at the predicted class's pre-softmax score and moves
/// backwards with `R_j = Σ_k a_j w_jk / (z_k + ε·sign(z_k)) · R_k`, where
/// `sign(0) = 1`.
pub fn lrp_epsilon(net: &Network, x: &Vector, epsilon: f64) -> Result<FeatureAttribution> {
    let trace = net.forward(x)?;
    lrp_from_neuron(net, &trace, trace.predicted_class(), epsilon)
}

pub fn lrp_from_neuron(
    net: &Network,
    trace: &crate::network::ActivationTrace,
    neuron: usize,
    epsilon: f64,
) -> Result<FeatureAttribution> {
    if !(epsilon.is_finite() && epsilon >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "epsilon must be finite and non-negative, got {epsilon}"
        )));
    }
    let logits = trace.logits();
    if neuron >= logits.len() {
        return Err(Error::InvalidArgument(format!(
            "output neuron {neuron} out of range"
        )));
    }
    let mut relevance = vec![0.0; logits.len()];
    relevance[neuron] = logits[neuron];
    for (l, layer) in net.layers().iter().enumerate().rev() {
        let a = trace.activations[l].as_slice();
        let z = trace.pre_activations[l].as_slice();
        let w = layer.weights();
        let scaled: Vec<f64> = z
            .iter()
            .zip(&relevance)
            .map(|(&zk, &rk)| {
                let sign = if zk >= 0.0 { 1.0 } else { -1.0 };
                rk / (zk + epsilon * sign)
            })
            .collect();
        relevance = a
            .iter()
            .enumerate()
            .map(|(j, &aj)| {
                aj * w
                    .row(j)
                    .iter()
                    .zip(&scaled)
                    .map(|(wjk, sk)| wjk * sk)
                    .sum::<f64>()
            })
            .collect();
    }
    if relevance.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("LRP relevances".into()));
    }
    Ok(FeatureAttribution {
        scores: relevance,
        method: Method::Lrp,
        scope: Scope::Instance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;
    use crate::network::tests::worked_example_network;
    use crate::network::{ActivationKind, Layer};

    fn v(x: &[f64]) -> Vector {
        Vector::new(x.to_vec()).unwrap()
    }

    fn worked_trace() -> CompositionTrace {
        explain(&worked_example_network(), &v(&[0.5, 0.8])).unwrap()
    }

    #[test]
    fn decision_neuron_importance() {
        let trace = worked_trace();
        assert_eq!(trace.predicted_class(), 0);
        let a = instance_importance(&trace).unwrap();
        assert!((a.scores[0] - 0.04).abs() < 0.01);
        assert!((a.scores[1] - 0.96).abs() < 0.01);
        assert!((a.scores.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert_eq!(a.method, Method::Fcp);
        assert_eq!(a.scope, Scope::Instance);

        let forced = importance_for_neuron(&trace, 1).unwrap();
        assert!((forced.scores[0] - 0.53).abs() < 0.01);
        assert!((forced.scores[1] - 0.47).abs() < 0.01);
        assert!(importance_for_neuron(&trace, 2).is_err());
    }

    #[test]
    fn single_feature_importance_is_one() {
        let net = Network::new(
            1,
            vec![Layer::new(
                Matrix::from_rows(&[[0.7, -1.2]]).unwrap(),
                v(&[0.1, 0.0]),
                ActivationKind::Softmax,
            )
            .unwrap()],
        )
        .unwrap();
        let a = instance_importance(&explain(&net, &v(&[0.3])).unwrap()).unwrap();
        assert_eq!(a.scores, vec![1.0]);
    }

    #[test]
    fn degenerate_decision_row_is_an_error() {
        let net = worked_example_network();
        let trace = explain(&net, &v(&[0.0, 0.0])).unwrap();
        assert!(matches!(instance_importance(&trace), Err(Error::Degenerate(_))));
    }

    #[test]
    fn class_votes() {
        let trace = worked_trace();
        assert_eq!(composition_class_vote(&trace, 0).unwrap(), 1);
        assert_eq!(composition_class_vote(&trace, 1).unwrap(), 0);
        assert!(composition_class_vote(&trace, 2).is_err());

        let zero = explain(&worked_example_network(), &v(&[0.0, 0.0])).unwrap();
        assert_eq!(composition_class_vote(&zero, 0).unwrap(), 0);
    }

    #[test]
    fn ranking_order_and_ties() {
        let r = FeatureRanking::from_scores(&[0.2, 0.5, 0.2, 0.1]);
        assert_eq!(r.order(), vec![1, 0, 2, 3]);
        assert_eq!(r.top(2), vec![1, 0]);
        assert_eq!(r.position(3), Some(3));
    }

    #[test]
    fn aggregate_means() {
        let g = aggregate(2, vec![Some(vec![0.2, 0.8]), Some(vec![0.4, 0.6]), None], Method::Fcp).unwrap();
        assert!((g.attribution.scores[0] - 0.3).abs() < 1e-15);
        assert!((g.attribution.scores[1] - 0.7).abs() < 1e-15);
        assert_eq!(g.ranking.order(), vec![1, 0]);
        assert_eq!(g.degenerate, 1);
        assert_eq!(g.attribution.scope, Scope::Global);
        assert!(aggregate(2, vec![], Method::Fcp).is_err());
        assert!(matches!(aggregate(2, vec![None], Method::Fcp), Err(Error::Degenerate(_))));
    }

    #[test]
    fn global_importance_of_one_instance() {
        let net = worked_example_network();
        let x = [0.5, 0.8];
        let g = global_importance(&net, [&x[..]]).unwrap();
        let single = instance_importance(&worked_trace()).unwrap();
        assert_eq!(g.attribution.scores, single.scores);
        assert_eq!(g.ranking.order(), vec![1, 0]);
    }

    #[test]
    fn global_importance_ignores_instance_order() {
        let net = worked_example_network();
        let rows: Vec<[f64; 2]> = vec![[0.5, 0.8], [0.1, 0.9], [0.7, 0.2], [0.0, 0.0]];
        let a = global_importance(&net, rows.iter().map(|r| &r[..])).unwrap();
        let b = global_importance(&net, rows.iter().rev().map(|r| &r[..])).unwrap();
        for (x, y) in a.attribution.scores.iter().zip(&b.attribution.scores) {
            assert!((x - y).abs() < 1e-15);
        }
        assert_eq!(a.degenerate, 1);
    }

    #[test]
    fn lrp_identity_network() {
        let net = Network::new(
            2,
            vec![Layer::new(Matrix::identity(2), v(&[0.0, 0.0]), ActivationKind::Identity).unwrap()],
        )
        .unwrap();
        let r = lrp_epsilon(&net, &v(&[2.0, 3.0]), DEFAULT_LRP_EPSILON).unwrap();
        assert!(r.scores[0].abs() < 1e-12);
        assert!((r.scores[1] - 3.0).abs() < 1e-6);
        assert_eq!(r.method, Method::Lrp);
    }

    #[test]
    fn lrp_conserves_without_biases() {
        let net = Network::new(
            2,
            vec![
                Layer::new(
                    Matrix::from_rows(&[[0.5, -0.3, 0.8], [0.2, 0.9, -0.4]]).unwrap(),
                    v(&[0.0, 0.0, 0.0]),
                    ActivationKind::ReLU,
                )
                .unwrap(),
                Layer::new(
                    Matrix::from_rows(&[[1.0, -0.5], [0.3, 0.6], [-0.2, 0.4]]).unwrap(),
                    v(&[0.0, 0.0]),
                    ActivationKind::Softmax,
                )
                .unwrap(),
            ],
        )
        .unwrap();
        let x = v(&[0.6, 0.4]);
        let trace = net.forward(&x).unwrap();
        let seed = trace.logits()[trace.predicted_class()];
        let r = lrp_epsilon(&net, &x, DEFAULT_LRP_EPSILON).unwrap();
        assert!((r.scores.iter().sum::<f64>() - seed).abs() < 1e-6);
    }

    #[test]
    fn lrp_zero_denominator_is_finite() {
        let net = Network::new(
            1,
            vec![Layer::new(Matrix::from_rows(&[[1.0]]).unwrap(), v(&[0.0]), ActivationKind::Identity).unwrap()],
        )
        .unwrap();
        let r = lrp_epsilon(&net, &v(&[0.0]), DEFAULT_LRP_EPSILON).unwrap();
        assert_eq!(r.scores, vec![0.0]);
        assert!(lrp_epsilon(&net, &v(&[1.0]), -1.0).is_err());
    }

    #[test]
    fn csv_export() {
        let a = FeatureAttribution {
            scores: vec![0.25, 0.75],
            method: Method::Fcp,
            scope: Scope::Global,
        };
        let mut buf = Vec::new();
        a.write_csv(&mut buf, &["age".into(), "gender".into()]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "feature,name,score,method,scope\n0,age,0.25,fcp,global\n1,gender,0.75,fcp,global\n"
        );
        assert!(a.write_csv(Vec::new(), &["x".into()]).is_err());
    }
}
