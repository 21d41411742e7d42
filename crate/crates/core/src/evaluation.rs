//! Metrics, the protected-feature composition analysis and feature
//! flipping.

use std::collections::BTreeSet;
use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::attribution::{composition_class_vote, global_importance, FeatureRanking};
use crate::dataprep::{protected_groups, Dataset};
use crate::error::{Error, Result};
use crate::fcp::explain;
use crate::linalg::Matrix;
use crate::network::{ActivationKind, Network};
use crate::trainer::{case_study_network, predict_all, stratified_split, train, Hyperparams};

/// Sample Pearson correlation.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::shape(
            "pearson",
            format!("{} values", xs.len()),
            format!("{} values", ys.len()),
        ));
    }
    if xs.len() < 2 {
        return Err(Error::UndefinedCorrelation(format!(
            "need at least 2 pairs, got {}",
            xs.len()
        )));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation("constant sequence".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Cohen's kappa between two label sequences. When chance agreement is
/// total the result is 1 for identical sequences and 0 otherwise.
pub fn cohen_kappa(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::shape(
            "cohen_kappa",
            format!("{} labels", a.len()),
            format!("{} labels", b.len()),
        ));
    }
    let n = a.len() as f64;
    let classes: BTreeSet<usize> = a.iter().chain(b).copied().collect();
    let p_o = a.iter().zip(b).filter(|(x, y)| x == y).count() as f64 / n;
    let p_e: f64 = classes
        .iter()
        .map(|c| {
            let pa = a.iter().filter(|&x| x == c).count() as f64 / n;
            let pb = b.iter().filter(|&x| x == c).count() as f64 / n;
            pa * pb
        })
        .sum();
    if p_e >= 1.0 {
        return Ok(if a == b { 1.0 } else { 0.0 });
    }
    Ok((p_o - p_e) / (1.0 - p_e))
}

/// Age correlation among instances predicted as one class.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassCorrelation {
    pub class: usize,
    pub name: String,
    pub instances: usize,
    /// `None` when fewer than two instances or a constant sequence.
    pub r: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupCounts {
    pub female: usize,
    pub young: usize,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityPoint {
    pub instance: usize,
    pub age_value: f64,
    pub age_composition: f64,
    pub predicted_class: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BiasReport {
    pub activation: String,
    pub age_correlations: Vec<ClassCorrelation>,
    /// Agreement between predictions and the gender composition vote.
    pub gender_kappa: f64,
    pub groups: GroupCounts,
    pub degenerate_instances: usize,
    #[serde(skip)]
    pub points: Vec<DensityPoint>,
}

impl BiasReport {
    pub fn correlation(&self, class: usize) -> Option<f64> {
        self.age_correlations.iter().find(|c| c.class == class).and_then(|c| c.r)
    }
}

/// Analyses how the protected features `age` and `gender` (feature indices)
/// shape the decisions of `net` on `data`.
pub fn bias_report(net: &Network, data: &Dataset, age: usize, gender: usize) -> Result<BiasReport> {
    let n = data.n_features();
    if age >= n || gender >= n {
        return Err(Error::InvalidArgument(format!(
            "protected feature index out of range for {n} features"
        )));
    }
    let traces = (0..data.len())
        .into_par_iter()
        .map(|i| explain(net, &data.instance(i)))
        .collect::<Result<Vec<_>>>()?;

    let mut points = Vec::new();
    let mut predictions = Vec::new();
    let mut votes = Vec::new();
    let mut degenerate = 0;
    for (i, trace) in traces.iter().enumerate() {
        let predicted = trace.predicted_class();
        if trace.is_degenerate(trace.layers().len() - 1, predicted) {
            degenerate += 1;
            continue;
        }
        points.push(DensityPoint {
            instance: i,
            age_value: data.raw_value(i, age),
            age_composition: trace.output().get(predicted, age),
            predicted_class: predicted,
        });
        predictions.push(predicted);
        votes.push(composition_class_vote(trace, gender)?);
    }
    if predictions.is_empty() {
        return Err(Error::Degenerate("every instance has a degenerate decision row".into()));
    }

    let age_correlations = data
        .class_names()
        .iter()
        .enumerate()
        .map(|(class, name)| {
            let group: Vec<&DensityPoint> = points.iter().filter(|p| p.predicted_class == class).collect();
            let xs: Vec<f64> = group.iter().map(|p| p.age_value).collect();
            let ys: Vec<f64> = group.iter().map(|p| p.age_composition).collect();
            let r = match pearson(&xs, &ys) {
                Ok(r) => Some(r),
                Err(Error::UndefinedCorrelation(_)) => None,
                Err(e) => return Err(e),
            };
            Ok(ClassCorrelation {
                class,
                name: name.clone(),
                instances: group.len(),
                r,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let names = data.feature_names();
    let groups = protected_groups(data, &names[age], &names[gender])?;
    Ok(BiasReport {
        activation: net.layers()[0].activation().name().to_string(),
        age_correlations,
        gender_kappa: cohen_kappa(&predictions, &votes)?,
        groups: GroupCounts {
            female: groups.female.iter().filter(|&&f| f).count(),
            young: groups.young.iter().filter(|&&y| y).count(),
            total: data.len(),
        },
        degenerate_instances: degenerate,
        points,
    })
}

/// CSV with header `instance,age_value,age_composition,predicted_class`.
pub fn write_density_csv<W: Write>(out: W, points: &[DensityPoint]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["instance", "age_value", "age_composition", "predicted_class"])?;
    for p in points {
        w.write_record([
            p.instance.to_string(),
            p.age_value.to_string(),
            p.age_composition.to_string(),
            p.predicted_class.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

/// Replaces the top `k` ranked features with `means`.
pub fn flip_features(data: &Dataset, ranking: &FeatureRanking, k: usize, means: &[f64]) -> Result<Dataset> {
    let n = data.n_features();
    if means.len() != n || ranking.len() != n {
        return Err(Error::shape(
            "flip_features",
            format!("{n} features"),
            format!("{} means and {} ranked features", means.len(), ranking.len()),
        ));
    }
    if k > n {
        return Err(Error::InvalidArgument(format!("cannot flip {k} of {n} features")));
    }
    let flipped = ranking.top(k);
    let mut values = data.instances().as_slice().to_vec();
    for row in values.chunks_mut(n) {
        for &j in &flipped {
            row[j] = means[j];
        }
    }
    data.with_instances(Matrix::new(data.len(), n, values)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MeanSource {
    /// Means of the split being flipped.
    Evaluation,
    Train,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlipConfig {
    pub activations: Vec<ActivationKind>,
    pub reps: usize,
    /// Repetition `r` uses seed `base_seed + r` for the split, the weight
    /// initialization and the batch order.
    pub base_seed: u64,
    pub train_fraction: f64,
    pub hyperparams: Hyperparams,
    pub means: MeanSource,
}

impl Default for FlipConfig {
    fn default() -> Self {
        Self {
            activations: vec![
                ActivationKind::elu(),
                ActivationKind::Sigmoid,
                ActivationKind::Tanh,
            ],
            reps: 20,
            base_seed: 0,
            train_fraction: 0.8,
            hyperparams: Hyperparams::default(),
            means: MeanSource::Evaluation,
        }
    }
}

/// Kappa against true labels after flipping `k = 0..=N` features, over
/// repetitions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlipCurve {
    pub activation: String,
    pub ranking: String,
    pub mean: Vec<f64>,
    /// Sample standard deviation over repetitions; 0 for a single one.
    pub std: Vec<f64>,
    pub per_rep: Vec<Vec<f64>>,
}

impl FlipCurve {
    fn from_reps(activation: &str, ranking: &str, per_rep: Vec<Vec<f64>>) -> Self {
        let points = per_rep[0].len();
        let reps = per_rep.len() as f64;
        let mut mean = vec![0.0; points];
        let mut std = vec![0.0; points];
        for k in 0..points {
            let m = per_rep.iter().map(|c| c[k]).sum::<f64>() / reps;
            mean[k] = m;
            if per_rep.len() > 1 {
                let ss: f64 = per_rep.iter().map(|c| (c[k] - m).powi(2)).sum();
                std[k] = (ss / (reps - 1.0)).sqrt();
            }
        }
        Self {
            activation: activation.to_string(),
            ranking: ranking.to_string(),
            mean,
            std,
            per_rep,
        }
    }

    pub fn reps(&self) -> usize {
        self.per_rep.len()
    }
}

/// Curves for one activation: FCP-ranked and uniformly random rankings
/// evaluated on the same trained models.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlipResult {
    pub fcp: FlipCurve,
    pub random: FlipCurve,
    pub degenerate_instances: usize,
}

fn kappa_curve(net: &Network, test: &Dataset, ranking: &FeatureRanking, means: &[f64]) -> Result<Vec<f64>> {
    (0..=test.n_features())
        .map(|k| {
            let flipped = flip_features(test, ranking, k, means)?;
            cohen_kappa(&predict_all(net, &flipped)?, flipped.labels())
        })
        .collect()
}

struct RepOutcome {
    fcp: Vec<f64>,
    random: Vec<f64>,
    degenerate: usize,
}

fn flip_repetition(data: &Dataset, activation: ActivationKind, seed: u64, config: &FlipConfig) -> Result<RepOutcome> {
    let (train_set, test_set) = stratified_split(data, config.train_fraction, seed)?;
    let mut net = case_study_network(data.n_features(), data.n_classes(), activation, seed)?;
    let hp = Hyperparams {
        seed,
        ..config.hyperparams.clone()
    };
    train(&mut net, &train_set, &hp)?;
    let importance = global_importance(&net, test_set.instances().row_iter())?;
    let means = match config.means {
        MeanSource::Evaluation => test_set.column_means(),
        MeanSource::Train => train_set.column_means(),
    };
    let mut order: Vec<usize> = (0..data.n_features()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(2);
    order.shuffle(&mut rng);
    let mut random_scores = vec![0.0; order.len()];
    for (rank, &j) in order.iter().enumerate() {
        random_scores[j] = (order.len() - rank) as f64;
    }
    let random = FeatureRanking::from_scores(&random_scores);
    Ok(RepOutcome {
        fcp: kappa_curve(&net, &test_set, &importance.ranking, &means)?,
        random: kappa_curve(&net, &test_set, &random, &means)?,
        degenerate: importance.degenerate,
    })
}

/// Runs the feature-flipping protocol for each configured activation.
pub fn flip_experiment(data: &Dataset, config: &FlipConfig) -> Result<Vec<FlipResult>> {
    if config.reps == 0 {
        return Err(Error::InvalidArgument("flip experiment needs at least one repetition".into()));
    }
    if config.activations.is_empty() {
        return Err(Error::InvalidArgument("flip experiment needs at least one activation".into()));
    }
    config.hyperparams.validate()?;
    config
        .activations
        .iter()
        .map(|&activation| {
            let outcomes = (0..config.reps)
                .into_par_iter()
                .map(|r| flip_repetition(data, activation, config.base_seed + r as u64, config))
                .collect::<Result<Vec<_>>>()?;
            let name = activation.name();
            let degenerate = outcomes.iter().map(|o| o.degenerate).sum();
            let (fcp, random): (Vec<_>, Vec<_>) = outcomes.into_iter().map(|o| (o.fcp, o.random)).unzip();
            Ok(FlipResult {
                fcp: FlipCurve::from_reps(name, "fcp", fcp),
                random: FlipCurve::from_reps(name, "random", random),
                degenerate_instances: degenerate,
            })
        })
        .collect()
}

/// CSV with header `activation,k,kappa_mean,kappa_std,reps`.
pub fn write_flip_csv<W: Write>(out: W, curves: &[&FlipCurve]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["activation", "k", "kappa_mean", "kappa_std", "reps"])?;
    for c in curves {
        for (k, (m, s)) in c.mean.iter().zip(&c.std).enumerate() {
            w.write_record([
                c.activation.clone(),
                k.to_string(),
                m.to_string(),
                s.to_string(),
                c.reps().to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}
