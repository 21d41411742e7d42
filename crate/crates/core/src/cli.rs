//! The `fcp` command-line tool.
//!
//! Every command writes its artifacts into `--out DIR` under fixed names.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::attribution::{
    global_importance, global_lrp, instance_importance, write_attributions_csv, DEFAULT_LRP_EPSILON,
};
use crate::dataprep::{
    load_csv_path, load_uci_german_path, recode_german_gender, Dataset, MinMaxScaler,
    GERMAN_AGE, GERMAN_GENDER,
};
use crate::error::{Error, Result};
use crate::evaluation::{bias_report, flip_experiment, write_density_csv, write_flip_csv, BiasReport, FlipConfig, MeanSource};
use crate::fcp::explain;
use crate::io::write_atomic;
use crate::linalg::Vector;
use crate::network::{ActivationKind, Network};
use crate::trainer::{accuracy, case_study_network, stratified_split, train, Hyperparams};

pub const MODEL_FILE: &str = "model.json";
pub const TRAIN_LOSS_FILE: &str = "train_loss.csv";
pub const TRAIN_REPORT_FILE: &str = "train_report.json";
pub const EXPLANATION_FILE: &str = "explanation.json";
pub const IMPORTANCE_FILE: &str = "importance.csv";
pub const ATTRIBUTION_FCP_FILE: &str = "attribution_fcp.csv";
pub const ATTRIBUTION_LRP_FILE: &str = "attribution_lrp.csv";
pub const COMPARE_FILE: &str = "compare.json";
pub const BIAS_REPORT_FILE: &str = "bias_report.json";
pub const AGE_DENSITY_FILE: &str = "age_density.csv";
pub const FLIP_FILE: &str = "flip_curves.csv";
pub const FLIP_RANDOM_FILE: &str = "flip_curves_random.csv";

#[derive(Debug, Parser)]
#[command(name = "fcp", version, about = "Explain feed-forward classifiers with forward composition propagation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train the case-study network and save it.
    Train(TrainCmd),
    /// Composition matrices of every layer for one instance.
    Explain(ExplainCmd),
    /// Feature importance from output-layer compositions.
    Importance(ImportanceCmd),
    /// Global FCP and LRP-ε attributions side by side.
    Compare(CompareCmd),
    /// Protected-feature analysis of age and gender compositions.
    BiasReport(BiasReportCmd),
    /// Feature-flipping curves for FCP and random rankings.
    Flip(FlipCmd),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Train(_) => "train",
            Command::Explain(_) => "explain",
            Command::Importance(_) => "importance",
            Command::Compare(_) => "compare",
            Command::BiasReport(_) => "bias-report",
            Command::Flip(_) => "flip",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DataFormat {
    /// Comma-separated with a header row and a JSON schema sidecar.
    Csv,
    /// Whitespace-separated UCI German Credit file.
    UciGerman,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScaleOn {
    /// Fit min/max on the whole dataset.
    All,
    /// Fit min/max on the training split only.
    Train,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitPart {
    Train,
    Test,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FlipMeans {
    /// Means of the split being flipped.
    Eval,
    Train,
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: DataFormat,
    /// JSON schema sidecar (csv format only).
    #[arg(long)]
    pub schema: Option<PathBuf>,
    /// Seed for the split, weight initialization and batch order.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.8)]
    pub train_fraction: f64,
    #[arg(long, value_enum, default_value = "all")]
    pub scale_on: ScaleOn,
    /// Protected feature names, comma-separated.
    #[arg(long, value_delimiter = ',')]
    pub protected: Vec<String>,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[arg(long, default_value_t = 100)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.001)]
    pub lr: f64,
    #[arg(long, default_value_t = 32)]
    pub batch: usize,
    /// L2 penalty on biases during training.
    #[arg(long, default_value_t = 0.0)]
    pub bias_l2: f64,
}

impl TrainArgs {
    fn hyperparams(&self, seed: u64) -> Hyperparams {
        Hyperparams {
            learning_rate: self.lr,
            epochs: self.epochs,
            batch_size: self.batch,
            bias_l2: self.bias_l2,
            seed,
            ..Hyperparams::default()
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainCmd {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub train: TrainArgs,
    #[arg(long, default_value = "sigmoid")]
    pub activation: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExplainCmd {
    #[arg(long)]
    pub model: PathBuf,
    /// Comma-separated feature values.
    #[arg(long, allow_hyphen_values = true)]
    pub input: String,
    /// Directory for the explanation; printed to stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ImportanceCmd {
    #[arg(long)]
    pub model: PathBuf,
    /// Score a single comma-separated instance instead of a dataset.
    #[arg(long, allow_hyphen_values = true, conflicts_with = "data")]
    pub input: Option<String>,
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: DataFormat,
    #[arg(long)]
    pub schema: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.8)]
    pub train_fraction: f64,
    #[arg(long, value_enum, default_value = "all")]
    pub scale_on: ScaleOn,
    #[arg(long, value_enum, default_value = "test")]
    pub split: SplitPart,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CompareCmd {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value_t = DEFAULT_LRP_EPSILON)]
    pub epsilon: f64,
    #[arg(long, value_enum, default_value = "test")]
    pub split: SplitPart,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BiasReportCmd {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub train: TrainArgs,
    /// Trained model; without it one model per activation is trained.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "elu,leaky_relu,sigmoid,tanh")]
    pub activation: Vec<String>,
    #[arg(long, value_enum, default_value = "test")]
    pub split: SplitPart,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FlipCmd {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub train: TrainArgs,
    #[arg(long, value_delimiter = ',', default_value = "elu,sigmoid,tanh")]
    pub activation: Vec<String>,
    #[arg(long, default_value_t = 20)]
    pub reps: usize,
    #[arg(long, value_enum, default_value = "eval")]
    pub flip_means: FlipMeans,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(cmd) => run_train(&cmd),
        Command::Explain(cmd) => run_explain(&cmd),
        Command::Importance(cmd) => run_importance(&cmd),
        Command::Compare(cmd) => run_compare(&cmd),
        Command::BiasReport(cmd) => run_bias_report(&cmd),
        Command::Flip(cmd) => run_flip(&cmd),
    }
}

/// Scaled splits of a dataset.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub all: Dataset,
    pub train: Dataset,
    pub test: Dataset,
}

impl Prepared {
    fn part(&self, part: SplitPart) -> &Dataset {
        match part {
            SplitPart::Train => &self.train,
            SplitPart::Test => &self.test,
            SplitPart::All => &self.all,
        }
    }
}

fn load_raw(path: &Path, format: DataFormat, schema: Option<&Path>) -> Result<Dataset> {
    match format {
        DataFormat::UciGerman => recode_german_gender(&load_uci_german_path(path)?),
        DataFormat::Csv => {
            let schema = schema.ok_or_else(|| {
                Error::InvalidArgument("--schema is required for --format csv".into())
            })?;
            load_csv_path(path, schema)
        }
    }
}

fn prepare_parts(
    path: &Path,
    format: DataFormat,
    schema: Option<&Path>,
    seed: u64,
    train_fraction: f64,
    scale_on: ScaleOn,
    protected: &[String],
) -> Result<Prepared> {
    let mut raw = load_raw(path, format, schema)?;
    let names: Vec<&str> = protected.iter().map(String::as_str).collect();
    raw.mark_protected(&names)?;
    let (train_raw, test_raw) = stratified_split(&raw, train_fraction, seed)?;
    let scaler = match scale_on {
        ScaleOn::All => MinMaxScaler::fit(&raw),
        ScaleOn::Train => MinMaxScaler::fit(&train_raw),
    };
    Ok(Prepared {
        all: scaler.transform(&raw)?,
        train: scaler.transform(&train_raw)?,
        test: scaler.transform(&test_raw)?,
    })
}

/// Loads, splits and scales the dataset described by `args`.
pub fn prepare(args: &DataArgs) -> Result<Prepared> {
    prepare_parts(
        &args.data,
        args.format,
        args.schema.as_deref(),
        args.seed,
        args.train_fraction,
        args.scale_on,
        &args.protected,
    )
}

fn parse_activation(name: &str) -> Result<ActivationKind> {
    let kind: ActivationKind = name.trim().parse()?;
    if kind == ActivationKind::Softmax {
        return Err(Error::InvalidArgument("softmax cannot be a hidden activation".into()));
    }
    Ok(kind)
}

fn parse_instance(text: &str) -> Result<Vector> {
    let values = text
        .split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidArgument(format!("'{v}' in --input is not a number")))
        })
        .collect::<Result<Vec<_>>>()?;
    Vector::new(values)
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> Result<()> {
    write_atomic(&dir.join(name), bytes)
}

fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    Ok(text.into_bytes())
}

fn check_model_fits(net: &Network, data: &Dataset) -> Result<()> {
    if net.input_width() != data.n_features() || net.output_width() != data.n_classes() {
        return Err(Error::shape(
            "model vs dataset",
            format!("model {}->{}", net.input_width(), net.output_width()),
            format!("{} features, {} classes", data.n_features(), data.n_classes()),
        ));
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct TrainSummary<'a> {
    activation: &'a str,
    widths: Vec<usize>,
    hyperparams: &'a Hyperparams,
    train_fraction: f64,
    train_size: usize,
    test_size: usize,
    class_names: &'a [String],
    feature_names: Vec<String>,
    final_loss: f64,
    train_accuracy: f64,
    test_accuracy: f64,
}

/// Trains one case-study network on the training split and returns it
/// with its test accuracy.
fn train_model(
    prepared: &Prepared,
    activation: ActivationKind,
    hp: &Hyperparams,
) -> Result<(Network, crate::trainer::TrainReport)> {
    let data = &prepared.train;
    let mut net = case_study_network(data.n_features(), data.n_classes(), activation, hp.seed)?;
    let mut report = train(&mut net, data, hp)?;
    report.test_accuracy = Some(accuracy(&net, &prepared.test)?);
    Ok((net, report))
}

fn run_train(cmd: &TrainCmd) -> Result<()> {
    let activation = parse_activation(&cmd.activation)?;
    let hp = cmd.train.hyperparams(cmd.data.seed);
    hp.validate()?;
    let prepared = prepare(&cmd.data)?;
    let (net, report) = train_model(&prepared, activation, &hp)?;

    ensure_dir(&cmd.out)?;
    net.save(cmd.out.join(MODEL_FILE))?;
    let mut loss_csv = Vec::new();
    report.write_loss_csv(&mut loss_csv)?;
    write_file(&cmd.out, TRAIN_LOSS_FILE, &loss_csv)?;
    let summary = TrainSummary {
        activation: activation.name(),
        widths: net.widths(),
        hyperparams: &hp,
        train_fraction: cmd.data.train_fraction,
        train_size: prepared.train.len(),
        test_size: prepared.test.len(),
        class_names: prepared.all.class_names(),
        feature_names: prepared.all.feature_names(),
        final_loss: *report.epoch_losses.last().expect("at least one epoch"),
        train_accuracy: report.train_accuracy,
        test_accuracy: report.test_accuracy.expect("set by train_model"),
    };
    write_file(&cmd.out, TRAIN_REPORT_FILE, &json_bytes(&summary)?)?;
    println!(
        "trained {} network: train accuracy {:.4}, test accuracy {:.4}",
        activation.name(),
        summary.train_accuracy,
        summary.test_accuracy
    );
    Ok(())
}

fn run_explain(cmd: &ExplainCmd) -> Result<()> {
    let net = Network::load(&cmd.model)?;
    let x = parse_instance(&cmd.input)?;
    let trace = explain(&net, &x)?;
    let bytes = json_bytes(&trace.to_export())?;
    match &cmd.out {
        Some(dir) => {
            ensure_dir(dir)?;
            write_file(dir, EXPLANATION_FILE, &bytes)
        }
        None => {
            print!("{}", String::from_utf8_lossy(&bytes));
            Ok(())
        }
    }
}

fn run_importance(cmd: &ImportanceCmd) -> Result<()> {
    let net = Network::load(&cmd.model)?;
    let (attribution, names) = match (&cmd.input, &cmd.data) {
        (Some(input), _) => {
            let trace = explain(&net, &parse_instance(input)?)?;
            let names = (0..net.input_width()).map(|j| format!("x{j}")).collect();
            (instance_importance(&trace)?, names)
        }
        (None, Some(path)) => {
            let prepared = prepare_parts(
                path,
                cmd.format,
                cmd.schema.as_deref(),
                cmd.seed,
                cmd.train_fraction,
                cmd.scale_on,
                &[],
            )?;
            let data = prepared.part(cmd.split);
            check_model_fits(&net, data)?;
            let global = global_importance(&net, data.instances().row_iter())?;
            if global.degenerate > 0 {
                eprintln!("fcp importance: skipped {} degenerate instances", global.degenerate);
            }
            (global.attribution, data.feature_names())
        }
        (None, None) => {
            return Err(Error::InvalidArgument("importance needs --input or --data".into()))
        }
    };
    ensure_dir(&cmd.out)?;
    let mut buf = Vec::new();
    attribution.write_csv(&mut buf, &names)?;
    write_file(&cmd.out, IMPORTANCE_FILE, &buf)
}

#[derive(Debug, Serialize)]
struct ComparisonEntry {
    feature: usize,
    name: String,
    fcp_score: f64,
    fcp_rank: usize,
    lrp_score: f64,
    lrp_rank: usize,
}

#[derive(Debug, Serialize)]
struct Comparison {
    note: &'static str,
    epsilon: f64,
    instances: usize,
    fcp_degenerate_instances: usize,
    features: Vec<ComparisonEntry>,
}

fn run_compare(cmd: &CompareCmd) -> Result<()> {
    let net = Network::load(&cmd.model)?;
    let prepared = prepare(&cmd.data)?;
    let data = prepared.part(cmd.split);
    check_model_fits(&net, data)?;
    let fcp = global_importance(&net, data.instances().row_iter())?;
    let lrp = global_lrp(&net, data.instances().row_iter(), cmd.epsilon)?;
    let names = data.feature_names();
    let features = names
        .iter()
        .enumerate()
        .map(|(j, name)| ComparisonEntry {
            feature: j,
            name: name.clone(),
            fcp_score: fcp.attribution.scores[j],
            fcp_rank: fcp.ranking.position(j).expect("ranking covers all features") + 1,
            lrp_score: lrp.attribution.scores[j],
            lrp_rank: lrp.ranking.position(j).expect("ranking covers all features") + 1,
        })
        .collect();
    let comparison = Comparison {
        note: "FCP scores are L1-normalized per instance and LRP relevances are not; \
               the numbers are not directly comparable, only the rankings are.",
        epsilon: cmd.epsilon,
        instances: data.len(),
        fcp_degenerate_instances: fcp.degenerate,
        features,
    };
    ensure_dir(&cmd.out)?;
    let mut buf = Vec::new();
    write_attributions_csv(&mut buf, std::slice::from_ref(&fcp.attribution), &names)?;
    write_file(&cmd.out, ATTRIBUTION_FCP_FILE, &buf)?;
    buf.clear();
    write_attributions_csv(&mut buf, std::slice::from_ref(&lrp.attribution), &names)?;
    write_file(&cmd.out, ATTRIBUTION_LRP_FILE, &buf)?;
    write_file(&cmd.out, COMPARE_FILE, &json_bytes(&comparison)?)
}

#[derive(Debug, Serialize)]
struct BiasReportFile<'a> {
    age_feature: &'a str,
    gender_feature: &'a str,
    reports: &'a [BiasReport],
}

fn run_bias_report(cmd: &BiasReportCmd) -> Result<()> {
    let (age_name, gender_name) = match cmd.data.protected.as_slice() {
        [] => (GERMAN_AGE.to_string(), GERMAN_GENDER.to_string()),
        [age, gender] => (age.clone(), gender.clone()),
        _ => {
            return Err(Error::InvalidArgument(
                "--protected for bias-report takes exactly AGE,GENDER".into(),
            ))
        }
    };
    let mut data_args = cmd.data.clone();
    data_args.protected = vec![age_name.clone(), gender_name.clone()];
    let prepared = prepare(&data_args)?;
    let data = prepared.part(cmd.split);
    let age = data
        .feature_index(&age_name)
        .ok_or_else(|| Error::Data(format!("no feature named '{age_name}'")))?;
    let gender = data
        .feature_index(&gender_name)
        .ok_or_else(|| Error::Data(format!("no feature named '{gender_name}'")))?;

    let reports = match &cmd.model {
        Some(path) => {
            let net = Network::load(path)?;
            check_model_fits(&net, data)?;
            vec![bias_report(&net, data, age, gender)?]
        }
        None => {
            let hp = cmd.train.hyperparams(cmd.data.seed);
            hp.validate()?;
            cmd.activation
                .iter()
                .map(|name| {
                    let (net, _) = train_model(&prepared, parse_activation(name)?, &hp)?;
                    bias_report(&net, data, age, gender)
                })
                .collect::<Result<Vec<_>>>()?
        }
    };

    ensure_dir(&cmd.out)?;
    let file = BiasReportFile {
        age_feature: &age_name,
        gender_feature: &gender_name,
        reports: &reports,
    };
    write_file(&cmd.out, BIAS_REPORT_FILE, &json_bytes(&file)?)?;
    for report in &reports {
        let name = if cmd.model.is_some() {
            AGE_DENSITY_FILE.to_string()
        } else {
            format!("age_density_{}.csv", report.activation)
        };
        let mut buf = Vec::new();
        write_density_csv(&mut buf, &report.points)?;
        write_file(&cmd.out, &name, &buf)?;
    }
    Ok(())
}

fn run_flip(cmd: &FlipCmd) -> Result<()> {
    let activations = cmd
        .activation
        .iter()
        .map(|a| parse_activation(a))
        .collect::<Result<Vec<_>>>()?;
    let hp = cmd.train.hyperparams(cmd.data.seed);
    let raw = load_raw(&cmd.data.data, cmd.data.format, cmd.data.schema.as_deref())?;
    let data = MinMaxScaler::fit(&raw).transform(&raw)?;
    let config = FlipConfig {
        activations,
        reps: cmd.reps,
        base_seed: cmd.data.seed,
        train_fraction: cmd.data.train_fraction,
        hyperparams: hp,
        means: match cmd.flip_means {
            FlipMeans::Eval => MeanSource::Evaluation,
            FlipMeans::Train => MeanSource::Train,
        },
    };
    let results = flip_experiment(&data, &config)?;
    ensure_dir(&cmd.out)?;
    let mut buf = Vec::new();
    write_flip_csv(&mut buf, &results.iter().map(|r| &r.fcp).collect::<Vec<_>>())?;
    write_file(&cmd.out, FLIP_FILE, &buf)?;
    buf.clear();
    write_flip_csv(&mut buf, &results.iter().map(|r| &r.random).collect::<Vec<_>>())?;
    write_file(&cmd.out, FLIP_RANDOM_FILE, &buf)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_instances() {
        assert_eq!(parse_instance("0.5, -0.8").unwrap().as_slice(), &[0.5, -0.8]);
        assert!(matches!(parse_instance("0.5,x"), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn rejects_softmax_hidden_layers() {
        assert!(parse_activation("softmax").is_err());
        assert_eq!(parse_activation("leaky_relu").unwrap(), ActivationKind::leaky_relu());
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn flags_parse() {
        let cli = Cli::try_parse_from([
            "fcp", "flip", "--data", "p.csv", "--schema", "p.json", "--reps", "3",
            "--activation", "elu,tanh", "--out", "o",
        ])
        .unwrap();
        match cli.command {
            Command::Flip(f) => {
                assert_eq!(f.reps, 3);
                assert_eq!(f.activation, vec!["elu", "tanh"]);
                assert_eq!(f.data.format, DataFormat::Csv);
            }
            other => panic!("parsed {other:?}"),
        }
        let cli = Cli::try_parse_from(["fcp", "compare", "--data", "g", "--format", "uci-german", "--model", "m", "--out", "o"]).unwrap();
        match cli.command {
            Command::Compare(c) => assert_eq!(c.epsilon, 1e-9),
            other => panic!("parsed {other:?}"),
        }
    }
}
