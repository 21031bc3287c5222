//! `fkb`: batch front end for validating, running, training and ensembling
//! FKBX models.
//!
//! Exit codes: 0 success, 1 invalid model/data/configuration, 2 I/O failure.

use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fkb_core::csvio::{self, CsvError, Row};
use fkb_core::ensemble::EnsembleError;
use fkb_core::training::TrainError;
use fkb_core::{
    fit, load_ensemble, parse_model, serialize_model, validate_spec, LayerSpec, LossRegistry, ModelSpec, Network,
    SampleSet, TrainConfig,
};

#[derive(Parser)]
#[command(name = "fkb", version, about = "Run, train and ensemble FKBX neural-network models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a model file and print `OK <layers> <input_dim> <output_dim>`
    Validate { model: PathBuf },
    /// Write one prediction row per input row
    Predict {
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Train with SGD on a CSV of input columns followed by target columns
    Train {
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 0.01)]
        lr: f64,
        #[arg(long, default_value_t = 1)]
        epochs: usize,
        #[arg(long, default_value_t = 1)]
        batch: usize,
        /// Loss name; defaults to crossentropy for softmax outputs, mse otherwise
        #[arg(long)]
        loss: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Average the predictions of every *.fkbx model in a directory
    Ensemble {
        dir: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Print the layer table of a model
    Summary { model: PathBuf },
}

enum Failure {
    Domain(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Domain(_) => 1,
            Failure::Io(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Domain(m) | Failure::Io(m) => m,
        }
    }
}

type CmdResult = Result<(), Failure>;

fn io_failure(path: &Path, err: impl std::fmt::Display) -> Failure {
    Failure::Io(format!("{}: {err}", path.display()))
}

fn csv_failure(path: &Path, err: CsvError) -> Failure {
    match err {
        CsvError::Io(e) => io_failure(path, e),
        other => Failure::Domain(format!("{}: {other}", path.display())),
    }
}

fn load_spec(path: &Path) -> Result<ModelSpec, Failure> {
    let bytes = fs::read(path).map_err(|e| io_failure(path, e))?;
    parse_model(bytes).map_err(|e| Failure::Domain(format!("{}: {e}", path.display())))
}

fn load_network(path: &Path) -> Result<Network, Failure> {
    let spec = load_spec(path)?;
    Network::from_spec(&spec).map_err(|e| Failure::Domain(format!("{}: {e}", path.display())))
}

fn read_csv(path: &Path, width: usize) -> Result<Vec<Row>, Failure> {
    let file = File::open(path).map_err(|e| io_failure(path, e))?;
    csvio::read_rows(BufReader::new(file), Some(width)).map_err(|e| csv_failure(path, e))
}

fn write_csv(path: &Path, rows: &[Vec<f64>]) -> CmdResult {
    let file = File::create(path).map_err(|e| io_failure(path, e))?;
    csvio::write_rows(BufWriter::new(file), rows.iter().map(Vec::as_slice)).map_err(|e| io_failure(path, e))
}

fn validate(model: &Path) -> CmdResult {
    let spec = load_spec(model)?;
    let violations = validate_spec(&spec);
    if !violations.is_empty() {
        let joined: Vec<String> = violations.iter().map(ToString::to_string).collect();
        return Err(Failure::Domain(format!("{}: {}", model.display(), joined.join("; "))));
    }
    println!("OK {} {} {}", spec.layers.len(), spec.input_dim, spec.output_dim());
    Ok(())
}

fn predict(model: &Path, input: &Path, output: &Path) -> CmdResult {
    let net = load_network(model)?;
    let rows = read_csv(input, net.input_dim())?;
    let mut preds = Vec::with_capacity(rows.len());
    for row in &rows {
        let y = net
            .predict(&row.values)
            .map_err(|e| Failure::Domain(format!("{} row {}: {e}", input.display(), row.line)))?;
        preds.push(y);
    }
    write_csv(output, &preds)
}

struct TrainArgs<'a> {
    data: &'a Path,
    lr: f64,
    epochs: usize,
    batch: usize,
    loss: Option<String>,
    seed: u64,
    out: &'a Path,
}

fn train(model: &Path, args: TrainArgs) -> CmdResult {
    let mut net = load_network(model)?;
    let (n_in, n_out) = (net.input_dim(), net.output_dim());
    let rows = read_csv(args.data, n_in + n_out)?;
    let (inputs, targets) = rows
        .into_iter()
        .map(|r| {
            let (x, y) = r.values.split_at(n_in);
            (x.to_vec(), y.to_vec())
        })
        .unzip();
    let data = SampleSet::new(inputs, targets).map_err(|e| Failure::Domain(e.to_string()))?;
    let cfg = TrainConfig {
        learning_rate: args.lr,
        epochs: args.epochs,
        batch_size: args.batch,
        loss_name: args.loss.unwrap_or_else(|| net.loss().name().to_string()),
        seed: args.seed,
        shuffle: true,
    };
    let history = fit(&mut net, &data, &cfg, &LossRegistry::new()).map_err(|e| match e {
        TrainError::Io { path, source } => Failure::Io(format!("{path}: {source}")),
        other => Failure::Domain(other.to_string()),
    })?;

    let stdout = io::stdout();
    let mut log = stdout.lock();
    for (i, loss) in history.iter().enumerate() {
        writeln!(log, "epoch {} loss {loss:.16e}", i + 1).map_err(|e| Failure::Io(format!("stdout: {e}")))?;
    }

    let spec = net.to_spec().map_err(|e| Failure::Domain(e.to_string()))?;
    let text = serialize_model(&spec).map_err(|e| Failure::Domain(e.to_string()))?;
    fs::write(args.out, text).map_err(|e| io_failure(args.out, e))
}

fn ensemble(dir: &Path, input: &Path, output: &Path, noise: f64, seed: u64) -> CmdResult {
    let ens = load_ensemble(dir, noise, seed).map_err(|e| match e {
        EnsembleError::Io { path, source } => io_failure(&path, source),
        other => Failure::Domain(format!("{}: {other}", dir.display())),
    })?;
    let rows = read_csv(input, ens.input_dim())?;
    let mut preds = Vec::with_capacity(rows.len());
    for (call, row) in rows.iter().enumerate() {
        let y = ens
            .predict_at(&row.values, call as u64)
            .map_err(|e| Failure::Domain(format!("{} row {}: {e}", input.display(), row.line)))?;
        preds.push(y);
    }
    write_csv(output, &preds)
}

fn summary(model: &Path) -> CmdResult {
    let spec = load_spec(model)?;
    println!("{:>5}  {:<10} {:>7} {:>7}  {:<22} {:>10}", "layer", "kind", "in", "out", "detail", "params");
    for (i, (layer, (n_in, n_out))) in spec.layers.iter().zip(spec.layer_dims()).enumerate() {
        let detail = match layer {
            LayerSpec::Dense(d) => match d.activation.kind {
                fkb_core::ActivationKind::LeakyRelu => format!("leakyrelu alpha={}", d.activation.alpha),
                kind => kind.name().to_string(),
            },
            LayerSpec::Dropout { rate } => format!("rate={rate}"),
            LayerSpec::BatchNorm(bn) => format!("eps={}", bn.epsilon),
        };
        println!(
            "{i:>5}  {:<10} {n_in:>7} {n_out:>7}  {detail:<22} {:>10}",
            layer.kind_name(),
            layer.parameter_count()
        );
    }
    println!("input {}  output {}  parameters {}", spec.input_dim, spec.output_dim(), spec.parameter_count());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Validate { model } => validate(&model),
        Command::Predict { model, input, output } => predict(&model, &input, &output),
        Command::Train {
            model,
            data,
            lr,
            epochs,
            batch,
            loss,
            seed,
            out,
        } => train(
            &model,
            TrainArgs {
                data: &data,
                lr,
                epochs,
                batch,
                loss,
                seed,
                out: &out,
            },
        ),
        Command::Ensemble {
            dir,
            input,
            output,
            noise,
            seed,
        } => ensemble(&dir, &input, &output, noise, seed),
        Command::Summary { model } => summary(&model),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message().replace('\n', " "));
            ExitCode::from(failure.code())
        }
    }
}
