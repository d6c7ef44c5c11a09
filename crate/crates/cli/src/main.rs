mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rand_distr::{Distribution, Normal};

use config::set;
use dapa_core::distribution::read_samples;
use dapa_core::fitter::Weighting;
use dapa_core::quantizer::header::{export_c_header, parse_c_header};
use dapa_core::quantizer::{eval_fixed, quantize_table, select_format};
use dapa_core::{hwmodel, metrics, netcheck, reference, synth};
use dapa_core::{ActivationKind, DapaTable, EmpiricalDistribution, FitConfig, QuantizedTable};

/// Distribution-aware piecewise-linear activation tables: fit, score,
/// quantize, export and simulate.
#[derive(Parser, Debug)]
#[command(name = "dapa", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit a table to a sample file (text, or raw f32 for .f32/.bin/.raw).
    Fit(FitArgs),
    /// Score a table against a distribution.
    Eval(EvalArgs),
    /// Pick an I/O format under the DWMSE budget and quantize the table.
    Quantize(QuantizeArgs),
    /// Write a quantized table as a C header.
    Export(ExportArgs),
    /// Run codes through the comparator-tree pipeline model.
    Simulate(SimulateArgs),
    /// Fixed-point softmax on random vectors, compared with exact softmax.
    SoftmaxSim(SoftmaxArgs),
    /// Train exact and table-activation twins on the two-moons task.
    TrainDemo(TrainArgs),
    /// Held-out DWMSE versus fitting-sample count.
    StudySamples(StudyArgs),
    /// Correlations and Fisher interval for a two-column CSV.
    Stats(StatsArgs),
}

#[derive(Args, Debug)]
struct FitArgs {
    samples: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    kind: Option<ActivationKind>,
    #[arg(long)]
    segments: Option<usize>,
    #[arg(long)]
    bins: Option<usize>,
    #[arg(long, num_args = 2, value_names = ["A", "B"], allow_negative_numbers = true)]
    clip: Option<Vec<f64>>,
    /// Fit with uniform weights (plain MSE) instead of the distribution.
    #[arg(long)]
    uniform: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Report path; defaults to `<out stem>.report.json`.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Distribution path; defaults to `<out stem>.dist.json`.
    #[arg(long)]
    dist: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    table: PathBuf,
    dist: PathBuf,
    #[arg(long, num_args = 2, value_names = ["A", "B"], allow_negative_numbers = true)]
    range: Option<Vec<f64>>,
    #[arg(long, default_value_t = metrics::DEFAULT_MSE_GRID)]
    grid: usize,
    #[arg(long)]
    json: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct QuantizeArgs {
    table: Option<PathBuf>,
    dist: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    bit_max: Option<u32>,
    #[arg(long, num_args = 2, value_names = ["A", "B"], allow_negative_numbers = true)]
    range: Option<Vec<f64>>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    export_header: Option<PathBuf>,
    #[arg(long)]
    prefix: Option<String>,
}

#[derive(Args, Debug)]
struct ExportArgs {
    qtable: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "")]
    prefix: String,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    qtable: PathBuf,
    /// All codes of the I/O format; prints the mismatch count.
    #[arg(long, conflicts_with = "input")]
    sweep: bool,
    /// Writes every sweep trace line to this file.
    #[arg(long, requires = "sweep")]
    trace_out: Option<PathBuf>,
    #[arg(long, num_args = 1.., allow_negative_numbers = true)]
    input: Vec<i32>,
}

#[derive(Args, Debug)]
struct SoftmaxArgs {
    table: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    vectors: Option<usize>,
    #[arg(long)]
    len: Option<usize>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    dims: Option<Vec<usize>>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long)]
    kind: Option<ActivationKind>,
    #[arg(long)]
    segments: Option<usize>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Loss curves as CSV.
    #[arg(long)]
    plot: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct StudyArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    counts: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    segments: Option<Vec<usize>>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    heldout: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct StatsArgs {
    pairs: PathBuf,
    #[arg(long, default_value_t = metrics::DEFAULT_LEVEL)]
    level: f64,
    #[arg(long)]
    json: bool,
}

fn pair(v: Option<Vec<f64>>) -> Option<(f64, f64)> {
    v.map(|v| (v[0], v[1]))
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
    path.with_file_name(format!("{stem}.{suffix}"))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn to_json<T: serde::Serialize>(v: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

fn require(path: &Path, what: &str) -> Result<()> {
    if path.as_os_str().is_empty() {
        bail!("missing {what} path");
    }
    Ok(())
}

fn cmd_fit(a: FitArgs) -> Result<()> {
    let mut run: config::FitRun = config::load(a.config.as_deref())?;
    set(&mut run.samples, a.samples);
    set(&mut run.kind, a.kind);
    set(&mut run.segments, a.segments);
    set(&mut run.bins, a.bins);
    if let Some(c) = pair(a.clip) {
        run.clip = Some(c);
    }
    run.uniform |= a.uniform;
    set(&mut run.out, a.out);
    if a.report.is_some() {
        run.report = a.report;
    }
    if a.dist.is_some() {
        run.dist = a.dist;
    }
    require(&run.samples, "samples")?;
    let report_path = run.report.clone().unwrap_or_else(|| sibling(&run.out, "report.json"));
    let dist_path = run.dist.clone().unwrap_or_else(|| sibling(&run.out, "dist.json"));

    let samples = read_samples(&run.samples)?;
    let d = EmpiricalDistribution::from_samples(&samples, run.bins, run.clip)?;
    let cfg = FitConfig {
        weighting: if run.uniform { Weighting::Uniform } else { Weighting::Distribution },
        ..FitConfig::default()
    };
    let t = dapa_core::build_dapa(&d, run.kind, run.segments, &cfg)?;
    let range = run.clip.unwrap_or_else(|| d.range());
    let report = metrics::approx_report(&t, &d, range, metrics::DEFAULT_MSE_GRID)?;

    write(&run.out, &to_json(&t)?)?;
    write(&report_path, &to_json(&report)?)?;
    write(&dist_path, &to_json(&d)?)?;
    config::write_beside(&run.out, &run)?;
    println!("segments: {}", t.segments());
    println!("dwmse: {:e}", report.dwmse);
    println!("mse: {:e}", report.mse);
    println!("table: {}", run.out.display());
    Ok(())
}

fn cmd_eval(a: EvalArgs) -> Result<()> {
    let t: DapaTable = read_json(&a.table)?;
    let d: EmpiricalDistribution = read_json(&a.dist)?;
    let range = pair(a.range).unwrap_or_else(|| d.range());
    let report = metrics::approx_report(&t, &d, range, a.grid)?;
    if let Some(out) = &a.out {
        write(out, &to_json(&report)?)?;
    }
    if a.json {
        print!("{}", to_json(&report)?);
    } else {
        print!("{}", report.to_text());
    }
    Ok(())
}

/// Quantize exits 3 when the bit budget ran out before the threshold.
fn cmd_quantize(a: QuantizeArgs) -> Result<ExitCode> {
    let mut run: config::QuantizeRun = config::load(a.config.as_deref())?;
    set(&mut run.table, a.table);
    set(&mut run.dist, a.dist);
    set(&mut run.theta, a.theta);
    set(&mut run.bit_max, a.bit_max);
    if let Some(r) = pair(a.range) {
        run.range = Some(r);
    }
    set(&mut run.out, a.out);
    if a.export_header.is_some() {
        run.export_header = a.export_header;
    }
    set(&mut run.prefix, a.prefix);
    require(&run.table, "table")?;
    require(&run.dist, "distribution")?;

    let t: DapaTable = read_json(&run.table)?;
    let d: EmpiricalDistribution = read_json(&run.dist)?;
    let range = run.range.unwrap_or_else(|| d.range());
    println!("theta: {}", run.theta);
    let sel = select_format(&t, &d, range, run.theta, run.bit_max)?;
    let q = quantize_table(&t, sel.format)?;
    write(&run.out, &to_json(&q)?)?;
    if let Some(h) = &run.export_header {
        write(h, &export_c_header(&q, &run.prefix))?;
    }
    write(&sibling(&run.out, "selection.json"), &to_json(&sel)?)?;
    config::write_beside(&run.out, &run)?;
    println!("{}", sel.format);
    println!("threshold_met: {}", sel.threshold_met);
    println!("fp_dwmse: {:e}", sel.fp_dwmse);
    println!("quantized_dwmse: {:e}", sel.quantized_dwmse);
    Ok(if sel.threshold_met { ExitCode::SUCCESS } else { ExitCode::from(3) })
}

fn cmd_export(a: ExportArgs) -> Result<()> {
    let q: QuantizedTable = read_json(&a.qtable)?;
    let header = export_c_header(&q, &a.prefix);
    // refuse to write a header that does not read back to the same table
    if parse_c_header(&header, &a.prefix)? != q {
        bail!("exported header does not round-trip");
    }
    write(&a.out, &header)
}

fn cmd_simulate(a: SimulateArgs) -> Result<ExitCode> {
    let q: QuantizedTable = read_json(&a.qtable)?;
    if a.sweep {
        let traces = hwmodel::sweep(&q);
        let mismatches = traces.iter().filter(|t| t.output_code != eval_fixed(&q, t.input_code)).count();
        if let Some(p) = &a.trace_out {
            let mut text = String::from("code\tbits\tsegment\toutput\n");
            for t in &traces {
                text.push_str(&t.to_line());
                text.push('\n');
            }
            write(p, &text)?;
        }
        println!("codes: {}", traces.len());
        println!("stages: {}", hwmodel::pipeline_depth(q.segments())?);
        println!("mismatches: {mismatches}");
        return Ok(if mismatches == 0 { ExitCode::SUCCESS } else { ExitCode::from(1) });
    }
    if a.input.is_empty() {
        bail!("give --sweep or --input CODE...");
    }
    let io = q.io_format();
    println!("code\tbits\tsegment\toutput\tstages");
    for &c in &a.input {
        if !io.contains_code(c as i64) {
            bail!("code {c} is outside {io}");
        }
        let t = hwmodel::simulate_lookup(&q, c);
        println!("{}\t{}", t.to_line(), t.stage_count);
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_softmax(a: SoftmaxArgs) -> Result<()> {
    let mut run: config::SoftmaxRun = config::load(a.config.as_deref())?;
    set(&mut run.table, a.table);
    set(&mut run.vectors, a.vectors);
    set(&mut run.len, a.len);
    set(&mut run.sigma, a.sigma);
    set(&mut run.seed, a.seed);
    require(&run.table, "table")?;
    let q: QuantizedTable = read_json(&run.table)?;
    if q.kind() != ActivationKind::Exp {
        bail!("softmax needs an exp table, got {}", q.kind());
    }
    let io = q.io_format();
    let normal = Normal::new(0.0, run.sigma).context("invalid sigma")?;
    let mut rng = synth::rng(run.seed);
    let (mut max_err, mut max_sum_dev) = (0.0f64, 0.0f64);
    for _ in 0..run.vectors {
        let codes: Vec<i32> = (0..run.len).map(|_| io.encode_code(normal.sample(&mut rng))).collect();
        let xs: Vec<f64> = codes.iter().map(|&c| io.decode(c)).collect();
        let exact = reference::softmax_exact(&xs)?;
        let out = hwmodel::softmax_unit(&q, &codes)?;
        let mut sum = 0.0;
        for (&c, e) in out.iter().zip(&exact) {
            let y = io.decode(c);
            max_err = max_err.max((y - e).abs());
            sum += y;
        }
        max_sum_dev = max_sum_dev.max((sum - 1.0).abs());
    }
    println!("format: {io}");
    println!("vectors: {}", run.vectors);
    println!("max_abs_err: {max_err:e}");
    println!("max_sum_dev: {max_sum_dev:e}");
    println!("lsb: {:e}", io.lsb());
    Ok(())
}

fn cmd_train(a: TrainArgs) -> Result<()> {
    let mut run: config::TrainRun = config::load(a.config.as_deref())?;
    set(&mut run.train.dims, a.dims);
    set(&mut run.train.epochs, a.epochs);
    set(&mut run.train.lr, a.lr);
    set(&mut run.train.seeds, a.seeds);
    set(&mut run.train.kind, a.kind);
    set(&mut run.train.segments, a.segments);
    set(&mut run.samples, a.samples);
    set(&mut run.out, a.out);
    if a.plot.is_some() {
        run.plot = a.plot;
    }
    let data = synth::two_moons(run.samples, run.noise, run.label_noise, run.data_seed);
    let report = netcheck::train_demo(&run.train, &data)?;
    write(&run.out, &to_json(&report)?)?;
    if let Some(p) = &run.plot {
        write(p, &report.to_csv())?;
    }
    config::write_beside(&run.out, &run)?;
    println!("seeds: {:?}", report.seeds());
    println!("mean_final_exact: {}", report.mean_final_exact);
    println!("mean_final_dapa: {}", report.mean_final_dapa);
    println!("ratio: {}", report.final_ratio());
    Ok(())
}

fn cmd_study(a: StudyArgs) -> Result<()> {
    let mut run: config::StudyRun = config::load(a.config.as_deref())?;
    set(&mut run.study.counts, a.counts);
    set(&mut run.study.segments, a.segments);
    set(&mut run.study.trials, a.trials);
    set(&mut run.study.seed, a.seed);
    set(&mut run.study.heldout_count, a.heldout);
    set(&mut run.out, a.out);
    if a.csv.is_some() {
        run.csv = a.csv;
    }
    let report = netcheck::sample_sensitivity_study(&run.study)?;
    write(&run.out, &to_json(&report)?)?;
    if let Some(p) = &run.csv {
        write(p, &report.to_csv())?;
    }
    config::write_beside(&run.out, &run)?;
    print!("{}", report.to_csv());
    Ok(())
}

/// Two numeric columns; a non-numeric first line is taken as a header.
fn parse_pairs(text: &str) -> Result<Vec<(f64, f64)>> {
    let mut pairs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() < 2 {
            bail!("line {}: expected two columns", i + 1);
        }
        match (fields[0].parse::<f64>(), fields[1].parse::<f64>()) {
            (Ok(x), Ok(y)) => pairs.push((x, y)),
            _ if pairs.is_empty() && i == 0 => continue,
            _ => bail!("line {}: non-numeric value", i + 1),
        }
    }
    Ok(pairs)
}

fn cmd_stats(a: StatsArgs) -> Result<()> {
    let text = fs::read_to_string(&a.pairs).with_context(|| format!("reading {}", a.pairs.display()))?;
    let pairs = parse_pairs(&text)?;
    let report = metrics::correlations_at(&pairs, a.level)?;
    if a.json {
        print!("{}", to_json(&report)?);
    } else {
        print!("{}", report.to_text());
    }
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Fit(a) => cmd_fit(a).map(|_| ExitCode::SUCCESS),
        Command::Eval(a) => cmd_eval(a).map(|_| ExitCode::SUCCESS),
        Command::Quantize(a) => cmd_quantize(a),
        Command::Export(a) => cmd_export(a).map(|_| ExitCode::SUCCESS),
        Command::Simulate(a) => cmd_simulate(a),
        Command::SoftmaxSim(a) => cmd_softmax(a).map(|_| ExitCode::SUCCESS),
        Command::TrainDemo(a) => cmd_train(a).map(|_| ExitCode::SUCCESS),
        Command::StudySamples(a) => cmd_study(a).map(|_| ExitCode::SUCCESS),
        Command::Stats(a) => cmd_stats(a).map(|_| ExitCode::SUCCESS),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
