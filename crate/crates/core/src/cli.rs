//! Command-line surface. `main` parses [`Cli`] and maps errors to exit
//! codes: 0 success, 1 assertion or divergence, 2 usage or format error.

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::cube::HsiCube;
use crate::degradation::{NoiseSpec, SparseKind};
use crate::error::{Error, Result};
use crate::estimator::{estimate, EstimatorConfig, EstimatorWeights};
use crate::io::{read_cube, write_cube};
use crate::metrics::{psnr, MetricReport};
use crate::phantom::demo_phantom;
use crate::solver::{
    run, Denoiser, EnergyRecord, GaussianSmoothingDenoiser, HyperParams, IdentityDenoiser, InitPolicy,
    QuadraticProxDenoiser,
};
use crate::ulnsa::gradcheck::{gradient_check, GradOp};
use crate::ulnsa::{UlnsaConfig, UlnsaDenoiser};
use crate::weights::WeightStore;

#[derive(Debug, Parser)]
#[command(
    name = "hsi-hqs",
    version,
    about = "Noise-aware HQS unfolding for hyperspectral denoising"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Add synthetic noise (cases 1-4) to a clean cube.
    Synth(SynthArgs),
    /// Run the unfolded solver on a noisy cube.
    Denoise(DenoiseArgs),
    /// Compare a test cube against a reference.
    Eval(EvalArgs),
    /// Finite-difference check of an attention operator's input gradient.
    Gradcheck(GradcheckArgs),
    /// End-to-end run on a synthetic phantom.
    Demo(DemoArgs),
    /// Write seeded estimator and/or network weights to a UWT1 file.
    InitWeights(InitWeightsArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=4))]
    pub case: u8,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Fraction of columns striped per band.
    #[arg(long)]
    pub stripes: Option<f64>,
    #[arg(long = "stripe-amp", default_value_t = 0.1)]
    pub stripe_amp: f64,
    /// Sidecar path; defaults to `<out>.noise.txt`.
    #[arg(long)]
    pub spec_out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum DenoiserKind {
    Gaussian,
    ProxQuadratic,
    Ulnsa,
    Identity,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ParamSource {
    Manual,
    Estimated,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum InitKind {
    Observation,
    Zeros,
}

#[derive(Debug, Args)]
pub struct DenoiseArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub iters: usize,
    #[arg(long, value_enum, default_value_t = DenoiserKind::Gaussian)]
    pub denoiser: DenoiserKind,
    #[arg(long, value_enum, default_value_t = ParamSource::Manual)]
    pub params: ParamSource,
    /// Comma-separated, exactly `iters` entries.
    #[arg(long, value_delimiter = ',')]
    pub alpha: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    pub beta: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    pub gamma: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    pub lambda: Vec<f64>,
    /// UWT1 file with `estimator.*` and/or `ulnsa.*` tensors. Missing
    /// sections are generated from `--seed`.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = InitKind::Observation)]
    pub init: InitKind,
    /// Per-iteration energy and timing CSV.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub reference: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    pub peak: f64,
    #[arg(long = "scale-ratio", default_value_t = 1.0)]
    pub scale_ratio: f64,
    /// Append a CSV row (header written if the file is new).
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[arg(long, value_parser = parse_grad_op)]
    pub op: GradOp,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

fn parse_grad_op(s: &str) -> std::result::Result<GradOp, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Debug, Args)]
pub struct DemoArgs {
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long, default_value_t = DEMO_ITERS)]
    pub iters: usize,
    #[arg(long, value_enum, default_value_t = DenoiserKind::Gaussian)]
    pub denoiser: DenoiserKind,
    /// Directory for clean/noisy/denoised cubes and the metric table.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum WeightKind {
    Estimator,
    Ulnsa,
    Both,
}

#[derive(Debug, Args)]
pub struct InitWeightsArgs {
    #[arg(long, value_enum, default_value_t = WeightKind::Both)]
    pub kind: WeightKind,
    #[arg(long)]
    pub bands: usize,
    #[arg(long, default_value_t = 64)]
    pub height: usize,
    #[arg(long, default_value_t = 64)]
    pub width: usize,
    #[arg(long, default_value_t = 5)]
    pub iters: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

/// Demo solver settings.
pub const DEMO_CASE: u8 = 3;
pub const DEMO_ITERS: usize = 5;
pub const DEMO_ALPHA: f64 = 5.0;
pub const DEMO_BETA: f64 = 25.0;
pub const DEMO_GAMMA: f64 = 0.5;
pub const DEMO_LAMBDA: f64 = 0.2;
/// Required PSNR gain of the demo, in dB.
pub const DEMO_MIN_GAIN_DB: f64 = 3.0;

pub fn execute(cli: Cli, out: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Synth(a) => synth(a, out),
        Command::Denoise(a) => denoise(a, out),
        Command::Eval(a) => eval(a, out),
        Command::Gradcheck(a) => gradcheck(a, out),
        Command::Demo(a) => demo(a, out),
        Command::InitWeights(a) => init_weights(a, out),
    }
}

fn sidecar_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".noise.txt");
    PathBuf::from(s)
}

fn synth(a: SynthArgs, out: &mut dyn Write) -> Result<()> {
    let clean = read_cube(&a.input)?;
    let mut spec = NoiseSpec::for_case(a.case, a.seed)?;
    if let Some(frac) = a.stripes {
        spec.sparse_kind = SparseKind::Both;
        spec.stripe_fraction = frac;
        spec.stripe_amplitude = a.stripe_amp;
    }
    let noisy = spec.apply(&clean)?;
    write_cube(&noisy, &a.out)?;
    let sidecar = a.spec_out.unwrap_or_else(|| sidecar_path(&a.out));
    fs::write(&sidecar, spec.to_sidecar())?;
    writeln!(out, "{spec}")?;
    Ok(())
}

fn load_weights(path: Option<&Path>) -> Result<WeightStore> {
    match path {
        Some(p) => WeightStore::read(p),
        None => Ok(WeightStore::new()),
    }
}

fn manual_params(a: &DenoiseArgs) -> Result<HyperParams> {
    let k = a.iters;
    for (name, v) in [
        ("alpha", &a.alpha),
        ("beta", &a.beta),
        ("gamma", &a.gamma),
        ("lambda", &a.lambda),
    ] {
        if v.len() != k {
            return Err(Error::invalid(
                name,
                format!(
                    "expected {k} comma-separated entries (one per iteration), got {}",
                    v.len()
                ),
            ));
        }
    }
    HyperParams::new(a.alpha.clone(), a.beta.clone(), a.gamma.clone(), a.lambda.clone())
}

pub fn make_denoiser(
    kind: DenoiserKind,
    store: &WeightStore,
    observation: &HsiCube,
    seed: u64,
) -> Result<Box<dyn Denoiser>> {
    Ok(match kind {
        DenoiserKind::Gaussian => Box::new(GaussianSmoothingDenoiser::default()),
        DenoiserKind::ProxQuadratic => Box::new(QuadraticProxDenoiser),
        DenoiserKind::Identity => Box::new(IdentityDenoiser),
        DenoiserKind::Ulnsa => {
            if store.contains("ulnsa.meta") {
                Box::new(UlnsaDenoiser::new(store)?)
            } else {
                let (h, w, p) = observation.dims();
                let generated = UlnsaConfig::desk(p, h, w).init_weights(seed)?;
                Box::new(UlnsaDenoiser::new(&generated)?)
            }
        }
    })
}

fn denoise(a: DenoiseArgs, out: &mut dyn Write) -> Result<()> {
    if a.iters == 0 {
        return Err(Error::invalid("iters", "iteration count must be at least 1"));
    }
    let has_manual = !(a.alpha.is_empty() && a.beta.is_empty() && a.gamma.is_empty() && a.lambda.is_empty());
    let y = read_cube(&a.input)?;
    let store = load_weights(a.weights.as_deref())?;
    let params = match a.params {
        ParamSource::Manual => manual_params(&a)?,
        ParamSource::Estimated => {
            if has_manual {
                return Err(Error::invalid(
                    "params",
                    "manual parameter lists cannot be combined with --params estimated",
                ));
            }
            let weights = if store.contains("estimator.meta") {
                EstimatorWeights::load(&store)?
            } else {
                EstimatorWeights::load(&EstimatorConfig::new(y.bands(), a.iters).init_weights(a.seed)?)?
            };
            estimate(&y, a.iters, &weights)?
        }
    };
    let denoiser = make_denoiser(a.denoiser, &store, &y, a.seed)?;
    let init = match a.init {
        InitKind::Observation => InitPolicy::FromObservation,
        InitKind::Zeros => InitPolicy::Zeros,
    };
    let result = run(&y, &params, denoiser.as_ref(), init)?;
    write_cube(&result.x_hat, &a.out)?;
    if let Some(path) = &a.trace {
        let mut text = String::from(EnergyRecord::csv_header());
        text.push('\n');
        for rec in &result.trace {
            text.push_str(&rec.csv_row());
            text.push('\n');
        }
        fs::write(path, text)?;
    }
    let last = result.trace.last().map(|r| r.energy[3]).unwrap_or(f64::NAN);
    writeln!(out, "iterations={}", params.iterations())?;
    writeln!(out, "final_energy={last:.10e}")?;
    Ok(())
}

fn append_csv(path: &Path, header: &str, row: &str) -> Result<()> {
    let fresh = !path.exists() || fs::metadata(path)?.len() == 0;
    let mut f = OpenOptions::new().create(true).append(true).open(path)?;
    if fresh {
        writeln!(f, "{header}")?;
    }
    writeln!(f, "{row}")?;
    Ok(())
}

fn eval(a: EvalArgs, out: &mut dyn Write) -> Result<()> {
    let reference = read_cube(&a.reference)?;
    let test = read_cube(&a.test)?;
    let report = MetricReport::compute(&reference, &test, a.peak, a.scale_ratio)?;
    writeln!(out, "{report}")?;
    if let Some(path) = &a.csv {
        append_csv(path, MetricReport::csv_header(), &report.csv_row())?;
    }
    Ok(())
}

fn gradcheck(a: GradcheckArgs, out: &mut dyn Write) -> Result<()> {
    let report = gradient_check(a.op, a.seed)?;
    writeln!(out, "{report}")?;
    if !report.passed() {
        return Err(Error::Assertion(format!(
            "{} gradient error {:.3e} exceeds {:.0e}",
            a.op, report.max_rel_error, report.threshold
        )));
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct DemoOutcome {
    pub clean: HsiCube,
    pub noisy: HsiCube,
    pub denoised: HsiCube,
    pub noisy_report: MetricReport,
    pub denoised_report: MetricReport,
}

impl DemoOutcome {
    pub fn gain_db(&self) -> f64 {
        self.denoised_report.psnr - self.noisy_report.psnr
    }

    pub fn table(&self) -> String {
        format!(
            "image,{}\nnoisy,{}\ndenoised,{}\n",
            MetricReport::csv_header(),
            self.noisy_report.csv_row(),
            self.denoised_report.csv_row()
        )
    }
}

/// Phantom, case-3 noise, then `iters` solver iterations with the demo
/// parameters.
pub fn run_demo(seed: u64, iters: usize, kind: DenoiserKind) -> Result<DemoOutcome> {
    let clean = demo_phantom()?;
    let (noisy, _) = crate::degradation::synthesize_case(&clean, DEMO_CASE, seed)?;
    let params = HyperParams::constant(iters, DEMO_ALPHA, DEMO_BETA, DEMO_GAMMA, DEMO_LAMBDA)?;
    let denoiser = make_denoiser(kind, &WeightStore::new(), &noisy, seed)?;
    let denoised = run(&noisy, &params, denoiser.as_ref(), InitPolicy::FromObservation)?.x_hat;
    let noisy_report = MetricReport::compute(&clean, &noisy, 1.0, 1.0)?;
    let denoised_report = MetricReport::compute(&clean, &denoised, 1.0, 1.0)?;
    Ok(DemoOutcome {
        clean,
        noisy,
        denoised,
        noisy_report,
        denoised_report,
    })
}

fn demo(a: DemoArgs, out: &mut dyn Write) -> Result<()> {
    let outcome = run_demo(a.seed, a.iters, a.denoiser)?;
    if let Some(dir) = &a.out_dir {
        fs::create_dir_all(dir)?;
        write_cube(&outcome.clean, dir.join("clean.hsic"))?;
        write_cube(&outcome.noisy, dir.join("noisy.hsic"))?;
        write_cube(&outcome.denoised.clamped(0.0, 1.0), dir.join("denoised.hsic"))?;
        fs::write(dir.join("metrics.csv"), outcome.table())?;
    }
    write!(out, "{}", outcome.table())?;
    writeln!(out, "psnr_gain_db={:.4}", outcome.gain_db())?;
    let (noisy_psnr, denoised_psnr) = (
        psnr(&outcome.clean, &outcome.noisy, 1.0)?,
        psnr(&outcome.clean, &outcome.denoised, 1.0)?,
    );
    if denoised_psnr < noisy_psnr + DEMO_MIN_GAIN_DB {
        return Err(Error::Assertion(format!(
            "denoised PSNR {denoised_psnr:.3} dB is not {DEMO_MIN_GAIN_DB} dB above noisy {noisy_psnr:.3} dB"
        )));
    }
    Ok(())
}

fn init_weights(a: InitWeightsArgs, out: &mut dyn Write) -> Result<()> {
    let mut store = WeightStore::new();
    if matches!(a.kind, WeightKind::Estimator | WeightKind::Both) {
        store.merge(EstimatorConfig::new(a.bands, a.iters).init_weights(a.seed)?)?;
    }
    if matches!(a.kind, WeightKind::Ulnsa | WeightKind::Both) {
        store.merge(UlnsaConfig::desk(a.bands, a.height, a.width).init_weights(a.seed)?)?;
    }
    store.write(&a.out)?;
    writeln!(out, "tensors={}", store.len())?;
    Ok(())
}
