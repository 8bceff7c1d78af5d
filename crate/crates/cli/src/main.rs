//! `emconv`: simulate, sweep, fit and synthesize data for a two-mode
//! electromechanical frequency converter.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use emconv_core::fit::{
    fit_lorentzian, fit_power_law, fit_single_reflection, fit_two_mode_eit, EitData, EitWindow,
    FitProblem, FitResult, ForwardModel, PowerLawData,
};
use emconv_core::harness::experiments::{
    bandwidth_table, cooling_table, dynamic_range_table, grid_table, noise_table,
};
use emconv_core::harness::io::{
    parse_power_law, read_complex_spectrum, read_power_spectrum, sidecar_path,
    write_complex_spectrum, Cell,
};
use emconv_core::harness::synth::{synthesize_spectrum, NoiseSpec, SynthModel};
use emconv_core::harness::{
    linspace, run_bandwidth_sweep, run_cooling_curve, run_cooperativity_grid, run_dynamic_range,
    run_noise_budget, Axis, DeviceConfig, GridSpec, Metadata, Spacing, Table,
};
use emconv_core::scattering::{langevin_smatrix, ComplexSpectrum, Port};
use emconv_core::{Complex64, Error, Result};

#[derive(Parser, Debug)]
#[command(name = "emconv", version, about)]
struct Cli {
    /// Device configuration file (TOML).
    #[arg(long, global = true, conflicts_with = "preset")]
    config: Option<PathBuf>,

    /// Built-in device preset, used when no --config is given.
    #[arg(long, global = true, default_value = "fink2018")]
    preset: String,

    /// Output directory.
    #[arg(long, global = true, env = "EMCONV_OUT_DIR", default_value = ".")]
    out: PathBuf,

    /// Seed for anything stochastic.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output file format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Csv,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Full S-matrix spectra against signal detuning from the mechanical resonance.
    Simulate(SimulateArgs),
    /// Parameter sweeps.
    #[command(subcommand)]
    Sweep(SweepCommand),
    /// Fit a forward model to measured or synthetic data.
    Fit(FitArgs),
    /// Single-tone sideband cooling against drive power.
    Cool(CoolArgs),
    /// Added-noise budget at one or more drive power pairs.
    Noise(NoiseArgs),
    /// Synthetic spectra with complex Gaussian noise and a truth sidecar.
    Synth(SynthArgs),
    /// Print the resolved configuration as TOML.
    ShowConfig,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// Half span in damped mechanical linewidths.
    #[arg(long, default_value_t = 5.0)]
    span: f64,
    #[arg(long, default_value_t = 2001)]
    points: usize,
    /// Matched cooperativity override, `C1,C2`.
    #[arg(long, value_delimiter = ',', num_args = 2)]
    coop: Option<Vec<f64>>,
}

#[derive(Subcommand, Debug)]
enum SweepCommand {
    /// Line-center reflections and transmission over a cooperativity or power grid.
    Grid(GridArgs),
    /// Fitted conversion bandwidth at matched cooperativities.
    Bandwidth {
        /// Matched cooperativities.
        #[arg(long, value_delimiter = ',', default_value = "1,10,35,122")]
        coop: Vec<f64>,
    },
    /// Transmission against signal photon flux.
    DynamicRange {
        /// Signal photon fluxes [1/s]; `start:stop:points` gives a log-spaced list.
        #[arg(long, default_value = "1e5:2e9:12")]
        flux: String,
        /// Matched cooperativity override.
        #[arg(long)]
        coop: Option<f64>,
    },
}

#[derive(Args, Debug)]
struct GridArgs {
    /// P1 axis [dBm] as `start:stop:step` or a comma list.
    #[arg(long, allow_hyphen_values = true)]
    p1: Option<String>,
    /// P2 axis [dBm] as `start:stop:step` or a comma list.
    #[arg(long, allow_hyphen_values = true)]
    p2: Option<String>,
    /// Square cooperativity grid, log spaced, `start:stop:points`.
    #[arg(long, conflicts_with_all = ["p1", "p2", "product"])]
    coop: Option<String>,
    /// Constant product `C1 C2` along an anti-diagonal.
    #[arg(long, conflicts_with_all = ["p1", "p2"])]
    product: Option<f64>,
    /// Ratios `C1 / C2` for --product, log spaced `start:stop:points`.
    #[arg(long, default_value = "0.1:10:21")]
    ratios: String,
}

#[derive(Args, Debug)]
struct FitArgs {
    #[arg(value_parser = parse_model)]
    model: ForwardModel,
    /// Data file. For two-mode-eit, give it twice: window 1 then window 2.
    #[arg(long, required = true, num_args = 1..=2)]
    input: Vec<PathBuf>,
    /// Resonator index (1 or 2) for single-reflection data.
    #[arg(long, default_value_t = 1)]
    resonator: usize,
    /// Reference drive photon number for power-law fits; defaults to the geometric mean.
    #[arg(long)]
    reference_n: Option<f64>,
}

#[derive(Args, Debug)]
struct CoolArgs {
    /// Resonator carrying the cooling tone (1 or 2).
    #[arg(long, default_value_t = 1)]
    resonator: usize,
    /// Applied powers [dBm], `start:stop:step` or a comma list.
    #[arg(long, default_value = "-30:4:2", allow_hyphen_values = true)]
    powers: String,
}

#[derive(Args, Debug)]
struct NoiseArgs {
    /// Power pair `P1,P2` [dBm]; repeatable. Defaults to the configured drives.
    #[arg(long, value_delimiter = ',', action = clap::ArgAction::Append, allow_hyphen_values = true)]
    powers: Vec<f64>,
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// single-reflection-1|2, eit-1|2 or conversion.
    #[arg(long)]
    model: String,
    /// Signal-to-noise ratio [dB] relative to the mean clean power.
    #[arg(long, conflicts_with = "sigma")]
    snr_db: Option<f64>,
    /// Absolute noise amplitude per point.
    #[arg(long)]
    sigma: Option<f64>,
    /// Number of grid points on the default grid.
    #[arg(long)]
    points: Option<usize>,
}

fn parse_model(s: &str) -> std::result::Result<ForwardModel, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// `start:stop:step` (linear, inclusive) or a comma-separated list.
fn parse_values(s: &str, spacing: Spacing) -> Result<Vec<f64>> {
    let num = |t: &str| {
        t.trim()
            .parse::<f64>()
            .map_err(|_| Error::InvalidInput(format!("cannot parse {t:?} as a number")))
    };
    let parts: Vec<&str> = s.split(':').collect();
    match (parts.len(), spacing) {
        (3, Spacing::Log) => {
            let n = parts[2]
                .trim()
                .parse::<usize>()
                .map_err(|_| Error::InvalidInput(format!("bad point count in {s:?}")))?;
            Axis::with_points("axis", num(parts[0])?, num(parts[1])?, n, Spacing::Log).values()
        }
        (3, _) => Axis::with_step("axis", num(parts[0])?, num(parts[1])?, num(parts[2])?, spacing)
            .values(),
        (1, _) => s.split(',').map(num).collect(),
        _ => Err(Error::InvalidInput(format!("cannot parse range {s:?}"))),
    }
}

struct Ctx {
    config: DeviceConfig,
    config_source: String,
    out: PathBuf,
    seed: Option<u64>,
}

impl Ctx {
    fn metadata(&self, command: &str, args: Value) -> Result<Metadata> {
        let config = serde_json::to_value(&self.config).map_err(|e| Error::Format(e.to_string()))?;
        let mut m = Metadata::new(
            command,
            json!({ "config_source": self.config_source, "config": config, "args": args }),
        );
        if let Some(s) = self.seed {
            m = m.with_seed(s);
        }
        Ok(m)
    }

    fn write_table(&self, name: &str, table: &Table, meta: &Metadata) -> Result<PathBuf> {
        let path = self.out.join(name);
        table.write_csv(&path)?;
        meta.write(&sidecar_path(&path, "meta"))?;
        Ok(path)
    }
}

fn with_path(e: Error, path: &Path) -> Error {
    match e {
        Error::Io(io) => Error::Io(std::io::Error::new(io.kind(), format!("{}: {io}", path.display()))),
        other => other,
    }
}

fn report(path: &Path) {
    println!("wrote {}", path.display());
}

fn run(cli: Cli) -> Result<()> {
    let Format::Csv = cli.format;
    let (config, config_source) = match &cli.config {
        Some(p) => (
            DeviceConfig::from_file(p).map_err(|e| with_path(e, p))?,
            p.display().to_string(),
        ),
        None => (DeviceConfig::preset(&cli.preset)?, format!("preset:{}", cli.preset)),
    };
    std::fs::create_dir_all(&cli.out)?;
    let ctx = Ctx {
        config,
        config_source,
        out: cli.out.clone(),
        seed: cli.seed,
    };
    match cli.command {
        Command::Simulate(a) => simulate(&ctx, a),
        Command::Sweep(s) => sweep(&ctx, s),
        Command::Fit(a) => fit(&ctx, a),
        Command::Cool(a) => cool(&ctx, a),
        Command::Noise(a) => noise(&ctx, a),
        Command::Synth(a) => synth(&ctx, a),
        Command::ShowConfig => {
            print!("{}", ctx.config.to_toml_string()?);
            Ok(())
        }
    }
}

fn simulate(ctx: &Ctx, a: SimulateArgs) -> Result<()> {
    let cfg = match &a.coop {
        Some(c) => ctx.config.with_cooperativities([c[0], c[1]]),
        None => ctx.config.clone(),
    };
    if a.points < 2 || !(a.span > 0.0) {
        return Err(Error::InvalidInput("need points >= 2 and span > 0".into()));
    }
    let res = cfg.resonators()?;
    let mech = cfg.mechanics()?;
    let st = cfg.state()?;
    let half = a.span * st.total_linewidth;
    let delta = linspace(-half, half, a.points);
    let s: Vec<_> = delta
        .iter()
        .map(|&d| langevin_smatrix(&res, &mech, &st, mech.omega_m + d))
        .collect::<Result<_>>()?;
    let freq: Vec<f64> = delta.iter().map(|d| d / std::f64::consts::TAU).collect();
    let meta = ctx
        .metadata("simulate", json!({ "span": a.span, "points": a.points, "coop": st.coop }))?
        .with_note("freq_hz is the signal detuning from the mechanical resonance");
    for (port, (i, j)) in [(Port::S11, (0, 0)), (Port::S22, (1, 1)), (Port::S21, (1, 0)), (Port::S12, (0, 1))] {
        let values: Vec<Complex64> = s.iter().map(|m| m[(i, j)]).collect();
        let spec = ComplexSpectrum::new(freq.clone(), values, port)?;
        let path = ctx.out.join(format!("simulate_{}.csv", port.as_str().to_lowercase()));
        write_complex_spectrum(&path, &spec)?;
        meta.write(&sidecar_path(&path, "meta"))?;
        report(&path);
    }
    Ok(())
}

fn sweep(ctx: &Ctx, s: SweepCommand) -> Result<()> {
    match s {
        SweepCommand::Grid(g) => {
            let spec = grid_spec(ctx, &g)?;
            let rows = run_cooperativity_grid(&ctx.config, &spec)?;
            let meta = ctx.metadata("sweep grid", json!({ "grid": format!("{spec:?}") }))?;
            report(&ctx.write_table("grid.csv", &grid_table(&rows), &meta)?);
        }
        SweepCommand::Bandwidth { coop } => {
            let rows = run_bandwidth_sweep(&ctx.config, &coop)?;
            let failed = rows.iter().filter(|r| r.error.is_some()).count();
            let mut meta = ctx.metadata("sweep bandwidth", json!({ "coop": coop }))?;
            if failed > 0 {
                meta = meta.with_note(format!("{failed} Lorentzian fits failed"));
            }
            report(&ctx.write_table("bandwidth.csv", &bandwidth_table(&rows), &meta)?);
        }
        SweepCommand::DynamicRange { flux, coop } => {
            let fluxes = parse_values(&flux, Spacing::Log)?;
            let cfg = match coop {
                Some(c) => ctx.config.with_cooperativities([c, c]),
                None => ctx.config.clone(),
            };
            let dr = run_dynamic_range(&cfg, &fluxes)?;
            let mut meta = ctx.metadata(
                "sweep dynamic-range",
                json!({ "flux": fluxes, "coop": dr.coop, "efficiency": dr.efficiency, "band": dr.band }),
            )?;
            for n in &dr.notes {
                meta = meta.with_note(n.clone());
            }
            report(&ctx.write_table("dynamic_range.csv", &dynamic_range_table(&dr), &meta)?);
        }
    }
    Ok(())
}

fn grid_spec(ctx: &Ctx, g: &GridArgs) -> Result<GridSpec> {
    if let Some(c) = &g.coop {
        let v = parse_values(c, Spacing::Log)?;
        return Ok(GridSpec::Cooperativity { c1: v.clone(), c2: v });
    }
    if let Some(product) = g.product {
        return Ok(GridSpec::ConstantProduct {
            product,
            ratios: parse_values(&g.ratios, Spacing::Log)?,
        });
    }
    let from_config = |name: &str| {
        ctx.config
            .sweep
            .as_ref()
            .and_then(|s| s.axis(name))
            .map(Axis::values)
            .transpose()
    };
    if g.p1.is_none() && g.p2.is_none() {
        if let (Some(c1), Some(c2)) = (from_config("C1")?, from_config("C2")?) {
            return Ok(GridSpec::Cooperativity { c1, c2 });
        }
    }
    let GridSpec::Power { p1: d1, p2: d2 } = GridSpec::measured_powers() else {
        unreachable!()
    };
    let axis = |arg: &Option<String>, name: &str, default: Vec<f64>| -> Result<Vec<f64>> {
        match arg {
            Some(s) => parse_values(s, Spacing::Db),
            None => Ok(from_config(name)?.unwrap_or(default)),
        }
    };
    Ok(GridSpec::Power {
        p1: axis(&g.p1, "P1", d1)?,
        p2: axis(&g.p2, "P2", d2)?,
    })
}

fn fit_table(fit: &FitResult) -> Table {
    let mut t = Table::new(["name", "value", "stderr", "active"]);
    for (k, name) in fit.names.iter().enumerate() {
        t.push(vec![
            name.as_str().into(),
            fit.values[k].into(),
            fit.stderr(name).unwrap_or(f64::NAN).into(),
            fit.active[k].into(),
        ]);
    }
    for (name, v) in &fit.derived {
        t.push(vec![name.as_str().into(), (*v).into(), Cell::Float(f64::NAN), false.into()]);
    }
    t
}

fn resonator_index(r: usize) -> Result<usize> {
    match r {
        1 | 2 => Ok(r - 1),
        _ => Err(Error::InvalidInput(format!("resonator must be 1 or 2, got {r}"))),
    }
}

fn fit(ctx: &Ctx, a: FitArgs) -> Result<()> {
    let expect_inputs = if a.model == ForwardModel::TwoModeEit { 2 } else { 1 };
    if a.input.len() != expect_inputs {
        return Err(Error::InvalidInput(format!(
            "{} expects {expect_inputs} input file(s)",
            a.model.as_str()
        )));
    }
    let result = match a.model {
        ForwardModel::SingleReflection => {
            let i = resonator_index(a.resonator)?;
            let spec = read_complex_spectrum(&a.input[0], Port::reflection(i)).map_err(|e| with_path(e, &a.input[0]))?;
            fit_single_reflection(&FitProblem::new(spec))?
        }
        ForwardModel::TwoModeEit => {
            let drives = ctx.config.drives()?;
            let cal = ctx.config.calibrations()?;
            let window = |i: usize| -> Result<EitWindow> {
                Ok(EitWindow {
                    spectrum: read_complex_spectrum(&a.input[i], Port::reflection(i))
                        .map_err(|e| with_path(e, &a.input[i]))?,
                    drive_omega: drives[i].omega_d,
                    calibration: cal[i],
                })
            };
            let data = EitData {
                resonators: ctx.config.resonators()?,
                windows: [window(0)?, window(1)?],
            };
            fit_two_mode_eit(&FitProblem::new(data))?
        }
        ForwardModel::Lorentzian => {
            let spec = read_power_spectrum(&a.input[0]).map_err(|e| with_path(e, &a.input[0]))?;
            fit_lorentzian(&FitProblem::new(spec))?
        },
        ForwardModel::PowerLaw => {
            let (x, y) = parse_power_law(
                &std::fs::read_to_string(&a.input[0]).map_err(|e| with_path(e.into(), &a.input[0]))?,
            )?;
            let data = match a.reference_n {
                Some(r) => PowerLawData::with_reference(x, y, r)?,
                None => PowerLawData::new(x, y)?,
            };
            fit_power_law(&FitProblem::new(data))?
        }
    };
    let inputs: Vec<String> = a.input.iter().map(|p| p.display().to_string()).collect();
    let mut meta = ctx.metadata(
        "fit",
        json!({
            "model": a.model.as_str(),
            "inputs": inputs,
            "converged": result.converged,
            "termination": format!("{:?}", result.termination),
            "iterations": result.iterations,
            "evaluations": result.evaluations,
            "residual_norm": result.residual_norm,
        }),
    )?;
    if !result.converged {
        meta = meta.with_note("fit did not converge; values are the last iterate");
        eprintln!("warning: fit did not converge ({:?})", result.termination);
    }
    let name = format!("fit_{}.csv", a.model.as_str().replace('-', "_"));
    report(&ctx.write_table(&name, &fit_table(&result), &meta)?);
    Ok(())
}

fn cool(ctx: &Ctx, a: CoolArgs) -> Result<()> {
    let i = resonator_index(a.resonator)?;
    let powers = parse_values(&a.powers, Spacing::Db)?;
    let rows = run_cooling_curve(&ctx.config, i, &powers)?;
    let meta = ctx.metadata("cool", json!({ "resonator": a.resonator, "powers_dbm": powers }))?;
    report(&ctx.write_table(
        &format!("cooling_{}.csv", a.resonator),
        &cooling_table(&rows),
        &meta,
    )?);
    Ok(())
}

fn noise(ctx: &Ctx, a: NoiseArgs) -> Result<()> {
    let pairs: Vec<[f64; 2]> = if a.powers.is_empty() {
        vec![[ctx.config.drive1.power_dbm, ctx.config.drive2.power_dbm]]
    } else {
        if !a.powers.len().is_multiple_of(2) {
            return Err(Error::InvalidInput("--powers takes pairs P1,P2".into()));
        }
        a.powers.chunks(2).map(|c| [c[0], c[1]]).collect()
    };
    let rows = run_noise_budget(&ctx.config, &pairs)?;
    let mut meta = ctx.metadata(
        "noise",
        json!({ "powers_dbm": pairs, "threshold": ctx.config.noise.cooperativity_threshold }),
    )?;
    let out_of_regime = rows.iter().filter(|r| !r.in_regime).count();
    if out_of_regime > 0 {
        meta = meta.with_note(format!(
            "{out_of_regime} rows below the cooperativity threshold; added noise is not reliable there"
        ));
    }
    report(&ctx.write_table("noise.csv", &noise_table(&rows), &meta)?);
    Ok(())
}

fn synth(ctx: &Ctx, a: SynthArgs) -> Result<()> {
    let model: SynthModel = a.model.parse()?;
    let seed = ctx.seed.unwrap_or(0);
    let grid = match a.points {
        Some(n) => {
            let g = emconv_core::harness::synth::default_grid(&ctx.config, model)?;
            Some(linspace(g[0], g[g.len() - 1], n))
        }
        None => None,
    };
    let clean = synthesize_spectrum(&ctx.config, model, grid.clone(), NoiseSpec::NONE)?;
    let noise = match (a.snr_db, a.sigma) {
        (Some(snr), _) => {
            let p = clean.spectrum.value.iter().map(|v| v.norm_sqr()).sum::<f64>()
                / clean.spectrum.len() as f64;
            NoiseSpec::from_snr_db(snr, p, seed)?
        }
        (None, Some(sigma)) => NoiseSpec::new(sigma, seed)?,
        (None, None) => NoiseSpec { sigma: 0.0, seed },
    };
    let out = synthesize_spectrum(&ctx.config, model, grid, noise)?;
    let path = ctx.out.join(format!("synth_{}.csv", model.id().replace('-', "_")));
    write_complex_spectrum(&path, &out.spectrum)?;
    let meta = ctx
        .metadata(
            "synth",
            json!({ "model": model.id(), "snr_db": a.snr_db, "sigma": noise.sigma, "points": out.spectrum.len() }),
        )?
        .with_seed(seed);
    meta.write(&sidecar_path(&path, "meta"))?;
    let mut truth = serde_json::to_string_pretty(&out.truth).map_err(|e| Error::Format(e.to_string()))?;
    truth.push('\n');
    std::fs::write(sidecar_path(&path, "truth"), truth)?;
    report(&path);
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 10,
        Error::InvalidInput(_) => 11,
        Error::Format(_) => 12,
        Error::Io(_) => 13,
        Error::Singular { .. } => 14,
        Error::Initialization(_) => 15,
        Error::Unidentifiable(_) => 16,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!(
                "{}",
                json!({ "error": e.category(), "message": e.to_string() })
            );
            ExitCode::from(exit_code(&e))
        }
    }
}
