use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use blindcfo::crb::crb_f;
use blindcfo::harness::trial::{channel_seed, noise_seed};
use blindcfo::harness::{run_trial, sweep, ExperimentConfig};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "blindcfo", version, about = "Blind multi-user CFO estimation simulator")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML experiment config; defaults are used when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file (stdout when omitted).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Master seed, overrides the config value.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for the trial pool.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one trial of the first grid cell and dump its internals.
    Simulate {
        #[arg(long, default_value_t = 0)]
        channel: u64,
        #[arg(long, default_value_t = 0)]
        mc: u64,
    },
    /// Run the whole grid and write one CSV row per trial and user.
    Sweep {
        /// Also write a per-cell gnuplot table here.
        #[arg(long)]
        plot: Option<PathBuf>,
    },
    /// Write the CFO bound for every cell, channel and user.
    Crb,
}

type AnyResult<T> = Result<T, Box<dyn std::error::Error>>;

fn output(path: &Option<PathBuf>) -> AnyResult<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn load_config(common: &Common) -> AnyResult<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::from_path(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn fmt_list(xs: &[f64]) -> String {
    xs.iter().map(|x| format!("{x:.6e}")).collect::<Vec<_>>().join(" ")
}

fn simulate(cfg: &ExperimentConfig, channel: u64, mc: u64, out: &mut dyn Write) -> AnyResult<()> {
    let cell = cfg.cells()[0];
    let ch_seed = channel_seed(cfg.seed, channel);
    let params = cell.scenario(ch_seed)?;
    let r = run_trial(&cell, ch_seed, noise_seed(cfg.seed, channel, mc))?;
    writeln!(out, "cell        K={} P={} N={} snr_db={}", cell.k, cell.p, cell.n, cell.snr_db)?;
    writeln!(out, "seeds       master={} channel={} mc={}", cfg.seed, channel, mc)?;
    writeln!(out, "sigma2_w    {:.6e}", params.sigma2_w)?;
    for k in 0..cell.k {
        let a = params.a[k];
        writeln!(out, "user {k}      a=({:+.6}, {:+.6}) tau={:.6}", a.re, a.im, params.tau[k])?;
    }
    writeln!(out, "f_true      {}", fmt_list(&r.f_true))?;
    writeln!(out, "f_hat       {}", fmt_list(&r.f_hat))?;
    writeln!(out, "f_hat_pll   {}", fmt_list(&r.f_hat_pll))?;
    match crb_f(&params, cell.n) {
        Ok(b) => writeln!(out, "crb_f       {}", fmt_list(&b))?,
        Err(e) => writeln!(out, "crb_f       undefined ({e})")?,
    }
    writeln!(out, "mse_cfo     {:.6e}", r.mse_cfo)?;
    writeln!(out, "mse_cfo_pll {:.6e}", r.mse_cfo_pll)?;
    writeln!(out, "ber         {:.6e} ({})", r.ber, fmt_list(&r.ber_per_user))?;
    writeln!(out, "flags       {}", if r.flags.label().is_empty() { "-".into() } else { r.flags.label() })?;
    Ok(())
}

fn crb_table(cfg: &ExperimentConfig, out: &mut dyn Write) -> AnyResult<()> {
    writeln!(out, "K,P,N,snr_db,channel_id,user,crb_f")?;
    for cell in cfg.cells() {
        for ch in 0..cfg.n_channels as u64 {
            let params = cell.scenario(channel_seed(cfg.seed, ch))?;
            let bound = crb_f(&params, cell.n).unwrap_or_else(|_| vec![f64::NAN; cell.k]);
            for (k, b) in bound.iter().enumerate() {
                writeln!(out, "{},{},{},{:.16e},{ch},{k},{b:.16e}", cell.k, cell.p, cell.n, cell.snr_db)?;
            }
        }
    }
    Ok(())
}

fn run(cli: Cli) -> AnyResult<()> {
    if let Some(n) = cli.common.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let cfg = load_config(&cli.common)?;
    let mut out = output(&cli.common.out)?;
    match cli.command {
        Command::Simulate { channel, mc } => simulate(&cfg, channel, mc, &mut out)?,
        Command::Sweep { plot } => {
            let res = sweep(&cfg)?;
            res.write_csv(&mut out)?;
            if let Some(path) = plot {
                res.write_plot_data(BufWriter::new(File::create(path)?))?;
            }
        }
        Command::Crb => crb_table(&cfg, &mut out)?,
    }
    out.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
