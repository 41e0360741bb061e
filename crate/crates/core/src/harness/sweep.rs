//! Grid sweeps: every cell runs `n_channels x n_mc` trials in parallel.

use std::io::Write;

use rayon::prelude::*;

use crate::crb::crb_f;
use crate::error::{Error, Result};
use crate::harness::config::{Cell, ExperimentConfig};
use crate::harness::trial::{channel_seed, noise_seed, run_trial_on, TrialResult};

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub cell: usize,
    pub channel_id: usize,
    pub mc_id: usize,
    pub result: TrialResult,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellSummary {
    pub cell: Cell,
    pub trials: usize,
    /// Trials entering the MSE averages.
    pub mse_trials: usize,
    pub separation_failures: usize,
    pub lock_failure_trials: usize,
    pub mse_cfo: f64,
    pub mse_cfo_pll: f64,
    pub ber: f64,
    /// `P^2` times the mean CFO bound, on the same scale as `mse_cfo`; NaN when noiseless.
    pub crb: f64,
}

impl CellSummary {
    /// `crb_f` holds one per-user bound vector per channel.
    pub fn from_trials(cell: Cell, trials: &[TrialResult], crb_f: &[Vec<f64>]) -> Self {
        let kept: Vec<&TrialResult> = trials.iter().filter(|t| !t.flags.excluded_from_mse()).collect();
        let mean = |xs: &mut dyn Iterator<Item = f64>| {
            let (s, c) = xs.fold((0.0, 0usize), |(s, c), x| (s + x, c + 1));
            if c == 0 { f64::NAN } else { s / c as f64 }
        };
        let p2 = (cell.p * cell.p) as f64;
        CellSummary {
            cell,
            trials: trials.len(),
            mse_trials: kept.len(),
            separation_failures: trials.iter().filter(|t| t.flags.separation_failed).count(),
            lock_failure_trials: trials.iter().filter(|t| t.flags.lock_failure).count(),
            mse_cfo: mean(&mut kept.iter().map(|t| t.mse_cfo)),
            mse_cfo_pll: mean(&mut kept.iter().map(|t| t.mse_cfo_pll)),
            ber: mean(&mut trials.iter().map(|t| t.ber)),
            crb: p2 * mean(&mut crb_f.iter().flatten().copied()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub cells: Vec<Cell>,
    /// Ordered by cell, then channel, then Monte-Carlo run.
    pub records: Vec<TrialRecord>,
    /// `crb_f[cell][channel][user]`, NaN when the bound is undefined.
    pub crb_f: Vec<Vec<Vec<f64>>>,
    pub summaries: Vec<CellSummary>,
}

pub const CSV_HEADER: [&str; 14] = [
    "method", "K", "P", "N", "snr_db", "channel_id", "mc_id", "user", "f_true", "f_hat", "mse_cfo", "ber", "crb_f",
    "flags",
];

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn sweep(cfg: &ExperimentConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let cells = cfg.cells();
    if cells.is_empty() {
        return Err(Error::EmptySweep);
    }
    let (n_ch, n_mc) = (cfg.n_channels, cfg.n_mc);

    let scenarios: Vec<Vec<_>> = cells
        .iter()
        .map(|cell| (0..n_ch).map(|ch| cell.scenario(channel_seed(cfg.seed, ch as u64))).collect::<Result<_>>())
        .collect::<Result<_>>()?;

    let crb: Vec<Vec<Vec<f64>>> = cells
        .par_iter()
        .zip(&scenarios)
        .map(|(cell, chans)| {
            chans
                .iter()
                .map(|params| crb_f(params, cell.n).unwrap_or_else(|_| vec![f64::NAN; cell.k]))
                .collect()
        })
        .collect();

    let jobs: Vec<(usize, usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..n_ch).flat_map(move |ch| (0..n_mc).map(move |mc| (c, ch, mc))))
        .collect();
    let outcomes: Vec<Result<TrialRecord>> = jobs
        .par_iter()
        .map(|&(c, ch, mc)| {
            let result = run_trial_on(&scenarios[c][ch], &cells[c], noise_seed(cfg.seed, ch as u64, mc as u64))?;
            Ok(TrialRecord { cell: c, channel_id: ch, mc_id: mc, result })
        })
        .collect();
    let records = outcomes.into_iter().collect::<Result<Vec<_>>>()?;

    let per_cell = n_ch * n_mc;
    let summaries = cells
        .iter()
        .enumerate()
        .map(|(c, cell)| {
            let trials: Vec<TrialResult> =
                records[c * per_cell..(c + 1) * per_cell].iter().map(|r| r.result.clone()).collect();
            CellSummary::from_trials(*cell, &trials, &crb[c])
        })
        .collect();
    Ok(SweepResult { cells, records, crb_f: crb, summaries })
}

impl SweepResult {
    /// One row per trial and user; `mse_cfo` and `ber` are that user's contribution.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(CSV_HEADER).map_err(csv_err)?;
        for rec in &self.records {
            let cell = &self.cells[rec.cell];
            let r = &rec.result;
            let flags = r.flags.label();
            for k in 0..cell.k {
                w.write_record([
                    "blind".to_string(),
                    cell.k.to_string(),
                    cell.p.to_string(),
                    cell.n.to_string(),
                    num(cell.snr_db),
                    rec.channel_id.to_string(),
                    rec.mc_id.to_string(),
                    k.to_string(),
                    num(r.f_true[k]),
                    num(r.f_hat[k]),
                    num(r.user_error(k, cell.p)),
                    num(r.ber_per_user[k]),
                    num(self.crb_f[rec.cell][rec.channel_id][k]),
                    flags.clone(),
                ])
                .map_err(csv_err)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Whitespace-separated per-cell table for gnuplot.
    pub fn write_plot_data<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# K P N snr_db mse_cfo mse_cfo_pll ber crb trials mse_trials separation_failures lock_failures")?;
        for s in &self.summaries {
            let c = &s.cell;
            writeln!(
                out,
                "{} {} {} {} {} {} {} {} {} {} {} {}",
                c.k,
                c.p,
                c.n,
                c.snr_db,
                num(s.mse_cfo),
                num(s.mse_cfo_pll),
                num(s.ber),
                num(s.crb),
                s.trials,
                s.mse_trials,
                s.separation_failures,
                s.lock_failure_trials
            )?;
        }
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.into())
}
