use feedcap_core::mac_code;
use feedcap_core::p2p::{self, Spectrum, ZpkFilter};
use feedcap_core::riccati::dare_circulant;
use feedcap_core::sum_capacity::{self as sc, MacParams, DEFAULT_PHI_TOL};
use feedcap_core::LogBase;
use rayon::prelude::*;

use crate::args::{SweepArgs, SweepAxis};
use crate::commands::{CliError, CliResult};

pub const SWEEP_HEADER: [&str; 8] = ["N", "P", "phi", "rho", "sum_capacity", "beta", "G_jj", "error"];

#[derive(Debug, Default)]
struct Row {
    n: usize,
    p: f64,
    phi: Option<f64>,
    rho: Option<f64>,
    cap: Option<f64>,
    beta: Option<f64>,
    g: Option<f64>,
    error: String,
}

fn evaluate(n: usize, p: f64) -> Row {
    let mut row = Row { n, p, ..Row::default() };
    let result = (|| -> feedcap_core::Result<()> {
        let params = MacParams::new(n, p)?.with_base(LogBase::Bits);
        let s = sc::solve_phi(&params, DEFAULT_PHI_TOL)?;
        row.phi = Some(s.phi);
        row.rho = Some(s.rho);
        row.cap = Some(s.c1);
        let beta = mac_code::beta_for_power(n, p)?;
        row.beta = Some(beta);
        row.g = Some(dare_circulant(n, beta)?.control_form()[(0, 0)].re);
        Ok(())
    })();
    if let Err(e) = result {
        row.error = e.to_string();
    }
    row
}

/// Grid points of the sweep, ascending.
pub fn grid(a: &SweepArgs) -> CliResult<Vec<(usize, f64)>> {
    if !(a.from.is_finite() && a.to.is_finite()) {
        return Err(CliError::usage("--from and --to must be finite"));
    }
    if a.from > a.to {
        return Ok(Vec::new());
    }
    Ok(match a.over {
        SweepAxis::Power => {
            let mut ps: Vec<f64> = match a.count {
                0 => Vec::new(),
                1 => vec![a.from],
                c => (0..c).map(|i| a.from + (a.to - a.from) * i as f64 / (c - 1) as f64).collect(),
            };
            ps.sort_by(f64::total_cmp);
            ps.into_iter().map(|p| (a.n, p)).collect()
        }
        SweepAxis::N => {
            let lo = a.from.ceil().max(0.0) as usize;
            let hi = a.to.floor().max(0.0) as usize;
            (lo..=hi).filter(|_| a.to >= 0.0).map(|n| (n, a.power)).collect()
        }
    })
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.12e}")).unwrap_or_default()
}

pub fn sweep(a: &SweepArgs) -> CliResult<String> {
    let rows: Vec<Row> = grid(a)?.into_par_iter().map(|(n, p)| evaluate(n, p)).collect();
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| CliError { code: 3, message: e.to_string() };
    w.write_record(SWEEP_HEADER).map_err(io)?;
    for r in rows {
        w.write_record([
            r.n.to_string(),
            format!("{:.12e}", r.p),
            cell(r.phi),
            cell(r.rho),
            cell(r.cap),
            cell(r.beta),
            cell(r.g),
            r.error,
        ])
        .map_err(io)?;
    }
    finish(w)
}

fn finish(w: csv::Writer<Vec<u8>>) -> CliResult<String> {
    let bytes = w.into_inner().map_err(|e| CliError { code: 3, message: e.to_string() })?;
    String::from_utf8(bytes).map_err(|e| CliError { code: 3, message: e.to_string() })
}

/// `omega, |S|, S_Z, S_Y, log|S|` samples for plotting.
pub fn spectrum_csv(f: &ZpkFilter, s_z: &dyn Spectrum, points: usize) -> CliResult<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| CliError { code: 3, message: e.to_string() };
    w.write_record(["omega", "sensitivity", "noise_psd", "output_psd", "log_sensitivity"]).map_err(io)?;
    for s in p2p::spectrum_samples(f, s_z, points.max(2)) {
        w.write_record([s.omega, s.sensitivity, s.noise_psd, s.output_psd, s.log_sensitivity].map(|v| format!("{v:.12e}")))
            .map_err(io)?;
    }
    finish(w)
}
