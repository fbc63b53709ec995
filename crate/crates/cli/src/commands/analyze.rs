use clap::Args;
use serde::Serialize;

use tslif_core::analysis::{
    bode_rows, stability, sweep_stability_region, transfer_functions, two_compartment_stability,
    two_compartment_transfer_functions, BodeRow, StabilityReport,
};

use crate::params::{self, Model, ParamFlags, ParamSummary};
use crate::{CliError, Run};

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    params: ParamFlags,
    /// Frequency points on [0, pi].
    #[arg(long)]
    points: Option<usize>,
    /// Also write the response as bode.csv.
    #[arg(long)]
    bode: bool,
    /// Sweep beta1*beta2 at the configured alpha1/alpha2 into sweep.csv.
    #[arg(long)]
    sweep: bool,
    #[arg(long, allow_negative_numbers = true)]
    bp_min: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    bp_max: Option<f64>,
    #[arg(long)]
    bp_points: Option<usize>,
}

#[derive(Serialize)]
struct Analysis {
    params: ParamSummary,
    eigenvalues: [[f64; 2]; 2],
    spectral_radius: f64,
    verdict: &'static str,
    transfer: Transfer,
    response: Vec<BodeRow>,
}

#[derive(Serialize)]
struct Transfer {
    num_d: [f64; 2],
    num_s: [f64; 2],
    den: [f64; 3],
}

fn grid(run: &Run, a: &AnalyzeArgs) -> Result<Vec<f64>, CliError> {
    let s = &run.settings;
    let lo = s.f64("bp_min", a.bp_min)?.unwrap_or(-4.0);
    let hi = s.f64("bp_max", a.bp_max)?.unwrap_or(2.0);
    let n = s.usize("bp_points", a.bp_points)?.unwrap_or(100);
    if n < 2 || !(hi > lo) {
        return Err(CliError::Usage(format!(
            "sweep needs bp_points >= 2 and bp_max > bp_min, got {n} points on [{lo}, {hi}]"
        )));
    }
    Ok((0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect())
}

pub fn run(run: &Run, a: AnalyzeArgs) -> Result<(), CliError> {
    let (preset, model) = params::resolve(&run.settings, &a.params)?;
    let points = run.settings.usize("points", a.points)?.unwrap_or(64);
    let bode = run.settings.bool("bode", a.bode.then_some(true))?.unwrap_or(false);
    let sweep = run.settings.bool("sweep", a.sweep.then_some(true))?.unwrap_or(false);
    let grid = if sweep { Some(grid(run, &a)?) } else { None };
    run.settings.finish()?;
    if points < 2 {
        return Err(CliError::Usage(format!("--points must be at least 2, got {points}")));
    }

    let (report, (h_d, h_s), (a1, a2)): (StabilityReport, _, _) = match &model {
        Model::Tslif(p) => (stability(p), transfer_functions(p), (p.alpha1(), p.alpha2())),
        Model::Tclif(p) => (
            two_compartment_stability(p),
            two_compartment_transfer_functions(p),
            (p.alpha1, p.alpha2),
        ),
    };
    let response = bode_rows(&h_d, &h_s, points)?;
    let analysis = Analysis {
        params: model.summary(&preset),
        eigenvalues: [
            [report.lambda1.re, report.lambda1.im],
            [report.lambda2.re, report.lambda2.im],
        ],
        spectral_radius: report.spectral_radius,
        verdict: report.verdict.as_str(),
        transfer: Transfer {
            num_d: h_d.num,
            num_s: h_s.num,
            den: h_d.den,
        },
        response,
    };
    run.out.write_json("analysis.json", &analysis)?;
    if bode {
        let mut text = String::from("omega,mag_d,phase_d,mag_s,phase_s\n");
        for r in &analysis.response {
            text.push_str(&format!("{},{},{},{},{}\n", r.omega, r.mag_d, r.phase_d, r.mag_s, r.phase_s));
        }
        run.out.write("bode.csv", text)?;
    }
    if let Some(grid) = grid {
        let rows = sweep_stability_region(a1, a2, &grid).map_err(|e| CliError::Usage(e.to_string()))?;
        let mut text = String::from("beta_product,spectral_radius,verdict\n");
        for r in &rows {
            text.push_str(&format!("{},{},{}\n", r.beta_product, r.spectral_radius, r.verdict.as_str()));
        }
        run.out.write("sweep.csv", text)?;
    }
    println!(
        "{}: eigenvalues {}{:+}i, {}{:+}i; spectral radius {}; {}",
        model.name(),
        report.lambda1.re,
        report.lambda1.im,
        report.lambda2.re,
        report.lambda2.im,
        report.spectral_radius,
        report.verdict.as_str()
    );
    Ok(())
}
