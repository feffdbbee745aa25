use anyhow::{bail, Result};
use serde::{Deserialize, Serialize};

use tilted_core::certify::phase_diagram;
use tilted_core::experiments::{
    gmm_sweep, ising_experiment, iterated_instance, iterated_transport, phi4_acf, Design, GmmSweepConfig,
    IsingConfig, IteratedConfig, IteratedPrior, IteratedReport, Method, Phi4Config,
};

use crate::run::{Criterion, RunDir};

// ---------------------------------------------------------------- gmm-sweep

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct GmmChecks {
    /// Boosted Langevin median below plain Langevin at every SNR.
    pub boost_beats_plain: bool,
    pub max_median_sw: Option<f64>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct GmmCmd {
    pub run: GmmSweepConfig,
    pub checks: GmmChecks,
}

impl GmmCmd {
    pub fn large_scale() -> Self {
        let mut c = Self::default();
        c.run.d = 20;
        c.run.design = Design::Conditioned { kappa: 20.0, snrs: vec![1e-5, 1e-4, 1e-3, 1e-2, 1e-1] };
        c.run.method.n_samples = 10_000;
        c
    }
}

#[derive(Serialize)]
struct GmmSummaryRow {
    d: usize,
    snr: f64,
    method: Method,
    sw_median: f64,
    sw_p25: f64,
    sw_p75: f64,
    sw_mean: f64,
    sw_std: f64,
    n_ok: usize,
    n_failed: usize,
}

#[derive(Serialize)]
struct GmmInstanceRow {
    d: usize,
    snr: f64,
    method: Method,
    instance: usize,
    sw: f64,
}

pub fn gmm(cmd: &GmmCmd, out: &mut RunDir) -> Result<Vec<Criterion>> {
    let rows = gmm_sweep(&cmd.run)?;
    let summary: Vec<GmmSummaryRow> = rows
        .iter()
        .map(|r| GmmSummaryRow {
            d: r.d,
            snr: r.snr,
            method: r.method,
            sw_median: r.sw_median,
            sw_p25: r.sw_p25,
            sw_p75: r.sw_p75,
            sw_mean: r.sw_mean,
            sw_std: r.sw_std,
            n_ok: r.n_ok,
            n_failed: r.n_failed,
        })
        .collect();
    let per: Vec<GmmInstanceRow> = rows
        .iter()
        .flat_map(|r| {
            r.sw.iter()
                .enumerate()
                .map(move |(i, &sw)| GmmInstanceRow { d: r.d, snr: r.snr, method: r.method, instance: i, sw })
        })
        .collect();
    out.write_csv("sweep.csv", &summary)?;
    out.write_csv("instances.csv", &per)?;

    let mut crit = Vec::new();
    if cmd.checks.boost_beats_plain {
        let mut ok = true;
        let mut parts = Vec::new();
        for r in rows.iter().filter(|r| r.method == Method::BoostedLangevin) {
            let Some(p) = rows.iter().find(|p| p.method == Method::Langevin && p.snr == r.snr) else {
                bail!("boost_beats_plain needs both langevin and boosted_langevin");
            };
            ok &= r.sw_median < p.sw_median;
            parts.push(format!("snr {:e}: {:.4} vs {:.4}", r.snr, r.sw_median, p.sw_median));
        }
        crit.push(Criterion::new("boost_beats_plain", ok, parts.join("; ")));
    }
    if let Some(tol) = cmd.checks.max_median_sw {
        let worst = rows.iter().map(|r| r.sw_median).fold(f64::NEG_INFINITY, f64::max);
        crit.push(Criterion::new("max_median_sw", worst <= tol, format!("worst median {worst:.4}, tol {tol}")));
    }
    Ok(crit)
}

// ---------------------------------------------------------------- phi4-acf

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct Phi4Checks {
    /// Betas at which the boosted chain must decorrelate faster with
    /// non-overlapping intervals.
    pub accelerated_betas: Vec<f64>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct Phi4Cmd {
    pub run: Phi4Config,
    pub checks: Phi4Checks,
}

impl Phi4Cmd {
    pub fn large_scale() -> Self {
        let mut c = Self::default();
        c.run.l = 128;
        c.run.n_steps = 100_000;
        c
    }
}

#[derive(Serialize)]
struct IatRow {
    beta: f64,
    variant: String,
    t: f64,
    iat: f64,
    lo: f64,
    hi: f64,
    certified: bool,
}

#[derive(Serialize)]
struct AcfRow {
    beta: f64,
    variant: String,
    lag: usize,
    acf: f64,
}

pub fn phi4(cmd: &Phi4Cmd, out: &mut RunDir) -> Result<Vec<Criterion>> {
    let reports = phi4_acf(&cmd.run)?;
    let mut iat = Vec::new();
    let mut acf = Vec::new();
    for r in &reports {
        for v in [&r.plain, &r.boosted] {
            iat.push(IatRow {
                beta: r.beta,
                variant: v.variant.to_string(),
                t: v.t,
                iat: v.iat.iat,
                lo: v.iat.lo,
                hi: v.iat.hi,
                certified: r.certificate.passed,
            });
            for (&lag, &a) in v.acf.lags.iter().zip(&v.acf.acf) {
                acf.push(AcfRow { beta: r.beta, variant: v.variant.to_string(), lag, acf: a });
            }
        }
    }
    out.write_csv("iat.csv", &iat)?;
    out.write_csv("acf.csv", &acf)?;
    let certs: Vec<_> = reports.iter().map(|r| (r.beta, &r.certificate)).collect();
    out.write_json("certificates.json", &certs)?;

    let mut crit = Vec::new();
    for &beta in &cmd.checks.accelerated_betas {
        let Some(r) = reports.iter().find(|r| (r.beta - beta).abs() < 1e-12) else {
            bail!("beta {beta} is asserted but not simulated");
        };
        let (p, b) = (&r.plain.iat, &r.boosted.iat);
        crit.push(Criterion::new(
            &format!("accelerated_beta_{beta}"),
            r.accelerated(),
            format!("boosted {:.1} [{:.1}, {:.1}] vs plain {:.1} [{:.1}, {:.1}]", b.iat, b.lo, b.hi, p.iat, p.lo, p.hi),
        ));
    }
    Ok(crit)
}

// ---------------------------------------------------------------- ising

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct IsingChecks {
    pub max_tv: Option<f64>,
    pub require_certificate: bool,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct IsingCmd {
    pub run: IsingConfig,
    pub checks: IsingChecks,
}

pub fn ising(cmd: &IsingCmd, out: &mut RunDir) -> Result<Vec<Criterion>> {
    let r = ising_experiment(&cmd.run)?;
    out.write_json("report.json", &r)?;
    let mut crit = Vec::new();
    if let Some(tol) = cmd.checks.max_tv {
        crit.push(Criterion::new(
            "max_tv",
            r.tv < tol,
            format!("TV {:.4} (sampling floor {:.4}), tol {tol}", r.tv, r.tv_floor),
        ));
    }
    if cmd.checks.require_certificate {
        crit.push(Criterion::new(
            "certificate",
            r.certificate.passed,
            format!("chi {} vs rhs {:.4}", r.certificate.chi_value, r.certificate.rhs),
        ));
    }
    Ok(crit)
}

// ---------------------------------------------------------------- phase-diagram

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct PhasePreset {
    /// Radius of the component means.
    pub r: f64,
    /// Component variance.
    pub delta: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PhaseConfig {
    pub presets: Vec<PhasePreset>,
    pub snr_min: f64,
    pub snr_max: f64,
    pub n_snr: usize,
    pub kappa_min: f64,
    pub kappa_max: f64,
    pub n_kappa: usize,
}

impl Default for PhaseConfig {
    fn default() -> Self {
        Self {
            presets: vec![
                PhasePreset { r: 3.0, delta: 0.1 },
                PhasePreset { r: 2.0, delta: 0.05 },
                PhasePreset { r: 4.0, delta: 0.2 },
            ],
            snr_min: 1e-3,
            snr_max: 1e3,
            n_snr: 121,
            kappa_min: 1.05,
            kappa_max: 50.0,
            n_kappa: 100,
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct PhaseChecks {
    /// Some preset has a κ at which the certificate holds at both SNR
    /// extremes and fails in between.
    pub u_shaped: bool,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct PhaseCmd {
    pub run: PhaseConfig,
    pub checks: PhaseChecks,
}

#[derive(Serialize)]
struct PhaseRow {
    r: f64,
    delta: f64,
    snr: f64,
    snr_q: f64,
    kappa: f64,
    margin: f64,
}

fn log_grid(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0) || !(hi >= lo) || n == 0 {
        bail!("grid needs 0 < lo ≤ hi and n ≥ 1, got {lo}, {hi}, {n}");
    }
    if n == 1 {
        return Ok(vec![lo]);
    }
    let (a, b) = (lo.ln(), hi.ln());
    Ok((0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect())
}

pub fn phase(cmd: &PhaseCmd, out: &mut RunDir) -> Result<Vec<Criterion>> {
    let c = &cmd.run;
    let snrs = log_grid(c.snr_min, c.snr_max, c.n_snr)?;
    let kappas = log_grid(c.kappa_min, c.kappa_max, c.n_kappa)?;
    let mut rows = Vec::new();
    let mut u_presets = Vec::new();
    for p in &c.presets {
        let cells = phase_diagram(p.r, p.delta, &snrs, &kappas)?;
        let u = kappas.iter().any(|&k| {
            let signs: Vec<bool> = cells.iter().filter(|c| c.kappa == k).map(|c| c.margin > 0.0).collect();
            signs[0] && signs[signs.len() - 1] && signs.iter().any(|s| !s)
        });
        if u {
            u_presets.push(format!("(R={}, δ={})", p.r, p.delta));
        }
        rows.extend(cells.into_iter().map(|cell| PhaseRow {
            r: p.r,
            delta: p.delta,
            snr: cell.snr,
            snr_q: cell.snr_q,
            kappa: cell.kappa,
            margin: cell.margin,
        }));
    }
    out.write_csv("phase.csv", &rows)?;
    let mut crit = Vec::new();
    if cmd.checks.u_shaped {
        crit.push(Criterion::new(
            "u_shaped",
            !u_presets.is_empty(),
            format!("U-shaped presets: [{}]", u_presets.join(", ")),
        ));
    }
    Ok(crit)
}

// ---------------------------------------------------------------- iterated

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IteratedInstance {
    pub singulars: Vec<f64>,
    pub sigma: f64,
    pub prior: IteratedPrior,
    pub seed: u64,
}

impl Default for IteratedInstance {
    fn default() -> Self {
        Self {
            singulars: vec![3.0, 3.0, 1.5, 1.5, 0.7, 0.7],
            sigma: 0.8,
            prior: IteratedPrior::Gaussian { var: 1.3 },
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct IteratedChecks {
    pub max_mean_err: Option<f64>,
    pub max_cov_err: Option<f64>,
    /// Also run without thermalization and require a smaller final SW with it.
    pub thermalization_helps: bool,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct IteratedCmd {
    pub instance: IteratedInstance,
    pub run: IteratedConfig,
    pub checks: IteratedChecks,
}

#[derive(Serialize)]
struct LegRow {
    arm: &'static str,
    k: usize,
    t_from: f64,
    t_to: f64,
    n_pinned: usize,
    sw: Option<f64>,
    wall_time: f64,
}

fn leg_rows<'a>(arm: &'static str, r: &'a IteratedReport) -> impl Iterator<Item = LegRow> + 'a {
    r.legs.iter().map(move |l| LegRow {
        arm,
        k: l.k,
        t_from: l.t_from,
        t_to: l.t_to,
        n_pinned: l.n_pinned,
        sw: l.sw,
        wall_time: l.wall_time,
    })
}

pub fn iterated(cmd: &IteratedCmd, out: &mut RunDir) -> Result<Vec<Criterion>> {
    let inst = &cmd.instance;
    let (prior, model) = iterated_instance(&inst.singulars, inst.sigma, &inst.prior, inst.seed)?;
    let (_, main) = iterated_transport(&prior, &model, &cmd.run)?;
    let arm = if cmd.run.thermalize_duration > 0.0 { "thermalized" } else { "marginalized" };
    let mut legs: Vec<LegRow> = leg_rows(arm, &main).collect();
    let mut crit = Vec::new();
    let mut reports = vec![(arm, main.clone())];

    if cmd.checks.thermalization_helps {
        if cmd.run.thermalize_duration <= 0.0 {
            bail!("thermalization_helps needs run.thermalize_duration > 0");
        }
        let base_cfg = IteratedConfig { thermalize_duration: 0.0, ..cmd.run.clone() };
        let (_, base) = iterated_transport(&prior, &model, &base_cfg)?;
        legs.extend(leg_rows("marginalized", &base));
        let (a, b) = (main.sw.unwrap_or(f64::NAN), base.sw.unwrap_or(f64::NAN));
        crit.push(Criterion::new(
            "thermalization_helps",
            a < b,
            format!("final SW {a:.4} with thermalization vs {b:.4} without"),
        ));
        reports.push(("marginalized", base));
    }
    if let Some(tol) = cmd.checks.max_mean_err {
        let e = main.mean_err.unwrap_or(f64::NAN);
        crit.push(Criterion::new("max_mean_err", e <= tol, format!("mean error {e:.4}, tol {tol}")));
    }
    if let Some(tol) = cmd.checks.max_cov_err {
        let e = main.cov_err.unwrap_or(f64::NAN);
        crit.push(Criterion::new("max_cov_err", e <= tol, format!("covariance error {e:.4}, tol {tol}")));
    }
    out.write_csv("legs.csv", &legs)?;
    out.write_json("report.json", &reports)?;
    Ok(crit)
}
