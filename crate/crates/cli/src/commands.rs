//! Subcommands and figure presets.

use std::path::{Path, PathBuf};

use clap::{Subcommand, ValueEnum};
use log::info;

use nmqsd::coefficients::{CoefficientTables, P13Coupling};
use nmqsd::ensemble::{run_ensemble, DensityTrajectory, EnsembleConfig};
use nmqsd::entanglement::{negativity, populations, purity};
use nmqsd::linalg::projector;
use nmqsd::markov::{default_kappa_grid, integrate_master, scan_kappa};
use nmqsd::model::make_initial_state;
use nmqsd::noise::noise_statistics;
use nmqsd::InitialStateSpec;

use crate::config::RunConfig;
use crate::output::{write_table, Table};
use crate::CliError;

/// Memory rates of the γ-sweep figures.
pub const FIGURE_GAMMAS: [f64; 3] = [0.1, 0.3, 3.0];
/// Asymmetries of the κ-sweep figures.
pub const FIGURE_KAPPAS: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];
/// Memory rate held fixed in the κ-sweep figures.
pub const FIGURE_SWEEP_GAMMA: f64 = 0.3;

#[derive(Debug, Clone, PartialEq, Subcommand)]
pub enum Command {
    /// QSD ensemble: negativity, populations and purity versus time.
    Simulate,
    /// Markov master equation from the configured initial state.
    Master,
    /// Steady states over the κ grid.
    Steady,
    /// Coefficient functions F1..F8, PBar9..PBar12, P13.
    Coeffs,
    /// Empirical OU noise correlations against the kernel.
    NoiseCheck,
    /// Preset γ and κ sweeps, one CSV per curve.
    Figure {
        #[arg(value_enum)]
        id: FigureId,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FigureId {
    #[value(name = "1a")]
    Fig1a,
    #[value(name = "1b")]
    Fig1b,
    #[value(name = "2a")]
    Fig2a,
    #[value(name = "2b")]
    Fig2b,
    #[value(name = "3")]
    Fig3,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Master => "master",
            Command::Steady => "steady",
            Command::Coeffs => "coeffs",
            Command::NoiseCheck => "noise-check",
            Command::Figure { .. } => "figure",
        }
    }
}

fn meta(command: &str, cfg: &RunConfig, extra: &[(&str, String)]) -> String {
    let mut s = format!(
        "# nmqsd {} {command}\n# resolved configuration; feed back with --config to reproduce\n",
        env!("CARGO_PKG_VERSION")
    );
    s += &cfg.to_config_text();
    for (k, v) in extra {
        s += &format!("# {k}: {v}\n");
    }
    s
}

fn stem(cfg: &RunConfig, out_dir: &Path, default: &str) -> PathBuf {
    out_dir.join(cfg.output.clone().unwrap_or_else(|| PathBuf::from(default)))
}

fn population_header() -> Vec<String> {
    (1..=6).map(|i| format!("rho_{i}{i}")).collect()
}

fn ensemble_table(traj: &DensityTrajectory) -> Table {
    let mut header = vec!["t".to_string(), "N".into(), "stderr_N".into()];
    header.extend(population_header());
    header.push("purity".into());
    let mut t = Table::new(header);
    for (k, rho) in traj.rho.iter().enumerate() {
        let mut row = vec![traj.times[k], traj.negativity[k], traj.negativity_stderr[k]];
        row.extend(populations(rho));
        row.push(purity(rho));
        t.push_numbers(row);
    }
    t
}

fn simulate(cfg: &RunConfig, stem: &Path, command: &str) -> Result<PathBuf, CliError> {
    let initial = make_initial_state(&cfg.initial, cfg.params.kappa)?;
    if let Some(w) = &initial.warning {
        log::warn!("{w}");
    }
    let ens = EnsembleConfig {
        mode: cfg.mode,
        stride: cfg.stride,
        ..EnsembleConfig::new(cfg.params.clone(), initial.state)
    };
    info!(
        "{command}: {} trajectories, kappa={}, gamma={}, initial={}",
        cfg.params.n_traj,
        cfg.params.kappa,
        cfg.params.memory_rate,
        cfg.initial.tag()
    );
    let traj = run_ensemble(&ens)?;
    let extra = [
        ("trajectories_used", traj.used.to_string()),
        ("trajectories_failed", traj.failed.to_string()),
        ("max_normalization_drift", traj.max_drift.to_string()),
    ];
    write_table(stem, &ensemble_table(&traj), &meta(command, cfg, &extra))
}

fn master(cfg: &RunConfig, stem: &Path) -> Result<PathBuf, CliError> {
    let initial = make_initial_state(&cfg.initial, cfg.params.kappa)?;
    let traj = integrate_master(&cfg.params, &projector(initial.state.amplitudes()), cfg.stride)?;
    let mut header = vec!["t".to_string(), "N".into()];
    header.extend(population_header());
    header.push("purity".into());
    let mut t = Table::new(header);
    for (time, rho) in traj.times.iter().zip(&traj.rho) {
        let mut row = vec![*time, negativity(rho)?];
        row.extend(populations(rho));
        row.push(purity(rho));
        t.push_numbers(row);
    }
    write_table(stem, &t, &meta("master", cfg, &[]))
}

fn steady(cfg: &RunConfig, family: &InitialStateSpec, stem: &Path, command: &str) -> Result<PathBuf, CliError> {
    let grid = default_kappa_grid(cfg.kappa_step);
    info!("{command}: {} kappa points, initial={}", grid.len(), family.tag());
    let results = scan_kappa(&cfg.params, family, &grid)?;
    let mut t = Table::new(["kappa", "rho11_inf", "N_s", "purity", "initial_state_tag", "N_pt"]);
    for r in &results {
        t.push(vec![
            r.kappa.to_string(),
            r.rho11_inf.to_string(),
            r.negativity_formula.to_string(),
            r.purity.to_string(),
            family.tag().to_string(),
            r.negativity.to_string(),
        ]);
    }
    let mut run_cfg = cfg.clone();
    run_cfg.initial = family.clone();
    write_table(stem, &t, &meta(command, &run_cfg, &[]))
}

fn coeffs(cfg: &RunConfig, stem: &Path) -> Result<PathBuf, CliError> {
    let tables = CoefficientTables::integrate(&cfg.params, P13Coupling::Full)?;
    let mut header = vec!["t".to_string()];
    let names = (1..=8).map(|j| format!("F{j}")).chain((9..=12).map(|j| format!("PBar{j}"))).chain(["P13".to_string()]);
    for n in names {
        header.push(format!("re_{n}"));
        header.push(format!("im_{n}"));
    }
    let mut t = Table::new(header);
    let every = ((cfg.stride / cfg.params.dt).round() as usize).max(1);
    for k in (0..=tables.n_steps()).step_by(every) {
        let c = tables.at(k);
        let values = c.f.iter().chain(&c.pbar).chain([&c.p13]);
        let mut row = vec![cfg.params.time(k)];
        for z in values {
            row.push(z.re);
            row.push(z.im);
        }
        t.push_numbers(row);
    }
    write_table(stem, &t, &meta("coeffs", cfg, &[]))
}

fn noise_check(cfg: &RunConfig, stem: &Path) -> Result<PathBuf, CliError> {
    cfg.check_lags()?;
    let stats = noise_statistics(&cfg.params, cfg.params.n_traj, &cfg.lags, 1.0)?;
    let mut t = Table::new([
        "lag",
        "empirical_re",
        "empirical_im",
        "target",
        "stderr",
        "pseudo_abs",
        "pseudo_stderr",
    ]);
    for s in &stats {
        t.push_numbers([
            s.lag,
            s.correlation.re,
            s.correlation.im,
            s.target,
            s.correlation_stderr,
            s.pseudo.norm(),
            s.pseudo_stderr,
        ]);
    }
    let extra = [("paths", cfg.params.n_traj.to_string()), ("origin_step", "1".to_string())];
    write_table(stem, &t, &meta("noise-check", cfg, &extra))
}

fn figure(id: FigureId, cfg: &RunConfig, out_dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let mut written = Vec::new();
    let (name, initial) = match id {
        FigureId::Fig1a => ("fig1a", InitialStateSpec::Bell),
        FigureId::Fig1b => ("fig1b", InitialStateSpec::Bell),
        FigureId::Fig2a => ("fig2a", InitialStateSpec::Product20),
        FigureId::Fig2b => ("fig2b", InitialStateSpec::Product20),
        FigureId::Fig3 => {
            for family in [InitialStateSpec::PhiKappa, InitialStateSpec::Product20] {
                let path = out_dir.join(format!("fig3_{}", family.tag()));
                written.push(steady(cfg, &family, &path, "figure 3")?);
            }
            return Ok(written);
        }
    };
    let label = format!("figure {}", &name[3..]);
    let curves: Vec<(String, f64, f64)> = match id {
        FigureId::Fig1a | FigureId::Fig2a => FIGURE_GAMMAS.iter().map(|&g| (format!("gamma{g}"), 1.0, g)).collect(),
        _ => FIGURE_KAPPAS
            .iter()
            .map(|&k| (format!("kappa{k}"), k, FIGURE_SWEEP_GAMMA))
            .collect(),
    };
    for (suffix, kappa, gamma) in curves {
        let mut c = cfg.clone();
        c.params.kappa = kappa;
        c.params.memory_rate = gamma;
        c.initial = initial.clone();
        c.output = None;
        c.validate()?;
        let path = out_dir.join(format!("{name}_{suffix}"));
        written.push(simulate(&c, &path, &label)?);
    }
    Ok(written)
}

/// Runs one subcommand and returns the CSV files written.
pub fn dispatch(command: &Command, cfg: &RunConfig, out_dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    cfg.validate()?;
    let name = command.name();
    let written = match command {
        Command::Simulate => vec![simulate(cfg, &stem(cfg, out_dir, name), name)?],
        Command::Master => vec![master(cfg, &stem(cfg, out_dir, name))?],
        Command::Steady => vec![steady(cfg, &cfg.initial, &stem(cfg, out_dir, name), name)?],
        Command::Coeffs => vec![coeffs(cfg, &stem(cfg, out_dir, name))?],
        Command::NoiseCheck => vec![noise_check(cfg, &stem(cfg, out_dir, "noise_check"))?],
        Command::Figure { id } => figure(*id, cfg, out_dir)?,
    };
    for p in &written {
        info!("wrote {}", p.display());
    }
    Ok(written)
}
