mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use kdmps::excitation::{save_excitation, ExcitationManifest};
use kdmps::mps::{load_mps, save_mps};
use kdmps::variance::write_variance_csv;
use kdmps::{
    dense_hamiltonian, dmrg_ground_state, exact_spectrum, expectation, haldane_shastry_mpo, heisenberg_mpo,
    nsite_variance, random_mps, solve_lowest_excitation, verify_identity_suite, DmrgOpts, ExcitationOpts, Mpo, Mps,
    TruncationPolicy,
};
use log::info;
use serde::Serialize;
use serde_json::json;

use config::{usage, Model, RunConfig, UsageError};

/// Kept/discarded space MPS toolkit: ground states, n-site variances and excitations.
///
/// Settings are resolved in three layers: built-in defaults, then the JSON
/// file given by --config, then individual flags. A flag always wins over the
/// file.
#[derive(Parser, Debug)]
#[command(name = "kdmps", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Two-site DMRG ground state; writes `<out>/gs` and `<out>/gs_run.json`.
    Gs(Common),
    /// n-site variance table of a stored state as CSV.
    Variance {
        #[command(flatten)]
        common: Common,
        /// MPS archive to read (default `<out>/gs`).
        #[arg(long)]
        state: Option<PathBuf>,
    },
    /// Lowest excitation of the n-site ansatz around a stored ground state.
    Excite {
        #[command(flatten)]
        common: Common,
        /// Ground-state archive to read (default `<out>/gs`).
        #[arg(long)]
        state: Option<PathBuf>,
    },
    /// Dense identity suite on a seeded random MPS.
    Check(Common),
    /// Lowest levels of the dense Hamiltonian.
    Ed(Common),
}

#[derive(Args, Debug, Clone, Default)]
struct Common {
    /// JSON file with RunConfig fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    model: Option<Model>,
    /// Number of sites L.
    #[arg(long)]
    length: Option<usize>,
    /// Bond dimension cap D.
    #[arg(long)]
    bond_dim: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Largest window size of the variance table.
    #[arg(long)]
    n_max: Option<usize>,
    /// Window size of the excitation ansatz.
    #[arg(long)]
    excite_n: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn resolve(&self) -> anyhow::Result<RunConfig> {
        let mut c = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(m) = self.model {
            c.model = m;
        }
        if let Some(l) = self.length {
            c.length = l;
        }
        if let Some(d) = self.bond_dim {
            c.bond_dim = d;
        }
        if let Some(s) = self.seed {
            c.seed = s;
        }
        if let Some(n) = self.n_max {
            c.variance_n_max = Some(n);
        }
        if let Some(n) = self.excite_n {
            c.excitation_n = n;
        }
        if let Some(o) = &self.out {
            c.output_dir = o.clone();
        }
        Ok(c)
    }
}

/// Exit code for numerical non-convergence or failed checks.
#[derive(Debug)]
struct NumericalFailure(String);

impl std::fmt::Display for NumericalFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for NumericalFailure {}

/// Twelve significant digits.
fn sig(x: f64) -> String {
    let a = x.abs();
    if a == 0.0 {
        format!("{:.11}", x)
    } else if (1e-4..1e8).contains(&a) {
        let digits = 11 - a.log10().floor() as i32;
        format!("{:.*}", digits.max(0) as usize, x)
    } else {
        format!("{x:.11e}")
    }
}

fn hamiltonian(model: Model, l: usize) -> anyhow::Result<Mpo> {
    Ok(match model {
        Model::Heisenberg => heisenberg_mpo(l, 1.0)?,
        Model::HaldaneShastry => haldane_shastry_mpo(l, 1e-12)?,
    })
}

fn write_json(path: &Path, value: &impl Serialize) -> anyhow::Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)?).with_context(|| format!("writing {}", path.display()))
}

fn out_dir(c: &RunConfig) -> anyhow::Result<&Path> {
    fs::create_dir_all(&c.output_dir).with_context(|| format!("creating {}", c.output_dir.display()))?;
    Ok(&c.output_dir)
}

/// Loads a state archive and adopts its length into the config.
fn load_state(c: &mut RunConfig, state: Option<PathBuf>) -> anyhow::Result<(Mps, PathBuf)> {
    let path = state.unwrap_or_else(|| c.output_dir.join("gs"));
    if !path.join("manifest.json").is_file() {
        return Err(usage(format!("no MPS archive at {}", path.display())));
    }
    let psi: Mps = load_mps(&path).with_context(|| format!("reading {}", path.display()))?;
    if psi.len() != c.length {
        info!("using L={} from the archive", psi.len());
        c.length = psi.len();
    }
    Ok((psi, path))
}

fn hs_ground(l: usize) -> f64 {
    let l = l as f64;
    -std::f64::consts::PI.powi(2) * (l + 5.0 / l) / 24.0
}

fn hs_excited(l: usize) -> f64 {
    let l = l as f64;
    -std::f64::consts::PI.powi(2) * (l - 7.0 / l) / 24.0
}

fn cmd_gs(c: RunConfig) -> anyhow::Result<()> {
    c.validate()?;
    let h = hamiltonian(c.model, c.length)?;
    let psi0: Mps = random_mps(c.length, c.d, Some(c.bond_dim.min(4)), c.seed)?;
    let opts = DmrgOpts {
        n_sweeps: c.sweeps,
        policy: TruncationPolicy::max_rank(c.bond_dim).with_cutoff(1e-14),
        conv_tol: c.conv_tol,
        seed: c.seed,
        ..DmrgOpts::default()
    };
    let r = dmrg_ground_state(&psi0, &h, &opts)?;
    let dir = out_dir(&c)?;
    save_mps(&r.state, &dir.join("gs"))?;
    write_json(
        &dir.join("gs_run.json"),
        &json!({
            "config": c,
            "model": c.model,
            "L": c.length,
            "d": c.d,
            "D_cap": c.bond_dim,
            "seed": c.seed,
            "sweeps": r.energies.len(),
            "energies": r.energies,
            "final_energy": r.energy,
            "residuals": r.residuals,
            "discarded": r.discarded,
            "converged": r.converged,
        }),
    )?;
    println!("energy {}", sig(r.energy));
    println!("bond_dims {:?}", r.state.bond_dims());
    if c.model == Model::HaldaneShastry {
        let e = hs_ground(c.length);
        println!("exact {} relative_error {}", sig(e), sig(((r.energy - e) / e).abs()));
    }
    if !r.converged {
        return Err(NumericalFailure(format!("DMRG did not converge in {} sweeps", c.sweeps)).into());
    }
    Ok(())
}

fn cmd_variance(mut c: RunConfig, state: Option<PathBuf>) -> anyhow::Result<()> {
    let (psi, path) = load_state(&mut c, state)?;
    c.validate()?;
    let h = hamiltonian(c.model, c.length)?;
    let r = nsite_variance(&psi, &h, c.n_max())?;
    let dir = out_dir(&c)?;
    let csv = dir.join(format!("variance_{}_D{}.csv", c.model, psi.max_bond_dim()));
    write_variance_csv(&r, fs::File::create(&csv)?)?;
    write_variance_csv(&r, std::io::stdout().lock())?;
    println!("energy {}", sig(r.energy));
    if let Some(t) = r.total {
        println!("dense_variance {}", sig(t));
    }
    write_json(
        &dir.join("variance_run.json"),
        &json!({ "config": c, "state": path, "csv": csv, "report": r }),
    )
}

fn cmd_excite(mut c: RunConfig, state: Option<PathBuf>) -> anyhow::Result<()> {
    c.validate()?;
    let (gs, path) = load_state(&mut c, state)?;
    c.validate()?;
    let h = hamiltonian(c.model, c.length)?;
    let n = c.excitation_n;
    let opts = ExcitationOpts {
        seed: c.seed,
        ..ExcitationOpts::default()
    };
    let e0 = expectation(&gs, &h)?;
    let r = solve_lowest_excitation(&gs, &h, n, &opts)?;
    println!("E_ex {}", sig(r.energy));
    println!("gap {}", sig(r.energy - e0));
    println!("residual {}", sig(r.residual));
    println!("S2 {}", sig(r.s_squared));
    let mut rel = None;
    if c.model == Model::HaldaneShastry {
        let e = hs_excited(c.length);
        let x = ((r.energy - e) / e).abs();
        println!("exact {} relative_error {}", sig(e), sig(x));
        rel = Some(x);
    }
    let dir = out_dir(&c)?;
    let manifest = ExcitationManifest {
        kind: "excitation".into(),
        n,
        length: c.length,
        d: c.d,
        bond_dim: gs.max_bond_dim(),
        energy: r.energy,
        residual: r.residual,
        seed: c.seed,
        ground_state: Some(path.display().to_string()),
    };
    save_excitation(&r.state, &manifest, &dir.join(format!("excitation_n{n}")))?;
    write_json(
        &dir.join("excite_run.json"),
        &json!({
            "config": c,
            "ground_energy": e0,
            "E_ex": r.energy,
            "residual": r.residual,
            "S2": r.s_squared,
            "Sz": r.s_z,
            "iterations": r.iterations,
            "converged": r.converged,
            "relative_error": rel,
        }),
    )?;
    if !r.converged {
        return Err(NumericalFailure(format!("excitation solve stopped at residual {:e}", r.residual)).into());
    }
    Ok(())
}

fn cmd_check(c: RunConfig) -> anyhow::Result<()> {
    c.validate()?;
    let h = hamiltonian(c.model, c.length)?;
    let psi: Mps = random_mps(c.length, c.d, Some(c.bond_dim), c.seed)?;
    let rep = verify_identity_suite(&psi, &h)?;
    let width = rep.checks.keys().map(|k| k.len()).max().unwrap_or(0);
    for (name, chk) in &rep.checks {
        let tag = if chk.pass { "pass" } else { "FAIL" };
        println!("{name:width$}  {:>18}  {tag}", sig(chk.max_abs_deviation));
    }
    write_json(&out_dir(&c)?.join("check_report.json"), &json!({ "config": c, "checks": rep }))?;
    if !rep.all_pass() {
        return Err(NumericalFailure(format!("identities failed: {:?}", rep.failures())).into());
    }
    println!("all {} identities pass", rep.checks.len());
    Ok(())
}

fn cmd_ed(c: RunConfig) -> anyhow::Result<()> {
    c.validate()?;
    let h = hamiltonian(c.model, c.length)?;
    let m = dense_hamiltonian(&h)?;
    let levels = exact_spectrum(&m, m.nrows().min(4))?;
    for (i, e) in levels.iter().enumerate() {
        println!("level {i} {}", sig(*e));
    }
    if c.model == Model::HaldaneShastry {
        println!("formula ground {} excited {}", sig(hs_ground(c.length)), sig(hs_excited(c.length)));
    }
    write_json(&out_dir(&c)?.join("ed_run.json"), &json!({ "config": c, "levels": levels }))
}

fn exit_code(e: &anyhow::Error) -> u8 {
    if e.downcast_ref::<UsageError>().is_some() {
        return 2;
    }
    if e.downcast_ref::<NumericalFailure>().is_some() {
        return 3;
    }
    match e.downcast_ref::<kdmps::Error>() {
        Some(kdmps::Error::GuardExceeded { .. } | kdmps::Error::OutOfRange(_) | kdmps::Error::InvalidArgument(_)) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let run = || -> anyhow::Result<()> {
        match cli.command {
            Command::Gs(a) => cmd_gs(a.resolve()?),
            Command::Variance { common, state } => cmd_variance(common.resolve()?, state),
            Command::Excite { common, state } => cmd_excite(common.resolve()?, state),
            Command::Check(a) => cmd_check(a.resolve()?),
            Command::Ed(a) => cmd_ed(a.resolve()?),
        }
    };
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(sig(-0.75), "-0.750000000000");
        assert_eq!(sig(-3.5468890816418), "-3.54688908164");
        assert_eq!(sig(1.0), "1.00000000000");
        assert_eq!(sig(1.5e-9), "1.50000000000e-9");
        assert_eq!(sig(0.0), "0.00000000000");
    }

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        fs::write(&p, r#"{"L": 6, "D_cap": 8, "seed": 4}"#).unwrap();
        let a = Common {
            config: Some(p),
            bond_dim: Some(16),
            ..Common::default()
        };
        let c = a.resolve().unwrap();
        assert_eq!((c.length, c.bond_dim, c.seed), (6, 16, 4));
    }
}
