//! `nitsche` command-line tool: single solves, convergence sweeps and
//! condition-number studies for the built-in presets.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use nitsche::assembly::NormKind;
use nitsche::harness::{condition_csv, convergence_csv, run_condition, run_converge, run_solve, StudyConfig, StudyKind};
use nitsche::problems::{Preset, PresetKind};

#[derive(Parser)]
#[command(name = "nitsche", version, about = "Nitsche finite element solves and studies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a preset on one mesh and write VTK fields and a summary CSV.
    Solve(Options),
    /// Uniform refinement study of the difference between successive levels.
    Converge(Options),
    /// Jacobian condition numbers of the Nitsche and penalty variants.
    Condition(Options),
    /// List the presets and their parameters.
    Presets,
}

#[derive(Args, Default)]
struct Options {
    /// Preset name (see `nitsche presets`).
    #[arg(long)]
    preset: Option<String>,
    /// Parameter override `key=value`; may be repeated.
    #[arg(long = "param", value_name = "KEY=VALUE")]
    params: Vec<String>,
    /// Mesh subdivisions for `solve`.
    #[arg(long)]
    n: Option<usize>,
    /// Comma-separated mesh subdivisions, each double the previous.
    #[arg(long, value_delimiter = ',')]
    levels: Option<Vec<usize>>,
    /// Norm of the convergence study: h1, h2 (broken) or l2.
    #[arg(long)]
    norm: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Flat TOML file with the same keys as the flags; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl Options {
    /// Fills unset options from the config file. Parameters from the file
    /// are applied before the ones given on the command line.
    fn merge_file(mut self, path: &Path) -> Result<Options> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let table: toml::Table = text.parse().with_context(|| format!("parsing {}", path.display()))?;
        let mut file_params = Vec::new();
        for (key, value) in &table {
            let int =
                || value.as_integer().and_then(|v| usize::try_from(v).ok()).ok_or_else(|| anyhow!("'{key}' must be a positive integer"));
            let string = || value.as_str().map(str::to_owned).ok_or_else(|| anyhow!("'{key}' must be a string"));
            match key.as_str() {
                "preset" => self.preset = self.preset.or(Some(string()?)),
                "n" => self.n = self.n.or(Some(int()?)),
                "norm" => self.norm = self.norm.or(Some(string()?)),
                "out" => self.out = self.out.or(Some(PathBuf::from(string()?))),
                "levels" => {
                    if self.levels.is_none() {
                        let items = value.as_array().ok_or_else(|| anyhow!("'levels' must be an array of integers"))?;
                        let levels = items.iter().map(|v| v.as_integer().and_then(|v| usize::try_from(v).ok()));
                        self.levels = Some(levels.collect::<Option<_>>().ok_or_else(|| anyhow!("'levels' must be an array of integers"))?);
                    }
                }
                "param" => {
                    let table = value.as_table().ok_or_else(|| anyhow!("'param' must be a table of key = value"))?;
                    for (k, v) in table {
                        let v = match v {
                            toml::Value::String(s) => s.clone(),
                            toml::Value::Integer(i) => i.to_string(),
                            toml::Value::Float(f) => f.to_string(),
                            other => bail!("parameter '{k}' has unsupported value {other}"),
                        };
                        file_params.push(format!("{k}={v}"));
                    }
                }
                other => bail!("unknown config key '{other}'"),
            }
        }
        file_params.append(&mut self.params);
        self.params = file_params;
        Ok(self)
    }

    fn into_config(self, kind: StudyKind) -> Result<StudyConfig> {
        let opts = match self.config.clone() {
            Some(path) => self.merge_file(&path)?,
            None => self,
        };
        let name = opts.preset.ok_or_else(|| anyhow!("no preset given (use --preset)"))?;
        let mut preset = Preset::by_name(&name)?;
        for p in &opts.params {
            let (k, v) = p.split_once('=').ok_or_else(|| anyhow!("parameter '{p}' is not of the form key=value"))?;
            preset.set(k.trim(), v.trim())?;
        }
        let levels = match kind {
            StudyKind::Solve => vec![opts.n.or(opts.levels.and_then(|l| l.first().copied())).unwrap_or(8)],
            _ => opts.levels.ok_or_else(|| anyhow!("no mesh levels given (use --levels 4,8,16)"))?,
        };
        let mut cfg = StudyConfig::new(kind, preset, levels);
        cfg.norm = opts.norm.as_deref().map(parse_norm).transpose()?;
        cfg.out = opts.out;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn parse_norm(s: &str) -> Result<NormKind> {
    match s.to_ascii_lowercase().as_str() {
        "l2" => Ok(NormKind::L2),
        "h1" => Ok(NormKind::H1),
        "h2" => Ok(NormKind::BrokenH2),
        _ => bail!("unknown norm '{s}' (expected h1, h2 or l2)"),
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Solve(o) => {
            let sol = run_solve(&o.into_config(StudyKind::Solve)?)?;
            let r = &sol.report;
            println!(
                "{}: {} dofs, {} Newton iterations, residual {:.3e}, energy {:.12e}",
                sol.setup.name,
                sol.setup.problem.n_free(),
                r.iterations,
                r.residual_history.last().copied().unwrap_or(0.0),
                r.final_energy
            );
        }
        Command::Converge(o) => print!("{}", convergence_csv(&run_converge(&o.into_config(StudyKind::Converge)?)?)),
        Command::Condition(o) => print!("{}", condition_csv(&run_condition(&o.into_config(StudyKind::Condition)?)?)),
        Command::Presets => {
            for kind in PresetKind::ALL {
                let p = Preset::new(kind);
                let params: Vec<String> = p.parameter_names().iter().map(|k| format!("{k}={}", p.get(k).unwrap_or(f64::NAN))).collect();
                println!("{kind}: family={:?} {}", kind.default_family(), params.join(" "));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn norms_parse() {
        assert_eq!(parse_norm("H1").unwrap(), NormKind::H1);
        assert_eq!(parse_norm("h2").unwrap(), NormKind::BrokenH2);
        assert!(parse_norm("h3").is_err());
    }

    #[test]
    fn file_values_fill_gaps_only() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "preset = \"signorini\"\nn = 16\n[param]\nf = 1\nclamp_top = 1\n").unwrap();
        let opts = Options { n: Some(4), params: vec!["f=-2".into()], ..Options::default() };
        let cfg = Options { config: Some(path), ..opts }.into_config(StudyKind::Solve).unwrap();
        assert_eq!(cfg.levels, vec![4]);
        assert_eq!(cfg.preset.get("f").unwrap(), -2.0);
        assert_eq!(cfg.preset.get("clamp_top").unwrap(), 1.0);
    }

    #[test]
    fn unknown_config_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "preset = \"obstacle\"\nmesh = 3\n").unwrap();
        let opts = Options { config: Some(path), ..Options::default() };
        assert!(opts.into_config(StudyKind::Solve).is_err());
    }
}
