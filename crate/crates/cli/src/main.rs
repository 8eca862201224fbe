use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use dimcontract::geometry::{CDParams, Dimension};
use dimcontract::harness::config::LabConfig;
use dimcontract::harness::identities::{run_identity_suite, IdentitySuite};
use dimcontract::harness::{
    render_report, run_eks_bound, run_main_contraction, run_simple_two_time, run_vrs_limit,
    InequalityReport, ReportFormat,
};
use dimcontract::io::{csv_string, fmt_f64, nodal_csv_string, to_json, write_text};
use dimcontract::semigroup::default_dt_max;
use dimcontract::transport::{self, TransportResult};
use dimcontract::{cd_best_R, Error, HeatSemigroup, NodalField, Scheme};

/// Dimensional contraction laboratory.
#[derive(Debug, Parser)]
#[command(name = "dimcontract", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Best curvature constant R for the configured space, potential and m.
    CdParams(Common),
    /// Evolves `f` by the heat semigroup up to time `t`.
    Evolve(Common),
    /// Wasserstein-2 distance between `f` and `g`.
    W2(Common),
    /// Dimensional contraction along `t_grid`.
    CheckMain(Common),
    /// Dimension-free contraction (m = inf) along `t_grid`.
    CheckVrs(Common),
    /// Two-time bound under nonnegative curvature over `st_grid`.
    CheckSimple(Common),
    /// Two-time curvature bound over `st_grid`.
    CheckEks(Common),
    /// Seeded identity and inequality checks of the form calculus.
    CheckIdentities(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Seed for every random field; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

impl From<Format> for ReportFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Json => ReportFormat::Json,
            Format::Csv => ReportFormat::Csv,
        }
    }
}

enum Outcome {
    Done,
    Pass,
    Fail,
}

#[derive(Serialize)]
struct CdOutput {
    space: String,
    psi: String,
    n: usize,
    #[serde(flatten)]
    cd: CDParams,
    witness_coords: Vec<f64>,
}

#[derive(Serialize)]
struct EvolveOutput<'a> {
    grid: String,
    t: f64,
    scheme: Scheme,
    mass: f64,
    values: &'a [f64],
}

fn emit(text: &str, out: Option<&Path>) -> dimcontract::Result<()> {
    match out {
        Some(p) => write_text(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn seed(cfg: &LabConfig, c: &Common) -> u64 {
    c.seed.or(cfg.seed).unwrap_or(0)
}

fn cd_params(cfg: &LabConfig, c: &Common) -> dimcontract::Result<Outcome> {
    let ws = cfg.weighted_space()?;
    let space = ws.space();
    let dims: Vec<Dimension> = match cfg.m {
        Some(m) => vec![m],
        None => vec![Dimension::Finite(space.dim() as f64), Dimension::Infinite],
    };
    let mut rows = Vec::new();
    for m in dims {
        let cd = match (cfg.r, cfg.m) {
            (Some(_), Some(_)) => cfg.cd_params(&ws)?,
            _ => match cd_best_R(space, ws.weight(), m) {
                Ok(cd) => cd,
                // m = n with a potential has no admissible R
                Err(Error::Domain(_)) if cfg.m.is_none() => continue,
                Err(e) => return Err(e),
            },
        };
        rows.push(CdOutput {
            space: space.kind().as_str().to_string(),
            psi: ws.weight().descriptor().to_string(),
            n: space.dim(),
            witness_coords: space.coords(cd.witness_node),
            cd,
        });
    }
    let text = match c.format {
        Format::Json => to_json(&rows),
        Format::Csv => csv_string(
            std::iter::once(vec!["m".to_string(), "R".into(), "witness_node".into()]).chain(
                rows.iter()
                    .map(|r| vec![r.cd.m.to_string(), fmt_f64(r.cd.r), r.cd.witness_node.to_string()]),
            ),
        ),
    };
    emit(&text, c.out.as_deref())?;
    Ok(Outcome::Done)
}

fn evolve(cfg: &LabConfig, c: &Common) -> dimcontract::Result<Outcome> {
    let ws = cfg.weighted_space()?;
    let f = cfg
        .f
        .as_ref()
        .ok_or_else(|| Error::Config("config needs \"f\"".into()))?;
    let f = cfg.density(f, &ws, seed(cfg, c), 0)?;
    let t = cfg.t.ok_or_else(|| Error::Config("config needs the time \"t\"".into()))?;
    let scheme = cfg.run.scheme.unwrap_or(if ws.weight().is_zero() {
        Scheme::Spectral
    } else {
        Scheme::CrankNicolson
    });
    let sg = match scheme {
        Scheme::Spectral => HeatSemigroup::new(&ws, scheme)?,
        Scheme::CrankNicolson => {
            HeatSemigroup::crank_nicolson(&ws, cfg.run.dt_max.unwrap_or_else(|| default_dt_max(&ws)))
        }
    };
    let values = sg.evolve(f.values(), t)?;
    let text = match c.format {
        Format::Json => to_json(&EvolveOutput {
            grid: ws.key().to_string(),
            t,
            scheme,
            mass: ws.measure().integrate(&values),
            values: &values,
        }),
        Format::Csv => nodal_csv_string(&values, &ws)?,
    };
    emit(&text, c.out.as_deref())?;
    Ok(Outcome::Done)
}

fn w2(cfg: &LabConfig, c: &Common) -> dimcontract::Result<Outcome> {
    let ws = cfg.weighted_space()?;
    let (f, g) = cfg.densities(&ws, seed(cfg, c))?;
    let method = cfg
        .run
        .w2_method
        .or_else(|| transport::exact_method(ws.space().kind()))
        .unwrap_or(transport::TransportMethod::Sinkhorn);
    let r: TransportResult = transport::w2(&f, &g, &ws, method, &cfg.run.sinkhorn)?;
    let text = match c.format {
        Format::Json => to_json(&r),
        Format::Csv => csv_string([
            vec!["method".to_string(), "w2".into(), "w2_sq".into()],
            vec![method.as_str().to_string(), fmt_f64(r.w2), fmt_f64(r.w2_sq())],
        ]),
    };
    emit(&text, c.out.as_deref())?;
    Ok(Outcome::Done)
}

fn report(rep: &InequalityReport, c: &Common) -> dimcontract::Result<Outcome> {
    emit(&render_report(rep, c.format.into()), c.out.as_deref())?;
    for row in rep.failing_rows() {
        eprintln!(
            "FAIL t={} s={} lhs={} rhs={} deficit={}",
            row.t,
            row.s.map_or("-".to_string(), |s| s.to_string()),
            row.lhs,
            row.rhs,
            row.deficit
        );
    }
    eprintln!(
        "{}: {} (min deficit {}, tolerance {:.3e})",
        rep.name.as_str(),
        rep.summary.verdict.as_str(),
        rep.summary.min_deficit.map_or("-".to_string(), |d| format!("{d:.6e}")),
        rep.summary.tolerance
    );
    Ok(if rep.summary.verdict.passed() {
        Outcome::Pass
    } else {
        Outcome::Fail
    })
}

fn check(cmd: &Command, cfg: &LabConfig, c: &Common) -> dimcontract::Result<Outcome> {
    let ws = cfg.weighted_space()?;
    let (f, g) = cfg.densities(&ws, seed(cfg, c))?;
    let rep = match cmd {
        Command::CheckMain(_) => run_main_contraction(&f, &g, &ws, &cfg.cd_params(&ws)?, &cfg.times()?, &cfg.run)?,
        Command::CheckVrs(_) => {
            if cfg.m.is_some_and(|m| m != Dimension::Infinite) {
                return Err(Error::Config("check-vrs needs m = \"inf\" or no m".into()));
            }
            let mut inf = cfg.clone();
            inf.m = Some(Dimension::Infinite);
            run_vrs_limit(&f, &g, &ws, &inf.cd_params(&ws)?, &cfg.times()?, &cfg.run)?
        }
        Command::CheckSimple(_) => run_simple_two_time(&f, &g, &ws, &cfg.pairs()?, &cfg.run)?,
        Command::CheckEks(_) => run_eks_bound(&f, &g, &ws, &cfg.pairs()?, &cfg.run)?,
        _ => unreachable!("not an inequality check"),
    };
    report(&rep, c)
}

fn identities(cfg: &LabConfig, c: &Common) -> dimcontract::Result<Outcome> {
    let suite: IdentitySuite = run_identity_suite(&cfg.identities, seed(cfg, c))?;
    let text = match c.format {
        Format::Json => to_json(&suite),
        Format::Csv => csv_string(
            std::iter::once(vec![
                "name".to_string(),
                "grid".into(),
                "residual".into(),
                "order_estimate".into(),
                "params".into(),
            ])
            .chain(suite.records.iter().map(|r| {
                let params: Vec<String> = r.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
                vec![
                    r.name.clone(),
                    r.grid.clone(),
                    fmt_f64(r.residual),
                    r.order_estimate.map(fmt_f64).unwrap_or_default(),
                    params.join(";"),
                ]
            })),
        ),
    };
    emit(&text, c.out.as_deref())?;
    for ch in &suite.checks {
        eprintln!(
            "{} {} max residual {:.3e}{}",
            if ch.pass { "PASS" } else { "FAIL" },
            ch.name,
            ch.max_residual,
            match (ch.min_order, ch.max_order) {
                (Some(a), Some(b)) => format!(", order {a:.2}..{b:.2}"),
                _ => String::new(),
            }
        );
    }
    Ok(if suite.pass { Outcome::Pass } else { Outcome::Fail })
}

fn run(cli: &Cli) -> dimcontract::Result<Outcome> {
    let common = match &cli.command {
        Command::CdParams(c)
        | Command::Evolve(c)
        | Command::W2(c)
        | Command::CheckMain(c)
        | Command::CheckVrs(c)
        | Command::CheckSimple(c)
        | Command::CheckEks(c)
        | Command::CheckIdentities(c) => c,
    };
    let cfg = LabConfig::load(&common.config)?;
    match &cli.command {
        Command::CdParams(c) => cd_params(&cfg, c),
        Command::Evolve(c) => evolve(&cfg, c),
        Command::W2(c) => w2(&cfg, c),
        Command::CheckIdentities(c) => identities(&cfg, c),
        cmd => check(cmd, &cfg, common),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(&cli) {
        Ok(Outcome::Done | Outcome::Pass) => ExitCode::SUCCESS,
        Ok(Outcome::Fail) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
