use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use plectic::config::{load_cycle, GroupConfig, MorphismConfig};
use plectic::error::{ConfigError, GroupError, HeckeError, IntegrationError, JacobianError, MeasureError};
use plectic::group::PlecticGroup;
use plectic::hecke::{functoriality_check, lattice_maps, validate_morphism};
use plectic::integration::{integrate_riemann, integrate_series_to, PlecticCycle, PointRecord, RiemannOptions};
use plectic::jacobian::{abel_jacobi, period_lattice};
use plectic::measures::{invariant_measure_lattice, orientation_and_duality_report, quotient_complex, FundamentalDomain};
use plectic::padic::QuadExtScalar;
use plectic::verify::run_suite;

#[derive(Parser)]
#[command(name = "plectic", version, about = "p-adic Schottky groups, plectic measures, integrals and Jacobians")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Word depth for limit sets, quotient graphs and integration.
    #[arg(long, global = true)]
    depth: Option<usize>,
    /// Word length for the series algorithm.
    #[arg(long, global = true)]
    wordlen: Option<usize>,
    /// Output digits.
    #[arg(long, global = true)]
    digits: Option<u32>,
    #[arg(long, global = true, default_value_t = 3)]
    radius: usize,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[arg(long, global = true)]
    cycle: Option<PathBuf>,
    #[arg(long, global = true)]
    morphism: Option<PathBuf>,
    #[arg(long, global = true, default_value = "all")]
    suite: String,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Dot,
}

#[derive(Subcommand)]
enum Command {
    /// Limit-set samples and ball covers per place.
    Limitset,
    /// Tree of limit points near the fundamental domain.
    Tree,
    /// Quotient graphs and the invariant measure lattice.
    Measures,
    /// Period matrices.
    Periods,
    /// Multiplicative integral of a cycle.
    Integrate,
    /// Abel-Jacobi image of a cycle.
    Aj,
    /// Functoriality of a morphism between quotients.
    Hecke,
    /// Invariant suite.
    Verify,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Failure { code, message: message.into() }
    }
}

fn group_code(e: &GroupError) -> u8 {
    match e {
        GroupError::Certificate(_) => 2,
        _ => 4,
    }
}

fn integration_code(e: &IntegrationError) -> u8 {
    match e {
        IntegrationError::NonStabilized { .. } => 3,
        IntegrationError::Group(g) => group_code(g),
        IntegrationError::Measure(MeasureError::Group(g)) => group_code(g),
        _ => 4,
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        let code = match &e {
            ConfigError::Group(g) => match g {
                GroupError::Certificate(_) => 2,
                _ => 1,
            },
            _ => 1,
        };
        Failure::new(code, e.to_string())
    }
}

impl From<IntegrationError> for Failure {
    fn from(e: IntegrationError) -> Self {
        Failure::new(integration_code(&e), e.to_string())
    }
}

impl From<MeasureError> for Failure {
    fn from(e: MeasureError) -> Self {
        let code = match &e {
            MeasureError::Group(g) => group_code(g),
            _ => 4,
        };
        Failure::new(code, e.to_string())
    }
}

impl From<GroupError> for Failure {
    fn from(e: GroupError) -> Self {
        Failure::new(group_code(&e), e.to_string())
    }
}

impl From<JacobianError> for Failure {
    fn from(e: JacobianError) -> Self {
        let code = match &e {
            JacobianError::Integration(i) => integration_code(i),
            _ => 4,
        };
        Failure::new(code, e.to_string())
    }
}

impl From<HeckeError> for Failure {
    fn from(e: HeckeError) -> Self {
        let code = match &e {
            HeckeError::Jacobian(JacobianError::Integration(i)) => integration_code(i),
            HeckeError::Group(g) => group_code(g),
            _ => 4,
        };
        Failure::new(code, e.to_string())
    }
}

struct Run {
    cli: Cli,
    cfg: GroupConfig,
    group: PlecticGroup,
}

impl Run {
    fn depth(&self) -> usize {
        self.cli.depth.unwrap_or(self.cfg.depth)
    }

    fn opts(&self) -> RiemannOptions {
        let mut o = RiemannOptions::default();
        if let Some(d) = self.cli.digits {
            o.output_digits = d;
        }
        if let Some(d) = self.cli.depth {
            o.max_depth = d.max(2);
        }
        o
    }

    fn cycle(&self) -> Result<PlecticCycle, Failure> {
        match &self.cli.cycle {
            Some(path) => Ok(load_cycle(path, &self.cfg)?),
            None => self.cfg.default_cycle()?.ok_or_else(|| Failure::new(1, "no cycle: pass --cycle or add one to the config")),
        }
    }

    /// Scalars are reported at the requested number of digits.
    fn scalar(&self, x: &QuadExtScalar) -> Value {
        let x = match self.cli.digits {
            Some(d) => x.with_precision(d.min(x.precision())),
            None => x.clone(),
        };
        json!(x.to_record())
    }
}

fn limitset(r: &Run) -> Result<String, Failure> {
    let mut places = Vec::new();
    for k in 0..r.group.places() {
        let kind = r.group.classify_limit_set(k)?;
        let entry = match r.group.schottky(k) {
            Ok(_) => {
                let ls = r.group.limit_set_approx(k, r.depth())?;
                json!({
                    "place": k,
                    "kind": kind,
                    "points": ls.points.iter().map(PointRecord::from_point).collect::<Vec<_>>(),
                    "cover": ls.cover,
                })
            }
            Err(_) => json!({"place": k, "kind": kind, "points": [], "cover": []}),
        };
        places.push(entry);
    }
    Ok(pretty(&json!({"config": r.cfg.name, "depth": r.depth(), "places": places})))
}

fn tree(r: &Run) -> Result<String, Failure> {
    let mut dots = String::new();
    let mut places = Vec::new();
    for k in r.group.support() {
        let f = r.group.schottky(k)?;
        let t = FundamentalDomain::new(f).limit_tree(r.cli.radius);
        let name = format!("{}_place{k}", r.cfg.name);
        dots.push_str(&plectic::tree::to_dot(&name, &t.vertices));
        places.push(json!({
            "place": k,
            "vertices": t.vertices.iter().map(|v| v.label()).collect::<Vec<_>>(),
            "edges": t.edges.iter().map(|e| [e.source.label(), e.target.label()]).collect::<Vec<_>>(),
        }));
    }
    Ok(match r.cli.format {
        Format::Dot => dots,
        Format::Json => pretty(&json!({"config": r.cfg.name, "radius": r.cli.radius, "places": places})),
    })
}

fn measures(r: &Run) -> Result<String, Failure> {
    let qc = quotient_complex(&r.group, r.depth())?;
    if r.cli.format == Format::Dot {
        return Ok(qc
            .graphs
            .iter()
            .enumerate()
            .filter_map(|(k, g)| g.as_ref().map(|g| g.to_dot(&format!("{}_place{k}", r.cfg.name))))
            .collect());
    }
    let lattice = invariant_measure_lattice(&r.group, r.depth())?;
    let report = orientation_and_duality_report(&r.group, r.depth())?;
    let graphs: Vec<Value> = qc
        .graphs
        .iter()
        .enumerate()
        .filter_map(|(k, g)| {
            g.as_ref().map(|g| json!({"place": k, "vertices": g.vertex_count(), "edges": g.edges(), "betti": g.betti(), "basis": g.basis()}))
        })
        .collect();
    Ok(pretty(&json!({
        "config": r.cfg.name,
        "depth": r.depth(),
        "betti": qc.betti,
        "cells": qc.cells,
        "rank": lattice.rank,
        "quotients": graphs,
        "report": report,
    })))
}

fn periods(r: &Run) -> Result<String, Failure> {
    let lattice = period_lattice(&r.group, &r.opts())?;
    let places: Vec<Value> = lattice
        .places
        .iter()
        .enumerate()
        .filter_map(|(k, fp)| {
            fp.as_ref().map(|fp| {
                json!({
                    "place": k,
                    "matrix": fp.matrix.iter().map(|row| row.iter().map(|x| r.scalar(x)).collect::<Vec<_>>()).collect::<Vec<_>>(),
                    "valuations": fp.valuations(),
                    "symmetry_digits": (fp.rank() > 1).then(|| fp.symmetry_digits()),
                })
            })
        })
        .collect();
    Ok(pretty(&json!({"config": r.cfg.name, "digits": r.opts().output_digits, "places": places})))
}

fn integrate(r: &Run) -> Result<String, Failure> {
    let d = r.cycle()?;
    let opts = r.opts();
    let lattice = invariant_measure_lattice(&r.group, 2)?;
    let res = integrate_riemann(&lattice, &d, &opts)?;
    let values = res.values.iter().map(|v| Ok(json!(v.to_record()?))).collect::<Result<Vec<_>, IntegrationError>>()?;
    let mut out = json!({
        "config": r.cfg.name,
        "cycle": d.to_records(),
        "values": values,
        "depth": res.depth,
        "stable_digits": res.stable_digits,
    });
    if let (Some(len), 1) = (r.cli.wordlen, r.group.places()) {
        let f = r.group.schottky(0)?;
        let (x, y) = &d.terms[0].places[0];
        if d.terms.len() == 1 {
            let series = (0..f.rank())
                .map(|i| Ok(r.scalar(&integrate_series_to(f, i, x, y, opts.output_digits, len)?.value)))
                .collect::<Result<Vec<_>, IntegrationError>>()?;
            out["series"] = json!(series);
        }
    }
    Ok(pretty(&out))
}

fn aj(r: &Run) -> Result<String, Failure> {
    let d = r.cycle()?;
    let opts = r.opts();
    let lattice = period_lattice(&r.group, &opts)?;
    let j = abel_jacobi(&r.group, &lattice, &d, &opts)?;
    let factors: Vec<Vec<Value>> = j.factors.iter().map(|f| f.iter().map(|x| r.scalar(x)).collect()).collect();
    Ok(pretty(&json!({"config": r.cfg.name, "cycle": d.to_records(), "factors": factors})))
}

fn hecke(r: &Run) -> Result<String, Failure> {
    let path = r.cli.morphism.as_ref().ok_or_else(|| Failure::new(1, "hecke needs --morphism"))?;
    let m = MorphismConfig::load(path)?;
    let place = m.place(&r.group)?;
    let f = r.group.schottky(place)?;
    let source = m.source.build(f)?;
    let target = m.target.build(f)?;
    let morphism = validate_morphism(&m.matrix(place)?, &source, &target, m.word_bound)?;
    let maps = lattice_maps(&morphism)?;
    let samples = m
        .samples
        .iter()
        .map(|s| PlecticCycle::from_records(s, r.cfg.p, r.cfg.precision))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| Failure::new(1, e.to_string()))?;
    let report = functoriality_check(&morphism, &samples, &r.opts())?;
    let out = pretty(&json!({
        "config": r.cfg.name,
        "place": place,
        "index": morphism.index,
        "image_words": morphism.image_words.iter().map(|w| w.to_string()).collect::<Vec<_>>(),
        "coset_reps": morphism.coset_reps.iter().map(|w| w.to_string()).collect::<Vec<_>>(),
        "maps": maps,
        "functoriality": report,
    }));
    if !report.passed() {
        return Err(Failure::new(4, out));
    }
    Ok(out)
}

fn verify(r: &Run) -> Result<String, Failure> {
    let rep = run_suite(&r.cfg, &r.cli.suite)?;
    let out = pretty(&json!(rep));
    if !rep.passed() {
        return Err(Failure::new(4, out));
    }
    Ok(out)
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json");
    s.push('\n');
    s
}

fn emit(cli: &Cli, text: &str) -> Result<(), Failure> {
    match &cli.out {
        Some(path) => std::fs::write(path, text).map_err(|e| Failure::new(1, format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let path = cli.config.clone().ok_or_else(|| Failure::new(1, "--config is required"))?;
    let mut cfg = GroupConfig::load(&path)?;
    if cfg.name.is_empty() {
        cfg.name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if matches!(cli.depth, Some(0)) || matches!(cli.digits, Some(0)) || matches!(cli.wordlen, Some(0)) {
        return Err(Failure::new(1, "bounds must be positive"));
    }
    let group = cfg.build()?;
    let r = Run { cli, cfg, group };
    let result = match r.cli.command {
        Command::Limitset => limitset(&r),
        Command::Tree => tree(&r),
        Command::Measures => measures(&r),
        Command::Periods => periods(&r),
        Command::Integrate => integrate(&r),
        Command::Aj => aj(&r),
        Command::Hecke => hecke(&r),
        Command::Verify => verify(&r),
    };
    match result {
        Ok(text) => emit(&r.cli, &text),
        Err(f) if f.code == 4 && f.message.starts_with('{') => {
            emit(&r.cli, &f.message)?;
            Err(Failure::new(4, "invariant failure"))
        }
        Err(f) => Err(f),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
