use std::fs;
use std::path::PathBuf;

use ltfade_core::{
    counterexample, db_to_linear, ensure_agreement, llb, no_csi_strict, run_sweep, strict_delay_optimal, tlb,
    BoundDetail, CompositeSource, CounterexampleSpec, Error, EstimatorMode, FadingChannel, PointSpec, Result,
    SimStrategy, SweepSpec, DEFAULT_U_MAX,
};

use crate::args::{Cli, Command, Figure, Mode};
use crate::config::{ExperimentConfig, Format};
use crate::lists;
use crate::svg::render_csv;
use crate::table::{to_csv_string, Row};

pub const DEFAULT_BLOCKS: usize = 20_000;
pub const DEFAULT_SEED: u64 = 1;
const POWER_GRID: &str = "-5:30:5";

/// Flags merged over the config file; flags win.
#[derive(Debug, Clone)]
pub struct Settings {
    pub config: ExperimentConfig,
    pub seed: u64,
    pub blocks: usize,
    pub calibration_blocks: usize,
    pub powers_db: Option<Vec<f64>>,
    pub delays: Option<Vec<usize>>,
    pub strategies: Option<Vec<SimStrategy>>,
    pub mode: EstimatorMode,
    pub u_max: usize,
    pub format: Option<Format>,
    pub out: Option<PathBuf>,
}

fn parse_strategies(items: &[String]) -> Result<Vec<SimStrategy>> {
    items
        .iter()
        .flat_map(|s| s.split(','))
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| SimStrategy::parse(s).ok_or_else(|| Error::Config(format!("unknown strategy '{s}'"))))
        .collect()
}

fn parse_mode(s: &str) -> Result<EstimatorMode> {
    match s {
        "analytic" => Ok(EstimatorMode::Analytic),
        "sampled" => Ok(EstimatorMode::NoiseSampled),
        _ => Err(Error::Config(format!("unknown estimator mode '{s}'"))),
    }
}

impl Settings {
    pub fn new(cli: &Cli) -> Result<Self> {
        let config = match &cli.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        let st = &config.strategy;
        let powers_db = match (&cli.power_db, &st.power_db) {
            (Some(t), _) => Some(lists::powers_db(t)?),
            (None, Some(v)) => Some(v.to_vec()),
            _ => None,
        };
        if let Some(p) = powers_db.iter().flatten().find(|p| p.is_nan() || **p == f64::INFINITY) {
            return Err(Error::Config(format!("power {p} dB is not usable")));
        }
        let delays = match (&cli.delay, &st.delay) {
            (Some(t), _) => Some(lists::delays(t)?),
            (None, Some(v)) if v.to_vec().contains(&0) => {
                return Err(Error::Config("delays must be at least 1".into()))
            }
            (None, Some(v)) => Some(v.to_vec()),
            _ => None,
        };
        let (flag_strategy, flag_mode, flag_cal, flag_umax) = match &cli.command {
            Command::Simulate { strategy, mode, calibration_blocks } => {
                (strategy.clone(), *mode, *calibration_blocks, None)
            }
            Command::CompareModes { strategy } => (strategy.clone(), None, None, None),
            Command::Bounds { u_max } | Command::Figure { u_max, .. } => (None, None, None, *u_max),
            _ => (None, None, None, None),
        };
        let strategies = match (flag_strategy, &st.kind) {
            (Some(s), _) => Some(parse_strategies(&[s])?),
            (None, Some(k)) => Some(parse_strategies(&k.to_vec())?),
            _ => None,
        };
        let mode = match (flag_mode, &st.mode) {
            (Some(Mode::Analytic), _) => EstimatorMode::Analytic,
            (Some(Mode::Sampled), _) => EstimatorMode::NoiseSampled,
            (None, Some(m)) => parse_mode(m)?,
            _ => EstimatorMode::Analytic,
        };
        let blocks = cli.blocks.or(st.blocks).unwrap_or(DEFAULT_BLOCKS);
        if blocks == 0 {
            return Err(Error::Config("blocks must be at least 1".into()));
        }
        let u_max = flag_umax.or(st.u_max).unwrap_or(DEFAULT_U_MAX);
        if u_max == 0 {
            return Err(Error::Config("u_max must be at least 1".into()));
        }
        Ok(Self {
            seed: cli.seed.or(st.seed).unwrap_or(DEFAULT_SEED),
            blocks,
            calibration_blocks: flag_cal.or(st.calibration_blocks).unwrap_or(0),
            powers_db,
            delays,
            strategies,
            mode,
            u_max,
            format: cli.format.or(config.output.format),
            out: cli.out.clone().or_else(|| config.output.dir.clone()),
            config,
        })
    }

    fn powers(&self, default: &str) -> Vec<f64> {
        self.powers_db.clone().unwrap_or_else(|| lists::powers_db(default).expect("valid default grid"))
    }

    fn delays_or(&self, default: &[usize]) -> Vec<usize> {
        self.delays.clone().unwrap_or_else(|| default.to_vec())
    }

    fn model(&self, channel: FadingChannel) -> Result<(CompositeSource, FadingChannel)> {
        Ok((self.config.source(CompositeSource::reference())?, self.config.channel(channel)?))
    }

    fn sweep(&self, strategies: Vec<SimStrategy>, delays: Vec<usize>, powers_db: Vec<f64>) -> SweepSpec {
        SweepSpec {
            strategies,
            delays,
            powers_db,
            blocks: self.blocks,
            calibration_blocks: self.calibration_blocks,
            seed: self.seed,
            mode: self.mode,
        }
    }
}

/// What a command produced.
#[derive(Debug, Default)]
pub struct Report {
    pub name: String,
    /// `None` for commands that only print text.
    pub rows: Option<Vec<Row>>,
    pub lines: Vec<String>,
    /// A finished plot, for commands that render one directly.
    pub svg: Option<String>,
    pub warnings: Vec<String>,
    /// Reported after the output has been written.
    pub failure: Option<Error>,
}

impl Report {
    fn table(name: &str, rows: Vec<Row>) -> Self {
        Self { name: name.to_string(), rows: Some(rows), ..Self::default() }
    }
}

pub fn execute(cli: &Cli, settings: &Settings) -> Result<Report> {
    match &cli.command {
        Command::StrictDelay => strict_delay(settings),
        Command::Simulate { .. } => simulate(settings),
        Command::Figure { name, .. } => figure(settings, *name),
        Command::Bounds { .. } => bounds(settings),
        Command::NoCsi => no_csi(settings),
        Command::Counterexample { p1, variance, magnitude, power, p11, p12, p21 } => {
            let spec = match (p11, p12, p21) {
                (Some(a), Some(b), Some(c)) => {
                    CounterexampleSpec::new(*p1, *variance, *magnitude, *power, (*a, *b, *c))
                }
                (Some(a), _, _) => CounterexampleSpec::from_split(*p1, *variance, *magnitude, *power, *a),
                _ => CounterexampleSpec::equal_split(*p1, *variance, *magnitude, *power),
            }?;
            Ok(counterexample_report(&spec))
        }
        Command::CompareModes { .. } => compare(settings),
        Command::Render { csv } => {
            let text =
                fs::read_to_string(csv).map_err(|e| Error::Config(format!("{}: {e}", csv.display())))?;
            let svg = render_csv(&text).map_err(|e| Error::Config(format!("{}: {e}", csv.display())))?;
            let name = csv.file_stem().and_then(|s| s.to_str()).unwrap_or("plot").to_string();
            Ok(Report { name, svg: Some(svg), ..Report::default() })
        }
    }
}

fn strict_delay(s: &Settings) -> Result<Report> {
    let (src, ch) = s.model(FadingChannel::reference_discrete())?;
    let mut rows = Vec::new();
    for db in s.powers(POWER_GRID) {
        let t = strict_delay_optimal(&src, &ch, db_to_linear(db))?;
        rows.push(Row::analytic(
            "strict",
            1,
            db,
            t.average_distortion,
            t.average_power,
            t.multiplier.value,
            s.seed,
        ));
    }
    Ok(Report::table("strict_delay", rows))
}

fn sweep_rows(
    spec: &SweepSpec,
    src: &CompositeSource,
    ch: &FadingChannel,
    report: &mut Report,
) -> Result<Vec<Row>> {
    let points = run_sweep(spec, src, ch)?;
    let mut failed = Vec::new();
    for p in &points {
        if let Some(f) = &p.failure {
            failed.push(format!("{} d={} {} dB: {f}", p.strategy.name(), p.delay, p.power_db));
        } else if !p.mse_ci95.is_finite() {
            report.warnings.push(format!(
                "{} d={} {} dB: fewer than 30 blocks, no confidence interval",
                p.strategy.name(),
                p.delay,
                p.power_db
            ));
        }
    }
    if !failed.is_empty() {
        report.failure =
            Some(Error::Numerical(format!("{} point(s) failed; {}", failed.len(), failed.join("; "))));
    }
    Ok(points.iter().map(Row::from_estimate).collect())
}

fn simulate(s: &Settings) -> Result<Report> {
    let (src, ch) = s.model(FadingChannel::reference_rayleigh())?;
    let strategies = s.strategies.clone().unwrap_or(vec![SimStrategy::Lthm, SimStrategy::Ltsm]);
    let spec = s.sweep(strategies, s.delays_or(&[1, 3, 9]), s.powers("10"));
    let mut report = Report::table("simulate", Vec::new());
    report.rows = Some(sweep_rows(&spec, &src, &ch, &mut report)?);
    Ok(report)
}

fn tlb_row(
    name: &str,
    d: usize,
    db: f64,
    src: &CompositeSource,
    ch: &FadingChannel,
    csi: bool,
    seed: u64,
) -> Result<Row> {
    let b = tlb(src, ch, db_to_linear(db), csi)?;
    let mu = match &b.detail {
        BoundDetail::Tlb { capacity, .. } => capacity.alpha.map_or(f64::NAN, |a| a.value),
        BoundDetail::Llb { .. } => f64::NAN,
    };
    Ok(Row::analytic(name, d, db, b.distortion, db_to_linear(db), mu, seed))
}

fn llb_row(
    d: usize,
    db: f64,
    src: &CompositeSource,
    ch: &FadingChannel,
    s: &Settings,
    report: &mut Report,
) -> Result<Row> {
    let b = llb(src, ch, d, db_to_linear(db), s.u_max)?;
    let BoundDetail::Llb { best_u, zeta, capped, failures, .. } = &b.detail else {
        unreachable!("llb returns its own detail")
    };
    if *capped {
        report.warnings.push(format!(
            "llb d={d} at {db} dB: maximising window ū={best_u} sits on the search cap; raise --u-max"
        ));
    }
    for (u, e) in failures {
        report.warnings.push(format!("llb d={d} at {db} dB: window ū={u} failed: {e}"));
    }
    Ok(Row::analytic("llb", d, db, b.distortion, db_to_linear(db), *zeta, s.seed))
}

fn bounds(s: &Settings) -> Result<Report> {
    let (src, ch) = s.model(FadingChannel::reference_rayleigh())?;
    let mut report = Report::table("bounds", Vec::new());
    let mut rows = Vec::new();
    for db in s.powers(POWER_GRID) {
        rows.push(tlb_row("tlb_csi", 0, db, &src, &ch, true, s.seed)?);
        rows.push(tlb_row("tlb_no_csi", 0, db, &src, &ch, false, s.seed)?);
        for d in s.delays_or(&[1]) {
            rows.push(llb_row(d, db, &src, &ch, s, &mut report)?);
        }
    }
    report.rows = Some(rows);
    Ok(report)
}

fn no_csi(s: &Settings) -> Result<Report> {
    let (src, ch) = s.model(FadingChannel::reference_discrete())?;
    let mut rows = Vec::new();
    for db in s.powers(POWER_GRID) {
        let t = no_csi_strict(&src, &ch, db_to_linear(db))?;
        rows.push(Row::analytic(
            "strict_no_csi",
            1,
            db,
            t.average_distortion,
            t.average_power,
            t.multiplier.value,
            s.seed,
        ));
        rows.push(tlb_row("tlb_no_csi", 0, db, &src, &ch, false, s.seed)?);
    }
    Ok(Report::table("no_csi", rows))
}

pub fn verdict(d1: f64, d2: f64) -> &'static str {
    if d2 < d1 {
        "non-diagonal wins"
    } else if d2 > d1 {
        "diagonal wins"
    } else {
        "tie"
    }
}

fn counterexample_report(spec: &CounterexampleSpec) -> Report {
    let (d1, d2) = counterexample(spec);
    let lines = vec![
        format!(
            "p1={} variance={} magnitude={} power={} P11={:.6} P12={:.6} P21={:.6}",
            spec.p1, spec.variance, spec.magnitude, spec.power, spec.p11, spec.p12, spec.p21
        ),
        format!("D1 (one-to-one) = {d1:.6}"),
        format!("D2 (repeated)   = {d2:.6}"),
        format!("verdict: {}", verdict(d1, d2)),
    ];
    Report { name: "counterexample".into(), lines, ..Report::default() }
}

fn compare(s: &Settings) -> Result<Report> {
    let point = |strategy, delay, power_db| PointSpec {
        strategy,
        delay,
        power_db,
        blocks: s.blocks,
        calibration_blocks: s.calibration_blocks,
        seed: s.seed,
        mode: EstimatorMode::Analytic,
    };
    let cases: Vec<(PointSpec, FadingChannel)> = match &s.strategies {
        Some(list) => {
            let mut v = Vec::new();
            for &st in list {
                let fallback = if st == SimStrategy::StrictDelay {
                    FadingChannel::reference_discrete()
                } else {
                    FadingChannel::reference_rayleigh()
                };
                let ch = s.config.channel(fallback)?;
                let delays = if st == SimStrategy::StrictDelay { vec![1] } else { s.delays_or(&[3]) };
                for d in delays {
                    for db in s.powers("10") {
                        v.push((point(st, d, db), ch.clone()));
                    }
                }
            }
            v
        }
        None => vec![
            (
                point(SimStrategy::StrictDelay, 1, 10.0),
                s.config.channel(FadingChannel::reference_discrete())?,
            ),
            (point(SimStrategy::Lthm, 3, 10.0), s.config.channel(FadingChannel::reference_rayleigh())?),
            (point(SimStrategy::Ltsm, 5, 10.0), s.config.channel(FadingChannel::reference_rayleigh())?),
        ],
    };
    let src = s.config.source(CompositeSource::reference())?;
    let mut report = Report::table("compare_modes", Vec::new());
    let mut rows = Vec::new();
    let mut disagreements = Vec::new();
    for (p, ch) in &cases {
        let c = match ensure_agreement(p, &src, ch) {
            Ok(c) => c,
            Err(Error::Validation(msg)) => {
                disagreements.push(msg);
                ltfade_core::compare_modes(p, &src, ch)?
            }
            Err(e) => return Err(e),
        };
        report.lines.push(format!(
            "{} d={} {} dB: analytic {:.6} ± {:.6}, sampled {:.6} ± {:.6}: {}",
            p.strategy.name(),
            p.delay,
            p.power_db,
            c.analytic.mse,
            c.analytic.mse_ci95,
            c.sampled.mse,
            c.sampled.mse_ci95,
            if c.agree { "agree" } else { "DISAGREE" }
        ));
        rows.push(Row::from_estimate(&c.analytic));
        let mut sampled = Row::from_estimate(&c.sampled);
        sampled.strategy.push_str("_sampled");
        rows.push(sampled);
    }
    if !disagreements.is_empty() {
        report.failure = Some(Error::Validation(disagreements.join("; ")));
    }
    report.rows = Some(rows);
    Ok(report)
}

fn figure(s: &Settings, name: Figure) -> Result<Report> {
    let powers = s.powers(POWER_GRID);
    match name {
        Figure::Fig4 | Figure::Fig5 => {
            let (strategy, channel, tag) = if name == Figure::Fig4 {
                (SimStrategy::Lthm, FadingChannel::reference_discrete(), "fig4")
            } else {
                (SimStrategy::Ltsm, FadingChannel::reference_rayleigh(), "fig5")
            };
            let (src, ch) = s.model(channel)?;
            let mut report = Report::table(tag, Vec::new());
            let spec = s.sweep(vec![strategy], s.delays_or(&[1, 3, 9, 41]), powers.clone());
            let mut rows = sweep_rows(&spec, &src, &ch, &mut report)?;
            for &db in &powers {
                rows.push(tlb_row("tlb_csi", 0, db, &src, &ch, true, s.seed)?);
            }
            report.rows = Some(rows);
            Ok(report)
        }
        Figure::Fig6 => {
            let db = match s.powers_db.as_deref() {
                None => 10.0,
                Some([p]) => *p,
                Some(_) => return Err(Error::Config("fig6 takes a single power".into())),
            };
            let (src, ch) = s.model(FadingChannel::reference_rayleigh())?;
            let delays = s.delays_or(&[1, 3, 5, 9, 15, 21]);
            let mut report = Report::table("fig6", Vec::new());
            let spec = s.sweep(vec![SimStrategy::Lthm, SimStrategy::Ltsm], delays.clone(), vec![db]);
            let mut rows = sweep_rows(&spec, &src, &ch, &mut report)?;
            for &d in &delays {
                rows.push(llb_row(d, db, &src, &ch, s, &mut report)?);
            }
            for &d in &delays {
                rows.push(tlb_row("tlb_csi", d, db, &src, &ch, true, s.seed)?);
            }
            report.rows = Some(rows);
            Ok(report)
        }
        Figure::Fig7 => {
            let (src, ch) = s.model(FadingChannel::reference_discrete())?;
            let mut rows = Vec::new();
            for &db in &powers {
                let p = db_to_linear(db);
                let with = strict_delay_optimal(&src, &ch, p)?;
                rows.push(Row::analytic(
                    "strict",
                    1,
                    db,
                    with.average_distortion,
                    with.average_power,
                    with.multiplier.value,
                    s.seed,
                ));
                let without = no_csi_strict(&src, &ch, p)?;
                rows.push(Row::analytic(
                    "strict_no_csi",
                    1,
                    db,
                    without.average_distortion,
                    without.average_power,
                    without.multiplier.value,
                    s.seed,
                ));
                rows.push(tlb_row("tlb_csi", 0, db, &src, &ch, true, s.seed)?);
                rows.push(tlb_row("tlb_no_csi", 0, db, &src, &ch, false, s.seed)?);
            }
            Ok(Report::table("fig7", rows))
        }
    }
}

/// Writes a report to stdout or to `--out`.
pub fn emit(report: &Report, s: &Settings) -> Result<()> {
    let io = |e: std::io::Error| Error::Config(format!("output: {e}"));
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    if let Some(svg) = &report.svg {
        match &s.out {
            Some(dir) => {
                fs::create_dir_all(dir).map_err(io)?;
                let path = dir.join(format!("{}.svg", report.name));
                fs::write(&path, svg).map_err(io)?;
                eprintln!("wrote {}", path.display());
            }
            None => print!("{svg}"),
        }
        return Ok(());
    }
    let Some(rows) = &report.rows else {
        report.lines.iter().for_each(|l| println!("{l}"));
        return Ok(());
    };
    for l in &report.lines {
        eprintln!("{l}");
    }
    let csv = to_csv_string(rows);
    match &s.out {
        Some(dir) => {
            let format = s.format.unwrap_or(Format::Both);
            fs::create_dir_all(dir).map_err(io)?;
            if format.csv() {
                let path = dir.join(format!("{}.csv", report.name));
                fs::write(&path, &csv).map_err(io)?;
                eprintln!("wrote {}", path.display());
            }
            if format.svg() {
                let svg = render_csv(&csv).map_err(|e| Error::Numerical(format!("re-reading csv: {e}")))?;
                let path = dir.join(format!("{}.svg", report.name));
                fs::write(&path, svg).map_err(io)?;
                eprintln!("wrote {}", path.display());
            }
        }
        None => match s.format.unwrap_or(Format::Csv) {
            Format::Csv => print!("{csv}"),
            Format::Svg => print!("{}", render_csv(&csv).map_err(|e| Error::Numerical(e.to_string()))?),
            Format::Both => return Err(Error::Config("--format both needs --out".into())),
        },
    }
    Ok(())
}
