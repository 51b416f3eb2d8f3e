//! Command line interface.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};

use hwave_core::analysis::{annuli, bmo, operators, sums};
use hwave_core::mra::{build_gram_system, chain_constants, gram_decay, verify_chain_constants, verify_mra};
use hwave_core::nets::{build_nets, verify_nets};
use hwave_core::order::{build_reference_order, verify_order};
use hwave_core::randomized::{
    boundary_study, sample_omega, theoretical_eta, verify_center_sandwich, verify_cubes, DyadicSampler,
};
use hwave_core::space::{compute_constants, fixture_a, fixture_b};
use hwave_core::splines::{
    compute_splines_exact, compute_splines_mc, holder_profile, mc_deviation, transition_probabilities,
    verify_splines, verify_transitions,
};
use hwave_core::wavelets::{build_wavelet_basis, decay_and_regularity, verify_wavelets};
use hwave_core::{FiniteSpace, Mode, Pipeline, Report, SpaceSpec, WeightRule};

use crate::formats::{self, BasisFile};
use crate::report::{summary_lines, ReportJson};

#[derive(Debug, Parser)]
#[command(name = "hwave", version, about = "Randomized dyadic cubes, splines and wavelets on finite spaces")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Global {
    /// `fix-a`, `fix-b`, a generator such as `cycle(64)`, or a space file.
    #[arg(long, global = true, default_value = "fix-b")]
    pub space: String,
    /// `counting`, `uniform` or a comma-separated list; generators only.
    #[arg(long, global = true, default_value = "uniform")]
    pub weights: String,
    #[arg(long, global = true, default_value_t = 0.25)]
    pub delta: f64,
    /// `strict` or `relaxed`.
    #[arg(long, global = true, default_value = "relaxed")]
    pub mode: String,
    #[arg(long, global = true, default_value_t = 1)]
    pub seed: u64,
    /// Output directory for artifacts and reports.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Structural constants; writes `space.json`.
    Space,
    /// Builds and checks nets and the reference order; writes `nets.json`.
    Nets {
        /// Check an existing net file instead of building one.
        #[arg(long)]
        nets: Option<PathBuf>,
    },
    /// Samples ω and checks the cubes; writes `system.json`.
    Cubes {
        #[arg(long, default_value_t = 10)]
        samples: u64,
        /// Run the boundary-layer study and write `boundary.tsv`.
        #[arg(long)]
        boundary: bool,
        /// Points for the boundary study.
        #[arg(long, value_delimiter = ',', default_value = "0")]
        points: Vec<usize>,
        /// Level for the boundary study; defaults to `k_coarse + 1`.
        #[arg(long, allow_hyphen_values = true)]
        level: Option<i32>,
        #[arg(long, value_delimiter = ',', default_value = "0.5,0.25,0.125,0.0625")]
        eps: Vec<f64>,
        /// Monte Carlo samples for the boundary study.
        #[arg(long, default_value_t = 10_000)]
        mc: u64,
    },
    /// Transition matrices and splines; writes `splines.tsv`.
    Splines {
        /// Cross-check the exact table against this many Monte Carlo samples.
        #[arg(long)]
        mc: Option<u64>,
        /// Report Hölder profiles at the theoretical exponent.
        #[arg(long)]
        holder: bool,
    },
    /// Gram matrices, inverses and decay; writes `gram-<k>.csv`.
    Mra,
    /// Wavelet basis; writes `basis.json`.
    Wavelets,
    /// Function-space and operator diagnostics.
    Analyze {
        #[arg(value_enum)]
        what: Analysis,
        /// Basis file that must match the rebuilt basis.
        #[arg(long)]
        basis: Option<PathBuf>,
        #[arg(long, default_value_t = 20)]
        samples: usize,
    },
    /// Every structural check of every stage.
    Verify {
        #[arg(long, default_value_t = 10)]
        samples: u64,
    },
    /// Writes every artifact and runs all checks and analyses.
    Run {
        #[arg(long, default_value_t = 10)]
        samples: u64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Analysis {
    Dichotomy,
    Sums,
    Bmo,
    Carleson,
    Paraproduct,
    Operator,
}

impl Analysis {
    fn name(self) -> &'static str {
        match self {
            Analysis::Dichotomy => "dichotomy",
            Analysis::Sums => "sums",
            Analysis::Bmo => "bmo",
            Analysis::Carleson => "carleson",
            Analysis::Paraproduct => "paraproduct",
            Analysis::Operator => "operator",
        }
    }
}

/// Resolves `--space` and `--weights`.
pub fn resolve_space(spec: &str, weights: &str) -> Result<FiniteSpace> {
    match spec {
        "fix-a" | "FIX-A" => return Ok(fixture_a()),
        "fix-b" | "FIX-B" => return Ok(fixture_b()),
        _ => {}
    }
    let path = Path::new(spec);
    if path.is_file() {
        return formats::load_space(path).with_context(|| format!("space: loading {spec}"));
    }
    let gen: SpaceSpec = spec.parse().context("space")?;
    let rule: WeightRule = weights.parse().context("space")?;
    gen.generate(&rule).context("space")
}

fn parse_mode(mode: &str) -> Result<Mode> {
    mode.parse().context("mode")
}

/// Builds every stage, naming the stage on failure.
pub fn build_pipeline(space: FiniteSpace, delta: f64, mode: Mode) -> Result<Pipeline> {
    let constants = compute_constants(&space);
    let h = build_nets(&space, constants.a0, delta, mode).context("nets")?;
    let order = build_reference_order(&space, &h).context("order")?;
    let sampler = DyadicSampler::new(&space, &h, &order).context("cubes")?;
    let ts = transition_probabilities(&h, &sampler);
    let table = compute_splines_exact(&h, &ts);
    let gs = build_gram_system(&space, &h, &table).context("mra")?;
    let eta = theoretical_eta(&order, delta);
    let basis = build_wavelet_basis(&space, &h, &table, &gs, eta).context("wavelets")?;
    Ok(Pipeline {
        space,
        constants,
        h,
        order,
        sampler,
        ts,
        table,
        gs,
        basis,
        eta,
    })
}

struct Session {
    g: Global,
    mode: Mode,
    out: Vec<String>,
}

impl Session {
    fn artifact(&self, name: &str, contents: &str) -> Result<()> {
        let path = self.g.out.join(name);
        formats::write(&path, contents)?;
        Ok(())
    }

    fn finish(&mut self, command: &str, report: &Report, values: Map<String, Value>) -> Result<bool> {
        let json = ReportJson::new(command, &self.g.space, self.g.delta, &self.g.mode, self.g.seed, report, values);
        self.artifact(&format!("report-{command}.json"), &json.to_json())?;
        self.out.extend(summary_lines(report));
        let failed = report.failures().count();
        self.out.push(format!(
            "{command}: {} checks, {} failed",
            report.checks.len(),
            failed
        ));
        Ok(failed == 0)
    }

    fn pipeline(&self) -> Result<Pipeline> {
        let space = resolve_space(&self.g.space, &self.g.weights)?;
        build_pipeline(space, self.g.delta, self.mode)
    }
}

/// Runs a parsed command; returns whether every check passed together with
/// the lines to print.
pub fn execute(cli: Cli) -> Result<(bool, Vec<String>)> {
    let mode = parse_mode(&cli.global.mode)?;
    if !(cli.global.delta > 0.0 && cli.global.delta < 1.0) {
        bail!("delta must lie in (0, 1)");
    }
    let mut s = Session {
        g: cli.global,
        mode,
        out: Vec::new(),
    };
    let ok = match cli.command {
        Command::Space => cmd_space(&mut s)?,
        Command::Nets { nets } => cmd_nets(&mut s, nets.as_deref())?,
        Command::Cubes {
            samples,
            boundary,
            points,
            level,
            eps,
            mc,
        } => cmd_cubes(&mut s, samples, boundary.then_some((points, level, eps, mc)))?,
        Command::Splines { mc, holder } => cmd_splines(&mut s, mc, holder)?,
        Command::Mra => cmd_mra(&mut s)?,
        Command::Wavelets => cmd_wavelets(&mut s)?,
        Command::Analyze { what, basis, samples } => {
            let p = s.pipeline()?;
            if let Some(path) = basis {
                check_basis_file(&path, &p)?;
            }
            let (report, values) = analyze(&p, what, samples, s.g.seed)?;
            s.finish(&format!("analyze-{}", what.name()), &report, values)?
        }
        Command::Verify { samples } => {
            let p = s.pipeline()?;
            s.finish("verify", &p.verify(s.g.seed, samples), Map::new())?
        }
        Command::Run { samples } => cmd_run(&mut s, samples)?,
    };
    Ok((ok, s.out))
}

fn check_basis_file(path: &Path, p: &Pipeline) -> Result<()> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let file: BasisFile = serde_json::from_str(&text).context("basis file")?;
    let m = file.matrix()?;
    if m.shape() != p.basis.matrix().shape() || (&m - p.basis.matrix()).amax() > 1e-12 {
        bail!("basis file {} does not match the basis rebuilt from the configuration", path.display());
    }
    Ok(())
}

fn constants_json(p: &FiniteSpace) -> Map<String, Value> {
    let c = compute_constants(p);
    let mut m = Map::new();
    m.insert("n".into(), json!(p.n()));
    m.insert("a0".into(), json!(c.a0));
    m.insert("a0_witness".into(), json!(c.a0_witness));
    m.insert("n_geo".into(), json!(c.n_geo));
    m.insert("n_geo_exact".into(), json!(c.n_geo_exact));
    m.insert("cmu2".into(), json!(c.cmu2));
    m.insert("cmu_annulus".into(), json!(c.cmu_annulus));
    m.insert("diam".into(), json!(c.diam));
    m.insert("min_sep".into(), json!(c.min_sep));
    m
}

fn cmd_space(s: &mut Session) -> Result<bool> {
    let space = resolve_space(&s.g.space, &s.g.weights)?;
    s.artifact("space.json", &formats::space_json(&space))?;
    let values = constants_json(&space);
    s.out.push(serde_json::to_string_pretty(&values)?);
    s.finish("space", &Report::new(), values)
}

fn cmd_nets(s: &mut Session, file: Option<&Path>) -> Result<bool> {
    let space = resolve_space(&s.g.space, &s.g.weights)?;
    let (h, order) = match file {
        Some(path) => formats::load_nets(path, &space).context("nets")?,
        None => {
            let a0 = compute_constants(&space).a0;
            let h = build_nets(&space, a0, s.g.delta, s.mode).context("nets")?;
            let order = build_reference_order(&space, &h).context("order")?;
            s.artifact("nets.json", &formats::nets_json(&h, &order))?;
            (h, order)
        }
    };
    let mut report = verify_nets(&space, &h);
    report.extend(verify_order(&space, &h, &order));
    let mut values = Map::new();
    values.insert("k_coarse".into(), json!(h.k_coarse()));
    values.insert("k_fine".into(), json!(h.k_fine()));
    values.insert("level_sizes".into(), json!(h.levels().iter().map(Vec::len).collect::<Vec<_>>()));
    values.insert("L".into(), json!(order.l()));
    values.insert("M".into(), json!(order.m()));
    s.finish("nets", &report, values)
}

type BoundaryArgs = (Vec<usize>, Option<i32>, Vec<f64>, u64);

fn cmd_cubes(s: &mut Session, samples: u64, boundary: Option<BoundaryArgs>) -> Result<bool> {
    let p = s.pipeline()?;
    let mut report = Report::new();
    for i in 0..samples.max(1) {
        let sys = p.sampler.system(&p.h, &sample_omega(&p.order, s.g.seed, i));
        if i == 0 {
            s.artifact("system.json", &formats::system_json(&p.h, &sys))?;
        }
        report.extend(verify_cubes(&p.space, &p.h, &sys));
        report.extend(verify_center_sandwich(&p.space, &p.h, &sys));
    }
    let mut values = Map::new();
    values.insert("eta".into(), json!(p.eta));
    values.insert("tau".into(), json!(p.order.tau()));
    if let Some((points, level, eps, mc)) = boundary {
        let k = level.unwrap_or(p.h.k_coarse() + 1);
        if let Some(&x) = points.iter().find(|&&x| x >= p.space.n()) {
            bail!("cubes: point {x} out of range");
        }
        let rows = boundary_study(&p.space, &p.h, &p.order, &p.sampler, &points, k, &eps, mc, s.g.seed)
            .context("cubes")?;
        let flat: Vec<_> = rows.iter().flatten().copied().collect();
        s.artifact("boundary.tsv", &formats::boundary_tsv(&flat))?;
        let mut bad = Vec::new();
        for r in &flat {
            if r.estimate > r.theory_bound + 4.0 * r.stderr {
                bad.push(hwave_core::randomized::describe(r));
            }
        }
        report.exact(
            "cubes.boundary_layer",
            "P(d(x, Q^c) < εδ^k) ≤ (7A0⁶)^η ε^η",
            bad,
        );
    }
    s.finish("cubes", &report, values)
}

fn cmd_splines(s: &mut Session, mc: Option<u64>, holder: bool) -> Result<bool> {
    let p = s.pipeline()?;
    s.artifact("splines.tsv", &formats::splines_tsv(&p.h, &p.table))?;
    let mut report = verify_transitions(&p.space, &p.h, &p.ts);
    report.extend(verify_splines(&p.space, &p.h, &p.ts, &p.table));
    let mut values = Map::new();
    if let Some(n) = mc {
        let est = compute_splines_mc(&p.h, &p.order, &p.sampler, n, s.g.seed).context("splines")?;
        let (dev, z) = mc_deviation(&p.table, &est);
        values.insert("mc_max_deviation".into(), json!(dev));
        values.insert("mc_max_z".into(), json!(z.is_finite().then_some(z)));
        report.margin(
            "splines.monte_carlo",
            "Monte Carlo frequencies agree with exact splines within 5 standard errors",
            5.0,
            5.0 - z,
            format!("max deviation {dev:.3e} over {n} samples"),
        );
    }
    if holder {
        let mut profiles = Vec::new();
        for k in p.h.level_range() {
            let hp = holder_profile(&p.space, &p.h, &p.table, k, p.eta, None).context("splines")?;
            profiles.push(json!({"level": k, "exponent": hp.exponent, "constant": hp.constant}));
        }
        values.insert("holder".into(), Value::Array(profiles));
    }
    s.finish("splines", &report, values)
}

fn cmd_mra(s: &mut Session) -> Result<bool> {
    let p = s.pipeline()?;
    for lv in p.gs.levels() {
        s.artifact(&format!("gram-{}.csv", lv.level), &formats::matrix_csv(&lv.gram))?;
        s.artifact(&format!("gram-inverse-{}.csv", lv.level), &formats::matrix_csv(&lv.inverse))?;
    }
    let mut report = verify_mra(&p.space, &p.h, &p.ts, &p.table, &p.gs, s.g.seed);
    let kappa = chain_constants(&p.space, 6).context("mra")?;
    report.extend(verify_chain_constants(&kappa, p.h.a0()));
    let mut values = Map::new();
    values.insert("chain_constants".into(), json!(kappa));
    let mut decay = Vec::new();
    for lv in p.gs.levels() {
        if let Ok((inv, sq)) = gram_decay(&p.space, &p.h, &p.gs, lv.level) {
            decay.push(json!({
                "level": lv.level,
                "inverse": {"gamma": inv.gamma, "c": inv.c, "exponent": inv.exponent},
                "inv_sqrt": {"gamma": sq.gamma, "c": sq.c, "exponent": sq.exponent},
            }));
        }
    }
    values.insert("decay".into(), Value::Array(decay));
    s.finish("mra", &report, values)
}

fn cmd_wavelets(s: &mut Session) -> Result<bool> {
    let p = s.pipeline()?;
    s.artifact("basis.json", &formats::basis_json(&p.basis))?;
    let report = verify_wavelets(&p.space, &p.h, &p.table, &p.gs, &p.basis, s.g.seed);
    let mut values = Map::new();
    values.insert("members".into(), json!(p.basis.len()));
    values.insert("decay_exponent".into(), json!(p.basis.decay_exponent()));
    let levels: Vec<Value> = decay_and_regularity(&p.space, &p.basis)
        .iter()
        .map(|d| {
            json!({
                "level": d.level,
                "members": d.members,
                "gamma": d.profile.as_ref().map(|f| f.gamma),
                "c": d.profile.as_ref().map(|f| f.c),
                "holder": d.holder,
            })
        })
        .collect();
    values.insert("levels".into(), Value::Array(levels));
    s.finish("wavelets", &report, values)
}

/// Report and measured values of one analysis.
pub fn analyze(p: &Pipeline, what: Analysis, samples: usize, seed: u64) -> Result<(Report, Map<String, Value>)> {
    let mut values = Map::new();
    let report = match what {
        Analysis::Dichotomy => {
            let scan = annuli::dichotomy_scan(&p.space, p.h.a0());
            values.insert(
                "scan".into(),
                json!({"growth": scan.growth, "empty": scan.empty, "both": scan.both, "failures": scan.failures}),
            );
            let (sup, x, r) = annuli::large_ball_sup(&p.space, &p.h, annuli::SumParams::default());
            values.insert("large_ball_sup".into(), json!({"ratio": sup, "x": x, "r": r}));
            annuli::verify_annuli(&p.space, &p.h)
        }
        Analysis::Sums => {
            let k = sums::kernel_sums(&p.space, &p.basis, samples, seed);
            values.insert("size".into(), json!(k.size));
            values.insert("size_witness".into(), json!(k.size_witness));
            values.insert("difference".into(), json!(k.difference));
            values.insert("modulated".into(), json!(k.modulated));
            let mut r = Report::new();
            r.margin(
                "sums.size",
                "Σ|ψ(x)ψ(y)| ≤ C/V(x,y)",
                0.0,
                if k.size.is_finite() { 1.0 } else { -1.0 },
                format!("C = {:.4}", k.size),
            );
            r.margin(
                "sums.difference",
                "Σ|ψ(x)−ψ(x′)||ψ(y)| ≤ C (d(x,x′)/d(x,y))^η / V(x,y)",
                0.0,
                if k.difference.is_none_or(f64::is_finite) { 1.0 } else { -1.0 },
                format!("C = {:?}", k.difference),
            );
            r.margin(
                "sums.modulated",
                "sign-modulated kernels obey the same size bound",
                1e-12,
                k.size * (1.0 + 1e-12) - k.modulated,
                format!("{} patterns, C = {:.4}", k.patterns, k.modulated),
            );
            r
        }
        Analysis::Bmo => {
            let report = bmo::verify_bmo_carleson(&p.space, &p.h, &p.basis, p.order.parents(), samples, seed)?;
            let nr = bmo::norm_ratios(&p.space, &p.h, &p.basis, p.order.parents(), samples, seed)?;
            values.insert("car_over_bmo".into(), json!({"min": nr.min, "max": nr.max, "samples": nr.samples}));
            report
        }
        Analysis::Carleson => {
            let nr = bmo::norm_ratios(&p.space, &p.h, &p.basis, p.order.parents(), samples, seed)?;
            let b: Vec<f64> = (0..p.space.n()).map(|x| if 2 * x < p.space.n() { 1.0 } else { 0.0 }).collect();
            let field = bmo::CoefficientField::of_function(&p.basis, &b)?;
            let c = bmo::carleson_norm(&p.space, &p.h, &p.basis, p.order.parents(), &field);
            let (lo, hi) =
                bmo::omega_carleson_ratios(&p.space, &p.h, &p.basis, &p.order, &p.sampler, &field, samples as u64, seed);
            values.insert("car_over_bmo".into(), json!({"min": nr.min, "max": nr.max}));
            values.insert("half_indicator".into(), json!({"carleson": c.value, "witness": c.witness}));
            values.insert("omega_over_reference".into(), json!({"min": lo, "max": hi}));
            let mut r = Report::new();
            r.margin(
                "carleson.omega_comparison",
                "Carleson norms with fixed ω cubes are comparable to the reference cubes",
                0.0,
                if lo > 0.0 && hi.is_finite() { 1.0 } else { -1.0 },
                format!("ratio range [{lo:.4}, {hi:.4}]"),
            );
            r.margin(
                "carleson.ratio_interval",
                "‖coefficients‖_Car / ‖b‖_BMO lies in a bounded interval",
                0.0,
                if nr.min > 0.0 && nr.max.is_finite() { 1.0 } else { -1.0 },
                format!("[{:.4}, {:.4}]", nr.min, nr.max),
            );
            r
        }
        Analysis::Paraproduct | Analysis::Operator => {
            let (mut r, ratios) =
                operators::verify_operators(&p.space, &p.h, &p.table, &p.basis, p.order.parents(), samples, seed)?;
            values.insert("paraproduct_over_carleson".into(), json!({"min": ratios.min, "max": ratios.max}));
            if what == Analysis::Operator {
                let n = p.space.n();
                let eps = p.basis.eta() / 2.0;
                let op = operators::kernel_to_operator(&p.space, &operators::hilbert_kernel(n))?;
                let d = operators::operator_diagnostics(&p.space, &p.basis, &op, eps)?;
                let cz = operators::cz_kernel_check(&p.space, p.h.a0(), &operators::hilbert_kernel(n), p.eta)?;
                values.insert(
                    "hilbert".into(),
                    json!({"norm": d.norm, "schur_row": d.schur.row, "schur_col": d.schur.col, "c0": d.c0,
                           "cz_size": cz.size, "cz_y": cz.y_regularity, "cz_x": cz.x_regularity}),
                );
                values.insert(
                    "size_redundancy".into(),
                    json!(operators::size_redundancy(&p.space, &p.basis, 3, seed)),
                );
                r.margin(
                    "operator.cz_constants",
                    "the Hilbert-type kernel has finite size and regularity constants",
                    0.0,
                    if cz.size.is_finite() { 1.0 } else { -1.0 },
                    format!("size {:.4}", cz.size),
                );
            } else {
                r.checks.retain(|c| c.name.starts_with("paraproduct."));
            }
            r
        }
    };
    Ok((report, values))
}

fn cmd_run(s: &mut Session, samples: u64) -> Result<bool> {
    let p = s.pipeline()?;
    s.artifact("space.json", &formats::space_json(&p.space))?;
    s.artifact("nets.json", &formats::nets_json(&p.h, &p.order))?;
    let sys = p.sampler.system(&p.h, &sample_omega(&p.order, s.g.seed, 0));
    s.artifact("system.json", &formats::system_json(&p.h, &sys))?;
    s.artifact("splines.tsv", &formats::splines_tsv(&p.h, &p.table))?;
    for lv in p.gs.levels() {
        s.artifact(&format!("gram-{}.csv", lv.level), &formats::matrix_csv(&lv.gram))?;
    }
    s.artifact("basis.json", &formats::basis_json(&p.basis))?;
    let mut report = p.verify(s.g.seed, samples);
    let mut values = constants_json(&p.space);
    values.insert("members".into(), json!(p.basis.len()));
    for what in [
        Analysis::Dichotomy,
        Analysis::Sums,
        Analysis::Bmo,
        Analysis::Carleson,
        Analysis::Operator,
    ] {
        let (r, v) = analyze(&p, what, 10, s.g.seed)?;
        report.extend(r);
        values.insert(what.name().into(), Value::Object(v));
    }
    s.finish("run", &report, values)
}
