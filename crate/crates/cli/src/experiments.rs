use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use nikishin_core::asymptotics::{
    boundary_product, epsilon_law, joukowski_ratio, nth_root_harness, periodic_product_harness,
    ratio_harness, shift_base, staircase_index, standard_points, to_mp, BoundaryOptions,
    ConvergenceRecord,
};
use nikishin_core::diagnostics::{check_zero_counts, interlacing_for_shift, mass_point_attraction};
use nikishin_core::equilibrium::C64;
use nikishin_core::{
    biorthogonality_matrix, build_interaction_matrix, canonical_sequence, solve_equilibrium,
    EquilibriumOptions, EquilibriumSolution, FormEvaluator, HermitePadeTriple, Interval,
    MultiIndexPair, Shift, SystemPair,
};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{ExperimentConfig, ExperimentKind};

#[derive(Debug)]
pub enum RunError {
    Config(String),
    Numeric(nikishin_core::Error),
    Io(std::io::Error),
}

impl From<nikishin_core::Error> for RunError {
    fn from(e: nikishin_core::Error) -> Self {
        RunError::Numeric(e)
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Io(e)
    }
}

impl From<csv::Error> for RunError {
    fn from(e: csv::Error) -> Self {
        RunError::Io(e.into())
    }
}

type Result<T> = std::result::Result<T, RunError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    Skipped,
}

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub status: Status,
    pub value: Option<f64>,
    pub threshold: Option<f64>,
    pub detail: String,
}

#[derive(Default, Serialize)]
pub struct Report {
    pub checks: Vec<Check>,
    pub metrics: BTreeMap<String, Value>,
}

impl Report {
    fn at_most(&mut self, name: &str, value: f64, threshold: f64, detail: impl Into<String>) {
        let status = if value <= threshold {
            Status::Pass
        } else {
            Status::Fail
        };
        self.checks.push(Check {
            name: name.into(),
            status,
            value: Some(value),
            threshold: Some(threshold),
            detail: detail.into(),
        });
    }

    fn flag(&mut self, name: &str, ok: bool, detail: impl Into<String>) {
        let status = if ok { Status::Pass } else { Status::Fail };
        self.checks.push(Check {
            name: name.into(),
            status,
            value: None,
            threshold: None,
            detail: detail.into(),
        });
    }

    fn skip(&mut self, name: &str, why: impl Into<String>) {
        self.checks.push(Check {
            name: name.into(),
            status: Status::Skipped,
            value: None,
            threshold: None,
            detail: why.into(),
        });
    }

    fn metric(&mut self, key: &str, v: impl Serialize) {
        self.metrics.insert(
            key.into(),
            serde_json::to_value(v).expect("metric serializes"),
        );
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.status != Status::Fail)
    }

    pub fn failing(&self) -> Vec<&str> {
        self.checks
            .iter()
            .filter(|c| c.status == Status::Fail)
            .map(|c| c.name.as_str())
            .collect()
    }
}

struct Ctx<'a> {
    cfg: &'a ExperimentConfig,
    pair: Arc<SystemPair>,
    metrics_dir: std::path::PathBuf,
    plots_dir: std::path::PathBuf,
}

impl Ctx<'_> {
    fn index(&self) -> Result<MultiIndexPair> {
        let n = self.cfg.index.clone().ok_or_else(|| {
            RunError::Config(format!("kind {} needs an index", self.cfg.kind.name()))
        })?;
        if n.m1() != self.cfg.m1() || n.m2() != self.cfg.m2() {
            return Err(RunError::Config(format!(
                "index {n} does not match m1={}, m2={}",
                self.cfg.m1(),
                self.cfg.m2()
            )));
        }
        Ok(n)
    }

    fn sizes(&self) -> Result<&[usize]> {
        if self.cfg.sizes.len() < 2 {
            return Err(RunError::Config(format!(
                "kind {} needs at least two sizes",
                self.cfg.kind.name()
            )));
        }
        Ok(&self.cfg.sizes)
    }

    fn points(&self) -> Vec<C64> {
        match &self.cfg.points {
            Some(ps) => ps.iter().map(|p| C64::new(p[0], p[1])).collect(),
            None => {
                let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
                for spec in std::iter::once(&self.cfg.base)
                    .chain(&self.cfg.s1)
                    .chain(&self.cfg.s2)
                {
                    lo = lo.min(spec.interval.a);
                    hi = hi.max(spec.interval.b);
                }
                standard_points(lo, hi)
            }
        }
    }

    fn points_mp(&self) -> Vec<nikishin_core::Complex> {
        self.points()
            .into_iter()
            .map(|z| to_mp(self.cfg.precision_bits, z))
            .collect()
    }

    fn shift(&self) -> Shift {
        self.cfg.shift.unwrap_or(Shift::new(0, 0))
    }

    fn record(&self, rec: &ConvergenceRecord) -> Result<()> {
        rec.write_csv(File::create(
            self.metrics_dir.join(format!("{}.csv", rec.label)),
        )?)?;
        rec.write_plots(&self.plots_dir)?;
        Ok(())
    }

    fn equilibrium(&self, seed: Option<u64>) -> Result<EquilibriumSolution> {
        let (m1, m2) = (self.cfg.m1(), self.cfg.m2());
        let (p1, p2, panels, max_iter) = match &self.cfg.equilibrium {
            Some(e) => (e.p1.clone(), e.p2.clone(), e.panels_per_set, e.max_iter),
            None => (
                vec![1.0 / (m1 + 1) as f64; m1 + 1],
                vec![1.0 / (m2 + 1) as f64; m2 + 1],
                256,
                50_000,
            ),
        };
        let c = build_interaction_matrix(&p1, &p2).map_err(|e| RunError::Config(e.to_string()))?;
        let sets: Vec<Interval> = (-(m2 as i32)..=m1 as i32)
            .map(|j| self.pair.measure(j).map(|g| g.interval()))
            .collect::<nikishin_core::Result<_>>()?;
        let opts = EquilibriumOptions {
            panels_per_set: panels,
            tol: self.cfg.tolerances.equilibrium,
            max_iter,
            seed,
        };
        Ok(solve_equilibrium(&c, &sets, &opts)?)
    }
}

fn write_residuals(path: &Path, rows: &[nikishin_core::Residual]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["relation", "j", "detail", "value"])?;
    for r in rows {
        w.write_record([
            r.relation.clone(),
            r.j.to_string(),
            r.detail.clone(),
            format!("{:e}", r.value),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn max_value(rows: &[nikishin_core::Residual]) -> f64 {
    rows.iter().map(|r| r.value).fold(0.0, f64::max)
}

/// Runs the experiment, writing metrics/*.csv and plots/*.dat below `out`.
pub fn run(cfg: &ExperimentConfig, out: &Path) -> Result<Report> {
    let pair = cfg.systems().map_err(|e| RunError::Config(e.to_string()))?;
    let metrics_dir = out.join("metrics");
    let plots_dir = out.join("plots");
    fs::create_dir_all(&metrics_dir)?;
    fs::create_dir_all(&plots_dir)?;
    let ctx = Ctx {
        cfg,
        pair,
        metrics_dir,
        plots_dir,
    };
    let mut r = Report::default();
    match cfg.kind {
        ExperimentKind::Mop => mop(&ctx, &mut r)?,
        ExperimentKind::Diagnostics => diagnostics(&ctx, &mut r)?,
        ExperimentKind::Equilibrium => equilibrium(&ctx, &mut r)?,
        ExperimentKind::NthRoot => nth_root(&ctx, &mut r)?,
        ExperimentKind::Ratio => ratio(&ctx, &mut r)?,
        ExperimentKind::HermitePade => hermite_pade(&ctx, &mut r)?,
        ExperimentKind::Biortho => biortho(&ctx, &mut r)?,
    }
    Ok(r)
}

fn mop(ctx: &Ctx, r: &mut Report) -> Result<()> {
    let n = ctx.index()?;
    let f = FormEvaluator::solve(&n, ctx.pair.clone())?;
    let normal = f.solution().check_normality();
    r.flag(
        "normality",
        normal.is_ok(),
        normal.err().map(|e| e.to_string()).unwrap_or_default(),
    );
    let zc = check_zero_counts(&f)?;
    r.flag("zero_counts", zc.ok, n.to_string());
    r.metric("zero_counts", &zc);
    let orth = f.orthogonality_residuals()?;
    r.at_most(
        "orthogonality",
        max_value(&orth),
        ctx.cfg.tolerances.residual,
        "max relative moment residual",
    );
    let rep = f.integral_representation_residuals(&ctx.points_mp())?;
    r.at_most(
        "integral_representation",
        max_value(&rep),
        ctx.cfg.tolerances.residual,
        "max relative gap",
    );
    write_residuals(
        &ctx.metrics_dir.join("residuals.csv"),
        &[orth, rep].concat(),
    )?;
    let mut w = csv::Writer::from_path(ctx.metrics_dir.join("coefficients.csv"))?;
    w.write_record(["j", "power", "value"])?;
    for (j, cs) in f.solution().coeffs.iter().enumerate() {
        for (p, c) in cs.iter().enumerate() {
            w.write_record([j.to_string(), p.to_string(), format!("{:e}", c.to_f64())])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn diagnostics(ctx: &Ctx, r: &mut Report) -> Result<()> {
    let n = ctx.index()?;
    let l = ctx.shift();
    let nl = n.shifted(l).map_err(|e| RunError::Config(e.to_string()))?;
    let f = FormEvaluator::solve(&n, ctx.pair.clone())?;
    let fl = FormEvaluator::solve(&nl, ctx.pair.clone())?;
    let (a, b) = (check_zero_counts(&f)?, check_zero_counts(&fl)?);
    r.flag("zero_counts", a.ok, n.to_string());
    r.flag("zero_counts_shifted", b.ok, nl.to_string());
    r.metric("zero_counts", [&a, &b]);
    match interlacing_for_shift(&f, &fl)? {
        Some(reports) => {
            let bad: Vec<i32> = reports
                .iter()
                .filter(|x| !x.interlaced)
                .map(|x| x.j)
                .collect();
            r.flag("interlacing", bad.is_empty(), format!("failing j: {bad:?}"));
            r.metric("interlacing", &reports);
        }
        None => r.skip("interlacing", "n_{1,m1} < 2"),
    }
    let s = nikishin_core::asymptotics::ShiftedPair { l, n: f, nl: fl };
    let law = epsilon_law(&s)?;
    let bad: Vec<i32> = law.iter().filter(|t| t.1 != t.2).map(|t| t.0).collect();
    r.flag("epsilon_law", bad.is_empty(), format!("failing j: {bad:?}"));
    r.metric("epsilon_law", &law);
    let has_atom = (-(ctx.cfg.m2() as i32)..=ctx.cfg.m1() as i32)
        .any(|j| ctx.pair.measure(j).is_ok_and(|g| g.has_atoms()));
    if has_atom && ctx.cfg.sizes.len() >= 2 {
        let samples: Vec<MultiIndexPair> = ctx
            .cfg
            .sizes
            .iter()
            .map(|&s| staircase_index(ctx.cfg.m1(), ctx.cfg.m2(), s))
            .collect::<nikishin_core::Result<_>>()?;
        let pts = mass_point_attraction(ctx.pair.clone(), ctx.cfg.j, &samples)?;
        let (first, last) = (pts[0].distance, pts[pts.len() - 1].distance);
        r.flag(
            "attraction",
            last < first,
            format!("distance {first:e} -> {last:e}"),
        );
        let mut dat = File::create(ctx.plots_dir.join("attraction.dat"))?;
        for p in &pts {
            writeln!(dat, "{} {:e}", p.size1, p.distance)?;
        }
        r.metric("attraction", &pts);
    } else {
        r.skip("attraction", "no atom or fewer than two sizes");
    }
    Ok(())
}

fn equilibrium(ctx: &Ctx, r: &mut Report) -> Result<()> {
    let seed = ctx.cfg.seed.unwrap_or(0);
    let sol = ctx.equilibrium(Some(seed))?;
    let chol = sol.matrix.cholesky();
    r.flag(
        "interaction_cholesky",
        chol.is_ok(),
        format!("leading minors {:?}", sol.matrix.leading_minors()),
    );
    r.at_most(
        "variational_residual",
        sol.residual,
        ctx.cfg.tolerances.equilibrium,
        format!("{} iterations", sol.iterations),
    );
    let other = ctx.equilibrium(Some(seed.wrapping_add(1)))?;
    let gap = sol
        .components
        .iter()
        .zip(&other.components)
        .flat_map(|(a, b)| a.masses.iter().zip(&b.masses).map(|(x, y)| (x - y).abs()))
        .fold(0.0, f64::max);
    r.at_most(
        "uniqueness",
        gap,
        ctx.cfg.tolerances.uniqueness,
        "max mass difference between two random starts",
    );
    r.metric("energy", sol.energy);
    r.metric(
        "omega",
        sol.components
            .iter()
            .map(|c| (c.j, sol.omega(c.j)))
            .collect::<Vec<_>>(),
    );
    r.metric(
        "omega_prime",
        sol.components
            .iter()
            .map(|c| (c.j, c.omega_prime))
            .collect::<Vec<_>>(),
    );
    let mut w = csv::Writer::from_path(ctx.metrics_dir.join("masses.csv"))?;
    w.write_record(["j", "midpoint", "mass", "combined_potential"])?;
    for c in &sol.components {
        for ((x, m), p) in c.midpoints.iter().zip(&c.masses).zip(&c.combined) {
            w.write_record([
                c.j.to_string(),
                format!("{x:e}"),
                format!("{m:e}"),
                format!("{p:e}"),
            ])?;
        }
        let mut dat = File::create(ctx.plots_dir.join(format!("density_j{}.dat", c.j)))?;
        let h = c.panel_width();
        for (x, m) in c.midpoints.iter().zip(&c.masses) {
            writeln!(dat, "{x:e} {:e}", m / h)?;
        }
    }
    w.flush()?;
    let mut dat = File::create(ctx.plots_dir.join("energy.dat"))?;
    for (i, e) in sol.energy_history.iter().enumerate() {
        writeln!(dat, "{i} {e:e}")?;
    }
    Ok(())
}

fn nth_root(ctx: &Ctx, r: &mut Report) -> Result<()> {
    let (m1, m2) = (ctx.cfg.m1(), ctx.cfg.m2());
    let samples: Vec<MultiIndexPair> = ctx
        .sizes()?
        .iter()
        .map(|&s| staircase_index(m1, m2, s))
        .collect::<nikishin_core::Result<_>>()?;
    let sol = ctx.equilibrium(ctx.cfg.seed)?;
    let rec = nth_root_harness(&ctx.pair, &samples, &sol, ctx.cfg.j, &ctx.points())?;
    let firsts: Vec<f64> = (0..rec.points.len()).map(|p| rec.errors(p)[0].1).collect();
    r.flag(
        "error_decreases",
        rec.error_decreases(),
        format!("first {firsts:?}, last max {:e}", rec.final_max_error()),
    );
    r.metric("final_max_error", rec.final_max_error());
    r.metric("equilibrium_residual", sol.residual);
    ctx.record(&rec)
}

fn ratio(ctx: &Ctx, r: &mut Report) -> Result<()> {
    let (m1, m2) = (ctx.cfg.m1(), ctx.cfg.m2());
    let l = ctx.shift();
    let j = ctx.cfg.j;
    let bases: Vec<MultiIndexPair> = ctx
        .sizes()?
        .iter()
        .map(|&s| shift_base(m1, m2, l, s))
        .collect::<nikishin_core::Result<_>>()?;
    let iv = ctx.cfg.base.interval;
    let classical = m1 == 0 && m2 == 0 && ctx.cfg.base.mass_points.is_empty();
    let target = move |z: C64| joukowski_ratio(z, iv.a, iv.b);
    let t: Option<&dyn Fn(C64) -> C64> = if classical { Some(&target) } else { None };
    let run = ratio_harness(&ctx.pair, &bases, l, j, &ctx.points(), t)?;
    let (c0, c1) = (run.cauchy[0], run.cauchy[run.cauchy.len() - 1]);
    r.at_most(
        "cauchy_stabilization",
        c1,
        ctx.cfg.tolerances.cauchy_fraction * c0,
        format!("initial {c0:e}"),
    );
    r.metric("cauchy", &run.cauchy);
    if classical {
        r.at_most(
            "closed_form_limit",
            run.record.final_max_error(),
            ctx.cfg.tolerances.ratio_error,
            "Joukowski limit",
        );
    } else {
        r.skip(
            "closed_form_limit",
            "no closed form outside the single-measure case",
        );
    }
    let last = run.samples.last().expect("at least two sizes");
    let opts = BoundaryOptions::default();
    let mut worst = 0.0f64;
    let mut products = Vec::new();
    for k in -(m2 as i32)..=m1 as i32 {
        let bp = boundary_product(last, k, &opts)?;
        worst = worst.max(bp.cv);
        let mut dat = File::create(ctx.plots_dir.join(format!("boundary_product_j{k}.dat")))?;
        for (x, v) in bp.xs.iter().zip(&bp.values) {
            writeln!(dat, "{x:e} {v:e}")?;
        }
        products.push(json!({"j": k, "mean": bp.mean, "cv": bp.cv}));
    }
    r.at_most(
        "boundary_product",
        worst,
        ctx.cfg.tolerances.boundary_cv,
        "worst coefficient of variation",
    );
    r.metric("boundary_product", products);
    let mut bad = Vec::new();
    for s in &run.samples {
        for (k, got, want) in epsilon_law(s)? {
            if got != want {
                bad.push((s.size1(), k));
            }
        }
    }
    r.flag(
        "epsilon_law",
        bad.is_empty(),
        format!("failing (size, j): {bad:?}"),
    );
    let period = periodic_product_harness(&ctx.pair, ctx.sizes()?, j, &ctx.points())?;
    r.at_most(
        "telescoping",
        period.telescoping,
        ctx.cfg.tolerances.identity,
        "full period vs product of steps",
    );
    ctx.record(&run.record)?;
    ctx.record(&period.record)?;
    // the same sizes along the staircase ray give the nth-root trend for free
    let samples: Vec<MultiIndexPair> = ctx
        .sizes()?
        .iter()
        .map(|&s| staircase_index(m1, m2, s))
        .collect::<nikishin_core::Result<_>>()?;
    let sol = ctx.equilibrium(ctx.cfg.seed)?;
    let rec = nth_root_harness(&ctx.pair, &samples, &sol, j, &ctx.points())?;
    r.flag(
        "nth_root_trend",
        rec.error_decreases(),
        format!("last max error {:e}", rec.final_max_error()),
    );
    ctx.record(&rec)
}

fn hermite_pade(ctx: &Ctx, r: &mut Report) -> Result<()> {
    let n = ctx.index()?;
    let t = HermitePadeTriple::solve(&n, ctx.pair.clone())?;
    let tol = &ctx.cfg.tolerances;
    let order = t.order_residuals()?;
    r.at_most(
        "order_conditions",
        max_value(&order),
        tol.order,
        "max relative remainder moment",
    );
    write_residuals(&ctx.metrics_dir.join("order_conditions.csv"), &order)?;
    let pts = ctx.points_mp();
    r.at_most(
        "r0_identity",
        t.r0_gap(&pts)?,
        tol.identity,
        "R_0 against A_{-1}",
    );
    let mut ident = 0.0f64;
    let mut dpoly = 0.0f64;
    for z in &pts {
        ident = ident.max(t.defining_identity_gap(z)?);
        dpoly = dpoly.max(t.d_polynomial_gap(z)?);
    }
    r.at_most("defining_identity", ident, tol.identity, "S A - D - R");
    r.at_most(
        "d_polynomial",
        dpoly,
        tol.identity,
        "stored D against direct integral",
    );
    let slopes = t.far_field_slopes()?;
    let excess = slopes
        .iter()
        .zip(n.n2())
        .map(|(s, &k)| s + (k + 1) as f64)
        .fold(f64::NEG_INFINITY, f64::max);
    r.at_most(
        "far_field_slope",
        excess,
        0.01,
        format!("slopes {slopes:?}"),
    );
    r.metric(
        "d_degrees",
        (0..t.d().len()).map(|j| t.d_degree(j)).collect::<Vec<_>>(),
    );
    Ok(())
}

fn biortho(ctx: &Ctx, r: &mut Report) -> Result<()> {
    let n_max = ctx.cfg.n_max.unwrap_or(6);
    if n_max == 0 {
        return Err(RunError::Config("n_max must be positive".into()));
    }
    let i1 = canonical_sequence(ctx.cfg.m1() + 1, n_max);
    let i2 = canonical_sequence(ctx.cfg.m2() + 1, n_max);
    let rep = biorthogonality_matrix(n_max, &i1, &i2, ctx.pair.clone())?;
    r.at_most(
        "offdiag_over_diag",
        rep.max_offdiag_over_min_diag,
        ctx.cfg.tolerances.biortho,
        format!("N_max = {n_max}"),
    );
    r.flag(
        "nonzero_diagonal",
        rep.min_diag_abs > 0.0,
        format!("min |diag| {:e}", rep.min_diag_abs),
    );
    rep.write_csv(&ctx.metrics_dir.join("biorthogonality.csv"))?;
    r.metric("max_offdiag_relative", rep.max_offdiag_relative);
    Ok(())
}
