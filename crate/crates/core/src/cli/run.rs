use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;

use crate::blockbasis::{block_diagnostics, block_vectors, build_block, load_system, MBasisBlock, OrderedSystem};
use crate::characters::{
    auerbach_check_l1, min_max_prefix_l1, ordering_table, unconditionality_constant_lp, walsh_system, SEARCH_MAX_RANK,
};
use crate::conditionality::{
    basis_constant_exact, best_permutation_constant, find_witness, witness_bounds_check, Permutation,
    ProjectionObjective,
};
use crate::error::{Error, Result};
use crate::renorm::{verify_auerbach_renormed, RenormedSpace};
use crate::search::{enumerate_all, SearchMode};
use crate::seqplan::{
    plan_blocks_t2_with, plan_blocks_t4_with, plan_t4_until, BlockPlan, EpsilonSequence, PlanMode, PlanOptions,
};
use crate::verify::{normalize_system, theorem1_verify, Theorem1Certificate};

use super::config::{Mode, PermutationSource, RunConfig, SweepAxis};
use super::report::{Cell, Item, Report, Table};

/// Orderings are tabulated in full up to this many columns (120 rows).
const ORDERING_TABLE_DIM: usize = 5;

struct Run<'a> {
    config: &'a RunConfig,
    eps: EpsilonSequence,
    items: Vec<Item>,
    table: Table,
    failures: Vec<String>,
    timings: BTreeMap<String, f64>,
}

impl<'a> Run<'a> {
    fn new(config: &'a RunConfig) -> Result<Self> {
        Ok(Self {
            config,
            eps: EpsilonSequence::from_spec(&config.epsilon)?,
            items: Vec::new(),
            table: Table::new(&[]),
            failures: Vec::new(),
            timings: BTreeMap::new(),
        })
    }

    fn timed<T>(&mut self, label: &str, f: impl FnOnce(&mut Self) -> Result<T>) -> Result<T> {
        let start = Instant::now();
        let out = f(self);
        *self.timings.entry(label.to_string()).or_default() += start.elapsed().as_secs_f64() * 1e3;
        out
    }

    fn fail(&mut self, msg: String) {
        self.failures.push(msg);
    }

    fn options(&self) -> PlanOptions {
        PlanOptions {
            horizon: self.config.horizon,
        }
    }

    fn plan(&self, blocks: usize) -> Result<BlockPlan> {
        match self.config.plan {
            PlanMode::Theorem2 => plan_blocks_t2_with(&self.eps, blocks, self.options()),
            PlanMode::Theorem4 => plan_blocks_t4_with(&self.eps, blocks, self.options()),
        }
    }

    fn seed(&self) -> u64 {
        self.config.seed.unwrap_or(0)
    }

    /// Block on the first `n` terms of the sequence.
    fn leading_block(&self, n: usize) -> Result<MBasisBlock> {
        build_block(&self.eps.slice(0, n)?)
    }

    /// The configured explicit system, or the block on the first `dims[0]`
    /// terms, with its epsilon list.
    fn system(&self) -> Result<(OrderedSystem, Vec<f64>)> {
        match &self.config.system {
            Some(path) => {
                let s = load_system(path)?;
                let eps = self.eps.slice(0, s.dim())?;
                Ok((s, eps))
            }
            None => {
                let block = self.leading_block(self.config.dims[0])?;
                Ok((block_vectors(&block)?, block.eps().to_vec()))
            }
        }
    }

    fn permutation(&self, n: usize) -> Result<(Permutation, String)> {
        Ok(match &self.config.permutation {
            PermutationSource::Identity => (Permutation::identity(n), "identity".into()),
            PermutationSource::Reversal => (Permutation::reversal(n), "reversal".into()),
            PermutationSource::Random { seed } => {
                let seed = seed.unwrap_or(self.seed());
                (Permutation::random(n, seed), format!("random:{seed}"))
            }
            PermutationSource::Csv { path } => (Permutation::load_csv(path)?, format!("csv:{}", path.display())),
        })
    }

    fn witness_plan(&self, targets: &[f64]) -> Result<BlockPlan> {
        let c_max = targets.iter().copied().fold(0.0, f64::max);
        plan_t4_until(&self.eps, 3.0 * c_max, self.config.max_blocks, self.options())
    }

    fn construct(&mut self) -> Result<()> {
        let plan = self.timed("plan", |r| r.plan(r.config.block_count))?;
        self.table = Table::new(&["m", "start", "end", "dim", "mass", "distance", "max_product", "passed"]);
        self.block_rows(&plan, &(1..=plan.block_count()).collect::<Vec<_>>())
    }

    fn block_rows(&mut self, plan: &BlockPlan, blocks: &[usize]) -> Result<()> {
        let mut previous: Option<f64> = None;
        for &m in blocks {
            let span = plan.block(m)?;
            let block = MBasisBlock::from_span(&self.eps, &span)?;
            let diagnostics = self.timed("diagnostics", |_| Ok(block_diagnostics(&block)))?;
            let max_product = diagnostics.entries.iter().map(|e| e.product).fold(0.0, f64::max);
            if !diagnostics.passed {
                self.fail(format!("block {m}: {}", diagnostics.failures.join("; ")));
            }
            if plan.mode == PlanMode::Theorem2 {
                if let Some(p) = previous.filter(|&p| diagnostics.distance <= p) {
                    self.fail(format!(
                        "block {m}: distance {} does not exceed {p}",
                        diagnostics.distance
                    ));
                }
            }
            previous = Some(diagnostics.distance);
            self.table.push(vec![
                m.into(),
                span.start.into(),
                span.end.into(),
                span.len().into(),
                span.mass.into(),
                diagnostics.distance.into(),
                max_product.into(),
                diagnostics.passed.into(),
            ]);
            self.items.push(Item::Block {
                m,
                start: span.start,
                end: span.end,
                diagnostics,
            });
        }
        Ok(())
    }

    fn certificate(&mut self, system: &OrderedSystem, eps: &[f64], label: String) -> Result<Theorem1Certificate> {
        let tol = self.config.tolerances;
        let cert = self.timed("verify", |_| theorem1_verify(&normalize_system(system)?, eps, tol))?;
        if !cert.passed {
            self.fail(format!(
                "{label}: stability chain fails (distance {} vs bound {})",
                cert.distance, cert.bound
            ));
        }
        self.items.push(Item::Certificate {
            label,
            certificate: cert.clone(),
        });
        Ok(cert)
    }

    fn verify(&mut self) -> Result<()> {
        self.table = Table::new(&[
            "n",
            "C",
            "trace_b",
            "trace_binv",
            "defect",
            "distance",
            "root_sq",
            "bound",
            "passed",
        ]);
        if self.config.system.is_some() {
            let (system, eps) = self.system()?;
            let cert = self.certificate(&system, &eps, "system".into())?;
            self.push_certificate_row(&cert);
            return Ok(());
        }
        for n in self.config.dims.clone() {
            let block = self.leading_block(n)?;
            let system = block_vectors(&block)?;
            let cert = self.certificate(&system, block.eps(), format!("n={n}"))?;
            self.push_certificate_row(&cert);
        }
        Ok(())
    }

    fn push_certificate_row(&mut self, c: &Theorem1Certificate) {
        self.table.push(vec![
            c.n.into(),
            c.c.into(),
            c.trace_b.into(),
            c.trace_binv.into(),
            c.defect.into(),
            c.distance.into(),
            (c.root * c.root).into(),
            c.bound.into(),
            c.passed.into(),
        ]);
    }

    fn witness_columns() -> Table {
        Table::new(&[
            "C",
            "permutation",
            "m",
            "len",
            "alpha",
            "t_m",
            "e_norm_sq",
            "f_norm_sq",
            "ratio",
            "guaranteed_bound",
            "bounds_ok",
        ])
    }

    fn witness(&mut self) -> Result<()> {
        let targets = self.config.targets.clone();
        let plan = self.timed("plan", |r| r.witness_plan(&targets))?;
        let end = *plan.cuts.last().expect("plan has cuts");
        let (sigma, label) = self.timed("permutation", |r| r.permutation(end))?;
        self.table = Self::witness_columns();
        for c in targets {
            let (w, bounds) = self.timed("witness", |r| {
                let w = find_witness(&plan, &r.eps, &sigma, c)?;
                let bounds = witness_bounds_check(&w, &r.eps, &sigma)?;
                Ok((w, bounds))
            })?;
            if w.ratio < c || !bounds.passed {
                self.fail(format!("C = {c}: ratio {} ({})", w.ratio, bounds.failures.join("; ")));
            }
            self.table.push(witness_row(&w, &label, bounds.passed));
            self.items.push(Item::Witness {
                permutation: label.clone(),
                witness: w,
                bounds,
            });
        }
        Ok(())
    }

    fn oracle(&mut self) -> Result<()> {
        let (system, _) = self.system()?;
        let n = system.dim();
        let options = self.config.search_options();
        let (identity_constant, best) = self.timed("oracle", |_| {
            Ok((
                basis_constant_exact(&system)?,
                best_permutation_constant(&system, &options)?,
            ))
        })?;
        let tol = self.config.tolerances.inequality;
        if best.value < 1.0 - tol {
            self.fail(format!("best permutation constant {} below 1", best.value));
        }
        if best.value > identity_constant + tol {
            self.fail(format!(
                "best permutation constant {} exceeds the identity ordering's {identity_constant}",
                best.value
            ));
        }
        self.table = Table::new(&["ordering", "basis_constant"]);
        if n <= ORDERING_TABLE_DIM {
            let obj = ProjectionObjective::new(&system)?;
            for (order, value) in enumerate_all(&obj) {
                self.table.push(vec![format_ordering(&order).into(), value.into()]);
            }
        } else {
            let identity: Vec<usize> = (0..n).collect();
            self.table
                .push(vec![format_ordering(&identity).into(), identity_constant.into()]);
            self.table
                .push(vec![format_ordering(&best.ordering).into(), best.value.into()]);
        }
        self.items.push(Item::Oracle {
            dim: n,
            identity_constant,
            best,
        });
        Ok(())
    }

    fn renorm(&mut self) -> Result<()> {
        let (system, eps) = self.system()?;
        let space = RenormedSpace::from_system(&system, &eps, self.config.tolerances.identity)?;
        let (samples, seed) = (self.config.samples, self.seed());
        let report = self.timed("renorm", |_| Ok(verify_auerbach_renormed(&space, samples, seed)))?;
        if !report.passed {
            self.fail(format!("renorming: {}", report.violation_examples.join("; ")));
        }
        self.table = Table::new(&[
            "dim",
            "eps_max",
            "basis_norm_deviation_max",
            "sandwich_max_ratio",
            "triangle_max_excess",
            "samples",
            "violations",
        ]);
        self.table.push(vec![
            report.dim.into(),
            report.eps_max.into(),
            report.basis_norm_deviation_max.into(),
            report.sandwich_max_ratio.into(),
            report.triangle_max_excess.into(),
            report.samples.into(),
            report.violations.into(),
        ]);
        self.items.push(Item::Renorm { report });
        Ok(())
    }

    fn characters(&mut self) -> Result<()> {
        self.table = Table::new(&["m", "ordering_mode", "ordering", "max_prefix_l1"]);
        let options = self.config.search_options();
        for m in self.config.ranks.clone() {
            let sys = walsh_system(m)?;
            let auerbach = self.timed("auerbach", |_| Ok(auerbach_check_l1(&sys)))?;
            if !auerbach.passed {
                self.fail(format!("m = {m}: characters are not an Auerbach system"));
            }
            let natural: Vec<usize> = (0..sys.size()).collect();
            self.table.push(vec![
                m.into(),
                "natural".into(),
                format_ordering(&natural).into(),
                sys.max_prefix_l1().into(),
            ]);
            if sys.size() <= 4 {
                for (order, value) in ordering_table(&sys)? {
                    self.table.push(vec![
                        m.into(),
                        "enumerated".into(),
                        format_ordering(&order).into(),
                        value.into(),
                    ]);
                }
            }
            let min_max = if m <= SEARCH_MAX_RANK {
                let best = self.timed("search", |_| min_max_prefix_l1(&sys, &options))?;
                self.table.push(vec![
                    m.into(),
                    mode_label(best.mode).into(),
                    format_ordering(&best.ordering).into(),
                    best.value.into(),
                ]);
                Some(best)
            } else {
                None
            };
            let mut unconditionality = Vec::new();
            for p in self.config.p.clone() {
                let (trials, seed) = (self.config.trials, self.seed());
                let est = self.timed("unconditionality", |_| {
                    unconditionality_constant_lp(&sys, p, trials, seed)
                })?;
                if p == 2.0 && est.lower_bound != 1.0 {
                    self.fail(format!(
                        "m = {m}: L^2 unconditionality estimate {} is not 1",
                        est.lower_bound
                    ));
                }
                unconditionality.push(est);
            }
            self.items.push(Item::Characters {
                m,
                prefix_profile: sys.prefix_profile(),
                auerbach,
                min_max,
                unconditionality,
            });
        }
        Ok(())
    }

    fn sweep(&mut self) -> Result<()> {
        let sweep = self
            .config
            .sweep
            .clone()
            .ok_or_else(|| Error::config("sweep", "missing"))?;
        let values = sweep.values;
        let ints = || values.iter().map(|&v| v as usize).collect::<Vec<_>>();
        match sweep.axis {
            SweepAxis::C => self.sweep_c(&values),
            SweepAxis::M => self.sweep_m(&ints()),
            SweepAxis::P => self.sweep_p(&values),
            SweepAxis::Dim => self.sweep_dim(&ints()),
            SweepAxis::Block => {
                let blocks = ints();
                let max = *blocks.iter().max().expect("non-empty axis");
                let plan = self.timed("plan", |r| r.plan(max))?;
                self.table = Table::new(&["m", "start", "end", "dim", "mass", "distance", "max_product", "passed"]);
                self.block_rows(&plan, &blocks)
            }
        }
    }

    fn sweep_c(&mut self, targets: &[f64]) -> Result<()> {
        let plan = self.timed("plan", |r| r.witness_plan(targets))?;
        let end = *plan.cuts.last().expect("plan has cuts");
        let count = self.config.permutations;
        let seed = self.seed();
        let jobs: Vec<(usize, f64, u64)> = targets
            .iter()
            .enumerate()
            .flat_map(|(i, &c)| (0..count).map(move |k| (i * count + k, c, seed.wrapping_add((i * count + k) as u64))))
            .collect();
        let eps = &self.eps;
        let start = Instant::now();
        let results: Vec<Result<(f64, String, crate::conditionality::Witness, bool, Vec<String>)>> = jobs
            .par_iter()
            .map(|&(_, c, s)| {
                let sigma = Permutation::random(end, s);
                let w = find_witness(&plan, eps, &sigma, c)?;
                let bounds = witness_bounds_check(&w, eps, &sigma)?;
                Ok((c, format!("random:{s}"), w, bounds.passed, bounds.failures))
            })
            .collect();
        *self.timings.entry("witness".into()).or_default() += start.elapsed().as_secs_f64() * 1e3;
        self.table = Self::witness_columns();
        for r in results {
            let (c, label, w, ok, failures) = r?;
            if w.ratio < c || !ok {
                self.fail(format!("C = {c}, {label}: ratio {} ({})", w.ratio, failures.join("; ")));
            }
            self.table.push(witness_row(&w, &label, ok));
        }
        Ok(())
    }

    fn sweep_m(&mut self, ranks: &[usize]) -> Result<()> {
        self.table = Table::new(&["m", "ordering_mode", "k", "prefix_l1"]);
        let options = self.config.search_options();
        for &m in ranks {
            let sys = walsh_system(m as u32)?;
            for (k, v) in sys.prefix_profile().into_iter().enumerate() {
                self.table
                    .push(vec![m.into(), "natural".into(), (k + 1).into(), v.into()]);
            }
            if m as u32 <= SEARCH_MAX_RANK {
                let best = self.timed("search", |_| min_max_prefix_l1(&sys, &options))?;
                let ordered = sys.clone().with_order(best.ordering.clone())?;
                for (k, v) in ordered.prefix_profile().into_iter().enumerate() {
                    self.table
                        .push(vec![m.into(), mode_label(best.mode).into(), (k + 1).into(), v.into()]);
                }
            }
        }
        Ok(())
    }

    fn sweep_p(&mut self, ps: &[f64]) -> Result<()> {
        self.table = Table::new(&["m", "p", "trials", "lower_bound"]);
        let (trials, seed) = (self.config.trials, self.seed());
        for m in self.config.ranks.clone() {
            let sys = walsh_system(m)?;
            for &p in ps {
                let est = self.timed("unconditionality", |_| {
                    unconditionality_constant_lp(&sys, p, trials, seed)
                })?;
                if p == 2.0 && est.lower_bound != 1.0 {
                    self.fail(format!(
                        "m = {m}: L^2 unconditionality estimate {} is not 1",
                        est.lower_bound
                    ));
                }
                self.table
                    .push(vec![m.into(), p.into(), trials.into(), est.lower_bound.into()]);
            }
        }
        Ok(())
    }

    fn sweep_dim(&mut self, dims: &[usize]) -> Result<()> {
        self.table = Table::new(&[
            "n",
            "C",
            "trace_b",
            "trace_binv",
            "defect",
            "distance",
            "root_sq",
            "bound",
            "passed",
        ]);
        for &n in dims {
            let block = self.leading_block(n)?;
            let system = block_vectors(&block)?;
            let cert = self.certificate(&system, block.eps(), format!("n={n}"))?;
            self.push_certificate_row(&cert);
        }
        // rows carry every scalar; keep the report compact
        self.items.clear();
        Ok(())
    }
}

fn witness_row(w: &crate::conditionality::Witness, label: &str, ok: bool) -> Vec<Cell> {
    vec![
        w.c.into(),
        label.into(),
        w.m.into(),
        w.f.len().into(),
        w.alpha.into(),
        w.t_m.into(),
        w.e_norm_sq.into(),
        w.f_norm_sq.into(),
        w.ratio.into(),
        w.guaranteed_bound.into(),
        ok.into(),
    ]
}

fn mode_label(mode: SearchMode) -> &'static str {
    match mode {
        SearchMode::Exhaustive => "exhaustive",
        SearchMode::Subsets => "subsets",
        SearchMode::Heuristic => "heuristic",
    }
}

/// 1-based, space separated.
fn format_ordering(order: &[usize]) -> String {
    order.iter().map(|k| (k + 1).to_string()).collect::<Vec<_>>().join(" ")
}

/// Validates `config` and runs its mode. Failed assertions are recorded in
/// the report; errors abort the run.
pub fn run(config: &RunConfig) -> Result<Report> {
    config.validate()?;
    let mode = config.mode()?;
    let start = Instant::now();
    let mut r = Run::new(config)?;
    match mode {
        Mode::Construct => r.construct()?,
        Mode::Verify => r.verify()?,
        Mode::Witness => r.witness()?,
        Mode::Oracle => r.oracle()?,
        Mode::Renorm => r.renorm()?,
        Mode::Characters => r.characters()?,
        Mode::Sweep => r.sweep()?,
    }
    r.timings.insert("total".into(), start.elapsed().as_secs_f64() * 1e3);
    Ok(Report {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        mode: mode.name().into(),
        config: config.clone(),
        items: r.items,
        table: r.table,
        passed: r.failures.is_empty(),
        failures: r.failures,
        timings_ms: r.timings,
    })
}

/// Sweep mode regardless of the configured mode.
pub fn sweep(config: &RunConfig) -> Result<Report> {
    let config = RunConfig {
        mode: Some(Mode::Sweep),
        ..config.clone()
    };
    run(&config)
}
