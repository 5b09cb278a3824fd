//! Experiment engine: dataset generation per problem, train/test splits,
//! per-cell training runs, error-vs-data and error-vs-cost sweeps, power-law
//! fits, median/worst-case extraction, and out-of-distribution evaluation.

use crate::complexity::{eval_flops, param_count_formula, ArchKind};
use crate::field::{relative_l2_error, Dataset, Field, Grid, Metadata};
use crate::grf::{sample_with_rng, scale_covariance, GrfSpec, Transform};
use crate::models::{build_model, train, ModelConfig, OperatorModel, TrainConfig};
use crate::opbl::Checkpoint;
use crate::solvers::{
    solve_advection, solve_helmholtz, solve_navier_stokes, AdvectionConfig, HelmholtzConfig,
    NsConfig,
};
use crate::{seed, Error, Result};
use std::path::Path;
use std::time::Instant;

/// Benchmark problem tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Problem {
    Advection,
    NavierStokes,
    Helmholtz,
    /// Externally produced dataset; no forward solver is available.
    StructuralImport,
}

impl Problem {
    pub fn as_str(&self) -> &'static str {
        match self {
            Problem::Advection => "advection",
            Problem::NavierStokes => "navier_stokes",
            Problem::Helmholtz => "helmholtz",
            Problem::StructuralImport => "structural_import",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "advection" => Ok(Problem::Advection),
            "navier_stokes" => Ok(Problem::NavierStokes),
            "helmholtz" => Ok(Problem::Helmholtz),
            "structural_import" => Ok(Problem::StructuralImport),
            other => Err(Error::InvalidArgument(format!("unknown problem '{other}'"))),
        }
    }
}

/// Discretization and physics knobs for one problem instance.
#[derive(Debug, Clone)]
pub struct ProblemSetup {
    pub problem: Problem,
    /// Points per dimension (1-D problems use the first entry only).
    pub points: usize,
    pub ns_nu: f64,
    pub ns_t_final: f64,
    pub ns_dt: f64,
    /// Seed of the fixed Navier-Stokes initial vorticity (one draw shared by
    /// every sample so the input/output map is a single operator).
    pub ns_init_seed: u64,
    /// Amplitude multiplier on the forcing measure (and the matching initial
    /// vorticity draw). Desk scale raises it so the advection nonlinearity
    /// is material at the coarse resolution and short horizon.
    pub ns_forcing_scale: f64,
    pub advection_speed: f64,
    pub advection_t_final: f64,
    pub helmholtz_frequency: f64,
}

impl ProblemSetup {
    /// Full-resolution settings matching the published experiments.
    pub fn paper_scale(problem: Problem) -> Self {
        let mut s = ProblemSetup {
            problem,
            points: 200,
            ns_nu: 0.025,
            ns_t_final: 10.0,
            ns_dt: 1e-3,
            ns_init_seed: 0,
            ns_forcing_scale: 1.0,
            advection_speed: 1.0,
            advection_t_final: 0.5,
            helmholtz_frequency: 1e3,
        };
        match problem {
            Problem::Advection => s.points = 200,
            Problem::NavierStokes => s.points = 64,
            Problem::Helmholtz => s.points = 100,
            Problem::StructuralImport => s.points = 21,
        }
        s
    }

    /// Coarse, minutes-not-hours settings for trend checks on one CPU.
    pub fn desk_scale(problem: Problem) -> Self {
        let mut s = Self::paper_scale(problem);
        match problem {
            Problem::Advection => {}
            Problem::NavierStokes => {
                s.points = 32;
                s.ns_t_final = 5.0;
                s.ns_dt = 1e-2;
                s.ns_forcing_scale = 15.0;
            }
            Problem::Helmholtz => {
                s.points = 32;
                // resolved on the coarse grid (wavenumber ~ frequency / 20)
                s.helmholtz_frequency = 100.0;
            }
            Problem::StructuralImport => {}
        }
        s
    }

    /// Input-measure specification for the generative problems.
    pub fn input_spec(&self) -> Result<GrfSpec> {
        match self.problem {
            Problem::Advection => {
                let grid = Grid::periodic_1d(self.points, 1.0)?;
                Ok(GrfSpec::new(grid, 3.0, 2.0)?.with_transform(Transform::SignThreshold))
            }
            Problem::NavierStokes => {
                let grid = Grid::periodic_2d(self.points, 2.0 * std::f64::consts::PI)?;
                Ok(GrfSpec::new(grid, 3.0, 4.0)?.with_shift_scale(0.0, self.ns_forcing_scale))
            }
            Problem::Helmholtz => {
                let grid = Grid::neumann_2d(self.points, 1.0)?;
                Ok(GrfSpec::new(grid, 3.0, 2.0)?.with_transform(Transform::Wavespeed))
            }
            Problem::StructuralImport => Err(Error::InvalidArgument(
                "structural_import has no generative input measure; import its dataset".into(),
            )),
        }
    }

    /// The fixed Navier-Stokes initial vorticity, drawn once from the same
    /// measure as the forcing.
    pub fn ns_initial(&self) -> Result<Field> {
        let grid = Grid::periodic_2d(self.points, 2.0 * std::f64::consts::PI)?;
        let spec = GrfSpec::new(grid, 3.0, 4.0)?.with_shift_scale(0.0, self.ns_forcing_scale);
        let mut rng = seed::rng(self.ns_init_seed, "ns-init", 0);
        sample_with_rng(&spec, &mut rng)
    }

    /// Apply the ground-truth operator to one input sample.
    pub fn solve_truth(&self, input: &Field) -> Result<Field> {
        match self.problem {
            Problem::Advection => {
                let cfg = AdvectionConfig {
                    speed: self.advection_speed,
                    t_final: self.advection_t_final,
                    grid: input.grid.clone(),
                };
                solve_advection(input, &cfg)
            }
            Problem::NavierStokes => {
                let cfg = NsConfig {
                    nu: self.ns_nu,
                    t_final: self.ns_t_final,
                    dt: self.ns_dt,
                    grid: input.grid.clone(),
                    dealias: true,
                };
                solve_navier_stokes(&self.ns_initial()?, input, &cfg)
            }
            Problem::Helmholtz => {
                let cfg = HelmholtzConfig::new(self.helmholtz_frequency, input.grid.clone())?;
                solve_helmholtz(input, &cfg, None)
            }
            Problem::StructuralImport => Err(Error::InvalidArgument(
                "structural_import has no forward solver".into(),
            )),
        }
    }
}

/// Draw `n` inputs from the problem's input measure and solve each one.
/// Deterministic in (setup, n, master_seed).
pub fn generate_dataset(setup: &ProblemSetup, n: usize, master_seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::InvalidArgument("dataset size must be positive".into()));
    }
    let spec = setup.input_spec()?;
    let mut inputs = Vec::with_capacity(n);
    let mut outputs = Vec::with_capacity(n);
    for i in 0..n as u64 {
        let mut rng = seed::rng(master_seed, "grf", i);
        let u = sample_with_rng(&spec, &mut rng)?;
        let v = setup.solve_truth(&u)?;
        inputs.push(u);
        outputs.push(v);
    }
    let mut meta = Metadata::new();
    meta.set("problem", setup.problem.as_str());
    meta.set("count", n);
    meta.set("master_seed", master_seed);
    meta.set("points", setup.points);
    match setup.problem {
        Problem::NavierStokes => {
            meta.set("ns_nu", setup.ns_nu);
            meta.set("ns_t_final", setup.ns_t_final);
            meta.set("ns_dt", setup.ns_dt);
            meta.set("ns_init_seed", setup.ns_init_seed);
        }
        Problem::Advection => {
            meta.set("advection_speed", setup.advection_speed);
            meta.set("advection_t_final", setup.advection_t_final);
        }
        Problem::Helmholtz => {
            meta.set("helmholtz_frequency", setup.helmholtz_frequency);
        }
        Problem::StructuralImport => {}
    }
    Dataset::new(inputs, outputs, meta)
}

/// First `n_train` samples train; the last 10% (at least one sample) is the
/// held-out test set, fixed across cells so curves are comparable.
pub fn split_dataset(
    ds: &Dataset,
    n_train: usize,
) -> Result<(&[Field], &[Field], &[Field], &[Field])> {
    let total = ds.len();
    let n_test = (total / 10).max(1);
    if n_train == 0 || n_train + n_test > total {
        return Err(Error::InvalidArgument(format!(
            "cannot take {n_train} training and {n_test} test samples from {total}"
        )));
    }
    Ok((
        &ds.inputs[..n_train],
        &ds.outputs[..n_train],
        &ds.inputs[total - n_test..],
        &ds.outputs[total - n_test..],
    ))
}

/// Anything that maps an input field to a predicted output field. Trained
/// models implement it; the tests also plug in oracle and baseline stubs.
pub trait Predictor {
    fn predict(&self, input: &Field) -> Result<Field>;
}

impl Predictor for OperatorModel {
    fn predict(&self, input: &Field) -> Result<Field> {
        self.forward(input)
    }
}

/// Data-free baseline: always predicts the mean of the training outputs.
#[derive(Debug, Clone)]
pub struct MeanPredictor {
    mean: Field,
}

impl MeanPredictor {
    pub fn fit(outputs: &[Field]) -> Result<Self> {
        let first = outputs
            .first()
            .ok_or_else(|| Error::InvalidArgument("mean baseline needs samples".into()))?;
        let mut mean = Field::zeros(first.grid.clone(), first.channels);
        for f in outputs {
            for (m, v) in mean.values.iter_mut().zip(&f.values) {
                *m += v;
            }
        }
        let inv = 1.0 / outputs.len() as f64;
        for m in mean.values.iter_mut() {
            *m *= inv;
        }
        Ok(MeanPredictor { mean })
    }
}

impl Predictor for MeanPredictor {
    fn predict(&self, _input: &Field) -> Result<Field> {
        Ok(self.mean.clone())
    }
}

/// Mean and per-sample relative errors of a predictor over a sample set.
pub fn evaluate_predictor(
    p: &dyn Predictor,
    inputs: &[Field],
    outputs: &[Field],
) -> Result<(f64, Vec<f64>)> {
    if inputs.is_empty() || inputs.len() != outputs.len() {
        return Err(Error::InvalidArgument("evaluation sets must be equal and nonempty".into()));
    }
    let mut errs = Vec::with_capacity(inputs.len());
    for (u, v) in inputs.iter().zip(outputs) {
        errs.push(relative_l2_error(&p.predict(u)?, v)?);
    }
    let mean = errs.iter().sum::<f64>() / errs.len() as f64;
    Ok((mean, errs))
}

/// Indices of the lower-median and largest per-sample errors. Ties resolve
/// to the first index.
pub fn select_cases(errors: &[f64]) -> Result<(usize, usize)> {
    if errors.is_empty() {
        return Err(Error::InvalidArgument("case selection needs a nonempty error list".into()));
    }
    let mut order: Vec<usize> = (0..errors.len()).collect();
    order.sort_by(|&a, &b| errors[a].total_cmp(&errors[b]));
    let median_value = errors[order[(errors.len() - 1) / 2]];
    let median_idx = errors
        .iter()
        .position(|&e| e == median_value)
        .expect("median value present");
    let worst_value = errors[*order.last().expect("nonempty")];
    let worst_idx = errors
        .iter()
        .position(|&e| e == worst_value)
        .expect("worst value present");
    Ok((median_idx, worst_idx))
}

/// Least-squares fit of `error = a * cost^(-p)` in log-log space.
pub fn fit_power_law(costs: &[f64], errors: &[f64]) -> Result<(f64, f64)> {
    if costs.len() < 2 || costs.len() != errors.len() {
        return Err(Error::InvalidArgument("power-law fit needs at least two paired points".into()));
    }
    if costs.iter().chain(errors).any(|&v| v <= 0.0 || !v.is_finite()) {
        return Err(Error::InvalidArgument("power-law fit needs positive finite points".into()));
    }
    let xs: Vec<f64> = costs.iter().map(|c| c.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let var: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if var == 0.0 {
        return Err(Error::InvalidArgument("power-law fit needs at least two distinct costs".into()));
    }
    let cov: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = cov / var;
    let a = (my - slope * mx).exp();
    Ok((a, -slope))
}

/// Fresh-sample evaluation against the ground-truth solver with the input
/// covariance scaled by `factor` (factor 1 reproduces the training measure).
pub fn ood_evaluate(
    p: &dyn Predictor,
    setup: &ProblemSetup,
    factor: f64,
    m: usize,
    master_seed: u64,
) -> Result<f64> {
    if m == 0 {
        return Err(Error::InvalidArgument("OOD evaluation needs at least one sample".into()));
    }
    let spec = scale_covariance(&setup.input_spec()?, factor)?;
    let mut acc = 0.0;
    for i in 0..m as u64 {
        let mut rng = seed::rng(master_seed, "ood", i);
        let u = sample_with_rng(&spec, &mut rng)?;
        let truth = setup.solve_truth(&u)?;
        acc += relative_l2_error(&p.predict(&u)?, &truth)?;
    }
    Ok(acc / m as f64)
}

/// One row of the results table.
#[derive(Debug, Clone)]
pub struct ResultRecord {
    pub problem: Problem,
    pub arch: ArchKind,
    pub size: usize,
    pub n: usize,
    pub seed: u64,
    pub params: u64,
    pub flops: u64,
    pub train_err: f64,
    pub test_err: f64,
    pub ood_err: Option<f64>,
    pub wall_s: f64,
    pub median_idx: usize,
    pub worst_idx: usize,
}

/// OOD settings for a sweep cell.
#[derive(Debug, Clone, Copy)]
pub struct OodSpec {
    pub factor: f64,
    pub samples: usize,
}

impl Default for OodSpec {
    fn default() -> Self {
        OodSpec {
            factor: 4.0,
            samples: 32,
        }
    }
}

/// One (architecture, size, N, seed) training cell.
#[derive(Debug, Clone)]
pub struct CellSpec {
    pub arch: ArchKind,
    pub size: usize,
    pub n: usize,
    pub seed: u64,
    pub train: TrainConfig,
    pub d_u: usize,
    pub d_v: usize,
    pub fno_block: (usize, usize),
    /// Off by default so reruns produce byte-identical CSV files.
    pub record_walltime: bool,
    pub ood: Option<OodSpec>,
}

impl CellSpec {
    pub fn new(arch: ArchKind, size: usize, n: usize, seed: u64) -> Self {
        CellSpec {
            arch,
            size,
            n,
            seed,
            train: TrainConfig::default(),
            d_u: 64,
            d_v: 64,
            fno_block: (12, 12),
            record_walltime: false,
            ood: None,
        }
    }
}

/// Everything one cell produces: the record, the trained model, and the
/// per-sample test errors behind the median/worst selection.
#[derive(Debug)]
pub struct CellOutput {
    pub record: ResultRecord,
    pub model: OperatorModel,
    pub test_errors: Vec<f64>,
}

/// Train and evaluate one cell of the experiment matrix.
pub fn run_cell(setup: &ProblemSetup, ds: &Dataset, cell: &CellSpec) -> Result<CellOutput> {
    let tag = format!(
        "cell {}/{}/size={}/N={}/seed={}",
        setup.problem.as_str(),
        cell.arch.as_str(),
        cell.size,
        cell.n,
        cell.seed
    );
    let with_tag = |e: Error| Error::Numeric(format!("{tag}: {e}"));
    let (tri, tro, tei, teo) = split_dataset(ds, cell.n)?;
    let mut mc = ModelConfig::new(cell.arch, cell.size);
    mc.d_u = cell.d_u;
    mc.d_v = cell.d_v;
    mc.fno_block = cell.fno_block;
    mc.seed = cell.seed;
    let mut tc = cell.train.clone();
    tc.seed = cell.seed;
    let start = Instant::now();
    let mut model = build_model(&mc, tri, tro).map_err(with_tag)?;
    train(&mut model, tri, tro, &tc, None).map_err(with_tag)?;
    let wall_s = if cell.record_walltime {
        start.elapsed().as_secs_f64()
    } else {
        0.0
    };
    let (train_err, _) = evaluate_predictor(&model, tri, tro).map_err(with_tag)?;
    let (test_err, test_errors) = evaluate_predictor(&model, tei, teo).map_err(with_tag)?;
    let (median_idx, worst_idx) = select_cases(&test_errors)?;
    let ood_err = match cell.ood {
        Some(ood) => {
            Some(ood_evaluate(&model, setup, ood.factor, ood.samples, cell.seed).map_err(with_tag)?)
        }
        None => None,
    };
    let arch_cfg = model.arch_config();
    let record = ResultRecord {
        problem: setup.problem,
        arch: cell.arch,
        size: cell.size,
        n: cell.n,
        seed: cell.seed,
        params: model.param_count_enumerated(),
        flops: eval_flops(&arch_cfg)?,
        train_err,
        test_err,
        ood_err,
        wall_s,
        median_idx,
        worst_idx,
    };
    debug_assert_eq!(record.params, param_count_formula(&arch_cfg)?);
    Ok(CellOutput {
        record,
        model,
        test_errors,
    })
}

pub const RESULTS_CSV_HEADER: &str =
    "problem,arch,size,N,seed,params,flops,train_err,test_err,ood_err,wall_s,median_idx,worst_idx";

fn record_sort_key(r: &ResultRecord) -> (String, String, usize, usize, u64) {
    (
        r.problem.as_str().to_string(),
        r.arch.as_str().to_string(),
        r.size,
        r.n,
        r.seed,
    )
}

/// Render the results table: per-seed rows sorted by cell key, followed by a
/// synthetic seed=`mean` row per cell group (indices left empty there).
pub fn results_csv(records: &[ResultRecord]) -> String {
    let mut rows: Vec<&ResultRecord> = records.iter().collect();
    rows.sort_by_key(|r| record_sort_key(r));
    let mut out = String::from(RESULTS_CSV_HEADER);
    out.push('\n');
    let fmt_ood = |o: Option<f64>| o.map(|v| v.to_string()).unwrap_or_default();
    let mut i = 0;
    while i < rows.len() {
        let mut j = i;
        while j < rows.len()
            && rows[j].problem == rows[i].problem
            && rows[j].arch == rows[i].arch
            && rows[j].size == rows[i].size
            && rows[j].n == rows[i].n
        {
            j += 1;
        }
        let group = &rows[i..j];
        for r in group {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
                r.problem.as_str(),
                r.arch.as_str(),
                r.size,
                r.n,
                r.seed,
                r.params,
                r.flops,
                r.train_err,
                r.test_err,
                fmt_ood(r.ood_err),
                r.wall_s,
                r.median_idx,
                r.worst_idx
            ));
        }
        if group.len() > 1 {
            let gn = group.len() as f64;
            let mean = |f: fn(&ResultRecord) -> f64| group.iter().map(|r| f(r)).sum::<f64>() / gn;
            let ood_mean = if group.iter().all(|r| r.ood_err.is_some()) {
                (group.iter().map(|r| r.ood_err.unwrap()).sum::<f64>() / gn).to_string()
            } else {
                String::new()
            };
            out.push_str(&format!(
                "{},{},{},{},mean,{},{},{},{},{},{},,\n",
                group[0].problem.as_str(),
                group[0].arch.as_str(),
                group[0].size,
                group[0].n,
                group[0].params,
                group[0].flops,
                mean(|r| r.train_err),
                mean(|r| r.test_err),
                ood_mean,
                mean(|r| r.wall_s),
            ));
        }
        i = j;
    }
    out
}

pub fn write_results_csv(records: &[ResultRecord], path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, results_csv(records))?;
    Ok(())
}

pub const POWER_LAW_CSV_HEADER: &str = "problem,a,p";

pub fn power_law_csv(rows: &[(Problem, f64, f64)]) -> String {
    let mut out = String::from(POWER_LAW_CSV_HEADER);
    out.push('\n');
    for (problem, a, p) in rows {
        out.push_str(&format!("{},{},{}\n", problem.as_str(), a, p));
    }
    out
}

pub fn write_power_law_csv(rows: &[(Problem, f64, f64)], path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, power_law_csv(rows))?;
    Ok(())
}

fn field_to_checkpoint(field: &Field, kind: &str) -> Checkpoint {
    let mut meta = Metadata::new();
    meta.set("kind", "field");
    meta.set("role", kind);
    meta.set("channels", field.channels);
    field.grid.to_metadata("grid", &mut meta);
    let mut ck = Checkpoint::new(meta);
    ck.push("values", field.values.clone());
    ck
}

/// Read back a field written by [`dump_case_fields`].
pub fn read_case_field(path: impl AsRef<Path>) -> Result<Field> {
    let ck = Checkpoint::read(path)?;
    if ck.manifest.get("kind") != Some("field") {
        return Err(Error::Format("file is not a dumped field".into()));
    }
    let grid = Grid::from_metadata("grid", &ck.manifest)?;
    let channels: usize = ck
        .manifest
        .get("channels")
        .ok_or_else(|| Error::Format("dumped field missing channel count".into()))?
        .parse()
        .map_err(|_| Error::Format("bad channel count".into()))?;
    Field::new(grid, channels, ck.get("values")?.to_vec())
}

/// Write input, truth, prediction, and pointwise-error fields for one test
/// sample, plus a one-line CSV summary. Files are `<stem>_input.opbl`,
/// `_truth`, `_prediction`, `_error`, and `<stem>_summary.csv`.
pub fn dump_case_fields(
    p: &dyn Predictor,
    inputs: &[Field],
    outputs: &[Field],
    index: usize,
    dir: impl AsRef<Path>,
    stem: &str,
) -> Result<f64> {
    if index >= inputs.len() || inputs.len() != outputs.len() {
        return Err(Error::InvalidArgument(format!(
            "case index {index} out of bounds for {} samples",
            inputs.len()
        )));
    }
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let input = &inputs[index];
    let truth = &outputs[index];
    let pred = p.predict(input)?;
    let mut error = pred.clone();
    for (e, t) in error.values.iter_mut().zip(&truth.values) {
        *e -= t;
    }
    let rel = relative_l2_error(&pred, truth)?;
    field_to_checkpoint(input, "input").write(dir.join(format!("{stem}_input.opbl")))?;
    field_to_checkpoint(truth, "truth").write(dir.join(format!("{stem}_truth.opbl")))?;
    field_to_checkpoint(&pred, "prediction").write(dir.join(format!("{stem}_prediction.opbl")))?;
    field_to_checkpoint(&error, "error").write(dir.join(format!("{stem}_error.opbl")))?;
    std::fs::write(
        dir.join(format!("{stem}_summary.csv")),
        format!("index,relative_error\n{index},{rel}\n"),
    )?;
    Ok(rel)
}

/// Full sweep description.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub problem: Problem,
    pub archs: Vec<ArchKind>,
    pub sizes: Vec<usize>,
    pub n_list: Vec<usize>,
    pub seeds: Vec<u64>,
    pub train: TrainConfig,
    pub d_u: usize,
    pub d_v: usize,
    pub fno_block: (usize, usize),
    pub ood: Option<OodSpec>,
    pub record_walltime: bool,
    /// Dump median/worst cases for the largest cell of each architecture.
    pub dump_cases: bool,
    pub out_dir: std::path::PathBuf,
}

impl ExperimentConfig {
    pub fn validate(&self, dataset_len: usize) -> Result<()> {
        if self.archs.is_empty() || self.sizes.is_empty() || self.n_list.is_empty() || self.seeds.is_empty() {
            return Err(Error::InvalidArgument(
                "sweep needs nonempty architecture, size, N, and seed lists".into(),
            ));
        }
        let n_test = (dataset_len / 10).max(1);
        let n_max = *self.n_list.iter().max().expect("nonempty");
        if n_max + n_test > dataset_len {
            return Err(Error::InvalidArgument(format!(
                "largest N ({n_max}) plus {n_test} held-out samples exceeds dataset size {dataset_len}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug)]
pub struct SweepOutput {
    pub records: Vec<ResultRecord>,
    /// Fitted (a, p) of the FNO error-vs-cost power law, when FNO ran with
    /// at least two sizes.
    pub power_law: Option<(f64, f64)>,
}

/// Run the full experiment matrix, write `results.csv` (and `power_law.csv`
/// when applicable) into the output directory, and dump median/worst cases
/// for the largest cell of each architecture.
pub fn run_sweep(cfg: &ExperimentConfig, setup: &ProblemSetup, ds: &Dataset) -> Result<SweepOutput> {
    cfg.validate(ds.len())?;
    std::fs::create_dir_all(&cfg.out_dir)?;
    let n_max = *cfg.n_list.iter().max().expect("nonempty");
    let size_max = *cfg.sizes.iter().max().expect("nonempty");
    let mut records = Vec::new();
    // seed-mean FNO test error per size at the largest N, for the cost fit
    let mut fno_points: Vec<(f64, f64, usize)> = Vec::new();
    for &arch in &cfg.archs {
        for &size in &cfg.sizes {
            for &n in &cfg.n_list {
                for &seed_v in &cfg.seeds {
                    let mut cell = CellSpec::new(arch, size, n, seed_v);
                    cell.train = cfg.train.clone();
                    cell.d_u = cfg.d_u;
                    cell.d_v = cfg.d_v;
                    cell.fno_block = cfg.fno_block;
                    cell.record_walltime = cfg.record_walltime;
                    cell.ood = cfg.ood;
                    let out = run_cell(setup, ds, &cell)?;
                    if arch == ArchKind::Fno && n == n_max {
                        match fno_points.iter_mut().find(|(f, _, _)| *f == out.record.flops as f64)
                        {
                            Some((_, e, c)) => {
                                *e += out.record.test_err;
                                *c += 1;
                            }
                            None => fno_points.push((out.record.flops as f64, out.record.test_err, 1)),
                        }
                    }
                    let is_dump_cell = cfg.dump_cases
                        && size == size_max
                        && n == n_max
                        && seed_v == cfg.seeds[0];
                    if is_dump_cell {
                        let (_, _, tei, teo) = split_dataset(ds, n)?;
                        let stem_m = format!("{}_{}_median", setup.problem.as_str(), arch.as_str());
                        let stem_w = format!("{}_{}_worst", setup.problem.as_str(), arch.as_str());
                        dump_case_fields(&out.model, tei, teo, out.record.median_idx, &cfg.out_dir, &stem_m)?;
                        dump_case_fields(&out.model, tei, teo, out.record.worst_idx, &cfg.out_dir, &stem_w)?;
                    }
                    records.push(out.record);
                }
            }
        }
    }
    write_results_csv(&records, cfg.out_dir.join("results.csv"))?;
    let power_law = if fno_points.len() >= 2 {
        let costs: Vec<f64> = fno_points.iter().map(|(f, _, _)| *f).collect();
        let errs: Vec<f64> = fno_points.iter().map(|(_, e, c)| e / *c as f64).collect();
        let (a, p) = fit_power_law(&costs, &errs)?;
        write_power_law_csv(&[(setup.problem, a, p)], cfg.out_dir.join("power_law.csv"))?;
        Some((a, p))
    } else {
        None
    };
    Ok(SweepOutput { records, power_law })
}
