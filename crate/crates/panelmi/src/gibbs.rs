//! Blocked Gibbs sampler for the truncated latent-class models.
//!
//! One engine drives both models; they differ only in three places, selected
//! by [`ModelSpec`]: which multinomial tables a variable reads (pooled vs.
//! split by attrition status), how those tables are updated, and the full
//! conditional used to impute the refreshment sample's attrition indicator.
//!
//! A sweep is a deterministic scan: class assignments, stick fractions,
//! multinomial tables, retention probabilities, concentration, missing-cell
//! imputation, then attrition-indicator imputation. Likelihood products are
//! accumulated in log space with per-row max subtraction.

use std::path::Path;

use crate::data::{Origin, PanelDataset, Schema};
use crate::error::{Error, Result};
use crate::state::{
    init_state, occupied_class_count, stick_breaking, InitMode, ModelKind, ModelSpec,
    ParameterState, StateSnapshot, VarGroup,
};
use crate::stochastic::{
    normalize_log_weights_into, sample_beta, sample_categorical, sample_dirichlet_into,
    sample_gamma, RngStream,
};

/// MCMC schedule: total sweeps, burn-in, thinning, and how many completed
/// datasets to retain (every `imputation_spacing`-th thinned draw).
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct GibbsSchedule {
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    /// Completed datasets to retain for multiple imputation.
    pub m: usize,
    /// Stride between retained imputations, counted in thinned draws.
    pub imputation_spacing: usize,
}

impl GibbsSchedule {
    /// Default for synthetic-data studies.
    pub fn simulation_default() -> Self {
        Self {
            iterations: 20_000,
            burn_in: 10_000,
            thin: 10,
            m: 50,
            imputation_spacing: 20,
        }
    }

    /// Default for applied runs on survey data.
    pub fn applied_default() -> Self {
        Self {
            iterations: 150_000,
            burn_in: 100_000,
            thin: 50,
            m: 50,
            imputation_spacing: 20,
        }
    }

    /// Number of thinned post-burn-in draws.
    pub fn n_thinned(&self) -> usize {
        (self.iterations - self.burn_in) / self.thin
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 || self.burn_in >= self.iterations {
            return Err(Error::ScheduleInfeasible(format!(
                "burn-in {} must be below iterations {}",
                self.burn_in, self.iterations
            )));
        }
        if self.thin == 0 || self.imputation_spacing == 0 {
            return Err(Error::ScheduleInfeasible(
                "thin and imputation_spacing must be at least 1".into(),
            ));
        }
        if self.m * self.imputation_spacing > self.n_thinned() {
            return Err(Error::ScheduleInfeasible(format!(
                "{} imputations at spacing {} need more than the {} thinned draws available",
                self.m,
                self.imputation_spacing,
                self.n_thinned()
            )));
        }
        Ok(())
    }
}

/// Fully observed working copy of the data, mutated in place by the
/// imputation steps.
#[derive(Debug, Clone, PartialEq)]
pub struct CompletedData {
    n: usize,
    q: usize,
    z: Vec<u8>,
    w: Vec<u8>,
}

impl CompletedData {
    pub fn from_dataset(ds: &PanelDataset) -> Result<Self> {
        if !ds.is_fully_observed() {
            return Err(Error::Domain(
                "completed working data requires a fully observed dataset".into(),
            ));
        }
        let q = ds.schema().q();
        let n = ds.n();
        let mut z = Vec::with_capacity(n * q);
        let mut w = Vec::with_capacity(n);
        for i in 0..n {
            for j in 0..q {
                z.push(ds.cell(i, j).unwrap());
            }
            w.push(ds.w(i).unwrap() as u8);
        }
        Ok(Self { n, q, z, w })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn level(&self, i: usize, j: usize) -> u8 {
        self.z[i * self.q + j]
    }

    pub fn w(&self, i: usize) -> u8 {
        self.w[i]
    }

    pub fn set_level(&mut self, i: usize, j: usize, level: u8) {
        self.z[i * self.q + j] = level;
    }

    pub fn set_w(&mut self, i: usize, w: u8) {
        self.w[i] = w;
    }

    fn row(&self, i: usize) -> &[u8] {
        &self.z[i * self.q..(i + 1) * self.q]
    }
}

/// Per-sweep log tables, stored level-major so that accumulating the K class
/// weights for one row touches contiguous memory.
struct LogTables {
    k: usize,
    log_pi: Vec<f64>,
    log_rho1: Vec<f64>,
    log_rho0: Vec<f64>,
    /// `[(offset_j + level) * k + h]` for rows with w = 0 / w = 1.
    w0: Vec<f64>,
    w1: Vec<f64>,
}

/// Model-specific layout and step implementations over a fixed schema.
#[derive(Debug, Clone)]
pub struct GibbsModel {
    spec: ModelSpec,
    schema: Schema,
    offsets: Vec<usize>,
    stride: usize,
    groups: Vec<VarGroup>,
    split_vars: Vec<usize>,
}

impl GibbsModel {
    pub fn new(spec: ModelSpec, schema: Schema) -> Result<Self> {
        spec.validate()?;
        let (offsets, stride) = schema.level_layout();
        let groups: Vec<VarGroup> = schema
            .vars()
            .iter()
            .map(|v| spec.var_group(v.role))
            .collect();
        let split_vars: Vec<usize> = groups
            .iter()
            .enumerate()
            .filter(|(_, g)| **g == VarGroup::Split)
            .map(|(j, _)| j)
            .collect();
        Ok(Self {
            spec,
            schema,
            offsets,
            stride,
            groups,
            split_vars,
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    fn log_tables(&self, state: &ParameterState) -> LogTables {
        let k = state.k();
        let log_pi: Vec<f64> = state.pi.iter().map(|&p| p.ln()).collect();
        let log_rho1: Vec<f64> = state.rho.iter().map(|&r| r.ln()).collect();
        let log_rho0: Vec<f64> = state.rho.iter().map(|&r| (1.0 - r).ln()).collect();
        let mut w0 = vec![0.0; self.stride * k];
        let mut w1 = vec![0.0; self.stride * k];
        for (j, &group) in self.groups.iter().enumerate() {
            let d = self.schema.var(j).levels;
            for h in 0..k {
                for c in 0..d {
                    let idx = (self.offsets[j] + c) * k + h;
                    match (group, &state.psi_split) {
                        (VarGroup::Split, Some(split)) => {
                            w0[idx] = split[0].prob(h, j, c as u8).ln();
                            w1[idx] = split[1].prob(h, j, c as u8).ln();
                        }
                        _ => {
                            let lp = state.psi_shared.prob(h, j, c as u8).ln();
                            w0[idx] = lp;
                            w1[idx] = lp;
                        }
                    }
                }
            }
        }
        LogTables {
            k,
            log_pi,
            log_rho1,
            log_rho0,
            w0,
            w1,
        }
    }

    fn assignment_log_weights_with(
        &self,
        lt: &LogTables,
        data: &CompletedData,
        i: usize,
        out: &mut [f64],
    ) {
        let k = lt.k;
        if self.spec.ignore_w {
            out.copy_from_slice(&lt.log_pi);
        } else {
            let log_rho = if data.w(i) == 1 {
                &lt.log_rho1
            } else {
                &lt.log_rho0
            };
            for h in 0..k {
                out[h] = lt.log_pi[h] + log_rho[h];
            }
        }
        let table = if data.w(i) == 1 { &lt.w1 } else { &lt.w0 };
        for (j, &z) in data.row(i).iter().enumerate() {
            let base = (self.offsets[j] + z as usize) * k;
            let cols = &table[base..base + k];
            for (o, c) in out.iter_mut().zip(cols) {
                *o += c;
            }
        }
    }

    /// Normalized full conditional over classes for row `i`. This is the
    /// distribution the assignment step samples from; exposed so tests can
    /// check it against brute-force enumeration.
    pub fn assignment_distribution(
        &self,
        state: &ParameterState,
        data: &CompletedData,
        i: usize,
    ) -> Result<Vec<f64>> {
        let lt = self.log_tables(state);
        let mut logw = vec![0.0; lt.k];
        self.assignment_log_weights_with(&lt, data, i, &mut logw);
        let mut probs = vec![0.0; lt.k];
        normalize_log_weights_into(&logw, &mut probs)?;
        Ok(probs)
    }

    /// Draw a new class for every row from its full conditional.
    pub fn step_assignments(
        &self,
        state: &mut ParameterState,
        data: &CompletedData,
        rng: &mut RngStream,
    ) -> Result<()> {
        let lt = self.log_tables(state);
        let k = lt.k;
        let mut logw = vec![0.0; k];
        let mut probs = vec![0.0; k];
        for i in 0..data.n() {
            self.assignment_log_weights_with(&lt, data, i, &mut logw);
            normalize_log_weights_into(&logw, &mut probs).map_err(|e| match e {
                Error::AllNegInfinite => {
                    Error::NumericalUnderflow(format!("all class weights vanished at row {i}"))
                }
                other => other,
            })?;
            state.assignments[i] = sample_categorical(&probs, rng)?;
        }
        Ok(())
    }

    /// Conjugate update of the stick fractions given class occupancy;
    /// recomputes the class probabilities exactly.
    pub fn step_stick_weights(
        &self,
        state: &mut ParameterState,
        rng: &mut RngStream,
    ) -> Result<()> {
        let k = state.k();
        let mut n_h = vec![0usize; k];
        for &s in &state.assignments {
            n_h[s] += 1;
        }
        let mut tail = vec![0usize; k + 1];
        for h in (0..k).rev() {
            tail[h] = tail[h + 1] + n_h[h];
        }
        for h in 0..k.saturating_sub(1) {
            state.v[h] = sample_beta(1.0 + n_h[h] as f64, state.alpha + tail[h + 1] as f64, rng)?;
        }
        state.v[k - 1] = 1.0;
        state.pi = stick_breaking(&state.v)?;
        Ok(())
    }

    /// Conjugate Dirichlet updates of every multinomial table row. Pooled
    /// variables count all rows in a class; split variables count only the
    /// rows with the matching attrition status. Empty cells fall back to the
    /// flat prior.
    pub fn step_psi(
        &self,
        state: &mut ParameterState,
        data: &CompletedData,
        rng: &mut RngStream,
    ) -> Result<()> {
        let k = state.k();
        let cells = self.stride * k;
        let mut shared_counts = vec![0u32; cells];
        let mut split_counts = match state.psi_split {
            Some(_) => [vec![0u32; cells], vec![0u32; cells]],
            None => [Vec::new(), Vec::new()],
        };
        let has_split = state.psi_split.is_some();
        for i in 0..data.n() {
            let h = state.assignments[i];
            let w = data.w(i) as usize;
            let base = h * self.stride;
            for (j, &z) in data.row(i).iter().enumerate() {
                let idx = base + self.offsets[j] + z as usize;
                match self.groups[j] {
                    VarGroup::Shared => shared_counts[idx] += 1,
                    VarGroup::Split => {
                        debug_assert!(has_split);
                        split_counts[w][idx] += 1
                    }
                }
            }
        }

        let max_d = self
            .schema
            .vars()
            .iter()
            .map(|v| v.levels)
            .max()
            .unwrap_or(2);
        let mut alphas = vec![0.0; max_d];
        let mut draw = |table: &mut crate::state::PsiTable,
                        counts: &[u32],
                        j: usize,
                        rng: &mut RngStream|
         -> Result<()> {
            let d = self.schema.var(j).levels;
            for h in 0..k {
                let base = h * self.stride + self.offsets[j];
                for (c, a) in alphas[..d].iter_mut().enumerate() {
                    *a = 1.0 + counts[base + c] as f64;
                }
                sample_dirichlet_into(&alphas[..d], table.row_mut(h, j), rng)?;
            }
            Ok(())
        };

        // Split tables are updated in w = 1 then w = 0 order.
        let mut split = state.psi_split.take();
        for (j, &group) in self.groups.iter().enumerate() {
            match (group, &mut split) {
                (VarGroup::Split, Some(tables)) => {
                    draw(&mut tables[1], &split_counts[1], j, rng)?;
                    draw(&mut tables[0], &split_counts[0], j, rng)?;
                }
                _ => draw(&mut state.psi_shared, &shared_counts, j, rng)?,
            }
        }
        state.psi_split = split;
        Ok(())
    }

    /// Conjugate Beta update of the per-class retention probabilities.
    pub fn step_rho(
        &self,
        state: &mut ParameterState,
        data: &CompletedData,
        rng: &mut RngStream,
    ) -> Result<()> {
        let k = state.k();
        let mut ones = vec![0usize; k];
        let mut zeros = vec![0usize; k];
        for i in 0..data.n() {
            let h = state.assignments[i];
            if data.w(i) == 1 {
                ones[h] += 1;
            } else {
                zeros[h] += 1;
            }
        }
        for h in 0..k {
            state.rho[h] = sample_beta(1.0 + ones[h] as f64, 1.0 + zeros[h] as f64, rng)?;
        }
        Ok(())
    }

    /// Conjugate Gamma update of the concentration parameter, with the rate
    /// computed from the log of the final class probability. With K = 1
    /// there are no stick fractions and the concentration is held fixed.
    pub fn step_alpha(&self, state: &mut ParameterState, rng: &mut RngStream) -> Result<()> {
        let k = state.k();
        if k == 1 {
            return Ok(());
        }
        // log pi_K as a sum of log(1 - v_h): exact where the direct product
        // could underflow.
        let log_pi_k: f64 = state.v[..k - 1].iter().map(|&v| (1.0 - v).ln()).sum();
        let shape = self.spec.a_alpha + (k - 1) as f64;
        let rate = self.spec.b_alpha - log_pi_k;
        state.alpha = sample_gamma(shape, rate, rng)?;
        Ok(())
    }

    /// Redraw every originally missing cell from its class-conditional
    /// multinomial; observed cells are never touched.
    pub fn step_impute_missing(
        &self,
        state: &ParameterState,
        data: &mut CompletedData,
        missing: &[(usize, usize)],
        rng: &mut RngStream,
    ) -> Result<()> {
        for &(i, j) in missing {
            let h = state.assignments[i];
            let row = state.table_row(self.groups[j], data.w(i), h, j);
            data.set_level(i, j, sample_categorical(row, rng)? as u8);
        }
        Ok(())
    }

    /// Pr(W = 1 | everything else) for one row under this model: the
    /// two-point conditional from the split tables and retention probability
    /// under the pattern mixture model, or the retention probability alone
    /// under conditional independence.
    pub fn w1_conditional(&self, state: &ParameterState, data: &CompletedData, i: usize) -> f64 {
        let h = state.assignments[i];
        match self.spec.kind {
            ModelKind::Dpmpm => state.rho[h],
            ModelKind::Blpm => {
                let split = state
                    .psi_split
                    .as_ref()
                    .expect("pattern mixture state has split tables");
                let mut l1 = state.rho[h].ln();
                let mut l0 = (1.0 - state.rho[h]).ln();
                for &j in &self.split_vars {
                    let z = data.level(i, j);
                    l1 += split[1].prob(h, j, z).ln();
                    l0 += split[0].prob(h, j, z).ln();
                }
                let m = l1.max(l0);
                let e1 = (l1 - m).exp();
                e1 / (e1 + (l0 - m).exp())
            }
        }
    }

    /// Impute the attrition indicator for the refreshment rows. Panel rows
    /// are never touched.
    pub fn step_impute_w(
        &self,
        state: &ParameterState,
        data: &mut CompletedData,
        refresh_rows: &[usize],
        rng: &mut RngStream,
    ) -> Result<()> {
        match self.spec.kind {
            ModelKind::Dpmpm => {
                for &i in refresh_rows {
                    let p = state.rho[state.assignments[i]];
                    data.set_w(i, (rng_next_unit(rng) < p) as u8);
                }
            }
            ModelKind::Blpm => {
                let lt = self.log_tables(state);
                let k = lt.k;
                for &i in refresh_rows {
                    let h = state.assignments[i];
                    let mut l1 = lt.log_rho1[h];
                    let mut l0 = lt.log_rho0[h];
                    for &j in &self.split_vars {
                        let base = (self.offsets[j] + data.level(i, j) as usize) * k + h;
                        l1 += lt.w1[base];
                        l0 += lt.w0[base];
                    }
                    let m = l1.max(l0);
                    let e1 = (l1 - m).exp();
                    let p1 = e1 / (e1 + (l0 - m).exp());
                    data.set_w(i, (rng_next_unit(rng) < p1) as u8);
                }
            }
        }
        Ok(())
    }

    /// One full deterministic-scan sweep.
    pub fn sweep(
        &self,
        state: &mut ParameterState,
        data: &mut CompletedData,
        missing: &[(usize, usize)],
        refresh_rows: &[usize],
        rng: &mut RngStream,
    ) -> Result<()> {
        self.step_assignments(state, data, rng)?;
        self.step_stick_weights(state, rng)?;
        self.step_psi(state, data, rng)?;
        if !self.spec.ignore_w {
            self.step_rho(state, data, rng)?;
        }
        self.step_alpha(state, rng)?;
        self.step_impute_missing(state, data, missing, rng)?;
        if !self.spec.ignore_w {
            self.step_impute_w(state, data, refresh_rows, rng)?;
        }
        Ok(())
    }
}

fn rng_next_unit(rng: &mut RngStream) -> f64 {
    use rand::Rng;
    rng.random::<f64>()
}

/// Chain execution options beyond the schedule itself.
#[derive(Debug, Clone, Copy)]
pub struct RunOptions {
    pub init_mode: InitMode,
    /// Completed-dataset/state pairs to retain for posterior predictive
    /// checks, taken evenly spaced over the thinned draws (0 = none).
    pub ppc_keep: usize,
}

impl RunOptions {
    pub fn simulation() -> Self {
        Self {
            init_mode: InitMode::Simulation,
            ppc_keep: 0,
        }
    }

    pub fn applied() -> Self {
        Self {
            init_mode: InitMode::Applied,
            ppc_keep: 0,
        }
    }

    pub fn with_ppc(mut self, keep: usize) -> Self {
        self.ppc_keep = keep;
        self
    }
}

/// Per-thinned-sweep trace record.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub sweep: usize,
    pub alpha: f64,
    pub occupied_classes: usize,
    /// Class probabilities; class-indexed quantities are not identified
    /// under label switching and are exported for diagnostics only.
    pub pi: Vec<f64>,
    /// Completed-panel share at level 1 for every variable.
    pub panel_marginals: Vec<f64>,
}

/// A completed dataset paired with the state that produced it, retained for
/// posterior predictive checking.
#[derive(Debug, Clone)]
pub struct PpcDraw {
    pub completed: PanelDataset,
    pub state: StateSnapshot,
}

/// Everything a chain run produces.
#[derive(Debug, Clone)]
pub struct ChainOutput {
    pub spec: ModelSpec,
    pub retained_imputations: Vec<PanelDataset>,
    pub traces: Vec<TraceRecord>,
    pub ppc_draws: Vec<PpcDraw>,
    pub final_state: ParameterState,
}

/// Validate, initialize, and run one chain to completion.
pub fn run_chain(
    spec: &ModelSpec,
    data: &PanelDataset,
    schedule: &GibbsSchedule,
    opts: &RunOptions,
    rng: &mut RngStream,
) -> Result<ChainOutput> {
    spec.validate()?;
    schedule.validate()?;
    data.validate().into_result()?;

    let (completed_ds, mut state) = init_state(spec, data, opts.init_mode, rng)?;
    let model = GibbsModel::new(*spec, data.schema().clone())?;
    let missing = data.missing_cells();
    let refresh_rows = data.refresh_rows();
    let mut work = CompletedData::from_dataset(&completed_ds)?;

    let n_thinned = schedule.n_thinned();
    let ppc_keep = opts.ppc_keep.min(n_thinned);
    // Evenly spaced thinned indices (1-based) retained for checks.
    let mut ppc_at = vec![false; n_thinned + 1];
    if ppc_keep > 0 {
        for i in 1..=ppc_keep {
            ppc_at[i * n_thinned / ppc_keep] = true;
        }
    }

    let q = data.schema().q();
    let n_panel = data.n_panel();
    let panel_rows: Vec<usize> = (0..data.n())
        .filter(|&i| data.origin(i) == Origin::Panel)
        .collect();

    let mut traces = Vec::with_capacity(n_thinned);
    let mut retained = Vec::with_capacity(schedule.m);
    let mut ppc_draws = Vec::with_capacity(ppc_keep);

    for sweep in 1..=schedule.iterations {
        model.sweep(&mut state, &mut work, &missing, &refresh_rows, rng)?;
        if sweep <= schedule.burn_in || (sweep - schedule.burn_in) % schedule.thin != 0 {
            continue;
        }
        let t = (sweep - schedule.burn_in) / schedule.thin;

        let mut marginals = vec![0.0; q];
        for &i in &panel_rows {
            for (j, m) in marginals.iter_mut().enumerate() {
                if work.level(i, j) == 0 {
                    *m += 1.0;
                }
            }
        }
        marginals.iter_mut().for_each(|m| *m /= n_panel as f64);
        traces.push(TraceRecord {
            sweep,
            alpha: state.alpha,
            occupied_classes: occupied_class_count(&state.assignments),
            pi: state.pi.clone(),
            panel_marginals: marginals,
        });

        let need_imp =
            t % schedule.imputation_spacing == 0 && t / schedule.imputation_spacing <= schedule.m;
        let need_ppc = ppc_at[t];
        if need_imp || need_ppc {
            let w_bool: Vec<bool> = (0..work.n()).map(|i| work.w(i) == 1).collect();
            let snapshot_ds = data.with_completed(&work.z, &w_bool)?;
            if need_imp {
                retained.push(snapshot_ds.clone());
            }
            if need_ppc {
                ppc_draws.push(PpcDraw {
                    completed: snapshot_ds,
                    state: state.snapshot(spec, data.schema()),
                });
            }
        }
    }

    Ok(ChainOutput {
        spec: *spec,
        retained_imputations: retained,
        traces,
        ppc_draws,
        final_state: state,
    })
}

/// Write the trace as CSV: model kind, sweep, concentration, occupied
/// classes, then the completed-panel marginal of every variable.
pub fn write_trace_csv(out: &ChainOutput, schema: &Schema, path: &Path) -> Result<()> {
    use std::io::Write;
    let file = std::fs::File::create(path)?;
    let mut wtr = std::io::BufWriter::new(file);
    let model = model_label(&out.spec);
    let mut header = String::from("model,sweep,alpha,occupied_classes");
    for v in schema.vars() {
        header.push_str(&format!(",m_{}", v.name));
    }
    writeln!(wtr, "{header}")?;
    for t in &out.traces {
        let mut line = format!("{model},{},{},{}", t.sweep, t.alpha, t.occupied_classes);
        for m in &t.panel_marginals {
            line.push_str(&format!(",{m}"));
        }
        writeln!(wtr, "{line}")?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn model_label(spec: &ModelSpec) -> &'static str {
    match (spec.kind, spec.ignore_w) {
        (ModelKind::Dpmpm, true) => "dpmpm_mar",
        (ModelKind::Dpmpm, false) => "dpmpm",
        (ModelKind::Blpm, _) => "blpm",
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{RowRecord, VarRole, VariableSchema};

    fn binary_schema(q1: usize, q2: usize) -> Schema {
        let mut vars = Vec::new();
        for j in 0..q1 {
            vars.push(VariableSchema {
                name: format!("y1_{}", j + 1),
                role: VarRole::Y1,
                levels: 2,
            });
        }
        for j in 0..q2 {
            vars.push(VariableSchema {
                name: format!("y2_{}", j + 1),
                role: VarRole::Y2,
                levels: 2,
            });
        }
        Schema::new(vars).unwrap()
    }

    fn row(cells: Vec<Option<u8>>, w: Option<bool>) -> RowRecord {
        RowRecord {
            cells,
            w,
            weight: None,
        }
    }

    /// Six-row instance with one Y1 and two Y2 binary variables.
    fn tiny_dataset() -> PanelDataset {
        PanelDataset::concatenate(
            vec![
                row(vec![Some(0), Some(1), Some(0)], Some(true)),
                row(vec![Some(1), Some(0), Some(0)], Some(true)),
                row(vec![Some(0), None, None], Some(false)),
                row(vec![Some(1), None, None], Some(false)),
            ],
            vec![
                row(vec![None, Some(0), Some(1)], None),
                row(vec![None, Some(1), Some(1)], None),
            ],
            binary_schema(1, 2),
        )
        .unwrap()
    }

    fn init_for(
        spec: &ModelSpec,
        data: &PanelDataset,
        seed: u64,
    ) -> (GibbsModel, ParameterState, CompletedData, RngStream) {
        let mut rng = RngStream::new(seed, 0);
        let (completed, state) = init_state(spec, data, InitMode::Simulation, &mut rng).unwrap();
        let model = GibbsModel::new(*spec, data.schema().clone()).unwrap();
        let work = CompletedData::from_dataset(&completed).unwrap();
        (model, state, work, rng)
    }

    #[test]
    fn schedule_arithmetic_and_validation() {
        let s = GibbsSchedule {
            iterations: 100,
            burn_in: 50,
            thin: 5,
            m: 2,
            imputation_spacing: 5,
        };
        s.validate().unwrap();
        assert_eq!(s.n_thinned(), 10);

        let bad = GibbsSchedule { m: 3, ..s };
        assert!(matches!(bad.validate(), Err(Error::ScheduleInfeasible(_))));
        let bad = GibbsSchedule { burn_in: 100, ..s };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn k1_assigns_everything_to_the_single_class() {
        let data = tiny_dataset();
        let spec = ModelSpec::blpm(1);
        let (model, mut state, work, mut rng) = init_for(&spec, &data, 11);
        let alpha_before = state.alpha;
        model.step_assignments(&mut state, &work, &mut rng).unwrap();
        assert!(state.assignments.iter().all(|&s| s == 0));
        model.step_stick_weights(&mut state, &mut rng).unwrap();
        assert_eq!(state.pi, vec![1.0]);
        model.step_alpha(&mut state, &mut rng).unwrap();
        assert_eq!(state.alpha, alpha_before);
    }

    /// Brute-force full conditional for class assignment, computed in
    /// probability space straight from the state tables.
    fn brute_force_assignment(
        spec: &ModelSpec,
        schema: &Schema,
        state: &ParameterState,
        data: &CompletedData,
        i: usize,
    ) -> Vec<f64> {
        let k = state.k();
        let w = data.w(i);
        let mut weights = vec![0.0; k];
        for h in 0..k {
            let mut p = state.pi[h];
            if !spec.ignore_w {
                p *= if w == 1 {
                    state.rho[h]
                } else {
                    1.0 - state.rho[h]
                };
            }
            for j in 0..schema.q() {
                let group = spec.var_group(schema.var(j).role);
                let row = state.table_row(group, w, h, j);
                p *= row[data.level(i, j) as usize];
            }
            weights[h] = p;
        }
        let total: f64 = weights.iter().sum();
        weights.iter().map(|&x| x / total).collect()
    }

    #[test]
    fn assignment_distribution_matches_enumeration() {
        let data = tiny_dataset();
        for spec in [ModelSpec::blpm(2), ModelSpec::dpmpm(2), ModelSpec::blpm(3)] {
            let (model, mut state, mut work, mut rng) = init_for(&spec, &data, 17);
            // A few sweeps to move the state off its symmetric start.
            let missing = data.missing_cells();
            let refresh = data.refresh_rows();
            for _ in 0..5 {
                model
                    .sweep(&mut state, &mut work, &missing, &refresh, &mut rng)
                    .unwrap();
            }
            for i in 0..data.n() {
                let fast = model.assignment_distribution(&state, &work, i).unwrap();
                let slow = brute_force_assignment(&spec, data.schema(), &state, &work, i);
                for (a, b) in fast.iter().zip(&slow) {
                    assert!((a - b).abs() < 1e-12, "row {i}: {fast:?} vs {slow:?}");
                }
            }
        }
    }

    #[test]
    fn tied_split_tables_reduce_to_pooled_model() {
        let data = tiny_dataset();
        let spec_b = ModelSpec::blpm(3);
        let spec_d = ModelSpec::dpmpm(3);
        let (model_b, mut state, work, mut rng) = init_for(&spec_b, &data, 23);
        let model_d = GibbsModel::new(spec_d, data.schema().clone()).unwrap();

        // Perturb the pooled table, then tie the split tables to it.
        model_b.step_psi(&mut state, &work, &mut rng).unwrap();
        let tied = state.psi_shared.clone();
        state.psi_split = Some(Box::new([tied.clone(), tied]));

        let mut ci_state = state.clone();
        ci_state.psi_split = None;

        for i in 0..data.n() {
            let b = model_b.assignment_distribution(&state, &work, i).unwrap();
            let d = model_d
                .assignment_distribution(&ci_state, &work, i)
                .unwrap();
            for (x, y) in b.iter().zip(&d) {
                assert!((x - y).abs() < 1e-14);
            }
        }
        // With tied tables the attrition conditional collapses to rho.
        for &i in &data.refresh_rows() {
            let p = model_b.w1_conditional(&state, &work, i);
            let r = ci_state.rho[state.assignments[i]];
            assert!((p - r).abs() < 1e-12);
        }
    }

    #[test]
    fn w_conditional_fixture() {
        // Single binary wave-2 variable, no X. Class tables:
        // psi1 = 0.38, psi0 = 0.76, rho = 0.8 gives
        // Pr(W=1) = 0.8 * 0.38 / (0.8 * 0.38 + 0.2 * 0.76) = 2/3.
        let data = PanelDataset::concatenate(
            vec![
                row(vec![Some(0), Some(0)], Some(true)),
                row(vec![Some(1), None], Some(false)),
            ],
            vec![row(vec![None, Some(0)], None)],
            binary_schema(1, 1),
        )
        .unwrap();
        let spec = ModelSpec::blpm(1);
        let (model, mut state, work, _) = init_for(&spec, &data, 29);
        state.rho[0] = 0.8;
        let split = state.psi_split.as_mut().unwrap();
        split[1].row_mut(0, 1).copy_from_slice(&[0.38, 0.62]);
        split[0].row_mut(0, 1).copy_from_slice(&[0.76, 0.24]);
        state.assignments = vec![0, 0, 0];
        let p = model.w1_conditional(&state, &work, 2);
        assert!((p - 2.0 / 3.0).abs() < 1e-12, "got {p}");
    }

    #[test]
    fn w_conditional_certain_retention() {
        let data = tiny_dataset();
        let spec = ModelSpec::blpm(2);
        let (model, mut state, mut work, mut rng) = init_for(&spec, &data, 31);
        for r in state.rho.iter_mut() {
            *r = 1.0 - 1e-16;
        }
        // Tie the split tables so only rho matters.
        let tied = state.psi_shared.clone();
        state.psi_split = Some(Box::new([tied.clone(), tied]));
        let refresh = data.refresh_rows();
        model
            .step_impute_w(&state, &mut work, &refresh, &mut rng)
            .unwrap();
        for &i in &refresh {
            assert_eq!(work.w(i), 1);
        }
    }

    #[test]
    fn impute_missing_only_touches_missing_cells() {
        let data = tiny_dataset();
        let spec = ModelSpec::blpm(3);
        let (model, state, mut work, mut rng) = init_for(&spec, &data, 37);
        let before = work.clone();
        let missing = data.missing_cells();
        model
            .step_impute_missing(&state, &mut work, &missing, &mut rng)
            .unwrap();
        for i in 0..data.n() {
            for j in 0..data.schema().q() {
                if data.cell(i, j).is_some() {
                    assert_eq!(work.level(i, j), before.level(i, j));
                }
            }
        }
    }

    #[test]
    fn impute_missing_degenerate_row_is_deterministic() {
        let data = tiny_dataset();
        let spec = ModelSpec::blpm(2);
        let (model, mut state, mut work, mut rng) = init_for(&spec, &data, 41);
        // Point-mass tables force attriter wave-2 cells to level 1.
        let split = state.psi_split.as_mut().unwrap();
        for h in 0..2 {
            for j in 1..=2 {
                split[0].row_mut(h, j).copy_from_slice(&[1.0, 0.0]);
            }
        }
        let missing: Vec<(usize, usize)> = data
            .missing_cells()
            .into_iter()
            .filter(|&(i, _)| data.w(i) == Some(false))
            .collect();
        model
            .step_impute_missing(&state, &mut work, &missing, &mut rng)
            .unwrap();
        for &(i, j) in &missing {
            assert_eq!(work.level(i, j), 0);
        }
    }

    #[test]
    fn chain_reproducible_and_trace_arithmetic() {
        let data = tiny_dataset();
        let spec = ModelSpec::blpm(3);
        let schedule = GibbsSchedule {
            iterations: 100,
            burn_in: 50,
            thin: 5,
            m: 2,
            imputation_spacing: 5,
        };
        let opts = RunOptions::simulation().with_ppc(3);
        let run = |seed| {
            let mut rng = RngStream::new(seed, 0);
            run_chain(&spec, &data, &schedule, &opts, &mut rng).unwrap()
        };
        let a = run(99);
        let b = run(99);
        assert_eq!(a.traces.len(), 10);
        assert_eq!(a.retained_imputations.len(), 2);
        assert_eq!(a.ppc_draws.len(), 3);
        assert_eq!(a.traces, b.traces);
        assert_eq!(a.retained_imputations, b.retained_imputations);
        let c = run(100);
        assert_ne!(a.traces, c.traces);
        for imp in &a.retained_imputations {
            assert!(imp.is_fully_observed());
        }
    }

    #[test]
    fn simplex_invariants_hold_across_sweeps() {
        let data = tiny_dataset();
        let spec = ModelSpec::blpm(4);
        let (model, mut state, mut work, mut rng) = init_for(&spec, &data, 53);
        let missing = data.missing_cells();
        let refresh = data.refresh_rows();
        for _ in 0..50 {
            model
                .sweep(&mut state, &mut work, &missing, &refresh, &mut rng)
                .unwrap();
            let total: f64 = state.pi.iter().sum();
            assert!((total - 1.0).abs() < 1e-12);
            for h in 0..state.k() {
                for j in 0..data.schema().q() {
                    let shared: f64 = state.psi_shared.row(h, j).iter().sum();
                    assert!((shared - 1.0).abs() < 1e-9);
                    if let Some(split) = &state.psi_split {
                        for t in split.iter() {
                            let s: f64 = t.row(h, j).iter().sum();
                            assert!((s - 1.0).abs() < 1e-9);
                        }
                    }
                }
            }
            assert!(state.alpha.is_finite() && state.alpha > 0.0);
        }
    }

    #[test]
    fn mar_variant_drops_attrition_from_weights() {
        let data = tiny_dataset();
        let spec = ModelSpec::dpmpm_mar(2);
        let (model, mut state, work, _) = init_for(&spec, &data, 61);
        state.rho = vec![0.99, 0.01];
        let probs = model.assignment_distribution(&state, &work, 0).unwrap();
        // Forcing extreme rho must not change the distribution.
        state.rho = vec![0.5, 0.5];
        let probs2 = model.assignment_distribution(&state, &work, 0).unwrap();
        for (a, b) in probs.iter().zip(&probs2) {
            assert!((a - b).abs() < 1e-15);
        }
    }
}
