//! Latent-class model specification, parameter state, stick-breaking
//! construction, and chain initialization.

use serde::{Deserialize, Serialize};

use crate::data::{DatasetKind, Origin, PanelDataset, Schema, VarRole};
use crate::error::{Error, Result};
use crate::stochastic::{sample_bernoulli, sample_beta, sample_categorical, RngStream};

/// Which joint model the sampler targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    /// Mixture of products of multinomials with all variables independent of
    /// the attrition indicator within classes.
    Dpmpm,
    /// Latent pattern mixture: wave-2 (and optionally time-invariant)
    /// multinomials depend on the attrition indicator within classes.
    Blpm,
}

/// Whether a variable's multinomial table is pooled across attrition status
/// or split by it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarGroup {
    Shared,
    Split,
}

/// Model configuration: kind, truncation level, concentration hyperpriors,
/// and the within-class dependence toggles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    /// Truncation level K (number of latent classes).
    pub k: usize,
    pub a_alpha: f64,
    pub b_alpha: f64,
    /// Under the pattern mixture model, let the time-invariant block depend
    /// on the attrition indicator within classes.
    pub x_depends_on_w: bool,
    /// Drop the attrition indicator from the likelihood entirely (missing at
    /// random variant; only meaningful with `Dpmpm`).
    pub ignore_w: bool,
}

impl ModelSpec {
    pub fn blpm(k: usize) -> Self {
        Self {
            kind: ModelKind::Blpm,
            k,
            a_alpha: 0.25,
            b_alpha: 0.25,
            x_depends_on_w: true,
            ignore_w: false,
        }
    }

    pub fn dpmpm(k: usize) -> Self {
        Self {
            kind: ModelKind::Dpmpm,
            k,
            a_alpha: 0.25,
            b_alpha: 0.25,
            x_depends_on_w: false,
            ignore_w: false,
        }
    }

    /// Missing-at-random variant: a DPMPM that disregards the attrition
    /// indicator.
    pub fn dpmpm_mar(k: usize) -> Self {
        Self {
            ignore_w: true,
            ..Self::dpmpm(k)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 1 {
            return Err(Error::Domain("K must be at least 1".into()));
        }
        if !(self.a_alpha > 0.0 && self.b_alpha > 0.0) {
            return Err(Error::Domain("a_alpha and b_alpha must be > 0".into()));
        }
        if self.kind == ModelKind::Dpmpm && self.x_depends_on_w {
            return Err(Error::Domain(
                "the conditional-independence model cannot split X by attrition status".into(),
            ));
        }
        if self.ignore_w && self.kind != ModelKind::Dpmpm {
            return Err(Error::Domain(
                "ignore_w is only meaningful for the conditional-independence model".into(),
            ));
        }
        Ok(())
    }

    /// Table ownership for a variable role under this model.
    pub fn var_group(&self, role: VarRole) -> VarGroup {
        match (self.kind, role) {
            (ModelKind::Dpmpm, _) => VarGroup::Shared,
            (ModelKind::Blpm, VarRole::Y1) => VarGroup::Shared,
            (ModelKind::Blpm, VarRole::Y2) => VarGroup::Split,
            (ModelKind::Blpm, VarRole::X) => {
                if self.x_depends_on_w {
                    VarGroup::Split
                } else {
                    VarGroup::Shared
                }
            }
        }
    }
}

/// How missing data and parameters are initialized before the first sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitMode {
    /// Flat multinomial tables and stick fractions drawn from their prior.
    Simulation,
    /// Multinomial tables set to completed-data marginals and small fixed
    /// stick fractions.
    Applied,
}

/// Per-class, per-variable, per-level multinomial probabilities stored as a
/// flat `K x (sum of level counts)` array.
#[derive(Debug, Clone, PartialEq)]
pub struct PsiTable {
    k: usize,
    stride: usize,
    offsets: Vec<usize>,
    dims: Vec<usize>,
    data: Vec<f64>,
}

impl PsiTable {
    /// All rows uniform over their levels.
    pub fn uniform(k: usize, schema: &Schema) -> Self {
        let (offsets, stride) = schema.level_layout();
        let dims: Vec<usize> = schema.vars().iter().map(|v| v.levels).collect();
        let mut data = vec![0.0; k * stride];
        for h in 0..k {
            for (j, &d) in dims.iter().enumerate() {
                let base = h * stride + offsets[j];
                for c in 0..d {
                    data[base + c] = 1.0 / d as f64;
                }
            }
        }
        Self {
            k,
            stride,
            offsets,
            dims,
            data,
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n_vars(&self) -> usize {
        self.dims.len()
    }

    pub fn levels(&self, j: usize) -> usize {
        self.dims[j]
    }

    pub(crate) fn stride(&self) -> usize {
        self.stride
    }

    pub(crate) fn offset(&self, j: usize) -> usize {
        self.offsets[j]
    }

    pub(crate) fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, h: usize, j: usize) -> &[f64] {
        let base = h * self.stride + self.offsets[j];
        &self.data[base..base + self.dims[j]]
    }

    pub fn row_mut(&mut self, h: usize, j: usize) -> &mut [f64] {
        let base = h * self.stride + self.offsets[j];
        &mut self.data[base..base + self.dims[j]]
    }

    pub fn prob(&self, h: usize, j: usize, level: u8) -> f64 {
        self.data[h * self.stride + self.offsets[j] + level as usize]
    }

    /// Set every row for variable `j` (all classes) to the same simplex.
    pub fn fill_var(&mut self, j: usize, probs: &[f64]) {
        debug_assert_eq!(probs.len(), self.dims[j]);
        for h in 0..self.k {
            self.row_mut(h, j).copy_from_slice(probs);
        }
    }
}

/// Full Gibbs state for one chain.
#[derive(Debug, Clone)]
pub struct ParameterState {
    /// Stick fractions, length K with the last entry pinned to 1.
    pub v: Vec<f64>,
    /// Class probabilities, always recomputed from `v`.
    pub pi: Vec<f64>,
    /// Concentration of the stick-breaking prior.
    pub alpha: f64,
    /// Per-class retention probabilities.
    pub rho: Vec<f64>,
    /// Pooled multinomial tables.
    pub psi_shared: PsiTable,
    /// Split tables indexed by attrition status `[w=0, w=1]`; absent under
    /// the conditional-independence model.
    pub psi_split: Option<Box<[PsiTable; 2]>>,
    /// Per-row class assignments (0-based).
    pub assignments: Vec<usize>,
}

impl ParameterState {
    pub fn k(&self) -> usize {
        self.pi.len()
    }

    /// Multinomial row used for variable `j` by a row with attrition status
    /// `w`, under the table-ownership rule baked into this state.
    pub fn table_row(&self, group: VarGroup, w: u8, h: usize, j: usize) -> &[f64] {
        match (group, &self.psi_split) {
            (VarGroup::Split, Some(split)) => split[w as usize].row(h, j),
            _ => self.psi_shared.row(h, j),
        }
    }
}

/// Stick-breaking map from fractions to class probabilities:
/// `pi_h = v_h * prod_{g<h} (1 - v_g)` with `v_K = 1`.
pub fn stick_breaking(v: &[f64]) -> Result<Vec<f64>> {
    if v.is_empty() {
        return Err(Error::EmptyInput);
    }
    let k = v.len();
    if v[k - 1] != 1.0 {
        return Err(Error::Domain("last stick fraction must equal 1".into()));
    }
    for &x in v {
        if !(x > 0.0 && x <= 1.0) {
            return Err(Error::Domain(format!("stick fraction {x} outside (0, 1]")));
        }
    }
    let mut pi = Vec::with_capacity(k);
    let mut remaining = 1.0;
    for &x in v {
        pi.push(x * remaining);
        remaining *= 1.0 - x;
    }
    Ok(pi)
}

/// Number of classes with at least one assigned observation. Significant
/// posterior mass at K itself signals the truncation level is too small.
pub fn occupied_class_count(assignments: &[usize]) -> usize {
    if assignments.is_empty() {
        return 0;
    }
    let k = assignments.iter().max().unwrap() + 1;
    let mut seen = vec![false; k];
    for &s in assignments {
        seen[s] = true;
    }
    seen.iter().filter(|&&b| b).count()
}

/// Starting distribution for attriter wave-2 values, moment-matched from
/// `Pr(Y2) = Pr(Y2|W=1) Pr(W=1) + Pr(Y2|W=0) Pr(W=0)`. The solved
/// probabilities can exit [0, 1]; they are clamped to [0.001, 0.999] and
/// renormalized, since the sampler only needs a starting point.
pub fn attriter_moment_dist(p_all: &[f64], p_completers: &[f64], p_w1: f64) -> Result<Vec<f64>> {
    if p_all.len() != p_completers.len() {
        return Err(Error::LengthMismatch(format!(
            "p_all {} vs p_completers {}",
            p_all.len(),
            p_completers.len()
        )));
    }
    let p_w0 = 1.0 - p_w1;
    if p_w0 <= 0.0 {
        return Err(Error::DegenerateInit(
            "no attriters: Pr(W=0) = 0".to_string(),
        ));
    }
    let mut out: Vec<f64> = p_all
        .iter()
        .zip(p_completers)
        .map(|(&pa, &pc)| ((pa - pc * p_w1) / p_w0).clamp(0.001, 0.999))
        .collect();
    let total: f64 = out.iter().sum();
    out.iter_mut().for_each(|x| *x /= total);
    Ok(out)
}

fn observed_marginal(
    data: &PanelDataset,
    j: usize,
    rows: impl Iterator<Item = usize>,
) -> Option<Vec<f64>> {
    let d = data.schema().var(j).levels;
    let mut counts = vec![0usize; d];
    let mut total = 0usize;
    for i in rows {
        if let Some(level) = data.cell(i, j) {
            counts[level as usize] += 1;
            total += 1;
        }
    }
    if total == 0 {
        return None;
    }
    Some(counts.iter().map(|&c| c as f64 / total as f64).collect())
}

fn uniform_dist(d: usize) -> Vec<f64> {
    vec![1.0 / d as f64; d]
}

/// Fill every missing value and draw the starting parameter state.
///
/// Missing time-invariant and wave-1 cells are drawn from observed
/// marginals; refreshment wave-2 item nonresponse from the refreshment
/// marginal; attriter wave-2 cells from the moment-matched distribution (see
/// [`attriter_moment_dist`]); refreshment attrition indicators from
/// Bernoulli(N_cp / N_p). Tables start flat in [`InitMode::Simulation`] and
/// at completed-data marginals in [`InitMode::Applied`].
pub fn init_state(
    spec: &ModelSpec,
    data: &PanelDataset,
    mode: InitMode,
    rng: &mut RngStream,
) -> Result<(PanelDataset, ParameterState)> {
    spec.validate()?;
    let schema = data.schema();
    let q = schema.q();
    let n = data.n();
    let n_panel = data.n_panel();
    if n_panel == 0 {
        return Err(Error::DegenerateInit("no panel rows".into()));
    }
    let n_cp = data.n_completers();
    let p_w1 = n_cp as f64 / n_panel as f64;
    if data.kind() == DatasetKind::Collected && p_w1 >= 1.0 {
        return Err(Error::DegenerateInit(
            "no attriters: Pr(W=0) = 0, nothing to correct".into(),
        ));
    }

    // Per-variable fill distributions.
    let panel_rows = || (0..n).filter(|&i| data.origin(i) == Origin::Panel);
    let refresh_rows = || (0..n).filter(|&i| data.origin(i) == Origin::Refresh);
    let completer_rows = || panel_rows().filter(|&i| data.w(i) == Some(true));

    let mut fill_x: Vec<Vec<f64>> = Vec::with_capacity(q);
    let mut fill_refresh_y2: Vec<Vec<f64>> = Vec::with_capacity(q);
    let mut fill_completer_y2: Vec<Vec<f64>> = Vec::with_capacity(q);
    let mut fill_attriter_y2: Vec<Vec<f64>> = Vec::with_capacity(q);
    for j in 0..q {
        let d = schema.var(j).levels;
        match schema.var(j).role {
            VarRole::X => {
                fill_x.push(observed_marginal(data, j, 0..n).unwrap_or_else(|| uniform_dist(d)));
                fill_refresh_y2.push(Vec::new());
                fill_completer_y2.push(Vec::new());
                fill_attriter_y2.push(Vec::new());
            }
            VarRole::Y1 => {
                fill_x.push(
                    observed_marginal(data, j, panel_rows())
                        .unwrap_or_else(|| uniform_dist(d)),
                );
                fill_refresh_y2.push(Vec::new());
                fill_completer_y2.push(Vec::new());
                fill_attriter_y2.push(Vec::new());
            }
            VarRole::Y2 => {
                let completer = observed_marginal(data, j, completer_rows())
                    .unwrap_or_else(|| uniform_dist(d));
                let refresh = observed_marginal(data, j, refresh_rows())
                    .unwrap_or_else(|| completer.clone());
                let attriter = attriter_moment_dist(&refresh, &completer, p_w1)?;
                fill_x.push(Vec::new());
                fill_refresh_y2.push(refresh);
                fill_completer_y2.push(completer);
                fill_attriter_y2.push(attriter);
            }
        }
    }

    // Complete the data, visiting missing cells in row-major order.
    let mut z: Vec<u8> = vec![0; n * q];
    for i in 0..n {
        for j in 0..q {
            z[i * q + j] = match data.cell(i, j) {
                Some(level) => level,
                None => {
                    let dist: &[f64] = match schema.var(j).role {
                        VarRole::X | VarRole::Y1 => &fill_x[j],
                        VarRole::Y2 => match (data.origin(i), data.w(i)) {
                            (Origin::Refresh, _) => &fill_refresh_y2[j],
                            (Origin::Panel, Some(false)) => &fill_attriter_y2[j],
                            (Origin::Panel, _) => &fill_completer_y2[j],
                        },
                    };
                    sample_categorical(dist, rng)? as u8
                }
            };
        }
    }
    let mut w: Vec<bool> = vec![false; n];
    for i in 0..n {
        w[i] = match data.w(i) {
            Some(b) => b,
            None => sample_bernoulli(p_w1, rng)?,
        };
    }
    let completed = data.with_completed(&z, &w)?;

    // Parameters.
    let k = spec.k;
    let rho_init = p_w1.clamp(1e-6, 1.0 - 1e-6);
    let mut psi_shared = PsiTable::uniform(k, schema);
    if mode == InitMode::Applied {
        for j in 0..q {
            let marg = observed_marginal(&completed, j, 0..n).expect("completed data");
            psi_shared.fill_var(j, &marg);
        }
    }
    // Both split tables start at the pooled table (symmetric start).
    let psi_split = match spec.kind {
        ModelKind::Blpm => Some(Box::new([psi_shared.clone(), psi_shared.clone()])),
        ModelKind::Dpmpm => None,
    };

    let mut v = vec![1.0; k];
    for vh in v.iter_mut().take(k - 1) {
        *vh = match mode {
            InitMode::Simulation => sample_beta(1.0, 1.0, rng)?,
            InitMode::Applied => 0.1,
        };
    }
    let pi = stick_breaking(&v)?;
    let mut assignments = vec![0usize; n];
    for a in assignments.iter_mut() {
        *a = sample_categorical(&pi, rng)?;
    }

    let state = ParameterState {
        v,
        pi,
        alpha: 1.0,
        rho: vec![rho_init; k],
        psi_shared,
        psi_split,
        assignments,
    };
    Ok((completed, state))
}

/// Serializable snapshot of a chain state. Multinomial tables carry entries
/// only for the variables they own under the model; class indices serialize
/// 1-based.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StateSnapshot {
    pub model: ModelKind,
    pub x_depends_on_w: bool,
    #[serde(rename = "V")]
    pub v: Vec<f64>,
    pub pi: Vec<f64>,
    pub alpha: f64,
    pub rho: Vec<f64>,
    pub psi: Vec<Vec<Option<Vec<f64>>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub psi0: Option<Vec<Vec<Option<Vec<f64>>>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub psi1: Option<Vec<Vec<Option<Vec<f64>>>>>,
    pub s: Vec<usize>,
}

fn table_to_nested(
    table: &PsiTable,
    keep: impl Fn(usize) -> bool,
) -> Vec<Vec<Option<Vec<f64>>>> {
    (0..table.k())
        .map(|h| {
            (0..table.n_vars())
                .map(|j| keep(j).then(|| table.row(h, j).to_vec()))
                .collect()
        })
        .collect()
}

impl ParameterState {
    pub fn snapshot(&self, spec: &ModelSpec, schema: &Schema) -> StateSnapshot {
        let group = |j: usize| spec.var_group(schema.var(j).role);
        let psi = table_to_nested(&self.psi_shared, |j| group(j) == VarGroup::Shared);
        let (psi0, psi1) = match &self.psi_split {
            Some(split) => (
                Some(table_to_nested(&split[0], |j| group(j) == VarGroup::Split)),
                Some(table_to_nested(&split[1], |j| group(j) == VarGroup::Split)),
            ),
            None => (None, None),
        };
        StateSnapshot {
            model: spec.kind,
            x_depends_on_w: spec.x_depends_on_w,
            v: self.v.clone(),
            pi: self.pi.clone(),
            alpha: self.alpha,
            rho: self.rho.clone(),
            psi,
            psi0,
            psi1,
            s: self.assignments.iter().map(|&s| s + 1).collect(),
        }
    }
}

impl StateSnapshot {
    /// Multinomial row for variable `j` as used by a row with attrition
    /// status `w` and class `h` (0-based).
    pub fn var_row(&self, h: usize, j: usize, w: u8, role: VarRole) -> Result<&[f64]> {
        let group = match self.model {
            ModelKind::Dpmpm => VarGroup::Shared,
            ModelKind::Blpm => match role {
                VarRole::Y1 => VarGroup::Shared,
                VarRole::Y2 => VarGroup::Split,
                VarRole::X => {
                    if self.x_depends_on_w {
                        VarGroup::Split
                    } else {
                        VarGroup::Shared
                    }
                }
            },
        };
        let table = match group {
            VarGroup::Shared => &self.psi,
            VarGroup::Split => {
                let split = if w == 1 { &self.psi1 } else { &self.psi0 };
                split.as_ref().ok_or_else(|| {
                    Error::Domain("snapshot lacks split tables for a split variable".into())
                })?
            }
        };
        table
            .get(h)
            .and_then(|row| row.get(j))
            .and_then(|cell| cell.as_deref())
            .ok_or_else(|| Error::Domain(format!("snapshot has no table row for class {h}, variable {j}")))
    }
}
