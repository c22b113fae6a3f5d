//! Panel/refreshment data model: variable schema, missingness semantics,
//! and validation.
//!
//! A dataset concatenates a two-wave panel (which observes the attrition
//! indicator `w`) with a refreshment sample drawn at wave 2 (which never
//! observes `w` or the wave-1 block). Structural missingness follows from
//! `(origin, w)` by rule and is never stored as flags, so it cannot
//! desynchronize from the data.
//!
//! Levels are 1-based in all serialized forms, matching the survey coding
//! convention; in memory they are 0-based indices.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which block a variable belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VarRole {
    /// Time-invariant, collected in both samples.
    X,
    /// Wave-1 outcome, collected only in the panel.
    Y1,
    /// Wave-2 outcome, collected from non-attriters and the refreshment
    /// sample.
    Y2,
}

/// One categorical variable: name, block role, and number of levels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariableSchema {
    pub name: String,
    pub role: VarRole,
    pub levels: usize,
}

/// Ordered variable list: the X block, then Y1, then Y2.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schema {
    vars: Vec<VariableSchema>,
    q0: usize,
    q1: usize,
    q2: usize,
}

impl Schema {
    pub fn new(vars: Vec<VariableSchema>) -> Result<Self> {
        if vars.is_empty() {
            return Err(Error::InvalidSchema("no variables".into()));
        }
        let mut q = [0usize; 3];
        let mut stage = 0usize;
        for v in &vars {
            if v.levels < 2 {
                return Err(Error::InvalidSchema(format!(
                    "variable {} has {} levels; need at least 2",
                    v.name, v.levels
                )));
            }
            if v.levels > u8::MAX as usize + 1 {
                return Err(Error::InvalidSchema(format!(
                    "variable {} has too many levels",
                    v.name
                )));
            }
            let s = match v.role {
                VarRole::X => 0,
                VarRole::Y1 => 1,
                VarRole::Y2 => 2,
            };
            if s < stage {
                return Err(Error::InvalidSchema(
                    "variables must be ordered X block, then Y1, then Y2".into(),
                ));
            }
            stage = s;
            q[s] += 1;
        }
        let mut seen = std::collections::HashSet::new();
        for v in &vars {
            if !seen.insert(v.name.as_str()) {
                return Err(Error::InvalidSchema(format!(
                    "duplicate variable name {}",
                    v.name
                )));
            }
            if v.name.starts_with('_') {
                return Err(Error::InvalidSchema(format!(
                    "variable name {} collides with reserved columns",
                    v.name
                )));
            }
        }
        Ok(Self {
            vars,
            q0: q[0],
            q1: q[1],
            q2: q[2],
        })
    }

    pub fn vars(&self) -> &[VariableSchema] {
        &self.vars
    }

    pub fn q(&self) -> usize {
        self.vars.len()
    }

    pub fn q0(&self) -> usize {
        self.q0
    }

    pub fn q1(&self) -> usize {
        self.q1
    }

    pub fn q2(&self) -> usize {
        self.q2
    }

    pub fn var(&self, j: usize) -> &VariableSchema {
        &self.vars[j]
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.vars
            .iter()
            .position(|v| v.name == name)
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    /// Variable indices with a given role.
    pub fn indices(&self, role: VarRole) -> impl Iterator<Item = usize> + '_ {
        self.vars
            .iter()
            .enumerate()
            .filter(move |(_, v)| v.role == role)
            .map(|(j, _)| j)
    }

    /// Matched (Y1, Y2) variable pairs, in block order. Meaningful when the
    /// two waves collect the same instruments (q1 == q2).
    pub fn wave_pairs(&self) -> Vec<(usize, usize)> {
        if self.q1 != self.q2 {
            return Vec::new();
        }
        self.indices(VarRole::Y1)
            .zip(self.indices(VarRole::Y2).collect::<Vec<_>>())
            .collect()
    }

    /// Per-variable offsets into a flat level-indexed row, plus the total
    /// stride (sum of level counts).
    pub fn level_layout(&self) -> (Vec<usize>, usize) {
        let mut offsets = Vec::with_capacity(self.q());
        let mut acc = 0usize;
        for v in &self.vars {
            offsets.push(acc);
            acc += v.levels;
        }
        (offsets, acc)
    }
}

/// Sample a row came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Origin {
    Panel,
    Refresh,
}

/// Whether a dataset carries collection-time missingness or has been
/// completed by a model (every cell and every `w` filled).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetKind {
    Collected,
    Completed,
}

/// One input row for [`PanelDataset::concatenate`]. Cells are 0-based level
/// indices or `None` for missing.
#[derive(Debug, Clone, Default)]
pub struct RowRecord {
    pub cells: Vec<Option<u8>>,
    pub w: Option<bool>,
    pub weight: Option<f64>,
}

/// Concatenated panel + refreshment dataset.
///
/// Immutable after construction; shared freely across samplers and
/// replications.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelDataset {
    kind: DatasetKind,
    schema: Schema,
    origin: Vec<Origin>,
    cells: Vec<Option<u8>>,
    w: Vec<Option<bool>>,
    weights: Option<Vec<f64>>,
    n_panel: usize,
    n_refresh: usize,
}

/// A single invariant violation located at (row, column).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationError {
    pub row: usize,
    pub column: String,
    pub violation: Violation,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    /// Cell level outside {1..d_j} (reported 1-based).
    SchemaMismatch { found: usize, levels: usize },
    /// Refreshment row carries a wave-1 value.
    RefreshY1Present,
    /// Refreshment row carries an attrition indicator.
    RefreshWPresent,
    /// Panel attriter carries a wave-2 value.
    AttriterY2Present,
    /// Panel row without an attrition indicator.
    PanelWMissing,
    /// Non-positive or non-finite survey weight.
    BadWeight,
}

/// Item-missing cell counts for one variable, split by sample of origin.
/// Structural missingness is excluded by rule.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ItemMissingCounts {
    pub name: String,
    pub role: VarRole,
    pub panel: usize,
    pub refresh: usize,
}

/// Outcome of [`PanelDataset::validate`].
#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub errors: Vec<ValidationError>,
    pub item_missing: Vec<ItemMissingCounts>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.errors.is_empty()
    }

    /// Ok when clean, otherwise the first violation as an error.
    pub fn into_result(self) -> Result<()> {
        match self.errors.into_iter().next() {
            None => Ok(()),
            Some(e) => {
                let detail = format!("{:?}", e.violation);
                Err(match e.violation {
                    Violation::SchemaMismatch { .. } => Error::SchemaMismatch {
                        row: e.row,
                        column: e.column,
                        detail,
                    },
                    _ => Error::StructuralViolation {
                        row: e.row,
                        column: e.column,
                        detail,
                    },
                })
            }
        }
    }
}

impl PanelDataset {
    /// Build a collected dataset from panel rows followed by refreshment
    /// rows. Panel rows must carry `w`; refreshment rows must carry neither
    /// `w` nor Y1 values. Stray values are errors, not silently masked.
    pub fn concatenate(
        panel_rows: Vec<RowRecord>,
        refresh_rows: Vec<RowRecord>,
        schema: Schema,
    ) -> Result<Self> {
        let n_panel = panel_rows.len();
        let origins: Vec<Origin> = std::iter::repeat_n(Origin::Panel, n_panel)
            .chain(std::iter::repeat_n(Origin::Refresh, refresh_rows.len()))
            .collect();
        let rows: Vec<RowRecord> = panel_rows.into_iter().chain(refresh_rows).collect();
        Self::from_rows(schema, origins, rows, DatasetKind::Collected)
    }

    /// General constructor. `Collected` enforces the structural rules;
    /// `Completed` requires every cell and every `w` to be present.
    pub fn from_rows(
        schema: Schema,
        origins: Vec<Origin>,
        rows: Vec<RowRecord>,
        kind: DatasetKind,
    ) -> Result<Self> {
        if origins.len() != rows.len() {
            return Err(Error::LengthMismatch(format!(
                "{} origins vs {} rows",
                origins.len(),
                rows.len()
            )));
        }
        let q = schema.q();
        let n = rows.len();
        let mut cells = Vec::with_capacity(n * q);
        let mut w = Vec::with_capacity(n);
        let mut weights: Option<Vec<f64>> = None;
        let mut n_panel = 0usize;
        let mut n_refresh = 0usize;

        for (i, row) in rows.iter().enumerate() {
            if row.cells.len() != q {
                return Err(Error::LengthMismatch(format!(
                    "row {i} has {} cells; schema has {q}",
                    row.cells.len()
                )));
            }
            match origins[i] {
                Origin::Panel => n_panel += 1,
                Origin::Refresh => n_refresh += 1,
            }
            for (j, &cell) in row.cells.iter().enumerate() {
                let v = schema.var(j);
                if let Some(level) = cell {
                    if level as usize >= v.levels {
                        return Err(Error::SchemaMismatch {
                            row: i,
                            column: v.name.clone(),
                            detail: format!(
                                "level {} out of 1..={}",
                                level as usize + 1,
                                v.levels
                            ),
                        });
                    }
                }
                if kind == DatasetKind::Collected {
                    check_structural(i, origins[i], row.w, v, cell)?;
                } else if cell.is_none() {
                    return Err(Error::SchemaMismatch {
                        row: i,
                        column: v.name.clone(),
                        detail: "completed dataset has a missing cell".into(),
                    });
                }
                cells.push(cell);
            }
            match (kind, origins[i], row.w) {
                (DatasetKind::Collected, Origin::Panel, None) => {
                    return Err(Error::StructuralViolation {
                        row: i,
                        column: "_w".into(),
                        detail: "panel row without attrition indicator".into(),
                    });
                }
                (DatasetKind::Collected, Origin::Refresh, Some(_)) => {
                    return Err(Error::StructuralViolation {
                        row: i,
                        column: "_w".into(),
                        detail: "refreshment row with attrition indicator".into(),
                    });
                }
                (DatasetKind::Completed, _, None) => {
                    return Err(Error::StructuralViolation {
                        row: i,
                        column: "_w".into(),
                        detail: "completed dataset with missing attrition indicator".into(),
                    });
                }
                _ => {}
            }
            w.push(row.w);
            if let Some(wt) = row.weight {
                if !(wt > 0.0) || !wt.is_finite() {
                    return Err(Error::Domain(format!("row {i}: weight {wt} must be > 0")));
                }
                weights.get_or_insert_with(|| vec![1.0; n])[i] = wt;
            }
        }

        Ok(Self {
            kind,
            schema,
            origin: origins,
            cells,
            w,
            weights,
            n_panel,
            n_refresh,
        })
    }

    pub fn kind(&self) -> DatasetKind {
        self.kind
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn n(&self) -> usize {
        self.origin.len()
    }

    pub fn n_panel(&self) -> usize {
        self.n_panel
    }

    pub fn n_refresh(&self) -> usize {
        self.n_refresh
    }

    /// Panel rows with w = 1.
    pub fn n_completers(&self) -> usize {
        self.origin
            .iter()
            .zip(&self.w)
            .filter(|(o, w)| **o == Origin::Panel && **w == Some(true))
            .count()
    }

    /// Panel rows with w = 0.
    pub fn n_attriters(&self) -> usize {
        self.origin
            .iter()
            .zip(&self.w)
            .filter(|(o, w)| **o == Origin::Panel && **w == Some(false))
            .count()
    }

    pub fn origin(&self, i: usize) -> Origin {
        self.origin[i]
    }

    pub fn w(&self, i: usize) -> Option<bool> {
        self.w[i]
    }

    /// 0-based level of cell (i, j), or `None` if missing.
    pub fn cell(&self, i: usize, j: usize) -> Option<u8> {
        self.cells[i * self.schema.q() + j]
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights.as_ref().map_or(1.0, |w| w[i])
    }

    pub fn has_weights(&self) -> bool {
        self.weights.is_some()
    }

    /// Whether cell (i, j) is missing by design rather than by nonresponse.
    pub fn is_structural_missing(&self, i: usize, j: usize) -> bool {
        if self.kind == DatasetKind::Completed {
            return false;
        }
        match (self.origin[i], self.schema.var(j).role) {
            (Origin::Refresh, VarRole::Y1) => true,
            (Origin::Panel, VarRole::Y2) => self.w[i] == Some(false),
            _ => false,
        }
    }

    /// Locations of all missing cells, row-major.
    pub fn missing_cells(&self) -> Vec<(usize, usize)> {
        let q = self.schema.q();
        let mut out = Vec::new();
        for i in 0..self.n() {
            for j in 0..q {
                if self.cells[i * q + j].is_none() {
                    out.push((i, j));
                }
            }
        }
        out
    }

    /// Indices of refreshment rows (the rows whose `w` the model imputes).
    pub fn refresh_rows(&self) -> Vec<usize> {
        (0..self.n())
            .filter(|&i| self.origin[i] == Origin::Refresh)
            .collect()
    }

    pub fn is_fully_observed(&self) -> bool {
        self.cells.iter().all(|c| c.is_some()) && self.w.iter().all(|w| w.is_some())
    }

    /// Report every invariant violation plus item-nonresponse counts
    /// (structural missingness excluded).
    pub fn validate(&self) -> ValidationReport {
        let mut errors = Vec::new();
        let mut item_missing: Vec<ItemMissingCounts> = self
            .schema
            .vars()
            .iter()
            .map(|v| ItemMissingCounts {
                name: v.name.clone(),
                role: v.role,
                panel: 0,
                refresh: 0,
            })
            .collect();

        let q = self.schema.q();
        for i in 0..self.n() {
            let origin = self.origin[i];
            let w = self.w[i];
            if self.kind == DatasetKind::Collected {
                match (origin, w) {
                    (Origin::Panel, None) => errors.push(ValidationError {
                        row: i,
                        column: "_w".into(),
                        violation: Violation::PanelWMissing,
                    }),
                    (Origin::Refresh, Some(_)) => errors.push(ValidationError {
                        row: i,
                        column: "_w".into(),
                        violation: Violation::RefreshWPresent,
                    }),
                    _ => {}
                }
            }
            if let Some(ws) = &self.weights {
                if !(ws[i] > 0.0) || !ws[i].is_finite() {
                    errors.push(ValidationError {
                        row: i,
                        column: "_weight".into(),
                        violation: Violation::BadWeight,
                    });
                }
            }
            for j in 0..q {
                let v = self.schema.var(j);
                match self.cells[i * q + j] {
                    Some(level) => {
                        if level as usize >= v.levels {
                            errors.push(ValidationError {
                                row: i,
                                column: v.name.clone(),
                                violation: Violation::SchemaMismatch {
                                    found: level as usize + 1,
                                    levels: v.levels,
                                },
                            });
                        }
                        if self.kind == DatasetKind::Collected {
                            match (origin, v.role, w) {
                                (Origin::Refresh, VarRole::Y1, _) => {
                                    errors.push(ValidationError {
                                        row: i,
                                        column: v.name.clone(),
                                        violation: Violation::RefreshY1Present,
                                    });
                                }
                                (Origin::Panel, VarRole::Y2, Some(false)) => {
                                    errors.push(ValidationError {
                                        row: i,
                                        column: v.name.clone(),
                                        violation: Violation::AttriterY2Present,
                                    });
                                }
                                _ => {}
                            }
                        }
                    }
                    None => {
                        if !self.is_structural_missing(i, j) {
                            match origin {
                                Origin::Panel => item_missing[j].panel += 1,
                                Origin::Refresh => item_missing[j].refresh += 1,
                            }
                        }
                    }
                }
            }
        }

        ValidationReport {
            errors,
            item_missing,
        }
    }

    /// Build a completed dataset sharing this dataset's schema, origins, and
    /// weights, with cells and attrition indicators supplied as flat arrays.
    pub fn with_completed(&self, z: &[u8], w: &[bool]) -> Result<Self> {
        let q = self.schema.q();
        if z.len() != self.n() * q || w.len() != self.n() {
            return Err(Error::LengthMismatch(format!(
                "completed arrays: z {} (need {}), w {} (need {})",
                z.len(),
                self.n() * q,
                w.len(),
                self.n()
            )));
        }
        for i in 0..self.n() {
            for j in 0..q {
                if z[i * q + j] as usize >= self.schema.var(j).levels {
                    return Err(Error::SchemaMismatch {
                        row: i,
                        column: self.schema.var(j).name.clone(),
                        detail: "completed level out of range".into(),
                    });
                }
            }
        }
        Ok(Self {
            kind: DatasetKind::Completed,
            schema: self.schema.clone(),
            origin: self.origin.clone(),
            cells: z.iter().map(|&c| Some(c)).collect(),
            w: w.iter().map(|&b| Some(b)).collect(),
            weights: self.weights.clone(),
            n_panel: self.n_panel,
            n_refresh: self.n_refresh,
        })
    }
}

fn check_structural(
    i: usize,
    origin: Origin,
    w: Option<bool>,
    var: &VariableSchema,
    cell: Option<u8>,
) -> Result<()> {
    if cell.is_none() {
        return Ok(());
    }
    match (origin, var.role) {
        (Origin::Refresh, VarRole::Y1) => Err(Error::StructuralViolation {
            row: i,
            column: var.name.clone(),
            detail: "refreshment row with a wave-1 value".into(),
        }),
        (Origin::Panel, VarRole::Y2) if w == Some(false) => Err(Error::StructuralViolation {
            row: i,
            column: var.name.clone(),
            detail: "panel attriter with a wave-2 value".into(),
        }),
        _ => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn y1y2_schema() -> Schema {
        Schema::new(vec![
            VariableSchema {
                name: "y1_1".into(),
                role: VarRole::Y1,
                levels: 2,
            },
            VariableSchema {
                name: "y2_1".into(),
                role: VarRole::Y2,
                levels: 2,
            },
        ])
        .unwrap()
    }

    fn row(cells: Vec<Option<u8>>, w: Option<bool>) -> RowRecord {
        RowRecord {
            cells,
            w,
            weight: None,
        }
    }

    #[test]
    fn concatenate_minimal() {
        let ds = PanelDataset::concatenate(
            vec![
                row(vec![Some(0), Some(1)], Some(true)),
                row(vec![Some(1), None], Some(false)),
            ],
            vec![row(vec![None, Some(0)], None)],
            y1y2_schema(),
        )
        .unwrap();
        assert_eq!(ds.n(), 3);
        assert_eq!(ds.n_panel(), 2);
        assert_eq!(ds.n_refresh(), 1);
        assert_eq!(ds.n_completers(), 1);
        assert_eq!(ds.n_attriters(), 1);
        assert_eq!(ds.n_completers() + ds.n_attriters(), ds.n_panel());
        assert_eq!(ds.cell(2, 0), None);
        assert_eq!(ds.w(2), None);
        assert!(ds.is_structural_missing(1, 1));
        assert!(ds.is_structural_missing(2, 0));
        assert!(ds.validate().is_clean());
    }

    #[test]
    fn concatenate_rejects_attriter_y2() {
        let err = PanelDataset::concatenate(
            vec![row(vec![Some(0), Some(1)], Some(false))],
            vec![],
            y1y2_schema(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::StructuralViolation { .. }));
    }

    #[test]
    fn concatenate_rejects_refresh_y1() {
        let err = PanelDataset::concatenate(
            vec![],
            vec![row(vec![Some(0), Some(0)], None)],
            y1y2_schema(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::StructuralViolation { .. }));
    }

    #[test]
    fn concatenate_rejects_out_of_range_level() {
        let err = PanelDataset::concatenate(
            vec![row(vec![Some(2), Some(0)], Some(true))],
            vec![],
            y1y2_schema(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::SchemaMismatch { .. }));
    }

    #[test]
    fn schema_requires_block_order() {
        let err = Schema::new(vec![
            VariableSchema {
                name: "a".into(),
                role: VarRole::Y2,
                levels: 2,
            },
            VariableSchema {
                name: "b".into(),
                role: VarRole::X,
                levels: 2,
            },
        ])
        .unwrap_err();
        assert!(matches!(err, Error::InvalidSchema(_)));
    }

    #[test]
    fn validate_reports_planted_violation() {
        // Build a valid dataset, then corrupt one cell from within.
        let mut ds = PanelDataset::concatenate(
            vec![row(vec![Some(0), Some(1)], Some(true))],
            vec![row(vec![None, Some(0)], None)],
            y1y2_schema(),
        )
        .unwrap();
        ds.cells[1] = Some(5);
        let report = ds.validate();
        assert_eq!(report.errors.len(), 1);
        assert_eq!(report.errors[0].column, "y2_1");
        assert!(matches!(
            report.errors[0].violation,
            Violation::SchemaMismatch {
                found: 6,
                levels: 2
            }
        ));
    }

    #[test]
    fn item_missing_excludes_structural() {
        // Panel completer with item-missing Y2; attriter Y2 structural;
        // refresh Y1 structural, refresh Y2 item-missing.
        let ds = PanelDataset::concatenate(
            vec![
                row(vec![Some(0), None], Some(true)),
                row(vec![Some(0), None], Some(false)),
            ],
            vec![row(vec![None, None], None)],
            y1y2_schema(),
        )
        .unwrap();
        let report = ds.validate();
        assert!(report.is_clean());
        let y1 = &report.item_missing[0];
        let y2 = &report.item_missing[1];
        assert_eq!((y1.panel, y1.refresh), (0, 0));
        assert_eq!((y2.panel, y2.refresh), (1, 1));
    }

    #[test]
    fn apyn_shaped_item_missing_split() {
        // Schema shaped like a two-wave favorability study: 8 background
        // variables, one wave-1 and one wave-2 outcome.
        let levels = [3usize, 3, 4, 3, 2, 2, 4, 2];
        let mut vars: Vec<VariableSchema> = levels
            .iter()
            .enumerate()
            .map(|(k, &d)| VariableSchema {
                name: format!("x{}", k + 1),
                role: VarRole::X,
                levels: d,
            })
            .collect();
        vars.push(VariableSchema {
            name: "fav_w1".into(),
            role: VarRole::Y1,
            levels: 2,
        });
        vars.push(VariableSchema {
            name: "fav_w2".into(),
            role: VarRole::Y2,
            levels: 2,
        });
        let schema = Schema::new(vars).unwrap();
        let q = schema.q();

        // Panel: 3 completers, 2 attriters. Refresh: 2 rows.
        // Plant item missingness: x1 missing in 2 panel rows and 1 refresh
        // row; fav_w1 missing in 1 panel row; fav_w2 missing in 1 completer
        // and 1 refresh row.
        let full = |_: usize| -> Vec<Option<u8>> { vec![Some(0); q] };
        let mut panel: Vec<RowRecord> = (0..5)
            .map(|i| row(full(i), Some(i < 3)))
            .collect();
        for r in panel.iter_mut().skip(3) {
            r.cells[q - 1] = None; // attriters: Y2 structurally missing
        }
        panel[0].cells[0] = None; // x1
        panel[3].cells[0] = None; // x1 (attriter, still item-missing for X)
        panel[1].cells[q - 2] = None; // fav_w1
        panel[2].cells[q - 1] = None; // fav_w2 on a completer
        let mut refresh: Vec<RowRecord> = (0..2).map(|i| row(full(i), None)).collect();
        for r in refresh.iter_mut() {
            r.cells[q - 2] = None; // Y1 structurally missing
        }
        refresh[0].cells[0] = None; // x1
        refresh[1].cells[q - 1] = None; // fav_w2

        let ds = PanelDataset::concatenate(panel, refresh, schema).unwrap();
        let report = ds.validate();
        assert!(report.is_clean());
        let by_name = |n: &str| {
            report
                .item_missing
                .iter()
                .find(|c| c.name == n)
                .unwrap()
                .clone()
        };
        // The wave-1 column of the nonresponse table is the panel count for
        // X and Y1 variables; the wave-2 column is the panel count for Y2;
        // the refreshment column is the refresh count.
        assert_eq!((by_name("x1").panel, by_name("x1").refresh), (2, 1));
        assert_eq!((by_name("fav_w1").panel, by_name("fav_w1").refresh), (1, 0));
        assert_eq!((by_name("fav_w2").panel, by_name("fav_w2").refresh), (1, 1));
    }

    #[test]
    fn completed_requires_everything_present() {
        let schema = y1y2_schema();
        let err = PanelDataset::from_rows(
            schema,
            vec![Origin::Panel],
            vec![row(vec![Some(0), None], Some(true))],
            DatasetKind::Completed,
        )
        .unwrap_err();
        assert!(matches!(err, Error::SchemaMismatch { .. }));
    }
}
