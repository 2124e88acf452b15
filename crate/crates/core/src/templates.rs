//! Correlation templates and design-matrix compilation.
//!
//! A template names one behavioral attribute (the regression target `y`) and
//! a list of contextual attributes (the features `x`), each with an optional
//! transform. Compiling a template against a dataset produces a dense design
//! matrix: one row per usable record, context expansions in declaration
//! order, intercept as a trailing all-ones column. Rows whose transform
//! fails (e.g. log of a nonpositive value) are excluded and their record ids
//! reported separately rather than clamped.

use serde::{Deserialize, Serialize};
use time::OffsetDateTime;

use crate::dataset::Dataset;
use crate::error::{Error, Result};

/// Epsilon used by the `log1p_epsilon` transform: log(v + 1e-6).
pub const LOG1P_EPSILON: f64 = 1e-6;

/// Per-attribute feature transform.
///
/// Multi-input transforms name their extra attributes here; the owning
/// entry's `attr` is the primary input (or, for `l2_distance`, a label).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Transform {
    #[default]
    Identity,
    /// Natural log; rows with nonpositive input are excluded.
    Log,
    /// log(v + 1e-6), for callers that must keep rows with zeros.
    Log1pEpsilon,
    /// Euclidean distance between (x1, y1) and (x2, y2), in the coordinate
    /// units given; no geodesic correction.
    L2Distance {
        x1: String,
        y1: String,
        x2: String,
        y2: String,
    },
    /// One-hot encoding of the time-of-day slot of a Unix-epoch-seconds
    /// timestamp (UTC calendar). Weekday slots come first, then weekend
    /// slots when `weekend_split` is set.
    TimeSlotOnehot {
        slot_width_hours: u32,
        weekend_split: bool,
    },
    /// Primary attribute minus `other`.
    Difference { other: String },
}

/// One (attribute, transform) pair of a template.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TemplateEntry {
    pub attr: String,
    #[serde(default)]
    pub transform: Transform,
}

impl TemplateEntry {
    pub fn identity(attr: &str) -> Self {
        Self {
            attr: attr.to_string(),
            transform: Transform::Identity,
        }
    }

    pub fn log(attr: &str) -> Self {
        Self {
            attr: attr.to_string(),
            transform: Transform::Log,
        }
    }
}

/// Context declaration: an explicit list, or `"rest"` for every attribute
/// other than the behavior, each with the identity transform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ContextSpec {
    Shorthand(String),
    List(Vec<TemplateEntry>),
}

/// A correlation template: behavior attribute, contextual attributes, and
/// whether to append an intercept column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrelationTemplate {
    #[serde(default)]
    pub name: Option<String>,
    pub behavior: TemplateEntry,
    pub context: ContextSpec,
    #[serde(default = "default_true")]
    pub intercept: bool,
}

fn default_true() -> bool {
    true
}

impl CorrelationTemplate {
    pub fn new(behavior: TemplateEntry, context: Vec<TemplateEntry>) -> Self {
        Self {
            name: None,
            behavior,
            context: ContextSpec::List(context),
            intercept: true,
        }
    }

    /// Template name used to key per-filter outputs; defaults to
    /// `filter<index+1>` when unnamed.
    pub fn effective_name(&self, index: usize) -> String {
        self.name
            .clone()
            .unwrap_or_else(|| format!("filter{}", index + 1))
    }
}

/// Parse a JSON array of templates. Unknown keys are errors.
pub fn parse_templates(json: &str) -> Result<Vec<CorrelationTemplate>> {
    serde_json::from_str(json).map_err(|e| Error::ConfigInvalid {
        reason: format!("template config: {e}"),
    })
}

/// Parse a single JSON template object.
pub fn parse_template(json: &str) -> Result<CorrelationTemplate> {
    serde_json::from_str(json).map_err(|e| Error::ConfigInvalid {
        reason: format!("template config: {e}"),
    })
}

/// Dense row-major design matrix with its target vector and the source
/// record id of every row.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    ncols: usize,
    data: Vec<f64>,
    y: Vec<f64>,
    row_ids: Vec<usize>,
}

impl DesignMatrix {
    /// Assemble a matrix directly from rows; used by tests and baselines.
    pub fn from_rows(rows: Vec<Vec<f64>>, y: Vec<f64>, row_ids: Vec<usize>) -> Result<Self> {
        if rows.len() != y.len() || rows.len() != row_ids.len() {
            return Err(Error::LengthMismatch {
                left: rows.len(),
                right: y.len().max(row_ids.len()),
            });
        }
        let ncols = rows.first().map(|r| r.len()).unwrap_or(0);
        let mut data = Vec::with_capacity(rows.len() * ncols);
        for row in &rows {
            if row.len() != ncols {
                return Err(Error::DimensionMismatch {
                    expected: ncols,
                    got: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Ok(Self {
            ncols,
            data,
            y,
            row_ids,
        })
    }

    pub fn nrows(&self) -> usize {
        self.y.len()
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.ncols..(i + 1) * self.ncols]
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn row_ids(&self) -> &[usize] {
        &self.row_ids
    }
}

// A transform bound to schema indices, ready to evaluate per record.
enum Resolved {
    Identity(usize),
    Log(usize),
    Log1pEpsilon(usize),
    L2 {
        x1: usize,
        y1: usize,
        x2: usize,
        y2: usize,
    },
    TimeSlot {
        idx: usize,
        slot_width: u32,
        weekend_split: bool,
        slots_per_day: u32,
    },
    Difference {
        idx: usize,
        other: usize,
    },
}

impl Resolved {
    fn width(&self) -> usize {
        match self {
            Resolved::TimeSlot {
                slots_per_day,
                weekend_split,
                ..
            } => (*slots_per_day as usize) * if *weekend_split { 2 } else { 1 },
            _ => 1,
        }
    }

    // Append this transform's columns for one record, or signal that the
    // record cannot be represented (caller excludes the row).
    fn apply(&self, values: &[f64], out: &mut Vec<f64>) -> std::result::Result<(), ()> {
        match self {
            Resolved::Identity(i) => out.push(values[*i]),
            Resolved::Log(i) => {
                let v = values[*i];
                if v <= 0.0 {
                    return Err(());
                }
                out.push(v.ln());
            }
            Resolved::Log1pEpsilon(i) => {
                let v = values[*i] + LOG1P_EPSILON;
                if v <= 0.0 {
                    return Err(());
                }
                out.push(v.ln());
            }
            Resolved::L2 { x1, y1, x2, y2 } => {
                let dx = values[*x1] - values[*x2];
                let dy = values[*y1] - values[*y2];
                out.push((dx * dx + dy * dy).sqrt());
            }
            Resolved::TimeSlot {
                idx,
                slot_width,
                weekend_split,
                slots_per_day,
            } => {
                let ts = values[*idx].floor();
                if ts.abs() >= 9.0e18 {
                    return Err(());
                }
                let dt = OffsetDateTime::from_unix_timestamp(ts as i64).map_err(|_| ())?;
                let slot = u32::from(dt.hour()) / slot_width;
                let weekend = matches!(
                    dt.weekday(),
                    time::Weekday::Saturday | time::Weekday::Sunday
                );
                let base = out.len();
                out.resize(base + self.width(), 0.0);
                let col = if *weekend_split && weekend {
                    slots_per_day + slot
                } else {
                    slot
                };
                out[base + col as usize] = 1.0;
            }
            Resolved::Difference { idx, other } => out.push(values[*idx] - values[*other]),
        }
        Ok(())
    }
}

fn resolve(entry: &TemplateEntry, dataset: &Dataset) -> Result<Resolved> {
    match &entry.transform {
        Transform::Identity => Ok(Resolved::Identity(dataset.attr_index(&entry.attr)?)),
        Transform::Log => Ok(Resolved::Log(dataset.attr_index(&entry.attr)?)),
        Transform::Log1pEpsilon => Ok(Resolved::Log1pEpsilon(dataset.attr_index(&entry.attr)?)),
        Transform::L2Distance { x1, y1, x2, y2 } => Ok(Resolved::L2 {
            x1: dataset.attr_index(x1)?,
            y1: dataset.attr_index(y1)?,
            x2: dataset.attr_index(x2)?,
            y2: dataset.attr_index(y2)?,
        }),
        Transform::TimeSlotOnehot {
            slot_width_hours,
            weekend_split,
        } => {
            if !(1..=24).contains(slot_width_hours) {
                return Err(Error::TemplateInvalid {
                    reason: format!("slot_width_hours {slot_width_hours} not in 1..=24"),
                });
            }
            Ok(Resolved::TimeSlot {
                idx: dataset.attr_index(&entry.attr)?,
                slot_width: *slot_width_hours,
                weekend_split: *weekend_split,
                slots_per_day: 24_u32.div_ceil(*slot_width_hours),
            })
        }
        Transform::Difference { other } => Ok(Resolved::Difference {
            idx: dataset.attr_index(&entry.attr)?,
            other: dataset.attr_index(other)?,
        }),
    }
}

/// Expand `"rest"` shorthand into explicit identity entries over every
/// attribute except the behavior.
pub fn resolve_context(
    template: &CorrelationTemplate,
    schema: &[String],
) -> Result<Vec<TemplateEntry>> {
    match &template.context {
        ContextSpec::List(entries) => Ok(entries.clone()),
        ContextSpec::Shorthand(s) if s == "rest" => Ok(schema
            .iter()
            .filter(|a| **a != template.behavior.attr)
            .map(|a| TemplateEntry::identity(a))
            .collect()),
        ContextSpec::Shorthand(s) => Err(Error::ConfigInvalid {
            reason: format!("unknown context shorthand {s:?} (expected \"rest\")"),
        }),
    }
}

fn validate(template: &CorrelationTemplate, context: &[TemplateEntry]) -> Result<()> {
    if context.is_empty() {
        return Err(Error::TemplateInvalid {
            reason: "context is empty; intercept alone is invalid".to_string(),
        });
    }
    if context.iter().any(|e| e.attr == template.behavior.attr) {
        return Err(Error::TemplateInvalid {
            reason: format!(
                "behavior attribute {:?} also appears in context",
                template.behavior.attr
            ),
        });
    }
    if matches!(
        template.behavior.transform,
        Transform::TimeSlotOnehot { .. }
    ) {
        return Err(Error::TemplateInvalid {
            reason: "behavior transform must produce a single column".to_string(),
        });
    }
    Ok(())
}

/// Compile a template against a dataset into a design matrix.
///
/// Every usable record contributes one row; excluded record ids are returned
/// alongside. Column order is context order with expansions in place and the
/// intercept last.
pub fn compile(
    template: &CorrelationTemplate,
    dataset: &Dataset,
) -> Result<(DesignMatrix, Vec<usize>)> {
    let context = resolve_context(template, dataset.schema())?;
    validate(template, &context)?;

    let behavior = resolve(&template.behavior, dataset)?;
    let resolved: Vec<Resolved> = context
        .iter()
        .map(|e| resolve(e, dataset))
        .collect::<Result<_>>()?;

    let d: usize =
        resolved.iter().map(Resolved::width).sum::<usize>() + usize::from(template.intercept);

    let n = dataset.len();
    let mut data = Vec::with_capacity(n * d);
    let mut y = Vec::with_capacity(n);
    let mut row_ids = Vec::with_capacity(n);
    let mut excluded = Vec::new();
    let mut row = Vec::with_capacity(d);
    let mut yv = Vec::with_capacity(1);

    for record in dataset.records() {
        row.clear();
        yv.clear();
        let ok = behavior.apply(&record.values, &mut yv).is_ok()
            && resolved
                .iter()
                .all(|t| t.apply(&record.values, &mut row).is_ok());
        if !ok {
            excluded.push(record.id);
            continue;
        }
        if template.intercept {
            row.push(1.0);
        }
        data.extend_from_slice(&row);
        y.push(yv[0]);
        row_ids.push(record.id);
    }

    if y.is_empty() {
        return Err(Error::AllRowsExcluded);
    }
    Ok((
        DesignMatrix {
            ncols: d,
            data,
            y,
            row_ids,
        },
        excluded,
    ))
}

fn entry_column_names(entry: &TemplateEntry) -> Result<Vec<String>> {
    Ok(match &entry.transform {
        Transform::Identity => vec![entry.attr.clone()],
        Transform::Log => vec![format!("log({})", entry.attr)],
        Transform::Log1pEpsilon => vec![format!("log1p({})", entry.attr)],
        Transform::L2Distance { .. } => vec![entry.attr.clone()],
        Transform::TimeSlotOnehot {
            slot_width_hours,
            weekend_split,
        } => {
            if !(1..=24).contains(slot_width_hours) {
                return Err(Error::TemplateInvalid {
                    reason: format!("slot_width_hours {slot_width_hours} not in 1..=24"),
                });
            }
            let spd = 24_u32.div_ceil(*slot_width_hours);
            let mut names = Vec::new();
            for s in 0..spd {
                names.push(format!("{}[slot{s}]", entry.attr));
            }
            if *weekend_split {
                for s in 0..spd {
                    names.push(format!("{}[slot{s},wknd]", entry.attr));
                }
            }
            names
        }
        Transform::Difference { other } => vec![format!("{}-{}", entry.attr, other)],
    })
}

/// Names of the design-matrix columns, in compilation order.
pub fn column_names(template: &CorrelationTemplate, schema: &[String]) -> Result<Vec<String>> {
    let context = resolve_context(template, schema)?;
    validate(template, &context)?;
    let mut names = Vec::new();
    for entry in &context {
        names.extend(entry_column_names(entry)?);
    }
    if template.intercept {
        names.push("intercept".to_string());
    }
    Ok(names)
}

/// Human-readable column listing in the stable compilation order.
pub fn describe(template: &CorrelationTemplate, schema: &[String]) -> Result<String> {
    let names = column_names(template, schema)?;
    let parts: Vec<String> = names
        .iter()
        .map(|n| {
            if n == "intercept" {
                n.clone()
            } else {
                format!("ctx:{n}")
            }
        })
        .collect();
    Ok(parts.join(", "))
}
