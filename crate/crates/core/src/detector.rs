//! Multi-filter orchestration.
//!
//! Each correlation template compiles and fits independently (in parallel);
//! the detector then OR-combines per-filter flags and averages scores over
//! the filters that actually scored each record, since a filter's transforms
//! may exclude records. Records scored by no filter get score 0, flag 0, and
//! appear in an `unscored` diagnostic.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::dataset::Dataset;
use crate::em::{self, EMSettings, FilterFit};
use crate::error::{Error, Result};
use crate::templates::{self, CorrelationTemplate};

/// One fitted filter with the bookkeeping needed to map design rows back to
/// record ids.
#[derive(Debug, Clone)]
pub struct FilterOutcome {
    pub name: String,
    pub fit: FilterFit,
    /// Record id of each design row, strictly increasing.
    pub row_ids: Vec<usize>,
    /// Record ids the template's transforms excluded.
    pub excluded: Vec<usize>,
}

impl FilterOutcome {
    /// Score and flag of a given record under this filter, if scored.
    pub fn lookup(&self, record_id: usize) -> Option<(f64, bool)> {
        self.row_ids
            .binary_search(&record_id)
            .ok()
            .map(|row| (self.fit.t[row], self.fit.flags[row]))
    }
}

/// Combined detection output over one dataset.
#[derive(Debug, Clone)]
pub struct DetectionReport {
    /// Record count of the input dataset.
    pub n: usize,
    pub per_filter: Vec<FilterOutcome>,
    /// OR of the per-filter flags.
    pub combined_flags: Vec<bool>,
    /// Mean score over the filters that scored each record; 0 when none did.
    pub combined_scores: Vec<f64>,
    /// Number of filters that scored each record.
    pub coverage: Vec<usize>,
    /// Records scored by zero filters.
    pub unscored: Vec<usize>,
}

/// Compile and fit every template, then combine.
///
/// Any compilation error aborts with the offending template's name. Filter
/// fits are independent, so the per-filter results are identical to running
/// each template alone.
pub fn detect(
    dataset: &Dataset,
    templates_list: &[CorrelationTemplate],
    settings: &EMSettings,
) -> Result<DetectionReport> {
    if templates_list.is_empty() {
        return Err(Error::EmptyInput { what: "templates" });
    }

    let in_filter = |name: &str| {
        let name = name.to_string();
        move |e: Error| Error::InFilter {
            name: name.clone(),
            source: Box::new(e),
        }
    };

    let compiled: Vec<_> = templates_list
        .iter()
        .enumerate()
        .map(|(i, tpl)| {
            let name = tpl.effective_name(i);
            templates::compile(tpl, dataset)
                .map(|(design, excluded)| (name.clone(), design, excluded))
                .map_err(in_filter(&name))
        })
        .collect::<Result<_>>()?;

    let outcomes: Vec<FilterOutcome> = compiled
        .into_par_iter()
        .map(|(name, design, excluded)| {
            let fit = em::fit(&design, settings).map_err(in_filter(&name))?;
            Ok(FilterOutcome {
                name,
                fit,
                row_ids: design.row_ids().to_vec(),
                excluded,
            })
        })
        .collect::<Result<_>>()?;

    Ok(combine(dataset.len(), outcomes))
}

/// Deterministic sequential reduction of per-filter results.
pub fn combine(n: usize, per_filter: Vec<FilterOutcome>) -> DetectionReport {
    let mut sum = vec![0.0f64; n];
    let mut coverage = vec![0usize; n];
    let mut combined_flags = vec![false; n];

    for outcome in &per_filter {
        for (row, &id) in outcome.row_ids.iter().enumerate() {
            sum[id] += outcome.fit.t[row];
            coverage[id] += 1;
            combined_flags[id] |= outcome.fit.flags[row];
        }
    }

    let combined_scores: Vec<f64> = sum
        .iter()
        .zip(&coverage)
        .map(|(s, &c)| if c > 0 { s / c as f64 } else { 0.0 })
        .collect();
    let unscored: Vec<usize> = coverage
        .iter()
        .enumerate()
        .filter(|(_, &c)| c == 0)
        .map(|(id, _)| id)
        .collect();

    DetectionReport {
        n,
        per_filter,
        combined_flags,
        combined_scores,
        coverage,
        unscored,
    }
}

impl DetectionReport {
    /// Labeled-dataset CSV: `id, combined_score, combined_flag`, then one
    /// `<filter>_t, <filter>_flag` pair per filter in template order. Cells
    /// of records a filter did not score are empty.
    pub fn export(&self, path: &Path) -> Result<()> {
        let err = |source: csv::Error| Error::Csv {
            path: path.to_path_buf(),
            source,
        };
        let mut w = csv::Writer::from_path(path).map_err(err)?;
        let mut header = vec![
            "id".to_string(),
            "combined_score".to_string(),
            "combined_flag".to_string(),
        ];
        for outcome in &self.per_filter {
            header.push(format!("{}_t", outcome.name));
            header.push(format!("{}_flag", outcome.name));
        }
        w.write_record(&header).map_err(err)?;

        for id in 0..self.n {
            let mut row = vec![
                id.to_string(),
                self.combined_scores[id].to_string(),
                u8::from(self.combined_flags[id]).to_string(),
            ];
            for outcome in &self.per_filter {
                match outcome.lookup(id) {
                    Some((t, flag)) => {
                        row.push(t.to_string());
                        row.push(u8::from(flag).to_string());
                    }
                    None => {
                        row.push(String::new());
                        row.push(String::new());
                    }
                }
            }
            w.write_record(&row).map_err(err)?;
        }
        w.flush().map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Ok(())
    }

    /// Count of records flagged by both filters, for every filter pair.
    pub fn overlap_matrix(&self) -> Vec<Vec<usize>> {
        let c = self.per_filter.len();
        let mut m = vec![vec![0usize; c]; c];
        for id in 0..self.n {
            let flagged: Vec<bool> = self
                .per_filter
                .iter()
                .map(|o| o.lookup(id).is_some_and(|(_, f)| f))
                .collect();
            for (i, row) in m.iter_mut().enumerate() {
                if !flagged[i] {
                    continue;
                }
                for (j, cell) in row.iter_mut().enumerate() {
                    if flagged[j] {
                        *cell += 1;
                    }
                }
            }
        }
        m
    }

    pub fn summary(&self) -> DetectionSummary {
        DetectionSummary {
            records: self.n,
            combined_outliers: self.combined_flags.iter().filter(|f| **f).count(),
            unscored: self.unscored.len(),
            filters: self
                .per_filter
                .iter()
                .map(|o| FilterSummary {
                    name: o.name.clone(),
                    p: o.fit.params.p,
                    k: o.fit.k,
                    iterations: o.fit.iterations,
                    converged: o.fit.converged,
                    scored: o.row_ids.len(),
                    excluded: o.excluded.len(),
                })
                .collect(),
            overlap: self.overlap_matrix(),
        }
    }

    /// Write the JSON summary (per-filter p, K, iterations, overlap matrix).
    pub fn write_summary(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(&self.summary()).expect("summary serializes");
        let mut f = std::fs::File::create(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        writeln!(f, "{json}").map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FilterSummary {
    pub name: String,
    pub p: f64,
    pub k: usize,
    pub iterations: usize,
    pub converged: bool,
    pub scored: usize,
    pub excluded: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct DetectionSummary {
    pub records: usize,
    pub combined_outliers: usize,
    pub unscored: usize,
    pub filters: Vec<FilterSummary>,
    pub overlap: Vec<Vec<usize>>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::em::FilterParams;
    use crate::templates::TemplateEntry;

    fn outcome(name: &str, row_ids: Vec<usize>, t: Vec<f64>, flags: Vec<bool>) -> FilterOutcome {
        let k = flags.iter().filter(|f| **f).count();
        FilterOutcome {
            name: name.to_string(),
            fit: FilterFit {
                params: FilterParams {
                    w: vec![1.0],
                    sigma2: 1.0,
                    p: 0.1,
                    b: 1.0,
                },
                t,
                k,
                flags,
                iterations: 1,
                converged: true,
            },
            row_ids,
            excluded: Vec::new(),
        }
    }

    #[test]
    fn combined_flags_are_set_union() {
        let a = outcome(
            "a",
            (0..10).collect(),
            vec![0.1; 10],
            (0..10).map(|i| i == 2 || i == 7).collect(),
        );
        let b = outcome(
            "b",
            (0..10).collect(),
            vec![0.1; 10],
            (0..10).map(|i| i == 7 || i == 9).collect(),
        );
        let report = combine(10, vec![a, b]);
        let flagged: Vec<usize> = (0..10).filter(|&i| report.combined_flags[i]).collect();
        assert_eq!(flagged, vec![2, 7, 9]);
    }

    #[test]
    fn coverage_aware_mean_skips_excluding_filters() {
        // Filter a excludes record 0; filter b scores it 0.9.
        let a = outcome("a", vec![1, 2], vec![0.2, 0.2], vec![false, false]);
        let b = outcome(
            "b",
            vec![0, 1, 2],
            vec![0.9, 0.6, 0.2],
            vec![true, false, false],
        );
        let report = combine(3, vec![a, b]);
        assert_eq!(report.combined_scores[0], 0.9);
        assert_eq!(report.coverage[0], 1);
        assert!((report.combined_scores[1] - 0.4).abs() < 1e-15); // mean(0.2, 0.6)
        assert!(report.unscored.is_empty());
    }

    #[test]
    fn unscored_records_get_zero_and_are_listed() {
        let a = outcome("a", vec![0, 1], vec![0.5, 0.5], vec![true, false]);
        let report = combine(3, vec![a]);
        assert_eq!(report.combined_scores[2], 0.0);
        assert!(!report.combined_flags[2]);
        assert_eq!(report.unscored, vec![2]);
    }

    #[test]
    fn adding_a_filter_never_unsets_a_flag() {
        let a = outcome(
            "a",
            vec![0, 1, 2],
            vec![0.9, 0.1, 0.1],
            vec![true, false, false],
        );
        let b = outcome(
            "b",
            vec![0, 1, 2],
            vec![0.1, 0.8, 0.1],
            vec![false, true, false],
        );
        let one = combine(3, vec![a.clone()]);
        let two = combine(3, vec![a, b]);
        for i in 0..3 {
            assert!(!one.combined_flags[i] || two.combined_flags[i]);
        }
    }

    #[test]
    fn overlap_matrix_counts_joint_flags() {
        let a = outcome(
            "a",
            vec![0, 1, 2, 3],
            vec![0.0; 4],
            vec![true, true, false, false],
        );
        let b = outcome(
            "b",
            vec![0, 1, 2, 3],
            vec![0.0; 4],
            vec![true, false, true, false],
        );
        let report = combine(4, vec![a, b]);
        let m = report.overlap_matrix();
        assert_eq!(m[0][0], 2);
        assert_eq!(m[1][1], 2);
        assert_eq!(m[0][1], 1);
        assert_eq!(m[1][0], 1);
    }

    #[test]
    fn per_filter_fits_match_standalone_runs() {
        // Deterministic synthetic data: two independent linear relations.
        let rows: Vec<Vec<f64>> = (0..200)
            .map(|i| {
                let x = i as f64 * 0.05;
                let wiggle = ((i * 7919) % 101) as f64 / 101.0 - 0.5;
                vec![x, 2.0 * x + 1.0 + 0.1 * wiggle, 5.0 - x + 0.1 * wiggle]
            })
            .collect();
        let ds = Dataset::from_rows(
            vec!["x".to_string(), "u".to_string(), "v".to_string()],
            rows,
        )
        .unwrap();
        let t1 = CorrelationTemplate::new(
            TemplateEntry::identity("u"),
            vec![TemplateEntry::identity("x")],
        );
        let t2 = CorrelationTemplate::new(
            TemplateEntry::identity("v"),
            vec![TemplateEntry::identity("x")],
        );
        let settings = EMSettings::default();
        let report = detect(&ds, &[t1.clone(), t2.clone()], &settings).unwrap();

        let (d1, _) = templates::compile(&t1, &ds).unwrap();
        let alone = em::fit(&d1, &settings).unwrap();
        assert_eq!(report.per_filter[0].fit, alone);
        assert_eq!(report.per_filter[0].name, "filter1");
        assert_eq!(report.per_filter.len(), 2);
    }

    #[test]
    fn empty_template_list_rejected() {
        let ds = Dataset::from_rows(vec!["a".to_string()], vec![vec![1.0]]).unwrap();
        assert!(matches!(
            detect(&ds, &[], &EMSettings::default()),
            Err(Error::EmptyInput { .. })
        ));
    }

    #[test]
    fn export_column_arithmetic_and_determinism() {
        let a = outcome(
            "a",
            vec![0, 1, 2],
            vec![0.5, 0.4, 0.3],
            vec![true, false, false],
        );
        let b = outcome("b", vec![1, 2], vec![0.2, 0.1], vec![false, false]);
        let report = combine(3, vec![a, b]);
        let dir = tempfile::tempdir().unwrap();
        let p1 = dir.path().join("r1.csv");
        let p2 = dir.path().join("r2.csv");
        report.export(&p1).unwrap();
        report.export(&p2).unwrap();
        let c1 = std::fs::read(&p1).unwrap();
        assert_eq!(c1, std::fs::read(&p2).unwrap());
        let text = String::from_utf8(c1).unwrap();
        let header = text.lines().next().unwrap();
        assert_eq!(header.split(',').count(), 1 + 2 + 2 * 2);
        // record 0 not scored by filter b: trailing empty cells
        let row0 = text.lines().nth(1).unwrap();
        assert!(row0.ends_with(",,"));
    }
}
