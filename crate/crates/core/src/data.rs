//! Observational datasets, CSV ingestion and fold bookkeeping.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng;

/// One data unit `(w, a, y)` plus optional prediction and oracle columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub w: Vec<f64>,
    /// Treatment indicator, 0 or 1.
    pub a: u8,
    pub y: f64,
    pub tau_hat: Option<f64>,
    pub tau_cal: Option<f64>,
    pub tau0: Option<f64>,
    pub pi0: Option<f64>,
    /// 1-based fold label.
    pub fold: Option<usize>,
}

impl Observation {
    pub fn new(w: Vec<f64>, a: u8, y: f64) -> Self {
        Observation {
            w,
            a,
            y,
            tau_hat: None,
            tau_cal: None,
            tau0: None,
            pi0: None,
            fold: None,
        }
    }

    pub fn treated(&self) -> bool {
        self.a == 1
    }
}

/// Optional per-row columns that ride along with the covariates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum OptionalColumn {
    TauHat,
    TauCal,
    Tau0,
    Pi0,
    Fold,
}

impl OptionalColumn {
    pub const ALL: [OptionalColumn; 5] = [
        OptionalColumn::TauHat,
        OptionalColumn::TauCal,
        OptionalColumn::Tau0,
        OptionalColumn::Pi0,
        OptionalColumn::Fold,
    ];

    pub fn name(self) -> &'static str {
        match self {
            OptionalColumn::TauHat => "tau_hat",
            OptionalColumn::TauCal => "tau_cal",
            OptionalColumn::Tau0 => "tau0",
            OptionalColumn::Pi0 => "pi0",
            OptionalColumn::Fold => "fold",
        }
    }

    fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == name)
    }

    fn is_set(self, obs: &Observation) -> bool {
        match self {
            OptionalColumn::TauHat => obs.tau_hat.is_some(),
            OptionalColumn::TauCal => obs.tau_cal.is_some(),
            OptionalColumn::Tau0 => obs.tau0.is_some(),
            OptionalColumn::Pi0 => obs.pi0.is_some(),
            OptionalColumn::Fold => obs.fold.is_some(),
        }
    }
}

/// A nonempty, immutable collection of observations sharing one covariate
/// dimension. Each optional column is either present on every row or on none.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    rows: Vec<Observation>,
    d: usize,
}

impl Dataset {
    pub fn new(rows: Vec<Observation>) -> Result<Self> {
        let first = rows.first().ok_or(Error::Empty("dataset"))?;
        let d = first.w.len();
        for (i, row) in rows.iter().enumerate() {
            if row.w.len() != d {
                return Err(Error::invalid(format!(
                    "row {}: expected {} covariates, found {}",
                    i + 1,
                    d,
                    row.w.len()
                )));
            }
            if row.a > 1 {
                return Err(Error::NonBinaryTreatment {
                    row: i + 1,
                    value: row.a.to_string(),
                });
            }
            if !row.y.is_finite() {
                return Err(Error::NonFinite("outcome y"));
            }
            if row.fold == Some(0) {
                return Err(Error::invalid(format!("row {}: fold labels are 1-based", i + 1)));
            }
        }
        for col in OptionalColumn::ALL {
            let present = col.is_set(first);
            if rows.iter().any(|r| col.is_set(r) != present) {
                return Err(Error::invalid(format!(
                    "column `{}` must be set on all rows or on none",
                    col.name()
                )));
            }
        }
        Ok(Dataset { rows, d })
    }

    pub fn rows(&self) -> &[Observation] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Covariate dimension.
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn has(&self, col: OptionalColumn) -> bool {
        col.is_set(&self.rows[0])
    }

    /// Column values, or `MissingColumn` when the column is absent.
    pub fn column(&self, col: OptionalColumn) -> Result<Vec<f64>> {
        if !self.has(col) {
            return Err(Error::MissingColumn(col.name().to_string()));
        }
        Ok(self
            .rows
            .iter()
            .map(|r| match col {
                OptionalColumn::TauHat => r.tau_hat.unwrap(),
                OptionalColumn::TauCal => r.tau_cal.unwrap(),
                OptionalColumn::Tau0 => r.tau0.unwrap(),
                OptionalColumn::Pi0 => r.pi0.unwrap(),
                OptionalColumn::Fold => r.fold.unwrap() as f64,
            })
            .collect())
    }

    pub fn outcomes(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.y).collect()
    }

    /// Rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Result<Dataset> {
        Dataset::new(indices.iter().map(|&i| self.rows[i].clone()).collect())
    }

    /// Returns a copy with one optional real-valued column replaced.
    pub fn with_column(&self, col: OptionalColumn, values: &[f64]) -> Result<Dataset> {
        if values.len() != self.len() {
            return Err(Error::LengthMismatch {
                context: "column assignment",
                expected: self.len(),
                actual: values.len(),
            });
        }
        let rows = self
            .rows
            .iter()
            .zip(values)
            .map(|(r, &v)| {
                let mut r = r.clone();
                match col {
                    OptionalColumn::TauHat => r.tau_hat = Some(v),
                    OptionalColumn::TauCal => r.tau_cal = Some(v),
                    OptionalColumn::Tau0 => r.tau0 = Some(v),
                    OptionalColumn::Pi0 => r.pi0 = Some(v),
                    OptionalColumn::Fold => r.fold = Some(v as usize),
                }
                r
            })
            .collect();
        Dataset::new(rows)
    }

    pub fn treated_count(&self) -> usize {
        self.rows.iter().filter(|r| r.treated()).count()
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct CsvOptions {
    /// Ignore columns outside the schema instead of rejecting them.
    pub allow_extra_columns: bool,
}

enum Slot {
    Covariate(usize),
    A,
    Y,
    Optional(OptionalColumn),
    Ignored,
}

/// Reads a dataset with header `w1..wd, a, y` and any of the optional
/// columns `tau_hat, tau_cal, tau0, pi0, fold`.
pub fn load_csv<R: Read>(source: R, opts: CsvOptions) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let headers = reader.headers()?.clone();

    let mut slots = Vec::with_capacity(headers.len());
    let mut covariates = BTreeMap::new();
    let mut seen = BTreeMap::new();
    for (pos, name) in headers.iter().enumerate() {
        if seen.insert(name.to_string(), pos).is_some() {
            return Err(Error::invalid(format!("duplicate column `{name}`")));
        }
        let slot = if let Some(j) = covariate_index(name) {
            covariates.insert(j, pos);
            Slot::Covariate(j - 1)
        } else if name == "a" {
            Slot::A
        } else if name == "y" {
            Slot::Y
        } else if let Some(col) = OptionalColumn::from_name(name) {
            Slot::Optional(col)
        } else if opts.allow_extra_columns {
            Slot::Ignored
        } else {
            return Err(Error::UnknownColumn(name.to_string()));
        };
        slots.push(slot);
    }
    for required in ["a", "y"] {
        if !seen.contains_key(required) {
            return Err(Error::MissingColumn(required.to_string()));
        }
    }
    let d = covariates.len();
    for j in 1..=d {
        if !covariates.contains_key(&j) {
            return Err(Error::MissingColumn(format!("w{j}")));
        }
    }

    let mut rows = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record?;
        let row = r + 1;
        let mut obs = Observation::new(vec![0.0; d], 0, 0.0);
        for (slot, (cell, name)) in slots.iter().zip(record.iter().zip(headers.iter())) {
            match slot {
                Slot::Ignored => {}
                Slot::A => {
                    obs.a = match cell {
                        "0" | "0.0" => 0,
                        "1" | "1.0" => 1,
                        other => {
                            return Err(Error::NonBinaryTreatment {
                                row,
                                value: other.to_string(),
                            })
                        }
                    }
                }
                Slot::Covariate(j) => obs.w[*j] = parse_real(cell, row, name)?,
                Slot::Y => obs.y = parse_real(cell, row, name)?,
                Slot::Optional(OptionalColumn::Fold) => {
                    let fold: usize = cell.parse().map_err(|_| Error::Parse {
                        row,
                        column: name.to_string(),
                        message: format!("expected a positive integer, got `{cell}`"),
                    })?;
                    obs.fold = Some(fold);
                }
                Slot::Optional(col) => {
                    let v = Some(parse_real(cell, row, name)?);
                    match col {
                        OptionalColumn::TauHat => obs.tau_hat = v,
                        OptionalColumn::TauCal => obs.tau_cal = v,
                        OptionalColumn::Tau0 => obs.tau0 = v,
                        OptionalColumn::Pi0 => obs.pi0 = v,
                        OptionalColumn::Fold => unreachable!(),
                    }
                }
            }
        }
        rows.push(obs);
    }
    Dataset::new(rows)
}

fn covariate_index(name: &str) -> Option<usize> {
    let digits = name.strip_prefix('w')?;
    if digits.starts_with('0') {
        return None;
    }
    digits.parse().ok().filter(|&j| j >= 1)
}

fn parse_real(cell: &str, row: usize, column: &str) -> Result<f64> {
    let parse_err = |message: String| Error::Parse {
        row,
        column: column.to_string(),
        message,
    };
    if cell.is_empty() {
        return Err(parse_err("missing value".into()));
    }
    let v: f64 = cell
        .parse()
        .map_err(|_| parse_err(format!("not a number: `{cell}`")))?;
    if !v.is_finite() {
        return Err(parse_err(format!("non-finite value `{cell}`")));
    }
    Ok(v)
}

/// Writes `dataset` with any present optional columns, followed by the
/// named `extra` columns. Reals use the shortest decimal that parses back
/// to the same bits.
pub fn save_csv<W: Write>(sink: W, dataset: &Dataset, extra: &[(&str, &[f64])]) -> Result<()> {
    for (name, values) in extra {
        if values.len() != dataset.len() {
            return Err(Error::LengthMismatch {
                context: "extra csv column",
                expected: dataset.len(),
                actual: values.len(),
            });
        }
        if name.is_empty() {
            return Err(Error::invalid("empty column name"));
        }
    }
    let present: Vec<OptionalColumn> = OptionalColumn::ALL
        .into_iter()
        .filter(|&c| dataset.has(c))
        .collect();
    let mut writer = csv::Writer::from_writer(sink);
    let mut header: Vec<String> = (1..=dataset.d()).map(|j| format!("w{j}")).collect();
    header.push("a".into());
    header.push("y".into());
    header.extend(present.iter().map(|c| c.name().to_string()));
    header.extend(extra.iter().map(|(n, _)| n.to_string()));
    writer.write_record(&header)?;

    let mut record = Vec::with_capacity(header.len());
    for (i, row) in dataset.rows().iter().enumerate() {
        record.clear();
        record.extend(row.w.iter().map(|v| v.to_string()));
        record.push(row.a.to_string());
        record.push(row.y.to_string());
        for col in &present {
            record.push(match col {
                OptionalColumn::TauHat => row.tau_hat.unwrap().to_string(),
                OptionalColumn::TauCal => row.tau_cal.unwrap().to_string(),
                OptionalColumn::Tau0 => row.tau0.unwrap().to_string(),
                OptionalColumn::Pi0 => row.pi0.unwrap().to_string(),
                OptionalColumn::Fold => row.fold.unwrap().to_string(),
            });
        }
        record.extend(extra.iter().map(|(_, v)| v[i].to_string()));
        writer.write_record(&record)?;
    }
    writer.flush()?;
    Ok(())
}

/// Partition of row indices into `k` folds. Fold ids are 0-based in the API
/// and 1-based in files.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldAssignment {
    k: usize,
    fold_of: Vec<usize>,
}

impl FoldAssignment {
    /// Random balanced partition: a seeded permutation of `0..n` cut into
    /// `k` contiguous chunks, the first `n % k` of which get one extra row.
    pub fn random(n: usize, k: usize, seed: u64) -> Result<Self> {
        Self::random_on_stream(n, k, seed, rng::SPLIT_STREAM)
    }

    pub(crate) fn random_on_stream(n: usize, k: usize, seed: u64, stream: u64) -> Result<Self> {
        if k < 2 {
            return Err(Error::invalid(format!("fold count must be at least 2, got {k}")));
        }
        if k > n {
            return Err(Error::invalid(format!(
                "fold count {k} exceeds the number of rows {n}"
            )));
        }
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng::stream(seed, stream));
        let mut fold_of = vec![0; n];
        let (base, extra) = (n / k, n % k);
        let mut start = 0;
        for s in 0..k {
            let size = base + usize::from(s < extra);
            for &i in &perm[start..start + size] {
                fold_of[i] = s;
            }
            start += size;
        }
        Ok(FoldAssignment { k, fold_of })
    }

    /// Uses the 1-based `fold` column of `dataset`.
    pub fn from_dataset(dataset: &Dataset) -> Result<Self> {
        if !dataset.has(OptionalColumn::Fold) {
            return Err(Error::MissingColumn("fold".into()));
        }
        let labels: Vec<usize> = dataset.rows().iter().map(|r| r.fold.unwrap()).collect();
        Self::from_labels(&labels)
    }

    /// Builds an assignment from 1-based labels; every fold in `1..=max`
    /// must be nonempty.
    pub fn from_labels(labels: &[usize]) -> Result<Self> {
        let k = labels.iter().copied().max().ok_or(Error::Empty("fold labels"))?;
        if labels.contains(&0) {
            return Err(Error::invalid("fold labels are 1-based"));
        }
        if k < 2 {
            return Err(Error::invalid("fold column must use at least 2 folds"));
        }
        let fold_of: Vec<usize> = labels.iter().map(|l| l - 1).collect();
        let assignment = FoldAssignment { k, fold_of };
        if let Some(s) = assignment.sizes().iter().position(|&c| c == 0) {
            return Err(Error::invalid(format!("fold {} is empty", s + 1)));
        }
        Ok(assignment)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.fold_of.len()
    }

    /// 0-based fold of row `i`.
    pub fn fold_of(&self, i: usize) -> usize {
        self.fold_of[i]
    }

    pub fn members(&self, s: usize) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.fold_of[i] == s).collect()
    }

    pub fn complement(&self, s: usize) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.fold_of[i] != s).collect()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &s in &self.fold_of {
            sizes[s] += 1;
        }
        sizes
    }

    /// 1-based labels, as written to the `fold` column.
    pub fn labels(&self) -> Vec<usize> {
        self.fold_of.iter().map(|s| s + 1).collect()
    }
}

pub fn split_folds(dataset: &Dataset, k: usize, seed: u64) -> Result<FoldAssignment> {
    FoldAssignment::random(dataset.len(), k, seed)
}

/// Index split for a train/calibration partition. The calibration part has
/// `round(cal_fraction * n)` rows, rounding half away from zero.
pub fn split_train_cal_indices(
    n: usize,
    cal_fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(cal_fraction > 0.0 && cal_fraction < 1.0) {
        return Err(Error::invalid(format!(
            "calibration fraction must lie in (0, 1), got {cal_fraction}"
        )));
    }
    let ell = (cal_fraction * n as f64).round() as usize;
    if ell == 0 || ell >= n {
        return Err(Error::invalid(format!(
            "calibration fraction {cal_fraction} on {n} rows leaves an empty part"
        )));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng::stream(seed, rng::SPLIT_STREAM));
    let mut cal = perm[..ell].to_vec();
    let mut train = perm[ell..].to_vec();
    cal.sort_unstable();
    train.sort_unstable();
    Ok((train, cal))
}

pub fn split_train_cal(
    dataset: &Dataset,
    cal_fraction: f64,
    seed: u64,
) -> Result<(Dataset, Dataset)> {
    let (train, cal) = split_train_cal_indices(dataset.len(), cal_fraction, seed)?;
    Ok((dataset.subset(&train)?, dataset.subset(&cal)?))
}
