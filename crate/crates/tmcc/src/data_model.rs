//! Data containers: masked matrices, task blocks, the calibration
//! constraint, datasets, and the concatenated working iterate `M = [X, Z]`.
//!
//! Missing entries are stored as canonical zeros under a zero mask entry, so
//! every numeric kernel downstream sees finite, NaN-free buffers. File
//! formats that use a missing-value token convert at the I/O boundary.

use crate::expfam::Family;
use crate::linalg::{self, DenseMatrix};
use ndarray::{s, Array2, ArrayView2};
use thiserror::Error;

/// Numerical threshold for the full-row-rank check on the calibration map.
pub const SIGMA_MIN_THRESHOLD: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("values shape {values:?} does not match mask shape {mask:?}")]
    ShapeMismatch {
        values: (usize, usize),
        mask: (usize, usize),
    },
    #[error("mask entry at ({row}, {col}) is {value}, expected 0 or 1")]
    MaskNotBinary { row: usize, col: usize, value: f64 },
    #[error("observed entry at ({row}, {col}) is not finite")]
    NonFiniteObserved { row: usize, col: usize },
    #[error("task index {index} out of range ({count} tasks)")]
    TaskIndex { index: usize, count: usize },
    #[error("matrix has {cols} columns but the layout spans {expected}")]
    LayoutWidth { cols: usize, expected: usize },
}

/// Dense values paired with a same-shape 0/1 observation mask. Unobserved
/// entries hold canonical zeros; construction enforces this.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskedMatrix {
    values: DenseMatrix,
    mask: DenseMatrix,
}

impl MaskedMatrix {
    pub fn new(values: DenseMatrix, mask: DenseMatrix) -> Result<Self, DataError> {
        if values.dim() != mask.dim() {
            return Err(DataError::ShapeMismatch {
                values: values.dim(),
                mask: mask.dim(),
            });
        }
        for ((row, col), &r) in mask.indexed_iter() {
            if r != 0.0 && r != 1.0 {
                return Err(DataError::MaskNotBinary { row, col, value: r });
            }
            if r == 1.0 && !values[[row, col]].is_finite() {
                return Err(DataError::NonFiniteObserved { row, col });
            }
        }
        let mut values = values;
        values.zip_mut_with(&mask, |v, &r| {
            if r == 0.0 {
                *v = 0.0;
            }
        });
        Ok(Self { values, mask })
    }

    /// Fully observed wrapper around finite values.
    pub fn fully_observed(values: DenseMatrix) -> Result<Self, DataError> {
        let mask = Array2::ones(values.dim());
        Self::new(values, mask)
    }

    /// Values with canonical zeros at unobserved entries.
    pub fn values(&self) -> &DenseMatrix {
        &self.values
    }

    /// 0/1 observation indicators.
    pub fn mask(&self) -> &DenseMatrix {
        &self.mask
    }

    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }

    pub fn observed(&self, row: usize, col: usize) -> bool {
        self.mask[[row, col]] == 1.0
    }

    pub fn observed_count(&self) -> usize {
        self.mask.iter().filter(|&&r| r == 1.0).count()
    }

    pub fn is_fully_observed(&self) -> bool {
        self.mask.iter().all(|&r| r == 1.0)
    }
}

/// One response matrix and the family its observed entries follow.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskBlock {
    pub data: MaskedMatrix,
    pub family: Family,
}

/// Known linear constraint `A X = B` on the true feature matrix, with `A`
/// of shape `q x n` and `B` of shape `q x d`.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationConstraint {
    pub a: DenseMatrix,
    pub b: DenseMatrix,
}

/// Feature matrix, ordered task blocks, and an optional calibration
/// constraint. All blocks share the row count `n`; the concatenated width is
/// `D = d + sum of task widths`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: MaskedMatrix,
    pub tasks: Vec<TaskBlock>,
    pub calibration: Option<CalibrationConstraint>,
}

impl Dataset {
    pub fn n(&self) -> usize {
        self.features.nrows()
    }

    pub fn d(&self) -> usize {
        self.features.ncols()
    }

    pub fn layout(&self) -> Layout {
        Layout {
            d: self.d(),
            widths: self.tasks.iter().map(|t| t.data.ncols()).collect(),
        }
    }

    /// Concatenation `[X, Z^(1), ..., Z^(S)]` of the observed values with
    /// zeros at unobserved entries.
    pub fn zero_filled_concat(&self) -> ConcatMatrix {
        let layout = self.layout();
        let n = self.n();
        let mut m = Array2::zeros((n, layout.total()));
        m.slice_mut(s![.., ..self.d()])
            .assign(self.features.values());
        for (idx, task) in self.tasks.iter().enumerate() {
            let range = layout.task_range(idx).expect("task range");
            m.slice_mut(s![.., range]).assign(task.data.values());
        }
        ConcatMatrix { m, layout }
    }

    /// The same rows with the feature block dropped: the task blocks only,
    /// no calibration. Used by baselines that complete responses in
    /// isolation.
    pub fn responses_only(&self) -> Dataset {
        Dataset {
            features: MaskedMatrix::new(
                Array2::zeros((self.n(), 0)),
                Array2::ones((self.n(), 0)),
            )
            .expect("empty feature block"),
            tasks: self.tasks.clone(),
            calibration: None,
        }
    }
}

/// Column-offset table of a concatenated matrix: feature width `d` followed
/// by the task widths in order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub d: usize,
    pub widths: Vec<usize>,
}

impl Layout {
    pub fn total(&self) -> usize {
        self.d + self.widths.iter().sum::<usize>()
    }

    pub fn feature_range(&self) -> std::ops::Range<usize> {
        0..self.d
    }

    pub fn task_range(&self, index: usize) -> Result<std::ops::Range<usize>, DataError> {
        if index >= self.widths.len() {
            return Err(DataError::TaskIndex {
                index,
                count: self.widths.len(),
            });
        }
        let start = self.d + self.widths[..index].iter().sum::<usize>();
        Ok(start..start + self.widths[index])
    }

    /// Columns of all task blocks combined.
    pub fn response_range(&self) -> std::ops::Range<usize> {
        self.d..self.total()
    }
}

/// A working iterate `M` of shape `n x D` together with the layout that maps
/// its columns back to the feature block and each task block.
#[derive(Debug, Clone, PartialEq)]
pub struct ConcatMatrix {
    pub m: DenseMatrix,
    pub layout: Layout,
}

impl ConcatMatrix {
    pub fn new(m: DenseMatrix, layout: Layout) -> Result<Self, DataError> {
        if m.ncols() != layout.total() {
            return Err(DataError::LayoutWidth {
                cols: m.ncols(),
                expected: layout.total(),
            });
        }
        Ok(Self { m, layout })
    }

    pub fn nrows(&self) -> usize {
        self.m.nrows()
    }

    pub fn slice_feature(&self) -> ArrayView2<'_, f64> {
        self.m.slice(s![.., self.layout.feature_range()])
    }

    pub fn slice_task(&self, index: usize) -> Result<ArrayView2<'_, f64>, DataError> {
        let range = self.layout.task_range(index)?;
        Ok(self.m.slice(s![.., range]))
    }

    /// View of all response columns.
    pub fn slice_responses(&self) -> ArrayView2<'_, f64> {
        self.m.slice(s![.., self.layout.response_range()])
    }
}

/// One violation found by [`validate`], with coordinates where applicable.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    TaskRowCount {
        task: usize,
        rows: usize,
        expected: usize,
    },
    MaskNotBinary {
        matrix: String,
        row: usize,
        col: usize,
        value: f64,
    },
    NonFiniteObserved {
        matrix: String,
        row: usize,
        col: usize,
    },
    OutsideSupport {
        task: usize,
        row: usize,
        col: usize,
        value: f64,
    },
    InvalidVariance {
        task: usize,
        sigma2: f64,
    },
    CalibrationShape {
        a: (usize, usize),
        b: (usize, usize),
        n: usize,
        d: usize,
    },
    CalibrationNonFinite {
        matrix: String,
        row: usize,
        col: usize,
    },
    CalibrationRankDeficient {
        sigma_min: f64,
    },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::TaskRowCount {
                task,
                rows,
                expected,
            } => write!(f, "task {task}: {rows} rows, expected {expected}"),
            Violation::MaskNotBinary {
                matrix,
                row,
                col,
                value,
            } => write!(f, "{matrix}: mask({row}, {col}) = {value}, expected 0 or 1"),
            Violation::NonFiniteObserved { matrix, row, col } => {
                write!(f, "{matrix}: observed entry ({row}, {col}) is not finite")
            }
            Violation::OutsideSupport {
                task,
                row,
                col,
                value,
            } => write!(
                f,
                "task {task}: observed value {value} at ({row}, {col}) outside family support"
            ),
            Violation::InvalidVariance { task, sigma2 } => {
                write!(f, "task {task}: gaussian variance {sigma2} must be positive")
            }
            Violation::CalibrationShape { a, b, n, d } => write!(
                f,
                "calibration shapes A {a:?} / B {b:?} incompatible with n = {n}, d = {d}"
            ),
            Violation::CalibrationNonFinite { matrix, row, col } => {
                write!(f, "calibration {matrix}: entry ({row}, {col}) is not finite")
            }
            Violation::CalibrationRankDeficient { sigma_min } => write!(
                f,
                "sigma_min(A) = {sigma_min} below threshold {SIGMA_MIN_THRESHOLD}"
            ),
        }
    }
}

fn check_masked(out: &mut Vec<Violation>, name: &str, mm: &MaskedMatrix) {
    for ((row, col), &r) in mm.mask().indexed_iter() {
        if r != 0.0 && r != 1.0 {
            out.push(Violation::MaskNotBinary {
                matrix: name.to_string(),
                row,
                col,
                value: r,
            });
        } else if r == 1.0 && !mm.values()[[row, col]].is_finite() {
            out.push(Violation::NonFiniteObserved {
                matrix: name.to_string(),
                row,
                col,
            });
        }
    }
}

/// Checks every dataset invariant and returns the full list of violations
/// (empty means the dataset is well-formed). Violations are data, not
/// failures: callers decide how to react.
pub fn validate(ds: &Dataset) -> Vec<Violation> {
    let mut out = Vec::new();
    let n = ds.n();
    check_masked(&mut out, "features", &ds.features);
    for (idx, task) in ds.tasks.iter().enumerate() {
        if task.data.nrows() != n {
            out.push(Violation::TaskRowCount {
                task: idx,
                rows: task.data.nrows(),
                expected: n,
            });
        }
        check_masked(&mut out, &format!("task {idx}"), &task.data);
        if let Family::Gaussian { sigma2 } = task.family {
            if !(sigma2 > 0.0 && sigma2.is_finite()) {
                out.push(Violation::InvalidVariance { task: idx, sigma2 });
            }
        }
        for ((row, col), &y) in task.data.values().indexed_iter() {
            if task.data.observed(row, col) && !task.family.in_support(y) {
                out.push(Violation::OutsideSupport {
                    task: idx,
                    row,
                    col,
                    value: y,
                });
            }
        }
    }
    if let Some(cal) = &ds.calibration {
        let d = ds.d();
        if cal.a.ncols() != n || cal.b.nrows() != cal.a.nrows() || cal.b.ncols() != d {
            out.push(Violation::CalibrationShape {
                a: cal.a.dim(),
                b: cal.b.dim(),
                n,
                d,
            });
            return out;
        }
        let mut finite = true;
        for (name, mat) in [("A", &cal.a), ("B", &cal.b)] {
            for ((row, col), &x) in mat.indexed_iter() {
                if !x.is_finite() {
                    finite = false;
                    out.push(Violation::CalibrationNonFinite {
                        matrix: name.to_string(),
                        row,
                        col,
                    });
                }
            }
        }
        if finite && !cal.a.is_empty() {
            let sigma = linalg::svd(&cal.a).expect("svd of calibration map").sigma;
            let sigma_min = sigma[sigma.len() - 1];
            if sigma_min <= SIGMA_MIN_THRESHOLD {
                out.push(Violation::CalibrationRankDeficient { sigma_min });
            }
        }
    }
    out
}
