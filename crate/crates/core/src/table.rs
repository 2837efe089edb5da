//! Fully clarified ("bottom") answer distributions, one per joint premise
//! assignment.
//!
//! Joint assignments are laid out row-major: span 0 is the most significant
//! digit and the last span varies fastest.

use serde::{Deserialize, Serialize};

use crate::distribution::ClusterDistribution;
use crate::error::{GameError, Result};

/// `p(Y | x, c_N)` for every joint clarification `c_N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TableRecord", into = "TableRecord")]
pub struct BottomTable {
    premise_counts: Vec<usize>,
    cluster_count: usize,
    rows: Vec<ClusterDistribution>,
}

impl BottomTable {
    /// `rows` must be in row-major assignment order.
    pub fn new(premise_counts: Vec<usize>, rows: Vec<ClusterDistribution>) -> Result<Self> {
        if premise_counts.is_empty() {
            return Err(GameError::InvalidTable("a table needs at least one span".into()));
        }
        if let Some(k) = premise_counts.iter().position(|&m| m == 0) {
            return Err(GameError::InvalidTable(format!("span {k} has no premises")));
        }
        let expected = assignment_count(&premise_counts)?;
        if rows.len() != expected {
            return Err(GameError::InvalidTable(format!(
                "expected {expected} joint assignments, found {}",
                rows.len()
            )));
        }
        let cluster_count = rows[0].cluster_count();
        if let Some(i) = rows.iter().position(|r| r.cluster_count() != cluster_count) {
            return Err(GameError::InvalidTable(format!(
                "row {i} has {} clusters, expected {cluster_count}",
                rows[i].cluster_count()
            )));
        }
        Ok(Self {
            premise_counts,
            cluster_count,
            rows,
        })
    }

    /// Builds a table by evaluating `f` at every joint assignment.
    pub fn from_fn<F>(premise_counts: Vec<usize>, mut f: F) -> Result<Self>
    where
        F: FnMut(&[usize]) -> ClusterDistribution,
    {
        if premise_counts.contains(&0) {
            return Err(GameError::InvalidTable("span with no premises".into()));
        }
        let rows = Assignments::new(&premise_counts).map(|a| f(&a)).collect();
        Self::new(premise_counts, rows)
    }

    pub fn span_count(&self) -> usize {
        self.premise_counts.len()
    }

    pub fn premise_counts(&self) -> &[usize] {
        &self.premise_counts
    }

    pub fn cluster_count(&self) -> usize {
        self.cluster_count
    }

    pub fn rows(&self) -> &[ClusterDistribution] {
        &self.rows
    }

    /// Row-major position of a full joint assignment.
    pub fn index_of(&self, assignment: &[usize]) -> Result<usize> {
        if assignment.len() != self.span_count() {
            return Err(GameError::InvalidAssignment(format!(
                "assignment covers {} spans, table has {}",
                assignment.len(),
                self.span_count()
            )));
        }
        let mut index = 0;
        for (k, (&j, &m)) in assignment.iter().zip(&self.premise_counts).enumerate() {
            if j >= m {
                return Err(GameError::InvalidAssignment(format!(
                    "premise {j} out of range for span {k} with {m} premises"
                )));
            }
            index = index * m + j;
        }
        Ok(index)
    }

    pub fn row(&self, assignment: &[usize]) -> Result<&ClusterDistribution> {
        Ok(&self.rows[self.index_of(assignment)?])
    }

    /// All joint assignments in row-major order.
    pub fn assignments(&self) -> Assignments {
        Assignments::new(&self.premise_counts)
    }
}

pub(crate) fn assignment_count(premise_counts: &[usize]) -> Result<usize> {
    premise_counts
        .iter()
        .try_fold(1usize, |acc, &m| acc.checked_mul(m))
        .ok_or_else(|| GameError::InvalidTable("too many joint assignments".into()))
}

/// Odometer over mixed-radix digits, last digit fastest.
#[derive(Debug, Clone)]
pub struct Assignments {
    radices: Vec<usize>,
    next: Option<Vec<usize>>,
}

impl Assignments {
    pub fn new(radices: &[usize]) -> Self {
        let next = if radices.contains(&0) {
            None
        } else {
            Some(vec![0; radices.len()])
        };
        Self {
            radices: radices.to_vec(),
            next,
        }
    }
}

impl Iterator for Assignments {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let current = self.next.take()?;
        let mut succ = current.clone();
        let mut carried = true;
        for k in (0..succ.len()).rev() {
            succ[k] += 1;
            if succ[k] < self.radices[k] {
                carried = false;
                break;
            }
            succ[k] = 0;
        }
        if !carried {
            self.next = Some(succ);
        }
        Some(current)
    }
}

#[derive(Serialize, Deserialize)]
struct TableRecord {
    span_premise_counts: Vec<usize>,
    cluster_count: usize,
    distributions: Vec<RowRecord>,
}

#[derive(Serialize, Deserialize)]
struct RowRecord {
    assignment: Vec<usize>,
    probs: ClusterDistribution,
}

impl From<BottomTable> for TableRecord {
    fn from(table: BottomTable) -> Self {
        let distributions = table
            .assignments()
            .zip(table.rows)
            .map(|(assignment, probs)| RowRecord { assignment, probs })
            .collect();
        Self {
            span_premise_counts: table.premise_counts,
            cluster_count: table.cluster_count,
            distributions,
        }
    }
}

impl TryFrom<TableRecord> for BottomTable {
    type Error = GameError;

    fn try_from(record: TableRecord) -> Result<Self> {
        let expected = assignment_count(&record.span_premise_counts)?;
        if record.distributions.len() != expected {
            return Err(GameError::InvalidTable(format!(
                "expected {expected} joint assignments, found {}",
                record.distributions.len()
            )));
        }
        for (want, row) in Assignments::new(&record.span_premise_counts).zip(&record.distributions) {
            if row.assignment != want {
                return Err(GameError::InvalidTable(format!(
                    "row for assignment {:?} found where {want:?} was expected",
                    row.assignment
                )));
            }
        }
        let table = Self::new(
            record.span_premise_counts,
            record.distributions.into_iter().map(|r| r.probs).collect(),
        )?;
        if table.cluster_count != record.cluster_count {
            return Err(GameError::InvalidTable(format!(
                "declared {} clusters, rows carry {}",
                record.cluster_count, table.cluster_count
            )));
        }
        Ok(table)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pm(k: usize) -> ClusterDistribution {
        ClusterDistribution::point_mass(k, 2).unwrap()
    }

    #[test]
    fn odometer_is_row_major() {
        let all: Vec<_> = Assignments::new(&[2, 3]).collect();
        assert_eq!(all.len(), 6);
        assert_eq!(all[0], vec![0, 0]);
        assert_eq!(all[1], vec![0, 1]);
        assert_eq!(all[3], vec![1, 0]);
        assert_eq!(Assignments::new(&[]).collect::<Vec<_>>(), vec![Vec::<usize>::new()]);
    }

    #[test]
    fn index_matches_odometer() {
        let t = BottomTable::from_fn(vec![2, 3, 2], |_| pm(0)).unwrap();
        for (i, a) in t.assignments().enumerate() {
            assert_eq!(t.index_of(&a).unwrap(), i);
        }
        assert!(t.index_of(&[0, 3, 0]).is_err());
        assert!(t.index_of(&[0, 0]).is_err());
    }

    #[test]
    fn rejects_malformed_tables() {
        assert!(BottomTable::new(vec![], vec![]).is_err());
        assert!(BottomTable::new(vec![2, 0], vec![]).is_err());
        assert!(BottomTable::new(vec![2], vec![pm(0)]).is_err());
        let three = ClusterDistribution::point_mass(0, 3).unwrap();
        assert!(BottomTable::new(vec![2], vec![pm(0), three]).is_err());
    }

    #[test]
    fn serde_round_trip_and_tamper_detection() {
        let t = BottomTable::from_fn(vec![2, 2], |a| pm(a[0] ^ a[1])).unwrap();
        let json = serde_json::to_value(&t).unwrap();
        let back: BottomTable = serde_json::from_value(json.clone()).unwrap();
        assert_eq!(back, t);

        let mut dropped = json.clone();
        dropped["distributions"].as_array_mut().unwrap().remove(2);
        assert!(serde_json::from_value::<BottomTable>(dropped).is_err());

        let mut swapped = json;
        swapped["distributions"].as_array_mut().unwrap().swap(0, 1);
        assert!(serde_json::from_value::<BottomTable>(swapped).is_err());
    }
}
