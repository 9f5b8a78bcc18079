use std::collections::HashSet;

use crate::error::{Error, Result};

/// Cell `(row, col)`: row = label of A's point, col = label of B's point.
pub type Cell = (usize, usize);

/// Singularity-removal classes for one fade state: every class must end up
/// with a single symbol. Cells not in any class are free.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConstraintSet {
    order: usize,
    classes: Vec<Vec<Cell>>,
}

impl ConstraintSet {
    /// Validates that classes are in range, pairwise disjoint, and never put
    /// two cells of one row or one column together (the exclusive law would
    /// then be unsatisfiable).
    pub fn new(order: usize, classes: Vec<Vec<Cell>>) -> Result<Self> {
        let mut seen = HashSet::new();
        for class in &classes {
            let mut rows = HashSet::new();
            let mut cols = HashSet::new();
            for &(r, c) in class {
                if r >= order || c >= order {
                    return Err(Error::MalformedConstraints(format!("cell ({r},{c}) outside a {order}×{order} grid")));
                }
                if !seen.insert((r, c)) {
                    return Err(Error::MalformedConstraints(format!("cell ({r},{c}) appears in two classes")));
                }
                if !rows.insert(r) || !cols.insert(c) {
                    return Err(Error::MalformedConstraints(format!(
                        "class containing ({r},{c}) repeats a row or column"
                    )));
                }
            }
        }
        Ok(Self { order, classes })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn classes(&self) -> &[Vec<Cell>] {
        &self.classes
    }

    /// Classes with at least two cells.
    pub fn multi_classes(&self) -> impl Iterator<Item = &Vec<Cell>> {
        self.classes.iter().filter(|c| c.len() > 1)
    }

    pub fn constrained_cells(&self) -> usize {
        self.multi_classes().map(Vec::len).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_row_collision() {
        let err = ConstraintSet::new(3, vec![vec![(0, 0), (0, 1)]]).unwrap_err();
        assert!(matches!(err, Error::MalformedConstraints(_)));
        assert!(ConstraintSet::new(3, vec![vec![(0, 0), (1, 0)]]).is_err());
        assert!(ConstraintSet::new(3, vec![vec![(0, 0)], vec![(0, 0), (1, 1)]]).is_err());
        assert!(ConstraintSet::new(3, vec![vec![(3, 0)]]).is_err());
        let ok = ConstraintSet::new(3, vec![vec![(0, 1), (1, 0)], vec![(2, 2)]]).unwrap();
        assert_eq!(ok.multi_classes().count(), 1);
        assert_eq!(ok.constrained_cells(), 2);
    }
}
