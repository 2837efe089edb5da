//! Small two-span tables with hand-checked attributions, shared by tests
//! across the workspace.

use crate::distribution::ClusterDistribution;
use crate::table::BottomTable;

fn point(cluster: usize) -> ClusterDistribution {
    ClusterDistribution::point_mass(cluster, 2).expect("two clusters")
}

/// Answer changes only when both spans take their second premise.
/// `φ = [0.281168, 0.281168]`.
pub fn four_row() -> BottomTable {
    BottomTable::from_fn(vec![2, 2], |a| point(usize::from(a == [1, 1]))).expect("valid table")
}

/// Answer flips whenever exactly one span takes its second premise.
/// `φ = [ln2/2, ln2/2]`, `LOO = [ln2, ln2]`.
pub fn xor() -> BottomTable {
    BottomTable::from_fn(vec![2, 2], |a| point(a[0] ^ a[1])).expect("valid table")
}

/// Answer depends on span 0 alone. `φ = [ln2, 0]`.
pub fn dummy_span() -> BottomTable {
    BottomTable::from_fn(vec![2, 2], |a| point(a[0])).expect("valid table")
}
