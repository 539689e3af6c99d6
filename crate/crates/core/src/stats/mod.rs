//! Mann–Whitney U testing of feature distributions between athletes and
//! players.

mod mann_whitney;
mod significance;

pub use mann_whitney::{mann_whitney_u, mann_whitney_u_using, midranks, Alternative, Method, UTestResult, EXACT_MAX_N};
pub use significance::{non_overlapping_subsample, significance_table, SignificanceRow, SignificanceTable};
