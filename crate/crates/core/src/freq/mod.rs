//! Permutation tests, FDR adjustment and rank correlation.

mod bh;
mod correlation;
mod permtest;
mod signflip;

pub use bh::bh_adjust;
pub use correlation::{bias_pairs_by_task, permuted_correlation_nulls, ranks, spearman, CorrelationNulls, TaskPairs};
pub use permtest::{permtest_report, write_test_report, TestReportRow, TEST_REPORT_HEADER};
pub use signflip::{signflip_test, signflip_test_with, SignFlipMode, TestResult, EXHAUSTIVE_LIMIT};
