//! Command-line tools and the experiment harness: CSV schemas in
//! [`tables`], end-to-end runs in [`harness`], results tables in
//! [`report`] and argument handling in [`cli`].

pub mod cli;
pub mod harness;
pub mod report;
pub mod tables;
