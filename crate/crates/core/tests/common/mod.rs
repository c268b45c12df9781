#![allow(dead_code)]

pub mod gradcheck;
pub mod metric_oracle;
pub mod rule_oracle;
