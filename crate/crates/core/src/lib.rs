pub mod bits;
pub mod clocks;
pub mod elaborate;
pub mod emit;
pub mod error;
pub mod frontend;
pub mod ir;
pub mod loops;
pub mod ops;
pub mod optimize;
pub mod oracle;
pub mod partition;
pub mod pipeline;
pub mod plan;
pub mod runtime;
pub mod schedule;
pub mod sim;
pub mod stimulus;
pub mod testbench;
pub mod testgen;
pub mod vcd;
