pub mod classifier;
pub mod mmv;
pub mod pipeline;
pub mod rpca;
pub mod synth;
pub mod thermal_io;
pub mod tracker;
pub mod train;
