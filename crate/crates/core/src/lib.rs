pub mod linesearch;
pub mod minnorm;
pub mod model;
pub mod oracle;
pub mod problems;
pub mod sampler;
pub mod solver;
pub mod trace;
pub mod vecops;
