pub mod chunker;
pub mod controlsim;
pub mod depgraph;
pub mod evaluate;
pub mod fixtures;
pub mod geometry;
pub mod interlock;
pub mod pathgen;
pub mod pipeline;
