//! Scenario-to-benchmark engine: scene graphs over driving scenarios,
//! Set-of-Mark annotated views, template question generation, response
//! parsing, ego dynamics and a closed-loop harness.

pub mod dynamics;
pub mod geometry;
pub mod scenario;
pub mod scene_graph;
pub mod synth;
pub mod view;
pub mod parallel;
pub mod qa;
pub mod closed_loop;
pub mod config;
