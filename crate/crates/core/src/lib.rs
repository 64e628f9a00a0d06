//! Terminal arrival trajectory optimization with trombone path stretching.
//!
//! Arrivals from the feeder gates are spaced at the Final Approach Fix by
//! stretching the Baseleg and slowing down, under a fixed first-come landing
//! order.
//!
//! - [`geometry`]: closed-form tangent leg, RF arc and final leg.
//! - [`traffic`]: shifted-Poisson arrival generation.
//! - [`nlp`]: the fixed-sequence optimization and its greedy baseline.
//! - [`simkit`]: Monte Carlo batches and capacity metrics.
//! - [`cli`]: file formats, SVG plots and the command-line front end.

pub mod cli;
pub mod geometry;
pub mod nlp;
pub mod simkit;
pub mod traffic;
