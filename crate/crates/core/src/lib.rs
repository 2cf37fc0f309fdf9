//! Estimating the number of communities in a degree-corrected block model by
//! stepwise goodness-of-fit testing.
//!
//! The pipeline for a candidate `m` is: leading eigenvectors of the adjacency
//! matrix ([`spectral`]), SCORE clustering into `m` groups ([`clustering`]),
//! refitting the model from the fitted labels and computing the refitted
//! quadrilateral test statistic ([`gof`]). [`stgof`] runs the steps
//! `m = 1, 2, ...` and stops at the first accepted fit.

pub mod clustering;
pub mod dcbm;
pub mod gof;
pub mod graph;
pub mod normal;
pub mod rng;
pub mod spectral;
pub mod stgof;
