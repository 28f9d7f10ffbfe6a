use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Delay-coordinate reconstruction of a scalar series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TakensCloud {
    pub points: Vec<Vec<f64>>,
    pub delay: usize,
    pub dim: usize,
}

/// Point `i` is `(x[i], x[i + delay], ..., x[i + (dim - 1) * delay])`.
pub fn takens_embed(x: &[f64], delay: usize, dim: usize) -> Result<TakensCloud> {
    if delay == 0 || dim == 0 {
        return Err(Error::input("delay and dimension must be positive"));
    }
    let span = (dim - 1) * delay;
    if x.len() <= span {
        return Err(Error::input(format!("series of length {} too short for dim {dim}, delay {delay}", x.len())));
    }
    let points = (0..x.len() - span).map(|i| (0..dim).map(|d| x[i + d * delay]).collect()).collect();
    Ok(TakensCloud { points, delay, dim })
}
