use crate::error::{Error, Result};

/// Uniform output grid t_k = start + k·(end − start)/(nodes − 1).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeGrid {
    start: f64,
    end: f64,
    nodes: usize,
}

impl TimeGrid {
    pub fn new(start: f64, end: f64, nodes: usize) -> Result<Self> {
        if !(start.is_finite() && end.is_finite()) || end <= start {
            return Err(Error::usage(format!("time grid needs start < end, got [{start}, {end}]")));
        }
        if nodes < 2 {
            return Err(Error::usage("time grid needs at least two nodes"));
        }
        Ok(Self { start, end, nodes })
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn end(&self) -> f64 {
        self.end
    }

    pub fn len(&self) -> usize {
        self.nodes
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn step(&self) -> f64 {
        (self.end - self.start) / (self.nodes - 1) as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        if k + 1 == self.nodes {
            self.end
        } else {
            self.start + k as f64 * self.step()
        }
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.nodes).map(move |k| self.time(k))
    }

    /// Index of the node at or immediately before `t`.
    pub fn locate(&self, t: f64) -> Result<usize> {
        if !(self.start..=self.end).contains(&t) {
            return Err(Error::OutOfRange { t, start: self.start, end: self.end });
        }
        let k = ((t - self.start) / self.step()).floor() as usize;
        Ok(k.min(self.nodes - 1))
    }
}

/// Running composite-Simpson integral of uniformly sampled values.
///
/// Even indices use pure Simpson panels; odd indices add a three-point
/// partial panel, so every prefix is third-order accurate or better.
pub(crate) fn cumulative_simpson(values: &[f64], h: f64) -> Vec<f64> {
    let n = values.len();
    let mut out = vec![0.0; n];
    if n < 2 {
        return out;
    }
    if n == 2 {
        out[1] = 0.5 * h * (values[0] + values[1]);
        return out;
    }
    for k in 1..n {
        out[k] = if k % 2 == 0 {
            out[k - 2] + h / 3.0 * (values[k - 2] + 4.0 * values[k - 1] + values[k])
        } else if k == 1 {
            h / 12.0 * (5.0 * values[0] + 8.0 * values[1] - values[2])
        } else {
            out[k - 1] + h / 12.0 * (-values[k - 2] + 8.0 * values[k - 1] + 5.0 * values[k])
        };
    }
    out
}
