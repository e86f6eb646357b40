//! Adagrad over a dense parameter vector with sparse gradient updates.

use alloc::vec;
use alloc::vec::Vec;

use crate::math::sqrt;

#[derive(Debug, Clone)]
pub struct Adagrad {
    lr: f64,
    l2: f64,
    accum: Vec<f64>,
}

impl Adagrad {
    pub fn new(dim: usize, lr: f64, l2: f64) -> Self {
        Adagrad {
            lr,
            l2,
            accum: vec![0.0; dim],
        }
    }

    /// Applies `grad` (pairs of index and partial derivative) to `params`.
    /// Repeated indices must already be merged.
    pub fn step(&mut self, params: &mut [f64], grad: &[(usize, f64)]) {
        for &(i, g) in grad {
            let g = g + self.l2 * params[i];
            self.accum[i] += g * g;
            params[i] -= self.lr * g / (sqrt(self.accum[i]) + 1e-8);
        }
    }
}

/// Accumulates sparse gradient contributions before an optimizer step.
#[derive(Debug, Default)]
pub struct GradBuffer {
    entries: Vec<(usize, f64)>,
}

impl GradBuffer {
    pub fn add(&mut self, index: usize, value: f64) {
        self.entries.push((index, value));
    }

    /// Merged `(index, value)` pairs sorted by index.
    pub fn drain_merged(&mut self) -> Vec<(usize, f64)> {
        let mut e = core::mem::take(&mut self.entries);
        e.sort_by_key(|x| x.0);
        let mut out: Vec<(usize, f64)> = Vec::with_capacity(e.len());
        for (i, v) in e {
            match out.last_mut() {
                Some(last) if last.0 == i => last.1 += v,
                _ => out.push((i, v)),
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn descends_a_quadratic() {
        let mut x = vec![3.0];
        let mut opt = Adagrad::new(1, 0.5, 0.0);
        for _ in 0..500 {
            let g = 2.0 * x[0];
            opt.step(&mut x, &[(0, g)]);
        }
        assert!(x[0].abs() < 1e-2);
    }

    #[test]
    fn buffer_merges() {
        let mut b = GradBuffer::default();
        b.add(3, 1.0);
        b.add(1, 2.0);
        b.add(3, -0.5);
        assert_eq!(b.drain_merged(), vec![(1, 2.0), (3, 0.5)]);
        assert!(b.drain_merged().is_empty());
    }
}
