//! Anderson acceleration of a fixed-point map `x ↦ g(x)`.

use std::collections::VecDeque;

use crate::linalg::solve;
use crate::scalar::{cast, Real};

pub(crate) struct Anderson<T> {
    depth: usize,
    last: Option<(Vec<T>, Vec<T>)>,
    dg: VecDeque<Vec<T>>,
    df: VecDeque<Vec<T>>,
}

impl<T: Real> Anderson<T> {
    pub(crate) fn new(depth: usize) -> Self {
        Self { depth, last: None, dg: VecDeque::new(), df: VecDeque::new() }
    }

    /// Next iterate given the current iterate `x` and its image `g`.
    pub(crate) fn next(&mut self, x: &[T], g: &[T]) -> Vec<T> {
        if self.depth == 0 {
            return g.to_vec();
        }
        let f: Vec<T> = g.iter().zip(x).map(|(&a, &b)| a - b).collect();
        if let Some((g_old, f_old)) = self.last.take() {
            self.dg.push_back(g.iter().zip(&g_old).map(|(&a, &b)| a - b).collect());
            self.df.push_back(f.iter().zip(&f_old).map(|(&a, &b)| a - b).collect());
            if self.dg.len() > self.depth {
                self.dg.pop_front();
                self.df.pop_front();
            }
        }
        self.last = Some((g.to_vec(), f.clone()));
        let m = self.df.len();
        if m == 0 {
            return g.to_vec();
        }
        let dot = |a: &[T], b: &[T]| a.iter().zip(b).map(|(&x, &y)| x * y).sum::<T>();
        let mut gram = vec![T::zero(); m * m];
        let mut rhs = vec![T::zero(); m];
        for i in 0..m {
            for j in 0..m {
                gram[i * m + j] = dot(&self.df[i], &self.df[j]);
            }
            rhs[i] = dot(&self.df[i], &f);
        }
        let trace: T = (0..m).map(|i| gram[i * m + i]).sum();
        for i in 0..m {
            gram[i * m + i] = gram[i * m + i] + cast::<T>(1e-13) * trace;
        }
        match solve(&gram, &rhs) {
            Some(gamma) if gamma.iter().all(|v| v.is_finite()) => {
                let mut out = g.to_vec();
                for (k, gk) in gamma.iter().enumerate() {
                    for (o, &v) in out.iter_mut().zip(&self.dg[k]) {
                        *o = *o - *gk * v;
                    }
                }
                out
            }
            _ => {
                self.dg.clear();
                self.df.clear();
                g.to_vec()
            }
        }
    }
}
