use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rustdct::{DctPlanner, TransformType2And3};

use crate::error::{Error, Result};

/// Row subset of the orthonormal DCT-II, backed by a fast transform.
pub struct PartialDct {
    n: usize,
    rows: Vec<usize>,
    plan: Arc<dyn TransformType2And3<f64>>,
}

impl PartialDct {
    pub fn new(q: usize, n: usize, seed: u64) -> Result<Self> {
        if q == 0 || q > n {
            return Err(Error::InvalidArgument(format!(
                "partial DCT needs 1 <= Q <= N, got Q = {q}, N = {n}"
            )));
        }
        let mut order: Vec<usize> = (0..n).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        order.shuffle(&mut rng);
        let mut rows = order[..q].to_vec();
        rows.sort_unstable();
        let plan = DctPlanner::new().plan_dct2(n);
        Ok(Self { n, rows, plan })
    }

    /// Selected DCT frequencies, ascending.
    pub fn rows(&self) -> &[usize] {
        &self.rows
    }

    fn weight(&self, k: usize) -> f64 {
        if k == 0 {
            (1.0 / self.n as f64).sqrt()
        } else {
            (2.0 / self.n as f64).sqrt()
        }
    }

    pub(crate) fn forward(&self, x: &[f64], out: &mut [f64]) {
        let mut buf = x.to_vec();
        self.plan.process_dct2(&mut buf);
        for (o, &k) in out.iter_mut().zip(&self.rows) {
            *o = self.weight(k) * buf[k];
        }
    }

    pub(crate) fn adjoint(&self, u: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for (&v, &k) in u.iter().zip(&self.rows) {
            // the unnormalized DCT-III halves the DC input
            out[k] = if k == 0 { 2.0 * self.weight(0) * v } else { self.weight(k) * v };
        }
        self.plan.process_dct3(out);
    }
}
