//! Random members of a polyhedral set.

use rand::Rng;
use rand_distr::{Distribution, Exp1};

use super::oracle::SetOracle;
use super::set::{DynamicUncertaintySet, ScenarioPath};
use crate::error::Result;

/// Draws members two ways: residual paths shrunk radially toward the drift
/// until the bounds hold, and random convex combinations of LP vertices.
pub struct MemberSampler {
    set: DynamicUncertaintySet,
    drift: ScenarioPath,
    drift_inside: bool,
    vertices: Vec<ScenarioPath>,
}

impl MemberSampler {
    pub fn new<R: Rng>(
        set: &DynamicUncertaintySet,
        vertex_count: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let oracle = SetOracle::new(set)?;
        let (n, horizon) = (set.num_units(), set.horizon());
        let mut vertices = Vec::with_capacity(vertex_count);
        for _ in 0..vertex_count {
            let w: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..horizon).map(|_| rng.gen_range(-1.0..1.0)).collect())
                .collect();
            vertices.push(oracle.maximize(&w)?.argmax);
        }
        let drift = set.replay(&vec![vec![0.0; set.num_factors()]; horizon]);
        let drift_inside = drift
            .available
            .iter()
            .zip(&set.p_max)
            .all(|(row, cap)| row.iter().zip(cap).all(|(&p, &c)| p >= 0.0 && p <= c));
        Ok(Self {
            set: set.clone(),
            drift,
            drift_inside,
            vertices,
        })
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> ScenarioPath {
        if self.drift_inside && (self.vertices.is_empty() || rng.gen_bool(0.5)) {
            self.radial(rng)
        } else {
            self.vertex_mix(rng)
        }
    }

    fn radial<R: Rng>(&self, rng: &mut R) -> ScenarioPath {
        let set = &self.set;
        let horizon = set.horizon();
        let nv = set.num_factors();
        let mut v: Vec<Vec<f64>> = (0..horizon)
            .map(|_| {
                let raw: Vec<f64> = (0..nv).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let norm = set.norm.eval(&raw);
                let r = set.gamma * rng.gen::<f64>();
                raw.iter()
                    .map(|x| if norm > 0.0 { x * r / norm } else { 0.0 })
                    .collect()
            })
            .collect();
        let used: f64 = v.iter().map(|vk| set.norm.eval(vk)).sum();
        let budget = set.rho * set.gamma * horizon as f64;
        if used > budget {
            let s = budget / used;
            v.iter_mut().flatten().for_each(|x| *x *= s);
        }
        let full = set.replay(&v);
        let mut lambda: f64 = 1.0;
        for (i, row) in full.available.iter().enumerate() {
            for (t, &p) in row.iter().enumerate() {
                let d = self.drift.available[i][t];
                let step = p - d;
                if p > set.p_max[i][t] && step > 0.0 {
                    lambda = lambda.min((set.p_max[i][t] - d) / step);
                }
                if p < 0.0 && step < 0.0 {
                    lambda = lambda.min(-d / step);
                }
            }
        }
        let lambda = lambda.max(0.0);
        v.iter_mut().flatten().for_each(|x| *x *= lambda);
        set.replay(&v)
    }

    fn vertex_mix<R: Rng>(&self, rng: &mut R) -> ScenarioPath {
        let weights: Vec<f64> = self.vertices.iter().map(|_| Exp1.sample(rng)).collect();
        let total: f64 = weights.iter().sum();
        let mut available = vec![vec![0.0; self.set.horizon()]; self.set.num_units()];
        let mut v = vec![vec![0.0; self.set.num_factors()]; self.set.horizon()];
        for (vert, w) in self.vertices.iter().zip(&weights) {
            let w = w / total;
            for (a, b) in available
                .iter_mut()
                .flatten()
                .zip(vert.available.iter().flatten())
            {
                *a += w * b;
            }
            if let Some(vv) = &vert.v {
                for (k, row) in vv.iter().enumerate() {
                    for (t, x) in row.iter().enumerate() {
                        v[t][k] += w * x;
                    }
                }
            }
        }
        let mut path = self.set.replay(&v);
        path.available = available;
        path
    }
}
