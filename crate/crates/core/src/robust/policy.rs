//! Affine dispatch policy: values, master-problem variables and evaluation.

use serde::{Deserialize, Serialize};

use crate::backend::{LinExpr, MathProgram, VarId};
use crate::model::{PeriodDispatch, PowerSystem};
use crate::scalar::Scalar;
use crate::uncertainty::{Matrix, ScenarioPath};

/// p = w + W·P_t for generators and storage, p^r_i = w^r_i + W^r_t·p̄_i for renewables,
/// where P_t is the total available renewable power.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffinePolicy {
    pub gen_intercept: Matrix,
    pub gen_slope: Matrix,
    pub discharge_intercept: Matrix,
    pub discharge_slope: Matrix,
    pub charge_intercept: Matrix,
    pub charge_slope: Matrix,
    pub ren_intercept: Matrix,
    /// Shared across renewable units, one entry per period.
    pub ren_slope: Vec<f64>,
}

/// A period of policy output in any scalar type.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicyOutput<S> {
    pub gen: Vec<S>,
    pub ren: Vec<S>,
    pub discharge: Vec<S>,
    pub charge: Vec<S>,
}

impl AffinePolicy {
    pub fn zeros(system: &PowerSystem) -> Self {
        let t = system.horizon;
        let z = |n: usize| vec![vec![0.0; t]; n];
        Self {
            gen_intercept: z(system.generators.len()),
            gen_slope: z(system.generators.len()),
            discharge_intercept: z(system.storages.len()),
            discharge_slope: z(system.storages.len()),
            charge_intercept: z(system.storages.len()),
            charge_slope: z(system.storages.len()),
            ren_intercept: z(system.renewables.len()),
            ren_slope: vec![0.0; t],
        }
    }

    /// Constant policy reproducing a fixed dispatch plan.
    pub fn constant(system: &PowerSystem, plan: &[PeriodDispatch]) -> Self {
        let mut p = Self::zeros(system);
        for (t, d) in plan.iter().enumerate() {
            for (i, x) in d.gen.iter().enumerate() {
                p.gen_intercept[i][t] = *x;
            }
            for (i, x) in d.ren.iter().enumerate() {
                p.ren_intercept[i][t] = *x;
            }
            for (i, x) in d.discharge.iter().enumerate() {
                p.discharge_intercept[i][t] = *x;
            }
            for (i, x) in d.charge.iter().enumerate() {
                p.charge_intercept[i][t] = *x;
            }
        }
        p
    }

    pub fn horizon(&self) -> usize {
        self.ren_slope.len()
    }

    /// Output at period `t` for unit availabilities `available` (one per renewable unit).
    pub fn evaluate<S: Scalar>(&self, t: usize, available: &[S]) -> PolicyOutput<S> {
        let lift = S::from_f64_lossy;
        let total = available.iter().fold(S::zero(), |acc, x| acc + x.clone());
        let affine = |w: &Matrix, slope: &Matrix| -> Vec<S> {
            w.iter()
                .zip(slope)
                .map(|(w, s)| lift(w[t]) + lift(s[t]) * total.clone())
                .collect()
        };
        PolicyOutput {
            gen: affine(&self.gen_intercept, &self.gen_slope),
            discharge: affine(&self.discharge_intercept, &self.discharge_slope),
            charge: affine(&self.charge_intercept, &self.charge_slope),
            ren: self
                .ren_intercept
                .iter()
                .zip(available)
                .map(|(w, p)| lift(w[t]) + lift(self.ren_slope[t]) * p.clone())
                .collect(),
        }
    }

    pub fn dispatch_at(&self, t: usize, available: &[f64]) -> PeriodDispatch {
        let o = self.evaluate::<f64>(t, available);
        PeriodDispatch {
            gen: o.gen,
            ren: o.ren,
            discharge: o.discharge,
            charge: o.charge,
        }
    }

    /// Dispatch for every period of a scenario.
    pub fn dispatch(&self, path: &ScenarioPath) -> Vec<PeriodDispatch> {
        (0..self.horizon())
            .map(|t| self.dispatch_at(t, &path.column(t)))
            .collect()
    }

    /// Generator output at `t` when total renewable availability is `total`.
    pub fn gen_at_total(&self, i: usize, t: usize, total: f64) -> f64 {
        self.gen_intercept[i][t] + self.gen_slope[i][t] * total
    }
}

#[derive(Clone, Debug)]
pub struct AffineVars {
    pub intercept: Vec<Vec<VarId>>,
    pub slope: Vec<Vec<VarId>>,
}

impl AffineVars {
    fn new(
        program: &mut MathProgram,
        prefix: &str,
        ids: &[&str],
        horizon: usize,
        free_slope: bool,
    ) -> Self {
        let mut intercept = Vec::new();
        let mut slope = Vec::new();
        for id in ids {
            intercept.push(
                (0..horizon)
                    .map(|t| program.add_free(format!("{prefix}w[{id},{t}]")))
                    .collect(),
            );
            slope.push(
                (0..horizon)
                    .map(|t| {
                        let name = format!("{prefix}W[{id},{t}]");
                        if free_slope {
                            program.add_free(name)
                        } else {
                            program.add_continuous(name, 0.0, 0.0)
                        }
                    })
                    .collect(),
            );
        }
        Self { intercept, slope }
    }

    /// w_it + W_it·`total` where `total` is an expression or constant.
    pub fn at(&self, i: usize, t: usize, total: f64) -> LinExpr {
        let mut e = LinExpr::var(self.intercept[i][t]);
        e.add_term(self.slope[i][t], total);
        e
    }

    fn read(&self, values: &[f64]) -> (Matrix, Matrix) {
        let r = |m: &Vec<Vec<VarId>>| {
            m.iter()
                .map(|row| row.iter().map(|v| values[v.0]).collect())
                .collect()
        };
        (r(&self.intercept), r(&self.slope))
    }
}

/// Policy coefficients and the worst-case cost epigraph variable in a master problem.
#[derive(Clone, Debug)]
pub struct PolicyVars {
    pub gen: AffineVars,
    pub discharge: AffineVars,
    pub charge: AffineVars,
    pub ren_intercept: Vec<Vec<VarId>>,
    pub ren_slope: Vec<VarId>,
    pub z: VarId,
}

impl PolicyVars {
    /// With `adaptive = false` every slope is fixed at zero.
    pub fn new(program: &mut MathProgram, system: &PowerSystem, adaptive: bool) -> Self {
        let horizon = system.horizon;
        let gid: Vec<&str> = system.generators.iter().map(|g| g.id.as_str()).collect();
        let sid: Vec<&str> = system.storages.iter().map(|s| s.id.as_str()).collect();
        let gen = AffineVars::new(program, "g", &gid, horizon, adaptive);
        let discharge = AffineVars::new(program, "s+", &sid, horizon, adaptive);
        let charge = AffineVars::new(program, "s-", &sid, horizon, adaptive);
        let ren_intercept = system
            .renewables
            .iter()
            .map(|r| {
                (0..horizon)
                    .map(|t| program.add_free(format!("rw[{},{t}]", r.id)))
                    .collect()
            })
            .collect();
        let ren_slope = (0..horizon)
            .map(|t| {
                if adaptive {
                    program.add_free(format!("rW[{t}]"))
                } else {
                    program.add_continuous(format!("rW[{t}]"), 0.0, 0.0)
                }
            })
            .collect();
        let z = program.add_free("z");
        Self {
            gen,
            discharge,
            charge,
            ren_intercept,
            ren_slope,
            z,
        }
    }

    pub fn read(&self, values: &[f64]) -> AffinePolicy {
        let (gen_intercept, gen_slope) = self.gen.read(values);
        let (discharge_intercept, discharge_slope) = self.discharge.read(values);
        let (charge_intercept, charge_slope) = self.charge.read(values);
        AffinePolicy {
            gen_intercept,
            gen_slope,
            discharge_intercept,
            discharge_slope,
            charge_intercept,
            charge_slope,
            ren_intercept: self
                .ren_intercept
                .iter()
                .map(|row| row.iter().map(|v| values[v.0]).collect())
                .collect(),
            ren_slope: self.ren_slope.iter().map(|v| values[v.0]).collect(),
        }
    }

    /// Σ_i W^g_it + Σ_s (W^+_st − W^-_st): the slope of net controllable injection in P_t.
    pub fn net_slope(&self, t: usize) -> LinExpr {
        let mut e = LinExpr::new();
        for row in &self.gen.slope {
            e.add_term(row[t], 1.0);
        }
        for (d, c) in self.discharge.slope.iter().zip(&self.charge.slope) {
            e.add_term(d[t], 1.0).add_term(c[t], -1.0);
        }
        e
    }
}
