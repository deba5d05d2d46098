//! Shared test problems: quadratic bowls and linear least squares with
//! closed-form optima, used as independent oracles for the trainers.
//!
//! Each integration-test binary compiles this module separately and uses
//! a different subset of it.
#![allow(dead_code)]

use mleann::flops::FlopLedger;
use mleann::trainers::{Objective, ResidualObjective};
use mleann::Result;
use nalgebra::{DMatrix, DVector};

/// Deterministic uniform(0,1) stream independent of the crate's RNG stack.
pub struct SplitMix(pub u64);

impl SplitMix {
    pub fn next_f64(&mut self) -> f64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
        (z >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn symmetric(&mut self) -> f64 {
        2.0 * self.next_f64() - 1.0
    }
}

/// psi = 0.5 w'Hw with symmetric positive definite H.
pub struct Quadratic {
    pub h: DMatrix<f64>,
}

impl Quadratic {
    /// Random well-conditioned SPD problem.
    pub fn random(n: usize, rng: &mut SplitMix) -> Self {
        let a = DMatrix::from_fn(n, n, |_, _| rng.symmetric());
        Self {
            h: &a * a.transpose() + DMatrix::identity(n, n),
        }
    }
}

impl Objective for Quadratic {
    fn dim(&self) -> usize {
        self.h.nrows()
    }
    fn value(&self, w: &[f64], _fl: &mut FlopLedger) -> Result<f64> {
        let w = DVector::from_column_slice(w);
        Ok(0.5 * w.dot(&(&self.h * &w)))
    }
    fn value_grad(&self, w: &[f64], _fl: &mut FlopLedger) -> Result<(f64, Vec<f64>)> {
        let w = DVector::from_column_slice(w);
        let g = &self.h * &w;
        Ok((0.5 * w.dot(&g), g.as_slice().to_vec()))
    }
}

/// Residuals `e_j = a_j . w - t_j`; optimum solves the normal equations.
pub struct LinearLsq {
    /// n x p design rows.
    pub design: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
}

impl LinearLsq {
    pub fn random(n: usize, p: usize, rng: &mut SplitMix) -> Self {
        let design: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..p).map(|_| rng.symmetric() * 2.0).collect())
            .collect();
        let targets = (0..n).map(|_| rng.symmetric()).collect();
        Self { design, targets }
    }

    fn params(&self) -> usize {
        self.design[0].len()
    }

    /// Closed-form optimum from the normal equations `A'A w = A't`.
    pub fn normal_equation_optimum(&self) -> DVector<f64> {
        let n = self.design.len();
        let p = self.params();
        let a = DMatrix::from_fn(n, p, |i, j| self.design[i][j]);
        let t = DVector::from_vec(self.targets.clone());
        let ata = a.transpose() * &a;
        let att = a.transpose() * t;
        ata.cholesky().expect("full-rank design").solve(&att)
    }
}

impl Objective for LinearLsq {
    fn dim(&self) -> usize {
        self.params()
    }
    fn value(&self, w: &[f64], _fl: &mut FlopLedger) -> Result<f64> {
        Ok(self
            .design
            .iter()
            .zip(&self.targets)
            .map(|(a, t)| {
                let e: f64 = a.iter().zip(w).map(|(ai, wi)| ai * wi).sum::<f64>() - t;
                e * e
            })
            .sum())
    }
    fn value_grad(&self, w: &[f64], _fl: &mut FlopLedger) -> Result<(f64, Vec<f64>)> {
        let mut g = vec![0.0; w.len()];
        let mut psi = 0.0;
        for (a, t) in self.design.iter().zip(&self.targets) {
            let e: f64 = a.iter().zip(w).map(|(ai, wi)| ai * wi).sum::<f64>() - t;
            psi += e * e;
            for (gi, ai) in g.iter_mut().zip(a) {
                *gi += 2.0 * e * ai;
            }
        }
        Ok((psi, g))
    }
}

impl ResidualObjective for LinearLsq {
    fn residual_count(&self) -> usize {
        self.design.len()
    }
    fn jacobian(&self, w: &[f64], _fl: &mut FlopLedger) -> Result<(DMatrix<f64>, DVector<f64>)> {
        let p = self.params();
        let n = self.design.len();
        let mut j = DMatrix::zeros(p, n);
        let mut e = DVector::zeros(n);
        for (col, (a, t)) in self.design.iter().zip(&self.targets).enumerate() {
            for (i, ai) in a.iter().enumerate() {
                j[(i, col)] = *ai;
            }
            e[col] = a.iter().zip(w).map(|(ai, wi)| ai * wi).sum::<f64>() - t;
        }
        Ok((j, e))
    }
}
