//! Gauss rules for the reference elements and their boundary edges.

use super::ElementType;
use crate::math;
use alloc::vec;
use alloc::vec::Vec;

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn weight_sum(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Element rule: 2x2 Gauss for Q4, 3x3 for Q8, 3-point (degree 2) for T3.
pub fn gauss_rule(et: ElementType) -> QuadratureRule {
    match et {
        ElementType::T3 => QuadratureRule {
            points: vec![
                [1.0 / 6.0, 1.0 / 6.0],
                [2.0 / 3.0, 1.0 / 6.0],
                [1.0 / 6.0, 2.0 / 3.0],
            ],
            weights: vec![1.0 / 6.0; 3],
        },
        ElementType::Q4 => {
            let a = 1.0 / math::sqrt(3.0);
            QuadratureRule {
                points: vec![[-a, -a], [a, -a], [a, a], [-a, a]],
                weights: vec![1.0; 4],
            }
        }
        ElementType::Q8 => {
            let a = math::sqrt(0.6);
            let pts_1d = [-a, 0.0, a];
            let w_1d = [5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0];
            let mut points = Vec::with_capacity(9);
            let mut weights = Vec::with_capacity(9);
            for (i, &pi) in pts_1d.iter().enumerate() {
                for (j, &pj) in pts_1d.iter().enumerate() {
                    points.push([pi, pj]);
                    weights.push(w_1d[i] * w_1d[j]);
                }
            }
            QuadratureRule { points, weights }
        }
    }
}

/// 1D edge rule on [-1,1]: 2-point Gauss for linear edges, 3-point for Q8.
pub fn edge_rule(et: ElementType) -> (Vec<f64>, Vec<f64>) {
    match et {
        ElementType::Q8 => {
            let a = math::sqrt(0.6);
            (vec![-a, 0.0, a], vec![5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0])
        }
        _ => {
            let a = 1.0 / math::sqrt(3.0);
            (vec![-a, a], vec![1.0, 1.0])
        }
    }
}
