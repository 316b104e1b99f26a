//! Parameter vectors with the fixed block layout: the k heterogeneous
//! parameters of unit i occupy indices [i·k, (i+1)·k), and the p
//! population-level parameters occupy the final p slots.

use std::ops::{Deref, DerefMut};

#[derive(Clone, Debug, PartialEq)]
pub struct ParameterVector {
    values: Vec<f64>,
}

impl ParameterVector {
    pub fn new(values: Vec<f64>) -> Self {
        debug_assert!(values.iter().all(|v| v.is_finite()));
        ParameterVector { values }
    }

    pub fn zeros(dim: usize) -> Self {
        ParameterVector { values: vec![0.0; dim] }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    /// Heterogeneous block of unit `i` for layout with `unit_dim` parameters
    /// per unit.
    pub fn unit_block(&self, i: usize, unit_dim: usize) -> &[f64] {
        &self.values[i * unit_dim..(i + 1) * unit_dim]
    }

    /// Final `pop_dim` entries.
    pub fn pop_block(&self, pop_dim: usize) -> &[f64] {
        &self.values[self.values.len() - pop_dim..]
    }
}

impl From<Vec<f64>> for ParameterVector {
    fn from(values: Vec<f64>) -> Self {
        ParameterVector::new(values)
    }
}

impl Deref for ParameterVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.values
    }
}

impl DerefMut for ParameterVector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
}
