//! Trust values: the dominant left eigenvector of the normalized rating
//! matrix.
//!
//! The adjacency matrix is row-stochastic (each row of outgoing ratings
//! sums to 1), so trust is the stationary distribution of the chain: power
//! iteration runs on the transpose and the spectral radius comes out as 1.
//! The matrix is strictly positive after smoothing, which makes that
//! stationary vector unique and strictly positive.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ids::PlayerId;
use crate::rating::RatingGraph;

/// Power-iteration parameters.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Successive-iterate L1 distance below which iteration stops.
    pub tolerance: f64,
    /// Hard iteration cap; exceeding it is an error.
    pub max_iterations: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        // The cap leaves room for graphs whose only cross-component edges
        // are the smoothed ones; those converge at rate (1 - smoothing).
        Self {
            tolerance: 1e-10,
            max_iterations: 50_000,
        }
    }
}

/// Stationary distribution of a row-stochastic matrix, with solver
/// diagnostics.
#[derive(Debug, Clone)]
pub struct StationaryResult {
    pub values: Vec<f64>,
    pub spectral_radius: f64,
    pub iterations: usize,
    pub residual: f64,
}

/// Per-player trust values for one image, summing to 1.
#[derive(Debug, Clone)]
pub struct TrustScores {
    players: Vec<PlayerId>,
    values: Vec<f64>,
    spectral_radius: f64,
    iterations: usize,
    residual: f64,
}

impl TrustScores {
    pub fn players(&self) -> &[PlayerId] {
        &self.players
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, player: &PlayerId) -> Option<f64> {
        self.players
            .iter()
            .position(|p| p == player)
            .map(|i| self.values[i])
    }

    /// Spectral radius estimate; 1 for a stochastic matrix.
    pub fn spectral_radius(&self) -> f64 {
        self.spectral_radius
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// L1 norm of `A' * t - rho * t` at the returned vector.
    pub fn residual(&self) -> f64 {
        self.residual
    }
}

/// Multiplies the transpose of the row-major matrix with `x`.
fn transpose_apply(matrix: &[f64], n: usize, x: &[f64], out: &mut [f64]) {
    out.fill(0.0);
    for p in 0..n {
        let xp = x[p];
        let row = &matrix[p * n..(p + 1) * n];
        for q in 0..n {
            out[q] += row[q] * xp;
        }
    }
}

/// Power iteration for the stationary distribution of a strictly positive
/// row-stochastic matrix (row-major, `n` x `n`): starts from the uniform
/// vector, applies the transpose and L1-normalizes each step, and stops
/// once successive iterates are within the tolerance.
pub fn stationary_distribution(
    matrix: &[f64],
    n: usize,
    config: &SolverConfig,
) -> Result<StationaryResult> {
    assert_eq!(matrix.len(), n * n, "matrix must be n x n row-major");
    let mut current = vec![1.0 / n as f64; n];
    let mut next = vec![0.0; n];

    let mut iterations = 0;
    let mut converged = false;
    let mut delta = f64::INFINITY;
    while iterations < config.max_iterations {
        transpose_apply(matrix, n, &current, &mut next);
        iterations += 1;
        let norm: f64 = next.iter().map(|v| v.abs()).sum();
        for v in next.iter_mut() {
            *v /= norm;
        }
        delta = current
            .iter()
            .zip(next.iter())
            .map(|(a, b)| (a - b).abs())
            .sum();
        std::mem::swap(&mut current, &mut next);
        if delta <= config.tolerance {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NoConvergence {
            iterations,
            residual: delta,
        });
    }

    // Exact renormalization, then the residual at the solution.
    let sum: f64 = current.iter().sum();
    for v in current.iter_mut() {
        *v /= sum;
    }
    transpose_apply(matrix, n, &current, &mut next);
    let rho: f64 = next.iter().sum();
    let residual: f64 = current
        .iter()
        .zip(next.iter())
        .map(|(t, at)| (at - rho * t).abs())
        .sum();

    Ok(StationaryResult {
        values: current,
        spectral_radius: rho,
        iterations,
        residual,
    })
}

/// Computes the trust values of a rating graph.
pub fn trust_scores(graph: &RatingGraph, config: &SolverConfig) -> Result<TrustScores> {
    let n = graph.len();
    debug_assert!(n >= 2);
    let matrix: Vec<f64> = graph.normalized_rows().flatten().copied().collect();
    let result = stationary_distribution(&matrix, n, config)?;
    debug_assert!(result.values.iter().all(|&v| v > 0.0));
    Ok(TrustScores {
        players: graph.players().to_vec(),
        values: result.values,
        spectral_radius: result.spectral_radius,
        iterations: result.iterations,
        residual: result.residual,
    })
}
