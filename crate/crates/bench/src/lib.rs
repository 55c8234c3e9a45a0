//! Deterministic inputs shared by the benchmarks.

use spectral_sde::{Matrix, SymmetricMatrixState};

/// Symmetric `p×p` matrix with well separated eigenvalues and dense
/// off-diagonal coupling.
pub fn test_matrix(p: usize) -> SymmetricMatrixState {
    let m = Matrix::from_fn(p, p, |i, j| {
        if i == j {
            1.0 + i as f64
        } else {
            let k = (i + j + 1) as f64;
            0.3 * (k * 0.7).sin() / k
        }
    });
    SymmetricMatrixState::symmetrize(&m).expect("square")
}

/// Strictly ascending positive eigenvalues `1, 2, …, p`.
pub fn ascending(p: usize) -> Vec<f64> {
    (1..=p).map(|i| i as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_are_well_formed() {
        let x = test_matrix(5);
        assert!(x.real_part().is_symmetric());
        let l = spectral_sde::linalg::eigenvalues(&x, 1e-10).unwrap();
        assert!(spectral_sde::linalg::min_gap(&l) > 0.1);
        assert_eq!(ascending(3), vec![1.0, 2.0, 3.0]);
    }
}
