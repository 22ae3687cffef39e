use faer::{Mat, Side};
use num_complex::Complex64 as C64;

use super::{LinalgError, LuFactorization, Result, SparseComplexMatrix};

/// Real eigenvalues with their complex eigenvectors (unit Euclidean norm).
#[derive(Debug, Clone)]
pub struct EigenPairs {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<C64>>,
}

/// Full eigendecomposition of a dense Hermitian matrix (row-major).
pub fn dense_hermitian_eigs(n: usize, a: &[C64]) -> Result<EigenPairs> {
    if a.len() != n * n {
        return Err(LinalgError::DimensionMismatch { expected: n * n, found: a.len() });
    }
    let m = Mat::<C64>::from_fn(n, n, |i, j| a[i * n + j]);
    let evd = m
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| LinalgError::Backend(format!("{e:?}")))?;
    let s = evd.S();
    let u = evd.U();
    let values = (0..n).map(|i| s[i].re).collect();
    let vectors = (0..n).map(|c| (0..n).map(|r| u[(r, c)]).collect()).collect();
    Ok(EigenPairs { values, vectors })
}

const MAX_ITERATIONS: usize = 500;

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Twice-iterated modified Gram–Schmidt. Returns false on rank loss.
fn orthonormalize(block: &mut [Vec<C64>]) -> bool {
    for i in 0..block.len() {
        for _ in 0..2 {
            for j in 0..i {
                let (head, tail) = block.split_at_mut(i);
                let p = dot(&head[j], &tail[0]);
                tail[0].iter_mut().zip(&head[j]).for_each(|(x, q)| *x -= p * q);
            }
        }
        let nrm = norm(&block[i]);
        if !(nrm > 1e-300) {
            return false;
        }
        block[i].iter_mut().for_each(|x| *x /= nrm);
    }
    true
}

/// The `k` eigenpairs of a Hermitian matrix closest to `shift`.
///
/// Block inverse iteration on (A − shift·I) with Rayleigh–Ritz extraction.
/// Converged when every returned pair has ‖Av − λv‖ ≤ 1e-8 with ‖v‖ = 1.
/// Pairs are returned in ascending eigenvalue order.
pub fn shift_invert_eigs(a: &SparseComplexMatrix, shift: f64, k: usize) -> Result<EigenPairs> {
    let n = a.dim();
    if k == 0 || k > n {
        return Err(LinalgError::TooManyEigenpairs { requested: k, dimension: n });
    }
    let shifted = a.affine(C64::new(-shift, 0.0), C64::new(1.0, 0.0));
    let lu = LuFactorization::new(&shifted)?;
    let p = n.min((2 * k).max(k + 6));

    let mut seed = 0x9E37_79B9_7F4A_7C15u64;
    let mut rand = || {
        seed ^= seed << 13;
        seed ^= seed >> 7;
        seed ^= seed << 17;
        (seed >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    };
    let mut block: Vec<Vec<C64>> = (0..p).map(|_| (0..n).map(|_| C64::new(rand(), rand())).collect()).collect();
    orthonormalize(&mut block);

    for iteration in 1..=MAX_ITERATIONS {
        for v in block.iter_mut() {
            lu.solve_in_place(v)?;
        }
        if !orthonormalize(&mut block) {
            return Err(LinalgError::NoConvergence { iterations: iteration });
        }
        let av: Vec<Vec<C64>> = block.iter().map(|v| a.matvec(v)).collect();
        let mut g = vec![C64::default(); p * p];
        for i in 0..p {
            for j in 0..p {
                g[i * p + j] = dot(&block[i], &av[j]);
            }
        }
        for i in 0..p {
            for j in 0..i {
                let m = 0.5 * (g[i * p + j] + g[j * p + i].conj());
                g[i * p + j] = m;
                g[j * p + i] = m.conj();
            }
        }
        let ritz = dense_hermitian_eigs(p, &g)?;
        let mut order: Vec<usize> = (0..p).collect();
        order.sort_by(|&x, &y| (ritz.values[x] - shift).abs().total_cmp(&(ritz.values[y] - shift).abs()));

        let combine = |basis: &[Vec<C64>], w: &[C64]| -> Vec<C64> {
            let mut out = vec![C64::default(); n];
            for (b, &c) in basis.iter().zip(w) {
                out.iter_mut().zip(b).for_each(|(o, x)| *o += c * x);
            }
            out
        };
        let new_block: Vec<Vec<C64>> = order.iter().map(|&c| combine(&block, &ritz.vectors[c])).collect();
        let new_av: Vec<Vec<C64>> = order.iter().map(|&c| combine(&av, &ritz.vectors[c])).collect();
        let converged = (0..k).all(|i| {
            let lambda = ritz.values[order[i]];
            let r: f64 = new_av[i]
                .iter()
                .zip(&new_block[i])
                .map(|(x, v)| (x - lambda * v).norm_sqr())
                .sum::<f64>()
                .sqrt();
            r <= 1e-8 * norm(&new_block[i])
        });
        block = new_block;
        if converged {
            let mut pairs: Vec<(f64, Vec<C64>)> =
                (0..k).map(|i| (ritz.values[order[i]], block[i].clone())).collect();
            pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
            let (values, vectors) = pairs.into_iter().unzip();
            return Ok(EigenPairs { values, vectors });
        }
    }
    Err(LinalgError::NoConvergence { iterations: MAX_ITERATIONS })
}

#[cfg(test)]
mod tests {
    use super::super::TripletBuilder;
    use super::*;

    #[test]
    fn dense_eigs_of_pauli_y() {
        let a = [C64::new(0.0, 0.0), C64::new(0.0, -1.0), C64::new(0.0, 1.0), C64::new(0.0, 0.0)];
        let e = dense_hermitian_eigs(2, &a).unwrap();
        assert!((e.values[0] + 1.0).abs() < 1e-14 && (e.values[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn finds_interior_eigenvalues() {
        let n = 200;
        let mut b = TripletBuilder::new(n);
        for i in 0..n {
            b.push(i, i, C64::new(2.0, 0.0));
            if i + 1 < n {
                b.push(i, i + 1, C64::new(-1.0, 0.0));
                b.push(i + 1, i, C64::new(-1.0, 0.0));
            }
        }
        let a = b.finalize().unwrap();
        let exact: Vec<f64> = (1..=n)
            .map(|j| 2.0 - 2.0 * (j as f64 * std::f64::consts::PI / (n + 1) as f64).cos())
            .collect();
        let shift = 1.013;
        let e = shift_invert_eigs(&a, shift, 3).unwrap();
        let mut nearest = exact.clone();
        nearest.sort_by(|x, y| (x - shift).abs().total_cmp(&(y - shift).abs()));
        let mut want = nearest[..3].to_vec();
        want.sort_by(f64::total_cmp);
        for (got, w) in e.values.iter().zip(&want) {
            assert!((got - w).abs() < 1e-10, "{got} vs {w}");
        }
    }

    #[test]
    fn shift_on_eigenvalue_fails() {
        let a = SparseComplexMatrix::diagonal(&[C64::new(1.0, 0.0), C64::new(2.0, 0.0)]);
        assert!(shift_invert_eigs(&a, 1.0, 1).is_err());
    }
}
