use super::{LinalgError, Result};

/// Eigenpairs of a real symmetric tridiagonal matrix.
#[derive(Debug, Clone)]
pub struct TridiagEigen {
    /// Ascending eigenvalues.
    pub values: Vec<f64>,
    /// One vector per eigenvalue, normalized so `weight * Σ v² = 1`.
    pub vectors: Vec<Vec<f64>>,
}

const MAX_SWEEPS: usize = 64;

/// Implicit QL iteration with Wilkinson shifts on the full spectrum, then
/// the `k_lowest` smallest eigenpairs are returned.
///
/// `offdiag[i]` couples rows `i` and `i + 1`. Each vector is scaled so that
/// `weight * Σ v_i² = 1` and its largest-magnitude entry is positive.
pub fn tridiag_eigs(diag: &[f64], offdiag: &[f64], k_lowest: usize, weight: f64) -> Result<TridiagEigen> {
    let n = diag.len();
    if n == 0 || k_lowest > n || k_lowest == 0 {
        return Err(LinalgError::TooManyEigenpairs { requested: k_lowest, dimension: n });
    }
    if offdiag.len() + 1 != n {
        return Err(LinalgError::DimensionMismatch { expected: n - 1, found: offdiag.len() });
    }
    let mut d = diag.to_vec();
    let mut e = vec![0.0; n];
    e[..n - 1].copy_from_slice(offdiag);
    // z[r * n + c]: component r of eigenvector c
    let mut z = vec![0.0; n * n];
    for i in 0..n {
        z[i * n + i] = 1.0;
    }

    for l in 0..n {
        let mut sweeps = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            sweeps += 1;
            if sweeps > MAX_SWEEPS {
                return Err(LinalgError::NoConvergence { iterations: sweeps });
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut deflated = false;
            for i in (l..m).rev() {
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                for k in 0..n {
                    let zf = z[k * n + i + 1];
                    let zi = z[k * n + i];
                    z[k * n + i + 1] = s * zi + c * zf;
                    z[k * n + i] = c * zi - s * zf;
                }
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[a].total_cmp(&d[b]));
    let scale = 1.0 / weight.sqrt();
    let mut values = Vec::with_capacity(k_lowest);
    let mut vectors = Vec::with_capacity(k_lowest);
    for &c in order.iter().take(k_lowest) {
        let mut v: Vec<f64> = (0..n).map(|r| z[r * n + c]).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let peak = v.iter().copied().fold(0.0f64, |a, x| if x.abs() > a.abs() { x } else { a });
        let sign = if peak < 0.0 { -1.0 } else { 1.0 };
        v.iter_mut().for_each(|x| *x *= sign * scale / norm);
        values.push(d[c]);
        vectors.push(v);
    }
    Ok(TridiagEigen { values, vectors })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn dirichlet_laplacian_closed_form() {
        let m = 50;
        let h = 0.7;
        let t = 1.0 / (h * h);
        let eig = tridiag_eigs(&vec![2.0 * t; m], &vec![-t; m - 1], m, h).unwrap();
        for (j, &v) in eig.values.iter().enumerate() {
            let exact = 2.0 * t * (1.0 - ((j + 1) as f64 * PI / (m + 1) as f64).cos());
            assert!((v - exact).abs() < 1e-12 * 4.0 * t, "{j}: {v} vs {exact}");
        }
        for a in 0..m {
            for b in 0..m {
                let dot: f64 = h * eig.vectors[a].iter().zip(&eig.vectors[b]).map(|(x, y)| x * y).sum::<f64>();
                let expect = if a == b { 1.0 } else { 0.0 };
                assert!((dot - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rejects_oversized_request() {
        assert!(tridiag_eigs(&[1.0, 2.0], &[0.5], 3, 1.0).is_err());
    }

    #[test]
    fn sign_convention() {
        let eig = tridiag_eigs(&[1.0, 3.0, 2.0], &[0.3, -0.7], 3, 1.0).unwrap();
        for v in &eig.vectors {
            let peak = v.iter().copied().fold(0.0f64, |a, x| if x.abs() > a.abs() { x } else { a });
            assert!(peak > 0.0);
        }
    }
}
