//! Property-based checks of structural invariants across modules.

use num_complex::Complex64 as C64;
use proptest::prelude::*;

use qwave_core::analytic::relative_error;
use qwave_core::dtbc1d::{kernel_coefficients, kernel_ratio, GaugeFactors};
use qwave_core::grid::{build_grid_1d, build_grid_2d, reduce_mesh, BoundaryLayout};
use qwave_core::linalg::{lu_solve, tridiag_eigs, SparseComplexMatrix};
use qwave_core::potential::{Potential, RingGuide, WaveComponent, Waveform};
use qwave_core::sim1d::{Integrator, Method1D, Problem1D, Transient1D};
use qwave_core::stencils::{d1, d2, tensor_laplacian_2d, Closure, StencilOrder};
use qwave_core::units::{parse_quantity, Dimension, UnitSystem};

fn order() -> impl Strategy<Value = StencilOrder> {
    prop::sample::select(StencilOrder::ALL.to_vec())
}

fn complex_vec(n: usize) -> impl Strategy<Value = Vec<C64>> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64).prop_map(|(a, b)| C64::new(a, b)), n)
}

fn poly(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &a| acc * x + a)
}

fn poly_derivative(c: &[f64], m: usize, x: f64) -> f64 {
    let mut c = c.to_vec();
    for _ in 0..m {
        c = c.iter().enumerate().skip(1).map(|(k, &a)| k as f64 * a).collect();
    }
    poly(&c, x)
}

/// Conjugate gradients for Hermitian positive definite systems.
fn conjugate_gradient(a: &SparseComplexMatrix, b: &[C64]) -> Vec<C64> {
    let dot = |u: &[C64], v: &[C64]| u.iter().zip(v).map(|(x, y)| x.conj() * y).sum::<C64>();
    let mut x = vec![C64::default(); b.len()];
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut rr = dot(&r, &r).re;
    for _ in 0..10 * b.len() {
        if rr.sqrt() < 1e-15 {
            break;
        }
        let ap = a.matvec(&p);
        let alpha = rr / dot(&p, &ap).re;
        x.iter_mut().zip(&p).for_each(|(x, p)| *x += alpha * p);
        r.iter_mut().zip(&ap).for_each(|(r, q)| *r -= alpha * q);
        let next = dot(&r, &r).re;
        p = r.iter().zip(&p).map(|(r, p)| r + next / rr * p).collect();
        rr = next;
    }
    x
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn reduced_index_map_round_trips(
        cells1 in 8usize..40, cells2 in 8usize..24, omega in 10.0..80.0f64, threshold in 20.0..400.0f64,
    ) {
        let units = UnitSystem::default();
        let (length, width) = (0.5 * cells1 as f64, 0.5 * cells2 as f64);
        let full = build_grid_2d(length, width, 0.5, BoundaryLayout::Dtbc).unwrap();
        let v = Potential::ParabolicGuide { omega, center: 0.5 * width };
        let Ok(g) = reduce_mesh(&full, |x1, x2| v.value_2d(&units, x1, x2, 0.0), threshold) else {
            return Ok(());
        };
        for (r, &f) in g.retained().iter().enumerate() {
            prop_assert_eq!(g.reduced(f), Some(r));
            let (j1, j2) = g.split(f);
            prop_assert_eq!(g.full_index(j1, j2), f);
        }
        let reduced: Vec<usize> = (0..g.len()).collect();
        let expanded = g.expand(&reduced);
        for (r, &f) in g.retained().iter().enumerate() {
            prop_assert_eq!(expanded[f], r);
        }
    }

    #[test]
    fn potential_evaluation_is_pure(x1 in -10.0..310.0f64, x2 in -5.0..95.0f64, t in 0.0..10.0f64) {
        let units = UnitSystem::default();
        let bias = Waveform::constant(-30.0)
            .with(WaveComponent::Burst { t0: 1.0, t1: 5.0, amplitude: 10.0, frequency: 3.0 });
        let ramp = Potential::Ramp { start: 40.0, end: 80.0, voltage: bias };
        prop_assert_eq!(ramp.value_1d(&units, x1, t).to_bits(), ramp.value_1d(&units, x1, t).to_bits());
        let ring = Potential::Ring(RingGuide::standard());
        prop_assert_eq!(ring.value_2d(&units, x1, x2, t).to_bits(), ring.value_2d(&units, x1, x2, t).to_bits());
    }

    #[test]
    fn grid_span_reconstructs_device_length(n in 4usize..2000, dx in 0.01..2.0f64) {
        let length = n as f64 * dx;
        let g = build_grid_1d(length, dx, BoundaryLayout::Dtbc).unwrap();
        prop_assert_eq!(g.device_hi() - g.device_lo(), n);
        let span = g.x(g.device_hi()) - g.x(g.device_lo());
        let ulp = f64::EPSILON * length;
        prop_assert!((span - length).abs() <= ulp, "{} vs {}", span, length);
    }

    #[test]
    fn stencils_are_exact_on_polynomials(
        o in order(), coeffs in prop::collection::vec(-2.0..2.0f64, 8), dx in 0.1..1.0f64,
    ) {
        let p = o.accuracy() as usize;
        let n = 30;
        let sample = |c: &[f64]| -> Vec<C64> { (0..n).map(|j| C64::new(poly(c, j as f64 * dx), 0.0)).collect() };
        let h = o.half_width();
        let c2 = &coeffs[..p + 2];
        let got = d2(o, dx, n, Closure::Dirichlet).unwrap().matrix.matvec(&sample(c2));
        for j in h..n - h {
            let want = poly_derivative(c2, 2, j as f64 * dx);
            prop_assert!((got[j].re - want).abs() <= 1e-7 * (1.0 + want.abs()) / (dx * dx), "d2 row {}", j);
        }
        let c1 = &coeffs[..p + 1];
        let got = d1(o, dx, n, Closure::Dirichlet).unwrap().matrix.matvec(&sample(c1));
        for j in h..n - h {
            let want = poly_derivative(c1, 1, j as f64 * dx);
            prop_assert!((got[j].re - want).abs() <= 1e-8 * (1.0 + want.abs()) / dx, "d1 row {}", j);
        }
    }

    #[test]
    fn interior_second_derivative_rows_are_real_and_symmetric(o in order(), dx in 0.05..2.0f64) {
        let n = 25;
        let m = d2(o, dx, n, Closure::Neumann).unwrap().matrix;
        let h = o.half_width();
        for i in h..n - h {
            for s in 1..=h {
                let (l, r) = (m.get(i, i - s), m.get(i, i + s));
                prop_assert_eq!(l.im, 0.0);
                prop_assert_eq!(l.re.to_bits(), r.re.to_bits());
            }
            prop_assert_eq!(m.get(i, i).im, 0.0);
        }
    }

    #[test]
    fn reduced_laplacian_is_restricted_full_operator(
        o in order(), mask in prop::collection::vec(any::<bool>(), 12 * 9), values in complex_vec(12 * 9),
    ) {
        let (n1, n2, dx) = (12, 9, 0.5);
        let a = d2(o, dx, n1, Closure::Dirichlet).unwrap().matrix;
        let b = d2(o, dx, n2, Closure::Dirichlet).unwrap().matrix;
        let full = tensor_laplacian_2d(&a, &b, n1, n2).unwrap();
        let keep: Vec<usize> = (0..n1 * n2).filter(|&i| mask[i]).collect();
        prop_assume!(!keep.is_empty());
        let reduced = full.restrict(&keep);
        let u: Vec<C64> = keep.iter().map(|&i| values[i]).collect();
        let mut expanded = vec![C64::default(); n1 * n2];
        for (&i, &v) in keep.iter().zip(&u) {
            expanded[i] = v;
        }
        let via_full = full.matvec(&expanded);
        let via_reduced = reduced.matvec(&u);
        for (r, &i) in keep.iter().enumerate() {
            prop_assert!((via_full[i] - via_reduced[r]).norm() <= 1e-12 * (1.0 + via_full[i].norm()));
        }
    }

    #[test]
    fn relative_error_is_symmetric_in_the_difference(a in complex_vec(16), b in complex_vec(16)) {
        let norm = |v: &[C64]| v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        prop_assume!(norm(&a) > 1e-3 && norm(&b) > 1e-3);
        let ab = relative_error(&a, &b).unwrap() * norm(&b);
        let ba = relative_error(&b, &a).unwrap() * norm(&a);
        prop_assert!((ab - ba).abs() <= 1e-12 * (1.0 + ab));
        prop_assert_eq!(relative_error(&a, &a).unwrap(), 0.0);
        prop_assert_eq!(ab == 0.0, a == b);
    }

    #[test]
    fn lu_agrees_with_conjugate_gradients(n in 2usize..24, entries in complex_vec(24 * 24), rhs in complex_vec(24)) {
        // A = BᴴB + n·I is Hermitian positive definite
        let bm = |i: usize, j: usize| entries[i * 24 + j];
        let mut dense = vec![C64::default(); n * n];
        for i in 0..n {
            for j in 0..n {
                let mut s: C64 = (0..n).map(|k| bm(k, i).conj() * bm(k, j)).sum();
                if i == j {
                    s += n as f64;
                }
                dense[i * n + j] = s;
            }
        }
        let a = SparseComplexMatrix::from_dense(n, &dense).unwrap();
        let b = &rhs[..n];
        let x = lu_solve(&a, b).unwrap();
        let y = conjugate_gradient(&a, b);
        let scale = y.iter().map(|v| v.norm()).fold(0.0, f64::max);
        for (u, v) in x.iter().zip(&y) {
            prop_assert!((u - v).norm() <= 1e-9 * scale.max(1.0));
        }
    }

    #[test]
    fn tridiagonal_pairs_satisfy_their_rows(
        diag in prop::collection::vec(-50.0..50.0f64, 2..40), off in prop::collection::vec(-20.0..20.0f64, 40),
    ) {
        let n = diag.len();
        let e = &off[..n - 1];
        let norm = (0..n)
            .map(|i| diag[i].abs() + if i > 0 { e[i - 1].abs() } else { 0.0 } + if i + 1 < n { e[i].abs() } else { 0.0 })
            .fold(0.0, f64::max);
        let eig = tridiag_eigs(&diag, e, n, 1.0).unwrap();
        for (lambda, v) in eig.values.iter().zip(&eig.vectors) {
            for i in 0..n {
                let mut r = (diag[i] - lambda) * v[i];
                if i > 0 { r += e[i - 1] * v[i - 1]; }
                if i + 1 < n { r += e[i] * v[i + 1]; }
                prop_assert!(r.abs() <= 1e-12 * norm.max(1.0), "residual {} at row {}", r, i);
            }
        }
        prop_assert!(eig.values.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn gauge_factors_have_unit_modulus(
        dt in 1e-5..1e-3f64, energy in 0.1..500.0f64, v0 in -100.0..100.0f64,
        walk in prop::collection::vec(-50.0..50.0f64, 50),
    ) {
        let u = UnitSystem::default();
        let mut g = GaugeFactors::new(&u, dt, energy, v0);
        for &v in &walk {
            g.push_right_potential(v);
        }
        for n in 0..walk.len() {
            prop_assert!((g.beta(n).norm() - 1.0).abs() <= 1e-14);
            prop_assert!((g.gamma(n).norm() - 1.0).abs() <= 1e-14);
            prop_assert!((g.epsilon(n).unwrap().norm() - 1.0).abs() <= 1e-14);
        }
    }

    #[test]
    fn kernel_is_bounded_and_sums_converge(dx in 0.1..2.0f64, dt in 1e-5..1e-3f64) {
        let u = UnitSystem::default();
        let k = kernel_coefficients(kernel_ratio(&u, dx, dt), 4000);
        let s = k.coefficients();
        prop_assert!(s.iter().all(|c| c.re.is_finite() && c.im.is_finite()));
        let head = s[..4].iter().map(|c| c.norm()).fold(0.0, f64::max);
        prop_assert!(s.iter().all(|c| c.norm() <= head * (1.0 + 1e-12)));
        // a unit-modulus history: partial sums stay bounded
        let history: Vec<C64> = (0..4000).map(|n| C64::from_polar(1.0, 0.37 * n as f64)).collect();
        let partial: Vec<f64> = [1000, 2000, 4000].iter().map(|&m| k.convolve(&history[..m]).norm()).collect();
        let total: f64 = s.iter().map(|c| c.norm()).sum();
        prop_assert!(partial.iter().all(|&p| p <= total));
    }

    #[test]
    fn quantities_round_trip(v in -1e6..1e6f64) {
        prop_assert_eq!(parse_quantity(&format!("{v} nm"), Dimension::Length).unwrap(), v);
        prop_assert_eq!(parse_quantity(&format!("{v}meV"), Dimension::Energy).unwrap(), v);
        let wrong = parse_quantity(&format!("{v} nm"), Dimension::Time);
        prop_assert!(wrong.is_err());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn crank_nicolson_conserves_norm_in_a_closed_box(
        samples in prop::collection::vec(-50.0..50.0f64, 12), o in order(), x0 in 10.0..30.0f64,
    ) {
        let units = UnitSystem::default();
        let v = Potential::Tabulated { x0: 0.0, dx: 40.0 / 11.0, values: samples };
        let p = Problem1D::new(units, 40.0, 0.5, v, o, Method1D::Closed(Closure::Dirichlet)).unwrap();
        let psi: Vec<C64> = (0..p.grid.len())
            .map(|j| {
                let d = p.grid.x(j) - x0;
                C64::from_polar((-(d / 3.0).powi(2)).exp(), 0.8 * d)
            })
            .collect();
        let mut run = Transient1D::new(p, Integrator::CrankNicolson, 1e-4, psi).unwrap();
        let mut norm = run.total_norm_sqr();
        for _ in 0..20 {
            run.advance(1).unwrap();
            let next = run.total_norm_sqr();
            prop_assert!((next / norm - 1.0).abs() <= 1e-13, "per-step drift {}", next / norm - 1.0);
            norm = next;
        }
    }

    #[test]
    fn dtbc_run_equals_whole_space_run_on_the_device(
        inner in prop::collection::vec(-40.0..40.0f64, 7), k0 in -1.0..1.0f64,
    ) {
        let units = UnitSystem::default();
        let mut values = vec![0.0];
        values.extend(inner);
        values.push(0.0);
        let v = Potential::Tabulated { x0: 0.0, dx: 5.0, values };
        let packet = |x: f64| if (0.0..=40.0).contains(&x) {
            C64::from_polar((-((x - 20.0) / 2.0).powi(2)).exp(), k0 * x)
        } else {
            C64::default()
        };
        let open = Problem1D::new(units, 40.0, 0.5, v.clone(), StencilOrder::Second, Method1D::Dtbc).unwrap();
        let whole = Problem1D::with_origin(units, -200.0, 440.0, 0.5, v, StencilOrder::Second,
            Method1D::Closed(Closure::Dirichlet)).unwrap();
        let init = |p: &Problem1D| (0..p.grid.len()).map(|j| packet(p.grid.x(j))).collect::<Vec<_>>();
        let mut a = Transient1D::new(open.clone(), Integrator::CrankNicolson, 1e-4, init(&open)).unwrap();
        let mut b = Transient1D::new(whole.clone(), Integrator::CrankNicolson, 1e-4, init(&whole)).unwrap();
        a.advance(150).unwrap();
        b.advance(150).unwrap();
        let dev: Vec<C64> = a.psi()[open.grid.device()].to_vec();
        let offset = whole.grid.device_lo() + 400;
        let reference: Vec<C64> = b.psi()[offset..offset + dev.len()].to_vec();
        prop_assert!((whole.grid.x(offset) - 0.0).abs() < 1e-9);
        let err = relative_error(&dev, &reference).unwrap();
        prop_assert!(err <= 1e-11, "relative difference {}", err);
    }
}
