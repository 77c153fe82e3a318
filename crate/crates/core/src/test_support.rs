//! Test-only oracles that share no code with the evaluation path:
//! truncated lattice sums for ℘, g₂, g₃ and a dense-grid zero counter.
//!
//! Included by unit tests (`crate::test_support`) and by integration tests
//! through `#[path]`, so it depends only on `num_complex`.

#![allow(dead_code)]

use num_complex::Complex64;

/// Σ′ f(m + nτ) over the square `|m|, |n| ≤ n_max`.
fn square_sum(tau: Complex64, n_max: i64, f: impl Fn(Complex64) -> Complex64) -> Complex64 {
    let mut total = Complex64::new(0.0, 0.0);
    for n in -n_max..=n_max {
        let mut row = Complex64::new(0.0, 0.0);
        for m in -n_max..=n_max {
            if m == 0 && n == 0 {
                continue;
            }
            row += f(Complex64::new(m as f64, 0.0) + tau * n as f64);
        }
        total += row;
    }
    total
}

/// The square truncations have a tail expanding in powers of `1/N` starting at `N⁻²`;
/// two Richardson steps on `N, N/2, N/4` remove the `N⁻²` and `N⁻³` terms.
fn extrapolated(tau: Complex64, n_max: i64, f: impl Fn(Complex64) -> Complex64 + Copy) -> Complex64 {
    let s1 = square_sum(tau, n_max, f);
    let s2 = square_sum(tau, n_max / 2, f);
    let s4 = square_sum(tau, n_max / 4, f);
    let r1 = (s1 * 4.0 - s2) / 3.0;
    let r2 = (s2 * 4.0 - s4) / 3.0;
    (r1 * 8.0 - r2) / 7.0
}

/// `g₂ = 60 Σ′ ω⁻⁴`.
pub fn g2_lattice_sum(tau: Complex64, n_max: i64) -> Complex64 {
    extrapolated(tau, n_max, |w| w.powi(-4)) * 60.0
}

/// `g₃ = 140 Σ′ ω⁻⁶`.
pub fn g3_lattice_sum(tau: Complex64, n_max: i64) -> Complex64 {
    extrapolated(tau, n_max, |w| w.powi(-6)) * 140.0
}

/// ℘(z) = z⁻² + Σ′ [(z−ω)⁻² − ω⁻²].
pub fn wp_lattice_sum(z: Complex64, tau: Complex64, n_max: i64) -> Complex64 {
    z.powi(-2) + extrapolated(tau, n_max, move |w| (z - w).powi(-2) - w.powi(-2))
}

/// Raw, unextrapolated truncation of `g₂`, for measuring the tail.
pub fn g2_raw(tau: Complex64, n_max: i64) -> Complex64 {
    square_sum(tau, n_max, |w| w.powi(-4)) * 60.0
}

/// Zero count of `f` in `[x0, x1] × [y0, y1]` from the discrete argument
/// principle on every cell of an `n × n` point grid: each cell contributes
/// the sum of principal argument increments around its four corners.
pub fn grid_zero_count(f: impl Fn(Complex64) -> Complex64 + Sync, rect: [f64; 4], n: usize) -> i64 {
    let [x0, x1, y0, y1] = rect;
    let pt = |i: usize, j: usize| {
        Complex64::new(
            x0 + (x1 - x0) * i as f64 / (n - 1) as f64,
            y0 + (y1 - y0) * j as f64 / (n - 1) as f64,
        )
    };
    let workers = std::thread::available_parallelism().map_or(4, |p| p.get());
    let chunk = n.div_ceil(workers);
    let rows: Vec<Vec<Complex64>> = std::thread::scope(|s| {
        let f = &f;
        let pt = &pt;
        let handles: Vec<_> = (0..n)
            .step_by(chunk)
            .map(|j0| {
                s.spawn(move || {
                    (j0..(j0 + chunk).min(n))
                        .map(|j| (0..n).map(|i| f(pt(i, j))).collect::<Vec<_>>())
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles.into_iter().flat_map(|h| h.join().unwrap()).collect()
    });
    let mut count = 0i64;
    for j in 0..n - 1 {
        for i in 0..n - 1 {
            let ring = [rows[j][i], rows[j][i + 1], rows[j + 1][i + 1], rows[j + 1][i]];
            let turn: f64 = (0..4).map(|q| (ring[(q + 1) % 4] / ring[q]).arg()).sum();
            count += (turn / std::f64::consts::TAU).round() as i64;
        }
    }
    count
}
