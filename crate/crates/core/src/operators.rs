//! Discrete operators of the scheme.
//!
//! `C` discretizes `L u = -u_xx - u_x / x` with second-order central
//! differences. It is assembled directly from its closed-form entries
//!
//! ```text
//! C_ii     =  2 / h^2
//! C_i,i-1  = -(1 - 1/(2i)) / h^2      i = 2..N
//! C_i,i+1  = -(1 + 1/(2i)) / h^2      i = 1..N-1
//! ```
//!
//! The nonlinearity `sin(2u) / (2x^2)` is split as `g(u) * u / x^2` with
//! `g(y) = sin(2y) / (2y)`, giving the diagonal operator `G(u) D^-2`.

use crate::error::{Error, Result};
use crate::grid::{Grid, GridTag, StateVector};
use crate::scalar::Real;

/// `g(y) = sin(2y) / (2y)` with `g(0) = 1`. Even, with range `[-0.2173, 1]`.
pub fn g<T: Real>(y: T) -> T {
    if y.abs() < T::lit(1e-4) {
        let z2 = T::lit(4.0) * y * y;
        T::one() - z2 / T::lit(6.0) + z2 * z2 / T::lit(120.0)
    } else {
        let z = y + y;
        z.sin() / z
    }
}

/// Three-band matrix on a grid: `sub[k]` is entry `(k+1, k)`, `sup[k]` is
/// entry `(k, k+1)` (zero-based rows).
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiagonal<T> {
    pub sub: Vec<T>,
    pub main: Vec<T>,
    pub sup: Vec<T>,
    tag: GridTag,
}

impl<T: Real> Tridiagonal<T> {
    pub fn new(grid: &Grid<T>, sub: Vec<T>, main: Vec<T>, sup: Vec<T>) -> Result<Self> {
        let n = grid.n();
        if main.len() != n || sub.len() != n - 1 || sup.len() != n - 1 {
            return Err(Error::InvalidConfig(format!(
                "band lengths ({}, {}, {}) do not fit N = {n}",
                sub.len(),
                main.len(),
                sup.len()
            )));
        }
        Ok(Self { sub, main, sup, tag: grid.tag() })
    }

    pub fn identity(grid: &Grid<T>) -> Self {
        let n = grid.n();
        Self { sub: vec![T::zero(); n - 1], main: vec![T::one(); n], sup: vec![T::zero(); n - 1], tag: grid.tag() }
    }

    pub fn n(&self) -> usize {
        self.main.len()
    }

    pub fn tag(&self) -> GridTag {
        self.tag
    }

    /// Entry `(i, j)`, zero-based; zero outside the three bands.
    pub fn get(&self, i: usize, j: usize) -> T {
        if i == j {
            self.main[i]
        } else if j + 1 == i {
            self.sub[j]
        } else if i + 1 == j {
            self.sup[i]
        } else {
            T::zero()
        }
    }

    /// Matrix-vector product on raw slices.
    pub fn apply(&self, v: &[T]) -> Vec<T> {
        let n = self.n();
        assert_eq!(v.len(), n);
        (0..n)
            .map(|i| {
                let mut acc = self.main[i] * v[i];
                if i > 0 {
                    acc = acc + self.sub[i - 1] * v[i - 1];
                }
                if i + 1 < n {
                    acc = acc + self.sup[i] * v[i + 1];
                }
                acc
            })
            .collect()
    }

    pub fn mul_state(&self, v: &StateVector<T>) -> Result<StateVector<T>> {
        if v.tag() != self.tag {
            return Err(Error::GridMismatch { expected: self.tag.n_interior(), found: v.tag().n_interior() });
        }
        Ok(StateVector::from_raw(self.tag, self.apply(v.values())))
    }

    /// `identity + scale * self`.
    pub fn shifted_identity(&self, scale: T) -> Self {
        Self {
            sub: self.sub.iter().map(|&a| scale * a).collect(),
            main: self.main.iter().map(|&a| T::one() + scale * a).collect(),
            sup: self.sup.iter().map(|&a| scale * a).collect(),
            tag: self.tag,
        }
    }

    /// Adds a diagonal in place.
    pub fn add_diagonal(&mut self, diag: &Diagonal<T>) {
        assert_eq!(diag.tag, self.tag, "diagonal belongs to a different grid");
        for (m, &d) in self.main.iter_mut().zip(&diag.entries) {
            *m = *m + d;
        }
    }

    /// All off-diagonal entries are `<= 0`.
    pub fn is_z_class(&self) -> bool {
        self.sub.iter().chain(&self.sup).all(|&a| a <= T::zero())
    }

    /// Per-row `|a_ii| - sum_{j != i} |a_ij|`; weak diagonal dominance means
    /// every entry is `>= 0`.
    pub fn dominance_slack(&self) -> Vec<T> {
        let n = self.n();
        (0..n)
            .map(|i| {
                let mut off = T::zero();
                if i > 0 {
                    off = off + self.sub[i - 1].abs();
                }
                if i + 1 < n {
                    off = off + self.sup[i].abs();
                }
                self.main[i].abs() - off
            })
            .collect()
    }

    pub fn max_abs_main(&self) -> T {
        self.main.iter().fold(T::zero(), |m, &a| m.max(a.abs()))
    }
}

/// Diagonal matrix on a grid; houses `D`, `D^-2` and `G(u)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagonal<T> {
    pub entries: Vec<T>,
    tag: GridTag,
}

impl<T: Real> Diagonal<T> {
    pub fn tag(&self) -> GridTag {
        self.tag
    }

    /// `D = diag(x_1, ..., x_N)`.
    pub fn nodes(grid: &Grid<T>) -> Self {
        Self { entries: grid.nodes().to_vec(), tag: grid.tag() }
    }

    /// Entrywise product with another diagonal.
    pub fn times(&self, other: &Self) -> Self {
        assert_eq!(self.tag, other.tag, "diagonal belongs to a different grid");
        Self { entries: self.entries.iter().zip(&other.entries).map(|(&a, &b)| a * b).collect(), tag: self.tag }
    }
}

/// Assembles `C` on `grid`.
pub fn assemble_c<T: Real>(grid: &Grid<T>) -> Tridiagonal<T> {
    let n = grid.n();
    let inv_h2 = T::one() / (grid.h() * grid.h());
    let half = T::lit(0.5);
    let main = vec![T::lit(2.0) * inv_h2; n];
    // row i (1-based) has sub entry -(1 - 1/(2i))/h^2 for i >= 2
    let sub = (2..=n).map(|i| -(T::one() - half / T::from_index(i)) * inv_h2).collect();
    // row i (1-based) has super entry -(1 + 1/(2i))/h^2 for i <= N-1
    let sup = (1..n).map(|i| -(T::one() + half / T::from_index(i)) * inv_h2).collect();
    Tridiagonal { sub, main, sup, tag: grid.tag() }
}

/// `G(u) = diag(g(u_1), ..., g(u_N))`.
pub fn assemble_g<T: Real>(u: &StateVector<T>) -> Diagonal<T> {
    Diagonal { entries: u.values().iter().map(|&y| g(y)).collect(), tag: u.tag() }
}

/// `F(u) = (sin u_1, ..., sin u_N)`.
pub fn assemble_f<T: Real>(u: &StateVector<T>) -> StateVector<T> {
    StateVector::from_raw(u.tag(), u.values().iter().map(|&y| y.sin()).collect())
}

/// `D^-2 = diag(x_i^-2)`.
pub fn inverse_square_nodes<T: Real>(grid: &Grid<T>) -> Diagonal<T> {
    Diagonal { entries: grid.nodes().iter().map(|&x| T::one() / (x * x)).collect(), tag: grid.tag() }
}

/// The per-step system matrix `I + dt (C + G D^-2)`.
pub fn system_matrix<T: Real>(
    c: &Tridiagonal<T>,
    g_diag: &Diagonal<T>,
    grid: &Grid<T>,
    dt: T,
) -> Result<Tridiagonal<T>> {
    if !(dt > T::zero()) || !dt.is_finite() {
        return Err(Error::InvalidTimeStep(dt.to_f64_lossy()));
    }
    if c.tag != grid.tag() || g_diag.tag != grid.tag() {
        return Err(Error::GridMismatch {
            expected: grid.n(),
            found: if c.tag != grid.tag() { c.tag.n_interior() } else { g_diag.tag.n_interior() },
        });
    }
    let mut m = c.clone();
    m.add_diagonal(&g_diag.times(&inverse_square_nodes(grid)));
    Ok(m.shifted_identity(dt))
}

/// The unique `c in (0, pi/2]` with `g(c) = alpha^2`, found by bisection.
///
/// `g` decreases strictly on `(0, pi/2]` from 1 to 0, so the root exists for
/// every `alpha in [0, 1)`; `c_alpha -> 0` as `alpha -> 1`.
pub fn c_alpha<T: Real>(alpha: T) -> Result<T> {
    if !(alpha >= T::zero() && alpha < T::one()) {
        return Err(Error::CAlphaUndefined(alpha.to_f64_lossy()));
    }
    let half_pi = T::FRAC_PI_2();
    if alpha == T::zero() {
        return Ok(half_pi);
    }
    let target = alpha * alpha;
    let (mut lo, mut hi) = (T::zero(), half_pi);
    for _ in 0..200 {
        let mid = lo + (hi - lo) * T::lit(0.5);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // pick the bracket end with the smaller residual
    if (g(lo) - target).abs() <= (g(hi) - target).abs() {
        Ok(lo)
    } else {
        Ok(hi)
    }
}

/// Weight exponent `alpha`, the smallness threshold `c_alpha` and
/// `d_alpha = |D^-alpha u0|_inf` for a given initial state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityParams<T> {
    pub alpha: T,
    pub c_alpha: T,
    pub d_alpha: T,
}

impl<T: Real> StabilityParams<T> {
    pub fn new(alpha: T, grid: &Grid<T>, u0: &StateVector<T>) -> Result<Self> {
        let c_alpha = c_alpha(alpha)?;
        let d_alpha = grid.norm_inf_weighted(u0, alpha)?;
        Ok(Self { alpha, c_alpha, d_alpha })
    }

    /// `|u0|_inf <= c_alpha`, the hypothesis of the weighted decay bound.
    pub fn admits(&self, u0: &StateVector<T>) -> bool {
        u0.norm_inf() <= self.c_alpha
    }

    /// Largest step for which monotone energy decay is guaranteed:
    /// `(3/4) d_alpha^-2 h^(2(1 - alpha))`.
    pub fn energy_step_limit(&self, h: T) -> T {
        let two = T::lit(2.0);
        T::lit(0.75) / (self.d_alpha * self.d_alpha) * h.powf(two * (T::one() - self.alpha))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    fn grid(n: usize) -> Grid<f64> {
        Grid::new(n).unwrap()
    }

    #[test]
    fn g_values() {
        assert_eq!(g(0.0f64), 1.0);
        assert!(g(FRAC_PI_2).abs() < 1e-16);
        assert_relative_eq!(g(FRAC_PI_4), 2.0 / PI, max_relative = 1e-15);
        assert_eq!(g(0.0f32), 1.0);
    }

    #[test]
    fn g_taylor_branch_matches_quotient() {
        for y in [1e-12f64, 1e-8, 3e-5, 9.99e-5] {
            let exact = (2.0 * y).sin() / (2.0 * y);
            assert!((g(y) - exact).abs() <= 2.0 * f64::EPSILON, "y = {y}");
        }
        // continuity across the switch point
        let below = g(1e-4f64 - 1e-12);
        let above = g(1e-4f64 + 1e-12);
        assert!((below - above).abs() < 1e-14);
    }

    #[test]
    fn g_even_and_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10_000 {
            let y: f64 = rng.gen_range(-50.0..50.0);
            assert_eq!(g(y), g(-y));
            assert!((-0.2173..=1.0).contains(&g(y)));
        }
    }

    #[test]
    fn g_derivative_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let eps = 1e-5;
        for _ in 0..10_000 {
            let y: f64 = rng.gen_range(-10.0..10.0);
            let deriv = (g(y + eps) - g(y - eps)) / (2.0 * eps);
            assert!(deriv.abs() <= 4.0 / 3.0 * y.abs() + 1e-6, "y = {y}, g' = {deriv}");
        }
    }

    #[test]
    fn g_lipschitz_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..100_000 {
            let y: f64 = rng.gen_range(-10.0..10.0);
            let z: f64 = rng.gen_range(-10.0..10.0);
            let lhs = (g(y) - g(z)).abs();
            let rhs = 4.0 / 3.0 * y.abs().max(z.abs()) * (y - z).abs();
            assert!(lhs <= rhs + 1e-12, "y = {y}, z = {z}");
        }
    }

    #[test]
    fn c_entries_small_grids() {
        let c = assemble_c(&grid(3));
        assert_eq!(c.main, vec![32.0; 3]);
        assert_eq!(c.sup, vec![-24.0, -20.0]);
        assert_relative_eq!(c.sub[0], -12.0);
        assert_relative_eq!(c.sub[1], -40.0 / 3.0, max_relative = 1e-15);

        let c = assemble_c(&grid(1));
        assert_eq!(c.main, vec![8.0]);
        assert!(c.sub.is_empty() && c.sup.is_empty());
    }

    #[test]
    fn c_annihilates_constants_in_the_interior() {
        for n in [3usize, 10, 100, 1000] {
            let c = assemble_c(&grid(n));
            let w = c.apply(&vec![1.0; n]);
            let scale = c.max_abs_main();
            for &wi in &w[1..n - 1] {
                assert!(wi.abs() <= 8.0 * f64::EPSILON * scale);
            }
            assert!(w[0] > 0.0 && w[n - 1] > 0.0);
        }
    }

    #[test]
    fn c_is_z_class_and_weakly_dominant() {
        for n in 1..=2048usize {
            let c = assemble_c(&grid(n));
            assert!(c.is_z_class(), "N = {n}");
            assert!(c.main.iter().all(|&a| a >= 0.0));
            let tol = 4.0 * f64::EPSILON * c.max_abs_main();
            assert!(c.dominance_slack().iter().all(|&s| s >= -tol), "N = {n}");
        }
    }

    #[test]
    fn dc_is_symmetric() {
        for n in [2usize, 3, 17, 256, 2047] {
            let gr = grid(n);
            let c = assemble_c(&gr);
            let x = gr.nodes();
            let scale = x[n - 1] * c.max_abs_main();
            for i in 0..n - 1 {
                let upper = x[i] * c.sup[i];
                let lower = x[i + 1] * c.sub[i];
                assert!((upper - lower).abs() <= 1e-12 * scale);
                let analytic = -((i + 1) as f64 + 0.5) / gr.h();
                assert_relative_eq!(upper, analytic, max_relative = 1e-13);
            }
        }
    }

    #[test]
    fn g_and_f_diagonals() {
        let gr = grid(2);
        let zero = StateVector::zeros(&gr);
        assert_eq!(assemble_g(&zero).entries, vec![1.0, 1.0]);
        let u = StateVector::from_vec(&gr, vec![FRAC_PI_2, -FRAC_PI_2]).unwrap();
        assert!(assemble_g(&u).entries.iter().all(|e| e.abs() < 1e-16));
        let u = StateVector::from_vec(&gr, vec![PI / 6.0, FRAC_PI_4]).unwrap();
        let f = assemble_f(&u);
        assert_relative_eq!(f.values()[0], 0.5, max_relative = 1e-15);
        assert_relative_eq!(f.values()[1], 2f64.sqrt() / 2.0, max_relative = 1e-15);
        assert_eq!(assemble_f(&zero).values(), &[0.0, 0.0]);

        let g1 = grid(1);
        let u = StateVector::from_vec(&g1, vec![FRAC_PI_4]).unwrap();
        assert_relative_eq!(assemble_g(&u).entries[0], 2.0 / PI);
        let u = StateVector::from_vec(&g1, vec![FRAC_PI_2]).unwrap();
        assert_relative_eq!(assemble_f(&u).values()[0], 1.0);
    }

    #[test]
    fn system_matrix_scalar_cases() {
        let gr = grid(1);
        let c = assemble_c(&gr);
        let zero = StateVector::zeros(&gr);
        let m = system_matrix(&c, &assemble_g(&zero), &gr, 0.1).unwrap();
        assert_relative_eq!(m.main[0], 2.2, max_relative = 1e-15);

        let u = StateVector::from_vec(&gr, vec![FRAC_PI_4]).unwrap();
        let m = system_matrix(&c, &assemble_g(&u), &gr, 0.1).unwrap();
        assert_relative_eq!(m.main[0], 1.0 + 0.1 * (8.0 + 8.0 / PI), max_relative = 1e-15);
        assert!((m.main[0] - 2.054_648).abs() < 1e-6);

        assert!(system_matrix(&c, &assemble_g(&u), &gr, 0.0).is_err());
    }

    #[test]
    fn system_matrix_tends_to_identity() {
        let gr = grid(9);
        let c = assemble_c(&gr);
        let u = StateVector::sample(&gr, |x| x * (1.0 - x)).unwrap();
        let m = system_matrix(&c, &assemble_g(&u), &gr, 1e-14).unwrap();
        let id = Tridiagonal::identity(&gr);
        for i in 0..9 {
            for j in 0..9 {
                assert!((m.get(i, j) - id.get(i, j)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn c_alpha_values() {
        assert_eq!(c_alpha(0.0f64).unwrap(), FRAC_PI_2);
        let c = c_alpha((2.0 / PI).sqrt()).unwrap();
        assert!((c - FRAC_PI_4).abs() < 1e-12);

        let c = c_alpha(0.99f64).unwrap();
        assert!(c > 0.0 && c < 0.5);
        assert!((g(c) - 0.9801).abs() <= 1e-12);

        assert!(c_alpha(1.0f64).is_err());
        assert!(c_alpha(-0.5f64).is_err());
    }

    #[test]
    fn c_alpha_residual_and_monotonicity() {
        let ladder: Vec<f64> = (0..10).map(|k| k as f64 / 10.0).collect();
        let cs: Vec<f64> = ladder.iter().map(|&a| c_alpha(a).unwrap()).collect();
        for (&a, &c) in ladder.iter().zip(&cs) {
            assert!((g(c) - a * a).abs() <= 1e-12);
            assert!(c > 0.0 && c <= FRAC_PI_2);
        }
        assert!(cs.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn stability_params_for_smooth_profile() {
        let gr = grid(999);
        let u0 = StateVector::sample(&gr, |x| PI * (1.0 - x) * x).unwrap();
        let p = StabilityParams::new((2.0 / PI).sqrt(), &gr, &u0).unwrap();
        assert!((p.c_alpha - FRAC_PI_4).abs() < 1e-12);
        assert!((p.d_alpha - 1.82).abs() < 5e-3);
        assert!(1e-6 <= p.energy_step_limit(gr.h()));
    }

    #[test]
    fn single_precision_assembly() {
        let gr = Grid::<f32>::new(3).unwrap();
        let c = assemble_c(&gr);
        assert_eq!(c.main, vec![32.0f32; 3]);
        assert_eq!(c.sup, vec![-24.0f32, -20.0]);
        let c32 = c_alpha(0.5f32).unwrap();
        assert!((g(c32) - 0.25).abs() < 1e-6);
    }
}
