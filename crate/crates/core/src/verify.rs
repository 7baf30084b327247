//! Executable stability checks.
//!
//! Each check evaluates one matrix or scalar inequality the scheme's
//! stability rests on and returns a [`CheckReport`] with the worst
//! violation found. Randomized checks take an explicit seed.

use std::fmt::{self, Write as _};
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::experiments::write_text;
use crate::grid::{Grid, StateVector};
use crate::linsolve::{dense_invert, DenseMatrix, DENSE_MAX};
use crate::operators::{assemble_c, assemble_g, g, inverse_square_nodes, Tridiagonal};

pub const DEFAULT_SEED: u64 = 0x5eed_2025;

/// Tolerance on entry signs and the unit bound of explicit inverses.
pub const INVERSE_TOLERANCE: f64 = 1e-10;
/// Tolerance of the `D^(2-a) C D^a 1 >= -a^2` check; absorbs the cancellation
/// of `O(h^-2)` terms into `O(1)` values.
pub const SYMBOL_TOLERANCE: f64 = 1e-6;
pub const F_BOUND_TOLERANCE: f64 = 1e-10;
pub const LIPSCHITZ_TOLERANCE: f64 = 1e-12;
pub const SYMMETRY_TOLERANCE: f64 = 1e-12;
/// Below this `y` the binomial series replaces direct evaluation of `f(y)`.
pub const F_SERIES_SWITCH: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub name: &'static str,
    pub params: String,
    /// Worst violation of the checked inequality; `<= 0` means it holds with
    /// margin.
    pub violation: f64,
    pub tolerance: f64,
    pub pass: bool,
    /// Where the bound is tightest.
    pub witness: String,
}

impl CheckReport {
    fn new(name: &'static str, params: String, violation: f64, tolerance: f64, witness: String) -> Self {
        let pass = violation <= tolerance;
        Self { name, params, violation, tolerance, pass, witness }
    }
}

fn worst(slots: &mut (f64, String), value: f64, witness: impl FnOnce() -> String) {
    if value > slots.0 || slots.1.is_empty() {
        *slots = (value, witness());
    }
}

/// Entrywise sign and unit row-sum bound of `(I + delta C)^-1`.
pub fn check_resolvent_bound(n: usize, delta: f64) -> Result<CheckReport> {
    if n > DENSE_MAX {
        return Err(Error::DenseTooLarge { n, max: DENSE_MAX });
    }
    if !(delta >= 0.0) {
        return Err(Error::InvalidConfig(format!("delta must be nonnegative, got {delta}")));
    }
    let grid = Grid::<f64>::new(n)?;
    let m = assemble_c(&grid).shifted_identity(delta);
    let params = format!("N={n};delta={delta}");
    Ok(resolvent_report("resolvent", params, &m))
}

fn resolvent_report(name: &'static str, params: String, m: &Tridiagonal<f64>) -> CheckReport {
    match dense_invert(m) {
        Ok(inv) => {
            let (violation, witness) = inverse_violation(&inv);
            CheckReport::new(name, params, violation, INVERSE_TOLERANCE, witness)
        }
        Err(e) => CheckReport::new(name, params, f64::INFINITY, INVERSE_TOLERANCE, e.to_string()),
    }
}

/// `max(-min entry, |inv|_inf - 1)`.
fn inverse_violation(inv: &DenseMatrix<f64>) -> (f64, String) {
    let n = inv.n();
    let mut w = (f64::NEG_INFINITY, String::new());
    for i in 0..n {
        for (j, &a) in inv.row(i).iter().enumerate() {
            worst(&mut w, -a, || format!("min entry ({},{})={a:e}", i + 1, j + 1));
        }
        let row_sum: f64 = inv.row(i).iter().map(|a| a.abs()).sum();
        worst(&mut w, row_sum - 1.0, || format!("row {} abs sum={row_sum:.15}", i + 1));
    }
    w
}

/// Z-class, nonnegative diagonal and weak diagonal dominance of
/// `M = C + G(u) D^-2`, plus the resolvent bound for `I + dt M`.
///
/// States with entries beyond `pi/2` may fail; that is reported, not raised.
pub fn check_step_matrix_mproperty(dt: f64, u: &StateVector<f64>) -> Result<CheckReport> {
    let n = u.len();
    if n > DENSE_MAX {
        return Err(Error::DenseTooLarge { n, max: DENSE_MAX });
    }
    let grid = Grid::<f64>::new(n)?;
    grid.check(u)?;
    let mut m = assemble_c(&grid);
    m.add_diagonal(&assemble_g(u).times(&inverse_square_nodes(&grid)));
    let scale = m.max_abs_main();
    let mut w = (f64::NEG_INFINITY, String::new());
    for (k, &a) in m.sub.iter().chain(&m.sup).enumerate() {
        worst(&mut w, a / scale, || format!("off-diagonal #{k} = {a:e}"));
    }
    for (i, &d) in m.main.iter().enumerate() {
        worst(&mut w, -d / scale, || format!("diagonal row {} = {d:e}", i + 1));
    }
    for (i, &s) in m.dominance_slack().iter().enumerate() {
        worst(&mut w, -s / scale, || format!("dominance slack row {} = {s:e}", i + 1));
    }
    match dense_invert(&m.shifted_identity(dt)) {
        Ok(inv) => {
            let (v, wit) = inverse_violation(&inv);
            worst(&mut w, v, || wit);
        }
        Err(e) => w = (f64::INFINITY, e.to_string()),
    }
    let params = format!("N={n};dt={dt};|u|inf={:.6}", u.norm_inf());
    Ok(CheckReport::new("mproperty", params, w.0, INVERSE_TOLERANCE, w.1))
}

/// `w = D^(2-alpha) C D^alpha 1 >= -alpha^2` entrywise.
pub fn check_discrete_symbol(n: usize, alpha: f64) -> Result<CheckReport> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::AlphaOutOfRange(alpha));
    }
    let grid = Grid::<f64>::new(n)?;
    let w = discrete_symbol(&grid, alpha);
    let (i_min, &w_min) = w.iter().enumerate().min_by(|a, b| a.1.partial_cmp(b.1).unwrap()).expect("non-empty grid");
    let violation = -alpha * alpha - w_min;
    Ok(CheckReport::new(
        "symbol",
        format!("N={n};alpha={alpha}"),
        violation,
        SYMBOL_TOLERANCE,
        format!("row {} w={w_min:.12}", i_min + 1),
    ))
}

/// `D^(2-alpha) C D^alpha 1` evaluated through the tridiagonal action.
pub fn discrete_symbol(grid: &Grid<f64>, alpha: f64) -> Vec<f64> {
    let c = assemble_c(grid);
    let x = grid.nodes();
    let x_alpha: Vec<f64> = x.iter().map(|&xi| xi.powf(alpha)).collect();
    c.apply(&x_alpha).iter().zip(x).map(|(&v, &xi)| xi.powf(2.0 - alpha) * v).collect()
}

/// Binomial coefficient `c_j = prod_{m<j} (alpha - m) / j!`.
fn binomial(alpha: f64, j: u32) -> f64 {
    (0..j).fold(1.0, |acc, m| acc * (alpha - m as f64) / (m + 1) as f64)
}

/// `f(y) = ((1+y)^a + (1-y)^a - 2 + y/2 ((1+y)^a - (1-y)^a)) / y^2`.
///
/// Uses `expm1`/`ln_1p` so the `O(y^2)` bracket is formed without
/// catastrophic cancellation, and the series
/// `a^2 + (2c_4 + c_3) y^2 + (2c_6 + c_5) y^4` below [`F_SERIES_SWITCH`].
pub fn symbol_f(alpha: f64, y: f64) -> f64 {
    if alpha == 0.0 {
        return 0.0;
    }
    if y < F_SERIES_SWITCH {
        let y2 = y * y;
        let c = |j| binomial(alpha, j);
        return alpha * alpha + (2.0 * c(4) + c(3)) * y2 + (2.0 * c(6) + c(5)) * y2 * y2;
    }
    let a = (alpha * y.ln_1p()).exp_m1();
    let b = (alpha * (-y).ln_1p()).exp_m1();
    (a * (1.0 + 0.5 * y) + b * (1.0 - 0.5 * y)) / (y * y)
}

/// `f(1/i) <= alpha^2` for `i = 1..=i_max`.
pub fn check_f_bound(alpha: f64, i_max: usize) -> Result<CheckReport> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::AlphaOutOfRange(alpha));
    }
    if i_max == 0 {
        return Err(Error::InvalidConfig("i_max must be positive".into()));
    }
    let mut w = (f64::NEG_INFINITY, String::new());
    for i in 1..=i_max {
        let f = symbol_f(alpha, 1.0 / i as f64);
        worst(&mut w, f - alpha * alpha, || format!("i={i} f={f:.15}"));
    }
    Ok(CheckReport::new("fbound", format!("alpha={alpha};i_max={i_max}"), w.0, F_BOUND_TOLERANCE, w.1))
}

/// `|g(y) - g(z)| <= 4/3 max(|y|,|z|) |y - z|` on random pairs in
/// `[-range, range]`. The witness carries the worst ratio lhs/rhs.
pub fn check_g_lipschitz(sample_count: usize, range: f64, seed: u64) -> Result<CheckReport> {
    if !(range > 0.0) {
        return Err(Error::InvalidConfig(format!("range must be positive, got {range}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violation = f64::NEG_INFINITY;
    let mut worst_ratio = 0.0f64;
    let mut witness = String::from("no samples");
    for _ in 0..sample_count {
        let y: f64 = rng.gen_range(-range..=range);
        let z: f64 = rng.gen_range(-range..=range);
        let lhs = (g(y) - g(z)).abs();
        let rhs = 4.0 / 3.0 * y.abs().max(z.abs()) * (y - z).abs();
        violation = violation.max(lhs - rhs);
        if rhs > 0.0 && lhs / rhs > worst_ratio {
            worst_ratio = lhs / rhs;
            witness = format!("ratio={worst_ratio:.6} at y={y:.6} z={z:.6}");
        }
    }
    Ok(CheckReport::new(
        "lipschitz",
        format!("samples={sample_count};range={range};seed={seed}"),
        if sample_count == 0 { 0.0 } else { violation },
        LIPSCHITZ_TOLERANCE,
        witness,
    ))
}

/// Symmetry of `D C` and positivity of `<D C v, v>` on random `v`.
pub fn check_dc_spd(n: usize, seed: u64) -> Result<CheckReport> {
    let grid = Grid::<f64>::new(n)?;
    let mut dc = DenseMatrix::from_tridiagonal(&assemble_c(&grid))?;
    for i in 0..n {
        for j in 0..n {
            dc[(i, j)] *= grid.nodes()[i];
        }
    }
    let scale = (0..n).flat_map(|i| dc.row(i).to_vec()).fold(0.0f64, |m, a| m.max(a.abs()));
    let mut w = (f64::NEG_INFINITY, String::new());
    for i in 0..n {
        for j in 0..i {
            let asym = (dc[(i, j)] - dc[(j, i)]).abs() / scale;
            worst(&mut w, asym, || format!("asymmetry at ({},{}) = {asym:e}", i + 1, j + 1));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for k in 0..100 {
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let norm2: f64 = v.iter().map(|a| a * a).sum();
        if norm2 == 0.0 {
            continue;
        }
        let q: f64 = dc.mul_vec(&v).iter().zip(&v).map(|(a, b)| a * b).sum();
        let rayleigh = q / norm2;
        worst(&mut w, -rayleigh / scale, || format!("sample {k}: <DCv,v>/|v|^2={rayleigh:e}"));
    }
    Ok(CheckReport::new("dcspd", format!("N={n};seed={seed}"), w.0, SYMMETRY_TOLERANCE, w.1))
}

/// Named check groups.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    All,
    Resolvent,
    MProperty,
    Symbol,
    FBound,
    Lipschitz,
    DcSpd,
}

impl Suite {
    pub const NAMES: [&'static str; 7] = ["all", "resolvent", "mproperty", "symbol", "fbound", "lipschitz", "dcspd"];
}

impl FromStr for Suite {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "all" => Suite::All,
            "resolvent" => Suite::Resolvent,
            "mproperty" => Suite::MProperty,
            "symbol" => Suite::Symbol,
            "fbound" => Suite::FBound,
            "lipschitz" => Suite::Lipschitz,
            "dcspd" => Suite::DcSpd,
            other => {
                return Err(Error::InvalidConfig(format!(
                    "unknown suite '{other}' (expected one of {})",
                    Suite::NAMES.join(", ")
                )))
            }
        })
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let i = [
            Suite::All,
            Suite::Resolvent,
            Suite::MProperty,
            Suite::Symbol,
            Suite::FBound,
            Suite::Lipschitz,
            Suite::DcSpd,
        ]
        .iter()
        .position(|s| s == self)
        .unwrap();
        f.write_str(Suite::NAMES[i])
    }
}

pub const RESOLVENT_DELTAS: [f64; 4] = [0.0, 0.01, 1.0, 10.0];
pub const SYMBOL_ALPHAS: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];
pub const SYMBOL_SIZES: [usize; 3] = [16, 256, 2048];
pub const F_BOUND_ALPHAS: [f64; 4] = [0.0, 0.3, 0.6, 1.0];
pub const F_BOUND_I_MAX: usize = 10_000;
pub const LIPSCHITZ_SAMPLES: usize = 100_000;
pub const LIPSCHITZ_RANGE: f64 = 10.0;
pub const MPROPERTY_N: usize = 32;
pub const MPROPERTY_DT: f64 = 1e-3;
pub const MPROPERTY_STATES: usize = 100;

/// Random states with entries uniform in `[-pi/2, pi/2]`.
pub fn admissible_states(n: usize, count: usize, seed: u64) -> Result<Vec<StateVector<f64>>> {
    let grid = Grid::<f64>::new(n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let half_pi = std::f64::consts::FRAC_PI_2;
    (0..count)
        .map(|_| StateVector::from_vec(&grid, (0..n).map(|_| rng.gen_range(-half_pi..=half_pi)).collect()))
        .collect()
}

/// Runs the default parameter grid of `suite`.
pub fn run_suite(suite: Suite, seed: u64) -> Result<Vec<CheckReport>> {
    let mut out = Vec::new();
    let want = |s: Suite| suite == Suite::All || suite == s;
    if want(Suite::Resolvent) {
        for n in 1..=DENSE_MAX {
            for delta in RESOLVENT_DELTAS {
                out.push(check_resolvent_bound(n, delta)?);
            }
        }
    }
    if want(Suite::MProperty) {
        for u in admissible_states(MPROPERTY_N, MPROPERTY_STATES, seed)? {
            out.push(check_step_matrix_mproperty(MPROPERTY_DT, &u)?);
        }
    }
    if want(Suite::Symbol) {
        for alpha in SYMBOL_ALPHAS {
            for n in SYMBOL_SIZES {
                out.push(check_discrete_symbol(n, alpha)?);
            }
        }
    }
    if want(Suite::FBound) {
        for alpha in F_BOUND_ALPHAS {
            out.push(check_f_bound(alpha, F_BOUND_I_MAX)?);
        }
    }
    if want(Suite::Lipschitz) {
        out.push(check_g_lipschitz(LIPSCHITZ_SAMPLES, LIPSCHITZ_RANGE, seed)?);
    }
    if want(Suite::DcSpd) {
        for n in 1..=DENSE_MAX {
            out.push(check_dc_spd(n, seed.wrapping_add(n as u64))?);
        }
    }
    Ok(out)
}

/// Plain-text table, one line per check.
pub fn render_table(reports: &[CheckReport]) -> String {
    let pw = reports.iter().map(|r| r.params.len()).max().unwrap_or(6).max(6);
    let mut s = String::new();
    let _ = writeln!(s, "{:<10} {:<pw$} {:>12} {:>9}  {:<4}  witness", "check", "params", "violation", "tol", "ok");
    for r in reports {
        let _ = writeln!(
            s,
            "{:<10} {:<pw$} {:>12.3e} {:>9.1e}  {:<4}  {}",
            r.name,
            r.params,
            r.violation,
            r.tolerance,
            if r.pass { "PASS" } else { "FAIL" },
            r.witness
        );
    }
    let failed = reports.iter().filter(|r| !r.pass).count();
    let _ = writeln!(s, "{} checks, {} failed", reports.len(), failed);
    s
}

/// Machine-readable report: `name,params,violation,tolerance,pass`.
pub fn render_csv(reports: &[CheckReport]) -> String {
    let mut s = String::from("name,params,violation,tolerance,pass\n");
    for r in reports {
        let _ = writeln!(s, "{},{},{:e},{:e},{}", r.name, r.params, r.violation, r.tolerance, r.pass);
    }
    s
}

pub fn write_report(reports: &[CheckReport], path: &Path, force: bool) -> Result<()> {
    write_text(path, &render_csv(reports), force)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn resolvent_examples() {
        let r = check_resolvent_bound(5, 0.0).unwrap();
        assert!(r.pass);
        assert!(r.violation <= 0.0 + 1e-15);
        assert!(check_resolvent_bound(8, 0.01).unwrap().pass);
        assert!(check_resolvent_bound(64, 10.0).unwrap().pass);
        assert!(check_resolvent_bound(65, 1.0).is_err());
    }

    #[test]
    fn resolvent_detects_non_m_matrix() {
        // a positive off-diagonal breaks the sign pattern of the inverse
        let grid = Grid::<f64>::new(3).unwrap();
        let t = Tridiagonal::new(&grid, vec![0.0, 0.0], vec![1.0, 1.0, 1.0], vec![0.9, 0.0]).unwrap();
        assert!(!resolvent_report("custom", String::new(), &t).pass);
    }

    #[test]
    fn mproperty_examples() {
        let grid = Grid::<f64>::new(32).unwrap();
        for dt in [1e-6, 1e-3, 1.0, 1e3] {
            assert!(check_step_matrix_mproperty(dt, &StateVector::zeros(&grid)).unwrap().pass);
        }
        for u in admissible_states(32, 10, 1).unwrap() {
            assert!(check_step_matrix_mproperty(1e-3, &u).unwrap().pass);
        }
        let mut v = vec![0.1; 32];
        v[15] = FRAC_PI_2 + 0.05;
        let bad = StateVector::from_vec(&grid, v).unwrap();
        let r = check_step_matrix_mproperty(1e-3, &bad).unwrap();
        assert!(!r.pass);
        assert!(r.witness.contains("row 16"), "{}", r.witness);
    }

    #[test]
    fn symbol_examples() {
        let grid = Grid::<f64>::new(40).unwrap();
        let w = discrete_symbol(&grid, 0.0);
        let scale = 2.0 / grid.h().powi(2) * grid.nodes()[39].powi(2);
        assert!(w[1..39].iter().all(|v| v.abs() <= 1e-12 * scale));
        assert!(w[0] > 0.0 && w[39] > 0.0);
        assert!(check_discrete_symbol(16, 0.0).unwrap().pass);

        let r = check_discrete_symbol(1024, 1.0).unwrap();
        assert!(r.pass, "{r:?}");
        for n in [16, 256, 2048] {
            assert!(check_discrete_symbol(n, 0.75).unwrap().pass);
        }
        assert!(check_discrete_symbol(16, 1.5).is_err());
    }

    #[test]
    fn symbol_approaches_continuous_value() {
        // interior entries approach -alpha^2 from above as i grows
        let alpha = 0.6;
        let grid = Grid::<f64>::new(512).unwrap();
        let w = discrete_symbol(&grid, alpha);
        assert!(w.iter().all(|&v| v >= -alpha * alpha - SYMBOL_TOLERANCE));
        assert!((w[400] + alpha * alpha).abs() < 1e-4);
    }

    #[test]
    fn f_examples() {
        for i in 1..=1000usize {
            let y = 1.0 / i as f64;
            assert!((symbol_f(1.0, y) - 1.0).abs() <= 1e-12, "i = {i}");
            assert_eq!(symbol_f(0.0, y), 0.0);
        }
        assert!(check_f_bound(0.6, 10_000).unwrap().pass);
        assert!(check_f_bound(0.0, 100).unwrap().pass);
        assert!(check_f_bound(1.0, 10_000).unwrap().pass);
    }

    #[test]
    fn f_series_and_direct_agree_near_switch() {
        for alpha in [0.3, 0.6, 0.9] {
            let y = F_SERIES_SWITCH * 1.0001;
            let direct = symbol_f(alpha, y);
            let series = symbol_f(alpha, F_SERIES_SWITCH * 0.9999);
            assert!((direct - series).abs() < 1e-11, "alpha = {alpha}");
        }
    }

    #[test]
    fn lipschitz_examples() {
        let lhs = (g(std::f64::consts::FRAC_PI_4) - g(0.0)).abs();
        let rhs = 4.0 / 3.0 * std::f64::consts::FRAC_PI_4.powi(2);
        assert!((lhs - 0.3634).abs() < 1e-4 && (rhs - 0.8225).abs() < 1e-4);
        let r = check_g_lipschitz(100_000, 10.0, DEFAULT_SEED).unwrap();
        assert!(r.pass);
        let ratio: f64 = r.witness.split(['=', ' ']).nth(1).unwrap().parse().unwrap();
        assert!(ratio <= 1.0);
        let same = check_g_lipschitz(1000, 10.0, 4).unwrap();
        assert_eq!(same, check_g_lipschitz(1000, 10.0, 4).unwrap());
    }

    #[test]
    fn dc_examples() {
        assert!(check_dc_spd(1, 0).unwrap().pass);
        let r = check_dc_spd(3, 0).unwrap();
        assert!(r.pass);
        let grid = Grid::<f64>::new(3).unwrap();
        let c = assemble_c(&grid);
        assert!((grid.nodes()[0] * c.sup[0] + 6.0).abs() < 1e-12);
        assert!((grid.nodes()[1] * c.sup[1] + 10.0).abs() < 1e-12);
        for n in [1usize, 5, 64] {
            assert!(check_dc_spd(n, 9).unwrap().pass);
        }
    }

    #[test]
    fn suite_names_round_trip() {
        for name in Suite::NAMES {
            assert_eq!(name.parse::<Suite>().unwrap().to_string(), name);
        }
        assert!("bogus".parse::<Suite>().is_err());
    }

    #[test]
    fn rendering() {
        let reports = run_suite(Suite::FBound, DEFAULT_SEED).unwrap();
        let table = render_table(&reports);
        assert!(table.contains("fbound") && table.ends_with("4 checks, 0 failed\n"));
        let csv = render_csv(&reports);
        assert_eq!(csv.lines().count(), 5);
        assert!(csv.starts_with("name,params,violation,tolerance,pass\n"));
    }
}
