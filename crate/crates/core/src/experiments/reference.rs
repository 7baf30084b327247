//! Validated reference solutions and their on-disk cache.

use std::fmt::Write as _;
use std::fs;
use std::hash::Hasher;
use std::path::{Path, PathBuf};

use fnv::FnvHasher;

use super::InitialCondition;
use crate::error::{Error, Result};
use crate::grid::{Grid, StateVector, TimeGrid};
use crate::stepper::{evolve, Scheme, SchemeConfig};

pub const CACHE_VERSION: u32 = 1;
/// Euler-SI and BDF2 final states must agree this closely in the D,h-norm.
pub const GATE_TOLERANCE: f64 = 1e-7;

/// Gate tolerance for a reference at step `dt`: [`GATE_TOLERANCE`], widened to
/// `2 dt` when the first-order gap between the two schemes exceeds it.
pub fn gate_tolerance(dt: f64) -> f64 {
    GATE_TOLERANCE.max(2.0 * dt)
}

/// Resolution of a reference run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceSpec {
    pub n: usize,
    pub dt: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSolution {
    pub version: u32,
    pub scheme: Scheme,
    pub ic: InitialCondition,
    pub n: usize,
    pub h: f64,
    pub dt: f64,
    pub final_time: f64,
    pub values: Vec<f64>,
    pub checksum: u64,
    /// D,h-distance to the BDF2 validation run; `None` when loaded from cache.
    pub discrepancy: Option<f64>,
    /// True when `n + 1` is a power of two, so every dyadic coarse grid nests.
    pub dyadic: bool,
}

impl ReferenceSolution {
    fn new(ic: InitialCondition, spec: ReferenceSpec, final_time: f64, values: Vec<f64>) -> Self {
        let checksum = checksum(&payload(&values));
        Self {
            version: CACHE_VERSION,
            scheme: Scheme::EulerSi,
            ic,
            n: spec.n,
            h: 1.0 / (spec.n + 1) as f64,
            dt: spec.dt,
            final_time,
            values,
            checksum,
            discrepancy: None,
            dyadic: (spec.n + 1).is_power_of_two(),
        }
    }

    /// Whether every node of an `n`-node grid is a node of this reference.
    pub fn nests(&self, n: usize) -> bool {
        n > 0 && (self.n + 1).is_multiple_of(n + 1)
    }

    pub fn spec(&self) -> ReferenceSpec {
        ReferenceSpec { n: self.n, dt: self.dt }
    }

    pub fn state(&self) -> Result<StateVector<f64>> {
        StateVector::from_vec(&Grid::new(self.n)?, self.values.clone())
    }

    /// Cache file text: header, blank line, one value per line.
    pub fn to_cache_string(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "version={}", self.version);
        let _ = writeln!(s, "scheme={}", self.scheme.name());
        let _ = writeln!(s, "ic={}", self.ic.id());
        let _ = writeln!(s, "N={}", self.n);
        let _ = writeln!(s, "dt={:e}", self.dt);
        let _ = writeln!(s, "T={:e}", self.final_time);
        let _ = writeln!(s, "checksum={:016x}", self.checksum);
        s.push('\n');
        s.push_str(&payload(&self.values));
        s
    }

    pub fn parse_cache(text: &str, path: &Path) -> Result<Self> {
        let bad = |reason: String| Error::CacheFormat { path: path.to_path_buf(), reason };
        let (header, body) = text.split_once("\n\n").ok_or_else(|| bad("missing blank line after header".into()))?;
        let mut fields = std::collections::HashMap::new();
        for line in header.lines() {
            let (k, v) = line.split_once('=').ok_or_else(|| bad(format!("malformed header line '{line}'")))?;
            fields.insert(k.trim(), v.trim());
        }
        let get = |k: &str| fields.get(k).copied().ok_or_else(|| bad(format!("missing key '{k}'")));
        let num = |k: &str| -> Result<f64> { get(k)?.parse().map_err(|_| bad(format!("bad value for '{k}'"))) };

        let version: u32 = get("version")?.parse().map_err(|_| bad("bad version".into()))?;
        if version != CACHE_VERSION {
            return Err(bad(format!("unsupported version {version}")));
        }
        let scheme: Scheme = get("scheme")?.parse().map_err(|_| bad("bad scheme".into()))?;
        let ic: InitialCondition = get("ic")?.parse().map_err(|_| bad("bad ic".into()))?;
        let n: usize = get("N")?.parse().map_err(|_| bad("bad N".into()))?;
        let dt = num("dt")?;
        let final_time = num("T")?;
        let stored = u64::from_str_radix(get("checksum")?, 16).map_err(|_| bad("bad checksum".into()))?;

        let computed = checksum(body);
        if computed != stored {
            return Err(Error::CacheChecksum { path: path.to_path_buf(), stored, computed });
        }
        let values = body
            .lines()
            .map(|l| l.parse::<f64>().map_err(|_| bad(format!("bad value '{l}'"))))
            .collect::<Result<Vec<_>>>()?;
        if values.len() != n {
            return Err(bad(format!("expected {n} values, found {}", values.len())));
        }
        let mut r = Self::new(ic, ReferenceSpec { n, dt }, final_time, values);
        r.scheme = scheme;
        Ok(r)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_cache(&text, path)
    }

    /// Writes to a temporary sibling and renames it into place.
    pub fn store(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let tmp = path.with_extension(format!("tmp{}", std::process::id()));
        fs::write(&tmp, self.to_cache_string()).map_err(|e| Error::io(&tmp, e))?;
        fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }
}

fn payload(values: &[f64]) -> String {
    let mut s = String::with_capacity(values.len() * 24);
    for v in values {
        let _ = writeln!(s, "{v:.16e}");
    }
    s
}

/// 64-bit FNV-1a of the payload bytes.
pub fn checksum(payload: &str) -> u64 {
    let mut h = FnvHasher::default();
    h.write(payload.as_bytes());
    h.finish()
}

/// File name under which a reference is cached.
pub fn cache_file_name(ic: InitialCondition, spec: ReferenceSpec, final_time: f64) -> String {
    format!("ref_{}_N{}_dt{:e}_T{:e}.txt", ic.id(), spec.n, spec.dt, final_time)
}

/// Euler-SI run at the reference resolution, cross-checked by a BDF2 run on
/// the same grid and step.
pub fn compute_reference(ic: InitialCondition, spec: ReferenceSpec, final_time: f64) -> Result<ReferenceSolution> {
    let grid = Grid::<f64>::new(spec.n)?;
    let time = TimeGrid::from_step(final_time, spec.dt)?;
    let u0 = ic.sample(&grid)?;
    let run = |scheme| -> Result<StateVector<f64>> {
        let config = SchemeConfig::new(scheme, time).keep_states(false).with_stride(time.steps())?;
        let traj = evolve(&u0, &config, &grid, &mut [])?;
        match traj.divergence {
            Some(d) => Err(Error::NonFiniteState { step: d.step }),
            None => Ok(traj.final_state),
        }
    };
    let (euler, bdf2) = rayon::join(|| run(Scheme::EulerSi), || run(Scheme::Bdf2));
    let (euler, bdf2) = (euler?, bdf2?);
    let discrepancy = grid.norm_dh(&euler.difference(&bdf2)?);
    let tolerance = gate_tolerance(spec.dt);
    if !(discrepancy <= tolerance) {
        return Err(Error::ReferenceRejected { discrepancy, tolerance });
    }
    let mut r = ReferenceSolution::new(ic, spec, final_time, euler.into_values());
    r.discrepancy = Some(discrepancy);
    Ok(r)
}

/// Loads the reference from `cache_dir` if present, else computes and stores
/// it there. Without a cache directory it is always computed.
pub fn load_or_compute(
    ic: InitialCondition,
    spec: ReferenceSpec,
    final_time: f64,
    cache_dir: Option<&Path>,
) -> Result<ReferenceSolution> {
    let Some(dir) = cache_dir else {
        return compute_reference(ic, spec, final_time);
    };
    let path: PathBuf = dir.join(cache_file_name(ic, spec, final_time));
    if path.exists() {
        let r = ReferenceSolution::load(&path)?;
        let matches = r.ic == ic && r.n == spec.n && r.dt == spec.dt && r.final_time == final_time;
        if !matches {
            return Err(Error::CacheFormat { path, reason: "header does not match the requested reference".into() });
        }
        return Ok(r);
    }
    let r = compute_reference(ic, spec, final_time)?;
    r.store(&path)?;
    Ok(r)
}

/// Nodal injection of the reference onto a nested coarse grid.
pub fn restrict(reference: &ReferenceSolution, coarse: &Grid<f64>) -> Result<StateVector<f64>> {
    let n = coarse.n();
    if !reference.nests(n) {
        return Err(Error::NonNested { coarse: n, fine: reference.n });
    }
    let k = (reference.n + 1) / (n + 1);
    let values = (1..=n).map(|i| reference.values[i * k - 1]).collect();
    StateVector::from_vec(coarse, values)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fake(n: usize) -> ReferenceSolution {
        let values = (1..=n).map(|i| i as f64).collect();
        ReferenceSolution::new(InitialCondition::Smooth, ReferenceSpec { n, dt: 1e-6 }, 0.1, values)
    }

    #[test]
    fn restrict_examples() {
        let r = fake(2047);
        let coarse = restrict(&r, &Grid::new(3).unwrap()).unwrap();
        assert_eq!(coarse.values(), &[512.0, 1024.0, 1536.0]);
        let same = restrict(&r, &Grid::new(2047).unwrap()).unwrap();
        assert_eq!(same.values(), r.values.as_slice());

        let r = fake(999);
        let coarse = restrict(&r, &Grid::new(99).unwrap()).unwrap();
        assert!(coarse.values().iter().enumerate().all(|(i, &v)| v == (10 * (i + 1)) as f64));
        assert!(matches!(restrict(&r, &Grid::new(15).unwrap()), Err(Error::NonNested { coarse: 15, fine: 999 })));
        assert!(r.nests(9) && !r.nests(6) && !r.dyadic && fake(2047).dyadic);
    }

    #[test]
    fn cache_round_trip_is_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let mut r = fake(5);
        r.values = vec![std::f64::consts::PI, -1e-300, 0.1 + 0.2, 0.0, 1.0 / 3.0];
        r.checksum = checksum(&payload(&r.values));
        let path = dir.path().join("r.txt");
        r.store(&path).unwrap();
        let back = ReferenceSolution::load(&path).unwrap();
        assert_eq!(back, r);
        assert!(back.values.iter().zip(&r.values).all(|(a, b)| a.to_bits() == b.to_bits()));
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("version=1\nscheme=euler\nic=smooth\nN=5\n"));
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn corrupted_cache_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.txt");
        fake(4).store(&path).unwrap();
        let text = fs::read_to_string(&path).unwrap().replace("\n3.0", "\n3.5");
        fs::write(&path, text).unwrap();
        assert!(matches!(ReferenceSolution::load(&path), Err(Error::CacheChecksum { .. })));
        fs::write(&path, "version=1\n").unwrap();
        assert!(matches!(ReferenceSolution::load(&path), Err(Error::CacheFormat { .. })));
    }

    #[test]
    fn zero_reference_is_exact() {
        let r = compute_reference(InitialCondition::Zero, ReferenceSpec { n: 15, dt: 1e-3 }, 0.01).unwrap();
        assert!(r.values.iter().all(|&v| v == 0.0));
        assert_eq!(r.discrepancy, Some(0.0));
    }

    #[test]
    fn load_or_compute_uses_cache() {
        let dir = tempfile::tempdir().unwrap();
        let spec = ReferenceSpec { n: 15, dt: 1e-4 };
        let a = load_or_compute(InitialCondition::Smooth, spec, 0.01, Some(dir.path())).unwrap();
        assert!(a.discrepancy.is_some());
        let b = load_or_compute(InitialCondition::Smooth, spec, 0.01, Some(dir.path())).unwrap();
        assert!(b.discrepancy.is_none());
        assert_eq!(a.values, b.values);
    }

    #[test]
    fn gate_rejects_coarse_step() {
        let spec = ReferenceSpec { n: 63, dt: 1e-3 };
        let err = compute_reference(InitialCondition::Blowup, spec, 0.01);
        assert!(matches!(err, Err(Error::ReferenceRejected { .. })), "{err:?}");
    }
}
