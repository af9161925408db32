//! Plain-text artifact formats. Every float is written with 17 significant
//! digits so the files read back bit-exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use orbitfit_core::dynamics::{PhaseFlow, PhaseState, SphereState, Trajectory};
use orbitfit_core::periodicity::ClosedOrbitRecord;
use orbitfit_core::reconstruction::{CoefficientComparison, CoverageMetrics};
use orbitfit_core::FourierSeries;

use crate::error::{HarnessError, Result};

/// `x` with 17 significant digits.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn axis_names(prefix: &str, d: usize) -> Vec<String> {
    (1..=d).map(|i| format!("{prefix}{i}")).collect()
}

/// `k1,k2,a,b` (one more `k` column per extra dimension), canonical wave
/// vectors in band order, the mean as a leading all-zero-`k` row.
pub fn potential_csv<const D: usize>(series: &FourierSeries<D>) -> String {
    let mut out = axis_names("k", D).join(",");
    out.push_str(",a,b\n");
    let zeros = vec!["0"; D].join(",");
    let _ = writeln!(out, "{zeros},{},{}", num(series.mean()), num(0.0));
    for (k, a, b) in series.terms() {
        let ks: Vec<String> = k.iter().map(|c| c.to_string()).collect();
        let _ = writeln!(out, "{},{},{}", ks.join(","), num(a), num(b));
    }
    out
}

/// Inverse of [`potential_csv`]. The band limit is taken as the largest
/// `|k_i|` present unless a larger `k_max` is given.
pub fn parse_potential_csv<const D: usize>(
    text: &str,
    k_max: Option<u32>,
    path: &Path,
) -> Result<FourierSeries<D>> {
    let fail = |line: usize, msg: String| HarnessError::Csv {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let expected = format!("{},a,b", axis_names("k", D).join(","));
    match lines.next() {
        Some((_, h)) if h.trim() == expected => {}
        Some((i, h)) => {
            return Err(fail(
                i + 1,
                format!("expected header `{expected}`, got `{h}`"),
            ))
        }
        None => return Err(fail(1, "empty file".into())),
    }
    let mut mean = 0.0;
    let mut terms = Vec::new();
    let mut band = 1u32;
    for (i, line) in lines {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != D + 2 {
            return Err(fail(i + 1, format!("expected {} fields", D + 2)));
        }
        let mut k = [0i32; D];
        for (slot, f) in k.iter_mut().zip(&fields) {
            *slot = f
                .parse()
                .map_err(|_| fail(i + 1, format!("`{f}` is not an integer")))?;
        }
        let parse = |f: &str| {
            f.parse::<f64>()
                .map_err(|_| fail(i + 1, format!("`{f}` is not a number")))
        };
        let (a, b) = (parse(fields[D])?, parse(fields[D + 1])?);
        if k.iter().all(|&c| c == 0) {
            mean = a;
        } else {
            band = band.max(k.iter().map(|c| c.unsigned_abs()).max().unwrap_or(0));
            terms.push((i + 1, k, a, b));
        }
    }
    let mut series = FourierSeries::<D>::zero(k_max.unwrap_or(band).max(band))?;
    series.set_mean(mean);
    for (line, k, a, b) in terms {
        series
            .set_term(k, a, b)
            .map_err(|e| fail(line, e.to_string()))?;
    }
    Ok(series)
}

/// `t,q1,q2,p1,p2,energy` (3D: `t,q1,q2,q3,p1,p2,p3,energy`), every
/// `stride`-th sample plus the last one.
pub fn torus_trajectory_csv<const D: usize, S>(traj: &Trajectory<S>, stride: usize) -> String
where
    S: PhaseFlow<State = PhaseState<D>>,
{
    let mut out = format!(
        "t,{},{},energy\n",
        axis_names("q", D).join(","),
        axis_names("p", D).join(",")
    );
    for i in sample_indices(traj.len(), stride) {
        let s = &traj.states[i];
        out.push_str(&num(traj.times[i]));
        for x in s.q.iter().chain(&s.p) {
            out.push(',');
            out.push_str(&num(*x));
        }
        let _ = writeln!(out, ",{}", num(traj.system.energy(s)));
    }
    out
}

/// `t,x,y,z,vx,vy,vz,energy`.
pub fn sphere_trajectory_csv<S>(traj: &Trajectory<S>, stride: usize) -> String
where
    S: PhaseFlow<State = SphereState>,
{
    let mut out = String::from("t,x,y,z,vx,vy,vz,energy\n");
    for i in sample_indices(traj.len(), stride) {
        let s = &traj.states[i];
        out.push_str(&num(traj.times[i]));
        for x in s.x.as_array().iter().chain(&s.v) {
            out.push(',');
            out.push_str(&num(*x));
        }
        let _ = writeln!(out, ",{}", num(traj.system.energy(s)));
    }
    out
}

fn sample_indices(n: usize, stride: usize) -> impl Iterator<Item = usize> {
    let stride = stride.max(1);
    let tail = (n > 0 && !(n - 1).is_multiple_of(stride)).then(|| n - 1);
    (0..n).step_by(stride).chain(tail)
}

/// One orbit-report row; `record` is `None` when no closure was found.
pub struct OrbitRow<'a, T> {
    pub seed: u64,
    pub start: &'a T,
    pub record: Option<&'a ClosedOrbitRecord<T>>,
}

fn orbit_tail<T>(record: Option<&ClosedOrbitRecord<T>>) -> String {
    match record {
        Some(r) => format!("true,{},{}", num(r.period), num(r.closure_gap)),
        None => "false,,".into(),
    }
}

/// `seed,q1,q2,p1,p2,closed,period,closure_gap`.
pub fn torus_orbits_csv(rows: &[OrbitRow<'_, PhaseState<2>>]) -> String {
    let mut out = String::from("seed,q1,q2,p1,p2,closed,period,closure_gap\n");
    for r in rows {
        let s = r.start;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.seed,
            num(s.q[0]),
            num(s.q[1]),
            num(s.p[0]),
            num(s.p[1]),
            orbit_tail(r.record)
        );
    }
    out
}

/// `seed,x,y,z,vx,vy,vz,closed,period,closure_gap`.
pub fn sphere_orbits_csv(rows: &[OrbitRow<'_, SphereState>]) -> String {
    let mut out = String::from("seed,x,y,z,vx,vy,vz,closed,period,closure_gap\n");
    for r in rows {
        let x = r.start.x.as_array();
        let v = r.start.v;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.seed,
            num(x[0]),
            num(x[1]),
            num(x[2]),
            num(v[0]),
            num(v[1]),
            num(v[2]),
            orbit_tail(r.record)
        );
    }
    out
}

/// `k1,k2,a_true,b_true,a_fit,b_fit,abs_err` (3D adds `k3`).
pub fn reconstruction_csv<const D: usize>(rows: &[CoefficientComparison<D>]) -> String {
    let mut out = axis_names("k", D).join(",");
    out.push_str(",a_true,b_true,a_fit,b_fit,abs_err\n");
    for r in rows {
        let ks: Vec<String> = r.k.iter().map(|c| c.to_string()).collect();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            ks.join(","),
            num(r.a_true),
            num(r.b_true),
            num(r.a_fit),
            num(r.b_fit),
            num(r.abs_err())
        );
    }
    out
}

/// `i,j,visits` for every cell, `i` along `q1`.
pub fn coverage_csv(m: &CoverageMetrics) -> String {
    let mut out = String::from("i,j,visits\n");
    for i in 0..m.grid_n {
        for j in 0..m.grid_n {
            let _ = writeln!(out, "{i},{j},{}", m.visits[i * m.grid_n + j]);
        }
    }
    out
}

/// Writes `contents` to `dir/name`, creating `dir` as needed.
pub fn write_artifact(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| HarnessError::io(&path, e))?;
    Ok(path)
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))
}
