//! Ball-covering multiplicity.
//!
//! Given `N` open balls of radius `r` centered at points of a compact set
//! `K ⊂ ℝⁿ`, some point lies in at least `N (√2 r / (2r + diam K))ⁿ` of
//! them. The bound comes from enclosing `K + B_r` in a ball whose radius is
//! given by Jung's theorem and comparing volumes.
//!
//! The maximal depth is computed exactly for `n ≤ 2` by an angular (or, in
//! 1D, linear) sweep over ball boundaries. In 3D and above it is estimated
//! from below by sampling, which can only undercount.

use std::f64::consts::TAU;

use rand::Rng;
use serde::Serialize;

use crate::seed;
use crate::{Error, Result};

/// Relative inflation of the radius when testing membership, to absorb
/// boundary ties in floating point.
pub const BOUNDARY_INFLATION: f64 = 1e-12;

/// A finite set of points with its brute-force diameter.
#[derive(Clone, Debug, PartialEq)]
pub struct PointCloud {
    dim: usize,
    points: Vec<Vec<f64>>,
    diam: f64,
}

impl PointCloud {
    pub fn new(dim: usize, points: Vec<Vec<f64>>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("dimension must be ≥ 1".into()));
        }
        if points.is_empty() {
            return Err(Error::InvalidArgument("point cloud is empty".into()));
        }
        if let Some(p) = points.iter().find(|p| p.len() != dim) {
            return Err(Error::SizeMismatch {
                expected: dim,
                got: p.len(),
            });
        }
        if points.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("coordinates must be finite".into()));
        }
        let mut diam = 0.0_f64;
        for (i, a) in points.iter().enumerate() {
            for b in &points[i + 1..] {
                diam = diam.max(distance(a, b));
            }
        }
        Ok(Self { dim, points, diam })
    }

    /// `count` points drawn uniformly from the unit cube.
    pub fn uniform<R: Rng>(dim: usize, count: usize, rng: &mut R) -> Result<Self> {
        let points = (0..count)
            .map(|_| (0..dim).map(|_| rng.random::<f64>()).collect())
            .collect();
        Self::new(dim, points)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn diam(&self) -> f64 {
        self.diam
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            dim: self.dim,
            points: self
                .points
                .iter()
                .map(|p| p.iter().map(|x| x * s).collect())
                .collect(),
            diam: self.diam * s,
        }
    }
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Jung's bound on the radius of a ball enclosing any set of the given
/// diameter: `diam · √(n / (2(n+1)))`.
pub fn jung_radius(n: usize, diam: f64) -> Result<f64> {
    if n < 1 {
        return Err(Error::InvalidArgument("dimension must be ≥ 1".into()));
    }
    if !(diam >= 0.0) {
        return Err(Error::InvalidArgument(format!("diameter must be ≥ 0, got {diam}")));
    }
    let n = n as f64;
    Ok(diam * (n / (2.0 * (n + 1.0))).sqrt())
}

/// `N (√2 r / (2r + diam))ⁿ`.
pub fn covering_lower_bound(count: usize, r: f64, diam: f64, n: usize) -> f64 {
    count as f64 * (std::f64::consts::SQRT_2 * r / (2.0 * r + diam)).powi(n as i32)
}

/// Number of balls containing `x`, with the radius inflated by
/// [`BOUNDARY_INFLATION`].
pub fn depth(cloud: &PointCloud, r: f64, x: &[f64]) -> usize {
    let reach = r * (1.0 + BOUNDARY_INFLATION);
    cloud
        .points
        .iter()
        .filter(|c| distance(c, x) < reach)
        .count()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Overlap {
    pub m: usize,
    pub witness: Vec<f64>,
}

/// Sampling budget for dimensions without an exact sweep.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sampling {
    pub grid_per_axis: usize,
    pub random_samples: usize,
    pub seed: u64,
}

impl Default for Sampling {
    fn default() -> Self {
        Self {
            grid_per_axis: 24,
            random_samples: 4096,
            seed: 0,
        }
    }
}

/// Largest number of balls sharing a point, with a witness point.
pub fn max_overlap(cloud: &PointCloud, r: f64, sampling: &Sampling) -> Result<Overlap> {
    check_radius(r)?;
    let candidate = match cloud.dim {
        1 => sweep_1d(cloud, r),
        2 => sweep_2d(cloud, r),
        _ => sampled(cloud, r, sampling),
    };
    // report a depth that is verified at an actual point
    let best_center = cloud
        .points
        .iter()
        .map(|c| (depth(cloud, r, c), c))
        .max_by_key(|(m, _)| *m)
        .map(|(m, c)| Overlap { m, witness: c.clone() })
        .expect("cloud is nonempty");
    let verified = Overlap {
        m: depth(cloud, r, &candidate),
        witness: candidate,
    };
    Ok(if verified.m >= best_center.m { verified } else { best_center })
}

fn check_radius(r: f64) -> Result<()> {
    if r > 0.0 && r.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("radius must be > 0, got {r}")))
    }
}

/// Depth maximum over all centers and all pairwise boundary intersections
/// (interval endpoints in 1D, circle-circle intersections in 2D). The
/// maximum of the arrangement is attained among these points. `O(N³)`.
pub fn max_overlap_enumerated(cloud: &PointCloud, r: f64) -> Result<Overlap> {
    check_radius(r)?;
    let pts = &cloud.points;
    let mut candidates: Vec<Vec<f64>> = pts.clone();
    match cloud.dim {
        1 => {
            for c in pts {
                candidates.push(vec![c[0] - r]);
                candidates.push(vec![c[0] + r]);
            }
        }
        2 => {
            for (i, a) in pts.iter().enumerate() {
                for b in &pts[i + 1..] {
                    let d = distance(a, b);
                    if d == 0.0 || d > 2.0 * r {
                        continue;
                    }
                    let mid = [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0];
                    let half = (r * r - d * d / 4.0).max(0.0).sqrt();
                    let (ux, uy) = ((b[0] - a[0]) / d, (b[1] - a[1]) / d);
                    candidates.push(vec![mid[0] - uy * half, mid[1] + ux * half]);
                    candidates.push(vec![mid[0] + uy * half, mid[1] - ux * half]);
                }
            }
        }
        n => {
            return Err(Error::InvalidArgument(format!(
                "exact enumeration supports n ≤ 2, got {n}"
            )))
        }
    }
    Ok(candidates
        .into_iter()
        .map(|x| Overlap {
            m: depth(cloud, r, &x),
            witness: x,
        })
        .max_by_key(|o| o.m)
        .expect("cloud is nonempty"))
}

/// Maximum over sorted interval endpoints; closed intervals, so starts sort
/// before ends at equal coordinates.
fn sweep_1d(cloud: &PointCloud, r: f64) -> Vec<f64> {
    let mut events: Vec<(f64, i32)> = cloud
        .points
        .iter()
        .flat_map(|c| [(c[0] - r, 1), (c[0] + r, -1)])
        .collect();
    events.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.cmp(&a.1)));
    let (mut cur, mut best, mut at) = (0, 0, cloud.points[0][0]);
    for (k, &(x, delta)) in events.iter().enumerate() {
        cur += delta;
        if cur > best {
            best = cur;
            at = 0.5 * (x + events[k + 1].0);
        }
    }
    vec![at]
}

/// For each circle, sweep the angular arcs covered by the other disks. The
/// closed-disk depth maximum lies on some circle, so the best arc midpoint
/// over all circles is a maximizer.
fn sweep_2d(cloud: &PointCloud, r: f64) -> Vec<f64> {
    let pts = &cloud.points;
    let reach = 2.0 * r * (1.0 + BOUNDARY_INFLATION);
    let coincide = r * 1e-15;
    let mut best = (0usize, pts[0].clone());
    let mut events: Vec<(f64, i32)> = Vec::new();
    for (i, c) in pts.iter().enumerate() {
        events.clear();
        let mut always = 1usize;
        for (j, o) in pts.iter().enumerate() {
            if i == j {
                continue;
            }
            let (dx, dy) = (o[0] - c[0], o[1] - c[1]);
            let d = dx.hypot(dy);
            if d <= coincide {
                always += 1;
                continue;
            }
            if d >= reach {
                continue;
            }
            let theta = dy.atan2(dx);
            let alpha = (d / (2.0 * r)).min(1.0).acos();
            let start = (theta - alpha).rem_euclid(TAU);
            let end = start + 2.0 * alpha;
            events.push((start, 1));
            if end > TAU {
                events.push((TAU, -1));
                events.push((0.0, 1));
                events.push((end - TAU, -1));
            } else {
                events.push((end, -1));
            }
        }
        if events.is_empty() {
            if always > best.0 {
                best = (always, c.clone());
            }
            continue;
        }
        events.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.cmp(&a.1)));
        let mut cur = 0i32;
        for (k, &(angle, delta)) in events.iter().enumerate() {
            cur += delta;
            let total = always + cur.max(0) as usize;
            if total > best.0 {
                let next = events.get(k + 1).map_or(angle, |e| e.0);
                let phi = 0.5 * (angle + next);
                best = (total, vec![c[0] + r * phi.cos(), c[1] + r * phi.sin()]);
            }
        }
    }
    best.1
}

fn sampled(cloud: &PointCloud, r: f64, sampling: &Sampling) -> Vec<f64> {
    let n = cloud.dim;
    let pts = &cloud.points;
    let mut lo = vec![f64::INFINITY; n];
    let mut hi = vec![f64::NEG_INFINITY; n];
    for p in pts {
        for a in 0..n {
            lo[a] = lo[a].min(p[a] - r);
            hi[a] = hi[a].max(p[a] + r);
        }
    }
    let mut best = (0usize, pts[0].clone());
    let mut consider = |x: Vec<f64>| {
        let m = depth(cloud, r, &x);
        if m > best.0 {
            best = (m, x);
        }
    };
    for (i, a) in pts.iter().enumerate() {
        for b in &pts[i + 1..] {
            if distance(a, b) < 2.0 * r {
                consider(a.iter().zip(b).map(|(x, y)| 0.5 * (x + y)).collect());
            }
        }
    }
    let g = sampling.grid_per_axis.max(1);
    let total = g.checked_pow(n as u32).unwrap_or(usize::MAX).min(1 << 22);
    for idx in 0..total {
        let mut rem = idx;
        let x = (0..n)
            .map(|a| {
                let k = rem % g;
                rem /= g;
                lo[a] + (k as f64 + 0.5) / g as f64 * (hi[a] - lo[a])
            })
            .collect();
        consider(x);
    }
    let mut rng = seed::stream(sampling.seed, "max_overlap", &[]);
    for _ in 0..sampling.random_samples {
        consider((0..n).map(|a| rng.random_range(lo[a]..=hi[a])).collect());
    }
    best.1
}

/// One randomized covering trial.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CoverTrial {
    pub trial: usize,
    pub m: usize,
    pub bound: f64,
    pub ok: bool,
}

/// Runs `trials` independent clouds of `count` uniform points in the unit
/// cube and checks `m ≥ ⌈bound⌉` for each.
pub fn cover_trials(
    n: usize,
    count: usize,
    radius: f64,
    trials: usize,
    master_seed: u64,
) -> Result<Vec<CoverTrial>> {
    check_radius(radius)?;
    (0..trials)
        .map(|t| {
            let mut rng = seed::stream(master_seed, "cover", &[t as u64]);
            let cloud = PointCloud::uniform(n, count, &mut rng)?;
            let sampling = Sampling {
                seed: seed::derive_seed(master_seed, "cover-sampling", &[t as u64]),
                ..Sampling::default()
            };
            let overlap = max_overlap(&cloud, radius, &sampling)?;
            let bound = covering_lower_bound(count, radius, cloud.diam(), n);
            Ok(CoverTrial {
                trial: t,
                m: overlap.m,
                bound,
                ok: overlap.m as f64 >= bound.ceil(),
            })
        })
        .collect()
}
