//! Error series between runs and the sorted-location PCA embedding of
//! one-dimensional clouds.

use std::io::Write;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::measure::ParticleCloud;
use crate::scheduler::{same_time, CheckpointKind, RunRecord, Snapshot};
use crate::transport::w2_distance;

/// `W2(control_t, approx_t)` at every time both runs recorded.
#[derive(Clone, Debug, PartialEq)]
pub struct ErrorSeries {
    pub rows: Vec<(f64, f64)>,
}

impl ErrorSeries {
    pub fn max(&self) -> f64 {
        self.rows.iter().map(|r| r.1).fold(0.0, f64::max)
    }

    pub fn last(&self) -> f64 {
        self.rows.last().map_or(0.0, |r| r.1)
    }

    pub fn at(&self, t: f64) -> Option<f64> {
        self.rows.iter().find(|r| same_time(r.0, t)).map(|r| r.1)
    }

    pub fn write_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "t,w2")?;
        for (t, w) in &self.rows {
            writeln!(out, "{t},{w}")?;
        }
        Ok(())
    }
}

pub fn error_series(control: &RunRecord, approx: &RunRecord) -> Result<ErrorSeries> {
    let pairs: Vec<(f64, &ParticleCloud, &ParticleCloud)> = control
        .snapshots
        .iter()
        .filter_map(|s| approx.snapshot_at(s.t).map(|a| (s.t, &s.cloud, a)))
        .collect();
    if pairs.is_empty() {
        return Err(Error::NoSharedTimes);
    }
    let rows = pairs
        .par_iter()
        .map(|(t, c, a)| Ok((*t, w2_distance(c, a)?.value())))
        .collect::<Result<_>>()?;
    Ok(ErrorSeries { rows })
}

/// Top two principal directions of sorted position vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct PcaBasis {
    pub mean: Vec<f64>,
    pub components: [Vec<f64>; 2],
    /// Sample variance along each component.
    pub variance: [f64; 2],
    pub total_variance: f64,
}

impl PcaBasis {
    pub fn explained_ratio(&self) -> [f64; 2] {
        self.variance.map(|v| v / self.total_variance)
    }

    /// Sorted vector with coordinates `(pc1, pc2)`.
    pub fn reconstruct(&self, pc: (f64, f64)) -> Vec<f64> {
        self.mean
            .iter()
            .zip(self.components[0].iter().zip(&self.components[1]))
            .map(|(m, (a, b))| m + pc.0 * a + pc.1 * b)
            .collect()
    }
}

fn sorted_vector(cloud: &ParticleCloud) -> Result<Vec<f64>> {
    if cloud.dim() != 1 {
        return Err(Error::DimensionError {
            expected: 1,
            found: cloud.dim(),
        });
    }
    cloud.sorted_1d()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn orient(c: &mut [f64]) {
    let scale = c.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if let Some(first) = c.iter().find(|x| x.abs() > 1e-12 * scale) {
        if *first < 0.0 {
            c.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

/// PCA of the snapshots' sorted position vectors, computed from the
/// `T x T` Gram matrix of the centered data.
pub fn fit_sorted_pca(snapshots: &[ParticleCloud]) -> Result<PcaBasis> {
    if snapshots.len() < 3 {
        return Err(Error::DegenerateData(format!(
            "need at least 3 snapshots, got {}",
            snapshots.len()
        )));
    }
    let rows: Vec<Vec<f64>> = snapshots.iter().map(sorted_vector).collect::<Result<_>>()?;
    let n = rows[0].len();
    if let Some(r) = rows.iter().find(|r| r.len() != n) {
        return Err(Error::SizeMismatch {
            left: n,
            right: r.len(),
        });
    }
    let t = rows.len();
    let mut mean = vec![0.0; n];
    for r in &rows {
        for (m, x) in mean.iter_mut().zip(r) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= t as f64);
    let centered: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| r.iter().zip(&mean).map(|(x, m)| x - m).collect())
        .collect();

    let gram = DMatrix::from_fn(t, t, |a, b| dot(&centered[a], &centered[b]));
    let total = gram.trace();
    let raw: f64 = rows.iter().map(|r| dot(r, r)).sum();
    if total.is_nan() || total <= 1e-20 * raw {
        return Err(Error::DegenerateData("all snapshots are equal".into()));
    }
    let eig = SymmetricEigen::new(gram);
    let mut order: Vec<usize> = (0..t).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let denom = (t - 1) as f64;
    let mut components: Vec<Vec<f64>> = Vec::with_capacity(2);
    let mut variance = [0.0; 2];
    for (slot, &e) in order.iter().take(2).enumerate() {
        let lambda = eig.eigenvalues[e].max(0.0);
        if lambda <= 1e-12 * total {
            break;
        }
        let u = eig.eigenvectors.column(e);
        let mut c = vec![0.0; n];
        for (a, row) in centered.iter().enumerate() {
            for (ci, x) in c.iter_mut().zip(row) {
                *ci += u[a] * x;
            }
        }
        let norm = dot(&c, &c).sqrt();
        c.iter_mut().for_each(|x| *x /= norm);
        orient(&mut c);
        variance[slot] = lambda / denom;
        components.push(c);
    }
    // rank-one data: complete with a fixed orthonormal direction
    if components.len() < 2 {
        let first = components[0].clone();
        let pick = (0..n)
            .min_by(|&a, &b| first[a].abs().total_cmp(&first[b].abs()))
            .unwrap_or(0);
        let mut c: Vec<f64> = (0..n).map(|i| if i == pick { 1.0 } else { 0.0 }).collect();
        let p = dot(&c, &first);
        c.iter_mut().zip(&first).for_each(|(x, f)| *x -= p * f);
        let norm = dot(&c, &c).sqrt();
        if norm < 1e-12 {
            return Err(Error::DegenerateData(
                "cannot complete a second component".into(),
            ));
        }
        c.iter_mut().for_each(|x| *x /= norm);
        orient(&mut c);
        components.push(c);
    }
    let second = components.pop().expect("two components");
    let first = components.pop().expect("two components");
    Ok(PcaBasis {
        mean,
        components: [first, second],
        variance,
        total_variance: total / denom,
    })
}

/// Coordinates of a cloud's sorted vector in the basis.
pub fn project_pca(basis: &PcaBasis, cloud: &ParticleCloud) -> Result<(f64, f64)> {
    let x = sorted_vector(cloud)?;
    if x.len() != basis.mean.len() {
        return Err(Error::SizeMismatch {
            left: basis.mean.len(),
            right: x.len(),
        });
    }
    let d: Vec<f64> = x.iter().zip(&basis.mean).map(|(a, m)| a - m).collect();
    Ok((dot(&d, &basis.components[0]), dot(&d, &basis.components[1])))
}

/// Angle in degrees between consecutive segments of a planar polyline.
/// Zero-length segments are skipped.
pub fn turning_angles(points: &[(f64, f64)]) -> Vec<f64> {
    let segs: Vec<(f64, f64)> = points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0, w[1].1 - w[0].1))
        .filter(|s| s.0 != 0.0 || s.1 != 0.0)
        .collect();
    segs.windows(2)
        .map(|w| {
            let (a, b) = (w[0], w[1]);
            let cross = a.0 * b.1 - a.1 * b.0;
            let dotp = a.0 * b.0 + a.1 * b.1;
            cross.atan2(dotp).abs().to_degrees()
        })
        .collect()
}

pub fn median(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    })
}

/// Euclidean distance from `p` to the nearest point of a polyline.
pub fn distance_to_polyline(p: (f64, f64), curve: &[(f64, f64)]) -> f64 {
    match curve {
        [] => f64::INFINITY,
        [q] => (p.0 - q.0).hypot(p.1 - q.1),
        _ => curve
            .windows(2)
            .map(|w| {
                let (a, b) = (w[0], w[1]);
                let (dx, dy) = (b.0 - a.0, b.1 - a.1);
                let len2 = dx * dx + dy * dy;
                let s = if len2 > 0.0 {
                    (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0)
                } else {
                    0.0
                };
                (p.0 - a.0 - s * dx).hypot(p.1 - a.1 - s * dy)
            })
            .fold(f64::INFINITY, f64::min),
    }
}

/// Mean length of the segments of a polyline.
pub fn mean_spacing(curve: &[(f64, f64)]) -> f64 {
    if curve.len() < 2 {
        return 0.0;
    }
    curve
        .windows(2)
        .map(|w| (w[1].0 - w[0].0).hypot(w[1].1 - w[0].1))
        .sum::<f64>()
        / (curve.len() - 1) as f64
}

/// One `pca.csv` row.
#[derive(Clone, Debug, PartialEq)]
pub struct PcaPoint {
    pub t: f64,
    pub pc: (f64, f64),
    pub source: String,
}

pub fn write_pca_csv<W: Write>(points: &[PcaPoint], out: &mut W) -> Result<()> {
    writeln!(out, "t,pc1,pc2,source")?;
    for p in points {
        writeln!(out, "{},{},{},{}", p.t, p.pc.0, p.pc.1, p.source)?;
    }
    Ok(())
}

pub const SOURCE_CONTROL: &str = "control";
pub const SOURCE_POST_PUSH: &str = "approx_post_push";
pub const SOURCE_POST_RECOVERY: &str = "approx_post_recovery";

/// A control curve in its own sorted-location PCA basis, with approximate
/// runs' checkpoint states projected into the same basis.
#[derive(Clone, Debug)]
pub struct PcaReport {
    pub basis: PcaBasis,
    /// Control snapshots used for the fit, in time order.
    pub curve: Vec<PcaPoint>,
    /// Post-push and post-recovery points of the approximate runs.
    pub approx: Vec<PcaPoint>,
}

impl PcaReport {
    pub fn curve_xy(&self) -> Vec<(f64, f64)> {
        self.curve.iter().map(|p| p.pc).collect()
    }

    pub fn median_turning_angle(&self) -> Option<f64> {
        median(&turning_angles(&self.curve_xy()))
    }

    /// Distance of each approximate point with the given source label to
    /// the control curve, in units of the curve's mean spacing.
    pub fn relative_distances(&self, source: &str) -> Vec<f64> {
        let curve = self.curve_xy();
        let sp = mean_spacing(&curve);
        self.approx
            .iter()
            .filter(|p| p.source == source)
            .map(|p| distance_to_polyline(p.pc, &curve) / sp)
            .collect()
    }

    pub fn all_points(&self) -> Vec<PcaPoint> {
        self.curve.iter().chain(&self.approx).cloned().collect()
    }
}

fn require_1d(run: &RunRecord) -> Result<()> {
    match run.dim() {
        1 => Ok(()),
        d => Err(Error::DimensionError {
            expected: 1,
            found: d,
        }),
    }
}

/// Fits on the control snapshots at multiples of `fit_stride` (all of them
/// when `None`), always keeping the final one.
pub fn pca_report(
    control: &RunRecord,
    approx: &[&RunRecord],
    fit_stride: Option<f64>,
) -> Result<PcaReport> {
    require_1d(control)?;
    let last_t = control.last().t;
    let fit: Vec<&Snapshot> = control
        .snapshots
        .iter()
        .filter(|s| match fit_stride {
            None => true,
            Some(d) => {
                let q = s.t / d;
                same_time(q, q.round()) || same_time(s.t, last_t)
            }
        })
        .collect();
    let clouds: Vec<ParticleCloud> = fit.iter().map(|s| s.cloud.clone()).collect();
    let basis = fit_sorted_pca(&clouds)?;
    let curve = fit
        .iter()
        .map(|s| {
            Ok(PcaPoint {
                t: s.t,
                pc: project_pca(&basis, &s.cloud)?,
                source: SOURCE_CONTROL.into(),
            })
        })
        .collect::<Result<_>>()?;
    let mut points = Vec::new();
    for run in approx {
        require_1d(run)?;
        for c in &run.checkpoints {
            let source = match c.kind {
                CheckpointKind::PostPush => SOURCE_POST_PUSH,
                CheckpointKind::PostRecovery => SOURCE_POST_RECOVERY,
                CheckpointKind::End => continue,
            };
            if let Some(cloud) = run.snapshot_at(c.t) {
                points.push(PcaPoint {
                    t: c.t,
                    pc: project_pca(&basis, cloud)?,
                    source: source.into(),
                });
            }
        }
    }
    Ok(PcaReport {
        basis,
        curve,
        approx: points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::RngStream;
    use crate::scheduler::{RunRecord, Snapshot};
    use rand::seq::SliceRandom;
    use rand::Rng;

    fn record(clouds: Vec<(f64, ParticleCloud)>) -> RunRecord {
        RunRecord {
            seed: 0,
            micro_dt: 1.0,
            snapshots: clouds
                .into_iter()
                .map(|(t, cloud)| Snapshot { t, cloud })
                .collect(),
            checkpoints: Vec::new(),
            events: Vec::new(),
            micro_steps_used: 0,
            clamp_events: 0,
        }
    }

    fn random_1d(rng: &mut RngStream, n: usize) -> ParticleCloud {
        ParticleCloud::from_1d(
            &(0..n)
                .map(|_| rng.random_range(0.0..10.0))
                .collect::<Vec<_>>(),
        )
        .unwrap()
    }

    #[test]
    fn error_series_examples() {
        let mut rng = RngStream::new(1, 0);
        let clouds: Vec<(f64, ParticleCloud)> = (0..5)
            .map(|i| (i as f64, random_1d(&mut rng, 30)))
            .collect();
        let a = record(clouds.clone());
        let s = error_series(&a, &a).unwrap();
        assert_eq!(s.rows.len(), 5);
        assert!(s.rows.iter().all(|r| r.1 == 0.0));

        let shifted = record(
            clouds
                .iter()
                .map(|(t, c)| (*t, c.translated(&[0.4]).unwrap()))
                .collect(),
        );
        let s = error_series(&a, &shifted).unwrap();
        assert!(s.rows.iter().all(|r| (r.1 - 0.4).abs() < 1e-12));
        let back = error_series(&shifted, &a).unwrap();
        assert_eq!(s, back);

        let later = record(vec![(10.0, clouds[0].1.clone())]);
        assert_eq!(error_series(&a, &later).unwrap_err(), Error::NoSharedTimes);
    }

    #[test]
    fn error_series_uses_intersection() {
        let mut rng = RngStream::new(2, 0);
        let a = record(
            (0..6)
                .map(|i| (i as f64, random_1d(&mut rng, 10)))
                .collect(),
        );
        let b = record(
            (0..6)
                .map(|i| (2.0 * i as f64, random_1d(&mut rng, 10)))
                .collect(),
        );
        let s = error_series(&a, &b).unwrap();
        assert_eq!(
            s.rows.iter().map(|r| r.0).collect::<Vec<_>>(),
            vec![0.0, 2.0, 4.0]
        );
        let mut out = Vec::new();
        s.write_csv(&mut out).unwrap();
        assert!(String::from_utf8(out).unwrap().starts_with("t,w2\n0,"));
    }

    #[test]
    fn rank_one_line() {
        let a: Vec<f64> = (0..8).map(|i| i as f64).collect();
        let b: Vec<f64> = (0..8).map(|i| 0.5 + 0.1 * i as f64).collect();
        let snaps: Vec<ParticleCloud> = (0..6)
            .map(|t| {
                let xs: Vec<f64> = a.iter().zip(&b).map(|(a, b)| a + t as f64 * b).collect();
                ParticleCloud::from_1d(&xs).unwrap()
            })
            .collect();
        let basis = fit_sorted_pca(&snaps).unwrap();
        let bn = dot(&b, &b).sqrt();
        for (c, bi) in basis.components[0].iter().zip(&b) {
            assert!((c - bi / bn).abs() < 1e-10);
        }
        assert!((basis.explained_ratio()[0] - 1.0).abs() < 1e-12);
        let c = &basis.components;
        assert!(dot(&c[0], &c[1]).abs() < 1e-10);
        assert!((dot(&c[1], &c[1]) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn equal_snapshots_are_degenerate() {
        let c = ParticleCloud::from_1d(&[1.0, 2.0, 3.0]).unwrap();
        assert!(matches!(
            fit_sorted_pca(&[c.clone(), c.clone(), c.clone()]),
            Err(Error::DegenerateData(_))
        ));
        assert!(matches!(
            fit_sorted_pca(&[c.clone(), c]),
            Err(Error::DegenerateData(_))
        ));
    }

    #[test]
    fn projection_examples_and_reconstruction() {
        let mut rng = RngStream::new(3, 0);
        let n = 50;
        // gaps wider than the perturbation keep the sort order fixed
        let base: Vec<f64> = (0..n)
            .map(|i| 0.2 * i as f64 + rng.random_range(0.0..0.05))
            .collect();
        let d1: Vec<f64> = (0..n).map(|i| i as f64 / n as f64).collect();
        let d2: Vec<f64> = (0..n).map(|i| ((i as f64) * 0.3).sin() * 0.01).collect();
        let snaps: Vec<ParticleCloud> = (0..12)
            .map(|t| {
                let (s1, s2) = (t as f64 * 0.2, (t as f64 * 0.7).cos());
                let xs: Vec<f64> = (0..n).map(|i| base[i] + s1 * d1[i] + s2 * d2[i]).collect();
                ParticleCloud::from_1d(&xs).unwrap()
            })
            .collect();
        let basis = fit_sorted_pca(&snaps).unwrap();
        let c = &basis.components;
        assert!(dot(&c[0], &c[1]).abs() < 1e-10);
        assert!(basis.variance[0] >= basis.variance[1] && basis.variance[1] >= 0.0);
        for s in &snaps {
            let pc = project_pca(&basis, s).unwrap();
            let back = basis.reconstruct(pc);
            let orig = s.sorted_1d().unwrap();
            let err: f64 = back
                .iter()
                .zip(&orig)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt();
            assert!(err <= 1e-8 * dot(&orig, &orig).sqrt());
        }
        // the mean multiset sits at the origin, order does not matter
        let mut m = basis.mean.clone();
        m.shuffle(&mut rng);
        let pc = project_pca(&basis, &ParticleCloud::from_1d(&m).unwrap()).unwrap();
        assert!(pc.0.abs() < 1e-10 && pc.1.abs() < 1e-10);

        let wrong = ParticleCloud::from_1d(&[1.0]).unwrap();
        assert!(matches!(
            project_pca(&basis, &wrong),
            Err(Error::SizeMismatch { .. })
        ));
    }

    #[test]
    fn angles_and_distances() {
        let pts = [(0.0, 0.0), (1.0, 0.0), (2.0, 0.0), (2.0, 1.0)];
        assert_eq!(turning_angles(&pts), vec![0.0, 90.0]);
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0]), Some(2.5));
        assert_eq!(distance_to_polyline((1.0, 1.0), &pts[..3]), 1.0);
        assert_eq!(distance_to_polyline((3.0, 0.5), &pts), 1.0);
        assert_eq!(mean_spacing(&pts), 1.0);
    }

    #[test]
    fn pca_report_fits_on_stride_and_labels_checkpoints() {
        use crate::scheduler::Checkpoint;
        // a cloud translating along a line traces a straight curve
        let base: Vec<f64> = (0..20).map(|i| 0.1 * i as f64).collect();
        let at = |s: f64| ParticleCloud::from_1d(&base.iter().map(|x| x + s).collect::<Vec<_>>());
        let ctrl = record(
            (0..=10)
                .map(|i| (i as f64, at(0.1 * i as f64).unwrap()))
                .collect(),
        );
        let mut approx = record(vec![(2.0, at(0.2).unwrap()), (3.0, at(0.35).unwrap())]);
        approx.checkpoints = vec![
            Checkpoint {
                t: 2.0,
                kind: CheckpointKind::PostPush,
            },
            Checkpoint {
                t: 3.0,
                kind: CheckpointKind::PostRecovery,
            },
        ];
        let rep = pca_report(&ctrl, &[&approx], Some(4.0)).unwrap();
        let times: Vec<f64> = rep.curve.iter().map(|p| p.t).collect();
        assert_eq!(times, vec![0.0, 4.0, 8.0, 10.0]);
        assert!(rep.median_turning_angle().unwrap() < 1e-6);
        assert_eq!(rep.approx.len(), 2);
        assert_eq!(rep.approx[0].source, SOURCE_POST_PUSH);
        let d = rep.relative_distances(SOURCE_POST_RECOVERY);
        assert_eq!(d.len(), 1);
        assert!(d[0] < 1e-8);
        assert_eq!(rep.all_points().len(), 6);

        let two_d = record(vec![(
            0.0,
            ParticleCloud::from_flat(2, vec![0.0, 1.0]).unwrap(),
        )]);
        assert!(matches!(
            pca_report(&two_d, &[], None),
            Err(Error::DimensionError { found: 2, .. })
        ));
    }
}
