//! Poisson point patterns in a disc, nearest-BS association and the
//! geometric laws of the Poisson-Voronoi cell.

use crate::error::{Error, Result};
use rand::Rng;
use rand_distr::{Distribution, Poisson};
use statrs::distribution::{Continuous, Gamma};
use std::f64::consts::PI;
use std::io::Write;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Disc {
    pub cx: f64,
    pub cy: f64,
    pub radius: f64,
}

impl Disc {
    pub fn centred(radius: f64) -> Self {
        Self { cx: 0.0, cy: 0.0, radius }
    }

    pub fn area(&self) -> f64 {
        PI * self.radius * self.radius
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        let dx = p[0] - self.cx;
        let dy = p[1] - self.cy;
        dx * dx + dy * dy <= self.radius * self.radius
    }

    /// Distance from the centre.
    pub fn centre_distance(&self, p: [f64; 2]) -> f64 {
        (p[0] - self.cx).hypot(p[1] - self.cy)
    }

    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> [f64; 2] {
        let r = self.radius * rng.random::<f64>().sqrt();
        let t = 2.0 * PI * rng.random::<f64>();
        [self.cx + r * t.cos(), self.cy + r * t.sin()]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointPattern {
    /// Cartesian coordinates in metres.
    pub points: Vec<[f64; 2]>,
    pub window: Disc,
    /// Points per m^2.
    pub intensity: f64,
}

impl PointPattern {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Homogeneous Poisson pattern on `window`.
pub fn sample_poisson_pattern<R: Rng + ?Sized>(intensity: f64, window: Disc, rng: &mut R) -> Result<PointPattern> {
    if !(intensity >= 0.0) || !(window.radius > 0.0) {
        return Err(Error::invalid("need intensity >= 0 and radius > 0"));
    }
    let mean = intensity * window.area();
    let n = if mean > 0.0 {
        let d = Poisson::new(mean).map_err(|e| Error::invalid(e.to_string()))?;
        d.sample(rng) as usize
    } else {
        0
    };
    let points = (0..n).map(|_| window.sample_uniform(rng)).collect();
    Ok(PointPattern { points, window, intensity })
}

/// Uniform bucket grid for nearest-point queries.
#[derive(Debug, Clone)]
pub struct NearestIndex {
    points: Vec<[f64; 2]>,
    x0: f64,
    y0: f64,
    cell: f64,
    nx: usize,
    ny: usize,
    buckets: Vec<Vec<u32>>,
}

impl NearestIndex {
    pub fn new(points: &[[f64; 2]]) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::invalid("nearest-point index over an empty pattern"));
        }
        let (mut x0, mut y0, mut x1, mut y1) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
        for p in points {
            x0 = x0.min(p[0]);
            y0 = y0.min(p[1]);
            x1 = x1.max(p[0]);
            y1 = y1.max(p[1]);
        }
        let span = (x1 - x0).max(y1 - y0).max(1e-9);
        let cell = (span / (points.len() as f64).sqrt()).max(1e-9);
        let nx = ((x1 - x0) / cell).floor() as usize + 1;
        let ny = ((y1 - y0) / cell).floor() as usize + 1;
        let mut buckets = vec![Vec::new(); nx * ny];
        for (i, p) in points.iter().enumerate() {
            let ix = (((p[0] - x0) / cell) as usize).min(nx - 1);
            let iy = (((p[1] - y0) / cell) as usize).min(ny - 1);
            buckets[iy * nx + ix].push(i as u32);
        }
        Ok(Self { points: points.to_vec(), x0, y0, cell, nx, ny, buckets })
    }

    /// Index of the nearest point (lowest index among ties) and its distance.
    pub fn nearest(&self, q: [f64; 2]) -> (usize, f64) {
        let fx = ((q[0] - self.x0) / self.cell).floor();
        let fy = ((q[1] - self.y0) / self.cell).floor();
        let cx = fx.clamp(0.0, (self.nx - 1) as f64) as i64;
        let cy = fy.clamp(0.0, (self.ny - 1) as f64) as i64;
        // distance from q to the box of the starting cell
        let bx = self.x0 + cx as f64 * self.cell;
        let by = self.y0 + cy as f64 * self.cell;
        let ox = (bx - q[0]).max(q[0] - bx - self.cell).max(0.0);
        let oy = (by - q[1]).max(q[1] - by - self.cell).max(0.0);
        let off = ox.hypot(oy);
        let mut best = (f64::INFINITY, usize::MAX);
        let kmax = self.nx.max(self.ny) as i64;
        for k in 0..=kmax {
            let y_lo = (cy - k).max(0);
            let y_hi = (cy + k).min(self.ny as i64 - 1);
            for iy in y_lo..=y_hi {
                let edge_row = iy == cy - k || iy == cy + k;
                let step = if edge_row { 1 } else { (2 * k).max(1) };
                let mut ix = cx - k;
                while ix <= cx + k {
                    if ix >= 0 && ix < self.nx as i64 {
                        for &j in &self.buckets[iy as usize * self.nx + ix as usize] {
                            let p = self.points[j as usize];
                            let d = (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2);
                            let j = j as usize;
                            if d < best.0 || (d == best.0 && j < best.1) {
                                best = (d, j);
                            }
                        }
                    }
                    ix += step;
                }
            }
            // points beyond ring k lie at least k cells from the starting box
            let reach = k as f64 * self.cell - off;
            if best.1 != usize::MAX && reach > 0.0 && reach * reach > best.0 {
                break;
            }
        }
        (best.1, best.0.sqrt())
    }
}

/// Nearest-BS association of every MS.
#[derive(Debug, Clone, PartialEq)]
pub struct CellPartition {
    /// Serving BS per MS.
    pub bs_of: Vec<usize>,
    /// MS indices per BS, ascending.
    pub members: Vec<Vec<usize>>,
    /// MS-to-serving-BS distance, metres.
    pub distance: Vec<f64>,
}

pub fn assign_nearest_bs(ms: &PointPattern, bs: &PointPattern) -> Result<CellPartition> {
    assign_points(&ms.points, &bs.points)
}

pub fn assign_points(ms: &[[f64; 2]], bs: &[[f64; 2]]) -> Result<CellPartition> {
    if bs.is_empty() {
        return Err(Error::invalid("cannot associate with an empty BS pattern"));
    }
    let index = NearestIndex::new(bs)?;
    let mut bs_of = Vec::with_capacity(ms.len());
    let mut distance = Vec::with_capacity(ms.len());
    let mut members = vec![Vec::new(); bs.len()];
    for (i, &p) in ms.iter().enumerate() {
        let (j, d) = index.nearest(p);
        bs_of.push(j);
        distance.push(d);
        members[j].push(i);
    }
    Ok(CellPartition { bs_of, members, distance })
}

/// Guard band `3 / sqrt(pi lambda_b)`: three mean nearest-BS radii.
pub fn guard_band(lambda_b: f64) -> f64 {
    3.0 / (PI * lambda_b).sqrt()
}

/// BSs farther than `guard` from the window edge.
pub fn interior_cells(bs: &PointPattern, guard: f64) -> Vec<usize> {
    let r = bs.window.radius - guard;
    bs.points
        .iter()
        .enumerate()
        .filter(|(_, p)| bs.window.centre_distance(**p) <= r)
        .map(|(i, _)| i)
        .collect()
}

/// Cell-area estimates for the interior cells from `probes` uniform points
/// in the window. Returns `(bs index, area in m^2)`.
pub fn estimate_cell_areas<R: Rng + ?Sized>(bs: &PointPattern, probes: usize, guard: f64, rng: &mut R) -> Result<Vec<(usize, f64)>> {
    let index = NearestIndex::new(&bs.points)?;
    let mut counts = vec![0usize; bs.len()];
    for _ in 0..probes {
        let p = bs.window.sample_uniform(rng);
        counts[index.nearest(p).0] += 1;
    }
    let unit = bs.window.area() / probes as f64;
    Ok(interior_cells(bs, guard).into_iter().map(|i| (i, counts[i] as f64 * unit)).collect())
}

/// Gamma(a, rate b lambda_b) cell-area density.
pub fn cell_area_pdf(x: f64, lambda_b: f64, a: f64, b: f64) -> Result<f64> {
    if !(a > 0.0 && b > 0.0 && lambda_b > 0.0) {
        return Err(Error::invalid("cell-area law needs a, b, lambda_b > 0"));
    }
    if !(x > 0.0) {
        return Err(Error::invalid("cell area must be positive"));
    }
    let g = Gamma::new(a, b * lambda_b).map_err(|e| Error::invalid(e.to_string()))?;
    Ok(g.pdf(x))
}

/// Nearest-BS distance density `2 pi lambda r exp(-pi lambda r^2)`.
pub fn nearest_distance_pdf(r: f64, lambda_b: f64) -> Result<f64> {
    if !(lambda_b > 0.0) {
        return Err(Error::invalid("intensity must be positive"));
    }
    if r < 0.0 {
        return Ok(0.0);
    }
    Ok(2.0 * PI * lambda_b * r * (-PI * lambda_b * r * r).exp())
}

pub fn nearest_distance_cdf(r: f64, lambda_b: f64) -> f64 {
    if r <= 0.0 {
        0.0
    } else {
        1.0 - (-PI * lambda_b * r * r).exp()
    }
}

/// Inverse-CDF draw `sqrt(-ln u / (pi lambda))`.
pub fn sample_nearest_distance<R: Rng + ?Sized>(rng: &mut R, lambda_b: f64) -> f64 {
    let u: f64 = 1.0 - rng.random::<f64>();
    (-u.ln() / (PI * lambda_b)).sqrt()
}

/// CSV dump of labelled patterns: `x_m, y_m, kind`.
pub fn write_patterns_csv<W: Write>(out: W, patterns: &[(&str, &PointPattern)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["x_m", "y_m", "kind"])?;
    for (kind, p) in patterns {
        for q in &p.points {
            w.write_record([format!("{:.3}", q[0]), format!("{:.3}", q[1]), kind.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pattern(points: Vec<[f64; 2]>) -> PointPattern {
        PointPattern { points, window: Disc::centred(10.0), intensity: 1.0 }
    }

    #[test]
    fn empty_intensity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(sample_poisson_pattern(0.0, Disc::centred(5.0), &mut rng).unwrap().is_empty());
    }

    #[test]
    fn poisson_mean_count() {
        let lb = 1.0 / (PI * 800.0 * 800.0);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 2000;
        let tot: usize = (0..n)
            .map(|_| sample_poisson_pattern(lb, Disc::centred(10_000.0), &mut rng).unwrap().len())
            .sum();
        let mean = tot as f64 / n as f64;
        // sd of the mean is sqrt(156.25 / 2000) = 0.28
        assert!((mean - 156.25).abs() < 1.2, "{mean}");
    }

    #[test]
    fn deterministic_with_seed() {
        let a = sample_poisson_pattern(1e-3, Disc::centred(100.0), &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = sample_poisson_pattern(1e-3, Disc::centred(100.0), &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn simple_associations() {
        let bs = pattern(vec![[0.0, 0.0]]);
        let ms = pattern(vec![[3.0, 4.0], [-1.0, 2.0]]);
        let c = assign_nearest_bs(&ms, &bs).unwrap();
        assert_eq!(c.bs_of, vec![0, 0]);
        assert_eq!(c.distance[0], 5.0);
        let bs = pattern(vec![[-1.0, 0.0], [1.0, 0.0]]);
        let ms = pattern(vec![[0.4, 0.0], [0.0, 3.0]]);
        let c = assign_nearest_bs(&ms, &bs).unwrap();
        assert_eq!(c.bs_of[0], 1);
        // equidistant: lowest index wins
        assert_eq!(c.bs_of[1], 0);
        assert!(assign_nearest_bs(&ms, &pattern(vec![])).is_err());
    }

    #[test]
    fn query_outside_grid() {
        let idx = NearestIndex::new(&[[0.0, 0.0], [1.0, 1.0], [5.0, 5.0]]).unwrap();
        assert_eq!(idx.nearest([100.0, 100.0]).0, 2);
        assert_eq!(idx.nearest([-50.0, 0.2]).0, 0);
    }

    #[test]
    fn nearest_law_normalised() {
        let lb = 1e-4;
        let v: f64 = crate::numerics::quadrature::Quadrature::with_tol(1e-12)
            .scale(100.0)
            .integrate(|r| nearest_distance_pdf(r, lb).unwrap(), 0.0, f64::INFINITY)
            .unwrap()
            .value;
        assert!((v - 1.0).abs() < 1e-10);
        let m: f64 = crate::numerics::quadrature::Quadrature::with_tol(1e-10)
            .scale(100.0)
            .integrate(|r| r * nearest_distance_pdf(r, lb).unwrap(), 0.0, f64::INFINITY)
            .unwrap()
            .value;
        assert!((m - 0.5 / lb.sqrt()).abs() < 1e-6);
        assert!(nearest_distance_pdf(1.0, 0.0).is_err());
    }

    #[test]
    fn area_law_mean() {
        let lb = 1.0 / (PI * 800.0 * 800.0);
        let m: f64 = crate::numerics::quadrature::Quadrature { abs_tol: 1e-9, rel_tol: 1e-12, max_intervals: 2000, scale: 1.0 / lb }
            .integrate(|x| if x > 0.0 { x * lb * cell_area_pdf(x, lb, 3.61, 3.57).unwrap() } else { 0.0 }, 0.0, f64::INFINITY)
            .unwrap()
            .value;
        assert!((m - 3.61 / 3.57).abs() < 1e-6);
        assert!(cell_area_pdf(1.0, lb, 0.0, 3.57).is_err());
    }
}
