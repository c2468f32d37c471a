//! Curve post-processing: range truncation, isotonic projection,
//! simultaneous bands by Gaussian multiplier bootstrap, multiplicity
//! adjusted tests and policy contrasts.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::estimators::Estimate;
use crate::exec::map_range;
use crate::linalg::Matrix;
use crate::rng::{derive_seed, stream_rng, tag, standard_normal};
use crate::stats::{mean, normal_cdf, normal_quantile, quantile, std_dev};

/// Default number of bootstrap multipliers.
pub const DEFAULT_MULTIPLIERS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Direction {
    /// Cumulative incidence.
    #[default]
    NonDecreasing,
    /// Survival.
    NonIncreasing,
}

/// Pointwise clip to `[lo, hi]`.
pub fn truncate(values: &[f64], lo: f64, hi: f64) -> Vec<f64> {
    values.iter().map(|v| v.clamp(lo, hi)).collect()
}

/// Pointwise clip to `[0, 1]`.
pub fn truncate_unit(values: &[f64]) -> Vec<f64> {
    truncate(values, 0.0, 1.0)
}

/// Weighted L2 projection onto monotone sequences (pool adjacent
/// violators). Weights default to one and must be positive.
pub fn isotonic_project(values: &[f64], weights: Option<&[f64]>, direction: Direction) -> Result<Vec<f64>> {
    let n = values.len();
    if let Some(w) = weights {
        if w.len() != n {
            return Err(Error::InvalidArgument("weights and values differ in length".into()));
        }
        if w.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
            return Err(Error::InvalidArgument("isotonic weights must be positive".into()));
        }
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("isotonic input".into()));
    }
    let sign = match direction {
        Direction::NonDecreasing => 1.0,
        Direction::NonIncreasing => -1.0,
    };
    // blocks of (weighted mean, weight, length)
    let mut blocks: Vec<(f64, f64, usize)> = Vec::with_capacity(n);
    for i in 0..n {
        let w = weights.map_or(1.0, |w| w[i]);
        blocks.push((sign * values[i], w, 1));
        while blocks.len() > 1 {
            let (m2, w2, l2) = blocks[blocks.len() - 1];
            let (m1, w1, l1) = blocks[blocks.len() - 2];
            if m1 <= m2 {
                break;
            }
            blocks.pop();
            let wt = w1 + w2;
            *blocks.last_mut().expect("two blocks") = ((w1 * m1 + w2 * m2) / wt, wt, l1 + l2);
        }
    }
    let mut out = Vec::with_capacity(n);
    for (m, _, len) in blocks {
        out.extend(core::iter::repeat(sign * m).take(len));
    }
    Ok(out)
}

/// Simultaneous band critical value and the per-horizon standard errors
/// it was calibrated with.
#[derive(Debug, Clone, PartialEq)]
pub struct Band {
    pub z_star: f64,
    pub se: Vec<f64>,
    /// Horizons left out of the maximum because their SE is zero.
    pub excluded: Vec<usize>,
}

impl Band {
    pub fn limits(&self, estimates: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let lo = estimates.iter().zip(&self.se).map(|(t, s)| t - self.z_star * s).collect();
        let hi = estimates.iter().zip(&self.se).map(|(t, s)| t + self.z_star * s).collect();
        (lo, hi)
    }
}

/// Critical value `z*` such that `theta_k +/- z* se_k` covers all `K`
/// columns jointly at `level`, from `multipliers` Gaussian multiplier
/// draws of `max_k |sum_i xi_i (phi_ik - mean_k)| / (sqrt(n) sd_k)`.
///
/// The multiplier sums are drawn through the `K`-dimensional Gaussian law
/// they follow given the data, using scrambled Sobol points (up to 256
/// columns and 65536 draws; independent draws beyond that). Draw `b`
/// depends only on `(seed, b)`.
pub fn simultaneous_band(eif: &Matrix, level: f64, multipliers: usize, seed: u64) -> Result<Band> {
    let (n, k) = (eif.rows(), eif.cols());
    if k == 0 || n < 2 {
        return Err(Error::InvalidArgument(format!("need at least one column and two rows, got {n}x{k}")));
    }
    if !(level > 0.0 && level < 1.0) || multipliers == 0 {
        return Err(Error::InvalidArgument("level must lie in (0, 1) with at least one multiplier".into()));
    }
    if !eif.is_finite() {
        return Err(Error::NonFinite("influence values".into()));
    }
    let columns: Vec<Vec<f64>> = (0..k).map(|j| eif.col_values(j)).collect();
    // spread below rounding noise counts as zero
    let sd: Vec<f64> = columns
        .iter()
        .map(|c| {
            let s = std_dev(c);
            let size = c.iter().fold(1.0, |m: f64, v| m.max(v.abs()));
            if s > 1e-13 * size { s } else { 0.0 }
        })
        .collect();
    let se: Vec<f64> = sd.iter().map(|s| s / libm::sqrt(n as f64)).collect();
    let mut excluded = Vec::new();
    let mut kept = Vec::new();
    for j in 0..k {
        if sd[j] > 0.0 {
            kept.push(j);
        } else {
            log::warn!("horizon column {j} has zero standard error; left out of the band maximum");
            excluded.push(j);
        }
    }
    if kept.is_empty() {
        return Ok(Band { z_star: normal_quantile(0.5 + level / 2.0), se, excluded });
    }
    // Given the data, the multiplier sums are exactly N(0, G) with
    // G = Z'Z for the centered, scaled columns Z; draw from that law.
    let scale = libm::sqrt(n as f64);
    let width = kept.len();
    let z: Vec<Vec<f64>> = kept
        .iter()
        .map(|&j| {
            let m = mean(&columns[j]);
            columns[j].iter().map(|v| (v - m) / (scale * sd[j])).collect()
        })
        .collect();
    let mut gram = vec![0.0; width * width];
    for a in 0..width {
        for b in 0..=a {
            let g: f64 = z[a].iter().zip(&z[b]).map(|(x, y)| x * y).sum();
            gram[a * width + b] = g;
            gram[b * width + a] = g;
        }
    }
    let root = psd_cholesky(&gram, width);
    let key = derive_seed(seed, tag::MULTIPLIER);
    let quasi = width <= sobol_burley::NUM_DIMENSIONS as usize && multipliers <= 1 << 16;
    let maxima = map_range(multipliers, |b| {
        let xi: Vec<f64> = if quasi {
            // Owen-scrambled Sobol point b, cell-centred so every
            // coordinate lies strictly inside (0, 1)
            (0..width)
                .map(|k| {
                    let u = f64::from(sobol_burley::sample(b as u32, k as u32, key as u32));
                    normal_quantile(u + 0.5 / f64::from(1u32 << 24))
                })
                .collect()
        } else {
            let mut rng = stream_rng(key, b as u64);
            (0..width).map(|_| standard_normal(&mut rng)).collect()
        };
        (0..width).fold(0.0, |m: f64, a| {
            let w: f64 = root[a * width..a * width + a + 1].iter().zip(&xi).map(|(l, x)| l * x).sum();
            m.max(w.abs())
        })
    });
    Ok(Band { z_star: quantile(&maxima, level), se, excluded })
}

/// Lower-triangular `L` with `L L' = g` for a positive semidefinite `g`;
/// directions with no variance get a zero column.
fn psd_cholesky(g: &[f64], k: usize) -> Vec<f64> {
    let mut l = vec![0.0; k * k];
    for j in 0..k {
        let d = g[j * k + j] - (0..j).map(|m| l[j * k + m] * l[j * k + m]).sum::<f64>();
        let tol = 1e-12 * g[j * k + j].max(1.0);
        if d <= tol {
            continue;
        }
        let root = libm::sqrt(d);
        l[j * k + j] = root;
        for i in j + 1..k {
            let off = g[i * k + j] - (0..j).map(|m| l[i * k + m] * l[j * k + m]).sum::<f64>();
            l[i * k + j] = off / root;
        }
    }
    l
}

/// Two-sided Wald p-values against zero, Bonferroni-adjusted over `k`
/// tests and capped at one.
pub fn adjusted_tests(estimates: &[f64], se: &[f64], k: usize) -> Result<Vec<f64>> {
    if k == 0 || estimates.len() != se.len() {
        return Err(Error::InvalidArgument("need k >= 1 and one SE per estimate".into()));
    }
    Ok(estimates
        .iter()
        .zip(se)
        .map(|(&t, &s)| {
            let raw = if s > 0.0 {
                2.0 * (1.0 - normal_cdf((t / s).abs()))
            } else if t != 0.0 {
                log::warn!("zero standard error with nonzero estimate {t}; p-value set to 0");
                0.0
            } else {
                1.0
            };
            (raw * k as f64).min(1.0)
        })
        .collect())
}

/// Settings of [`project_curve`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveOptions {
    pub level: f64,
    pub multipliers: usize,
    pub seed: u64,
    /// Range the curve and its limits are truncated to.
    pub bounds: (f64, f64),
    /// Shape the curve is projected onto; `None` skips the projection.
    pub direction: Option<Direction>,
}

impl CurveOptions {
    /// Cumulative incidence: `[0, 1]`, non-decreasing.
    pub fn incidence(seed: u64) -> Self {
        Self { level: 0.95, multipliers: DEFAULT_MULTIPLIERS, seed, bounds: (0.0, 1.0), direction: Some(Direction::NonDecreasing) }
    }

    /// Difference of two incidence curves: `[-1, 1]`, no shape constraint.
    pub fn difference(seed: u64) -> Self {
        Self { bounds: (-1.0, 1.0), direction: None, ..Self::incidence(seed) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectedCurve {
    pub horizons: Vec<usize>,
    pub raw: Vec<f64>,
    pub truncated: Vec<f64>,
    pub projected: Vec<f64>,
    pub se: Vec<f64>,
    pub ci_low: Vec<f64>,
    pub ci_high: Vec<f64>,
    pub band_low: Vec<f64>,
    pub band_high: Vec<f64>,
    pub z_star: f64,
    pub p_adjusted: Vec<f64>,
}

/// Truncates, then projects the estimates and each interval limit
/// separately. `se` is the per-horizon Wald standard error and `eif` the
/// matching `n x K` influence matrix.
pub fn project_curve(horizons: &[usize], estimates: &[f64], se: &[f64], eif: &Matrix, options: &CurveOptions) -> Result<ProjectedCurve> {
    let k = horizons.len();
    if estimates.len() != k || se.len() != k || eif.cols() != k {
        return Err(Error::InvalidArgument("horizons, estimates, SEs and influence columns must align".into()));
    }
    if horizons.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument("horizons must be strictly increasing".into()));
    }
    let band = simultaneous_band(eif, options.level, options.multipliers, options.seed)?;
    let z = normal_quantile(0.5 + options.level / 2.0);
    let (lo, hi) = options.bounds;
    let shape = |v: Vec<f64>| -> Result<Vec<f64>> {
        let v = truncate(&v, lo, hi);
        match options.direction {
            Some(d) => isotonic_project(&v, None, d),
            None => Ok(v),
        }
    };
    let truncated = truncate(estimates, lo, hi);
    let projected = shape(estimates.to_vec())?;
    let ci_low = shape(estimates.iter().zip(se).map(|(t, s)| t - z * s).collect())?;
    let ci_high = shape(estimates.iter().zip(se).map(|(t, s)| t + z * s).collect())?;
    let band_low = shape(estimates.iter().zip(se).map(|(t, s)| t - band.z_star * s).collect())?;
    let band_high = shape(estimates.iter().zip(se).map(|(t, s)| t + band.z_star * s).collect())?;
    Ok(ProjectedCurve {
        horizons: horizons.to_vec(),
        raw: estimates.to_vec(),
        truncated,
        projected,
        se: se.to_vec(),
        ci_low,
        ci_high,
        band_low,
        band_high,
        z_star: band.z_star,
        p_adjusted: adjusted_tests(estimates, se, k)?,
    })
}

/// Difference `A - B` of two curves estimated on the same units.
#[derive(Debug, Clone, PartialEq)]
pub struct Contrast {
    pub horizons: Vec<usize>,
    pub difference: Vec<f64>,
    pub se: Vec<f64>,
    /// `n x K` per-unit differences of `phi_1`.
    pub eif: Matrix,
}

/// Paired contrast of two curves. Standard errors come from the per-unit
/// differences of the influence values.
pub fn contrast_curves(a: &[&Estimate], b: &[&Estimate]) -> Result<Contrast> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::InvalidArgument("curves must have the same, nonzero number of horizons".into()));
    }
    let n = a[0].eif.phi.len();
    let mut eif = Matrix::zeros(n, a.len());
    let mut horizons = Vec::with_capacity(a.len());
    let mut difference = Vec::with_capacity(a.len());
    let mut se = Vec::with_capacity(a.len());
    for (k, (x, y)) in a.iter().zip(b).enumerate() {
        if x.report.horizon != y.report.horizon {
            return Err(Error::InvalidArgument(format!("horizon {} paired with {}", x.report.horizon, y.report.horizon)));
        }
        if x.eif.phi.len() != n || y.eif.phi.len() != n {
            return Err(Error::InvalidArgument("curves were estimated on different units".into()));
        }
        let d: Vec<f64> = x.eif.phi.iter().zip(&y.eif.phi).map(|(p, q)| p - q).collect();
        for (i, v) in d.iter().enumerate() {
            eif.set(i, k, *v);
        }
        horizons.push(x.report.horizon);
        difference.push(x.report.theta - y.report.theta);
        se.push(if n > 1 { std_dev(&d) / libm::sqrt(n as f64) } else { 0.0 });
    }
    Ok(Contrast { horizons, difference, se, eif })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::uniform;

    fn close(a: &[f64], b: &[f64]) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12)
    }

    #[test]
    fn truncation() {
        assert_eq!(truncate_unit(&[1.03, -0.01, 0.5]), vec![1.0, 0.0, 0.5]);
    }

    #[test]
    fn pava_examples() {
        let up = Direction::NonDecreasing;
        assert!(close(&isotonic_project(&[0.2, 0.1, 0.3], None, up).unwrap(), &[0.15, 0.15, 0.3]));
        assert_eq!(isotonic_project(&[0.1, 0.2, 0.3], None, up).unwrap(), vec![0.1, 0.2, 0.3]);
        assert_eq!(isotonic_project(&[0.4, 0.4], None, up).unwrap(), vec![0.4, 0.4]);
        assert!(close(&isotonic_project(&[0.1, 0.3, 0.2], None, Direction::NonIncreasing).unwrap(), &[0.2, 0.2, 0.2]));
        assert!(close(&isotonic_project(&[1.0, 0.0], Some(&[3.0, 1.0]), up).unwrap(), &[0.75, 0.75]));
        assert!(isotonic_project(&[1.0], Some(&[0.0]), up).is_err());
    }

    #[test]
    fn pava_properties() {
        let mut rng = stream_rng(1, 2);
        for _ in 0..200 {
            let n = 1 + (uniform(&mut rng) * 8.0) as usize;
            let v: Vec<f64> = (0..n).map(|_| uniform(&mut rng) * 2.0 - 0.5).collect();
            let p = isotonic_project(&v, None, Direction::NonDecreasing).unwrap();
            assert!(p.windows(2).all(|w| w[0] <= w[1] + 1e-15));
            assert!(close(&isotonic_project(&p, None, Direction::NonDecreasing).unwrap(), &p));
            let shifted: Vec<f64> = v.iter().map(|x| x + 0.3).collect();
            let ps = isotonic_project(&shifted, None, Direction::NonDecreasing).unwrap();
            assert!(p.iter().zip(&ps).all(|(a, b)| (a + 0.3 - b).abs() < 1e-12));
            let lhs = truncate_unit(&isotonic_project(&truncate_unit(&v), None, Direction::NonDecreasing).unwrap());
            let rhs = truncate_unit(&isotonic_project(&v, None, Direction::NonDecreasing).unwrap());
            assert!(lhs.windows(2).all(|w| w[0] <= w[1]) && rhs.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn adjusted_p_values() {
        // estimate/se giving raw p = 0.01 and 0.2
        let z1 = normal_quantile(1.0 - 0.005);
        let z2 = normal_quantile(1.0 - 0.1);
        let p = adjusted_tests(&[z1, z2], &[1.0, 1.0], 14).unwrap();
        assert!((p[0] - 0.14).abs() < 1e-9 && p[1] == 1.0);
        let single = adjusted_tests(&[z1], &[1.0], 1).unwrap();
        assert!((single[0] - 0.01).abs() < 1e-9);
        assert_eq!(adjusted_tests(&[0.2, 0.0], &[0.0, 0.0], 2).unwrap(), vec![0.0, 1.0]);
    }

    #[test]
    fn band_with_perfectly_correlated_columns() {
        let mut rng = stream_rng(3, 4);
        let n = 500;
        let col: Vec<f64> = (0..n).map(|_| standard_normal(&mut rng)).collect();
        let mut m = Matrix::zeros(n, 2);
        for i in 0..n {
            m.set(i, 0, col[i]);
            m.set(i, 1, 2.0 * col[i]);
        }
        let band = simultaneous_band(&m, 0.95, 4000, 9).unwrap();
        assert!((band.z_star - 1.96).abs() < 0.06, "{}", band.z_star);
    }

    #[test]
    fn semidefinite_root() {
        // rank two: third column is the sum of the first two
        let g = [4.0, 2.0, 6.0, 2.0, 5.0, 7.0, 6.0, 7.0, 13.0];
        let l = psd_cholesky(&g, 3);
        for i in 0..3 {
            for j in 0..3 {
                let v: f64 = (0..3).map(|m| l[i * 3 + m] * l[j * 3 + m]).sum();
                assert!((v - g[i * 3 + j]).abs() < 1e-9, "{i},{j}");
            }
        }
        assert_eq!(l[8], 0.0);
    }

    #[test]
    fn independent_draws_past_the_quasi_random_range() {
        let mut rng = stream_rng(5, 6);
        let n = 200;
        let m = Matrix::from_vec(n, 1, (0..n).map(|_| standard_normal(&mut rng)).collect());
        let band = simultaneous_band(&m, 0.95, (1 << 16) + 1, 2).unwrap();
        assert!((band.z_star - 1.96).abs() < 0.03, "{}", band.z_star);
    }

    #[test]
    fn zero_variance_column_is_excluded() {
        let mut m = Matrix::zeros(50, 2);
        for i in 0..50 {
            m.set(i, 0, i as f64);
            m.set(i, 1, 0.3);
        }
        let band = simultaneous_band(&m, 0.95, 500, 1).unwrap();
        assert_eq!(band.excluded, vec![1]);
        assert_eq!(band.se[1], 0.0);
    }

    #[test]
    fn projected_curve_orders_limits() {
        let mut rng = stream_rng(5, 6);
        let n = 300;
        let mut m = Matrix::zeros(n, 3);
        for i in 0..n {
            for j in 0..3 {
                m.set(i, j, standard_normal(&mut rng));
            }
        }
        let c = project_curve(&[1, 2, 3], &[0.2, 0.15, 1.02], &[0.05, 0.06, 0.02], &m, &CurveOptions { multipliers: 1000, ..CurveOptions::incidence(1) }).unwrap();
        for k in 0..3 {
            assert!(c.band_low[k] <= c.projected[k] && c.projected[k] <= c.band_high[k]);
            assert!(c.ci_low[k] <= c.projected[k] && c.projected[k] <= c.ci_high[k]);
            assert!((0.0..=1.0).contains(&c.projected[k]));
        }
        assert!(c.projected.windows(2).all(|w| w[0] <= w[1]));
        assert!(c.z_star >= 1.96 - 0.05);
    }
}
