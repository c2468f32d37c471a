use alloc::vec;
use alloc::vec::Vec;

use rand_core::RngCore;

use super::spec::{DgpSpec, Path};
use super::{TruthMethod, TruthReport};
use crate::data::{DatasetParts, History, LongitudinalDataset};
use crate::error::{Error, Result};
use crate::exec::map_range;
use crate::linalg::Matrix;
use crate::nuisance::NuisanceOracle;
use crate::policy::{Policy, Randomizer};
use crate::rng::{derive_seed, stream_rng, tag, uniform};

/// One simulated unit in the observed world.
struct Record {
    w: Vec<f64>,
    l: Vec<Vec<f64>>,
    a: Vec<f64>,
    c: Vec<u8>,
    d: Vec<u8>,
    y: Vec<u8>,
    y_final: u8,
}

fn bernoulli<R: RngCore>(p: f64, rng: &mut R) -> u8 {
    u8::from(uniform(rng) < p)
}

fn draw_baseline<R: RngCore>(spec: &DgpSpec, rng: &mut R) -> Result<Path> {
    let mut path = Path::default();
    for law in &spec.baseline {
        let v = law.sample(&path.env(None), rng)?;
        path.w.push(v);
    }
    Ok(path)
}

/// Draws `(D, Y)` at `path.t` for a unit at risk; returns `(d, y)`.
fn draw_events<R: RngCore>(spec: &DgpSpec, path: &Path, rng: &mut R) -> Result<(u8, u8)> {
    let (competing, outcome) = spec.event_laws(path.t);
    let env = path.env(None);
    let d = match competing {
        Some(law) => bernoulli(law.prob_one(&env)?, rng),
        None => 0,
    };
    if d == 1 {
        return Ok((1, 0));
    }
    let y = match outcome {
        Some(law) => bernoulli(law.prob_one(&env)?, rng),
        None => 0,
    };
    Ok((0, y))
}

fn draw_covariates<R: RngCore>(spec: &DgpSpec, path: &mut Path, rng: &mut R) -> Result<()> {
    let t = path.t;
    path.l.push(Vec::with_capacity(spec.steps[t - 1].covariates.len()));
    for law in &spec.steps[t - 1].covariates {
        let v = law.sample(&path.env(None), rng)?;
        path.l[t - 1].push(v);
    }
    Ok(())
}

fn simulate_unit(spec: &DgpSpec, seed: u64, unit: usize) -> Result<Record> {
    let mut rng = stream_rng(seed, unit as u64);
    let tau = spec.tau;
    let mut path = draw_baseline(spec, &mut rng)?;
    let mut rec = Record {
        w: Vec::new(),
        l: Vec::with_capacity(tau),
        a: vec![0.0; tau],
        c: vec![0; tau],
        d: vec![0; tau],
        y: vec![0; tau],
        y_final: 0,
    };
    let (mut dead, mut hit) = (false, false);
    for t in 1..=tau {
        path.t = t;
        let width = spec.steps[t - 1].covariates.len();
        if t >= 2 && !dead && !hit {
            let (d, y) = draw_events(spec, &path, &mut rng)?;
            dead = d == 1;
            hit = y == 1;
        }
        rec.d[t - 1] = u8::from(dead);
        rec.y[t - 1] = u8::from(hit);
        if dead || hit {
            // frozen after an event: null covariates and exposure, still observed
            path.l.push(vec![0.0; width]);
            path.a.push(0.0);
            rec.c[t - 1] = 1;
            continue;
        }
        draw_covariates(spec, &mut path, &mut rng)?;
        let step = &spec.steps[t - 1];
        let a = step.exposure.sample(&path.env(None), &mut rng)?;
        let c = match &step.censoring {
            Some(law) => bernoulli(law.prob_one(&path.env(Some(a)))?, &mut rng),
            None => 1,
        };
        path.a.push(a);
        rec.a[t - 1] = a;
        rec.c[t - 1] = c;
        if c == 0 {
            rec.l = fill_blocks(spec, &path.l, t);
            rec.w = path.w;
            return Ok(rec);
        }
    }
    path.t = tau + 1;
    rec.y_final = if hit {
        1
    } else if dead {
        0
    } else {
        draw_events(spec, &path, &mut rng)?.1
    };
    rec.l = fill_blocks(spec, &path.l, tau);
    rec.w = path.w;
    Ok(rec)
}

/// Covariate blocks with zeros for every time after `last`.
fn fill_blocks(spec: &DgpSpec, l: &[Vec<f64>], last: usize) -> Vec<Vec<f64>> {
    (1..=spec.tau)
        .map(|t| if t <= last { l[t - 1].clone() } else { vec![0.0; spec.steps[t - 1].covariates.len()] })
        .collect()
}

/// `n` independent trajectories in the observed world. Unit `i` uses its
/// own random stream, so output does not depend on thread count.
pub fn simulate_observed(spec: &DgpSpec, n: usize, seed: u64) -> Result<LongitudinalDataset> {
    spec.validate()?;
    if n == 0 {
        return Err(Error::InvalidArgument("n must be positive".into()));
    }
    let key = derive_seed(seed, tag::SIMULATION);
    let records = map_range(n, |i| simulate_unit(spec, key, i)).into_iter().collect::<Result<Vec<_>>>()?;
    let tau = spec.tau;
    let p0 = spec.baseline.len();
    let baseline = Matrix::from_vec(n, p0, records.iter().flat_map(|r| r.w.iter().copied()).collect());
    let covariates = (0..tau)
        .map(|k| {
            let p = spec.steps[k].covariates.len();
            Matrix::from_vec(n, p, records.iter().flat_map(|r| r.l[k].iter().copied()).collect())
        })
        .collect();
    let exposure = (0..tau).map(|k| Matrix::from_vec(n, 1, records.iter().map(|r| r.a[k]).collect())).collect();
    let col = |f: &dyn Fn(&Record) -> &Vec<u8>| -> Vec<Vec<u8>> {
        (0..tau).map(|k| records.iter().map(|r| f(r)[k]).collect()).collect()
    };
    LongitudinalDataset::new(DatasetParts {
        baseline,
        covariates,
        exposure,
        censoring: col(&|r| &r.c),
        competing: col(&|r| &r.d),
        outcome: col(&|r| &r.y),
        final_outcome: records.iter().map(|r| r.y_final).collect(),
        exposure_kind: spec.exposure_kind(),
    })
}

/// Intervened trajectory with no censoring; returns `Y_{s+1}` for every
/// horizon `s` in `1..=tau`.
fn intervene_unit(spec: &DgpSpec, policy: &dyn Policy, seed: u64, unit: usize) -> Result<Vec<u8>> {
    let mut rng = stream_rng(derive_seed(seed, tag::MONTE_CARLO), unit as u64);
    let tau = spec.tau;
    let mut path = draw_baseline(spec, &mut rng)?;
    let mut out = vec![0u8; tau];
    for t in 1..=tau + 1 {
        path.t = t;
        if t >= 2 {
            let (d, y) = draw_events(spec, &path, &mut rng)?;
            if d == 1 || y == 1 {
                // absorbed: Y_{s+1} for s >= t - 1 is y
                for s in (t - 1)..=tau {
                    out[s - 1] = y;
                }
                return Ok(out);
            }
        }
        if t == tau + 1 {
            break;
        }
        draw_covariates(spec, &mut path, &mut rng)?;
        let natural = spec.steps[t - 1].exposure.sample(&path.env(None), &mut rng)?;
        let eps = Randomizer::keyed(seed, unit, t);
        let a = policy.apply(natural, &path, eps)?;
        path.a.push(a);
    }
    Ok(out)
}

/// Interventional Monte Carlo truth for every horizon, from `m`
/// intervened trajectories without censoring.
pub fn monte_carlo_truth(spec: &DgpSpec, policy: &dyn Policy, m: usize, seed: u64) -> Result<Vec<TruthReport>> {
    spec.validate()?;
    policy.check_kind(&spec.exposure_kind())?;
    if m == 0 {
        return Err(Error::InvalidArgument("m must be positive".into()));
    }
    let outcomes = map_range(m, |i| intervene_unit(spec, policy, seed, i)).into_iter().collect::<Result<Vec<_>>>()?;
    Ok((1..=spec.tau)
        .map(|h| {
            let hits = outcomes.iter().filter(|o| o[h - 1] == 1).count() as f64;
            let theta = hits / m as f64;
            TruthReport {
                horizon: h,
                theta,
                method: TruthMethod::MonteCarlo,
                replicates: Some(m),
                mc_se: Some(libm::sqrt(theta * (1.0 - theta) / m as f64)),
            }
        })
        .collect())
}

impl NuisanceOracle for DgpSpec {
    fn exposure_pmf(&self, h: &dyn History) -> Result<Vec<f64>> {
        let path = Path::from_history(h);
        self.steps[h.time() - 1].exposure.pmf(&path.env(None))
    }

    fn censoring_prob(&self, a: f64, h: &dyn History) -> Result<f64> {
        let path = Path::from_history(h);
        match &self.steps[h.time() - 1].censoring {
            Some(law) => law.prob_one(&path.env(Some(a))),
            None => Ok(1.0),
        }
    }
}
