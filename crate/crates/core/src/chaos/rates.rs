use rand::seq::index::sample;
use rayon::prelude::*;

use crate::dynamics::{simulate, HerderControl, RunOptions, StreamKey, TrajectoryBundle};
use crate::error::{HerdError, Result};
use crate::measures::{max_dist, wasserstein};
use crate::model::SystemSpec;
use crate::stats::mean_se;
use crate::streams::{stream, StreamKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateRegime {
    /// `q > d/2`
    Above,
    /// `q = d/2`
    Critical,
    /// `q < d/2`
    Below,
}

impl RateRegime {
    pub fn tag(self) -> &'static str {
        match self {
            RateRegime::Above => "q>d/2",
            RateRegime::Critical => "q=d/2",
            RateRegime::Below => "q<d/2",
        }
    }
}

/// Predicted decay `E[W_q^q(mu_N, mu)] ~ N^exponent` (times `log(1+N)` when
/// `log_factor` is set).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateExponents {
    pub q: f64,
    pub d: usize,
    pub p: f64,
    pub exponent: f64,
    pub log_factor: bool,
    pub regime: RateRegime,
}

/// Dominant term of the empirical-measure rate for i.i.d. samples with a
/// finite `p`-th moment:
///
/// | regime    | terms                                   | excluded        |
/// |-----------|-----------------------------------------|-----------------|
/// | `q > d/2` | `N^-1/2 + N^-(p-q)/p`                   | `p = 2q`        |
/// | `q = d/2` | `N^-1/2 log(1+N) + N^-(p-q)/p`          | `p = 2q`        |
/// | `q < d/2` | `N^-q/d + N^-(p-q)/p`                   | `p = d/(d-q)`   |
pub fn predicted_exponent(q: f64, d: usize, p: f64) -> Result<RateExponents> {
    if !(q >= 1.0) || !q.is_finite() {
        return Err(HerdError::invalid(format!("q = {q} must be at least 1")));
    }
    if !(1..=3).contains(&d) {
        return Err(HerdError::invalid(format!("d = {d} outside 1..=3")));
    }
    if !p.is_finite() {
        return Err(HerdError::invalid(format!("p = {p} must be finite")));
    }
    if q >= p {
        return Err(HerdError::Unsupported(format!(
            "no quantitative rate when q >= p (q = {q}, p = {p})"
        )));
    }
    let half_d = d as f64 / 2.0;
    let moment_term = -(p - q) / p;
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0);
    let (regime, main, excluded) = if close(q, half_d) {
        (RateRegime::Critical, -0.5, close(p, 2.0 * q))
    } else if q > half_d {
        (RateRegime::Above, -0.5, close(p, 2.0 * q))
    } else {
        (RateRegime::Below, -q / d as f64, close(p, d as f64 / (d as f64 - q)))
    };
    if excluded {
        return Err(HerdError::Unsupported(format!(
            "degenerate parameters q = {q}, d = {d}, p = {p}"
        )));
    }
    let (exponent, log_factor) = if main >= moment_term {
        (main, regime == RateRegime::Critical)
    } else {
        (moment_term, false)
    };
    Ok(RateExponents {
        q,
        d,
        p,
        exponent,
        log_factor,
        regime,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateRow {
    pub n: usize,
    /// Replicas that completed.
    pub replicas: usize,
    pub q: f64,
    pub coupled_err: f64,
    pub coupled_se: f64,
    pub wq_err: f64,
    pub wq_se: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateTable {
    pub q: f64,
    pub rows: Vec<RateRow>,
    /// `(N, failed replicas)` for rows dropped after too many blowups.
    pub dropped: Vec<(usize, usize)>,
}

pub const RATE_TABLE_HEADER: &str = "N,replicas,q,coupled_err,coupled_se,wq_err,wq_se";

impl RateTable {
    pub fn to_csv(&self) -> String {
        let mut s = format!("{RATE_TABLE_HEADER}\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.n, r.replicas, r.q, r.coupled_err, r.coupled_se, r.wq_err, r.wq_se
            ));
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateColumn {
    Coupled,
    Wasserstein,
}

impl RateColumn {
    pub fn name(self) -> &'static str {
        match self {
            RateColumn::Coupled => "coupled_err",
            RateColumn::Wasserstein => "wq_err",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogLogFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// Ordinary least squares of `log y` on `log x`.
pub fn fit_power_law(xs: &[f64], ys: &[f64]) -> Result<LogLogFit> {
    if xs.len() != ys.len() {
        return Err(HerdError::Fit(format!("{} abscissae for {} values", xs.len(), ys.len())));
    }
    if xs.len() < 3 {
        return Err(HerdError::Fit(format!("need at least 3 rows, got {}", xs.len())));
    }
    if let Some(v) = xs.iter().chain(ys).find(|v| !(**v > 0.0) || !v.is_finite()) {
        return Err(HerdError::Fit(format!("non-positive or non-finite value {v}")));
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(HerdError::Fit("all abscissae are equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = ly.iter().map(|y| (y - my) * (y - my)).sum();
    let ss_res: f64 = lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| {
            let r = y - (intercept + slope * x);
            r * r
        })
        .sum();
    let r2 = if ss_tot <= f64::EPSILON * ly.len() as f64 * my.abs().max(1.0) {
        1.0
    } else {
        1.0 - ss_res / ss_tot
    };
    Ok(LogLogFit { slope, intercept, r2 })
}

/// Log-log fit of one error column against `N`.
pub fn fit_loglog_slope(table: &RateTable, column: RateColumn) -> Result<LogLogFit> {
    let xs: Vec<f64> = table.rows.iter().map(|r| r.n as f64).collect();
    let ys: Vec<f64> = table
        .rows
        .iter()
        .map(|r| match column {
            RateColumn::Coupled => r.coupled_err,
            RateColumn::Wasserstein => r.wq_err,
        })
        .collect();
    fit_power_law(&xs, &ys)
}

fn pow_q(x: f64, q: f64) -> f64 {
    if q == 1.0 {
        x
    } else {
        x.powf(q)
    }
}

/// `max_n sup_t |X_n - Xbar_n|^q + sup_t |Y - Ybar|^q` over the first
/// `fin.n` particles.
fn coupled_error(fin: &TrajectoryBundle, reference: &TrajectoryBundle, q: f64) -> f64 {
    let d = fin.d;
    let mut herd = 0.0_f64;
    let mut herders = 0.0_f64;
    for k in 0..fin.times.len() {
        let a = fin.herd_at(k);
        let b = &reference.herd_at(k)[..fin.n * d];
        for (x, y) in a.chunks(d).zip(b.chunks(d)) {
            herd = herd.max(max_dist(x, y));
        }
        herders = herders.max(max_dist(fin.herders_at(k), reference.herders_at(k)));
    }
    pow_q(herd, q) + pow_q(herders, q)
}

/// Per-`N` error table comparing the finite system with the coupled
/// reference ensemble.
///
/// For each replica the `n_ref` ensemble is simulated once. For each `N`
/// the finite system shares its first `N` particles' initial data and
/// idiosyncratic increments and the whole common path. Column `a` is the
/// coupled path error, column `b` is `W_q^q(mu_N(T), nu)` with `nu` a seeded
/// size-`N` subsample (without replacement) of the ensemble at `T`. Rows
/// with more than 10% failed replicas are dropped.
#[allow(clippy::too_many_arguments)]
pub fn run_rate_experiment<C: HerderControl + ?Sized>(
    spec: &SystemSpec,
    control: &C,
    n_list: &[usize],
    n_ref: usize,
    replicas: usize,
    q: f64,
    seed: u64,
) -> Result<RateTable> {
    if n_list.is_empty() || n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(HerdError::invalid("N list must be non-empty and strictly increasing"));
    }
    if *n_list.last().unwrap() > n_ref {
        return Err(HerdError::invalid(format!("every N must be at most N_ref = {n_ref}")));
    }
    if replicas < 8 {
        return Err(HerdError::invalid(format!("{replicas} replicas; at least 8 are required")));
    }
    if !(q >= 1.0) {
        return Err(HerdError::invalid(format!("q = {q} must be at least 1")));
    }
    spec.check()?;

    // outcome[r][i]: Some((a, b)) or None for a blowup
    let outcomes: Vec<Result<Vec<Option<(f64, f64)>>>> = (0..replicas as u64)
        .into_par_iter()
        .map(|r| {
            let key = StreamKey::new(seed, r);
            let reference = match simulate(spec, control, n_ref, key, RunOptions::default()) {
                Ok(b) => b,
                Err(HerdError::Blowup { .. }) => return Ok(vec![None; n_list.len()]),
                Err(e) => return Err(e),
            };
            let terminal = reference.terminal();
            let mut row = Vec::with_capacity(n_list.len());
            for &n in n_list {
                let fin = match simulate(&spec.with_n(n), control, n, key, RunOptions::default()) {
                    Ok(b) => b,
                    Err(HerdError::Blowup { .. }) => {
                        row.push(None);
                        continue;
                    }
                    Err(e) => return Err(e),
                };
                let a = coupled_error(&fin, &reference, q);
                let mut rng = stream(seed, StreamKind::Subsample, r, n as u64);
                let mut idx = sample(&mut rng, n_ref, n).into_vec();
                idx.sort_unstable();
                let proxy = terminal.select(&idx)?;
                let w = wasserstein(&fin.terminal(), &proxy, q)?;
                row.push(Some((a, pow_q(w, q))));
            }
            Ok(row)
        })
        .collect();
    let outcomes: Vec<Vec<Option<(f64, f64)>>> = outcomes.into_iter().collect::<Result<_>>()?;

    let mut rows = Vec::new();
    let mut dropped = Vec::new();
    for (i, &n) in n_list.iter().enumerate() {
        let ok: Vec<(f64, f64)> = outcomes.iter().filter_map(|o| o[i]).collect();
        let failed = replicas - ok.len();
        if failed * 10 > replicas {
            dropped.push((n, failed));
            continue;
        }
        let (ca, sa) = mean_se(&ok.iter().map(|v| v.0).collect::<Vec<_>>());
        let (cb, sb) = mean_se(&ok.iter().map(|v| v.1).collect::<Vec<_>>());
        rows.push(RateRow {
            n,
            replicas: ok.len(),
            q,
            coupled_err: ca,
            coupled_se: sa,
            wq_err: cb,
            wq_se: sb,
        });
    }
    Ok(RateTable { q, rows, dropped })
}
