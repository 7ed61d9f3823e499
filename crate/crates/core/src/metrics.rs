//! Exhaustive beam-pair oracle, beam-selection error rate, misalignment loss,
//! achievable sum rate and SNR-gap measurement.

use std::io::Write;

use crate::codebook::OrthogonalSet;
use crate::error::{Error, Result};
use crate::scalar::{CMatrix, CVector, Real, C};
use crate::signal::LinkBudget;
use crate::digital::UserRates;

/// Noiseless objectives `Σ_k |g^H H[k] p|²` for every pair in
/// `B(M_ue) × B(M_ap)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveTable<T> {
    m_ue: usize,
    m_ap: usize,
    /// Row-major `[sta_beam - 1][ap_beam - 1]`.
    values: Vec<T>,
}

impl<T: Real> ObjectiveTable<T> {
    /// `channels` are the downlink matrices on the pilot subcarriers.
    pub fn new(channels: &[CMatrix<T>], sta_set: &OrthogonalSet<T>, ap_set: &OrthogonalSet<T>) -> Result<Self> {
        let (m_ue, m_ap) = (sta_set.size(), ap_set.size());
        let mut values = vec![T::zero(); m_ue * m_ap];
        for h in channels {
            if h.shape() != (m_ue, m_ap) {
                return Err(Error::Shape(format!(
                    "{}x{} channel for {m_ue}x{m_ap} codebooks",
                    h.nrows(),
                    h.ncols()
                )));
            }
            let proj = sta_set.matrix().ad_mul(&(h * ap_set.matrix()));
            for i in 0..m_ue {
                for j in 0..m_ap {
                    values[i * m_ap + j] += proj[(i, j)].norm_sqr();
                }
            }
        }
        Ok(Self { m_ue, m_ap, values })
    }

    pub fn pairs(&self) -> usize {
        self.values.len()
    }

    /// Objective of `(b_ap, b_sta)`, both 1-based.
    pub fn get(&self, ap_beam: usize, sta_beam: usize) -> Result<T> {
        if ap_beam == 0 || ap_beam > self.m_ap {
            return Err(Error::index("AP beam", ap_beam, 1, self.m_ap));
        }
        if sta_beam == 0 || sta_beam > self.m_ue {
            return Err(Error::index("STA beam", sta_beam, 1, self.m_ue));
        }
        Ok(self.values[(sta_beam - 1) * self.m_ap + ap_beam - 1])
    }

    /// Best pair, ranked by AP beam then STA beam on ties.
    pub fn best(&self) -> OracleSolution<T> {
        let mut best = OracleSolution {
            ap_beam: 1,
            sta_beam: 1,
            objective: self.values[0],
        };
        for ap in 1..=self.m_ap {
            for sta in 1..=self.m_ue {
                let v = self.values[(sta - 1) * self.m_ap + ap - 1];
                if v > best.objective {
                    best = OracleSolution {
                        ap_beam: ap,
                        sta_beam: sta,
                        objective: v,
                    };
                }
            }
        }
        best
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleSolution<T> {
    pub ap_beam: usize,
    pub sta_beam: usize,
    pub objective: T,
}

/// Exhaustive noiseless search over every codebook pair.
pub fn oracle_exhaustive<T: Real>(
    channels: &[CMatrix<T>],
    ap_set: &OrthogonalSet<T>,
    sta_set: &OrthogonalSet<T>,
) -> Result<OracleSolution<T>> {
    if channels.is_empty() {
        return Err(Error::config("oracle needs at least one pilot subcarrier"));
    }
    Ok(ObjectiveTable::new(channels, sta_set, ap_set)?.best())
}

/// Fraction of paired outcomes where `(p, g)` differs from the oracle pair.
pub fn bser(selected: &[(usize, usize)], oracle: &[(usize, usize)]) -> Result<f64> {
    if selected.len() != oracle.len() {
        return Err(Error::Shape(format!(
            "{} selections paired with {} oracle results",
            selected.len(),
            oracle.len()
        )));
    }
    if selected.is_empty() {
        return Err(Error::Division("no realizations to average"));
    }
    let errors = selected.iter().zip(oracle).filter(|(a, b)| a != b).count();
    Ok(errors as f64 / selected.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossSummary {
    pub mean_db: f64,
    pub used: usize,
    /// Pairs skipped because the algorithm's objective was zero.
    pub excluded: usize,
}

/// Mean of `10 log10(oracle/algorithm)` over paired noiseless objectives.
pub fn misalignment_loss_db<T: Real>(algorithm: &[T], oracle: &[T]) -> Result<LossSummary> {
    if algorithm.len() != oracle.len() {
        return Err(Error::Shape(format!(
            "{} algorithm objectives paired with {} oracle objectives",
            algorithm.len(),
            oracle.len()
        )));
    }
    let mut acc = 0.0;
    let mut used = 0;
    for (a, o) in algorithm.iter().zip(oracle) {
        let (a, o) = (a.as_f64(), o.as_f64());
        if a > 0.0 {
            acc += 10.0 * (o / a).log10();
            used += 1;
        }
    }
    if used == 0 {
        return Err(Error::Division("every algorithm objective is zero"));
    }
    Ok(LossSummary {
        mean_db: acc / used as f64,
        used,
        excluded: algorithm.len() - used,
    })
}

/// `10 log10(oracle/algorithm)` for one realization; `None` when undefined.
pub fn loss_db<T: Real>(algorithm: T, oracle: T) -> Option<f64> {
    let a = algorithm.as_f64();
    (a > 0.0).then(|| 10.0 * (oracle.as_f64() / a).log10())
}

/// Signal and interference powers of every user on one subcarrier.
///
/// `η_u = (ρ/K)|g_u^H H_u F_u|²` with `F = P_an P_di`.
pub fn sinr_terms<T: Real>(
    channels: &[&CMatrix<T>],
    g: &[CVector<T>],
    f: &CMatrix<T>,
    budget: &LinkBudget<T>,
    num_subcarriers: usize,
) -> Vec<(T, T)> {
    let scale = budget.total_power() / T::lit(num_subcarriers as f64);
    channels
        .iter()
        .zip(g)
        .enumerate()
        .map(|(u, (h, gu))| {
            let row = h.ad_mul(gu).conjugate(); // (g^H H) as a column
            let gains: Vec<T> = f
                .column_iter()
                .map(|c| row.iter().zip(c.iter()).fold(C::new(T::zero(), T::zero()), |a, (x, y)| a + x * y).norm_sqr() * scale)
                .collect();
            let signal = gains[u];
            let inter = gains.iter().enumerate().filter(|&(v, _)| v != u).fold(T::zero(), |a, (_, &x)| a + x);
            (signal, inter)
        })
        .collect()
}

/// `(1/N)Σ_k Σ_u log2(1 + η_u/(η_u^inter + σ²))` over the `N` evaluated
/// subcarriers, using the true channel.
///
/// `channels[u][i]` and `f[i]` (the full precoder `P_an P_di`) refer to the
/// `i`-th evaluated subcarrier.
pub fn achievable_sum_rate<T: Real>(
    channels: &[Vec<CMatrix<T>>],
    g: &[CVector<T>],
    f: &[CMatrix<T>],
    budget: &LinkBudget<T>,
    num_subcarriers: usize,
) -> Result<UserRates<T>> {
    let users = channels.len();
    if g.len() != users || channels.iter().any(|c| c.len() != f.len()) || f.is_empty() {
        return Err(Error::Shape("rate evaluation inputs disagree in size".into()));
    }
    let noise = budget.noise_variance();
    let mut per_user = vec![T::zero(); users];
    for (i, fi) in f.iter().enumerate() {
        if fi.ncols() != users {
            return Err(Error::Shape(format!("precoder has {} columns for {users} users", fi.ncols())));
        }
        let hs: Vec<&CMatrix<T>> = channels.iter().map(|c| &c[i]).collect();
        for (u, (s, inter)) in sinr_terms(&hs, g, fi, budget, num_subcarriers).into_iter().enumerate() {
            per_user[u] += (T::one() + s / (inter + noise)).log2();
        }
    }
    let n = T::lit(f.len() as f64);
    Ok(UserRates {
        per_user: per_user.into_iter().map(|r| r / n).collect(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GapReport {
    /// Mean horizontal gap (dB) over the usable points.
    pub gap_db: f64,
    pub points_used: usize,
    /// Top-half points whose hybrid rate fell outside the baseline's range.
    pub points_skipped: usize,
}

/// SNR at which a monotone curve reaches `rate`, by linear interpolation.
fn snr_at_rate(snr_db: &[f64], rates: &[f64], rate: f64) -> Option<f64> {
    for i in 1..rates.len() {
        let (r0, r1) = (rates[i - 1], rates[i]);
        if (r0..=r1).contains(&rate) {
            if r1 == r0 {
                return Some(snr_db[i - 1]);
            }
            let t = (rate - r0) / (r1 - r0);
            return Some(snr_db[i - 1] + t * (snr_db[i] - snr_db[i - 1]));
        }
    }
    None
}

/// Horizontal dB shift between a hybrid and a baseline rate curve, averaged
/// over the upper half of the SNR grid.
pub fn snr_sweep_gap_db(snr_db: &[f64], hybrid: &[f64], baseline: &[f64]) -> Result<GapReport> {
    let n = snr_db.len();
    if hybrid.len() != n || baseline.len() != n || n < 2 {
        return Err(Error::Shape("gap needs two curves on the same grid of ≥ 2 points".into()));
    }
    let increasing = |v: &[f64]| v.windows(2).all(|w| w[1] >= w[0]);
    if !increasing(snr_db) || !increasing(hybrid) || !increasing(baseline) {
        return Err(Error::config("SNR grid and both rate curves must be non-decreasing"));
    }
    let mut acc = 0.0;
    let mut used = 0;
    let mut skipped = 0;
    for i in n / 2..n {
        match snr_at_rate(snr_db, baseline, hybrid[i]) {
            Some(s) => {
                acc += snr_db[i] - s;
                used += 1;
            }
            None => skipped += 1,
        }
    }
    if used == 0 {
        return Err(Error::Infeasible(format!(
            "rate ranges do not overlap on the upper half of the grid ({skipped} points skipped)"
        )));
    }
    Ok(GapReport {
        gap_db: acc / used as f64,
        points_used: used,
        points_skipped: skipped,
    })
}

/// One row of the Monte Carlo results table.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultsRow {
    pub config_id: String,
    pub snr_db: f64,
    pub realizations: usize,
    pub bser: f64,
    pub loss_db: f64,
    pub sum_rate_hybrid: f64,
    pub sum_rate_digital_bd: f64,
    pub excluded_count: usize,
}

pub const RESULTS_HEADER: [&str; 8] = [
    "config_id",
    "snr_db",
    "realizations",
    "bser",
    "loss_db",
    "sum_rate_hybrid",
    "sum_rate_digital_bd",
    "excluded_count",
];

pub fn write_results_csv<W: Write>(rows: &[ResultsRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RESULTS_HEADER)?;
    for r in rows {
        w.write_record([
            r.config_id.clone(),
            r.snr_db.to_string(),
            r.realizations.to_string(),
            r.bser.to_string(),
            r.loss_db.to_string(),
            r.sum_rate_hybrid.to_string(),
            r.sum_rate_digital_bd.to_string(),
            r.excluded_count.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
