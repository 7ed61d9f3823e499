//! Equivalent-channel estimation, block-diagonalization precoding on the
//! RF chains, and fully digital reference systems.

use rand::RngCore;

use crate::error::{Error, Result};
use crate::scalar::{frob_sqr, norm_sqr, real, CMatrix, CVector, Real, C};
use crate::signal::TrainingLink;

/// Relative singular-value threshold for rank decisions.
pub const RANK_TOL: f64 = 1e-10;

/// Estimated rows `ĥ_eq,u[k]` (length `N_rf`) on the pilot subcarriers.
#[derive(Debug, Clone, PartialEq)]
pub struct EquivalentChannel<T: Real> {
    pilots: Vec<usize>,
    /// `rows[u][i]` is user `u` on pilot `pilots[i]`, stored as a column vector.
    rows: Vec<Vec<CVector<T>>>,
}

impl<T: Real> EquivalentChannel<T> {
    pub fn new(pilots: Vec<usize>, rows: Vec<Vec<CVector<T>>>) -> Result<Self> {
        if rows.iter().any(|r| r.len() != pilots.len()) {
            return Err(Error::Shape("one equivalent-channel row per user and pilot".into()));
        }
        Ok(Self { pilots, rows })
    }

    pub fn pilots(&self) -> &[usize] {
        &self.pilots
    }

    pub fn num_users(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, u: usize, pilot_pos: usize) -> &CVector<T> {
        &self.rows[u][pilot_pos]
    }

    /// All users' rows on one pilot.
    pub fn rows_at(&self, pilot_pos: usize) -> Vec<CVector<T>> {
        self.rows.iter().map(|r| r[pilot_pos].clone()).collect()
    }
}

/// Position of the pilot closest to subcarrier `k`; the lower pilot wins ties.
pub fn nearest_pilot(pilots: &[usize], k: usize) -> usize {
    let mut best = 0;
    for (i, &p) in pilots.iter().enumerate() {
        if p.abs_diff(k) < pilots[best].abs_diff(k) {
            best = i;
        }
    }
    best
}

/// One uplink training per user with `g_u*` while the AP receives through
/// `P_an`; the per-chain ML estimates form `ĥ_eq,u[k]`.
pub fn estimate_equivalent_channels<T: Real, R: RngCore>(
    links: &[TrainingLink<'_, T>],
    p_an: &CMatrix<T>,
    g_star: &[CVector<T>],
    mut rng_for: impl FnMut(usize) -> R,
) -> Result<EquivalentChannel<T>> {
    if links.len() != g_star.len() || links.is_empty() {
        return Err(Error::Shape(format!(
            "{} links for {} STA beamformers",
            links.len(),
            g_star.len()
        )));
    }
    let pilots = links[0].training.pilots().to_vec();
    let mut rows = Vec::with_capacity(links.len());
    for (u, (link, g)) in links.iter().zip(g_star).enumerate() {
        let est = link.uplink(p_an, g, &mut rng_for(u))?;
        let per_pilot = (0..pilots.len())
            .map(|i| CVector::from_iterator(est.len(), est.iter().map(|chain| chain[i])))
            .collect();
        rows.push(per_pilot);
    }
    EquivalentChannel::new(pilots, rows)
}

/// True `g_u^H H_u P_an` as a column vector of length `N_rf`.
pub fn equivalent_row<T: Real>(g: &CVector<T>, h: &CMatrix<T>, p_an: &CMatrix<T>) -> CVector<T> {
    let gh = h.ad_mul(g); // (g^H H)^H
    p_an.tr_mul(&gh.conjugate())
}

/// Orthonormal basis (as columns) of the null space of `a`.
///
/// Rows are zero-padded to a square matrix when needed so the full right
/// singular basis is available. A singular value counts as zero when it is
/// at most `1e-10·σ_max`; an all-zero `a` has the whole space as null space.
pub fn null_space<T: Real>(a: &CMatrix<T>) -> CMatrix<T> {
    let n = a.ncols();
    if a.nrows() == 0 {
        return CMatrix::identity(n, n);
    }
    let padded;
    let m = if a.nrows() < n {
        padded = a.clone().resize_vertically(n, C::new(T::zero(), T::zero()));
        &padded
    } else {
        a
    };
    let svd = m.clone().svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let s = &svd.singular_values;
    let smax = s.iter().fold(T::zero(), |acc, &x| if x > acc { x } else { acc });
    let tol = T::lit(RANK_TOL) * smax;
    let cols: Vec<CVector<T>> = (0..n)
        .filter(|&i| smax == T::zero() || s[i] <= tol)
        .map(|i| v_t.row(i).adjoint())
        .collect();
    if cols.is_empty() {
        CMatrix::zeros(n, 0)
    } else {
        CMatrix::from_columns(&cols)
    }
}

fn stack_rows<T: Real>(rows: &[&CVector<T>], width: usize) -> CMatrix<T> {
    CMatrix::from_fn(rows.len(), width, |r, c| rows[r][c])
}

/// BD precoder on one subcarrier.
///
/// `rows[u]` holds `ĥ_eq,u` (length `N_rf`). Column `u` is the projection of
/// `ĥ_eq,u^H` onto the null space of the other users' rows, rescaled so that
/// `‖P_an P_di[:,u]‖² = 1/U`, hence `‖P_an P_di‖_F = 1`.
pub fn bd_precoder<T: Real>(rows: &[CVector<T>], p_an: &CMatrix<T>) -> Result<CMatrix<T>> {
    let users = rows.len();
    let n_rf = p_an.ncols();
    if users == 0 || rows.iter().any(|r| r.len() != n_rf) {
        return Err(Error::Shape(format!(
            "BD needs rows of length N_rf = {n_rf} for at least one user"
        )));
    }
    if users > n_rf {
        return Err(Error::Infeasible(format!("{users} users exceed {n_rf} RF chains")));
    }
    let share = T::one() / T::lit(users as f64);
    let mut cols = Vec::with_capacity(users);
    for u in 0..users {
        let others: Vec<&CVector<T>> = (0..users).filter(|&v| v != u).map(|v| &rows[v]).collect();
        let basis = null_space(&stack_rows(&others, n_rf));
        if basis.ncols() == 0 {
            return Err(Error::Infeasible(format!("no interference-free direction for user {}", u + 1)));
        }
        let target = rows[u].conjugate();
        let c = &basis * basis.ad_mul(&target);
        let radiated = norm_sqr(&(p_an * &c));
        let reference = norm_sqr(&target) * frob_sqr(p_an) / T::lit(n_rf as f64);
        if !(radiated > T::lit(RANK_TOL * RANK_TOL) * reference) {
            return Err(Error::Infeasible(format!(
                "user {} lies in the span of the other users' channels",
                u + 1
            )));
        }
        cols.push(c * real((share / radiated).sqrt()));
    }
    Ok(CMatrix::from_columns(&cols))
}

/// BD precoders for every subcarrier in `subcarriers`.
///
/// With estimates, each subcarrier reuses the precoder of its nearest pilot.
pub fn bd_precoders_held<T: Real>(
    eq: &EquivalentChannel<T>,
    p_an: &CMatrix<T>,
    subcarriers: &[usize],
) -> Result<Vec<CMatrix<T>>> {
    let at_pilots: Vec<CMatrix<T>> = (0..eq.pilots().len())
        .map(|i| bd_precoder(&eq.rows_at(i), p_an))
        .collect::<Result<_>>()?;
    Ok(subcarriers
        .iter()
        .map(|&k| at_pilots[nearest_pilot(eq.pilots(), k)].clone())
        .collect())
}

/// Per-user rates and their sum (bits/s/Hz).
#[derive(Debug, Clone, PartialEq)]
pub struct UserRates<T> {
    pub per_user: Vec<T>,
}

impl<T: Real> UserRates<T> {
    pub fn sum(&self) -> T {
        self.per_user.iter().fold(T::zero(), |a, &b| a + b)
    }
}

fn log2_1p<T: Real>(x: T) -> T {
    (T::one() + x).log2()
}

/// Dominant singular value squared and right singular vector.
fn dominant<T: Real>(m: &CMatrix<T>) -> (T, CVector<T>) {
    let svd = m.clone().svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let s = &svd.singular_values;
    let mut best = 0;
    for i in 1..s.len() {
        if s[i] > s[best] {
            best = i;
        }
    }
    (s[best] * s[best], v_t.row(best).adjoint())
}

/// Per-user BD gains `σ_max²(H_u N_u)` for one subcarrier of a fully digital
/// system, where `N_u` spans the null space of the other users' matrices.
pub fn fully_digital_bd_gains<T: Real>(channels: &[&CMatrix<T>]) -> Result<Vec<T>> {
    let users = channels.len();
    let m_ap = channels
        .first()
        .map(|h| h.ncols())
        .ok_or_else(|| Error::Shape("no users".into()))?;
    if channels.iter().any(|h| h.ncols() != m_ap) {
        return Err(Error::Shape("users disagree on M_ap".into()));
    }
    if users > m_ap {
        return Err(Error::Infeasible(format!("{users} streams exceed {m_ap} AP antennas")));
    }
    (0..users)
        .map(|u| {
            let h_u = channels[u];
            if users == 1 {
                return Ok(dominant(h_u).0);
            }
            let rows: usize = channels.iter().enumerate().filter(|&(v, _)| v != u).map(|(_, h)| h.nrows()).sum();
            let mut stacked = CMatrix::zeros(rows, m_ap);
            let mut r0 = 0;
            for (v, h) in channels.iter().enumerate() {
                if v != u {
                    stacked.rows_mut(r0, h.nrows()).copy_from(*h);
                    r0 += h.nrows();
                }
            }
            let basis = null_space(&stacked);
            if basis.ncols() == 0 {
                return Err(Error::Infeasible(format!("user {} has no null-space dimension", u + 1)));
            }
            Ok(dominant(&(h_u * basis)).0)
        })
        .collect()
}

/// Rates from per-user, per-subcarrier gains: `(1/K)Σ_k log2(1 + ρ g/(K U σ²))`.
///
/// Each stream carries `ρ/K` per subcarrier, split equally over `U` users.
pub fn rates_from_gains<T: Real>(gains: &[Vec<T>], rho: T, noise: T, k: usize) -> UserRates<T> {
    let users = gains.len();
    let kk = T::lit(k as f64);
    let scale = rho / (kk * T::lit(users as f64) * noise);
    let per_user = gains
        .iter()
        .map(|gs| gs.iter().fold(T::zero(), |a, &g| a + log2_1p(scale * g)) / T::lit(gs.len() as f64))
        .collect();
    UserRates { per_user }
}

/// Fully digital BD with eigenbeamforming receivers and perfect CSI.
///
/// `channels[u][i]` is user `u` on the `i`-th evaluated subcarrier; rates
/// are averaged over the evaluated subcarriers.
pub fn fully_digital_bd_baseline<T: Real>(channels: &[Vec<CMatrix<T>>], rho: T, noise: T, k: usize) -> Result<UserRates<T>> {
    let gains = per_subcarrier_gains(channels)?;
    Ok(rates_from_gains(&gains, rho, noise, k))
}

/// `gains[u][i]` for [`fully_digital_bd_baseline`]; SNR independent, so
/// sweeps can compute it once.
pub fn per_subcarrier_gains<T: Real>(channels: &[Vec<CMatrix<T>>]) -> Result<Vec<Vec<T>>> {
    let users = channels.len();
    let n = channels.first().map_or(0, |c| c.len());
    let mut gains = vec![Vec::with_capacity(n); users];
    for i in 0..n {
        let hs: Vec<&CMatrix<T>> = channels.iter().map(|c| &c[i]).collect();
        for (u, g) in fully_digital_bd_gains(&hs)?.into_iter().enumerate() {
            gains[u].push(g);
        }
    }
    Ok(gains)
}

/// Single-user SVD beamforming: `(1/K)Σ_k log2(1 + ρσ_max²(H[k])/(Kσ²))`.
pub fn single_user_svd_baseline<T: Real>(channels: &[CMatrix<T>], rho: T, noise: T, k: usize) -> T {
    let gains: Vec<T> = channels.iter().map(|h| dominant(h).0).collect();
    rates_from_gains(&[gains], rho, noise, k).sum()
}
