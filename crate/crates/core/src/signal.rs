//! Per-subcarrier OFDM baseband models for training and data transmission,
//! and the ML estimator for post-beamforming channel coefficients.
//!
//! Power convention: every transmitted stream carries energy `ρ/K` per
//! subcarrier, so a beamformed link with unit-norm weights sees the factor
//! `√(ρ/K)` on its coefficient.

use rand::RngCore;

use crate::error::{Error, Result};
use crate::rng::complex_gaussian;
use crate::scalar::{norm_sqr, real, CMatrix, CVector, Real, C};

/// Relative tolerance applied to power-constraint contract checks.
const POWER_TOL: f64 = 1e-9;

/// `K_tx` pilot subcarriers spread uniformly over `1..=K`, both edges included.
pub fn pilot_indices(k: usize, k_tx: usize) -> Result<Vec<usize>> {
    if k_tx == 0 || k_tx > k {
        return Err(Error::config(format!(
            "pilot count K_tx = {k_tx} must be within 1..={k}"
        )));
    }
    if k_tx == 1 {
        return Ok(vec![1]);
    }
    let span = (k - 1) as f64 / (k_tx - 1) as f64;
    Ok((0..k_tx).map(|i| (i as f64 * span).round() as usize + 1).collect())
}

/// Known training sequences, one row of `T` unit-modulus QPSK symbols per pilot.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSignal<T: Real> {
    pilots: Vec<usize>,
    sequences: Vec<CVector<T>>,
}

impl<T: Real> TrainingSignal<T> {
    pub fn pilots(&self) -> &[usize] {
        &self.pilots
    }

    /// Sequence on the `i`-th pilot (position in [`Self::pilots`]).
    pub fn sequence(&self, i: usize) -> &CVector<T> {
        &self.sequences[i]
    }

    pub fn len(&self) -> usize {
        self.sequences.first().map_or(0, |s| s.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// QPSK training sequences of length `t` for each pilot.
pub fn gen_training<T: Real, R: RngCore + ?Sized>(rng: &mut R, pilots: &[usize], t: usize) -> Result<TrainingSignal<T>> {
    if t == 0 {
        return Err(Error::config("training length T must be at least 1"));
    }
    if pilots.is_empty() {
        return Err(Error::config("training needs at least one pilot subcarrier"));
    }
    let h = T::lit(std::f64::consts::FRAC_1_SQRT_2);
    let sequences = pilots
        .iter()
        .map(|_| {
            let mut bits = 0u32;
            CVector::from_fn(t, |i, _| {
                if i % 16 == 0 {
                    bits = rng.next_u32();
                }
                let b = bits >> (2 * (i % 16));
                let re = if b & 1 == 0 { h } else { -h };
                let im = if b & 2 == 0 { h } else { -h };
                C::new(re, im)
            })
        })
        .collect();
    Ok(TrainingSignal {
        pilots: pilots.to_vec(),
        sequences,
    })
}

/// Total transmit power `ρ` and noise variance `σ_z²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkBudget<T> {
    total_power: T,
    noise_variance: T,
}

impl<T: Real> LinkBudget<T> {
    /// `noise_variance = 0` is accepted for noiseless reference runs.
    pub fn new(total_power: T, noise_variance: T) -> Result<Self> {
        if !(total_power > T::zero()) || !(noise_variance >= T::zero()) || !noise_variance.is_finite() {
            return Err(Error::config(format!(
                "link budget needs ρ > 0 and finite σ² ≥ 0 (ρ = {total_power}, σ² = {noise_variance})"
            )));
        }
        Ok(Self {
            total_power,
            noise_variance,
        })
    }

    /// `ρ = 1`, `σ_z² = 10^(-snr/10)`.
    pub fn from_snr_db(snr_db: T) -> Self {
        Self {
            total_power: T::one(),
            noise_variance: T::lit(10.0).powf(-snr_db / T::lit(10.0)),
        }
    }

    pub fn noiseless(total_power: T) -> Self {
        Self {
            total_power,
            noise_variance: T::zero(),
        }
    }

    pub fn total_power(&self) -> T {
        self.total_power
    }

    pub fn noise_variance(&self) -> T {
        self.noise_variance
    }

    pub fn snr(&self) -> T {
        self.total_power / self.noise_variance
    }
}

fn check_dims<T: Real>(g: &CVector<T>, h: &CMatrix<T>, ap_len: usize) -> Result<()> {
    if g.len() != h.nrows() || ap_len != h.ncols() {
        return Err(Error::Shape(format!(
            "beamformers of length {} (STA) and {} (AP) do not fit a {}x{} channel",
            g.len(),
            ap_len,
            h.nrows(),
            h.ncols()
        )));
    }
    Ok(())
}

/// `g^H H` as a row (stored as a column vector of length `M_ap`).
fn sta_projection<T: Real>(g: &CVector<T>, h: &CMatrix<T>) -> CVector<T> {
    h.ad_mul(g).conjugate()
}

fn dot_row<T: Real>(row: &CVector<T>, p: impl Iterator<Item = C<T>>) -> C<T> {
    row.iter().zip(p).fold(C::new(T::zero(), T::zero()), |acc, (a, b)| acc + a * b)
}

/// Uplink coefficient `√(ρ/K) p^T H^T g* = √(ρ/K) g^H H p` for downlink `H`.
pub fn uplink_coefficient<T: Real>(p: &CVector<T>, g: &CVector<T>, h: &CMatrix<T>, rho: T, k: usize) -> Result<C<T>> {
    check_dims(g, h, p.len())?;
    let scale = (rho / T::lit(k as f64)).sqrt();
    Ok(dot_row(&sta_projection(g, h), p.iter().copied()) * real(scale))
}

/// Downlink coefficient `√(ρ/(K N_rf)) g^H H P_an 1`.
pub fn downlink_coefficient<T: Real>(g: &CVector<T>, h: &CMatrix<T>, p_an: &CMatrix<T>, rho: T, k: usize) -> Result<C<T>> {
    check_dims(g, h, p_an.nrows())?;
    let n_rf = p_an.ncols();
    let q = p_an.column_sum();
    let scale = (rho / T::lit((k * n_rf) as f64)).sqrt();
    Ok(dot_row(&sta_projection(g, h), q.iter().copied()) * real(scale))
}

/// `v̂ = y x^H / ‖x‖²`.
pub fn ml_estimate<T: Real>(y: &CVector<T>, x: &CVector<T>) -> Result<C<T>> {
    if y.len() != x.len() {
        return Err(Error::Shape(format!(
            "received length {} differs from training length {}",
            y.len(),
            x.len()
        )));
    }
    let energy = norm_sqr(x);
    if !(energy > T::zero()) {
        return Err(Error::Division("training sequence has zero energy"));
    }
    Ok(x.dotc(y) / real(energy))
}

fn check_ap_columns<T: Real>(p_an: &CMatrix<T>) -> Result<()> {
    let n_rf = p_an.ncols();
    let want = T::one() / T::lit(n_rf as f64);
    for (n, col) in p_an.column_iter().enumerate() {
        let e = col.iter().fold(T::zero(), |a, c| a + c.norm_sqr());
        if ComplexRealAbs::abs(e - want) > T::lit(POWER_TOL) * want {
            return Err(Error::Contract(format!(
                "RF chain {} has column power {e}, expected 1/N_rf = {want}",
                n + 1
            )));
        }
    }
    Ok(())
}

fn check_sta_power<T: Real>(g: &CVector<T>) -> Result<()> {
    let e = norm_sqr(g);
    if e > T::one() + T::lit(POWER_TOL) {
        return Err(Error::Contract(format!("STA beamformer power {e} exceeds 1")));
    }
    Ok(())
}

/// `|x|` for real scalars without the `Signed`/`ComplexField` ambiguity.
trait ComplexRealAbs {
    fn abs(self) -> Self;
}

impl<T: Real> ComplexRealAbs for T {
    fn abs(self) -> Self {
        if self < T::zero() {
            -self
        } else {
            self
        }
    }
}

fn noisy_sequence<T: Real, R: RngCore + ?Sized>(coef: C<T>, x: &CVector<T>, variance: T, rng: &mut R) -> CVector<T> {
    let mut y = x * coef;
    if variance > T::zero() {
        for s in y.iter_mut() {
            *s += complex_gaussian(rng, variance);
        }
    }
    y
}

/// Uplink training: per pilot, one received sequence per RF chain.
///
/// `channels[i]` is the downlink matrix on pilot `training.pilots()[i]`.
/// Noise on each chain has variance `σ_z²/N_rf`.
pub fn uplink_receive<T: Real, R: RngCore + ?Sized>(
    p_an: &CMatrix<T>,
    g: &CVector<T>,
    channels: &[CMatrix<T>],
    training: &TrainingSignal<T>,
    budget: &LinkBudget<T>,
    num_subcarriers: usize,
    rng: &mut R,
) -> Result<Vec<Vec<CVector<T>>>> {
    check_ap_columns(p_an)?;
    check_sta_power(g)?;
    check_pilot_count(channels, training)?;
    let n_rf = p_an.ncols();
    let var = budget.noise_variance / T::lit(n_rf as f64);
    let scale = real((budget.total_power / T::lit(num_subcarriers as f64)).sqrt());
    channels
        .iter()
        .enumerate()
        .map(|(i, h)| {
            check_dims(g, h, p_an.nrows())?;
            let row = sta_projection(g, h);
            let x = training.sequence(i);
            Ok((0..n_rf)
                .map(|n| {
                    let v = dot_row(&row, p_an.column(n).iter().copied()) * scale;
                    noisy_sequence(v, x, var, rng)
                })
                .collect())
        })
        .collect()
}

/// Downlink training: one received sequence per pilot, noise variance `σ_z²`.
pub fn downlink_receive<T: Real, R: RngCore + ?Sized>(
    g: &CVector<T>,
    channels: &[CMatrix<T>],
    p_an: &CMatrix<T>,
    training: &TrainingSignal<T>,
    budget: &LinkBudget<T>,
    num_subcarriers: usize,
    rng: &mut R,
) -> Result<Vec<CVector<T>>> {
    check_ap_columns(p_an)?;
    check_sta_power(g)?;
    check_pilot_count(channels, training)?;
    channels
        .iter()
        .enumerate()
        .map(|(i, h)| {
            let w = downlink_coefficient(g, h, p_an, budget.total_power, num_subcarriers)?;
            Ok(noisy_sequence(w, training.sequence(i), budget.noise_variance, rng))
        })
        .collect()
}

fn check_pilot_count<T: Real>(channels: &[CMatrix<T>], training: &TrainingSignal<T>) -> Result<()> {
    if channels.len() != training.pilots().len() {
        return Err(Error::Shape(format!(
            "{} channel matrices for {} pilots",
            channels.len(),
            training.pilots().len()
        )));
    }
    Ok(())
}

/// Broadcast data on one subcarrier:
/// `y_u = √(ρ/K) g_u^H H_u P_an P_di s + z_u`, `z_u ~ CN(0, σ_z²)`.
#[allow(clippy::too_many_arguments)]
pub fn multiuser_downlink_signal<T: Real, R: RngCore + ?Sized>(
    channels: &[CMatrix<T>],
    g: &[CVector<T>],
    p_an: &CMatrix<T>,
    p_di: &CMatrix<T>,
    s: &CVector<T>,
    budget: &LinkBudget<T>,
    num_subcarriers: usize,
    rng: &mut R,
) -> Result<Vec<C<T>>> {
    let users = channels.len();
    if g.len() != users || p_di.ncols() != users || s.len() != users || p_an.ncols() != p_di.nrows() {
        return Err(Error::Shape(format!(
            "{} channels, {} STA beamformers, P_di {}x{}, {} symbols",
            users,
            g.len(),
            p_di.nrows(),
            p_di.ncols(),
            s.len()
        )));
    }
    let f = p_an * p_di;
    let fro = crate::scalar::frob_sqr(&f);
    if ComplexRealAbs::abs(fro - T::one()) > T::lit(POWER_TOL) {
        return Err(Error::Contract(format!("‖P_an P_di‖_F² = {fro}, expected 1")));
    }
    for gu in g {
        check_sta_power(gu)?;
    }
    let x = f * s * real((budget.total_power / T::lit(num_subcarriers as f64)).sqrt());
    channels
        .iter()
        .zip(g)
        .map(|(h, gu)| {
            check_dims(gu, h, x.len())?;
            let clean = dot_row(&sta_projection(gu, h), x.iter().copied());
            let noise = if budget.noise_variance > T::zero() {
                complex_gaussian(rng, budget.noise_variance)
            } else {
                C::new(T::zero(), T::zero())
            };
            Ok(clean + noise)
        })
        .collect()
}

/// How training estimates are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorModel {
    /// Synthesize all `T` received samples, then apply [`ml_estimate`].
    Sequence,
    /// Draw the estimate directly from its exact distribution
    /// `v + CN(0, σ_n²/‖x‖²)`; equivalent in law to `Sequence`, `T` times cheaper.
    #[default]
    SufficientStatistic,
}

/// Channel, training and noise setup for one user's training exchanges.
#[derive(Debug, Clone, Copy)]
pub struct TrainingLink<'a, T: Real> {
    /// Downlink matrices on the pilot subcarriers, in pilot order.
    pub channels: &'a [CMatrix<T>],
    pub training: &'a TrainingSignal<T>,
    pub budget: LinkBudget<T>,
    pub num_subcarriers: usize,
    pub model: EstimatorModel,
}

impl<T: Real> TrainingLink<'_, T> {
    fn estimate<R: RngCore + ?Sized>(&self, coef: C<T>, pilot: usize, variance: T, rng: &mut R) -> Result<C<T>> {
        match self.model {
            EstimatorModel::Sequence => {
                let x = self.training.sequence(pilot);
                ml_estimate(&noisy_sequence(coef, x, variance, rng), x)
            }
            EstimatorModel::SufficientStatistic => {
                if variance > T::zero() {
                    let energy = norm_sqr(self.training.sequence(pilot));
                    Ok(coef + complex_gaussian(rng, variance / energy))
                } else {
                    Ok(coef)
                }
            }
        }
    }

    /// `g^H H[k]` on every pilot, reusable across AP receive matrices.
    pub fn sta_rows(&self, g: &CVector<T>) -> Result<Vec<CVector<T>>> {
        check_pilot_count(self.channels, self.training)?;
        self.channels
            .iter()
            .map(|h| {
                check_dims(g, h, h.ncols())?;
                Ok(sta_projection(g, h))
            })
            .collect()
    }

    /// One uplink transmission: estimates `v̂_n[k]` indexed `[chain][pilot]`.
    pub fn uplink<R: RngCore + ?Sized>(&self, p_an: &CMatrix<T>, g: &CVector<T>, rng: &mut R) -> Result<Vec<Vec<C<T>>>> {
        let rows = self.sta_rows(g)?;
        self.uplink_from_rows(&rows, p_an, rng)
    }

    /// [`Self::uplink`] with the STA side already projected by [`Self::sta_rows`].
    pub fn uplink_from_rows<R: RngCore + ?Sized>(
        &self,
        rows: &[CVector<T>],
        p_an: &CMatrix<T>,
        rng: &mut R,
    ) -> Result<Vec<Vec<C<T>>>> {
        if rows.len() != self.training.pilots().len() || rows.iter().any(|r| r.len() != p_an.nrows()) {
            return Err(Error::Shape("projected rows do not match the pilots or P_an".into()));
        }
        let n_rf = p_an.ncols();
        let var = self.budget.noise_variance / T::lit(n_rf as f64);
        let scale = real((self.budget.total_power / T::lit(self.num_subcarriers as f64)).sqrt());
        let mut out = vec![Vec::with_capacity(rows.len()); n_rf];
        for (i, row) in rows.iter().enumerate() {
            for (n, chain) in out.iter_mut().enumerate() {
                let v = dot_row(row, p_an.column(n).iter().copied()) * scale;
                chain.push(self.estimate(v, i, var, rng)?);
            }
        }
        Ok(out)
    }

    /// `H[k] P_an 1` on every pilot, reusable across STA beams.
    pub fn ap_columns(&self, p_an: &CMatrix<T>) -> Result<Vec<CVector<T>>> {
        check_pilot_count(self.channels, self.training)?;
        let q = p_an.column_sum();
        self.channels
            .iter()
            .map(|h| {
                if h.ncols() != q.len() {
                    return Err(Error::Shape(format!("P_an has {} rows for M_ap = {}", q.len(), h.ncols())));
                }
                Ok(h * &q)
            })
            .collect()
    }

    /// One downlink transmission: estimates `ŵ[k]` per pilot.
    pub fn downlink<R: RngCore + ?Sized>(&self, g: &CVector<T>, p_an: &CMatrix<T>, rng: &mut R) -> Result<Vec<C<T>>> {
        let cols = self.ap_columns(p_an)?;
        self.downlink_from_columns(g, &cols, p_an.ncols(), rng)
    }

    /// [`Self::downlink`] with the AP side already applied by [`Self::ap_columns`].
    pub fn downlink_from_columns<R: RngCore + ?Sized>(
        &self,
        g: &CVector<T>,
        cols: &[CVector<T>],
        n_rf: usize,
        rng: &mut R,
    ) -> Result<Vec<C<T>>> {
        if cols.len() != self.training.pilots().len() || cols.iter().any(|c| c.len() != g.len()) {
            return Err(Error::Shape("projected columns do not match the pilots or g".into()));
        }
        let scale = real((self.budget.total_power / T::lit((self.num_subcarriers * n_rf) as f64)).sqrt());
        cols.iter()
            .enumerate()
            .map(|(i, c)| {
                let w = g.dotc(c) * scale;
                self.estimate(w, i, self.budget.noise_variance, rng)
            })
            .collect()
    }
}

/// `Σ_k |v̂[k]|²`.
pub fn sum_power<T: Real>(estimates: &[C<T>]) -> T {
    estimates.iter().fold(T::zero(), |a, c| a + c.norm_sqr())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codebook::{build_orthogonal_set, narrow_matrix};
    use crate::rng::{stream, Domain};
    use approx::assert_relative_eq;

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> CMatrix<f64> {
        let mut rng = stream(seed, Domain::Channel, &[], 0);
        CMatrix::from_fn(rows, cols, |_, _| complex_gaussian(&mut rng, 1.0))
    }

    #[test]
    fn pilot_examples() {
        assert_eq!(pilot_indices(512, 4).unwrap(), vec![1, 171, 342, 512]);
        let p16 = pilot_indices(512, 16).unwrap();
        assert_eq!((p16.len(), p16[0], p16[15]), (16, 1, 512));
        assert_eq!(pilot_indices(8, 8).unwrap(), (1..=8).collect::<Vec<_>>());
        assert_eq!(pilot_indices(512, 1).unwrap(), vec![1]);
        assert!(pilot_indices(4, 5).is_err());
        assert!(pilot_indices(4, 0).is_err());
    }

    #[test]
    fn training_is_unit_modulus_and_reproducible() {
        let pilots = pilot_indices(512, 16).unwrap();
        let a: TrainingSignal<f64> = gen_training(&mut stream(5, Domain::Training, &[], 0), &pilots, 64).unwrap();
        let b: TrainingSignal<f64> = gen_training(&mut stream(5, Domain::Training, &[], 0), &pilots, 64).unwrap();
        assert_eq!(a, b);
        for i in 0..16 {
            assert_relative_eq!(norm_sqr(a.sequence(i)), 64.0, epsilon = 1e-12);
        }
        assert!(gen_training::<f64, _>(&mut stream(5, Domain::Training, &[], 0), &pilots, 0).is_err());
    }

    #[test]
    fn scalar_reductions() {
        let h = CMatrix::from_element(1, 1, C::new(0.5, -2.0));
        let one = CVector::from_element(1, C::new(1.0, 0.0));
        let v = uplink_coefficient(&one, &one, &h, 512.0, 512).unwrap();
        assert_eq!(v, C::new(0.5, -2.0));
        let v = uplink_coefficient(&one, &one, &h, 2.0, 8).unwrap();
        assert_relative_eq!(v.re, 0.25, epsilon = 1e-15);
        assert!(uplink_coefficient(&CVector::zeros(2), &one, &h, 1.0, 1).is_err());
    }

    #[test]
    fn reciprocity_with_shared_beam() {
        let h = random_matrix(4, 8, 9);
        let b = build_orthogonal_set::<f64>(8).unwrap();
        let p = b.get(3).unwrap().coefficients().clone();
        let p_an = narrow_matrix(&p, 4);
        let g = build_orthogonal_set::<f64>(4).unwrap().get(2).unwrap().coefficients().clone();
        let v = uplink_coefficient(&p_an.column(0).into_owned(), &g, &h, 1.0, 512).unwrap();
        let w = downlink_coefficient(&g, &h, &p_an, 1.0, 512).unwrap();
        assert!((v - w / 2.0).norm() < 1e-15 * w.norm().max(1.0));
        let direct = g.dotc(&(&h * &p)) * (1.0f64 / 512.0).sqrt();
        assert!((w - direct).norm() < 1e-14);
    }

    #[test]
    fn ml_estimate_examples() {
        let mut rng = stream(1, Domain::Training, &[], 0);
        let x = gen_training::<f64, _>(&mut rng, &[1], 64).unwrap().sequence(0).clone();
        let y = &x * C::new(0.0, 3.5);
        let e = ml_estimate(&y, &x).unwrap();
        assert!((e - C::new(0.0, 3.5)).norm() < 1e-14);
        let z = CVector::zeros(64);
        assert!(ml_estimate(&y, &z).is_err());
        let x2 = CVector::from_element(2, C::new(1.0, 0.0));
        let y2 = CVector::from_fn(2, |i, _| C::new(if i == 0 { 1.0 } else { -1.0 }, 0.0));
        assert_eq!(ml_estimate(&y2, &x2).unwrap(), C::new(0.0, 0.0));
    }

    #[test]
    fn uplink_noise_calibration() {
        let h = random_matrix(4, 8, 11);
        let b = build_orthogonal_set::<f64>(8).unwrap();
        let p_an = CMatrix::from_columns(&(1..=4).map(|l| b.get(l).unwrap().coefficients() * C::new(0.5, 0.0)).collect::<Vec<_>>());
        let g = CVector::from_element(4, C::new(0.5, 0.0));
        let pilots = pilot_indices(512, 4).unwrap();
        let mut rng = stream(12, Domain::Training, &[], 0);
        let tr = gen_training(&mut rng, &pilots, 64).unwrap();
        let chans = vec![h; 4];
        let budget = LinkBudget::new(1.0, 0.2).unwrap();
        let clean = uplink_receive(&p_an, &g, &chans, &tr, &LinkBudget::noiseless(1.0), 512, &mut rng).unwrap();
        assert_eq!(clean[0].len(), 4);
        let mut acc = 0.0;
        let mut count = 0usize;
        while count < 10_000 {
            let y = uplink_receive(&p_an, &g, &chans, &tr, &budget, 512, &mut rng).unwrap();
            for (yi, ci) in y.iter().zip(&clean) {
                for (a, b) in yi.iter().zip(ci) {
                    acc += (a - b).iter().map(|c| c.norm_sqr()).sum::<f64>();
                    count += a.len();
                }
            }
        }
        let ratio = acc / count as f64 / (0.2 / 4.0);
        assert!((0.95..=1.05).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn contract_violations() {
        let h = random_matrix(4, 8, 13);
        let bad = CMatrix::from_element(8, 4, C::new(1.0, 0.0));
        let g = CVector::from_element(4, C::new(0.5, 0.0));
        let tr = gen_training::<f64, _>(&mut stream(1, Domain::Training, &[], 0), &[1], 8).unwrap();
        let err = uplink_receive(&bad, &g, &[h], &tr, &LinkBudget::noiseless(1.0), 512, &mut stream(1, Domain::Data, &[], 0));
        assert!(matches!(err, Err(Error::Contract(_))));
    }

    #[test]
    fn zero_symbols_give_pure_noise() {
        let h = random_matrix(2, 4, 14);
        let b = build_orthogonal_set::<f64>(4).unwrap();
        let p_an = CMatrix::from_columns(&[b.get(1).unwrap().coefficients() * C::new(0.5f64.sqrt(), 0.0), b.get(2).unwrap().coefficients() * C::new(0.5f64.sqrt(), 0.0)]);
        let p_di = CMatrix::identity(2, 2);
        let g = vec![CVector::from_element(2, C::new(0.5f64.sqrt(), 0.0)); 2];
        let s = CVector::zeros(2);
        let mut rng = stream(2, Domain::Data, &[], 0);
        let budget = LinkBudget::new(1.0, 0.5).unwrap();
        let mut acc = 0.0;
        let n = 20_000;
        for _ in 0..n {
            let y = multiuser_downlink_signal(&[h.clone(), h.clone()], &g, &p_an, &p_di, &s, &budget, 512, &mut rng).unwrap();
            acc += y.iter().map(|c| c.norm_sqr()).sum::<f64>();
        }
        let ratio = acc / (2 * n) as f64 / 0.5;
        assert!((0.95..=1.05).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn estimator_models_agree_in_distribution() {
        let h = random_matrix(4, 8, 15);
        let b = build_orthogonal_set::<f64>(8).unwrap();
        let p_an = narrow_matrix(b.get(2).unwrap().coefficients(), 4);
        let g = CVector::from_element(4, C::new(0.5, 0.0));
        let tr = gen_training(&mut stream(3, Domain::Training, &[], 0), &[1], 64).unwrap();
        let chans = [h];
        let mk = |model| TrainingLink {
            channels: &chans,
            training: &tr,
            budget: LinkBudget::new(1.0, 0.01).unwrap(),
            num_subcarriers: 512,
            model,
        };
        let truth = downlink_coefficient(&g, &chans[0], &p_an, 1.0, 512).unwrap();
        for model in [EstimatorModel::Sequence, EstimatorModel::SufficientStatistic] {
            let link = mk(model);
            let mut rng = stream(4, Domain::SelectionNoise, &[], 0);
            let n = 10_000;
            let mut var = 0.0;
            for _ in 0..n {
                var += (link.downlink(&g, &p_an, &mut rng).unwrap()[0] - truth).norm_sqr();
            }
            let ratio = var / n as f64 / (0.01 / 64.0);
            assert!((0.9..=1.1).contains(&ratio), "{model:?}: {ratio}");
        }
    }
}
