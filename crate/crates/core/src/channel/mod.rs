//! Statistical multipath channels and per-subcarrier channel tensors.
//!
//! The downlink matrix at subcarrier `k` is
//! `H[k] = (I + S_ue) (Σ_ℓ α_ℓ a_ue(k, θ_ue,ℓ) a_ap(k, θ_ap,ℓ)^H) (I + S_ap)`.
//! The uplink matrix is always taken as `H[k]^T`; no separate uplink tensor
//! is ever stored.

mod file;

pub use file::{load_channel_file, read_channel, save_channel_file, write_channel, CHANNEL_MAGIC};

use rand::RngCore;

use crate::array::{array_response, coupled_identity, ArrayGeometry, CouplingModel, ElementPattern};
use crate::error::{Error, Result};
use crate::rng::{complex_gaussian, uniform};
use crate::scalar::{cis, CMatrix, CVector, Real, C};

/// Angles and complex gains of the propagation paths between two arrays.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSet<T: Real> {
    aod: Vec<T>,
    aoa: Vec<T>,
    gains: Vec<C<T>>,
}

impl<T: Real> PathSet<T> {
    pub fn new(aod: Vec<T>, aoa: Vec<T>, gains: Vec<C<T>>) -> Result<Self> {
        if aod.is_empty() || aod.len() != aoa.len() || aod.len() != gains.len() {
            return Err(Error::Shape(format!(
                "path set needs equal non-empty lengths, got aod {} aoa {} gains {}",
                aod.len(),
                aoa.len(),
                gains.len()
            )));
        }
        let bad = aod
            .iter()
            .chain(aoa.iter())
            .any(|&a| !(a >= T::zero() && a <= T::pi()));
        if bad {
            return Err(Error::config("path angles must lie in [0, π]"));
        }
        Ok(Self { aod, aoa, gains })
    }

    pub fn num_paths(&self) -> usize {
        self.gains.len()
    }

    /// Angles of departure at the AP.
    pub fn aod(&self) -> &[T] {
        &self.aod
    }

    /// Angles of arrival at the STA.
    pub fn aoa(&self) -> &[T] {
        &self.aoa
    }

    pub fn gains(&self) -> &[C<T>] {
        &self.gains
    }
}

/// Statistical model parameters shared by both link ends.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelConfig<T: Real> {
    pub power_profile_db: Vec<T>,
    pub coupling: CouplingModel<T>,
    pub pattern: ElementPattern<T>,
    /// Scale the profile so the path variances sum to one.
    pub normalize: bool,
}

impl<T: Real> ChannelConfig<T> {
    /// Single path, `α ~ CN(0, 1)`, default element pattern and no coupling.
    pub fn single_path() -> Self {
        Self {
            power_profile_db: vec![T::zero()],
            coupling: CouplingModel::none(),
            pattern: ElementPattern::default(),
            normalize: true,
        }
    }

    pub fn num_paths(&self) -> usize {
        self.power_profile_db.len()
    }

    /// Variance of each path gain.
    pub fn path_variances(&self) -> Result<Vec<T>> {
        if self.power_profile_db.is_empty() {
            return Err(Error::config("power profile needs at least one path"));
        }
        let ten = T::lit(10.0);
        let lin: Vec<T> = self
            .power_profile_db
            .iter()
            .map(|&db| ten.powf(db / ten))
            .collect();
        if !self.normalize {
            return Ok(lin);
        }
        let total = lin.iter().fold(T::zero(), |a, &b| a + b);
        Ok(lin.into_iter().map(|v| v / total).collect())
    }
}

/// Draws i.i.d. uniform angles on `[0, π]` and independent `CN(0, σ_ℓ²)` gains.
pub fn draw_paths<T: Real, R: RngCore + ?Sized>(rng: &mut R, config: &ChannelConfig<T>) -> Result<PathSet<T>> {
    let variances = config.path_variances()?;
    let n = variances.len();
    let mut aod = Vec::with_capacity(n);
    let mut aoa = Vec::with_capacity(n);
    let mut gains = Vec::with_capacity(n);
    for &var in &variances {
        aod.push(uniform(rng, T::zero(), T::pi()));
        aoa.push(uniform(rng, T::zero(), T::pi()));
        gains.push(complex_gaussian(rng, var));
    }
    Ok(PathSet { aod, aoa, gains })
}

/// Single-frequency channel matrix (`M_ue × M_ap`), coupling built on the fly.
pub fn channel_matrix<T: Real>(
    paths: &PathSet<T>,
    ap: &ArrayGeometry<T>,
    sta: &ArrayGeometry<T>,
    pattern: &ElementPattern<T>,
    coupling: &CouplingModel<T>,
    f_hz: T,
) -> Result<CMatrix<T>> {
    let synth = ChannelSynthesizer::new(*ap, *sta, *pattern, coupling, coupling, vec![f_hz])?;
    synth.matrix(paths, 0)
}

/// Builds channel matrices for a fixed list of frequencies, caching the
/// coupling factors per frequency.
#[derive(Debug, Clone)]
pub struct ChannelSynthesizer<T: Real> {
    ap: ArrayGeometry<T>,
    sta: ArrayGeometry<T>,
    pattern: ElementPattern<T>,
    frequencies: Vec<T>,
    /// `I + S_ue` per frequency, absent without coupling.
    sta_coupling: Option<Vec<CMatrix<T>>>,
    /// `(I + S_ap)^H` per frequency.
    ap_coupling_h: Option<Vec<CMatrix<T>>>,
}

impl<T: Real> ChannelSynthesizer<T> {
    pub fn new(
        ap: ArrayGeometry<T>,
        sta: ArrayGeometry<T>,
        pattern: ElementPattern<T>,
        ap_coupling: &CouplingModel<T>,
        sta_coupling: &CouplingModel<T>,
        frequencies: Vec<T>,
    ) -> Result<Self> {
        if frequencies.is_empty() {
            return Err(Error::config("channel synthesis needs at least one frequency"));
        }
        let sta_c = (!sta_coupling.is_none()).then(|| {
            frequencies
                .iter()
                .map(|&f| coupled_identity(&sta, sta_coupling, f))
                .collect()
        });
        let ap_c = (!ap_coupling.is_none()).then(|| {
            frequencies
                .iter()
                .map(|&f| coupled_identity(&ap, ap_coupling, f).adjoint())
                .collect()
        });
        Ok(Self {
            ap,
            sta,
            pattern,
            frequencies,
            sta_coupling: sta_c,
            ap_coupling_h: ap_c,
        })
    }

    pub fn frequencies(&self) -> &[T] {
        &self.frequencies
    }

    pub fn ap(&self) -> &ArrayGeometry<T> {
        &self.ap
    }

    pub fn sta(&self) -> &ArrayGeometry<T> {
        &self.sta
    }

    /// `H` at the `pos`-th cached frequency.
    pub fn matrix(&self, paths: &PathSet<T>, pos: usize) -> Result<CMatrix<T>> {
        let f = *self
            .frequencies
            .get(pos)
            .ok_or_else(|| Error::index("synthesizer frequency", pos, 0, self.frequencies.len() - 1))?;
        let m_ue = self.sta.num_elements();
        let m_ap = self.ap.num_elements();
        let mut h = CMatrix::zeros(m_ue, m_ap);
        for l in 0..paths.num_paths() {
            // Each path is rank one: fold the coupling into the two vectors.
            let mut u: CVector<T> = array_response(&self.sta, &self.pattern, f, paths.aoa[l]);
            let mut w: CVector<T> = array_response(&self.ap, &self.pattern, f, paths.aod[l]);
            if let Some(sc) = &self.sta_coupling {
                u = &sc[pos] * u;
            }
            if let Some(ac) = &self.ap_coupling_h {
                w = &ac[pos] * w;
            }
            u *= paths.gains[l];
            h.ger(C::new(T::one(), T::zero()), &u, &w.conjugate(), C::new(T::one(), T::zero()));
        }
        Ok(h)
    }

    /// Matrices at every cached frequency.
    pub fn matrices(&self, paths: &PathSet<T>) -> Result<Vec<CMatrix<T>>> {
        (0..self.frequencies.len()).map(|i| self.matrix(paths, i)).collect()
    }
}

/// Downlink channel matrices `H_u[k]` for every user on a set of subcarriers.
///
/// Subcarrier indices are 1-based and strictly increasing. A tensor built for
/// every subcarrier `1..=K` is *full band*; only full-band tensors can be
/// written to a channel file.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelTensor<T: Real> {
    num_subcarriers: usize,
    subcarriers: Vec<usize>,
    per_user: Vec<Vec<CMatrix<T>>>,
}

impl<T: Real> ChannelTensor<T> {
    pub fn new(num_subcarriers: usize, subcarriers: Vec<usize>, per_user: Vec<Vec<CMatrix<T>>>) -> Result<Self> {
        if per_user.is_empty() {
            return Err(Error::Shape("channel tensor needs at least one user".into()));
        }
        if subcarriers.is_empty() {
            return Err(Error::Shape("channel tensor needs at least one subcarrier".into()));
        }
        if subcarriers.windows(2).any(|w| w[0] >= w[1])
            || subcarriers[0] == 0
            || *subcarriers.last().unwrap() > num_subcarriers
        {
            return Err(Error::Shape(format!(
                "subcarrier indices must be strictly increasing within 1..={num_subcarriers}"
            )));
        }
        let (rows, cols) = per_user[0][0].shape();
        for (u, mats) in per_user.iter().enumerate() {
            if mats.len() != subcarriers.len() {
                return Err(Error::Shape(format!(
                    "user {} has {} matrices, expected {}",
                    u + 1,
                    mats.len(),
                    subcarriers.len()
                )));
            }
            if let Some(m) = mats.iter().find(|m| m.shape() != (rows, cols)) {
                return Err(Error::Shape(format!(
                    "user {} has a {}x{} matrix, expected {rows}x{cols}",
                    u + 1,
                    m.nrows(),
                    m.ncols()
                )));
            }
            if mats.iter().any(|m| m.iter().any(|c| !c.re.is_finite() || !c.im.is_finite())) {
                return Err(Error::Shape(format!("user {} has non-finite entries", u + 1)));
            }
        }
        Ok(Self {
            num_subcarriers,
            subcarriers,
            per_user,
        })
    }

    pub fn num_users(&self) -> usize {
        self.per_user.len()
    }

    /// Total subcarriers `K` of the OFDM grid.
    pub fn num_subcarriers(&self) -> usize {
        self.num_subcarriers
    }

    /// Subcarriers actually stored.
    pub fn subcarriers(&self) -> &[usize] {
        &self.subcarriers
    }

    pub fn is_full_band(&self) -> bool {
        self.subcarriers.len() == self.num_subcarriers
    }

    pub fn m_ue(&self) -> usize {
        self.per_user[0][0].nrows()
    }

    pub fn m_ap(&self) -> usize {
        self.per_user[0][0].ncols()
    }

    /// All stored matrices of user `u` (0-based), in subcarrier order.
    pub fn user(&self, u: usize) -> &[CMatrix<T>] {
        &self.per_user[u]
    }

    pub fn users(&self) -> &[Vec<CMatrix<T>>] {
        &self.per_user
    }

    fn position(&self, k: usize) -> Option<usize> {
        if self.is_full_band() {
            (1..=self.num_subcarriers).contains(&k).then(|| k - 1)
        } else {
            self.subcarriers.binary_search(&k).ok()
        }
    }

    /// Downlink `H_u[k]`; `u` is 0-based, `k` the 1-based subcarrier.
    pub fn downlink(&self, u: usize, k: usize) -> Result<&CMatrix<T>> {
        if u >= self.per_user.len() {
            return Err(Error::index("user", u, 0, self.per_user.len() - 1));
        }
        let pos = self
            .position(k)
            .ok_or_else(|| Error::index("stored subcarrier", k, 1, self.num_subcarriers))?;
        Ok(&self.per_user[u][pos])
    }

    /// Uplink `H_u[k]^T`.
    pub fn uplink(&self, u: usize, k: usize) -> Result<CMatrix<T>> {
        Ok(self.downlink(u, k)?.transpose())
    }

    /// Restricts the tensor to a subset of its stored subcarriers.
    pub fn restrict(&self, subcarriers: &[usize]) -> Result<Self> {
        let pos: Vec<usize> = subcarriers
            .iter()
            .map(|&k| {
                self.position(k)
                    .ok_or_else(|| Error::index("stored subcarrier", k, 1, self.num_subcarriers))
            })
            .collect::<Result<_>>()?;
        let per_user = self
            .per_user
            .iter()
            .map(|mats| pos.iter().map(|&p| mats[p].clone()).collect())
            .collect();
        Self::new(self.num_subcarriers, subcarriers.to_vec(), per_user)
    }

    /// Keeps a subset of users (0-based indices, in the given order).
    pub fn select_users(&self, users: &[usize]) -> Result<Self> {
        let per_user = users
            .iter()
            .map(|&u| {
                self.per_user
                    .get(u)
                    .cloned()
                    .ok_or_else(|| Error::index("user", u, 0, self.per_user.len() - 1))
            })
            .collect::<Result<_>>()?;
        Self::new(self.num_subcarriers, self.subcarriers.clone(), per_user)
    }
}

/// Draws one path set per user and synthesizes the tensor on the
/// synthesizer's frequencies, which must correspond to `subcarriers`.
pub fn generate_channel_tensor<T: Real, R: RngCore + ?Sized>(
    rng: &mut R,
    config: &ChannelConfig<T>,
    synth: &ChannelSynthesizer<T>,
    num_users: usize,
    num_subcarriers: usize,
    subcarriers: &[usize],
) -> Result<(ChannelTensor<T>, Vec<PathSet<T>>)> {
    if subcarriers.len() != synth.frequencies().len() {
        return Err(Error::Shape(format!(
            "{} subcarriers but {} synthesizer frequencies",
            subcarriers.len(),
            synth.frequencies().len()
        )));
    }
    let mut paths = Vec::with_capacity(num_users);
    let mut per_user = Vec::with_capacity(num_users);
    for _ in 0..num_users {
        let p = draw_paths(rng, config)?;
        per_user.push(synth.matrices(&p)?);
        paths.push(p);
    }
    Ok((ChannelTensor::new(num_subcarriers, subcarriers.to_vec(), per_user)?, paths))
}

/// Angle at which `b_l(M)` peaks at the reference frequency for a
/// half-wavelength array: `cos θ = 1 - 2(l-1)/M`.
pub fn beam_peak_angle<T: Real>(size: usize, l: usize) -> T {
    (T::one() - T::lit(2.0 * (l as f64 - 1.0) / size as f64)).acos()
}

/// Line-of-sight dominated paths for `U` users.
///
/// Each user gets a unit-magnitude dominant path whose AoD sits on the peak
/// of a distinct AP beam and whose AoA sits on the peak of a centre STA
/// narrow beam (odd index), both kept away from the array axis. Secondary
/// paths are `secondary_db` below with uniform angles.
pub fn strong_los_paths<T: Real, R: RngCore + ?Sized>(
    rng: &mut R,
    num_users: usize,
    m_ap: usize,
    m_ue: usize,
    secondary_paths: usize,
    secondary_db: T,
) -> Result<Vec<PathSet<T>>> {
    use rand::seq::SliceRandom;
    let interior = |m: usize| (m / 4 + 1)..=(3 * m / 4 + 1);
    let mut ap_beams: Vec<usize> = interior(m_ap).collect();
    if ap_beams.len() < num_users {
        return Err(Error::config(format!(
            "M_ap = {m_ap} has too few interior beams for {num_users} users"
        )));
    }
    ap_beams.shuffle(rng);
    let sta_beams: Vec<usize> = interior(m_ue).filter(|l| l % 2 == 1).collect();
    let amp = T::lit(10.0).powf(secondary_db / T::lit(20.0));
    let mut out = Vec::with_capacity(num_users);
    for &ap_beam in ap_beams.iter().take(num_users) {
        let sta_beam = sta_beams[(rng.next_u32() as usize) % sta_beams.len()];
        let mut aod = vec![beam_peak_angle::<T>(m_ap, ap_beam)];
        let mut aoa = vec![beam_peak_angle::<T>(m_ue, sta_beam)];
        let mut gains = vec![cis(uniform(rng, T::zero(), T::two_pi()))];
        for _ in 0..secondary_paths {
            aod.push(uniform(rng, T::zero(), T::pi()));
            aoa.push(uniform(rng, T::zero(), T::pi()));
            gains.push(cis(uniform(rng, T::zero(), T::two_pi())) * C::new(amp, T::zero()));
        }
        out.push(PathSet::new(aod, aoa, gains)?);
    }
    Ok(out)
}
