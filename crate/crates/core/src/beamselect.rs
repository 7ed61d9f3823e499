//! Hierarchical analog beam selection.
//!
//! Stage 1 is an uplink sweep: the STA transmits on each of its wide beams
//! while the AP listens with every sector matrix, so all `M_ap` narrow AP
//! beams are probed `N_rf` at a time. Stage 2 is a downlink sweep of the STA
//! sector beams with the AP beam fixed, and stage 3 refines the STA beam
//! among the narrow beams overlapping the chosen sector. Stage 4 stacks the
//! selected AP beams of all users into the analog precoder.
//!
//! All objectives are `Σ_k |estimate[k]|²` over the pilot subcarriers, and
//! every argmax keeps the lowest index on ties.

use std::io::Write;

use rand::RngCore;

use crate::codebook::{narrow_matrix, ArrayDims, CodebookSet, OrthogonalSet};
use crate::error::{Error, Result};
use crate::scalar::{real, CMatrix, CVector, Real};
use crate::signal::{sum_power, TrainingLink};

/// Which variant of the procedure runs for each STA.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioMode {
    /// STAs with a switchable subarray: stages 1, 2 and 3.
    #[default]
    Full,
    /// One STA without subarray: stage 1 with the STA sweeping `B(M_ue)`,
    /// then an exhaustive downlink sweep over `B(M_ue)`.
    SingleUserExhaustiveSta,
    /// Single-antenna STAs: stage 1 only.
    SingleAntennaSta,
}

impl ScenarioMode {
    pub fn name(self) -> &'static str {
        match self {
            Self::Full => "full",
            Self::SingleUserExhaustiveSta => "single_user_exhaustive_sta",
            Self::SingleAntennaSta => "single_antenna_sta",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [Self::Full, Self::SingleUserExhaustiveSta, Self::SingleAntennaSta]
            .into_iter()
            .find(|m| m.name() == s)
    }

    /// Codebooks this mode needs.
    pub fn codebooks<T: Real>(self, dims: ArrayDims) -> Result<CodebookSet<T>> {
        match self {
            Self::Full => CodebookSet::hierarchical(dims),
            _ => CodebookSet::without_subarray(dims),
        }
    }
}

/// Training transmissions one STA consumes during beam selection.
pub fn training_overhead(mode: ScenarioMode, dims: ArrayDims) -> usize {
    let sectors = dims.m_ap / dims.n_rf;
    match mode {
        ScenarioMode::Full => sectors * dims.m_sub + dims.m_sub + dims.m_ue / dims.m_sub + 1,
        ScenarioMode::SingleUserExhaustiveSta => sectors * dims.m_ue + dims.m_ue,
        ScenarioMode::SingleAntennaSta => sectors,
    }
}

/// One line of the training log.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingRecord {
    /// SNR point the transmission belongs to, filled in by the log.
    pub snr_db: Option<f64>,
    /// 0-based user index.
    pub user: usize,
    pub stage: u8,
    /// AP codeword index (sector `m` in stage 1, beam `l` afterwards).
    pub ap_index: usize,
    /// STA codeword index used during the transmission.
    pub sta_index: usize,
    /// Best RF chain for uplink transmissions, 0 for downlink ones.
    pub chain: usize,
    pub objective: f64,
}

/// Optional sink for per-transmission records.
#[derive(Debug, Clone, Default)]
pub struct TrainingLog {
    enabled: bool,
    snr_db: Option<f64>,
    records: Vec<TrainingRecord>,
}

impl TrainingLog {
    pub fn enabled() -> Self {
        Self {
            enabled: true,
            snr_db: None,
            records: Vec::new(),
        }
    }

    pub fn disabled() -> Self {
        Self::default()
    }

    pub fn is_enabled(&self) -> bool {
        self.enabled
    }

    /// Tags subsequent records with an SNR point.
    pub fn set_snr_db(&mut self, snr_db: Option<f64>) {
        self.snr_db = snr_db;
    }

    pub fn push(&mut self, mut r: TrainingRecord) {
        if self.enabled {
            r.snr_db = self.snr_db;
            self.records.push(r);
        }
    }

    pub fn records(&self) -> &[TrainingRecord] {
        &self.records
    }

    pub fn extend(&mut self, other: TrainingLog) {
        if self.enabled {
            self.records.extend(other.records);
        }
    }

    /// `snr_db,user,stage,ap_index,sta_index,chain,objective` with 1-based user.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["snr_db", "user", "stage", "ap_index", "sta_index", "chain", "objective"])?;
        for r in &self.records {
            w.write_record([
                r.snr_db.map_or_else(String::new, |s| s.to_string()),
                (r.user + 1).to_string(),
                r.stage.to_string(),
                r.ap_index.to_string(),
                r.sta_index.to_string(),
                r.chain.to_string(),
                format!("{:e}", r.objective),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageOneResult<T: Real> {
    /// AP sector `m*` (1-based).
    pub m_star: usize,
    /// RF chain `n*` (1-based).
    pub n_star: usize,
    /// STA beam found jointly in stage 1 (1-based position in the STA sweep).
    pub m_prime_star: usize,
    /// `l_{n*}(m*)`, the index of `p*` in `B(M_ap)`.
    pub ap_beam: usize,
    /// `p* = b_{ap_beam}(M_ap)`.
    pub p_star: CVector<T>,
    /// `P*`: `p*` on every chain, scaled by `N_rf^{-1/2}`.
    pub p_star_matrix: CMatrix<T>,
    pub objective: T,
    pub transmissions: usize,
}

/// Stage 1: the STA sweeps `sta_beams`, the AP receives with every sector
/// matrix. The winner is the largest per-chain sum power, ranked by sector,
/// then STA beam, then chain.
pub fn stage1_uplink<T: Real, R: RngCore + ?Sized>(
    link: &TrainingLink<'_, T>,
    codebooks: &CodebookSet<T>,
    sta_beams: &[CVector<T>],
    user: usize,
    log: &mut TrainingLog,
    rng: &mut R,
) -> Result<StageOneResult<T>> {
    if link.training.pilots().is_empty() {
        return Err(Error::config("stage 1 needs at least one pilot subcarrier"));
    }
    let sector = &codebooks.ap_sector;
    let sectors = sector.len();
    let mut table = vec![vec![Vec::new(); sta_beams.len()]; sectors];
    for (mp, g) in sta_beams.iter().enumerate() {
        let rows = link.sta_rows(g)?;
        for (m, row) in table.iter_mut().enumerate() {
            let est = link.uplink_from_rows(&rows, sector.get(m + 1)?, rng)?;
            let powers: Vec<T> = est.iter().map(|e| sum_power(e)).collect();
            let (best_n, best) = best_of(&powers);
            log.push(TrainingRecord {
                snr_db: None,
                user,
                stage: 1,
                ap_index: m + 1,
                sta_index: mp + 1,
                chain: best_n + 1,
                objective: best.as_f64(),
            });
            row[mp] = powers;
        }
    }
    let mut best: Option<(usize, usize, usize, T)> = None;
    for (m, row) in table.iter().enumerate() {
        for (mp, powers) in row.iter().enumerate() {
            for (n, &p) in powers.iter().enumerate() {
                if best.is_none_or(|b| p > b.3) {
                    best = Some((m, mp, n, p));
                }
            }
        }
    }
    let (m, mp, n, objective) = best.ok_or_else(|| Error::config("stage 1 swept an empty codebook"))?;
    let ap_beam = sector.beam_index(m + 1, n + 1)?;
    let p_star = codebooks.ap_orthogonal.get(ap_beam)?.coefficients().clone();
    let p_star_matrix = narrow_matrix(&p_star, codebooks.dims.n_rf);
    Ok(StageOneResult {
        m_star: m + 1,
        n_star: n + 1,
        m_prime_star: mp + 1,
        ap_beam,
        p_star,
        p_star_matrix,
        objective,
        transmissions: sectors * sta_beams.len(),
    })
}

fn best_of<T: Real>(values: &[T]) -> (usize, T) {
    let mut best = (0, values[0]);
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > best.1 {
            best = (i, v);
        }
    }
    best
}

#[allow(clippy::too_many_arguments)]
/// Downlink sweep of `candidates` with the AP fixed on `p_star_matrix`.
/// Returns the 0-based winner position and its objective.
fn downlink_sweep<T: Real, R: RngCore + ?Sized>(
    link: &TrainingLink<'_, T>,
    p_star_matrix: &CMatrix<T>,
    candidates: &[(usize, &CVector<T>)],
    ap_beam: usize,
    stage: u8,
    user: usize,
    log: &mut TrainingLog,
    rng: &mut R,
) -> Result<(usize, T)> {
    let cols = link.ap_columns(p_star_matrix)?;
    let mut powers = Vec::with_capacity(candidates.len());
    for &(index, g) in candidates {
        let p = sum_power(&link.downlink_from_columns(g, &cols, p_star_matrix.ncols(), rng)?);
        log.push(TrainingRecord {
            snr_db: None,
            user,
            stage,
            ap_index: ap_beam,
            sta_index: index,
            chain: 0,
            objective: p.as_f64(),
        });
        powers.push(p);
    }
    if powers.is_empty() {
        return Err(Error::config("downlink sweep over an empty codebook"));
    }
    Ok(best_of(&powers))
}

/// Stage 2: returns the STA sector `m'*` (1-based) and its objective.
pub fn stage2_downlink<T: Real, R: RngCore + ?Sized>(
    link: &TrainingLink<'_, T>,
    codebooks: &CodebookSet<T>,
    stage1: &StageOneResult<T>,
    user: usize,
    log: &mut TrainingLog,
    rng: &mut R,
) -> Result<(usize, T)> {
    let gs = codebooks
        .sta_sector
        .as_ref()
        .ok_or_else(|| Error::config("stage 2 needs the STA sector codebook"))?;
    let cands: Vec<_> = gs
        .vectors()
        .iter()
        .enumerate()
        .map(|(i, g)| (i + 1, g.coefficients()))
        .collect();
    let (i, p) = downlink_sweep(link, &stage1.p_star_matrix, &cands, stage1.ap_beam, 2, user, log, rng)?;
    Ok((i + 1, p))
}

/// Stage 3: returns `n'*`, the index of `g*` in `B(M_ue)`, and its objective.
pub fn stage3_downlink<T: Real, R: RngCore + ?Sized>(
    link: &TrainingLink<'_, T>,
    codebooks: &CodebookSet<T>,
    stage1: &StageOneResult<T>,
    m_prime: usize,
    user: usize,
    log: &mut TrainingLog,
    rng: &mut R,
) -> Result<(usize, usize, T)> {
    let gn = codebooks
        .sta_narrow
        .as_ref()
        .ok_or_else(|| Error::config("stage 3 needs the STA narrow codebook"))?;
    let per = gn.beams_per_sector();
    let indices = gn.sector_indices(m_prime)?;
    let cands: Vec<_> = (1..=per)
        .map(|n| Ok((indices[n - 1], gn.get(m_prime, n)?.coefficients())))
        .collect::<Result<_>>()?;
    let (i, p) = downlink_sweep(link, &stage1.p_star_matrix, &cands, stage1.ap_beam, 3, user, log, rng)?;
    Ok((i + 1, indices[i], p))
}

/// Exhaustive downlink sweep over `B(M_ue)`; returns the 1-based beam index.
pub fn exhaustive_sta_sweep<T: Real, R: RngCore + ?Sized>(
    link: &TrainingLink<'_, T>,
    sta_set: &OrthogonalSet<T>,
    stage1: &StageOneResult<T>,
    user: usize,
    log: &mut TrainingLog,
    rng: &mut R,
) -> Result<(usize, T)> {
    let cands: Vec<_> = sta_set
        .vectors()
        .iter()
        .enumerate()
        .map(|(i, g)| (i + 1, g.coefficients()))
        .collect();
    let (i, p) = downlink_sweep(link, &stage1.p_star_matrix, &cands, stage1.ap_beam, 2, user, log, rng)?;
    Ok((i + 1, p))
}

/// Stage 4: analog precoder with every user's beam on at least one chain.
///
/// With `U < N_rf`, chain `j` (0-based) serves user `⌊jU/N_rf⌋`, which for
/// `U = 2, N_rf = 4` yields `[p₁ p₁ p₂ p₂]`. Columns are scaled by
/// `N_rf^{-1/2}`.
pub fn build_analog_matrix<T: Real>(p_star: &[CVector<T>], n_rf: usize) -> Result<CMatrix<T>> {
    let users = p_star.len();
    if users == 0 {
        return Err(Error::config("analog precoder needs at least one user"));
    }
    if users > n_rf {
        return Err(Error::Infeasible(format!(
            "{users} users exceed the {n_rf} RF chains"
        )));
    }
    for i in 0..users {
        for j in i + 1..users {
            if p_star[i] == p_star[j] {
                return Err(Error::Infeasible(format!(
                    "users {} and {} selected the same AP beam",
                    i + 1,
                    j + 1
                )));
            }
        }
    }
    let len = p_star[0].len();
    if p_star.iter().any(|p| p.len() != len) {
        return Err(Error::Shape("AP beams of different lengths".into()));
    }
    let scale = real(T::one() / T::lit(n_rf as f64).sqrt());
    let cols: Vec<CVector<T>> = (0..n_rf).map(|j| &p_star[j * users / n_rf] * scale).collect();
    Ok(CMatrix::from_columns(&cols))
}

/// Outcome of beam selection for one STA.
#[derive(Debug, Clone, PartialEq)]
pub struct UserSelection<T: Real> {
    pub stage1: StageOneResult<T>,
    /// Sector chosen in stage 2 (full mode only).
    pub sta_sector: Option<usize>,
    /// Index of `g*` in `B(M_ue)` (1 for a single antenna).
    pub sta_beam: usize,
    pub g_star: CVector<T>,
    pub transmissions: usize,
}

impl<T: Real> UserSelection<T> {
    pub fn ap_beam(&self) -> usize {
        self.stage1.ap_beam
    }

    pub fn p_star(&self) -> &CVector<T> {
        &self.stage1.p_star
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeamSelectionResult<T: Real> {
    pub users: Vec<UserSelection<T>>,
    pub training_count: usize,
}

impl<T: Real> BeamSelectionResult<T> {
    /// Stage 4 over all users.
    pub fn analog_matrix(&self, n_rf: usize) -> Result<CMatrix<T>> {
        let beams: Vec<_> = self.users.iter().map(|u| u.stage1.p_star.clone()).collect();
        build_analog_matrix(&beams, n_rf)
    }
}

/// Runs the stages of `mode` for one STA.
pub fn select_user<T: Real, R: RngCore + ?Sized>(
    link: &TrainingLink<'_, T>,
    codebooks: &CodebookSet<T>,
    mode: ScenarioMode,
    user: usize,
    log: &mut TrainingLog,
    rng: &mut R,
) -> Result<UserSelection<T>> {
    match mode {
        ScenarioMode::Full => {
            let gs = codebooks
                .sta_sector
                .as_ref()
                .ok_or_else(|| Error::config("full mode needs the STA sector codebook"))?;
            let wide: Vec<_> = gs.vectors().iter().map(|g| g.coefficients().clone()).collect();
            let s1 = stage1_uplink(link, codebooks, &wide, user, log, rng)?;
            let (m_prime, _) = stage2_downlink(link, codebooks, &s1, user, log, rng)?;
            let (_, l, _) = stage3_downlink(link, codebooks, &s1, m_prime, user, log, rng)?;
            let per = codebooks.sta_narrow.as_ref().map_or(0, |g| g.beams_per_sector());
            let transmissions = s1.transmissions + gs.len() + per;
            Ok(UserSelection {
                g_star: codebooks.sta_orthogonal.get(l)?.coefficients().clone(),
                stage1: s1,
                sta_sector: Some(m_prime),
                sta_beam: l,
                transmissions,
            })
        }
        ScenarioMode::SingleUserExhaustiveSta => {
            let all: Vec<_> = codebooks
                .sta_orthogonal
                .vectors()
                .iter()
                .map(|g| g.coefficients().clone())
                .collect();
            let s1 = stage1_uplink(link, codebooks, &all, user, log, rng)?;
            let (l, _) = exhaustive_sta_sweep(link, &codebooks.sta_orthogonal, &s1, user, log, rng)?;
            let transmissions = s1.transmissions + all.len();
            Ok(UserSelection {
                g_star: codebooks.sta_orthogonal.get(l)?.coefficients().clone(),
                stage1: s1,
                sta_sector: None,
                sta_beam: l,
                transmissions,
            })
        }
        ScenarioMode::SingleAntennaSta => {
            if codebooks.dims.m_ue != 1 {
                return Err(Error::config("single-antenna mode requires M_ue = 1"));
            }
            let g = codebooks.sta_orthogonal.get(1)?.coefficients().clone();
            let s1 = stage1_uplink(link, codebooks, std::slice::from_ref(&g), user, log, rng)?;
            Ok(UserSelection {
                transmissions: s1.transmissions,
                stage1: s1,
                sta_sector: None,
                sta_beam: 1,
                g_star: g,
            })
        }
    }
}

/// Independent selection for every STA. `rng_for(u)` supplies user `u`'s
/// noise stream so results do not depend on the order users are processed.
pub fn full_beam_selection<T: Real, R: RngCore>(
    links: &[TrainingLink<'_, T>],
    codebooks: &CodebookSet<T>,
    mode: ScenarioMode,
    mut rng_for: impl FnMut(usize) -> R,
    log: &mut TrainingLog,
) -> Result<BeamSelectionResult<T>> {
    if mode == ScenarioMode::SingleUserExhaustiveSta && links.len() != 1 {
        return Err(Error::config(format!(
            "{} mode serves exactly one STA, got {}",
            mode.name(),
            links.len()
        )));
    }
    let users = links
        .iter()
        .enumerate()
        .map(|(u, link)| select_user(link, codebooks, mode, u, log, &mut rng_for(u)))
        .collect::<Result<Vec<_>>>()?;
    let training_count = users.iter().map(|u| u.transmissions).sum();
    Ok(BeamSelectionResult { users, training_count })
}
