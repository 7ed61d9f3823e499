//! Scenario assembly and the Monte Carlo / channel-file evaluation drivers.
//!
//! Every random draw comes from a stream keyed by the master seed, a domain,
//! and the realization (plus SNR point and user where relevant), and results
//! are reduced in realization order, so output is independent of how many
//! worker threads run the realizations.

use rayon::prelude::*;

use crate::array::{ArrayGeometry, CouplingModel, ElementPattern, FrequencyGrid};
use crate::beamselect::{full_beam_selection, BeamSelectionResult, TrainingLog};
use crate::channel::{draw_paths, ChannelConfig, ChannelSynthesizer, ChannelTensor};
use crate::codebook::CodebookSet;
use crate::config::RunConfig;
use crate::digital::{bd_precoder, bd_precoders_held, equivalent_row, estimate_equivalent_channels, per_subcarrier_gains, rates_from_gains};
use crate::error::{Error, Result};
use crate::metrics::{achievable_sum_rate, loss_db, ObjectiveTable, OracleSolution, ResultsRow};
use crate::rng::{stream, Domain};
use crate::scalar::{CMatrix, Real};
use crate::signal::{gen_training, pilot_indices, LinkBudget, TrainingLink, TrainingSignal};

/// Validated configuration plus everything derived from it.
#[derive(Debug, Clone)]
pub struct Scenario<T: Real> {
    pub config: RunConfig,
    pub codebooks: CodebookSet<T>,
    pub grid: FrequencyGrid<T>,
    pub channel: ChannelConfig<T>,
    pub pilots: Vec<usize>,
    pilot_synth: ChannelSynthesizer<T>,
    band_synth: ChannelSynthesizer<T>,
}

impl<T: Real> Scenario<T> {
    pub fn from_config(config: &RunConfig) -> Result<Self> {
        config.validate()?;
        let f0 = T::lit(config.reference_frequency_hz);
        let spacing = T::lit(config.element_spacing);
        let ap = ArrayGeometry::new(config.m_ap, spacing, f0)?;
        let sta = ArrayGeometry::new(config.m_ue, spacing, f0)?;
        let grid = FrequencyGrid::new(
            T::lit(config.center_frequency_hz),
            T::lit(config.subcarrier_spacing_hz),
            config.num_subcarriers,
        )?;
        let coupling = match config.coupling_db {
            Some(db) => CouplingModel::from_db(T::lit(db))?,
            None => CouplingModel::none(),
        };
        let channel = ChannelConfig {
            power_profile_db: config.power_profile_db.iter().map(|&p| T::lit(p)).collect(),
            coupling,
            pattern: ElementPattern::default(),
            normalize: true,
        };
        let pilots = pilot_indices(config.num_subcarriers, config.pilot_subcarriers)?;
        let pattern = ElementPattern::default();
        let pilot_synth = ChannelSynthesizer::new(ap, sta, pattern, &coupling, &coupling, grid.frequencies_of(&pilots)?)?;
        let band_synth = ChannelSynthesizer::new(ap, sta, pattern, &coupling, &coupling, grid.frequencies())?;
        Ok(Self {
            codebooks: config.mode.codebooks(config.dims())?,
            config: config.clone(),
            grid,
            channel,
            pilots,
            pilot_synth,
            band_synth,
        })
    }

    /// Channel tensor of realization `r`, on the pilots or on the full band.
    /// The pilot matrices are identical either way.
    pub fn draw_channel(&self, r: u64, full_band: bool) -> Result<ChannelTensor<T>> {
        let mut rng = stream(self.config.seed, Domain::Channel, &[], r);
        let synth = if full_band { &self.band_synth } else { &self.pilot_synth };
        let mut per_user = Vec::with_capacity(self.config.users);
        for _ in 0..self.config.users {
            let paths = draw_paths(&mut rng, &self.channel)?;
            per_user.push(synth.matrices(&paths)?);
        }
        let ks = if full_band {
            (1..=self.config.num_subcarriers).collect()
        } else {
            self.pilots.clone()
        };
        ChannelTensor::new(self.config.num_subcarriers, ks, per_user)
    }

    pub fn training(&self, r: u64) -> Result<TrainingSignal<T>> {
        gen_training(
            &mut stream(self.config.seed, Domain::Training, &[], r),
            &self.pilots,
            self.config.training_length,
        )
    }

    pub fn budgets(&self) -> Vec<LinkBudget<T>> {
        self.config.snr_db.iter().map(|&s| LinkBudget::from_snr_db(T::lit(s))).collect()
    }
}

/// Full-band matrices `[user][k]` with the fully digital BD gains `[user][k]`.
type BandReference<T> = (Vec<Vec<CMatrix<T>>>, Vec<Vec<T>>);

/// Noiseless references for one channel: per-user pilot matrices, oracle
/// tables and, when rates are requested, full-band matrices with the fully
/// digital BD gains.
struct ChannelContext<T: Real> {
    pilot_channels: Vec<Vec<CMatrix<T>>>,
    oracle: Vec<(ObjectiveTable<T>, OracleSolution<T>)>,
    band: Option<BandReference<T>>,
}

impl<T: Real> ChannelContext<T> {
    fn new(scn: &Scenario<T>, tensor: &ChannelTensor<T>, with_rates: bool) -> Result<Self> {
        let pilot_tensor = if tensor.subcarriers() == scn.pilots.as_slice() {
            tensor.clone()
        } else {
            tensor.restrict(&scn.pilots)?
        };
        let pilot_channels: Vec<Vec<CMatrix<T>>> = pilot_tensor.users().to_vec();
        let oracle = pilot_channels
            .iter()
            .map(|chans| {
                let t = ObjectiveTable::new(chans, &scn.codebooks.sta_orthogonal, &scn.codebooks.ap_orthogonal)?;
                let best = t.best();
                Ok((t, best))
            })
            .collect::<Result<_>>()?;
        let band = if with_rates {
            if !tensor.is_full_band() {
                return Err(Error::Shape("rate evaluation needs a full-band tensor".into()));
            }
            let mats = tensor.users().to_vec();
            let gains = per_subcarrier_gains(&mats)?;
            Some((mats, gains))
        } else {
            None
        };
        Ok(Self {
            pilot_channels,
            oracle,
            band,
        })
    }
}

/// Result of one channel realization (or noise draw) at one SNR point.
#[derive(Debug, Clone, PartialEq)]
pub struct SnrOutcome {
    /// Users whose selected pair differs from the oracle.
    pub errors: usize,
    pub users: usize,
    /// Sum over users of the misalignment loss (dB) and how many were defined.
    pub loss_sum_db: f64,
    pub loss_count: usize,
    /// Per-user hybrid and fully digital rates when evaluated and feasible.
    pub rates: Option<(Vec<f64>, Vec<f64>)>,
    /// Rates were requested but the analog or digital precoder was infeasible.
    pub excluded: bool,
    pub training_count: usize,
    pub selection: Vec<(usize, usize)>,
}

fn evaluate_context<T: Real>(
    scn: &Scenario<T>,
    ctx: &ChannelContext<T>,
    training: &TrainingSignal<T>,
    r: u64,
    log: &mut TrainingLog,
) -> Result<Vec<SnrOutcome>> {
    let cfg = &scn.config;
    let users = ctx.pilot_channels.len();
    let mut out = Vec::with_capacity(cfg.snr_db.len());
    for (s, budget) in scn.budgets().into_iter().enumerate() {
        log.set_snr_db(Some(cfg.snr_db[s]));
        let links: Vec<TrainingLink<'_, T>> = ctx
            .pilot_channels
            .iter()
            .map(|chans| TrainingLink {
                channels: chans,
                training,
                budget,
                num_subcarriers: cfg.num_subcarriers,
                model: cfg.estimator,
            })
            .collect();
        let sel = full_beam_selection(
            &links,
            &scn.codebooks,
            cfg.mode,
            |u| stream(cfg.seed, Domain::SelectionNoise, &[s as u64, u as u64], r),
            log,
        )?;
        let mut o = SnrOutcome {
            errors: 0,
            users,
            loss_sum_db: 0.0,
            loss_count: 0,
            rates: None,
            excluded: false,
            training_count: sel.training_count,
            selection: sel.users.iter().map(|u| (u.ap_beam(), u.sta_beam)).collect(),
        };
        for (u, us) in sel.users.iter().enumerate() {
            let (table, best) = &ctx.oracle[u];
            if (us.ap_beam(), us.sta_beam) != (best.ap_beam, best.sta_beam) {
                o.errors += 1;
            }
            let achieved = table.get(us.ap_beam(), us.sta_beam)?;
            if let Some(l) = loss_db(achieved, best.objective) {
                o.loss_sum_db += l;
                o.loss_count += 1;
            }
        }
        if let Some((band, gains)) = &ctx.band {
            match hybrid_rates(scn, &links, &sel, band, &budget, s, r) {
                Ok(h) => {
                    let d = rates_from_gains(gains, budget.total_power(), budget.noise_variance(), cfg.num_subcarriers);
                    o.rates = Some((
                        h.iter().map(|x| x.as_f64()).collect(),
                        d.per_user.iter().map(|x| x.as_f64()).collect(),
                    ));
                }
                Err(Error::Infeasible(_)) => o.excluded = true,
                Err(e) => return Err(e),
            }
        }
        out.push(o);
    }
    log.set_snr_db(None);
    Ok(out)
}

/// Stage 4, equivalent-channel training, BD and the rate of every user.
fn hybrid_rates<T: Real>(
    scn: &Scenario<T>,
    links: &[TrainingLink<'_, T>],
    sel: &BeamSelectionResult<T>,
    band: &[Vec<CMatrix<T>>],
    budget: &LinkBudget<T>,
    s: usize,
    r: u64,
) -> Result<Vec<T>> {
    let cfg = &scn.config;
    let p_an = sel.analog_matrix(cfg.n_rf)?;
    let g: Vec<_> = sel.users.iter().map(|u| u.g_star.clone()).collect();
    let ks: Vec<usize> = (1..=cfg.num_subcarriers).collect();
    let p_di = if cfg.genie_csi {
        ks.iter()
            .map(|&k| {
                let rows: Vec<_> = band.iter().zip(&g).map(|(h, gu)| equivalent_row(gu, &h[k - 1], &p_an)).collect();
                bd_precoder(&rows, &p_an)
            })
            .collect::<Result<Vec<_>>>()?
    } else {
        let eq = estimate_equivalent_channels(links, &p_an, &g, |u| {
            stream(cfg.seed, Domain::EquivalentChannelNoise, &[s as u64, u as u64], r)
        })?;
        bd_precoders_held(&eq, &p_an, &ks)?
    };
    let f: Vec<CMatrix<T>> = p_di.iter().map(|d| &p_an * d).collect();
    Ok(achievable_sum_rate(band, &g, &f, budget, cfg.num_subcarriers)?.per_user)
}

/// Aggregates for one SNR point.
#[derive(Debug, Clone, PartialEq)]
pub struct SnrSummary {
    pub snr_db: f64,
    pub realizations: usize,
    pub bser: f64,
    pub loss_db: f64,
    /// Realizations that entered the rate averages.
    pub rate_count: usize,
    pub excluded_count: usize,
    pub hybrid_per_user: Vec<f64>,
    pub digital_per_user: Vec<f64>,
    pub training_count: usize,
}

impl SnrSummary {
    pub fn sum_rate_hybrid(&self) -> f64 {
        self.hybrid_per_user.iter().sum()
    }

    pub fn sum_rate_digital_bd(&self) -> f64 {
        self.digital_per_user.iter().sum()
    }

    pub fn to_row(&self, config_id: &str) -> ResultsRow {
        ResultsRow {
            config_id: config_id.to_string(),
            snr_db: self.snr_db,
            realizations: self.realizations,
            bser: self.bser,
            loss_db: self.loss_db,
            sum_rate_hybrid: self.sum_rate_hybrid(),
            sum_rate_digital_bd: self.sum_rate_digital_bd(),
            excluded_count: self.excluded_count,
        }
    }
}

/// Ordered reduction of per-realization outcomes.
pub fn summarize(snr_db: &[f64], users: usize, outcomes: &[Vec<SnrOutcome>]) -> Vec<SnrSummary> {
    snr_db
        .iter()
        .enumerate()
        .map(|(s, &snr)| {
            let mut errors = 0usize;
            let mut pairs = 0usize;
            let mut loss = 0.0;
            let mut loss_n = 0usize;
            let mut hyb = vec![0.0; users];
            let mut dig = vec![0.0; users];
            let mut rate_n = 0usize;
            let mut excluded = 0usize;
            let mut training = 0usize;
            for o in outcomes.iter().map(|v| &v[s]) {
                errors += o.errors;
                pairs += o.users;
                loss += o.loss_sum_db;
                loss_n += o.loss_count;
                excluded += o.excluded as usize;
                training = o.training_count;
                if let Some((h, d)) = &o.rates {
                    rate_n += 1;
                    for u in 0..users {
                        hyb[u] += h[u];
                        dig[u] += d[u];
                    }
                }
            }
            let mean = |v: Vec<f64>| -> Vec<f64> {
                v.into_iter()
                    .map(|x| if rate_n > 0 { x / rate_n as f64 } else { f64::NAN })
                    .collect()
            };
            SnrSummary {
                snr_db: snr,
                realizations: outcomes.len(),
                bser: if pairs > 0 { errors as f64 / pairs as f64 } else { f64::NAN },
                loss_db: if loss_n > 0 { loss / loss_n as f64 } else { f64::NAN },
                rate_count: rate_n,
                excluded_count: excluded,
                hybrid_per_user: mean(hyb),
                digital_per_user: mean(dig),
                training_count: training,
            }
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct MonteCarloReport {
    pub points: Vec<SnrSummary>,
    /// Per-transmission log of realization 0.
    pub training_log: TrainingLog,
}

impl MonteCarloReport {
    pub fn rows(&self, config_id: &str) -> Vec<ResultsRow> {
        self.points.iter().map(|p| p.to_row(config_id)).collect()
    }
}

/// Full Monte Carlo sweep: channel draw, beam selection, BD and metrics for
/// every realization and SNR point. Runs on the current rayon pool.
pub fn run_montecarlo<T: Real>(scn: &Scenario<T>) -> Result<MonteCarloReport> {
    let cfg = &scn.config;
    let results: Vec<(Vec<SnrOutcome>, TrainingLog)> = (0..cfg.realizations as u64)
        .into_par_iter()
        .map(|r| {
            let with_rates = (r as usize) < cfg.rate_realizations;
            let tensor = scn.draw_channel(r, with_rates)?;
            let ctx = ChannelContext::new(scn, &tensor, with_rates)?;
            let training = scn.training(r)?;
            let mut log = if r == 0 { TrainingLog::enabled() } else { TrainingLog::disabled() };
            let o = evaluate_context(scn, &ctx, &training, r, &mut log)?;
            Ok((o, log))
        })
        .collect::<Result<_>>()?;
    let mut training_log = TrainingLog::disabled();
    let mut outcomes = Vec::with_capacity(results.len());
    for (o, log) in results {
        if log.is_enabled() {
            training_log = log;
        }
        outcomes.push(o);
    }
    Ok(MonteCarloReport {
        points: summarize(&cfg.snr_db, cfg.users, &outcomes),
        training_log,
    })
}

#[derive(Debug, Clone)]
pub struct ChannelFileReport {
    pub points: Vec<SnrSummary>,
    /// Per-draw outcomes, `[draw][snr]`.
    pub outcomes: Vec<Vec<SnrOutcome>>,
}

/// Beam selection, BD and rates on a supplied full-band tensor, repeated for
/// `config.realizations` independent noise draws per SNR point.
pub fn evaluate_channel_tensor<T: Real>(scn: &Scenario<T>, tensor: &ChannelTensor<T>) -> Result<ChannelFileReport> {
    let cfg = &scn.config;
    tensor.expect_dims(Some(cfg.users), cfg.num_subcarriers, cfg.m_ue, cfg.m_ap)?;
    let ctx = ChannelContext::new(scn, tensor, true)?;
    let outcomes: Vec<Vec<SnrOutcome>> = (0..cfg.realizations as u64)
        .into_par_iter()
        .map(|r| {
            let training = scn.training(r)?;
            evaluate_context(scn, &ctx, &training, r, &mut TrainingLog::disabled())
        })
        .collect::<Result<_>>()?;
    Ok(ChannelFileReport {
        points: summarize(&cfg.snr_db, cfg.users, &outcomes),
        outcomes,
    })
}

pub const RATE_REPORT_HEADER: [&str; 8] = [
    "config_id",
    "snr_db",
    "draws",
    "bser",
    "user",
    "rate_hybrid",
    "rate_digital_bd",
    "excluded_count",
];

/// One row per user and SNR point plus a `sum` row per SNR point.
pub fn write_rate_report_csv<W: std::io::Write>(config_id: &str, points: &[SnrSummary], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RATE_REPORT_HEADER)?;
    for p in points {
        let mut row = |user: String, h: f64, d: f64| {
            w.write_record([
                config_id.to_string(),
                p.snr_db.to_string(),
                p.realizations.to_string(),
                p.bser.to_string(),
                user,
                h.to_string(),
                d.to_string(),
                p.excluded_count.to_string(),
            ])
        };
        for (u, (&h, &d)) in p.hybrid_per_user.iter().zip(&p.digital_per_user).enumerate() {
            row((u + 1).to_string(), h, d)?;
        }
        row("sum".into(), p.sum_rate_hybrid(), p.sum_rate_digital_bd())?;
    }
    w.flush()?;
    Ok(())
}
