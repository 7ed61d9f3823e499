use hbf_core::array::{array_response, ArrayGeometry, ElementPattern};
use hbf_core::beamselect::build_analog_matrix;
use hbf_core::channel::{channel_matrix, draw_paths, ChannelConfig, PathSet};
use hbf_core::codebook::{
    ap_sector_index, build_orthogonal_set, build_sta_narrow_codebook, sta_narrow_index, wrap_index,
};
use hbf_core::digital::{bd_precoder, equivalent_row, null_space};
use hbf_core::metrics::{loss_db, ObjectiveTable};
use hbf_core::rng::{complex_gaussian, stream, Domain};
use hbf_core::scalar::frob_sqr;
use hbf_core::signal::{downlink_coefficient, ml_estimate, uplink_coefficient};
use hbf_core::{CMatrix, CVector, C};
use proptest::prelude::*;

fn random_matrix(seed: u64, rows: usize, cols: usize) -> CMatrix<f64> {
    let mut rng = stream(seed, Domain::Data, &[rows as u64, cols as u64], 0);
    CMatrix::from_fn(rows, cols, |_, _| complex_gaussian(&mut rng, 1.0))
}

fn pow2() -> impl Strategy<Value = usize> {
    prop::sample::select(vec![2usize, 4, 8, 16, 32, 64])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn orthogonal_sets_are_unitary(m in 1usize..48) {
        let set = build_orthogonal_set::<f64>(m).unwrap();
        let err = (set.gram() - CMatrix::identity(m, m)).iter().map(|c| c.norm()).fold(0.0, f64::max);
        prop_assert!(err < 1e-12, "M = {m}: {err}");
    }

    #[test]
    fn ap_sector_index_is_a_bijection(m_ap in pow2(), n_rf_exp in 0u32..4) {
        let n_rf = 1usize << n_rf_exp;
        prop_assume!(n_rf <= m_ap);
        let mut hits = vec![0; m_ap];
        for m in 1..=m_ap / n_rf {
            for n in 1..=n_rf {
                hits[ap_sector_index(m, n, n_rf, m_ap).unwrap() - 1] += 1;
            }
        }
        prop_assert!(hits.iter().all(|&h| h == 1));
    }

    #[test]
    fn sta_narrow_sets_cover_every_beam(m_sub in prop::sample::select(vec![2usize, 4, 8]), ratio in prop::sample::select(vec![2usize, 4])) {
        let m_ue = m_sub * ratio;
        let gn = build_sta_narrow_codebook::<f64>(m_ue, m_sub).unwrap();
        let mut seen = vec![0; m_ue];
        for m in 1..=m_sub {
            let idx = gn.sector_indices(m).unwrap();
            prop_assert_eq!(idx.len(), ratio + 1);
            for (n, &l) in idx.iter().enumerate() {
                prop_assert_eq!(l, sta_narrow_index(m, n + 1, m_ue, m_sub).unwrap());
                seen[l - 1] += 1;
            }
        }
        // sector edges are shared by neighbours, interior beams are not
        prop_assert!(seen.iter().all(|&s| s == 1 || s == 2));
        prop_assert_eq!(seen.iter().sum::<usize>(), m_sub * (ratio + 1));
    }

    #[test]
    fn wrap_stays_in_range(n in -1000i64..1000, m in 1usize..64) {
        let w = wrap_index(n, m);
        prop_assert!((1..=m).contains(&w));
        prop_assert_eq!((w as i64 - n).rem_euclid(m as i64), 0);
    }

    #[test]
    fn response_norm_tracks_element_gain(theta in 0.0f64..std::f64::consts::PI, m in 1usize..33, f in 57e9f64..62e9) {
        let geom = ArrayGeometry::half_wavelength(m, 60e9).unwrap();
        let pat = ElementPattern::default();
        let a = array_response(&geom, &pat, f, theta);
        let expect = m as f64 * pat.gain(theta).powi(2);
        prop_assert!((a.norm_squared() - expect).abs() <= 1e-9 * expect.max(1.0));
    }

    #[test]
    fn reciprocity_for_shared_beamformer(seed in any::<u64>(), n_rf in 1usize..5, k in 1usize..1024) {
        let h = random_matrix(seed, 8, 12);
        let mut rng = stream(seed, Domain::Data, &[1], 0);
        let p = CVector::<f64>::from_fn(12, |_, _| complex_gaussian(&mut rng, 1.0));
        let p = &p / C::new(p.norm(), 0.0);
        let g = CVector::<f64>::from_fn(8, |_, _| complex_gaussian(&mut rng, 1.0));
        let g = &g / C::new(g.norm(), 0.0);
        let p_an = hbf_core::codebook::narrow_matrix(&p, n_rf);
        let col: CVector<f64> = p_an.column(0).into_owned();
        let v = uplink_coefficient(&col, &g, &h, 1.0, k).unwrap();
        let w = downlink_coefficient(&g, &h, &p_an, 1.0, k).unwrap();
        let target = w / (n_rf as f64).sqrt();
        prop_assert!((v - target).norm() <= 1e-12 * target.norm().max(1e-300));
    }

    #[test]
    fn ml_recovers_any_coefficient(re in -1e3f64..1e3, im in -1e3f64..1e3, t in 1usize..128, seed in any::<u64>()) {
        let mut rng = stream(seed, Domain::Training, &[], 0);
        let x = CVector::<f64>::from_fn(t, |_, _| hbf_core::scalar::cis(rand::Rng::random_range(&mut rng, 0.0..std::f64::consts::TAU)));
        let v = C::new(re, im);
        let y = &x * v;
        let est = ml_estimate(&y, &x).unwrap();
        prop_assert!((est - v).norm() <= 1e-12 * v.norm().max(1e-12));
    }

    #[test]
    fn null_space_is_orthogonal(seed in any::<u64>(), rows in 1usize..6, cols in 2usize..10) {
        let a = random_matrix(seed, rows, cols);
        let n = null_space(&a);
        prop_assert_eq!(n.ncols(), cols.saturating_sub(rows));
        if n.ncols() > 0 {
            let prod = &a * &n;
            prop_assert!(prod.iter().all(|c| c.norm() < 1e-10));
            let gram = n.adjoint() * &n - CMatrix::identity(n.ncols(), n.ncols());
            prop_assert!(gram.iter().all(|c| c.norm() < 1e-10));
        }
    }

    #[test]
    fn bd_nulls_cross_terms(seed in any::<u64>(), users in 1usize..5) {
        let m_ap = 16;
        let n_rf = 4;
        let set = build_orthogonal_set::<f64>(m_ap).unwrap();
        let ps: Vec<CVector<f64>> = (0..users).map(|u| set.get(1 + (u * 5 + seed as usize) % m_ap).unwrap().coefficients().clone()).collect();
        prop_assume!({
            let mut b: Vec<_> = (0..users).map(|u| (u * 5 + seed as usize) % m_ap).collect();
            b.sort();
            b.dedup();
            b.len() == users
        });
        let p_an = build_analog_matrix(&ps, n_rf).unwrap();
        let rows: Vec<CVector<f64>> = (0..users)
            .map(|u| {
                let h = random_matrix(seed.wrapping_add(u as u64), 8, m_ap);
                let g = set.get(1).unwrap().coefficients().rows(0, 8).into_owned();
                equivalent_row(&g, &h, &p_an)
            })
            .collect();
        let p_di = bd_precoder(&rows, &p_an).unwrap();
        let f = &p_an * &p_di;
        prop_assert!((frob_sqr(&f) - 1.0).abs() < 1e-12);
        for (u, r) in rows.iter().enumerate() {
            for v in 0..users {
                if u != v {
                    let cross = (r.transpose() * p_di.column(v))[0].norm();
                    prop_assert!(cross < 1e-10 * r.norm());
                }
            }
        }
    }

    #[test]
    fn oracle_dominates_every_pair(seed in any::<u64>()) {
        let ap = ArrayGeometry::half_wavelength(8, 60e9).unwrap();
        let sta = ArrayGeometry::half_wavelength(8, 60e9).unwrap();
        let cfg = ChannelConfig::<f64> { power_profile_db: vec![0.0, -3.0, -6.0], ..ChannelConfig::single_path() };
        let paths: PathSet<f64> = draw_paths(&mut stream(seed, Domain::Channel, &[], 0), &cfg).unwrap();
        let chans: Vec<_> = [59e9, 60e9, 61e9]
            .iter()
            .map(|&f| channel_matrix(&paths, &ap, &sta, &cfg.pattern, &cfg.coupling, f).unwrap())
            .collect();
        let set = build_orthogonal_set::<f64>(8).unwrap();
        let t = ObjectiveTable::new(&chans, &set, &set).unwrap();
        let best = t.best();
        for a in 1..=8 {
            for s in 1..=8 {
                let v = t.get(a, s).unwrap();
                prop_assert!(v <= best.objective);
                let l = loss_db(v, best.objective);
                prop_assert!(l.is_none_or(|l| l >= 0.0));
            }
        }
        prop_assert_eq!(loss_db(best.objective, best.objective), Some(0.0));
    }
}
