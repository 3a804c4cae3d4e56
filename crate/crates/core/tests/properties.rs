use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sdm1::ingest::{parse_records, CurveRecord, MappingProfile};
use sdm1::model::{sdm_residual, IVPoint, SdmParameters};
use sdm1::numerics::{exp_rescaled, find_root_bracketed, solve_linear_3x3, Bracket, RootConfig};
use sdm1::report::{write_results, CurveRow, OutputFormat};
use sdm1::uncertainty::summarize_uncertainties;
use std::cell::Cell;

proptest! {
    #[test]
    fn root_finder_stays_in_bracket(c0 in -5.0f64..5.0, c1 in 0.1f64..4.0, c3 in 0.0f64..2.0, lo in -10.0f64..-0.5, hi in 0.5f64..10.0) {
        // strictly increasing cubic shifted so that the root is inside
        let shift = c0;
        let f = |x: f64| c1 * (x - shift / 10.0) + c3 * (x - shift / 10.0).powi(3);
        let outside = Cell::new(false);
        let g = |x: f64| {
            if x < lo || x > hi {
                outside.set(true);
            }
            f(x)
        };
        let mut probe = g;
        let bracket = Bracket::new(&mut probe, lo, hi).unwrap();
        let x = find_root_bracketed(g, bracket, &RootConfig::default()).unwrap();
        prop_assert!(!outside.get());
        prop_assert!(f(lo) * f(x) <= 0.0 || f(x) * f(hi) <= 0.0);
        prop_assert!((x - shift / 10.0).abs() < 1e-9);
    }

    #[test]
    fn exp_rescaled_matches_naive_sum(
        terms in prop::collection::vec((-300.0f64..699.0, -10.0f64..10.0), 1..6)
    ) {
        let (exps, weights): (Vec<f64>, Vec<f64>) = terms.into_iter().unzip();
        let r = exp_rescaled(&exps, &weights);
        prop_assert!(r.value.is_finite());
        let naive: f64 = exps.iter().zip(&weights).map(|(x, w)| w * x.exp()).sum();
        let size: f64 = exps.iter().zip(&weights).map(|(x, w)| (w * x.exp()).abs()).sum();
        prop_assert!((r.unscaled() - naive).abs() <= 1e-12 * size.max(f64::MIN_POSITIVE));
    }

    #[test]
    fn residual_increases_with_current(
        i_ph in 0.5f64..10.0, log_io in -25.0f64..-5.0, a in 0.3f64..3.0,
        g_sh in 0.0f64..0.1, r_s in 0.0f64..1.0, v in 0.0f64..25.0, i in -1.0f64..10.0
    ) {
        let p = SdmParameters::new(i_ph, 10f64.powf(log_io), a, g_sh, r_s).unwrap();
        let h = 1e-6;
        let lo = sdm_residual(&p, IVPoint { v_pv: v, i_pv: i });
        let hi = sdm_residual(&p, IVPoint { v_pv: v, i_pv: i + h });
        if let (Ok(lo), Ok(hi)) = (lo, hi) {
            prop_assert!(hi > lo);
        }
    }

    #[test]
    fn stats_permutation_invariant_and_scale_equivariant(
        pcts in prop::collection::vec((0.0f64..15.0, 0.0f64..2.0, 0.0f64..15.0, 0.0f64..7.0), 1..40),
        seed in any::<u64>(),
        scale in 0.1f64..10.0,
    ) {
        let rows: Vec<CurveRecord> = pcts.iter().map(|p| record(*p)).collect();
        let base = summarize_uncertainties(&rows).unwrap();

        let mut shuffled = rows.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for k in (1..shuffled.len()).rev() {
            shuffled.swap(k, rng.gen_range(0..=k));
        }
        let perm = summarize_uncertainties(&shuffled).unwrap();
        for ((_, a), (_, b)) in base.variables().iter().zip(perm.variables()) {
            prop_assert_eq!(a.min, b.min);
            prop_assert_eq!(a.max, b.max);
            prop_assert!((a.mean - b.mean).abs() <= 1e-12 * (1.0 + a.mean.abs()));
            prop_assert!((a.sd - b.sd).abs() <= 1e-9 * (1.0 + a.sd));
        }

        let scaled_rows: Vec<CurveRecord> =
            pcts.iter().map(|p| record((p.0 * scale, p.1 * scale, p.2 * scale, p.3 * scale))).collect();
        let scaled = summarize_uncertainties(&scaled_rows).unwrap();
        for ((_, a), (_, b)) in base.variables().iter().zip(scaled.variables()) {
            prop_assert!((a.mean * scale - b.mean).abs() <= 1e-10 * (1.0 + b.mean.abs()));
            prop_assert!((a.sd * scale - b.sd).abs() <= 1e-9 * (1.0 + b.sd));
            prop_assert!((a.max * scale - b.max).abs() <= 1e-12 * (1.0 + b.max));
        }
    }

    #[test]
    fn parse_accounts_for_every_data_row(rows in prop::collection::vec(row_strategy(), 0..30)) {
        let mut text = String::from("timestamp,isc_a,voc_v,imp_a,vmp_v,u_isc_pct,u_voc_pct,u_imp_pct,u_vmp_pct\n");
        for r in &rows {
            text.push_str(r);
            text.push('\n');
        }
        let out = parse_records(text.as_bytes(), &MappingProfile::native());
        match out {
            Ok(out) => prop_assert_eq!(out.records.len() + out.diagnostics.len(), rows.len()),
            // every row too short
            Err(_) => prop_assert!(rows.iter().all(|r| r.split(',').count() < 9)),
        }
    }

    #[test]
    fn json_rows_round_trip(points in prop::collection::vec((-1e3f64..1e3, -1e-3f64..1e3), 0..20)) {
        let rows: Vec<CurveRow> = points.iter().map(|&(v, i)| CurveRow { v_pv_v: v, i_pv_a: i }).collect();
        let mut buf = Vec::new();
        write_results(&rows, OutputFormat::Json, &mut buf).unwrap();
        let back: Vec<CurveRow> = serde_json::from_slice(&buf).unwrap();
        prop_assert_eq!(back, rows);
    }
}

fn row_strategy() -> impl Strategy<Value = String> {
    prop_oneof![
        // valid
        (5.0f64..6.0, 20.0f64..22.0, 0.0f64..2.0).prop_map(|(isc, voc, u)| format!(
            "2011-01-22T12:05:04,{isc},{voc},{},{},{u},{u},{u},{u}",
            isc * 0.92,
            voc * 0.79
        )),
        // I_mp above I_sc
        Just("2011-01-22T12:05:04,5.0,21.0,5.5,16.0,1,1,1,1".to_owned()),
        Just("not a date,5.0,21.0,4.5,16.0,1,1,1,1".to_owned()),
        Just("2011-01-22T12:05:04,5.0".to_owned()),
        Just("2011-01-22T12:05:04,x,21.0,4.5,16.0,1,1,1,1".to_owned()),
    ]
}

fn record(p: (f64, f64, f64, f64)) -> CurveRecord {
    let text = format!(
        "timestamp,isc_a,voc_v,imp_a,vmp_v,u_isc_pct,u_voc_pct,u_imp_pct,u_vmp_pct\n2011-01-22T12:05:04,5.26,21.15,4.85,16.71,{},{},{},{}\n",
        p.0, p.1, p.2, p.3
    );
    parse_records(text.as_bytes(), &MappingProfile::native()).unwrap().records.remove(0)
}

#[test]
fn random_well_conditioned_systems() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let mut m = [[0.0; 3]; 3];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = rng.gen_range(-1.0..1.0);
                if i == j {
                    *v += 4.0f64.copysign(*v);
                }
            }
        }
        let b: [f64; 3] = std::array::from_fn(|_| rng.gen_range(-100.0..100.0));
        let x = solve_linear_3x3(&m, &b).unwrap();
        let b_norm = b.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        for i in 0..3 {
            let mx: f64 = (0..3).map(|j| m[i][j] * x[j]).sum();
            worst = worst.max((mx - b[i]).abs() / (1.0 + b_norm));
        }
    }
    assert!(worst <= 1e-10, "worst relative residual {worst:e}");
}
