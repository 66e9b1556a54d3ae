use latmm::estimation::estimators::{count_uninformed, one_tick_filter};
use latmm::estimation::{
    estimate_lambda, estimate_uninformed_rates, generate, parse_lobster, replay_artificial_orders, write_lobster,
    EventType, SyntheticConfig,
};
use latmm::Side;

#[test]
fn file_round_trip_preserves_generator_counts() {
    let cfg = SyntheticConfig { duration: 1200.0, lambda: 3.0, lambda_plus: 2.0, lambda_minus: 2.5, ..Default::default() };
    let d = generate(&cfg, 1).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let (m, o) = (dir.path().join("m.csv"), dir.path().join("o.csv"));
    write_lobster(&d.events, &d.snapshots, &m, &o).unwrap();
    let (ev, sn) = parse_lobster(&m, &o).unwrap();
    assert_eq!(ev.len() as u64, d.counts.messages);
    assert_eq!(ev.iter().map(|e| e.order_id).collect::<Vec<_>>(), d.events.iter().map(|e| e.order_id).collect::<Vec<_>>());
    assert_eq!(sn.iter().map(|s| s.mid2()).collect::<Vec<_>>(), d.snapshots.iter().map(|s| s.mid2()).collect::<Vec<_>>());
    for (a, b) in ev.iter().zip(&d.events) {
        assert!((a.timestamp - b.timestamp).abs() < 1e-8);
    }
    let f = one_tick_filter(&sn, 100);
    assert_eq!(f.jumps, d.counts.price_up + d.counts.price_down);
    let c = count_uninformed(&ev, &sn, 100).unwrap();
    assert_eq!((c.buys, c.sells), (d.counts.uninformed_buy, d.counts.uninformed_sell));
    let joins = ev.iter().filter(|e| e.event_type == EventType::Submission).count() as u64;
    assert!(joins >= d.counts.joins);
}

#[test]
fn six_hours_recover_rates() {
    let cfg = SyntheticConfig::default();
    let d = generate(&cfg, 20161003).unwrap();
    let lam = estimate_lambda(&d.snapshots, cfg.tick).unwrap();
    let (lp, lm) = estimate_uninformed_rates(&d.events, &d.snapshots, cfg.tick, true).unwrap();
    let minutes = cfg.duration / 60.0;
    // Exact against the realized counts; the spread between realized and
    // nominal rates is Poisson noise.
    let c = d.counts;
    assert!((lam - (c.price_up + c.price_down) as f64 / minutes).abs() < 1e-9);
    assert!((lp - c.uninformed_buy as f64 / minutes).abs() < 1e-9);
    assert!((lm - c.uninformed_sell as f64 / minutes).abs() < 1e-9);
}

#[test]
fn replay_ratio_converges() {
    let cfg = SyntheticConfig { duration: 4.0 * 3600.0, lambda: 3.0, lambda_plus: 2.0, lambda_minus: 2.0, ..Default::default() };
    let d = generate(&cfg, 4).unwrap();
    let r = replay_artificial_orders(&d.events, &d.snapshots, cfg.tick, 0.0, 4000, 5, Side::Bid).unwrap();
    let ratio = r.ratio_estimate.unwrap();
    // Under the model each surviving order resolves as a race between the
    // uninformed sell, down-jump and up-jump clocks.
    let want = cfg.lambda_minus / (0.5 * cfg.lambda);
    let n = (r.n_type1 + r.n_type2) as f64;
    let p = r.n_type1 as f64 / n;
    let se = ratio * (1.0 / (n * p * (1.0 - p))).sqrt();
    assert!((ratio - want).abs() < 4.0 * se, "{ratio} vs {want} +- {se}");
    assert!(r.n_censored > 0);
}
