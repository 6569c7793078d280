use urllc_core::simo::{ser_gain_heatmap, simulate_ed_ser, simulate_mrc_ser, HeatmapSpec, SimoChannel};
use urllc_core::LinkSnr;

fn channel(m: usize, snr_db: f64, sigma: f64) -> SimoChannel {
    SimoChannel::new(m, LinkSnr::from_db(snr_db).unwrap(), sigma).unwrap()
}

#[test]
fn mrc_with_perfect_estimate_beats_energy_detection() {
    for snr_db in [0.0, 10.0] {
        let ch = channel(16, snr_db, 0.0);
        let mrc = simulate_mrc_ser(&ch, 4, 20_000, 1).unwrap();
        let ed = simulate_ed_ser(&ch, 4, 20_000, 1).unwrap();
        assert!(mrc.ser <= ed.ser, "{snr_db} dB: {} vs {}", mrc.ser, ed.ser);
    }
}

#[test]
fn stale_estimate_hurts_coherent_detection_only() {
    let fresh = channel(32, 10.0, 0.0);
    let stale = channel(32, 10.0, 0.9);
    let a = simulate_mrc_ser(&fresh, 2, 20_000, 2).unwrap();
    let b = simulate_mrc_ser(&stale, 2, 20_000, 2).unwrap();
    assert!(b.ser > a.ser);
    let ea = simulate_ed_ser(&fresh, 2, 20_000, 3).unwrap();
    let eb = simulate_ed_ser(&stale, 2, 20_000, 3).unwrap();
    assert_eq!(ea, eb);
}

#[test]
fn heatmap_is_seed_deterministic_and_complete() {
    let spec = HeatmapSpec {
        snr_grid_db: vec![0.0, 10.0],
        sigma_grid: vec![0.0, 0.5, 0.9],
        m_antennas: 16,
        levels: 2,
        trials: 2000,
        interference_power: 0.0,
    };
    let a = ser_gain_heatmap(&spec, 9).unwrap();
    assert_eq!(a.len(), 6);
    assert_eq!(a, ser_gain_heatmap(&spec, 9).unwrap());
    for c in &a {
        let floor = 1.0 / c.trials as f64;
        assert_eq!(c.censored, c.ser_mrc == 0.0 || c.ser_ed == 0.0);
        assert!((c.gain_log10 - (c.ser_mrc.max(floor) / c.ser_ed.max(floor)).log10()).abs() < 1e-12);
    }
}
