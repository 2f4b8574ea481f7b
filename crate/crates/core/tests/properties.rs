//! Property tests: randomized invariants across the gauge, the SOC-OCV map,
//! the simulated cell and the quantizer.

use fuelgauge::{AdcModel, CellState, GaugeConfig, GaugeState, OcvTable, Sample, SenseCircuit};
use proptest::prelude::*;

/// Everything is plain data: freely shareable and movable across threads.
#[test]
fn types_are_send_and_sync() {
    fn check<T: Send + Sync>() {}
    check::<OcvTable>();
    check::<GaugeState>();
    check::<GaugeConfig>();
    check::<Sample>();
    check::<CellState>();
    check::<AdcModel>();
    check::<SenseCircuit>();
    check::<fuelgauge::Scenario>();
    check::<fuelgauge::RunReport>();
}

fn arb_sample_stream() -> impl Strategy<Value = Vec<(f64, f64, f64, f64)>> {
    // (dt, i, v, temp) tuples; currents mix spikes with realistic levels.
    prop::collection::vec(
        (
            0.001f64..3600.0,
            prop_oneof![
                -1.0e6f64..1.0e6,
                -9000.0f64..9000.0,
                Just(0.0f64),
                -10.0f64..10.0,
            ],
            0.0f64..5.0,
            -40.0f64..85.0,
        ),
        1..400,
    )
}

proptest! {
    /// SOC and DOD stay complements in range under arbitrary streams.
    #[test]
    fn gauge_invariants_hold_under_arbitrary_streams(stream in arb_sample_stream()) {
        let config = GaugeConfig::default();
        let table = OcvTable::default_25c();
        let mut gauge = GaugeState::initialize(3.80, 25.0, &config, &table).unwrap();
        let mut t = 0.0;
        for (dt, i, v, temp) in stream {
            t += dt;
            gauge = gauge.step(&Sample { t, i_bat: i, v_bat: v, temp }, &config).unwrap();
            prop_assert_eq!(gauge.soc + gauge.dod, 100.0);
            prop_assert!((0.0..=100.0).contains(&gauge.soc));
            prop_assert!((0.0..=100.0).contains(&gauge.dod));
            prop_assert!(gauge.q_gained >= 0.0);
            prop_assert!(gauge.q_lost >= 0.0);
            prop_assert!(gauge.q_oc >= 0.0);
            let reported = gauge.reported_soc(temp);
            prop_assert!((0.0..=100.0).contains(&reported));
            prop_assert!(reported <= gauge.soc + 1e-12);
        }
    }

    /// The map is monotone within each segment and always lands in [0, 100].
    #[test]
    fn soc_from_ocv_is_clamped_and_segmentwise_monotone(
        seg_index in 0usize..8,
        x in 0.0f64..1.0,
        y in 0.0f64..1.0,
    ) {
        let table = OcvTable::default_25c();
        let seg = table.segments()[seg_index];
        let span = seg.v_hi - seg.v_lo;
        let (lo, hi) = if x <= y { (x, y) } else { (y, x) };
        let v1 = seg.v_lo + lo * span * 0.999;
        let v2 = seg.v_lo + hi * span * 0.999;
        let s1 = table.soc_from_ocv(v1, 25.0).unwrap();
        let s2 = table.soc_from_ocv(v2, 25.0).unwrap();
        prop_assert!(s1 <= s2, "within segment {}: {} -> {}, {} -> {}", seg_index + 1, v1, s1, v2, s2);
        prop_assert!((0.0..=100.0).contains(&s1));
        prop_assert!((0.0..=100.0).contains(&s2));
    }

    /// Below the masking temperature, no voltage under the surviving
    /// segment's start produces a value.
    #[test]
    fn masking_blocks_all_low_voltages(v in 3.0f64..3.508, temp in -40.0f64..5.0) {
        let table = OcvTable::default_25c();
        prop_assert!(table.soc_from_ocv(v, temp).is_err());
    }

    #[test]
    fn masking_blocks_segment_one_in_the_cool_band(v in 3.0f64..3.452, temp in 5.0f64..15.0) {
        let table = OcvTable::default_25c();
        prop_assert!(table.soc_from_ocv(v, temp).is_err());
    }

    /// Cell charge bookkeeping is exact while the clamps stay out of play.
    #[test]
    fn cell_conserves_charge(profile in prop::collection::vec((-900.0f64..900.0, 1.0f64..30.0), 1..60)) {
        let table = OcvTable::default_25c();
        let mut cell = CellState::default_pack().with_soc(50.0);
        let start = cell.q_true;
        let mut moved = 0.0;
        for (i, dt) in profile {
            cell = cell.apply_current(i, dt, &table).0;
            moved += i * dt / 3600.0;
        }
        // Amplitudes and durations above cannot push a half-full 4400 mAh
        // pack into a clamp.
        let expected = start + moved;
        prop_assert!((cell.q_true - expected).abs() <= 1e-12 * expected.abs().max(1.0));
    }

    /// Quantization is idempotent and never moves an in-range input by more
    /// than half a step.
    #[test]
    fn quantizer_is_idempotent_and_tight(v in 0.0f64..1.0, lsb in 1e-5f64..0.01) {
        let adc = AdcModel::new(10, lsb);
        let q = adc.quantize(v.min(adc.full_scale()));
        prop_assert_eq!(adc.quantize(q), q);
        if v <= adc.full_scale() {
            prop_assert!((q - v).abs() <= lsb / 2.0 + 1e-12);
        }
    }

    /// The sensed current never errs by more than one LSB across the sense
    /// resistor.
    #[test]
    fn sense_error_is_bounded(v in 3.3f64..4.2, i in -6000.0f64..6000.0) {
        let circuit = SenseCircuit::default();
        let adc = AdcModel::default();
        let meas = fuelgauge::sense_current(v + i * circuit.r_sens / 1000.0, v, &circuit, &adc);
        prop_assert!((meas - i).abs() <= adc.lsb / circuit.r_sens * 1000.0 + 1e-9);
    }

    /// Snapshots of reachable states round-trip the bookkeeping fields.
    #[test]
    fn snapshot_round_trips(stream in prop::collection::vec((0.5f64..100.0, -5000.0f64..5000.0), 1..40)) {
        let config = GaugeConfig::default();
        let table = OcvTable::default_25c();
        let mut gauge = GaugeState::initialize(3.80, 25.0, &config, &table).unwrap();
        let mut t = 0.0;
        for (dt, i) in stream {
            t += dt;
            gauge = gauge.step(&Sample { t, i_bat: i, v_bat: 3.8, temp: 25.0 }, &config).unwrap();
        }
        let restored = GaugeState::from_snapshot(&gauge.snapshot()).unwrap();
        prop_assert_eq!(restored.mode, gauge.mode);
        prop_assert_eq!(restored.soc, gauge.soc);
        prop_assert_eq!(restored.dod, gauge.dod);
        prop_assert_eq!(restored.q_gained, gauge.q_gained);
        prop_assert_eq!(restored.q_lost, gauge.q_lost);
        prop_assert_eq!(restored.q_oc, gauge.q_oc);
        prop_assert_eq!(restored.storage_seconds, gauge.storage_seconds);
        prop_assert_eq!(restored.q_rated_est, gauge.q_rated_est);
    }
}
