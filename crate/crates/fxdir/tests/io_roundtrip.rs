use fxdir::io;
use fxdir_core::features::{apply_transforms, build_dataset, DatasetConfig, Representation};
use fxdir_core::marketdata::build_panel;
use fxdir_core::synth::{generate, SynthConfig};
use proptest::prelude::*;

proptest! {
    #[test]
    fn number_text_round_trips_exactly(x in any::<f64>().prop_filter("finite", |v| v.is_finite())) {
        prop_assert_eq!(io::num(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
    }
}

#[test]
fn synthetic_data_panel_and_dataset_survive_a_round_trip() {
    let cfg = SynthConfig { days: 600, ..SynthConfig::default() };
    let data = generate(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();

    let mut series = Vec::new();
    for s in &data.series {
        let path = dir.path().join(format!("{}.csv", s.instrument_id));
        io::write_ohlcv(&path, s).unwrap();
        let back = io::read_ohlcv(&path, &s.instrument_id).unwrap();
        assert_eq!(&back, s);
        series.push(back);
    }
    let mut calendars = Vec::new();
    for c in &data.calendars {
        let path = dir.path().join(format!("cal_{}.csv", c.indicator_id));
        io::write_calendar(&path, c).unwrap();
        let back = io::read_calendar(&path, &c.indicator_id).unwrap();
        assert_eq!(&back, c);
        calendars.push(back);
    }

    let raw = build_panel(&series, &calendars, &cfg.target).unwrap();
    let (panel, ledger) = apply_transforms(&raw, None, None).unwrap();
    let panel_dir = dir.path().join("panel");
    io::write_panel(&panel_dir, &panel).unwrap();
    assert_eq!(io::read_panel(&panel_dir).unwrap(), panel);

    let fm = build_dataset(&panel, Representation::D2, &DatasetConfig { lag_depth: 3, ..DatasetConfig::default() }).unwrap();
    let ds_dir = dir.path().join("datasets");
    io::write_dataset(&ds_dir, &fm, &ledger).unwrap();
    assert_eq!(io::read_dataset(&ds_dir, Representation::D2).unwrap(), fm);
}
