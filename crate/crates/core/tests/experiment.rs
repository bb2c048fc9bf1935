use hazyard::experiment::{
    emit_batch, emit_sweep, generate_instance, parse_sweep_csv, run_batch, runs_csv, sweep, sweep_csv, sweep_plotdata,
    ExperimentError, ExperimentSpec, OutputFormat, SweepAxis, SweepValue, TypeMix, RUN_CSV_HEADER,
};
use hazyard::{ContainerType, RunStatus, Strategy, StrategyParams, YardDimensions};

fn small_spec(strategy: Strategy, runs: usize) -> ExperimentSpec {
    let mut spec = ExperimentSpec::standard(StrategyParams::new(strategy, 0), runs, 11);
    spec.dims = YardDimensions::new(6, 6, 2).unwrap();
    if strategy == Strategy::Schelling {
        spec.params.movement_budget = 2000;
    }
    spec
}

#[test]
fn generated_instances_follow_the_mix() {
    let spec = small_spec(Strategy::Cabs, 1);
    let counts = spec.type_counts().unwrap();
    for run in 0..5 {
        let cfg = generate_instance(&spec, run).unwrap();
        cfg.validate().unwrap();
        for (t, n) in &counts {
            assert_eq!(cfg.containers().filter(|r| r.ctype == *t).count(), *n);
        }
        assert_eq!(cfg, generate_instance(&spec, run).unwrap());
    }
    assert_ne!(
        generate_instance(&spec, 0).unwrap(),
        generate_instance(&spec, 1).unwrap()
    );
}

#[test]
fn neutral_only_batches_never_move() {
    let mut spec = small_spec(Strategy::Cabs, 20);
    spec.mix = TypeMix {
        t1: 0.0,
        t2: 0.0,
        t3: 0.0,
        t4: 0.0,
    };
    for strategy in [Strategy::Cabs, Strategy::Schelling] {
        spec.params = StrategyParams::new(strategy, 0);
        let batch = run_batch(&spec).unwrap();
        assert_eq!(batch.stats.success_rate, 100.0);
        let m = batch.stats.movements.unwrap();
        assert_eq!((m.min, m.max, m.avg), (0, 0, 0.0));
        assert!(batch.rows.iter().all(|r| r.status == RunStatus::Safe));
        assert!(batch.audits.is_empty());
    }
    let cfg = generate_instance(&spec, 0).unwrap();
    assert!(cfg.containers().all(|r| r.ctype == ContainerType::T5));
}

#[test]
fn run_csv_has_the_documented_header() {
    let batch = run_batch(&small_spec(Strategy::Cabs, 3)).unwrap();
    let text = runs_csv(&batch.rows, true).unwrap();
    assert_eq!(text.lines().next().unwrap(), RUN_CSV_HEADER);
    assert_eq!(text.lines().count(), 4);
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    for (rec, row) in rdr.records().zip(&batch.rows) {
        let rec = rec.unwrap();
        assert_eq!(rec.get(0).unwrap(), "cabs");
        assert_eq!(rec.get(13).unwrap(), row.movements.to_string());
    }
}

#[test]
fn comparison_mode_output_is_byte_identical() {
    for strategy in [Strategy::Cabs, Strategy::Schelling] {
        let spec = small_spec(strategy, 8);
        let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
        for dir in &dirs {
            emit_batch(&run_batch(&spec).unwrap(), &spec, dir.path(), false).unwrap();
        }
        for name in ["summary.csv", "runs.csv"] {
            let a = std::fs::read(dirs[0].path().join(name)).unwrap();
            let b = std::fs::read(dirs[1].path().join(name)).unwrap();
            assert_eq!(a, b, "{name} differs for {strategy}");
        }
    }
}

#[test]
fn batches_do_not_depend_on_thread_count() {
    let spec = small_spec(Strategy::Cabs, 12);
    let parallel = run_batch(&spec).unwrap();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let single = pool.install(|| run_batch(&spec)).unwrap();
    assert_eq!(
        runs_csv(&parallel.rows, false).unwrap(),
        runs_csv(&single.rows, false).unwrap()
    );
}

#[test]
fn fill_sweep_writes_every_format() {
    let spec = small_spec(Strategy::Cabs, 6);
    let values: Vec<_> = ["30", "50", "70"]
        .iter()
        .map(|v| SweepValue::parse(SweepAxis::Fill, v).unwrap())
        .collect();
    let table = sweep(&spec, SweepAxis::Fill, &values).unwrap();
    assert_eq!(table.points.len(), 3);

    let data = sweep_plotdata(&table);
    let xs: Vec<f64> = data
        .lines()
        .skip(1)
        .map(|l| l.split_whitespace().next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(xs, vec![30.0, 50.0, 70.0]);

    let csv = sweep_csv(&table, false).unwrap();
    let back = parse_sweep_csv(&csv).unwrap();
    assert_eq!(sweep_csv(&back, false).unwrap(), csv);

    let dir = tempfile::tempdir().unwrap();
    for format in [OutputFormat::Csv, OutputFormat::PlotData, OutputFormat::Svg] {
        for path in emit_sweep(&table, format, dir.path(), true).unwrap() {
            assert!(std::fs::metadata(&path).unwrap().len() > 0);
        }
    }
    let svg = std::fs::read_to_string(dir.path().join("sweep_fill.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
}

#[test]
fn dims_sweep_scales_the_block() {
    let spec = small_spec(Strategy::Cabs, 4);
    let values: Vec<_> = ["4x4x2", "8x4x2"]
        .iter()
        .map(|v| SweepValue::parse(SweepAxis::Dims, v).unwrap())
        .collect();
    let table = sweep(&spec, SweepAxis::Dims, &values).unwrap();
    assert_eq!(table.points[0].value.x(), 32.0);
    assert_eq!(table.points[1].value.label(), "8x4x2");
}

#[test]
fn empty_sweep_is_an_error() {
    let spec = small_spec(Strategy::Cabs, 2);
    assert!(matches!(
        sweep(&spec, SweepAxis::Fill, &[]),
        Err(ExperimentError::EmptySweep)
    ));
}

#[test]
fn unwritable_output_is_reported() {
    let spec = small_spec(Strategy::Cabs, 2);
    let batch = run_batch(&spec).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let err = emit_batch(&batch, &spec, &blocker.join("out"), true).unwrap_err();
    assert!(matches!(err, ExperimentError::Io { .. }), "{err}");
}

#[test]
fn invalid_specs_are_rejected() {
    let mut spec = small_spec(Strategy::Cabs, 2);
    spec.fill = 1.5;
    assert!(spec.validate().is_err());
    let mut spec = small_spec(Strategy::Cabs, 0);
    spec.runs = 0;
    assert!(spec.validate().is_err());
    let mut spec = small_spec(Strategy::Cabs, 2);
    spec.mix = TypeMix {
        t1: 60.0,
        t2: 60.0,
        t3: 0.0,
        t4: 0.0,
    };
    assert!(spec.validate().is_err());
}
