use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};

use proptest::prelude::*;
use sinchaos::sweeps::{
    cluster_count, flip_rows, isi_stats, run_grid, sweep_homsd, write_pgm, Axis, CellOutcome, CellRecord, GridSpec,
    HomsdCell, HomsdConfig, SweepOptions,
};
use sinchaos::Error;

fn small_grid() -> GridSpec {
    GridSpec::new((-40.0, -30.0, 6), (-2.0, -0.5, 4))
}

fn homsd_config() -> HomsdConfig {
    HomsdConfig::default()
}

fn opts(workers: usize) -> SweepOptions {
    SweepOptions {
        workers: Some(workers),
        chunk: 5,
        ..SweepOptions::default()
    }
}

#[test]
fn homsd_sweep_is_independent_of_worker_count() {
    let spec = small_grid();
    let a = sweep_homsd(&spec, &homsd_config(), &opts(1)).unwrap();
    let b = sweep_homsd(&spec, &homsd_config(), &opts(4)).unwrap();
    assert_eq!(a.cells, b.cells);
    assert_eq!(a.meta(), b.meta());
    assert!(a.progress().succeeded > 0);
    // a separatrix that settles without another voltage maximum times out
    for c in &a.cells {
        match c {
            CellOutcome::Ok(_) => {}
            CellOutcome::Skipped(r) => assert_eq!(r, "no_saddle"),
            CellOutcome::Failed(r) => assert_eq!(r, "timeout"),
        }
    }
}

#[test]
fn interrupted_sweep_resumes_to_the_same_grid() {
    let spec = small_grid();
    let fresh = sweep_homsd(&spec, &homsd_config(), &opts(2)).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let ck = dir.path().join("homsd.ckpt");
    let first = SweepOptions {
        checkpoint: Some(ck.clone()),
        stop_after: Some(10),
        ..opts(2)
    };
    match sweep_homsd(&spec, &homsd_config(), &first) {
        Err(Error::Interrupted { completed }) => assert!((10..spec.len()).contains(&completed)),
        other => panic!("expected interruption, got {other:?}"),
    }
    // a torn line from a crash mid-write is tolerated
    let mut text = std::fs::read_to_string(&ck).unwrap();
    text.push_str("17,o");
    std::fs::write(&ck, text).unwrap();

    let resume = SweepOptions {
        checkpoint: Some(ck.clone()),
        ..opts(3)
    };
    let resumed = sweep_homsd(&spec, &homsd_config(), &resume).unwrap();
    assert_eq!(resumed.cells, fresh.cells);
    assert_eq!(resumed.meta(), fresh.meta());

    let other = HomsdConfig {
        timeout: 6e4,
        ..homsd_config()
    };
    assert!(matches!(
        sweep_homsd(&spec, &other, &resume),
        Err(Error::InvalidArgument(_))
    ));
}

#[test]
fn resumed_grid_evaluates_each_cell_once() {
    let spec = GridSpec::new((0.0, 1.0, 7), (0.0, 1.0, 5));
    let dir = tempfile::tempdir().unwrap();
    let ck = dir.path().join("count.ckpt");
    let calls = AtomicUsize::new(0);
    let cell = |k: usize| {
        calls.fetch_add(1, Ordering::SeqCst);
        if k % 11 == 3 {
            CellOutcome::Skipped("odd".into())
        } else {
            CellOutcome::Ok(HomsdCell { spikes: k as u32 })
        }
    };
    let with_ck = |stop: Option<usize>| SweepOptions {
        checkpoint: Some(ck.clone()),
        stop_after: stop,
        chunk: 4,
        workers: Some(2),
    };
    assert!(run_grid("count", &spec, BTreeMap::new(), &with_ck(Some(12)), cell).is_err());
    let before = calls.load(Ordering::SeqCst);
    assert_eq!(before, 12);
    let g = run_grid("count", &spec, BTreeMap::new(), &with_ck(None), cell).unwrap();
    assert_eq!(calls.load(Ordering::SeqCst), spec.len());
    for (k, c) in g.cells.iter().enumerate() {
        match c {
            CellOutcome::Ok(h) => assert_eq!(h.spikes as usize, k),
            CellOutcome::Skipped(r) => {
                assert_eq!(k % 11, 3);
                assert_eq!(r, "odd");
            }
            CellOutcome::Failed(_) => unreachable!(),
        }
    }
    // a complete checkpoint needs no further evaluation
    run_grid("count", &spec, BTreeMap::new(), &with_ck(None), cell).unwrap();
    assert_eq!(calls.load(Ordering::SeqCst), spec.len());
}

#[test]
fn outputs_are_row_major_with_axis_two_along_rows() {
    let spec = GridSpec::new((0.0, 3.0, 4), (10.0, 20.0, 3));
    let g = run_grid("layout", &spec, BTreeMap::new(), &opts(1), |k| {
        CellOutcome::Ok(HomsdCell { spikes: k as u32 })
    })
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    g.write_outputs(dir.path()).unwrap();
    let m = std::fs::read_to_string(dir.path().join("spikes.csv")).unwrap();
    let rows: Vec<Vec<f64>> = m
        .lines()
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 3);
    for (j, row) in rows.iter().enumerate() {
        assert_eq!(row.len(), 4);
        for (i, v) in row.iter().enumerate() {
            assert_eq!(*v as usize, j * 4 + i);
            assert_eq!(spec.coords(j * 4 + i), (i as f64, 10.0 + 5.0 * j as f64));
        }
    }
    let cells = std::fs::read_to_string(dir.path().join("cells.csv")).unwrap();
    let mut lines = cells.lines();
    assert_eq!(lines.next(), Some("dCa,dVx,status,spikes"));
    for (k, l) in lines.enumerate() {
        let f: Vec<&str> = l.split(',').collect();
        assert_eq!(HomsdCell::from_fields(&f[3..]).unwrap().spikes as usize, k);
    }
}

#[test]
fn isi_statistics_match_direct_evaluation() {
    let times = [0.0, 10.0, 30.0, 35.0, 75.0];
    let isi = [10.0, 20.0, 5.0, 40.0];
    let mean = isi.iter().sum::<f64>() / 4.0;
    let var = isi.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / 3.0;
    let (m, v) = isi_stats(&times);
    assert!((m - mean).abs() < 1e-12 && (v - var).abs() < 1e-12);
    assert!(isi_stats(&[1.0]).0.is_nan());
    assert!(isi_stats(&[1.0, 2.0]).1.is_nan());
}

#[test]
fn images_flip_so_axis_two_grows_upward() {
    let vals: Vec<u8> = (0..6).collect();
    let flipped = flip_rows(&vals, 3);
    assert_eq!(flipped, vec![3, 4, 5, 0, 1, 2]);
    let mut buf = Vec::new();
    write_pgm(&mut buf, 3, 2, &flipped).unwrap();
    assert!(buf.starts_with(b"P5\n3 2\n255\n"));
    assert_eq!(&buf[buf.len() - 6..], &flipped[..]);
    assert!(write_pgm(&mut Vec::new(), 2, 2, &flipped).is_err());
}

proptest! {
    #[test]
    fn axis_hits_both_endpoints(lo in -50.0f64..0.0, span in 0.1f64..60.0, n in 2usize..2000) {
        let a = Axis::new("a", lo, lo + span, n);
        prop_assert_eq!(a.value(0), lo);
        prop_assert_eq!(a.value(n - 1), lo + span);
        let v = a.values();
        prop_assert!(v.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn cluster_count_splits_at_wide_gaps(centers in prop::collection::btree_set(0u32..50, 1..8), jitter in 0.0f64..0.3) {
        let values: Vec<f64> = centers
            .iter()
            .flat_map(|&c| [c as f64 * 10.0, c as f64 * 10.0 + jitter, c as f64 * 10.0 - jitter])
            .collect();
        prop_assert_eq!(cluster_count(&values, 1.0), centers.len());
    }
}
