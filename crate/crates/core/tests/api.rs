use p2atlas::airy::{Lambda, SeedWeights};
use p2atlas::exec::Exec;
use p2atlas::num::C64;
use p2atlas::phase::{build_atlas, s_curve, AtlasOptions, RegionAtlas};
use p2atlas::quaddiff::TraceOptions;
use p2atlas::zerofind::{pole_map_with, LocateOptions, Window};
use p2atlas::taufun::TauOptions;

#[test]
fn atlas_survives_json() {
    let a = build_atlas(&AtlasOptions::default(), Exec::default()).unwrap();
    let b = RegionAtlas::from_json(&a.to_json()).unwrap();
    let grid_a = a.classify_grid(C64::new(-3.0, -3.0), C64::new(3.0, 3.0), 61, 61, Exec::Sequential);
    let grid_b = b.classify_grid(C64::new(-3.0, -3.0), C64::new(3.0, 3.0), 61, 61, Exec::Parallel);
    assert_eq!(grid_a, grid_b);
    assert_eq!(a.corners, b.corners);
}

#[test]
fn execution_mode_does_not_change_results() {
    let w = Window::new(C64::new(-5.0, -5.0), C64::new(5.0, 5.0)).unwrap();
    let weights = SeedWeights::new(Lambda::Finite(C64::new(1.0, 1.0)));
    let maps: Vec<_> = [Exec::Sequential, Exec::Parallel]
        .into_iter()
        .map(|exec| pole_map_with(3, &weights, &w, &LocateOptions { exec, ..Default::default() }, &TauOptions::default()).unwrap())
        .collect();
    assert_eq!(maps[0], maps[1]);
    assert!(maps[0].complete);

    let atlas = build_atlas(&AtlasOptions::default(), Exec::default()).unwrap();
    let t = C64::new(-2.0, 3.0);
    let s1 = s_curve(t, &atlas, &TraceOptions::default(), Exec::Sequential).unwrap();
    let s2 = s_curve(t, &atlas, &TraceOptions::default(), Exec::Parallel).unwrap();
    assert_eq!(serde_json::to_string(&s1).unwrap(), serde_json::to_string(&s2).unwrap());
    assert!(s1.graph.admissible);
}
