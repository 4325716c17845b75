use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use heightproj::io::{read_heightmap, write_heightmap, write_voxels};
use heightproj::{HeightMap, SemanticVoxelGrid, VoxelGridSpec, VoxelIndex};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_heightproj"))
}

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn small_spec(dir: &Path) -> (VoxelGridSpec, PathBuf) {
    let spec = VoxelGridSpec::new((0.0, 2.0), (0.0, 1.2), (-1.0, 5.4), 0.4, 0.4).unwrap();
    let path = dir.join("grid.json");
    std::fs::write(&path, spec.to_json()).unwrap();
    (spec, path)
}

#[test]
fn heightmap_matches_golden() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("h.hprh");
    let o = run(&[
        "heightmap",
        "--points",
        s(&fixture("cloud.hprp")),
        "--spec",
        s(&fixture("occ3d.json")),
        "--out",
        s(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(std::fs::read(&out).unwrap(), std::fs::read(fixture("cloud_golden.hprh")).unwrap());
}

#[test]
fn heightmap_is_thread_count_independent() {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for t in ["1", "4", "0"] {
        let out = dir.path().join(format!("h{t}.hprh"));
        let o = run(&["--threads", t, "heightmap", "--points", s(&fixture("cloud.hprp")), "--out", s(&out)]);
        assert!(o.status.success());
        outputs.push(std::fs::read(&out).unwrap());
    }
    assert!(outputs.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn mix_at_epoch_zero_takes_gt() {
    let dir = tempfile::tempdir().unwrap();
    let (spec, grid) = small_spec(dir.path());
    let mut lidar = HeightMap::constant(spec, 0.2);
    lidar.set(0, 0, None);
    let mut gt = HeightMap::constant(spec, 1.8);
    gt.set(1, 1, None);
    let (lp, gp, out) = (dir.path().join("l.hprh"), dir.path().join("g.hprh"), dir.path().join("m.hprh"));
    write_heightmap(&lp, &lidar).unwrap();
    write_heightmap(&gp, &gt).unwrap();
    let o = run(&[
        "mix", "--lidar", s(&lp), "--gt", s(&gp), "--spec", s(&grid), "--epoch", "0", "--epochs", "24", "--seed", "3",
        "--mode", "replace", "--out", s(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m = read_heightmap(&out, &spec).unwrap();
    let (g, l) = (read_heightmap(&gp, &spec).unwrap(), read_heightmap(&lp, &spec).unwrap());
    for c in 0..spec.bev_len() {
        match (l.cell(c), g.cell(c)) {
            (Some(_), Some(gv)) => assert_eq!(m.cell(c), Some(gv)),
            (lv, None) => assert_eq!(m.cell(c), lv),
            (None, _) => assert_eq!(m.cell(c), None),
        }
    }
    assert!(String::from_utf8_lossy(&o.stdout).contains("\"rho\":1.0"));
}

#[test]
fn mix_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (spec, grid) = small_spec(dir.path());
    let (lp, gp) = (dir.path().join("l.hprh"), dir.path().join("g.hprh"));
    write_heightmap(&lp, &HeightMap::constant(spec, 0.2)).unwrap();
    write_heightmap(&gp, &HeightMap::constant(spec, 1.8)).unwrap();
    let go = |name: &str| {
        let out = dir.path().join(name);
        let o = run(&[
            "mix", "--lidar", s(&lp), "--gt", s(&gp), "--spec", s(&grid), "--epoch", "12", "--epochs", "24",
            "--mode", "lerp", "--schedule", "step", "--out", s(&out),
        ]);
        assert!(o.status.success());
        (o.stdout, std::fs::read(out).unwrap())
    };
    assert_eq!(go("a.hprh"), go("b.hprh"));
}

#[test]
fn eval_identical_grids() {
    let dir = tempfile::tempdir().unwrap();
    let (spec, grid) = small_spec(dir.path());
    let mut g = SemanticVoxelGrid::free(spec, 17).unwrap();
    g.set(VoxelIndex::new(1, 1, 2), 4).unwrap();
    g.set(VoxelIndex::new(3, 0, 0), 0).unwrap();
    let p = dir.path().join("g.hprv");
    write_voxels(&p, &g).unwrap();
    let o = run(&["eval", "--pred", s(&p), "--gt", s(&p), "--spec", s(&grid), "--metric", "miou"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = String::from_utf8(o.stdout).unwrap();
    assert!(out.lines().any(|l| l == "mIoU 1"), "{out}");
    let json: serde_json::Value = serde_json::from_str(out.lines().last().unwrap()).unwrap();
    assert_eq!(json["value"], 1.0);

    let rays = dir.path().join("rays.json");
    std::fs::write(&rays, r#"[{"origin":[0.1,0.6,0.0],"direction":[1.0,0.0,0.0]}]"#).unwrap();
    let o = run(&[
        "eval", "--pred", s(&p), "--gt", s(&p), "--spec", s(&grid), "--metric", "rayiou", "--rays", s(&rays),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8(o.stdout).unwrap().contains("RayIoU 1"));
}

#[test]
fn sample_and_project_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let (spec, grid) = small_spec(dir.path());
    let mut h = HeightMap::invalid(spec);
    h.set(2, 1, Some(1.8));
    let hp = dir.path().join("h.hprh");
    write_heightmap(&hp, &h).unwrap();
    let refs = dir.path().join("refs.csv");
    let o = run(&["sample", "--heights", s(&hp), "--spec", s(&grid), "--nz", "4", "--out", s(&refs)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&refs).unwrap();
    let lines: Vec<_> = text.lines().collect();
    assert_eq!(lines[0], "ix,iy,j,x,y,z");
    assert_eq!(lines.len(), 5);
    let top: f64 = lines[4].rsplit(',').next().unwrap().parse().unwrap();
    assert_eq!(top, f64::from(1.8f32));

    let cams = dir.path().join("cams");
    assert!(run(&["canonical", "--out-dir", s(&cams)]).status.success());
    let cam = cams.join("camera.json");
    let out = dir.path().join("proj.csv");
    let o = run(&["project", "--refs", s(&refs), "--calib", s(&cam), "--calib", s(&cam), "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("ix,iy,j,x,y,z,cam,u,v,depth,valid\n"));
    assert_eq!(text.lines().count(), 1 + 4 * 2);
}

#[test]
fn uniform_sample_covers_every_cell() {
    let dir = tempfile::tempdir().unwrap();
    let (spec, grid) = small_spec(dir.path());
    let o = run(&["sample", "--mode", "uniform", "--spec", s(&grid), "--nz", "3"]);
    assert!(o.status.success());
    assert_eq!(String::from_utf8(o.stdout).unwrap().lines().count(), 1 + 3 * spec.bev_len());
}

#[test]
fn sim_then_gtheight() {
    let dir = tempfile::tempdir().unwrap();
    let c = dir.path().join("c");
    assert!(run(&["canonical", "--out-dir", s(&c)]).status.success());
    let (pts, gt, h) = (dir.path().join("p.hprp"), dir.path().join("g.hprv"), dir.path().join("h.hprh"));
    let o = run(&[
        "sim", "--scene", s(&c.join("scene.json")), "--lidar", s(&c.join("lidar.json")), "--seed", "5",
        "--out-points", s(&pts), "--out-gt", s(&gt),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let o = run(&["gtheight", "--voxels", s(&gt), "--out", s(&h)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let hm = read_heightmap(&h, &VoxelGridSpec::occ3d()).unwrap();
    // vehicle footprint pillar
    assert_eq!(hm.get(125, 100), Some(f64::from(1.8f32)));
    let o = run(&["heightmap", "--points", s(&pts), "--out", s(&dir.path().join("l.hprh"))]);
    assert!(o.status.success());
}

#[test]
fn experiments_print_json() {
    let o = run(&["exp-hitrate", "--mode", "uniform"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["hit_rate"], 0.5);
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("hits.csv");
    let o = run(&["exp-hitrate", "--out", s(&csv)]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["hit_rate"], 1.0);
    assert_eq!(std::fs::read_to_string(&csv).unwrap().lines().count(), 1 + 192);
    let o = run(&["exp-heighterr", "--noise", "0"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v["mean_abs"].as_f64().unwrap() <= 0.4);
}

#[test]
fn exit_codes() {
    // usage errors
    assert_eq!(run(&[]).status.code(), Some(1));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&["heightmap", "--points"]).status.code(), Some(1));
    assert_eq!(run(&["sample", "--mode", "guided"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    // data errors
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.hprp");
    std::fs::write(&bad, b"NOPE\x01\0\0\0\0\0\0\0\0\0\0\0").unwrap();
    let o = run(&["heightmap", "--points", s(&bad), "--out", s(&dir.path().join("x.hprh"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("byte 0"));
    let o = run(&["heightmap", "--points", s(&dir.path().join("missing.hprp")), "--out", "x.hprh"]);
    assert_eq!(o.status.code(), Some(2));
    // golden map read against the wrong grid
    let (_, grid) = small_spec(dir.path());
    let o = run(&[
        "sample", "--heights", s(&fixture("cloud_golden.hprh")), "--spec", s(&grid),
    ]);
    assert_eq!(o.status.code(), Some(2));
}
