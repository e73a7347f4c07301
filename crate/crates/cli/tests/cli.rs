use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rotmap::pipeline::PipelineConfig;
use tempfile::TempDir;

fn rotmap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rotmap"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = rotmap(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Synthetic site taken through ingest, delineate and features.
struct Site {
    dir: TempDir,
}

impl Site {
    fn new() -> Site {
        let dir = tempfile::tempdir().unwrap();
        let site = Site { dir };
        ok(&["synth", "--out", s(&site.path("synth")), "--seed", "5"]);
        ok(&["ingest", s(&site.path("synth/harvester")), "--out", s(&site.path("trees.csv"))]);
        ok(&site.delineate_args(&[], "stands.geojson").iter().map(String::as_str).collect::<Vec<_>>());
        ok(&[
            "features",
            "--stands",
            s(&site.path("stands.geojson")),
            "--trees",
            s(&site.path("trees.csv")),
            "--rasters",
            s(&site.path("synth/rasters/manifest.toml")),
            "--out",
            s(&site.path("table.csv")),
        ]);
        site
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.dir.path().join(rel)
    }

    fn delineate_args(&self, extra: &[&str], out: &str) -> Vec<String> {
        let mut a: Vec<String> = [
            "delineate",
            "--trees",
            s(&self.path("trees.csv")),
            "--segments",
            s(&self.path("synth/segments.geojson")),
            "--rasters",
            s(&self.path("synth/rasters/manifest.toml")),
            "--out",
            s(&self.path(out)),
        ]
        .iter()
        .map(|x| x.to_string())
        .collect();
        a.extend(extra.iter().map(|x| x.to_string()));
        a
    }

    fn read(&self, rel: &str) -> Vec<u8> {
        std::fs::read(self.path(rel)).unwrap()
    }
}

#[test]
fn cv_reruns_are_byte_identical() {
    let site = Site::new();
    let table = site.path("table.csv");
    for (out, threads) in [("a.json", "1"), ("b.json", "1"), ("c.json", "3")] {
        ok(&[
            "cv", "--table", s(&table), "--strategy", "cluster", "--vars", "prior", "--seed", "7", "--threads", threads,
            "--ntree", "100", "--out", s(&site.path(out)),
        ]);
    }
    assert_eq!(site.read("a.json"), site.read("b.json"));
    assert_eq!(site.read("a.json"), site.read("c.json"));
    assert_eq!(site.read("a.csv"), site.read("c.csv"));
    let report: serde_json::Value = serde_json::from_slice(&site.read("a.json")).unwrap();
    assert_eq!(report["strategy"], "ClusterCV");
    assert_eq!(report["seed"], 7);
}

#[test]
fn map_rejects_all_variable_model() {
    let site = Site::new();
    ok(&["train", "--table", s(&site.path("table.csv")), "--vars", "all", "--ntree", "50", "--out", s(&site.path("m.json"))]);
    let out = rotmap(&["map", "--model", s(&site.path("m.json"))]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("m.json") && err.contains("variable set `all`"), "{err}");
}

#[test]
fn prior_model_maps_every_segment() {
    let site = Site::new();
    ok(&["train", "--table", s(&site.path("table.csv")), "--ntree", "50", "--out", s(&site.path("m.json"))]);
    ok(&[
        "map",
        "--model",
        s(&site.path("m.json")),
        "--segments",
        s(&site.path("synth/segments.geojson")),
        "--rasters",
        s(&site.path("synth/rasters/manifest.toml")),
        "--out",
        s(&site.path("map.geojson")),
    ]);
    let map: serde_json::Value = serde_json::from_slice(&site.read("map.geojson")).unwrap();
    let segments: serde_json::Value = serde_json::from_slice(&site.read("synth/segments.geojson")).unwrap();
    assert_eq!(map["features"].as_array().unwrap().len(), segments["features"].as_array().unwrap().len());
    assert_eq!(map["planar_crs"], "EPSG:25833");
}

#[test]
fn delineate_defaults_match_explicit_flags() {
    let site = Site::new();
    let explicit = site.delineate_args(&["--alpha", "25", "--buffer", "2"], "explicit.geojson");
    ok(&explicit.iter().map(String::as_str).collect::<Vec<_>>());
    assert_eq!(site.read("stands.geojson"), site.read("explicit.geojson"));

    let strict = site.delineate_args(&["--min-stems", "1000"], "strict.geojson");
    ok(&strict.iter().map(String::as_str).collect::<Vec<_>>());
    assert!(site.read("stands.geojson") != site.read("strict.geojson"));
}

#[test]
fn config_file_supplies_paths_and_flags_override() {
    let site = Site::new();
    std::fs::write(
        site.path("run.toml"),
        "seed = 11\nntree = 40\n[paths]\ntrees = \"trees.csv\"\nsegments = \"synth/segments.geojson\"\n\
         rasters = \"synth/rasters/manifest.toml\"\nout_dir = \"out\"\n",
    )
    .unwrap();
    let config = site.path("run.toml");
    ok(&["delineate", "--config", s(&config)]);
    assert_eq!(site.read("out/stands.geojson"), site.read("stands.geojson"));
    ok(&["features", "--config", s(&config)]);
    assert_eq!(site.read("out/stands.csv"), site.read("table.csv"));

    ok(&["cv", "--config", s(&config)]);
    let report: serde_json::Value = serde_json::from_slice(&site.read("out/cv_stand_all.json")).unwrap();
    assert_eq!((report["seed"].as_u64(), report["ntree"].as_u64()), (Some(11), Some(40)));
    ok(&["cv", "--config", s(&config), "--seed", "12", "--ntree", "30"]);
    let report: serde_json::Value = serde_json::from_slice(&site.read("out/cv_stand_all.json")).unwrap();
    assert_eq!((report["seed"].as_u64(), report["ntree"].as_u64()), (Some(12), Some(30)));
}

#[test]
fn report_writes_importance_and_correlations() {
    let site = Site::new();
    ok(&["report", "--table", s(&site.path("table.csv")), "--ntree", "50", "--out-dir", s(&site.path("rep"))]);
    let imp = String::from_utf8(site.read("rep/importance.csv")).unwrap();
    let mut lines = imp.lines();
    assert_eq!(lines.next(), Some("model,variable,importance,se,rank"));
    assert_eq!(lines.clone().filter(|l| l.starts_with("all,")).count(), 22);
    assert_eq!(lines.filter(|l| l.starts_with("prior_to_harvest,")).count(), 17);
    let rho = String::from_utf8(site.read("rep/spearman.csv")).unwrap();
    assert_eq!(rho.lines().next(), Some("variable,spearman_rho"));
    assert_eq!(rho.lines().count(), 1 + 19);
}

/// Help text of each option, keyed by its first token.
fn option_blocks(help: &str) -> Vec<(String, String)> {
    let mut blocks: Vec<(String, String)> = Vec::new();
    for line in help.lines() {
        let t = line.trim_start();
        if t.starts_with('-') && !t.starts_with("- ") {
            let flag = t.split([' ', ',']).next().unwrap().to_string();
            blocks.push((flag, t.to_string()));
        } else if let Some(last) = blocks.last_mut() {
            last.1.push(' ');
            last.1.push_str(t);
        }
    }
    blocks
}

#[test]
fn help_lists_defaults() {
    let d = PipelineConfig::default();
    let expect = [
        ("delineate", "--alpha", d.alpha.to_string()),
        ("delineate", "--buffer", d.buffer_m.to_string()),
        ("delineate", "--min-area", d.min_area_ha.to_string()),
        ("delineate", "--min-stems", d.min_stems.to_string()),
        ("delineate", "--min-spruce", d.min_spruce_pct.to_string()),
        ("cv", "--ntree", d.ntree.to_string()),
        ("cv", "--nodesize", d.nodesize.to_string()),
        ("cv", "--min-cluster", d.min_cluster.to_string()),
        ("cv", "--seed", d.seed.to_string()),
        ("train", "--ntree", d.ntree.to_string()),
        ("report", "--nodesize", d.nodesize.to_string()),
    ];
    for (cmd, flag, value) in expect {
        let help = String::from_utf8(ok(&[cmd, "--help"]).stdout).unwrap();
        let blocks = option_blocks(&help);
        let (_, text) = blocks.iter().find(|(f, _)| f == flag).unwrap_or_else(|| panic!("{cmd} {flag}"));
        assert!(text.contains(&format!("[default: {value}]")), "{cmd}: {text}");
    }
    let no_default = ["--help", "--version", "--config", "--scenario", "--model", "-h"];
    for cmd in ["synth", "ingest", "delineate", "features", "train", "cv", "map", "report"] {
        let help = String::from_utf8(ok(&[cmd, "--help"]).stdout).unwrap();
        for (flag, text) in option_blocks(&help) {
            if no_default.contains(&flag.as_str()) || (cmd == "synth" && flag == "--out") {
                continue;
            }
            assert!(text.contains("[default:"), "{cmd}: {text}");
        }
    }
}

#[test]
fn usage_and_data_errors_have_distinct_codes() {
    assert_eq!(rotmap(&["cv", "--no-such-flag"]).status.code(), Some(1));
    assert_eq!(rotmap(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(rotmap(&["delineate"]).status.code(), Some(1));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("broken.hpr");
    std::fs::write(&bad, "<HarvestedProduction>\n  <Machine>\n").unwrap();
    let out = rotmap(&["ingest", s(&bad), "--out", s(&dir.path().join("t.csv"))]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("broken.hpr") && err.contains("line"), "{err}");
}
