//! Bundled fixtures and golden files. Set `SBR_BLESS=1` to rewrite them.

use std::path::{Path, PathBuf};

use sbr_core::eval::data::{load_returns_csv, read_sample_csv, write_returns_csv, write_sample_csv};
use sbr_core::eval::frontier::FrontierPoint;
use sbr_core::eval::generate::{gen_market, gen_newsvendor_demand, MarketConfig};
use sbr_core::eval::svg::frontier_svg_string;
use sbr_core::newsvendor::NewsvendorParams;
use sbr_core::scenarios::compress;
use sbr_core::solve::export::export_newsvendor_misocp;
use sbr_core::solve::model::read_model;
use sbr_core::{Aggregation, DiscreteMeasure};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn bless() -> bool {
    std::env::var("SBR_BLESS").is_ok_and(|v| v == "1")
}

/// Compares `bytes` with the committed file, or writes it when blessing.
fn check_golden(name: &str, bytes: &[u8]) {
    let path = fixtures().join(name);
    if bless() {
        std::fs::write(&path, bytes).unwrap();
        return;
    }
    let want = std::fs::read(&path).unwrap_or_else(|e| panic!("{name}: {e}"));
    assert!(want == bytes, "{name} differs from the committed golden file");
}

fn render_to_bytes(write: impl FnOnce(&Path)) -> Vec<u8> {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("out");
    write(&p);
    std::fs::read(p).unwrap()
}

/// Demand rounded to four decimals so the file does not depend on the
/// platform's `exp`.
fn newsvendor_train() -> DiscreteMeasure {
    let raw = gen_newsvendor_demand(50, 2024).unwrap();
    let rows = raw
        .points()
        .iter()
        .map(|r| r.iter().map(|v| (v * 1e4).round() / 1e4).collect())
        .collect();
    DiscreteMeasure::uniform(rows).unwrap()
}

#[test]
fn newsvendor_training_fixture() {
    let bytes = render_to_bytes(|p| write_sample_csv(p, &newsvendor_train()).unwrap());
    check_golden("newsvendor_train.csv", &bytes);
}

#[test]
fn market_fixtures_regenerate_identically() {
    let cases = [
        (MarketConfig::adverse(2020), "returns_2020.csv", Some("index_2020.csv")),
        (MarketConfig::training(2021), "returns_2021.csv", None),
        (MarketConfig::testing(2022), "returns_2022.csv", None),
    ];
    for (cfg, assets_name, index_name) in cases {
        let (assets, index) = gen_market(&cfg).unwrap();
        check_golden(assets_name, &render_to_bytes(|p| write_returns_csv(p, &assets).unwrap()));
        if let Some(name) = index_name {
            check_golden(name, &render_to_bytes(|p| write_returns_csv(p, &index).unwrap()));
        }
        assert_eq!(load_returns_csv(&fixtures().join(assets_name)).unwrap(), assets);
    }
}

/// d = 5, m = 5, n = 50 newsvendor model built from the committed sample.
#[test]
fn newsvendor_model_golden() {
    let train = read_sample_csv(&fixtures().join("newsvendor_train.csv")).unwrap();
    assert_eq!((train.len(), train.dim()), (50, 5));
    let spec = compress(&train, 5, 7, Aggregation::Quadratic).unwrap();
    let model = export_newsvendor_misocp(&NewsvendorParams::reference(), &train, &spec, 1.0, None, None).unwrap();
    assert_eq!(model.binary_count(), 25);
    assert_eq!(model.variables.len(), 5 + 250 + 50 + 5 + 1);
    assert_eq!(model.linear.len(), 500 + 50 + 25);
    assert_eq!(model.soc.len(), 6);
    check_golden("newsvendor_model.json", model.to_canonical_string().as_bytes());
    if !bless() {
        assert_eq!(read_model(&fixtures().join("newsvendor_model.json")).unwrap(), model);
    }
}

#[test]
fn frontier_svg_golden() {
    let pts = vec![
        FrontierPoint { eps: 0.0, method: "saa".into(), mean: 10.0, cvar: 14.0, premium: 4.0 },
        FrontierPoint { eps: 0.01, method: "sbr".into(), mean: 9.8, cvar: 13.6, premium: 3.8 },
        FrontierPoint { eps: 0.1, method: "sbr".into(), mean: 9.5, cvar: 13.0, premium: 3.5 },
    ];
    check_golden("frontier_3pt.svg", frontier_svg_string(&pts).unwrap().as_bytes());
}
