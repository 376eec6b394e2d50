use std::fs;
use std::path::{Path, PathBuf};

use rcert_certify::{encode, planet_bounds, EncodeOptions, Switch};
use rcert_cli::cli::run_from;
use rcert_cli::report::parse_pair;
use rcert_cli::tables::Table;
use rcert_core::io::{load_dataset, load_model, save_model, ModelFile, Provenance};
use rcert_core::{AuctionConfig, AuctionNet, BidProfile, InputBox, IrMode};

fn rcert(args: &[&str]) -> i32 {
    run_from(std::iter::once("rcert").chain(args.iter().copied()))
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn gen_data_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.txt"), dir.path().join("b.txt"));
    for p in [&a, &b] {
        assert_eq!(rcert(&["gen-data", "--n", "1", "--k", "2", "--count", "1000", "--seed", "7", "--out", s(p)]), 0);
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let d = load_dataset(&a).unwrap();
    assert_eq!((d.n_agents, d.n_items, d.len()), (1, 2, 1000));
    assert!(dir.path().join("a.txt.manifest.toml").exists());
}

#[test]
fn usage_errors_exit_2_and_runtime_errors_exit_1() {
    assert_eq!(rcert(&[]), 2);
    assert_eq!(rcert(&["train", "--bogus"]), 2);
    assert_eq!(rcert(&["gen-data", "--n", "one", "--k", "2", "--count", "1", "--seed", "0", "--out", "x"]), 2);
    assert_eq!(rcert(&["certify", "--model", "m.txt", "--out", "o.csv"]), 2, "needs --data or --points");
    assert_eq!(rcert(&["certify", "--model", "m.txt", "--points", "3", "--out", "o.csv"]), 2, "--points needs --seed");
    assert_eq!(rcert(&["train", "--n", "1", "--k", "2", "--trunk", "4", "--ir-mode", "exact", "--data", "d", "--out", "m", "--log", "l"]), 2);
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.txt");
    let out = dir.path().join("o.csv");
    assert_eq!(rcert(&["evaluate", "--model", s(&missing), "--data", s(&missing), "--out", s(&out)]), 1);
}

fn save_zero(dir: &Path, mode: IrMode) -> PathBuf {
    let p = dir.join(format!("zero_{mode:?}.txt"));
    let net = AuctionNet::zeros(&AuctionConfig::new(1, 2, vec![4], mode)).unwrap();
    save_model(&p, &ModelFile { net, provenance: Provenance { seed: 0, config_hash: String::new() } }).unwrap();
    p
}

#[test]
fn evaluate_zero_models() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.txt");
    assert_eq!(rcert(&["gen-data", "--n", "1", "--k", "2", "--count", "20", "--seed", "3", "--out", s(&data)]), 0);
    let profiles = load_dataset(&data).unwrap().profiles;

    // The zero network allocates each item half to the agent and half to
    // the dummy. PenaltyFree charges nothing; Fractional charges half the
    // allocated bid value, which the agent escapes entirely by bidding zero.
    for (mode, pay, regret) in [(IrMode::PenaltyFree, 0.0, 0.0), (IrMode::Fractional, 0.25, 0.25)] {
        let model = save_zero(dir.path(), mode);
        let out = dir.path().join(format!("eval_{mode:?}.csv"));
        assert_eq!(rcert(&["evaluate", "--model", s(&model), "--data", s(&data), "--out", s(&out)]), 0);
        let t = Table::read(&out).unwrap();
        let revenue = t.reals("revenue").unwrap();
        let regrets = t.reals("regret_0").unwrap();
        for (v, (r, g)) in profiles.iter().zip(revenue.iter().zip(&regrets)) {
            let value: f64 = v.values.iter().sum();
            assert!((r - pay * value).abs() < 1e-12, "{mode:?}: revenue {r}");
            assert!((g - regret * value).abs() < 1e-9, "{mode:?}: regret {g}");
        }
        assert!(fs::read_to_string(&out).unwrap().starts_with("# manifest="));
    }
}

#[test]
fn clip_flag_reaches_the_encoding() {
    let dir = tempfile::tempdir().unwrap();
    let p = |n: &str| dir.path().join(n);
    let cfg = p("train.toml");
    fs::write(&cfg, "epochs = 2\nbatch_size = 100\nmisreport_steps_train = 5\nseed = 4\n").unwrap();
    assert_eq!(rcert(&["gen-data", "--n", "1", "--k", "2", "--count", "200", "--seed", "1", "--out", s(&p("d.txt"))]), 0);
    let (data, log) = (p("d.txt"), p("log.csv"));
    let train = |clip: bool, out: &Path| {
        let mut args = vec![
            "train", "--n", "1", "--k", "2", "--trunk", "6", "--ir-mode", "penalty-free", "--data", s(&data),
            "--config", s(&cfg), "--out", s(out), "--log", s(&log),
        ];
        if clip {
            args.push("--clip");
        }
        assert_eq!(rcert(&args), 0);
    };
    train(true, &p("clipped.txt"));
    train(false, &p("raw.txt"));
    assert_eq!(rcert(&["train", "--n", "1", "--k", "2", "--trunk", "6", "--data", s(&p("d.txt")), "--clip", "--out", s(&p("x.txt")), "--log", s(&p("x.csv"))]), 1, "clipping a fractional net");

    let clipped = load_model(&p("clipped.txt")).unwrap().net;
    let raw = load_model(&p("raw.txt")).unwrap().net;
    assert!(clipped.clip_payments && !raw.clip_payments);
    let v = BidProfile::new(1, 2, vec![0.7, 0.4]).unwrap();
    let has_clip = |net: &AuctionNet| {
        let bounds = planet_bounds(net, &InputBox::misreports(&v, 0));
        let enc = encode(net, &v, 0, &bounds, EncodeOptions::default()).unwrap();
        enc.binaries.iter().any(|(_, s)| matches!(s, Switch::ClipLow | Switch::ClipHigh))
    };
    assert!(has_clip(&clipped));
    assert!(!has_clip(&raw));

    let out = p("cert.csv");
    assert_eq!(rcert(&["certify", "--model", s(&p("clipped.txt")), "--points", "3", "--seed", "9", "--steps", "50", "--out", s(&out)]), 0);
    let t = Table::read(&out).unwrap();
    assert_eq!(t.rows.len(), 3);
    let certified = t.reals("certified_regret").unwrap();
    let empirical = t.reals("empirical_regret").unwrap();
    for (c, e) in certified.iter().zip(&empirical) {
        assert!(c + 1e-6 >= *e);
    }
    assert!(t.reals("residual").unwrap().iter().all(|&r| r <= 1e-5));
}

/// Reference results: label, IR, ReLU reg., then (mean, std) for solve
/// time, revenue, empirical and certified regret, then the ratio.
#[allow(clippy::type_complexity)]
const REFERENCE: [(&str, &str, &str, (f64, f64), Option<(f64, f64)>, (f64, f64), (f64, f64), f64); 9] = [
    ("1x2", "Yes", "No", (25.6, 72.0), Some((0.593, 0.404)), (0.014, 0.012), (0.019, 0.016), 0.731),
    ("1x2", "Yes", "Yes", (7.2, 17.5), Some((0.569, 0.390)), (0.003, 0.002), (0.004, 0.003), 0.700),
    ("1x2", "No", "Yes", (0.034, 0.007), Some((0.568, 0.398)), (0.009, 0.005), (0.011, 0.004), 0.839),
    ("2x2", "Yes", "No", (13.9, 37.0), Some((0.876, 0.286)), (0.009, 0.013), (0.014, 0.016), 0.637),
    ("2x2 (2nd)", "Yes", "No", (17.4, 51.9), None, (0.007, 0.011), (0.011, 0.013), 0.676),
    ("2x2", "Yes", "Yes", (5.8, 16.3), Some((0.874, 0.285)), (0.008, 0.012), (0.013, 0.015), 0.626),
    ("2x2 (2nd)", "Yes", "Yes", (7.520, 24.2), None, (0.008, 0.012), (0.012, 0.014), 0.680),
    ("2x2", "No", "Yes", (5.480, 5.577), Some((0.882, 0.334)), (0.006, 0.007), (0.011, 0.011), 0.533),
    ("2x2 (2nd)", "No", "Yes", (2.495, 2.271), None, (0.011, 0.010), (0.017, 0.017), 0.666),
];

#[test]
fn report_reproduces_reference_rows() {
    let fixture = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/reference_summary.csv");
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("table.csv");
    assert_eq!(rcert(&["report", s(&fixture), "--out", s(&out)]), 0);
    let t = Table::read(&out).unwrap();
    assert_eq!(t.rows.len(), REFERENCE.len());
    for (row, (label, ir, reg, time, revenue, emp, cert, ratio)) in t.rows.iter().zip(REFERENCE) {
        assert_eq!(row[0], label);
        assert_eq!(row[1], ir);
        assert_eq!(row[2], reg);
        assert_eq!(parse_pair(&row[3]), Some(time), "{label}");
        match revenue {
            Some(r) => assert_eq!(parse_pair(&row[4]), Some(r)),
            None => assert_eq!(row[4], "---"),
        }
        assert_eq!(parse_pair(&row[5]), Some(emp));
        assert_eq!(parse_pair(&row[6]), Some(cert));
        assert_eq!(row[7].parse::<f64>().unwrap(), ratio);
    }
}
