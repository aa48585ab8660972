use std::fs;

use klausmeier::kernel::KernelFamily;
use klausmeier_cli::config::{parse_config, Horizon, ProfileConfig, RunConfig, Scaling};

fn parse(text: &str) -> Result<RunConfig, klausmeier_cli::config::ConfigError> {
    RunConfig::from_toml(text, None)
}

#[test]
fn minimal_file_fills_defaults() {
    let cfg = parse("[model]\nmu = 2.0\n").unwrap();
    assert_eq!(cfg.model.mu, 2.0);
    assert_eq!(cfg.model.a, 0.5);
    assert_eq!(cfg.kernel.family, KernelFamily::Laplace);
    assert_eq!(cfg.kernel.epsilon_or_default(), 0.5);
    assert_eq!(cfg.discretization.m, 8);
    assert_eq!(cfg.time.dt, None, "dt is left to the stability rule");
    assert_eq!(cfg.time.horizon, Horizon::Fixed(0.1));
    assert_eq!(cfg.initial.scale, Scaling::Fraction(0.5));
}

#[test]
fn negative_mu_names_the_key() {
    let err = parse("[model]\nmu = -1.0\n").unwrap_err();
    assert!(err.mentions("model.mu"), "{err}");
    assert!(err.to_string().contains("model.mu"));
}

#[test]
fn all_problems_are_reported_together() {
    let err = parse("[model]\na = -1\nmu = 0\n[discretization]\nm = 0\nL = -2\n").unwrap_err();
    for key in ["model.a", "model.mu", "discretization.m", "discretization.L"] {
        assert!(err.mentions(key), "missing {key} in {err}");
    }
}

#[test]
fn dt_larger_than_t_is_rejected() {
    let err = parse("[time]\nT = 0.01\ndt = 0.1\n").unwrap_err();
    assert!(err.mentions("time.dt"), "{err}");
    assert!(parse("[time]\nT = 0.1\ndt = 0.01\n").is_ok());
}

#[test]
fn unknown_keys_are_rejected() {
    for text in [
        "[model]\nnuu = 1.0\n",
        "[modle]\nnu = 1.0\n",
        "[initial]\nu = { profile = \"gaussian_bump\", width = 0.2, amplitude = 1.0, sigma = 3 }\n",
        "[sweep]\nrainfall = [0.1]\n",
    ] {
        let err = parse(text).unwrap_err();
        assert!(err.to_string().contains("unknown"), "{text}: {err}");
    }
}

#[test]
fn keywords_for_derived_values() {
    let cfg = parse("[time]\nT = \"auto\"\n[initial]\nscale = \"off\"\n").unwrap();
    assert_eq!(cfg.time.horizon, Horizon::Auto);
    assert_eq!(cfg.initial.scale, Scaling::Off);
    assert!(parse("[time]\nT = \"never\"\n").is_err());
    // integers are accepted where reals are expected
    assert_eq!(parse("[time]\nT = 1\n").unwrap().time.horizon, Horizon::Fixed(1.0));
    let err = parse("[model]\na = 0\n[time]\nT = \"auto\"\n").unwrap_err();
    assert!(err.mentions("time.T"));
    assert!(parse("[initial]\nscale = 1.5\n").unwrap_err().mentions("initial.scale"));
}

#[test]
fn kernel_section_consistency() {
    assert!(parse("[kernel]\nfamily = \"tabulated\"\n").unwrap_err().mentions("kernel.table"));
    assert!(parse("[kernel]\nfamily = \"gaussian\"\nepsilon = -1\n").unwrap_err().mentions("kernel.epsilon"));
    assert!(parse("[kernel]\nfamily = \"laplace\"\ntable = \"k.csv\"\n").unwrap_err().mentions("kernel.table"));
    assert!(parse("[kernel]\nfamily = \"cauchy\"\n").is_err());
}

#[test]
fn sweep_values_are_validated() {
    let err = parse("[sweep]\nmu = [1.0, -1.0]\n").unwrap_err();
    assert!(err.mentions("sweep.mu"), "{err}");
    assert!(parse("[sweep]\nnu = []\n").unwrap_err().mentions("sweep.nu"));
    assert!(parse("[convergence]\nm_list = [8, 4]\n").unwrap_err().mentions("convergence.m_list"));
}

#[test]
fn relative_paths_follow_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.toml");
    fs::write(&path, "[kernel]\nfamily = \"tabulated\"\ntable = \"tri.csv\"\n[initial]\nu = { profile = \"csv\", path = \"u0.csv\" }\n").unwrap();
    let cfg = parse_config(&path).unwrap();
    assert_eq!(cfg.kernel.table.as_deref(), Some(dir.path().join("tri.csv").as_path()));
    assert_eq!(cfg.initial.u, ProfileConfig::Csv { path: dir.path().join("u0.csv") });

    let missing = parse_config(&dir.path().join("absent.toml")).unwrap_err();
    assert!(missing.to_string().contains("absent.toml"));
}

#[test]
fn resolved_config_round_trips() {
    let text = "[model]\nnu = 5\n[time]\nT = \"auto\"\ndt = 5e-4\nrecord_stride = 10\n[initial]\nw = { profile = \"single_mode\", k = 3, amplitude = 0.2 }\n[sweep]\ndispersal = [0.5, 2]\n";
    let cfg = parse(text).unwrap();
    assert_eq!(parse(&cfg.to_toml()).unwrap(), cfg);
}

#[test]
fn shipped_configs_are_valid() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for entry in fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            parse_config(&path).unwrap_or_else(|e| panic!("{e}"));
            n += 1;
        }
    }
    assert!(n >= 3);
}
