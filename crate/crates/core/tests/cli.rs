use std::path::{Path, PathBuf};
use std::process::Command;

use trendcast::cli::{cmd_eval, cmd_hist, cmd_importance, cmd_synth, cmd_train, load_dataset};
use trendcast::config::{DataSource, RunConfig, TrendSource};
use trendcast::data::{load_csv, EmbedDims, RandomTrends, SynthConfig, TrendSegment, TrendSpec};
use trendcast::eval::rmse;
use trendcast::model::ModelConfig;
use trendcast::train::TrainConfig;

fn small_config(out: &Path) -> RunConfig {
    RunConfig {
        out_dir: out.to_path_buf(),
        data: DataSource::Synth(SynthConfig {
            n_stores: 5,
            n_days: 100,
            ..Default::default()
        }),
        trends: TrendSource::Random {
            seed: 0,
            params: RandomTrends::default(),
        },
        model: ModelConfig {
            embed_dims: EmbedDims { store: 4, customers: 4 },
            input_block_width: 16,
            main_block_widths: vec![16, 8],
            trend_block_width: 8,
            ..Default::default()
        },
        train: TrainConfig {
            epochs: 3,
            batch_size: 64,
            ..Default::default()
        },
        split: trendcast::config::SplitConfig {
            validation_days: 20,
            ..Default::default()
        },
        ..Default::default()
    }
}

fn read(p: impl AsRef<Path>) -> String {
    std::fs::read_to_string(p).unwrap()
}

#[test]
fn synth_writes_one_row_per_store_day() {
    let dir = tempfile::tempdir().unwrap();
    let out = cmd_synth(&small_config(dir.path())).unwrap();
    assert_eq!(out.rows, 500);
    assert_eq!(load_csv(&out.data).unwrap().len(), 500);
    assert_eq!(read(&out.data).lines().count(), 501);
}

#[test]
fn synth_is_byte_identical_for_a_seed() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    cmd_synth(&small_config(a.path())).unwrap();
    cmd_synth(&small_config(b.path())).unwrap();
    for f in ["data.csv", "trends.csv"] {
        assert_eq!(read(a.path().join(f)), read(b.path().join(f)));
    }
}

#[test]
fn manifest_echoes_configured_slopes() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = TrendSpec::default();
    for (store, slope) in [("1", 0.25), ("3", -0.6), ("5", 0.8)] {
        spec.stores.insert(
            store.into(),
            vec![TrendSegment {
                start_fraction: 0.0,
                slope,
                intercept_offset: 0.0,
            }],
        );
    }
    let cfg = RunConfig {
        trends: TrendSource::Explicit(spec.clone()),
        ..small_config(dir.path())
    };
    let out = cmd_synth(&cfg).unwrap();
    let back = TrendSpec::read_manifest(&out.manifest).unwrap();
    assert_eq!(back.stores, spec.stores);
}

#[test]
fn one_epoch_history_and_checkpoint_reload() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig {
        train: TrainConfig {
            epochs: 1,
            ..small_config(dir.path()).train
        },
        ..small_config(dir.path())
    };
    let out = cmd_train(&cfg).unwrap();
    let text = read(&out.history_path);
    assert_eq!(text.lines().next().unwrap(), "epoch,lr,train_loss,val_loss");
    assert_eq!(text.lines().count(), 2);

    let (model, schema) = trendcast::checkpoint::load_model(&out.checkpoint).unwrap();
    let ds = load_dataset(&cfg).unwrap();
    let batch = out.schema.encode_batch(&ds.val);
    let live = out.model.predict(&batch, &out.schema).unwrap();
    let reloaded = model.predict(&schema.encode_batch(&ds.val), &schema).unwrap();
    assert_eq!(
        live.iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
        reloaded.iter().map(|x| x.to_bits()).collect::<Vec<_>>()
    );
}

fn train_pair(cfg: &RunConfig) -> (PathBuf, PathBuf) {
    let mut base = cfg.clone();
    base.model.trend_block_enabled = false;
    let b = cmd_train(&base).unwrap().checkpoint;
    let t = cmd_train(cfg).unwrap().checkpoint;
    (b, t)
}

#[test]
fn single_checkpoint_has_no_trend_column() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let ckpt = cmd_train(&cfg).unwrap().checkpoint;
    let r = cmd_eval(&cfg, &[ckpt], None).unwrap();
    assert!(r.rmse_trend.is_none());
    assert_eq!(
        read(dir.path().join("series.csv")).lines().next().unwrap(),
        "date,store,actual,pred"
    );
    assert_eq!(
        read(dir.path().join("per_store.csv")).lines().next().unwrap(),
        "store,rmse"
    );
    assert_eq!(
        read(dir.path().join("importance.csv")).lines().next().unwrap(),
        "feature,delta_rmse"
    );
}

#[test]
fn paired_checkpoints_fill_both_columns_and_summary_matches_series() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    train_pair(&cfg);
    // Discovered from the output directory.
    cmd_eval(&cfg, &[], None).unwrap();

    let mut reader = csv::Reader::from_path(dir.path().join("series.csv")).unwrap();
    assert_eq!(
        reader.headers().unwrap(),
        vec!["date", "store", "actual", "pred", "pred_trend"]
    );
    let (mut actual, mut pred, mut pred_trend) = (vec![], vec![], vec![]);
    for row in reader.records() {
        let row = row.unwrap();
        assert_eq!(row.len(), 5);
        actual.push(row[2].parse::<f64>().unwrap());
        pred.push(row[3].parse::<f64>().unwrap());
        pred_trend.push(row[4].parse::<f64>().unwrap());
    }
    let ds = load_dataset(&cfg).unwrap();
    assert_eq!(actual.len(), ds.val.len());

    let mut summary = csv::Reader::from_path(dir.path().join("summary.csv")).unwrap();
    let rows: Vec<(String, f64)> = summary
        .records()
        .map(|r| {
            let r = r.unwrap();
            (r[0].to_string(), r[1].parse().unwrap())
        })
        .collect();
    assert_eq!(rows[0].0, "pred");
    assert_eq!(rows[1].0, "pred_trend");
    assert!((rows[0].1 - rmse(&pred, &actual).unwrap()).abs() < 1e-9);
    assert!((rows[1].1 - rmse(&pred_trend, &actual).unwrap()).abs() < 1e-9);
}

#[test]
fn store_filter_restricts_eval_and_importance() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let ckpt = cmd_train(&cfg).unwrap().checkpoint;
    let r = cmd_eval(&cfg, std::slice::from_ref(&ckpt), Some("2")).unwrap();
    assert_eq!(r.per_store.len(), 1);
    assert!(r.series.iter().all(|s| s.store == "2"));
    let err = cmd_eval(&cfg, std::slice::from_ref(&ckpt), Some("99")).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    let imp = cmd_importance(&cfg, Some(&ckpt), None).unwrap();
    assert!(!imp.importances.is_empty());
}

#[test]
fn hist_writes_train_and_validation_densities() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let files = cmd_hist(&cfg, None).unwrap();
    assert_eq!(files.len(), 2);
    let files = cmd_hist(&cfg, Some("3")).unwrap();
    for f in &files {
        let mut r = csv::Reader::from_path(f).unwrap();
        assert_eq!(r.headers().unwrap(), vec!["bin_center", "density"]);
        let rows: Vec<(f64, f64)> = r
            .records()
            .map(|x| {
                let x = x.unwrap();
                (x[0].parse().unwrap(), x[1].parse().unwrap())
            })
            .collect();
        let width = rows[1].0 - rows[0].0;
        let mass: f64 = rows.iter().map(|(_, d)| d * width).sum();
        assert!((mass - 1.0).abs() < 1e-9, "{mass}");
    }
    assert!(cmd_hist(&cfg, Some("nope")).is_err());
}

#[test]
fn trended_store_histograms_shift() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = TrendSpec::default();
    spec.stores.insert(
        "1".into(),
        vec![TrendSegment {
            start_fraction: 0.0,
            slope: 6.0,
            intercept_offset: 0.0,
        }],
    );
    let cfg = RunConfig {
        trends: TrendSource::Explicit(spec),
        ..small_config(dir.path())
    };
    let files = cmd_hist(&cfg, Some("1")).unwrap();
    let load = |p: &PathBuf| -> (f64, f64) {
        let rows: Vec<(f64, f64)> = csv::Reader::from_path(p)
            .unwrap()
            .records()
            .map(|x| {
                let x = x.unwrap();
                (x[0].parse().unwrap(), x[1].parse().unwrap())
            })
            .collect();
        let width = rows[1].0 - rows[0].0;
        let mean = rows.iter().map(|(c, d)| c * d * width).sum::<f64>();
        (mean, width)
    };
    let (m_train, w_train) = load(&files[0]);
    let (m_val, w_val) = load(&files[1]);
    assert!(
        m_val - m_train > w_train.max(w_val),
        "{m_train} {m_val} {w_train} {w_val}"
    );
}

#[test]
fn full_pipeline_is_byte_reproducible() {
    let run = |dir: &Path| {
        let cfg = small_config(dir);
        cmd_synth(&cfg).unwrap();
        let csv_cfg = RunConfig {
            data: DataSource::Csv {
                path: dir.join("data.csv"),
            },
            trends: TrendSource::None,
            ..cfg
        };
        train_pair(&csv_cfg);
        cmd_eval(&csv_cfg, &[], None).unwrap();
    };
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run(a.path());
    run(b.path());
    let mut names: Vec<String> = std::fs::read_dir(a.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert!(names.contains(&"series.csv".to_string()));
    for n in names {
        assert_eq!(
            std::fs::read(a.path().join(&n)).unwrap(),
            std::fs::read(b.path().join(&n)).unwrap(),
            "{n}"
        );
    }
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_trendcast"))
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("run.toml");
    std::fs::write(&p, text).unwrap();
    p
}

const SMALL: &str = r#"
[data]
source = "synth"
n_stores = 4
n_days = 60
[trends]
mode = "random"
[split]
validation_days = 14
[model]
input_block_width = 8
main_block_widths = [8]
trend_block_width = 4
[model.embed_dims]
store = 2
customers = 2
[train]
epochs = 2
"#;

#[test]
fn binary_runs_every_verb() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("o");
    let run = |args: &[&str]| {
        let status = bin()
            .arg(args[0])
            .arg("--config")
            .arg(&cfg)
            .arg("--out")
            .arg(&out)
            .args(&args[1..])
            .output()
            .unwrap();
        assert!(
            status.status.success(),
            "{args:?}: {}",
            String::from_utf8_lossy(&status.stderr)
        );
    };
    run(&["synth", "--seed", "3"]);
    run(&["train", "--no-trend-block"]);
    run(&["train", "--split", "2013-02-10"]);
    run(&["hist", "--store", "2"]);
    run(&["importance"]);
    for f in [
        "data.csv",
        "trends.csv",
        "baseline.json",
        "trend.json",
        "hist_store_2_val.csv",
        "importance.csv",
    ] {
        assert!(out.join(f).is_file(), "{f}");
    }
}

#[test]
fn binary_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let code = |cfg_text: &str, args: &[&str]| {
        let cfg = write_config(dir.path(), cfg_text);
        bin()
            .args(args)
            .arg("--config")
            .arg(&cfg)
            .arg("--out")
            .arg(dir.path().join("o"))
            .output()
            .unwrap()
            .status
            .code()
            .unwrap()
    };
    assert_eq!(code("[model]\ndropout_p = 2.0", &["train"]), 1);
    assert_eq!(code("not = [valid", &["train"]), 1);
    assert!(!dir.path().join("o").exists(), "config errors must not create outputs");

    let bad_csv = dir.path().join("bad.csv");
    std::fs::write(&bad_csv, "Date,Store\n2015-01-01,1\n").unwrap();
    assert_eq!(
        code(&format!("[data]\nsource = \"csv\"\npath = {:?}", bad_csv), &["train"]),
        2
    );
    assert_eq!(code(SMALL, &["hist", "--store", "404"]), 2);

    let diverging = format!("{SMALL}base_lr = 1e300\noptimizer = {{ kind = \"sgd-momentum\", momentum = 0.0 }}\n");
    assert_eq!(code(&diverging, &["train"]), 3);
}
