//! Implementations of the command-line verbs. Each returns the text report
//! printed to standard output.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::cnn::train;
use crate::config::PipelineConfig;
use crate::container::{
    read_auth, read_cnn, read_cycle_dataset, write_auth, write_cnn, write_cycle_dataset, CycleDataset,
};
use crate::error::{GaitError, Result};
use crate::eval::{run_protocol, synth_walk, Protocol};
use crate::pipeline::preprocess;
use crate::profile::enroll;
use crate::recording::{parse_recording, write_recording};

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| GaitError::io(path, e))
}

/// Writes `text`, refusing to replace an existing file unless `force`.
pub fn write_text(path: &Path, text: &str, force: bool) -> Result<()> {
    if !force && path.exists() {
        return Err(GaitError::Usage(format!(
            "{} exists; pass --force to overwrite",
            path.display()
        )));
    }
    fs::write(path, text).map_err(|e| GaitError::io(path, e))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Loads the config file if given, then applies the shared flag overrides.
pub fn load_config(path: Option<&Path>, seed: Option<u64>, no_gyro: bool) -> Result<PipelineConfig> {
    let mut cfg = match path {
        Some(p) => PipelineConfig::parse(&read_text(p)?)?,
        None => PipelineConfig::default(),
    };
    if let Some(s) = seed {
        cfg.cnn.seed = s;
    }
    if no_gyro {
        cfg.use_gyro = false;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Walks `first_walk..first_walk + walks` of every subject seed, one file each.
pub fn cmd_synth(
    subjects: &[u64],
    walks: u64,
    first_walk: u64,
    duration_s: f64,
    out_dir: &Path,
    force: bool,
) -> Result<String> {
    if subjects.is_empty() || walks == 0 {
        return Err(GaitError::Usage("nothing to generate".into()));
    }
    if !out_dir.is_dir() {
        return Err(GaitError::io(
            out_dir,
            std::io::Error::new(std::io::ErrorKind::NotFound, "output directory does not exist"),
        ));
    }
    let mut report = String::new();
    for &s in subjects {
        for w in first_walk..first_walk + walks {
            let (rec, truth) = synth_walk(s, w, duration_s)?;
            let path = out_dir.join(format!("{}_{}.rec", rec.subject_id, rec.session_id));
            write_text(&path, &write_recording(&rec)?, force)?;
            let _ = writeln!(
                report,
                "{}: {} accel samples, {} ground-truth cycles",
                path.display(),
                rec.accel.len(),
                truth.cycle_start_times.len()
            );
        }
    }
    Ok(report)
}

/// Runs the pipeline over recordings and writes one cycle dataset. Recordings
/// without usable cycles are reported, not fatal. With `dump_dir`, the match
/// metric and its minima are written as CSV per recording.
pub fn cmd_preprocess(
    recordings: &[PathBuf],
    cfg: &PipelineConfig,
    out: &Path,
    dump_dir: Option<&Path>,
    force: bool,
) -> Result<String> {
    if recordings.is_empty() {
        return Err(GaitError::Usage("no recordings given".into()));
    }
    let mut items = Vec::new();
    let mut report = String::from("recording,subject,session,cycles,dropped,reasons\n");
    for path in recordings {
        let rec = parse_recording(&read_text(path)?).map_err(|e| match e {
            GaitError::Parse { line, message } => GaitError::Parse {
                line,
                message: format!("{}: {message}", path.display()),
            },
            other => other,
        })?;
        match preprocess(&rec, cfg) {
            Ok(p) => {
                let reasons: Vec<&str> = p.dropped.iter().map(|d| d.reason.as_str()).collect();
                let _ = writeln!(
                    report,
                    "{},{},{},{},{},\"{}\"",
                    path.display(),
                    rec.subject_id,
                    rec.session_id,
                    p.cycles.len(),
                    p.dropped.len(),
                    reasons.join("; ")
                );
                if let Some(dir) = dump_dir {
                    let mut csv = String::from("index,phi,minimum\n");
                    for (i, v) in p.phi.iter().enumerate() {
                        let _ = writeln!(csv, "{i},{v:.6},{}", u8::from(p.minima.binary_search(&i).is_ok()));
                    }
                    let stem = path.file_stem().map_or("recording".into(), |s| s.to_string_lossy().into_owned());
                    write_text(&dir.join(format!("{stem}.phi.csv")), &csv, force)?;
                }
                items.extend(p.labeled());
            }
            Err(
                e @ (GaitError::NoCycles(_)
                | GaitError::NoGaitDetected(_)
                | GaitError::InsufficientData(_)
                | GaitError::DegenerateInput(_)),
            ) => {
                let _ = writeln!(
                    report,
                    "{},{},{},0,0,\"{e}\"",
                    path.display(),
                    rec.subject_id,
                    rec.session_id
                );
            }
            Err(e) => return Err(e),
        }
    }
    let ds = CycleDataset::new(cfg.rows(), cfg.n, items)?;
    write_text(out, &write_cycle_dataset(&ds)?, force)?;
    let _ = writeln!(report, "wrote {} cycles to {}", ds.items.len(), out.display());
    Ok(report)
}

pub fn cmd_train_cnn(dataset: &Path, cfg: &PipelineConfig, out: &Path, force: bool) -> Result<String> {
    let ds = read_cycle_dataset(&read_text(dataset)?)?;
    let (model, report) = train(&ds.items, &cfg.cnn)?;
    let text = write_cnn(&model)?;
    write_text(out, &text, force)?;
    let mut s = String::new();
    let _ = writeln!(
        s,
        "epochs={} best_epoch={} best_val_loss={:.6}",
        model.meta.epochs, model.meta.best_epoch, model.meta.best_val_loss
    );
    match report.test_accuracy {
        Some(a) => {
            let _ = writeln!(s, "test_accuracy={a:.4}");
        }
        None => s.push_str("test_accuracy=none\n"),
    }
    let _ = writeln!(s, "true\\predicted,{}", model.classes.join(","));
    for (name, row) in model.classes.iter().zip(&report.confusion) {
        let cells: Vec<String> = row.iter().map(|c| c.to_string()).collect();
        let _ = writeln!(s, "{name},{}", cells.join(","));
    }
    let _ = writeln!(s, "sha256={} {}", sha256_hex(text.as_bytes()), out.display());
    Ok(s)
}

/// Enrolls `subject` (or the only subject of the target dataset) and fits the
/// impostor density on the bank dataset with that subject removed.
pub fn cmd_enroll(
    target: &Path,
    subject: Option<&str>,
    cnn_path: &Path,
    bank: &Path,
    cfg: &PipelineConfig,
    out: &Path,
    force: bool,
) -> Result<String> {
    let cnn_text = read_text(cnn_path)?;
    let cnn = read_cnn(&cnn_text)?;
    let ds = read_cycle_dataset(&read_text(target)?)?;
    let subjects = ds.subjects();
    let subject = match subject {
        Some(s) => s.to_string(),
        None if subjects.len() == 1 => subjects[0].clone(),
        None => {
            return Err(GaitError::Usage(format!(
                "target dataset holds {} subjects; choose one with --subject",
                subjects.len()
            )))
        }
    };
    let target_cycles = ds.cycles_of(&subject);
    let bank_ds = read_cycle_dataset(&read_text(bank)?)?;
    let bank_cycles: Vec<_> = bank_ds
        .items
        .iter()
        .filter(|c| c.subject != subject)
        .map(|c| c.x.clone())
        .collect();
    let (profile, report) = enroll(&cnn, &subject, &target_cycles, &bank_cycles, cfg, &sha256_hex(cnn_text.as_bytes()))?;
    write_text(out, &write_auth(&profile)?, force)?;
    let mut s = String::new();
    let _ = writeln!(
        s,
        "target={} cycles={} bank_cycles={} support_vectors={}",
        subject, report.target_cycles, report.bank_cycles, report.support_vectors
    );
    let _ = writeln!(s, "p1={:?}\np0={:?}", profile.p1, profile.p0);
    let _ = writeln!(s, "wrote {}", out.display());
    Ok(s)
}

/// Preprocesses with `cfg`, except that the cycle shape follows the profile.
pub fn cmd_authenticate(recording: &Path, profile: &Path, cnn_path: &Path, cfg: &PipelineConfig) -> Result<String> {
    let profile = read_auth(&read_text(profile)?)?;
    let cnn_text = read_text(cnn_path)?;
    let digest = sha256_hex(cnn_text.as_bytes());
    if digest != profile.cnn_sha256 {
        return Err(GaitError::Validation(format!(
            "{} is not the network this profile was enrolled with",
            cnn_path.display()
        )));
    }
    let cnn = read_cnn(&cnn_text)?;
    let rec = parse_recording(&read_text(recording)?)?;
    let cfg = PipelineConfig {
        use_gyro: profile.rows == 8,
        n: profile.n,
        ..cfg.clone()
    };
    let p = preprocess(&rec, &cfg)?;
    let out = profile.authenticate(&cnn, &p.cycles)?;
    let trace: Vec<String> = out.trace.iter().map(|l| format!("{l:.4}")).collect();
    Ok(format!(
        "target={} decision={} n_used={} cycles_available={}\ntrace={}\n",
        profile.target,
        out.decision,
        out.n_used,
        p.cycles.len(),
        trace.join(",")
    ))
}

pub fn cmd_eval(
    dataset: &Path,
    protocol: Protocol,
    cnn_path: Option<&Path>,
    target: Option<&str>,
    cfg: &PipelineConfig,
    out: Option<&Path>,
    force: bool,
) -> Result<String> {
    let ds = read_cycle_dataset(&read_text(dataset)?)?;
    let cnn = match cnn_path {
        Some(p) => Some(read_cnn(&read_text(p)?)?),
        None if protocol.needs_cnn() => {
            return Err(GaitError::Usage(format!("protocol {protocol} needs --cnn")));
        }
        None => None,
    };
    let table = run_protocol(protocol, &ds, cnn.as_ref(), target, cfg)?;
    let csv = table.to_csv();
    if let Some(path) = out {
        write_text(path, &csv, force)?;
    }
    Ok(format!("protocol={protocol}\n{csv}"))
}
