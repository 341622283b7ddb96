//! Text containers for cycle datasets and trained models.
//!
//! Every file starts with `#gaitkit-<kind> v1`. Reals are written with nine
//! significant digits, so loading a file and writing it again reproduces it
//! byte for byte.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::str::FromStr;

use crate::cnn::{CnnArchitecture, CnnModel, CnnParams, LabeledCycle, TrainingMeta};
use crate::error::{GaitError, Result};
use crate::normalize::CycleMatrix;
use crate::osvm::{OneClassSvm, OsvmModel};
use crate::pca::PcaTransform;
use crate::profile::AuthProfile;
use crate::sprt::{ScoreModel, SprtConfig};

pub const VERSION: &str = "v1";
pub const CYC_MAGIC: &str = "#gaitkit-cyc";
pub const CNN_MAGIC: &str = "#gaitkit-cnn";
pub const OSVM_MAGIC: &str = "#gaitkit-osvm";
pub const AUTH_MAGIC: &str = "#gaitkit-auth";
const PER_LINE: usize = 8;

pub fn fmt_real(x: f64) -> String {
    format!("{x:.8e}")
}

fn write_values(out: &mut String, values: &[f64]) {
    for chunk in values.chunks(PER_LINE) {
        let line: Vec<String> = chunk.iter().map(|v| fmt_real(*v)).collect();
        let _ = writeln!(out, "{}", line.join(" "));
    }
}

fn format_err(line: usize, msg: impl std::fmt::Display) -> GaitError {
    GaitError::Format(format!("line {line}: {msg}"))
}

/// Line cursor with 1-based line numbers for error messages.
struct Cursor<'a> {
    lines: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
}

/// `tag key=value ...`
struct Record<'a> {
    line: usize,
    fields: HashMap<&'a str, &'a str>,
}

impl<'a> Record<'a> {
    fn get<T: FromStr>(&self, key: &str) -> Result<T> {
        let raw = self
            .fields
            .get(key)
            .ok_or_else(|| format_err(self.line, format!("missing field {key}")))?;
        raw.parse()
            .map_err(|_| format_err(self.line, format!("bad value {raw:?} for {key}")))
    }

    fn text(&self, key: &str) -> Result<&'a str> {
        self.fields
            .get(key)
            .copied()
            .ok_or_else(|| format_err(self.line, format!("missing field {key}")))
    }
}

fn fields<'a>(line: usize, tokens: impl Iterator<Item = &'a str>) -> Result<HashMap<&'a str, &'a str>> {
    tokens
        .map(|t| {
            t.split_once('=')
                .ok_or_else(|| format_err(line, format!("expected key=value, got {t:?}")))
        })
        .collect()
}

impl<'a> Cursor<'a> {
    fn new(text: &'a str) -> Self {
        Cursor {
            lines: text.lines().enumerate(),
            last: 0,
        }
    }

    fn next(&mut self) -> Result<(usize, &'a str)> {
        match self.lines.next() {
            Some((i, l)) => {
                self.last = i + 1;
                Ok((i + 1, l))
            }
            None => Err(format_err(self.last + 1, "unexpected end of file")),
        }
    }

    /// Reads the magic/version line and returns its `key=value` fields.
    fn header(&mut self, magic: &str) -> Result<Record<'a>> {
        let (line, text) = self.next()?;
        let mut tokens = text.split_whitespace();
        if tokens.next() != Some(magic) {
            return Err(format_err(line, format!("expected {magic} header")));
        }
        match tokens.next() {
            Some(VERSION) => {}
            Some(other) => {
                return Err(GaitError::UnsupportedVersion {
                    kind: magic.trim_start_matches('#').to_string(),
                    found: other.to_string(),
                    expected: VERSION.to_string(),
                })
            }
            None => return Err(format_err(line, "missing version")),
        }
        Ok(Record {
            line,
            fields: fields(line, tokens)?,
        })
    }

    fn record(&mut self, tag: &str) -> Result<Record<'a>> {
        let (line, text) = self.next()?;
        let mut tokens = text.split_whitespace();
        if tokens.next() != Some(tag) {
            return Err(format_err(line, format!("expected {tag} record")));
        }
        Ok(Record {
            line,
            fields: fields(line, tokens)?,
        })
    }

    fn values(&mut self, count: usize) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(count);
        while out.len() < count {
            let (line, text) = self.next()?;
            for tok in text.split_whitespace() {
                let v: f64 = tok.parse().map_err(|_| format_err(line, format!("bad real {tok:?}")))?;
                if !v.is_finite() {
                    return Err(format_err(line, "non-finite value"));
                }
                out.push(v);
            }
            if out.len() > count {
                return Err(format_err(line, format!("expected {count} values, found more")));
            }
        }
        Ok(out)
    }

    fn finish(&mut self) -> Result<()> {
        match self.lines.next() {
            None => Ok(()),
            Some((i, _)) => Err(format_err(i + 1, "trailing content")),
        }
    }
}

fn check_label(kind: &str, s: &str) -> Result<()> {
    if s.is_empty() || s.chars().any(|c| c.is_whitespace() || c == ',' || c == '=') {
        return Err(GaitError::Validation(format!("{kind} {s:?} must be non-empty without whitespace, ',' or '=' ")));
    }
    Ok(())
}

/// Labeled cycles sharing one shape.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleDataset {
    pub rows: usize,
    pub n: usize,
    pub items: Vec<LabeledCycle>,
}

impl CycleDataset {
    pub fn new(rows: usize, n: usize, items: Vec<LabeledCycle>) -> Result<Self> {
        if let Some(c) = items.iter().find(|c| c.x.rows != rows || c.x.n != n) {
            return Err(GaitError::ShapeMismatch(format!(
                "cycle of {} is {}×{}, dataset is {rows}×{n}",
                c.subject, c.x.rows, c.x.n
            )));
        }
        Ok(CycleDataset { rows, n, items })
    }

    /// Distinct subjects in sorted order.
    pub fn subjects(&self) -> Vec<String> {
        let mut s: Vec<String> = self.items.iter().map(|c| c.subject.clone()).collect();
        s.sort();
        s.dedup();
        s
    }

    pub fn cycles_of(&self, subject: &str) -> Vec<CycleMatrix> {
        self.items
            .iter()
            .filter(|c| c.subject == subject)
            .map(|c| c.x.clone())
            .collect()
    }
}

/// Header `#gaitkit-cyc v1 rows=R n=N`, then `subject,session,v1,...` per cycle.
pub fn write_cycle_dataset(ds: &CycleDataset) -> Result<String> {
    let mut out = format!("{CYC_MAGIC} {VERSION} rows={} n={}\n", ds.rows, ds.n);
    for c in &ds.items {
        check_label("subject", &c.subject)?;
        check_label("session", &c.session)?;
        out.push_str(&c.subject);
        out.push(',');
        out.push_str(&c.session);
        for v in &c.x.data {
            out.push(',');
            out.push_str(&fmt_real(*v));
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn read_cycle_dataset(text: &str) -> Result<CycleDataset> {
    let mut cur = Cursor::new(text);
    let head = cur.header(CYC_MAGIC)?;
    let rows: usize = head.get("rows")?;
    let n: usize = head.get("n")?;
    if rows != 4 && rows != 8 {
        return Err(format_err(1, format!("rows must be 4 or 8, got {rows}")));
    }
    let mut items = Vec::new();
    for (i, line) in cur.lines {
        let mut parts = line.split(',');
        let subject = parts.next().unwrap_or("");
        let session = parts.next().ok_or_else(|| format_err(i + 1, "missing session"))?;
        if subject.is_empty() || session.is_empty() {
            return Err(format_err(i + 1, "empty subject or session"));
        }
        let data: Vec<f64> = parts
            .map(|t| t.parse::<f64>().map_err(|_| format_err(i + 1, format!("bad real {t:?}"))))
            .collect::<Result<_>>()?;
        if data.len() != rows * n || data.iter().any(|v| !v.is_finite()) {
            return Err(format_err(
                i + 1,
                format!("expected {} finite values, got {}", rows * n, data.len()),
            ));
        }
        items.push(LabeledCycle {
            subject: subject.to_string(),
            session: session.to_string(),
            x: CycleMatrix::new(rows, n, data)?,
        });
    }
    CycleDataset::new(rows, n, items)
}

pub fn write_cnn(model: &CnnModel) -> Result<String> {
    model.validate()?;
    let a = &model.arch;
    let m = &model.meta;
    let mut out = format!("{CNN_MAGIC} {VERSION}\n");
    let _ = writeln!(
        out,
        "arch rows={} n={} q1={} q2={} features={} classes={}",
        a.input_rows, a.n, a.q1, a.q2, a.features, a.classes
    );
    for c in &model.classes {
        check_label("class", c)?;
        let _ = writeln!(out, "class name={c}");
    }
    let _ = writeln!(
        out,
        "meta seed={} epochs={} best_epoch={} best_val_loss={} final_train_loss={}",
        m.seed,
        m.epochs,
        m.best_epoch,
        fmt_real(m.best_val_loss),
        fmt_real(m.final_train_loss)
    );
    for ((name, shape), arr) in a.param_shapes().iter().zip(model.params.arrays()) {
        let dims: Vec<String> = shape.iter().map(|d| d.to_string()).collect();
        let _ = writeln!(out, "array name={name} shape={}", dims.join("x"));
        write_values(&mut out, arr);
    }
    Ok(out)
}

pub fn read_cnn(text: &str) -> Result<CnnModel> {
    let mut cur = Cursor::new(text);
    cur.header(CNN_MAGIC)?;
    let r = cur.record("arch")?;
    let arch = CnnArchitecture::new(
        r.get("rows")?,
        r.get("n")?,
        r.get("q1")?,
        r.get("q2")?,
        r.get("features")?,
        r.get("classes")?,
    )?;
    let mut classes = Vec::with_capacity(arch.classes);
    for _ in 0..arch.classes {
        classes.push(cur.record("class")?.text("name")?.to_string());
    }
    let r = cur.record("meta")?;
    let meta = TrainingMeta {
        seed: r.get("seed")?,
        epochs: r.get("epochs")?,
        best_epoch: r.get("best_epoch")?,
        best_val_loss: r.get("best_val_loss")?,
        final_train_loss: r.get("final_train_loss")?,
    };
    let mut params = CnnParams::zeros(&arch);
    for ((name, shape), arr) in arch.param_shapes().iter().zip(params.arrays_mut()) {
        let r = cur.record("array")?;
        let dims: Vec<String> = shape.iter().map(|d| d.to_string()).collect();
        if r.text("name")? != *name || r.text("shape")? != dims.join("x") {
            return Err(format_err(
                r.line,
                format!("expected array {name} of shape {}", dims.join("x")),
            ));
        }
        *arr = cur.values(arr.len())?;
    }
    cur.finish()?;
    let mut model = CnnModel::new(arch, params, classes)?;
    model.meta = meta;
    Ok(model)
}

fn write_osvm_body(out: &mut String, m: &OsvmModel) {
    let p = &m.pca;
    let _ = writeln!(out, "pca input={} output={}", p.input_dim(), p.output_dim());
    write_values(out, &p.mean);
    for row in &p.basis {
        write_values(out, row);
    }
    write_values(out, &p.component_variances);
    let s = &m.svm;
    let _ = writeln!(
        out,
        "svm gamma={} nu={} b={} count={}",
        fmt_real(s.gamma),
        fmt_real(s.nu),
        fmt_real(s.b),
        s.alphas.len()
    );
    write_values(out, &s.alphas);
    for sv in &s.support_vectors {
        write_values(out, sv);
    }
}

fn read_osvm_body(cur: &mut Cursor) -> Result<OsvmModel> {
    let r = cur.record("pca")?;
    let (f, s): (usize, usize) = (r.get("input")?, r.get("output")?);
    if f == 0 || s == 0 || s > f {
        return Err(format_err(r.line, format!("invalid PCA shape {s}×{f}")));
    }
    let mean = cur.values(f)?;
    let basis = (0..s).map(|_| cur.values(f)).collect::<Result<Vec<_>>>()?;
    let component_variances = cur.values(s)?;
    let r = cur.record("svm")?;
    let count: usize = r.get("count")?;
    let (gamma, nu, b) = (r.get("gamma")?, r.get("nu")?, r.get("b")?);
    let alphas = cur.values(count)?;
    let support_vectors = (0..count).map(|_| cur.values(s)).collect::<Result<Vec<_>>>()?;
    let model = OsvmModel {
        pca: PcaTransform {
            mean,
            basis,
            component_variances,
        },
        svm: OneClassSvm {
            support_vectors,
            alphas,
            b,
            gamma,
            nu,
        },
    };
    model.validate()?;
    Ok(model)
}

pub fn write_osvm(m: &OsvmModel) -> Result<String> {
    m.validate()?;
    let mut out = format!("{OSVM_MAGIC} {VERSION}\n");
    write_osvm_body(&mut out, m);
    Ok(out)
}

pub fn read_osvm(text: &str) -> Result<OsvmModel> {
    let mut cur = Cursor::new(text);
    cur.header(OSVM_MAGIC)?;
    let m = read_osvm_body(&mut cur)?;
    cur.finish()?;
    Ok(m)
}

fn write_score_model(out: &mut String, tag: &str, m: &ScoreModel) {
    match m {
        ScoreModel::Gaussian { mean, std } => {
            let _ = writeln!(out, "{tag} family=gaussian mean={} std={}", fmt_real(*mean), fmt_real(*std));
        }
        ScoreModel::Kde { bandwidth, samples } => {
            let _ = writeln!(
                out,
                "{tag} family=kde bandwidth={} count={}",
                fmt_real(*bandwidth),
                samples.len()
            );
            write_values(out, samples);
        }
    }
}

fn read_score_model(cur: &mut Cursor, tag: &str) -> Result<ScoreModel> {
    let r = cur.record(tag)?;
    let m = match r.text("family")? {
        "gaussian" => ScoreModel::Gaussian {
            mean: r.get("mean")?,
            std: r.get("std")?,
        },
        "kde" => {
            let bandwidth = r.get("bandwidth")?;
            let count: usize = r.get("count")?;
            ScoreModel::Kde {
                bandwidth,
                samples: cur.values(count)?,
            }
        }
        other => return Err(format_err(r.line, format!("unknown score family {other:?}"))),
    };
    m.validate()?;
    Ok(m)
}

pub fn write_auth(p: &AuthProfile) -> Result<String> {
    p.validate()?;
    check_label("target", &p.target)?;
    if p.cnn_sha256.len() != 64 || !p.cnn_sha256.chars().all(|c| c.is_ascii_hexdigit()) {
        return Err(GaitError::Validation("CNN digest must be 64 hex digits".into()));
    }
    let mut out = format!("{AUTH_MAGIC} {VERSION}\n");
    let _ = writeln!(
        out,
        "target name={} cnn_sha256={} rows={} n={}",
        p.target, p.cnn_sha256, p.rows, p.n
    );
    let _ = writeln!(
        out,
        "sprt alpha_err={} beta_err={} max_cycles={}",
        fmt_real(p.sprt.alpha_err),
        fmt_real(p.sprt.beta_err),
        p.sprt.max_cycles
    );
    write_score_model(&mut out, "p1", &p.p1);
    write_score_model(&mut out, "p0", &p.p0);
    write_osvm_body(&mut out, &p.osvm);
    Ok(out)
}

pub fn read_auth(text: &str) -> Result<AuthProfile> {
    let mut cur = Cursor::new(text);
    cur.header(AUTH_MAGIC)?;
    let t = cur.record("target")?;
    let s = cur.record("sprt")?;
    let sprt = SprtConfig::new(s.get("alpha_err")?, s.get("beta_err")?, s.get("max_cycles")?)?;
    let p1 = read_score_model(&mut cur, "p1")?;
    let p0 = read_score_model(&mut cur, "p0")?;
    let osvm = read_osvm_body(&mut cur)?;
    cur.finish()?;
    let p = AuthProfile {
        target: t.text("name")?.to_string(),
        cnn_sha256: t.text("cnn_sha256")?.to_string(),
        rows: t.get("rows")?,
        n: t.get("n")?,
        osvm,
        p1,
        p0,
        sprt,
    };
    if p.osvm.pca.input_dim() == 0 {
        return Err(format_err(t.line, "empty feature space"));
    }
    Ok(p)
}
