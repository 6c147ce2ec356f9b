//! Parameter sweeps: the `key = value` spec format and the CSV they produce.
//!
//! ```text
//! # comments and blank lines are ignored
//! kernel = special          # special | general | both
//! N = 18, 34
//! K = 1, 3, 5
//! C = 1
//! F = 4, 16
//! config = explicit         # explicit | enumerate-best | table1
//! W = 32
//! H = 8
//! bank_width = 8
//! elem_width = 4
//! seed = 1
//! output = sweep.csv
//! ```
//!
//! Every tiling key (`W`, `H`, `n`, `F_TB`, `W_T`, `F_T`, `C_SH`, `pad`)
//! takes a list. With `explicit` the rows cover their cross product; with
//! `enumerate-best` the lists bound the search. Rows come out sorted by
//! kernel, then N, K, C, F, then the tiling fields.

use std::collections::HashSet;
use std::path::PathBuf;

use conv_memsim::costmodel::{
    enumerate_configs, enumerate_special_configs, predict_general, predict_special, validate_config, Agreement,
    CostReport, KernelConfig, SearchBounds, AGREEMENT_CSV_HEADER, COST_CSV_HEADER,
};
use conv_memsim::general::{conflict_free_pad, GeneralConfig, GeneralKernel};
use conv_memsim::memsim::{MemModel, Metrics, METRICS_CSV_HEADER};
use conv_memsim::special::{SpecialConfig, SpecialKernel};
use rayon::prelude::*;

use crate::args::KernelKind;
use crate::{generate_problem, violation_lines, CliError, CliResult};

/// Environment variable capping sweep parallelism.
pub const THREADS_ENV: &str = "CONV_MEMSIM_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConfigSource {
    Explicit,
    EnumerateBest,
    Table1,
}

impl ConfigSource {
    pub fn name(self) -> &'static str {
        match self {
            ConfigSource::Explicit => "explicit",
            ConfigSource::EnumerateBest => "enumerate-best",
            ConfigSource::Table1 => "table1",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub kernels: Vec<KernelKind>,
    pub n: Vec<usize>,
    pub k: Vec<usize>,
    pub c: Vec<usize>,
    pub f: Vec<usize>,
    pub config: ConfigSource,
    pub w: Vec<usize>,
    pub h: Vec<usize>,
    pub vec_n: Vec<usize>,
    pub f_tb: Vec<usize>,
    pub w_t: Vec<usize>,
    pub f_t: Vec<usize>,
    pub c_sh: Vec<usize>,
    /// Empty means the conflict-free default.
    pub pad: Vec<usize>,
    pub bank_width: u32,
    pub elem_width: u32,
    pub seed: u64,
    pub output: Option<PathBuf>,
}

fn spec_err(line: usize, msg: impl Into<String>) -> CliError {
    CliError::Spec { line, msg: msg.into() }
}

fn parse_list(line: usize, key: &str, value: &str, allow_zero: bool) -> CliResult<Vec<usize>> {
    if value.is_empty() {
        return Err(spec_err(line, format!("empty list for {key}")));
    }
    let mut out = Vec::new();
    for part in value.split(',') {
        let p = part.trim();
        let v: usize = p
            .parse()
            .map_err(|_| spec_err(line, format!("{key}: `{p}` is not a non-negative integer")))?;
        if v == 0 && !allow_zero {
            return Err(spec_err(line, format!("{key}: values must be positive")));
        }
        out.push(v);
    }
    Ok(out)
}

fn parse_scalar<T: std::str::FromStr>(line: usize, key: &str, value: &str) -> CliResult<T> {
    value
        .parse()
        .map_err(|_| spec_err(line, format!("{key}: cannot parse `{value}`")))
}

impl SweepSpec {
    pub fn parse(text: &str) -> CliResult<Self> {
        let mut spec = SweepSpec {
            kernels: Vec::new(),
            n: Vec::new(),
            k: Vec::new(),
            c: vec![1],
            f: Vec::new(),
            config: ConfigSource::Explicit,
            w: Vec::new(),
            h: Vec::new(),
            vec_n: Vec::new(),
            f_tb: Vec::new(),
            w_t: Vec::new(),
            f_t: Vec::new(),
            c_sh: Vec::new(),
            pad: Vec::new(),
            bank_width: 8,
            elem_width: 4,
            seed: 0,
            output: None,
        };
        let mut seen = HashSet::new();
        let mut config_line = 0;
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (key, value) = body
                .split_once('=')
                .ok_or_else(|| spec_err(line, format!("expected `key = value`, got `{body}`")))?;
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                return Err(spec_err(line, format!("duplicate key {key}")));
            }
            match key {
                "kernel" => {
                    spec.kernels = match value {
                        "special" => vec![KernelKind::Special],
                        "general" => vec![KernelKind::General],
                        "both" => vec![KernelKind::General, KernelKind::Special],
                        _ => return Err(spec_err(line, format!("unknown kernel `{value}`"))),
                    }
                }
                "N" => spec.n = parse_list(line, key, value, false)?,
                "K" => spec.k = parse_list(line, key, value, false)?,
                "C" => spec.c = parse_list(line, key, value, false)?,
                "F" => spec.f = parse_list(line, key, value, false)?,
                "W" => spec.w = parse_list(line, key, value, false)?,
                "H" => spec.h = parse_list(line, key, value, false)?,
                "n" => spec.vec_n = parse_list(line, key, value, false)?,
                "F_TB" => spec.f_tb = parse_list(line, key, value, false)?,
                "W_T" => spec.w_t = parse_list(line, key, value, false)?,
                "F_T" => spec.f_t = parse_list(line, key, value, false)?,
                "C_SH" => spec.c_sh = parse_list(line, key, value, false)?,
                "pad" => spec.pad = parse_list(line, key, value, true)?,
                "config" => {
                    config_line = line;
                    spec.config = match value {
                        "explicit" => ConfigSource::Explicit,
                        "enumerate-best" => ConfigSource::EnumerateBest,
                        "table1" => ConfigSource::Table1,
                        _ => return Err(spec_err(line, format!("unknown config source `{value}`"))),
                    }
                }
                "bank_width" => spec.bank_width = parse_scalar(line, key, value)?,
                "elem_width" => spec.elem_width = parse_scalar(line, key, value)?,
                "seed" => spec.seed = parse_scalar(line, key, value)?,
                "output" => spec.output = Some(PathBuf::from(value)),
                _ => return Err(spec_err(line, format!("unknown key {key}"))),
            }
        }
        for (key, empty) in [
            ("kernel", spec.kernels.is_empty()),
            ("N", spec.n.is_empty()),
            ("K", spec.k.is_empty()),
            ("F", spec.f.is_empty()),
        ] {
            if empty {
                return Err(CliError::Usage(format!("spec: missing key {key}")));
            }
        }
        if spec.config == ConfigSource::Table1 && spec.kernels.contains(&KernelKind::Special) {
            return Err(spec_err(config_line, "table1 applies to the general kernel only"));
        }
        if spec.config == ConfigSource::Explicit {
            for kernel in &spec.kernels {
                let needed: &[(&str, bool)] = match kernel {
                    KernelKind::Special => &[("W", spec.w.is_empty()), ("H", spec.h.is_empty())],
                    KernelKind::General => &[
                        ("W", spec.w.is_empty()),
                        ("H", spec.h.is_empty()),
                        ("F_TB", spec.f_tb.is_empty()),
                        ("W_T", spec.w_t.is_empty()),
                        ("F_T", spec.f_t.is_empty()),
                        ("C_SH", spec.c_sh.is_empty()),
                    ],
                };
                if let Some((key, _)) = needed.iter().find(|(_, e)| *e) {
                    return Err(CliError::Usage(format!(
                        "spec: explicit {} configs need key {key}",
                        kernel.name()
                    )));
                }
            }
        }
        Ok(spec)
    }

    pub fn model(&self) -> CliResult<MemModel> {
        Ok(MemModel::new(self.bank_width, self.elem_width)?)
    }
}

/// Parallelism from [`THREADS_ENV`]; 1 when unset.
pub fn threads_from_env() -> CliResult<usize> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(1),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(t) if t > 0 => Ok(t),
            _ => Err(CliError::Usage(format!(
                "{THREADS_ENV} must be a positive integer, got `{v}`"
            ))),
        },
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct Job {
    kernel: KernelKind,
    n: usize,
    k: usize,
    c: usize,
    f: usize,
    /// Explicit tiling fields in column order, empty when resolved later.
    fields: Vec<usize>,
}

fn cross(lists: &[&[usize]]) -> Vec<Vec<usize>> {
    lists.iter().fold(vec![Vec::new()], |acc, list| {
        acc.iter()
            .flat_map(|prefix| {
                list.iter().map(move |&v| {
                    let mut p = prefix.clone();
                    p.push(v);
                    p
                })
            })
            .collect()
    })
}

fn jobs(spec: &SweepSpec, model: &MemModel) -> Vec<Job> {
    let n_model = [model.n() as usize];
    let mut out = Vec::new();
    for &kernel in &spec.kernels {
        let field_sets = match (spec.config, kernel) {
            (ConfigSource::Explicit, KernelKind::Special) => {
                let vn = if spec.vec_n.is_empty() {
                    &n_model[..]
                } else {
                    &spec.vec_n[..]
                };
                cross(&[&spec.w, &spec.h, vn])
            }
            (ConfigSource::Explicit, KernelKind::General) => {
                let mut sets = cross(&[&spec.w, &spec.h, &spec.f_tb, &spec.w_t, &spec.f_t, &spec.c_sh]);
                if !spec.pad.is_empty() {
                    sets = sets
                        .into_iter()
                        .flat_map(|s| {
                            spec.pad.iter().map(move |&p| {
                                let mut s = s.clone();
                                s.push(p);
                                s
                            })
                        })
                        .collect();
                }
                sets
            }
            _ => vec![Vec::new()],
        };
        for &n in &spec.n {
            for &k in &spec.k {
                for &c in &spec.c {
                    for &f in &spec.f {
                        for fields in &field_sets {
                            out.push(Job {
                                kernel,
                                n,
                                k,
                                c,
                                f,
                                fields: fields.clone(),
                            });
                        }
                    }
                }
            }
        }
    }
    out.sort();
    out.dedup();
    out
}

fn or_default(list: &[usize], default: Vec<usize>) -> Vec<usize> {
    if list.is_empty() {
        default
    } else {
        list.to_vec()
    }
}

fn pow2_upto(max: usize) -> Vec<usize> {
    (0..).map(|e| 1usize << e).take_while(|&v| v <= max).collect()
}

/// Resolves a job's configuration, or explains why there is none.
fn resolve(spec: &SweepSpec, job: &Job, model: &MemModel) -> Result<KernelConfig, String> {
    let n = model.n() as usize;
    match (spec.config, job.kernel) {
        (ConfigSource::Explicit, KernelKind::Special) => Ok(KernelConfig::Special(SpecialConfig::new(
            job.fields[0],
            job.fields[1],
            job.fields[2],
        ))),
        (ConfigSource::Explicit, KernelKind::General) => {
            let v = &job.fields;
            Ok(KernelConfig::General(GeneralConfig {
                w: v[0],
                h: v[1],
                f_tb: v[2],
                w_t: v[3],
                f_t: v[4],
                c_sh: v[5],
                pad: v.get(6).copied().unwrap_or_else(|| conflict_free_pad(v[2], n)),
            }))
        }
        (ConfigSource::Table1, _) => GeneralConfig::table1(job.k, n)
            .map(KernelConfig::General)
            .ok_or_else(|| format!("no table1 config for K={}", job.k)),
        (ConfigSource::EnumerateBest, KernelKind::Special) => {
            let w = or_default(&spec.w, pow2_upto(256));
            let h = or_default(&spec.h, pow2_upto(256));
            enumerate_special_configs(job.k, job.f, job.n, model, &w, &h)
                .first()
                .map(|r| KernelConfig::Special(r.config))
                .ok_or_else(|| "no valid config in bounds".into())
        }
        (ConfigSource::EnumerateBest, KernelKind::General) => {
            let d = SearchBounds::for_filters(job.f);
            let bounds = SearchBounds {
                w: or_default(&spec.w, d.w),
                h: or_default(&spec.h, d.h),
                f_tb: or_default(&spec.f_tb, d.f_tb),
                w_t: or_default(&spec.w_t, d.w_t),
                f_t: or_default(&spec.f_t, d.f_t),
                c_sh: or_default(&spec.c_sh, d.c_sh),
            };
            enumerate_configs(job.k, job.c, job.f, job.n, model, &bounds)
                .first()
                .map(|r| KernelConfig::General(r.config))
                .ok_or_else(|| "no valid config in bounds".into())
        }
    }
}

struct Outcome {
    metrics: Metrics,
    report: CostReport,
    agreement: Agreement,
}

fn simulate(spec: &SweepSpec, job: &Job, cfg: &KernelConfig, model: &MemModel) -> Result<Outcome, String> {
    if job.n < job.k {
        return Err(format!("invalid: N={} is smaller than K={}", job.n, job.k));
    }
    let violations = validate_config(cfg, job.k, job.c, job.f, model);
    if !violations.is_empty() {
        let kind = if violations.iter().all(|v| v.is_capacity()) {
            "capacity"
        } else {
            "invalid"
        };
        return Err(format!("{kind}: {}", violation_lines(&violations)));
    }
    let (img, flt) = generate_problem(job.n, job.c, job.k, job.f, spec.seed).map_err(|e| e.to_string())?;
    let run_err = |e: conv_memsim::Error| format!("error: {e}");
    match cfg {
        KernelConfig::Special(s) => {
            let run = SpecialKernel::new(*s, *model).run(&img, &flt).map_err(run_err)?;
            let report = predict_special(s, job.k, job.f, job.n, job.n, model);
            Ok(Outcome {
                metrics: run.metrics,
                agreement: Agreement::special(&report, &run),
                report,
            })
        }
        KernelConfig::General(g) => {
            let run = GeneralKernel::new(*g, *model).run(&img, &flt).map_err(run_err)?;
            let report = predict_general(g, job.k, job.c, job.f, job.n, job.n, model);
            Ok(Outcome {
                metrics: run.metrics,
                agreement: Agreement::general(&report, &run, g, job.c),
                report,
            })
        }
    }
}

/// Parameter columns followed by [`METRICS_CSV_HEADER`],
/// [`COST_CSV_HEADER`] and [`AGREEMENT_CSV_HEADER`].
pub fn csv_header() -> String {
    format!(
        "kernel,N,K,C,F,config,W,H,n,F_TB,W_T,F_T,C_SH,pad,status,{METRICS_CSV_HEADER},{COST_CSV_HEADER},{AGREEMENT_CSV_HEADER}"
    )
}

fn config_columns(cfg: Option<&KernelConfig>) -> String {
    match cfg {
        Some(KernelConfig::Special(s)) => format!("{},{},{},,,,,", s.w, s.h, s.n),
        Some(KernelConfig::General(g)) => {
            format!("{},{},,{},{},{},{},{}", g.w, g.h, g.f_tb, g.w_t, g.f_t, g.c_sh, g.pad)
        }
        None => ",,,,,,,".into(),
    }
}

fn row(spec: &SweepSpec, job: &Job, model: &MemModel) -> String {
    let cfg = resolve(spec, job, model);
    let outcome = cfg
        .as_ref()
        .map_err(|e| format!("invalid: {e}"))
        .and_then(|c| simulate(spec, job, c, model));
    let params = format!(
        "{},{},{},{},{},{}",
        job.kernel.name(),
        job.n,
        job.k,
        job.c,
        job.f,
        spec.config.name()
    );
    let tiling = config_columns(cfg.as_ref().ok());
    let tail = match outcome {
        Ok(o) => format!(
            "ok,{},{},{}",
            o.metrics.csv_row(),
            o.report.csv_row(),
            o.agreement.csv_row()
        ),
        Err(msg) => {
            let blanks = ",".repeat(10 + 8 + 4);
            format!("{}{blanks}", msg.replace(',', ";"))
        }
    };
    format!("{params},{tiling},{tail}")
}

/// Runs every combination of `spec` on `threads` workers and returns the
/// CSV text. Row order does not depend on `threads`.
pub fn run_sweep(spec: &SweepSpec, threads: usize) -> CliResult<String> {
    let model = spec.model()?;
    let jobs = jobs(spec, &model);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {threads} worker threads: {e}")))?;
    let rows: Vec<String> = pool.install(|| jobs.par_iter().map(|j| row(spec, j, &model)).collect());
    let mut csv = csv_header();
    csv.push('\n');
    for r in rows {
        csv.push_str(&r);
        csv.push('\n');
    }
    Ok(csv)
}
