use std::fs;
use std::io::Write;

use conv_memsim::costmodel::{validate_config, KernelConfig};
use conv_memsim::general::GeneralKernel;
use conv_memsim::io::{read_tensor, write_tensor};
use conv_memsim::memsim::{Phase, METRICS_CSV_HEADER};
use conv_memsim::oracle::naive_convolve;
use conv_memsim::special::SpecialKernel;
use conv_memsim::{FilterBank, Image};

use crate::args::{KernelKind, OracleArgs, RunArgs, SweepArgs, ValidateArgs};
use crate::sweep::{run_sweep, threads_from_env, SweepSpec};
use crate::{
    build_model, general_config, generate_problem, special_config, CliError, CliResult, EXIT_OK, EXIT_VALIDATION,
};

fn load_inputs(image: &std::path::Path, filters: &std::path::Path) -> CliResult<(Image, FilterBank)> {
    Ok((
        Image::from_tensor(read_tensor(image)?)?,
        FilterBank::from_tensor(read_tensor(filters)?)?,
    ))
}

pub fn cmd_oracle(a: &OracleArgs, _out: &mut dyn Write) -> CliResult<i32> {
    let (img, flt) = load_inputs(&a.image, &a.filters)?;
    let result = naive_convolve(&img, &flt)?;
    write_tensor(&a.out, result.as_tensor())?;
    Ok(EXIT_OK)
}

pub fn cmd_run(a: &RunArgs, out: &mut dyn Write) -> CliResult<i32> {
    let model = build_model(&a.model)?;
    let (img, flt) = match (&a.image, &a.filters, a.gen) {
        (Some(i), Some(f), _) => load_inputs(i, f)?,
        (_, _, Some(g)) => generate_problem(g.n, g.c, g.k, g.f, a.seed)?,
        _ => return Err(CliError::Usage("give --image and --filters, or --gen".into())),
    };
    let run = match a.kernel {
        KernelKind::Special => {
            let kernel = SpecialKernel::new(special_config(&a.config, &model)?, model);
            if a.unmatched {
                kernel.run_unmatched(&img, &flt)?
            } else {
                kernel.run(&img, &flt)?
            }
        }
        KernelKind::General => {
            if a.unmatched {
                return Err(CliError::Usage("--unmatched applies to the special kernel only".into()));
            }
            GeneralKernel::new(general_config(&a.config, &model)?, model).run(&img, &flt)?
        }
    };
    if let Some(p) = &a.out {
        write_tensor(p, run.output.as_tensor())?;
    }
    if let Some(p) = &a.metrics {
        fs::write(p, format!("{METRICS_CSV_HEADER}\n{}\n", run.metrics.csv_row()))?;
    }
    if let Some(p) = &a.phases {
        let mut csv = String::from("phase,requests,cost,bytes\n");
        for ph in Phase::ALL {
            let s = run.phases.get(ph);
            csv.push_str(&format!("{ph:?},{},{},{}\n", s.requests, s.cost, s.bytes));
        }
        fs::write(p, csv)?;
    }
    let m = &run.metrics;
    writeln!(
        out,
        "kernel={} gm_tx={} sm_cycles={} conflicts={}",
        a.kernel.name(),
        m.gm_transactions,
        m.sm_cycles,
        m.sm_conflict_excess
    )?;
    Ok(EXIT_OK)
}

pub fn cmd_sweep(a: &SweepArgs, out: &mut dyn Write) -> CliResult<i32> {
    let text = fs::read_to_string(&a.spec)?;
    let spec = SweepSpec::parse(&text)?;
    let csv = run_sweep(&spec, threads_from_env()?)?;
    let target = a.out.clone().or_else(|| spec.output.clone());
    match target {
        Some(p) if p.as_os_str() != "-" => fs::write(p, csv)?,
        _ => out.write_all(csv.as_bytes())?,
    }
    Ok(EXIT_OK)
}

pub fn cmd_validate(a: &ValidateArgs, out: &mut dyn Write) -> CliResult<i32> {
    let model = build_model(&a.model)?;
    let (cfg, c, f) = match a.kernel {
        KernelKind::Special => {
            let s = special_config(&a.config, &model)?;
            (KernelConfig::Special(s), a.c.unwrap_or(1), a.f.unwrap_or(1))
        }
        KernelKind::General => {
            let g = general_config(&a.config, &model)?;
            (KernelConfig::General(g), a.c.unwrap_or(g.c_sh), a.f.unwrap_or(g.f_tb))
        }
    };
    let violations = validate_config(&cfg, a.k, c, f, &model);
    if violations.is_empty() {
        writeln!(out, "ok")?;
        return Ok(EXIT_OK);
    }
    for v in &violations {
        writeln!(out, "{v}")?;
    }
    Ok(EXIT_VALIDATION)
}
