mod args;
mod pipeline;
mod report;
mod spec;

use std::process::ExitCode;

use clap::Parser;
use gshap::selfcheck::{all_passed, render_table, run_selfcheck, SelfCheckOptions};

use args::{Cli, Command, ExplainArgs, SelfcheckArgs};
use pipeline::{AtStage, Failure};

fn explain(a: &ExplainArgs) -> Result<(), Failure> {
    let report = pipeline::run_explain(a)?;
    report::write(&a.out_report, &report.to_json())
        .map_err(gshap::Error::from)
        .at("report")?;
    if let Some(path) = &a.out_figure_data {
        report::write(path, &report.figure_csv())
            .map_err(gshap::Error::from)
            .at("report")?;
    }
    print!("{}", report.summary());
    Ok(())
}

fn selfcheck(a: &SelfcheckArgs) -> Result<(), Failure> {
    let checks = run_selfcheck(&SelfCheckOptions {
        seed: a.seed,
        perturb_weights: a.perturb_weights,
    })
    .at("selfcheck")?;
    print!("{}", render_table(&checks));
    if all_passed(&checks) {
        return Ok(());
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    Err(Failure {
        stage: "selfcheck",
        kind: gshap::ErrorKind::Compute,
        message: format!("{failed} of {} checks failed", checks.len()),
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Explain(a) => explain(a),
        Command::Selfcheck(a) => selfcheck(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{f}");
            ExitCode::from(f.exit_code() as u8)
        }
    }
}
