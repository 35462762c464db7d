//! `gradcheck`: run the oracle and finite-difference suites, print one
//! line per check, exit nonzero if anything fails.

use clap::Args;
use scsr::verify::suites::{run_gradient_suite, run_module_suite, run_oracle_suite, CheckModule, SuiteReport};
use scsr::{Error, Result};

fn parse_module(s: &str) -> std::result::Result<CheckModule, String> {
    s.parse().map_err(|e| format!("{e}"))
}

#[derive(Args, Debug)]
pub struct GradcheckArgs {
    /// Restrict to one module's checks; all suites run when omitted.
    #[arg(long, value_parser = parse_module)]
    pub module: Option<CheckModule>,
    /// Seed for the randomized check inputs.
    #[arg(long, default_value_t = 0xC0FFEE)]
    pub seed: u64,
}

pub fn run(args: &GradcheckArgs) -> Result<()> {
    let reports: Vec<SuiteReport> = match args.module {
        Some(module) => vec![run_module_suite(module, args.seed)?],
        None => vec![run_oracle_suite(args.seed)?, run_gradient_suite(args.seed)?],
    };
    let mut failed = 0usize;
    for report in &reports {
        print!("{}", report.render());
        failed += report.failures().count();
    }
    if failed > 0 {
        return Err(Error::InvalidArgument {
            op: "gradcheck",
            detail: format!("{failed} check(s) failed"),
        });
    }
    Ok(())
}
