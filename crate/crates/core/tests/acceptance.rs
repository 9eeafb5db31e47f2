use std::process::ExitCode;

use skewmix_core::suite::{run_criterion, SuiteConfig, CRITERIA};

fn main() -> ExitCode {
    let cfg = SuiteConfig::default();
    let mut failed = 0;
    for id in 1..=CRITERIA.len() {
        match run_criterion(id, &cfg) {
            Ok(r) => {
                println!("{}", r.line());
                for i in &r.info {
                    println!("       info: {i}");
                }
                failed += usize::from(!r.pass);
            }
            Err(e) => {
                println!("[FAIL] criterion {id:>2} {}: error: {e}", CRITERIA[id - 1]);
                failed += 1;
            }
        }
    }
    println!("{} of {} criteria passed", CRITERIA.len() - failed, CRITERIA.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
