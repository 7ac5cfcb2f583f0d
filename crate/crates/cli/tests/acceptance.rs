//! Runs every acceptance criterion at full scale and prints one line per criterion.
//!
//! Criterion 12 is checked twice: in process (thread pools of 1 and 4) and by
//! running the built binary three times and comparing the files byte for byte.

use std::fs;
use std::process::{Command, ExitCode};
use std::time::Instant;

use nelsonbath::config::Scale;
use nelsonbath::selftest::{run_criterion, CriterionResult};
use nelsonbath::DEFAULT_SEED;

fn binary_determinism() -> Result<String, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut outputs = Vec::new();
    for (i, threads) in [1, 1, 4].into_iter().enumerate() {
        let path = dir.path().join(format!("selftest-{i}.csv"));
        let status = Command::new(env!("CARGO_BIN_EXE_nelsonbath"))
            .args(["selftest", "--scale", "quick", "--quiet", "--seed", &DEFAULT_SEED.to_string()])
            .args(["--threads", &threads.to_string(), "--output"])
            .arg(&path)
            .status()
            .map_err(|e| e.to_string())?;
        if !status.success() {
            return Err(format!("run {i} exited with {status}"));
        }
        outputs.push(fs::read(&path).map_err(|e| e.to_string())?);
    }
    if outputs.iter().all(|o| o == &outputs[0]) {
        Ok(format!("binary: 3 runs at 1/1/4 threads, {} identical bytes", outputs[0].len()))
    } else {
        Err("binary outputs differ".into())
    }
}

fn main() -> ExitCode {
    let mut results: Vec<CriterionResult> = Vec::new();
    for id in 1..=12 {
        let start = Instant::now();
        let mut r = run_criterion(id, DEFAULT_SEED, Scale::Full);
        if id == 12 {
            match binary_determinism() {
                Ok(msg) => r.detail = format!("{}; {msg}", r.detail),
                Err(msg) => {
                    r.passed = false;
                    r.detail = format!("{}; {msg}", r.detail);
                }
            }
        }
        println!("{}  [{:.1}s]", r.line(), start.elapsed().as_secs_f64());
        results.push(r);
    }
    let failed: Vec<u32> = results.iter().filter(|r| !r.passed).map(|r| r.id).collect();
    if failed.is_empty() {
        println!("acceptance: all {} criteria passed", results.len());
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failed criteria {failed:?}");
        ExitCode::FAILURE
    }
}
