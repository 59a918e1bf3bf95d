//! Prints one PASS or FAIL line per acceptance criterion and exits non-zero
//! if any fails.

use std::io::Write;
use std::process::ExitCode;
use std::time::Instant;

use gameofn_validation as v;

fn report(index: usize, name: &str, started: Instant, result: anyhow::Result<v::Outcome>) -> bool {
    let (pass, detail) = match result {
        Ok(o) => (o.pass, o.detail),
        Err(e) => (false, format!("error: {e:#}")),
    };
    println!(
        "{} {index} {name}: {detail} [{:.1}s]",
        if pass { "PASS" } else { "FAIL" },
        started.elapsed().as_secs_f64()
    );
    let _ = std::io::stdout().flush();
    pass
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().collect();
    if args.iter().any(|a| a == "--list") {
        return ExitCode::SUCCESS;
    }
    let mut all = true;
    let t = Instant::now();
    all &= report(1, "oracle soundness", t, v::oracle_soundness());
    let t = Instant::now();
    all &= report(2, "decoding equivalence", t, v::decoding_equivalence());
    let t = Instant::now();
    all &= report(3, "gradient check", t, v::gradient_check());
    let t = Instant::now();
    all &= report(4, "sampling proportional to reward", t, v::gflownet_contract());

    // Three seeds of the shipped default config, plus a second seed-0 run
    // in a fresh directory for the reproducibility checks.
    let t = Instant::now();
    let dirs: Vec<tempfile::TempDir> = (0..4).map(|_| tempfile::tempdir().expect("temp dir")).collect();
    let runs: anyhow::Result<Vec<v::SeedRun>> = (0..3).map(|s| v::run_default(s, dirs[s as usize].path())).collect();
    let repeat = v::run_default(0, dirs[3].path());

    let models = match &runs {
        Ok(r) => v::trained_models(r),
        Err(_) => v::untrained_models(),
    };
    let t5 = Instant::now();
    all &= report(5, "metric semantics", t5, models.and_then(|m| v::metric_semantics(&m)));
    all &= report(
        6,
        "trained beats untrained on lowdiv-24",
        t,
        runs.as_ref().map_err(|e| anyhow::anyhow!("{e:#}")).and_then(|r| v::directional_reproduction(r)),
    );
    let t = Instant::now();
    let pair = match (&runs, &repeat) {
        (Ok(r), Ok(again)) => Ok((&r[0], again)),
        (Err(e), _) | (_, Err(e)) => Err(anyhow::anyhow!("{e:#}")),
    };
    all &= report(
        7,
        "transfer gap report complete and reproducible",
        t,
        pair.as_ref().map_err(|e| anyhow::anyhow!("{e:#}")).and_then(|(a, b)| v::transfer_gap_report(a, b)),
    );
    let t = Instant::now();
    all &= report(8, "more solvable tuples for 42 than for 24", t, v::solvable_counts());
    let t = Instant::now();
    all &= report(
        9,
        "identical bytes for identical seeds",
        t,
        pair.and_then(|(a, b)| v::determinism(a, b)),
    );
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
