//! Simultaneous space-time convergence study at t = 0.5.
//!
//! By default a quick study against an m = 256 reference. Pass `--paper` to run
//! the published row sets against the m = 1024, k = 2^-13 reference (a few minutes).
//!
//! cargo run --release --example convergence_study [-- --paper]

use dimsplit::experiments::{
    compute_reference, run_convergence_with_reference, ExperimentConfig, ReferenceSpec, Row,
    PAPER_DR_ERRORS, PAPER_PR_ERRORS,
};
use dimsplit::Scheme;

fn main() -> dimsplit::Result<()> {
    let paper = std::env::args().any(|a| a == "--paper");
    let (mut pr, mut dr) = (ExperimentConfig::paper_pr(), ExperimentConfig::paper_dr());
    if !paper {
        let reference = ReferenceSpec {
            m: 256,
            k: 1.0 / 2048.0,
            scheme: Scheme::PeacemanRachford,
        };
        pr.rows = (4..=6).map(|e| Row::new(2f64.powi(-e), 1 << e)).collect();
        pr.reference = reference;
        dr.rows = vec![
            Row::new(1.0 / 128.0, 16),
            Row::new(1.0 / 256.0, 23),
            Row::new(1.0 / 512.0, 32),
        ];
        dr.reference = reference;
    }

    let reference = compute_reference(&pr)?;
    let pr_report = run_convergence_with_reference(&pr, &reference)?;
    let dr_report = run_convergence_with_reference(&dr, &reference)?;
    print!("{pr_report}\n{dr_report}");

    if paper {
        println!("\nratio to the published errors");
        for (name, report, published) in [
            ("PR", &pr_report, PAPER_PR_ERRORS),
            ("DR", &dr_report, PAPER_DR_ERRORS),
        ] {
            let ratios: Vec<String> = report
                .errors()
                .iter()
                .zip(published)
                .map(|(e, p)| format!("{:.2}", e / p))
                .collect();
            println!("{name}: {}", ratios.join(" "));
        }
    }
    pr_report.write_csv(std::io::stdout().lock())?;
    Ok(())
}
