//! One line per acceptance criterion with its measured value; exits nonzero if any fails.

fn main() {
    let report = vrfsim::runner::validate::run_all(None);
    println!("{report}");
    if !report.passed() {
        std::process::exit(1);
    }
}
