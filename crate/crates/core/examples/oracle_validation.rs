//! Runs the built-in oracle suite and prints the table the CLI shows.

use stss::validation::{render, run_suite};

fn main() {
    let checks = run_suite();
    print!("{}", render(&checks));
    if checks.iter().any(|c| !c.passed) {
        std::process::exit(1);
    }
}
