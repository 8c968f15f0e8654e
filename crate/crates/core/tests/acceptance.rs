//! Runs every acceptance criterion at its stated tolerance and prints one
//! line per criterion. Exits nonzero if any fails.

use nested_ki::verify::{criteria, Hooks};

fn main() {
    let hooks = Hooks::default();
    let mut failed = Vec::new();
    for c in criteria() {
        let outcome = c.run(&hooks);
        println!("{outcome}");
        if !outcome.passed {
            failed.push(outcome.id);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all {} criteria passed", criteria().len());
    } else {
        println!("acceptance: {} of {} criteria failed: {failed:?}", failed.len(), criteria().len());
        std::process::exit(1);
    }
}
