//! One line per acceptance criterion; exits nonzero if any fails.

use p2atlas::exec::Exec;
use p2atlas::suite::Suite;

fn main() {
    let suite = Suite::new(Exec::default(), 0);
    let mut failed = vec![];
    for id in 1..=14 {
        let r = suite.run(id);
        println!("{}", r.line());
        if !r.passed() {
            failed.push(id);
        }
    }
    if failed.is_empty() {
        println!("acceptance: 14/14 criteria pass");
    } else {
        println!("acceptance: failing criteria {failed:?}");
        std::process::exit(1);
    }
}
