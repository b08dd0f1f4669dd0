//! Acceptance runner: one PASS/FAIL line per criterion, non-zero exit on
//! any failure.

mod common;

fn main() {
    let only: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for c in common::criteria() {
        if !only.is_empty() && !only.contains(&c.id) {
            continue;
        }
        let (ok, detail, took) = common::run(&c);
        println!(
            "criterion {} {:<26} {} ({:.1}s) {}",
            c.id,
            c.name,
            if ok { "PASS" } else { "FAIL" },
            took.as_secs_f64(),
            detail
        );
        failed += usize::from(!ok);
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
