use std::time::Instant;
use torus_zeros::suites::{run_suite, Suite, SuiteConfig};

#[test]
fn every_suite_passes_at_default_tolerances() {
    let cfg = SuiteConfig { seed: 20240601, ..Default::default() };
    for s in Suite::ALL {
        let t = Instant::now();
        let o = run_suite(s, &cfg).unwrap();
        for e in &o.extrema {
            println!("{s} {} worst {:e} at {} ({} checks, {} failed)", e.check, e.worst, e.case, e.count, e.failures);
        }
        println!("{s}: {:.2?}", t.elapsed());
        assert!(o.pass, "{s}");
    }
}
