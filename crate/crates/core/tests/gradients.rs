mod common;

use common::{all_configurations, PROBES};

#[test]
fn finite_differences_agree_everywhere() {
    let reports = all_configurations();
    let mut failures = Vec::new();
    for r in &reports {
        println!("{:<60} probes={} worst_rel={:.2e} at {:?}", r.name, r.probes, r.worst, r.at_worst);
        assert!(r.probes >= PROBES);
        if r.worst > 1e-5 {
            failures.push(r.name.clone());
        }
    }
    assert!(failures.is_empty(), "gradient mismatch in {failures:?}");
}
