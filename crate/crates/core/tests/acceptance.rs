//! The full verification suite at its stated tolerances, one line per
//! criterion.

use calogero::suite::{SuiteSettings, CRITERIA};

#[test]
fn acceptance() {
    let settings = SuiteSettings::default();
    let mut failed = Vec::new();
    for (i, (title, criterion)) in CRITERIA.iter().enumerate() {
        let checks = match criterion(&settings) {
            Ok(c) => c,
            Err(e) => {
                println!("FAIL {:>2} {title}: {e}", i + 1);
                failed.push(i + 1);
                continue;
            }
        };
        let ok = checks.iter().all(|c| c.passed);
        let detail: Vec<String> = checks
            .iter()
            .map(|c| {
                let meta: Vec<String> = c.meta.iter().map(|(k, v)| format!("{k}={v}")).collect();
                format!("{} {:.3e} <= {:.1e} [{}]", c.name, c.residual, c.tolerance, meta.join(" "))
            })
            .collect();
        println!("{} {:>2} {title}: {}", if ok { "PASS" } else { "FAIL" }, i + 1, detail.join("; "));
        if !ok {
            failed.push(i + 1);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
