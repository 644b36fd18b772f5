//! Compares the hand-written tuner gradients with central finite differences,
//! then shows that a deliberately broken gradient is caught.
//!
//!     cargo run --example gradient_check

use mmp_ood::tuner::{gradcheck, GradcheckConfig, ParamGroup};

fn main() -> mmp_ood::Result<()> {
    let report = gradcheck(&GradcheckConfig::default())?;
    for g in &report.groups {
        println!("{:<8} {:>5} params  max rel err {:.2e}", g.group, g.params, g.max_rel_error);
    }
    println!("overall {:.2e} (tolerance {:.0e}) pass={}", report.max_rel_error, report.tolerance, report.pass);

    let broken = gradcheck(&GradcheckConfig {
        mutate: Some(ParamGroup::Sigma),
        ..Default::default()
    })?;
    println!("with a corrupted sigma gradient: pass={}", broken.pass);
    Ok(())
}
