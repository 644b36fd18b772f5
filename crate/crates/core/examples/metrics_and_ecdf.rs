//! Threshold-free metrics and empirical CDF export on hand-made score lists.
//!
//!     cargo run --example metrics_and_ecdf

use mmp_ood::metrics::{auroc, ecdf, fpr_at_tpr, ks_statistic, write_ecdf_csv};

fn main() -> mmp_ood::Result<()> {
    let id = [0.91, 0.88, 0.85, 0.85, 0.70, 0.64, 0.97, 0.80];
    let ood = [0.40, 0.85, 0.55, 0.62, 0.30, 0.71];

    let (fpr, threshold) = fpr_at_tpr(&id, &ood, 0.95)?;
    println!("FPR@95 {fpr:.4} at threshold {threshold}");
    println!("AUROC {:.4}", auroc(&id, &ood)?);
    println!("KS {:.4}", ks_statistic(&id, &ood)?);

    for (x, f) in ecdf(&ood)? {
        println!("  F_ood({x:.2}) = {f:.3}");
    }
    let mut csv = Vec::new();
    write_ecdf_csv(&id, &mut csv)?;
    print!("{}", String::from_utf8_lossy(&csv));
    Ok(())
}
