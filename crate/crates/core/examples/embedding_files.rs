//! Writing and reading the binary embedding format, and building prototype
//! files from it.
//!
//!     cargo run --example embedding_files

use mmp_ood::store::normalize_set;
use mmp_ood::{
    compute_image_prototypes, load_embedding_set, save_embedding_set, EmbeddingRecord, EmbeddingSet, Modality,
    PrototypeSet,
};

fn main() -> mmp_ood::Result<()> {
    let classes = vec!["cat".to_string(), "dog".to_string()];
    let records = vec![
        EmbeddingRecord::new("0", Some(0), vec![3.0, 0.5, 0.0]),
        EmbeddingRecord::new("1", Some(0), vec![2.0, -0.5, 0.0]),
        EmbeddingRecord::new("2", Some(1), vec![0.0, 1.0, 4.0]),
        EmbeddingRecord::new("3", None, vec![1.0, 1.0, 1.0]),
    ];
    let raw = EmbeddingSet::new(3, classes.clone(), Modality::Image, false, records)?;
    let unit = normalize_set(&raw)?;

    let dir = std::env::temp_dir();
    let path = dir.join("mmp-ood-example.emb");
    save_embedding_set(&unit, &path)?;
    let back = load_embedding_set(&path)?;
    println!("{} records of dim {} read back from {}", back.len(), back.dim(), path.display());
    for r in back.records() {
        println!("  {:>2} label {:?} {:?}", r.id, r.label, r.vector);
    }

    // Unlabeled rows are ignored when averaging.
    let protos = compute_image_prototypes(&back, true)?;
    let proto_path = dir.join("mmp-ood-example-protos.emb");
    save_embedding_set(&protos.to_embedding_set(&classes)?, &proto_path)?;
    let reread = PrototypeSet::from_embedding_set(&load_embedding_set(&proto_path)?)?;
    for (name, v) in classes.iter().zip(reread.vectors()) {
        println!("prototype {name}: {v:.4?}");
    }
    Ok(())
}
