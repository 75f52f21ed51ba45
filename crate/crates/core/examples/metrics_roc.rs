//! Confusion matrix, averaged metrics and one-vs-rest ROC curves for a
//! small three-class prediction.

use qmsvm::metrics::{classification_metrics, confusion, roc_curves};

fn main() -> qmsvm::Result<()> {
    let truth = [1, 1, 1, 2, 2, 2, 3, 3, 3, 3];
    let scores = vec![
        vec![0.9, 0.1, 0.0],
        vec![0.6, 0.3, 0.1],
        vec![0.3, 0.5, 0.2],
        vec![0.2, 0.7, 0.1],
        vec![0.1, 0.8, 0.1],
        vec![0.4, 0.4, 0.2],
        vec![0.1, 0.2, 0.7],
        vec![0.0, 0.3, 0.7],
        vec![0.2, 0.1, 0.7],
        vec![0.5, 0.1, 0.4],
    ];
    let pred: Vec<usize> = scores.iter().map(|s| qmsvm::svm::predict_from_values(s)).collect();
    let cm = confusion(&truth, &pred, 3)?;
    println!("{}", cm.to_text());
    println!("{}", classification_metrics(&cm)?.to_text());
    println!("{}", roc_curves(&truth, &scores, 3)?.to_text());
    Ok(())
}
