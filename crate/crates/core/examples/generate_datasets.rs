//! Generate the three tasks, check every label against the oracle and write
//! them as JSON-lines files.
//!
//! cargo run --release --example generate_datasets -- [out_dir]

use std::path::PathBuf;

use recgnn::dataset::{read_jsonl, write_jsonl};
use recgnn::taskgen::{class_weights, generate, oracle_labels, split_dataset, GeneratorConfig};
use recgnn::TaskTag;

fn main() -> recgnn::Result<()> {
    let out_dir = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("recgnn-data"));
    std::fs::create_dir_all(&out_dir).map_err(|e| recgnn::Error::Io { path: out_dir.clone(), source: e })?;

    for task in TaskTag::ALL {
        let graphs = generate(&GeneratorConfig {
            task,
            num_graphs: 200,
            graph_size: 10,
            seed: 1,
        })?;
        for g in &graphs {
            assert_eq!(oracle_labels(g)?, g.labels(), "generator and oracle disagree");
        }
        let path = out_dir.join(format!("{task}-n10.jsonl"));
        write_jsonl(&path, &graphs)?;
        assert_eq!(read_jsonl(&path)?, graphs);

        let (train, val) = split_dataset(&graphs, 0.8)?;
        let weights = class_weights(&train)?;
        println!(
            "{task:<13} {} train / {} validation graphs, class weights [{:.3}, {:.3}] -> {}",
            train.len(),
            val.len(),
            weights[0],
            weights[1],
            path.display()
        );
    }
    Ok(())
}
