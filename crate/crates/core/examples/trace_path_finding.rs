//! Trace a trained Path Finding model round by round and write one DOT file
//! per round; render with `dot -Tpng frame-00003.dot -o f3.png`.
//!
//! cargo run --release --example trace_path_finding -- [out_dir]

use std::path::PathBuf;

use recgnn::export::{dot_frame, trace_jsonl};
use recgnn::model::{ConvType, ModelConfig};
use recgnn::taskgen::{generate, split_dataset, GeneratorConfig};
use recgnn::train::{eval_graphs, train, TrainConfig};
use recgnn::TaskTag;

fn main() -> recgnn::Result<()> {
    let out_dir = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("recgnn-trace"));
    std::fs::create_dir_all(&out_dir).map_err(|e| recgnn::Error::Io { path: out_dir.clone(), source: e })?;
    let graphs = generate(&GeneratorConfig {
        task: TaskTag::PathFinding,
        num_graphs: 200,
        graph_size: 10,
        seed: 1,
    })?;
    let (train_set, val_set) = split_dataset(&graphs, 0.8)?;
    let cfg = TrainConfig {
        epochs: 60,
        ..TrainConfig::default()
    };
    let best = train(ModelConfig::new(ConvType::RecGruE, 1), &cfg, 0, &train_set, &val_set)?.best;

    let graph = eval_graphs(TaskTag::PathFinding, 30, 1, 0)?.remove(0);
    let (_, trace) = best.model()?.forward_trace(&graph, 36)?;
    std::fs::write(out_dir.join("trace.jsonl"), trace_jsonl(&graph, &trace))
        .map_err(|e| recgnn::Error::Io { path: out_dir.clone(), source: e })?;
    for frame in &trace.frames {
        let path = out_dir.join(format!("frame-{:05}.dot", frame.round));
        std::fs::write(&path, dot_frame(&graph, &frame.predictions, frame.round)?)
            .map_err(|e| recgnn::Error::Io { path, source: e })?;
        let on_path = frame.predictions.iter().filter(|&&p| p == 1).count();
        let correct = frame.predictions.iter().zip(graph.labels()).filter(|(p, l)| p == l).count();
        println!("round {:>3}: {on_path:>2} nodes predicted on the path, {correct}/30 correct", frame.round);
    }
    println!("frames written to {}", out_dir.display());
    Ok(())
}
